#pragma once

#include "axmlp/dataset.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace axmlp {

struct Topology {
    int n_in = 0;
    int n_hidden = 0;
    int n_out = 0;
};

struct FloatMLP {
    Topology topology;
    // w1: n_hidden x n_in, w2: n_out x n_hidden (row  = one neuron)
    std::vector<std::vector<double>> w1, w2;
    std::vector<double> b1, b2;
};

struct Po2 {
    int sign = 0; // -1, 0, +1; 0 encodes an exactly-zero weight
    int exp = 0;

    double value() const { return sign == 0 ? 0.0 : sign * std::pow(2.0, exp); }
    bool operator==(const Po2& o) const { return sign == o.sign && (sign == 0 || exp == o.exp); }
};

struct QReluConfig {
    int out_bits = 8;
    std::vector<int> truncate_lsb; // one entry per hidden neuron
};

struct QuantMLP {
    Topology topology;
    int input_bits = 4;
    QReluConfig qrelu;
    // layers[0]: hidden (n_hidden x n_in), layers[1]: output (n_out x n_hidden)
    struct Layer {
        std::vector<std::vector<Po2>> weights;
        std::vector<Po2> biases;
    };
    std::vector<Layer> layers;
};

struct TrainConfig {
    double lr = 0.05;
    int batch = 32;
    int epochs = 500;
    uint64_t seed = 1;
};

// Plain mini-batch SGD, Relu hidden layer, softmax cross-entropy. Returns the
// parameters with the best train accuracy seen over epochs (the untouched
// initialization counts as epoch zero).
FloatMLP train_float(const Dataset& train, const Topology& topology, const TrainConfig& cfg);

double float_accuracy(const FloatMLP& m, const Dataset& data);

Po2 po2_quantize(double w, int weight_bits = 8);

// Divides first-layer weights by `divisor` so a model trained on v/divisor
// features can run on raw integer inputs. Biases are left untouched.
FloatMLP fold_input_scale(const FloatMLP& m, double divisor);

// po2-quantizes every weight and bias; qrelu starts as identity (truncate 0).
QuantMLP po2_quantize_mlp(const FloatMLP& m, int input_bits, int weight_bits = 8);

// Smallest shift that makes every weight/bias exponent non-negative; all
// integer accumulation happens in units of 2^-alignment.
int alignment_of(const QuantMLP& m);

inline int64_t qrelu_int(int64_t acc_units, int shift_total, int out_bits) {
    if (acc_units <= 0)
        return 0;
    int64_t v = acc_units >> shift_total;
    int64_t top = (1ll << out_bits) - 1;
    return v > top ? top : v;
}

// Per hidden neuron, picks truncate_lsb so out_bits retained bits cover the
// 99th percentile of positive pre-activations observed on the train set.
QReluConfig fit_qrelu(const QuantMLP& m, const QuantizedDataset& train, int out_bits = 8);

// Straight-through-estimator retraining: forward uses po2 weights + QRelu,
// gradients flow through both quantizers. Returns the po2 model snapshot with
// the best quantized train accuracy; epochs = 0 quantizes without training.
QuantMLP qat_retrain(const FloatMLP& m, const QuantizedDataset& train, const QReluConfig& qrelu, int epochs,
                     uint64_t seed, double lr = 0.05, int batch = 32, int weight_bits = 8);

std::string float_mlp_to_json(const FloatMLP& m);
FloatMLP float_mlp_from_json(const std::string& text);
std::string quant_mlp_to_json(const QuantMLP& m);
QuantMLP quant_mlp_from_json(const std::string& text);
void save_quant_mlp(const std::string& path, const QuantMLP& m);
QuantMLP load_quant_mlp(const std::string& path);

} // namespace axmlp
