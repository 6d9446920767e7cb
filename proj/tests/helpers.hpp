#pragma once

// Shared fixtures for the test suite: scratch directories, random model and
// dataset generators, and an independent plain-arithmetic forward pass used
// as the reference oracle for the bit-exact inference engine.

#include "axmlp/adder_tree.hpp"
#include "axmlp/dataset.hpp"
#include "axmlp/mlp.hpp"
#include "axmlp/rng.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

namespace testutil {

class ScratchDir {
  public:
    explicit ScratchDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("axmlp_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~ScratchDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    std::string str() const { return path_.string(); }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

  private:
    std::filesystem::path path_;
};

inline axmlp::Po2 random_po2(axmlp::Rng& rng, bool allow_zero = true) {
    axmlp::Po2 w;
    int s = (int)rng.below(allow_zero ? 3 : 2);
    if (allow_zero && s == 2)
        return w; // zero weight
    w.sign = s == 0 ? 1 : -1;
    w.exp = (int)rng.below(8) - 4; // [-4, 3]
    return w;
}

// Small random quantized model; every layer is guaranteed at least one
// nonzero weight so the layout always has genes.
inline axmlp::QuantMLP random_model(axmlp::Rng& rng, int n_in, int n_hidden, int n_out, int input_bits = 4) {
    axmlp::QuantMLP m;
    m.topology = {n_in, n_hidden, n_out};
    m.input_bits = input_bits;
    m.qrelu.out_bits = 8;
    m.qrelu.truncate_lsb.assign((size_t)n_hidden, 0);
    for (int k = 0; k < n_hidden; ++k)
        m.qrelu.truncate_lsb[(size_t)k] = (int)rng.below(3);
    m.layers.resize(2);
    auto fill = [&](axmlp::QuantMLP::Layer& layer, int rows, int cols) {
        layer.weights.assign((size_t)rows, std::vector<axmlp::Po2>((size_t)cols));
        layer.biases.assign((size_t)rows, axmlp::Po2{});
        bool any = false;
        for (auto& row : layer.weights)
            for (auto& w : row) {
                w = random_po2(rng);
                any = any || w.sign != 0;
            }
        if (!any)
            layer.weights[0][0] = {1, 0};
        for (auto& b : layer.biases)
            if (rng.bernoulli(0.5))
                b = random_po2(rng, false);
    };
    fill(m.layers[0], n_hidden, n_in);
    fill(m.layers[1], n_out, n_hidden);
    return m;
}

inline std::vector<uint32_t> random_input(axmlp::Rng& rng, int n_in, int input_bits) {
    std::vector<uint32_t> x((size_t)n_in);
    for (auto& v : x)
        v = (uint32_t)rng.below(1ull << input_bits);
    return x;
}

inline axmlp::QuantizedDataset random_qdataset(axmlp::Rng& rng, const axmlp::QuantMLP& m, size_t n_samples) {
    axmlp::QuantizedDataset d;
    d.input_bits = m.input_bits;
    d.n_classes = m.topology.n_out;
    for (size_t i = 0; i < n_samples; ++i) {
        d.features.push_back(random_input(rng, m.topology.n_in, m.input_bits));
        d.labels.push_back((int)rng.below((uint64_t)m.topology.n_out));
    }
    return d;
}

inline axmlp::Chromosome random_chromosome(axmlp::Rng& rng, size_t genes, double keep_prob) {
    axmlp::Chromosome c(genes);
    for (auto& g : c)
        g = rng.bernoulli(keep_prob) ? 1 : 0;
    return c;
}

// Independent reference forward pass: walks the weights in the documented
// gene order (layer, neuron, positive before negative, input ascending, bit
// LSB first) and accumulates sign * 2^exp * kept_bits(value) in plain
// doubles, which are exact for these magnitudes. chromosome == nullptr means
// keep everything.
inline int reference_predict(const axmlp::QuantMLP& m, const axmlp::Chromosome* c, const std::vector<uint32_t>& x) {
    size_t gene = 0;
    auto masked = [&](uint64_t v, int bits) -> double {
        if (!c)
            return (double)v;
        uint64_t kept = 0;
        for (int b = 0; b < bits; ++b, ++gene)
            if ((*c)[gene])
                kept |= v & (1ull << b);
        return (double)kept;
    };
    auto layer_acc = [&](const axmlp::QuantMLP::Layer& layer, int neuron, const std::vector<double>& in, int bits) {
        double acc = 0.0;
        const auto& wrow = layer.weights[(size_t)neuron];
        for (int sign : {1, -1})
            for (size_t j = 0; j < wrow.size(); ++j) {
                if (wrow[j].sign != sign)
                    continue;
                double v = masked((uint64_t)in[j], bits);
                acc += sign * std::pow(2.0, wrow[j].exp) * v;
            }
        return acc + layer.biases[(size_t)neuron].value();
    };

    std::vector<double> xin(x.begin(), x.end());
    std::vector<double> h((size_t)m.topology.n_hidden);
    for (int k = 0; k < m.topology.n_hidden; ++k) {
        double acc = layer_acc(m.layers[0], k, xin, m.input_bits);
        double top = std::pow(2.0, m.qrelu.out_bits) - 1.0;
        double v = 0.0;
        if (acc > 0.0) {
            v = std::floor(acc / std::pow(2.0, m.qrelu.truncate_lsb[(size_t)k]));
            if (v > top)
                v = top;
        }
        h[(size_t)k] = v;
    }
    int best = 0;
    double best_v = 0.0;
    for (int o = 0; o < m.topology.n_out; ++o) {
        double acc = layer_acc(m.layers[1], o, h, m.qrelu.out_bits);
        if (o == 0 || acc > best_v) {
            best = o;
            best_v = acc;
        }
    }
    return best;
}

} // namespace testutil
