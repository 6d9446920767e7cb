#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace axmlp {

struct Dataset {
    std::string name;
    std::vector<std::string> feature_names;
    std::vector<std::vector<double>> features; // n_samples x n_features
    std::vector<int> labels;                   // contiguous 0..n_classes-1
    std::vector<std::string> label_names;      // original label text per class id
    // Normalization bounds; populated by apply_normalization (train-fit stats).
    std::vector<double> feature_mins;
    std::vector<double> feature_maxs;

    size_t n_samples() const { return features.size(); }
    size_t n_features() const { return features.empty() ? feature_names.size() : features[0].size(); }
    int n_classes() const { return (int)label_names.size(); }
};

struct QuantizedDataset {
    int input_bits = 4;
    std::vector<std::vector<uint32_t>> features;
    std::vector<int> labels;
    int n_classes = 0;

    size_t n_samples() const { return features.size(); }
    size_t n_features() const { return features.empty() ? 0 : features[0].size(); }
};

struct NormStats {
    std::vector<double> mins;
    std::vector<double> maxs;
};

// label_column: feature header name, or a 0-based column index in decimal, or
// empty for the last column. Label values are remapped to 0..n_classes-1 in
// sorted order (numeric sort when every label parses as a number).
Dataset load_csv(const std::string& path, const std::string& label_column = "");

std::pair<Dataset, Dataset> split_train_test(const Dataset& d, double train_fraction, uint64_t seed);

NormStats fit_normalization(const Dataset& train);

// Maps features through (v - min) / (max - min), clamped to [0, 1]; records
// the stats on the returned dataset. Constant columns map to 0.
Dataset apply_normalization(const Dataset& d, const NormStats& stats);

QuantizedDataset quantize_inputs(const Dataset& normalized, int bits);

std::string qdataset_to_json(const QuantizedDataset& q);
QuantizedDataset qdataset_from_json(const std::string& text);
void save_qdataset(const std::string& path, const QuantizedDataset& q);
QuantizedDataset load_qdataset(const std::string& path);

} // namespace axmlp
