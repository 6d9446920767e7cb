#include "axmlp/dataset.hpp"

#include "axmlp/common.hpp"
#include "axmlp/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include <json.hpp>

namespace axmlp {

namespace {

bool parse_double(std::string_view s, double& out) {
    // trim ASCII whitespace
    size_t b = 0, e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r'))
        ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r'))
        --e;
    if (b == e)
        return false;
    const char* first = s.data() + b;
    const char* last = s.data() + e;
    auto res = std::from_chars(first, last, out);
    return res.ec == std::errc() && res.ptr == last && std::isfinite(out);
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    size_t start = 0;
    for (size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == ',') {
            std::string cell = line.substr(start, i - start);
            if (!cell.empty() && cell.back() == '\r')
                cell.pop_back();
            cells.push_back(std::move(cell));
            start = i + 1;
        }
    }
    return cells;
}

std::string trimmed(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace

Dataset load_csv(const std::string& path, const std::string& label_column) {
    std::string text = read_file(path);
    std::vector<std::string> lines;
    {
        size_t start = 0;
        for (size_t i = 0; i <= text.size(); ++i) {
            if (i == text.size() || text[i] == '\n') {
                std::string line = text.substr(start, i - start);
                if (!line.empty() && line.back() == '\r')
                    line.pop_back();
                if (!trimmed(line).empty())
                    lines.push_back(std::move(line));
                start = i + 1;
            }
        }
    }
    if (lines.empty())
        fail(Err::parse, path + ": empty dataset");

    std::vector<std::string> first_row = split_line(lines[0]);
    size_t n_cols = first_row.size();
    if (n_cols < 2)
        fail(Err::parse, path + ": need at least two columns (features + label)");

    // Header detection: any non-numeric cell in the first row means header.
    bool has_header = false;
    for (const auto& cell : first_row) {
        double tmp;
        if (!parse_double(cell, tmp)) {
            has_header = true;
            break;
        }
    }

    std::vector<std::string> header;
    if (has_header)
        header = first_row;
    else
        for (size_t i = 0; i < n_cols; ++i)
            header.push_back("c" + std::to_string(i));

    // Resolve the label column: empty -> last, decimal integer -> index,
    // otherwise a header name.
    size_t label_idx = n_cols - 1;
    if (!label_column.empty()) {
        int parsed = -1;
        auto res = std::from_chars(label_column.data(), label_column.data() + label_column.size(), parsed);
        if (res.ec == std::errc() && res.ptr == label_column.data() + label_column.size()) {
            if (parsed < 0 || (size_t)parsed >= n_cols)
                fail(Err::invalid, path + ": label column index out of range: " + label_column);
            label_idx = (size_t)parsed;
        } else {
            auto it = std::find(header.begin(), header.end(), label_column);
            if (it == header.end())
                fail(Err::invalid, path + ": label column not found: " + label_column);
            label_idx = (size_t)(it - header.begin());
        }
    }

    Dataset d;
    {
        auto slash = path.find_last_of("/\\");
        std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
        auto dot = base.find_last_of('.');
        d.name = dot == std::string::npos ? base : base.substr(0, dot);
    }
    for (size_t i = 0; i < n_cols; ++i)
        if (i != label_idx)
            d.feature_names.push_back(header[i]);

    std::vector<std::string> raw_labels;
    size_t first_data_line = has_header ? 1 : 0;
    for (size_t li = first_data_line; li < lines.size(); ++li) {
        std::vector<std::string> cells = split_line(lines[li]);
        if (cells.size() != n_cols)
            fail(Err::parse, path + ": row " + std::to_string(li + 1) + " has " + std::to_string(cells.size()) +
                                 " cells, expected " + std::to_string(n_cols));
        std::vector<double> row;
        row.reserve(n_cols - 1);
        for (size_t ci = 0; ci < n_cols; ++ci) {
            if (ci == label_idx)
                continue;
            double v;
            if (!parse_double(cells[ci], v))
                fail(Err::parse, path + ": non-numeric feature cell at row " + std::to_string(li + 1) + ", column " +
                                     std::to_string(ci + 1) + " ('" + cells[ci] + "')");
            row.push_back(v);
        }
        d.features.push_back(std::move(row));
        raw_labels.push_back(trimmed(cells[label_idx]));
    }
    if (d.features.empty())
        fail(Err::parse, path + ": empty dataset");

    // Remap labels to 0..n_classes-1, sorted numerically when possible.
    std::set<std::string> unique(raw_labels.begin(), raw_labels.end());
    std::vector<std::string> classes(unique.begin(), unique.end());
    bool all_numeric = true;
    for (const auto& c : classes) {
        double tmp;
        if (!parse_double(c, tmp)) {
            all_numeric = false;
            break;
        }
    }
    if (all_numeric) {
        std::sort(classes.begin(), classes.end(), [](const std::string& a, const std::string& b) {
            double va, vb;
            parse_double(a, va);
            parse_double(b, vb);
            if (va != vb)
                return va < vb;
            return a < b;
        });
    }
    std::map<std::string, int> class_id;
    for (size_t i = 0; i < classes.size(); ++i)
        class_id[classes[i]] = (int)i;
    d.label_names = classes;
    d.labels.reserve(raw_labels.size());
    for (const auto& l : raw_labels)
        d.labels.push_back(class_id[l]);
    return d;
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& d, double train_fraction, uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
        fail(Err::invalid, "train_fraction must be in (0, 1)");
    size_t n = d.n_samples();
    if (n == 0)
        fail(Err::invalid, "cannot split an empty dataset");
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);
    size_t n_train = (size_t)std::llround(train_fraction * (double)n);
    n_train = std::min(std::max<size_t>(n_train, 1), n - 1);

    auto take = [&](size_t lo, size_t hi, const std::string& suffix) {
        Dataset out;
        out.name = d.name + suffix;
        out.feature_names = d.feature_names;
        out.label_names = d.label_names;
        out.features.reserve(hi - lo);
        out.labels.reserve(hi - lo);
        for (size_t i = lo; i < hi; ++i) {
            out.features.push_back(d.features[order[i]]);
            out.labels.push_back(d.labels[order[i]]);
        }
        return out;
    };
    return {take(0, n_train, "_train"), take(n_train, n, "_test")};
}

NormStats fit_normalization(const Dataset& train) {
    if (train.n_samples() == 0)
        fail(Err::invalid, "cannot fit normalization on an empty dataset");
    size_t dim = train.n_features();
    NormStats s;
    s.mins.assign(dim, 0.0);
    s.maxs.assign(dim, 0.0);
    for (size_t j = 0; j < dim; ++j) {
        double lo = train.features[0][j], hi = train.features[0][j];
        for (const auto& row : train.features) {
            lo = std::min(lo, row[j]);
            hi = std::max(hi, row[j]);
        }
        s.mins[j] = lo;
        s.maxs[j] = hi;
    }
    return s;
}

Dataset apply_normalization(const Dataset& d, const NormStats& stats) {
    if (stats.mins.size() != d.n_features())
        fail(Err::shape, "normalization stats dimension mismatch");
    Dataset out = d;
    out.feature_mins = stats.mins;
    out.feature_maxs = stats.maxs;
    for (auto& row : out.features) {
        for (size_t j = 0; j < row.size(); ++j) {
            double span = stats.maxs[j] - stats.mins[j];
            double v = span > 0.0 ? (row[j] - stats.mins[j]) / span : 0.0;
            row[j] = std::clamp(v, 0.0, 1.0);
        }
    }
    return out;
}

QuantizedDataset quantize_inputs(const Dataset& normalized, int bits) {
    if (bits < 1 || bits > 16)
        fail(Err::invalid, "input bits must be in [1, 16]");
    uint32_t top = (1u << bits) - 1;
    QuantizedDataset q;
    q.input_bits = bits;
    q.n_classes = normalized.n_classes();
    q.labels = normalized.labels;
    q.features.reserve(normalized.n_samples());
    for (const auto& row : normalized.features) {
        std::vector<uint32_t> qrow;
        qrow.reserve(row.size());
        for (double v : row) {
            if (!(v >= 0.0 && v <= 1.0))
                fail(Err::invalid, "quantize_inputs expects normalized values in [0, 1]");
            double scaled = std::floor(v * (double)top + 0.5);
            qrow.push_back((uint32_t)std::clamp(scaled, 0.0, (double)top));
        }
        q.features.push_back(std::move(qrow));
    }
    return q;
}

std::string qdataset_to_json(const QuantizedDataset& q) {
    nlohmann::json j;
    j["input_bits"] = q.input_bits;
    j["features"] = q.features;
    j["labels"] = q.labels;
    return j.dump();
}

QuantizedDataset qdataset_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        fail(Err::parse, std::string("bad quantized dataset JSON: ") + e.what());
    }
    QuantizedDataset q;
    try {
        q.input_bits = j.at("input_bits").get<int>();
        q.features = j.at("features").get<std::vector<std::vector<uint32_t>>>();
        q.labels = j.at("labels").get<std::vector<int>>();
    } catch (const std::exception& e) {
        fail(Err::parse, std::string("bad quantized dataset JSON: ") + e.what());
    }
    if (q.features.size() != q.labels.size())
        fail(Err::shape, "quantized dataset features/labels length mismatch");
    int max_label = -1;
    for (int l : q.labels)
        max_label = std::max(max_label, l);
    q.n_classes = max_label + 1;
    uint32_t top = (1u << q.input_bits) - 1;
    for (const auto& row : q.features)
        for (uint32_t v : row)
            if (v > top)
                fail(Err::invalid, "quantized feature exceeds input_bits range");
    return q;
}

void save_qdataset(const std::string& path, const QuantizedDataset& q) {
    write_file(path, qdataset_to_json(q) + "\n");
}

QuantizedDataset load_qdataset(const std::string& path) {
    return qdataset_from_json(read_file(path));
}

} // namespace axmlp
