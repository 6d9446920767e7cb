#include "axmlp/mlp.hpp"

#include "axmlp/common.hpp"
#include "axmlp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include <json.hpp>

namespace axmlp {

namespace {

struct Workspace {
    std::vector<double> z1, h, z2, p, dz1, dz2, dh;
    void resize(const Topology& t) {
        z1.resize(t.n_hidden);
        h.resize(t.n_hidden);
        z2.resize(t.n_out);
        p.resize(t.n_out);
        dz1.resize(t.n_hidden);
        dz2.resize(t.n_out);
        dh.resize(t.n_hidden);
    }
};

struct Grads {
    std::vector<std::vector<double>> w1, w2;
    std::vector<double> b1, b2;
    void resize(const Topology& t) {
        w1.assign(t.n_hidden, std::vector<double>(t.n_in, 0.0));
        w2.assign(t.n_out, std::vector<double>(t.n_hidden, 0.0));
        b1.assign(t.n_hidden, 0.0);
        b2.assign(t.n_out, 0.0);
    }
    void zero() {
        for (auto& r : w1)
            std::fill(r.begin(), r.end(), 0.0);
        for (auto& r : w2)
            std::fill(r.begin(), r.end(), 0.0);
        std::fill(b1.begin(), b1.end(), 0.0);
        std::fill(b2.begin(), b2.end(), 0.0);
    }
};

int argmax_lowest(const std::vector<double>& v) {
    int best = 0;
    for (size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best])
            best = (int)i;
    return best;
}

double softmax_ce(std::vector<double>& z, std::vector<double>& p, int label) {
    double mx = z[0];
    for (double v : z)
        mx = std::max(mx, v);
    double sum = 0.0;
    for (size_t i = 0; i < z.size(); ++i) {
        p[i] = std::exp(z[i] - mx);
        sum += p[i];
    }
    for (auto& v : p)
        v /= sum;
    return -std::log(std::max(p[(size_t)label], 1e-300));
}

// Quantized forward used by QAT. Weight values are exact powers of two and
// inputs are small integers, so the double math below is bit-exact against
// the integer inference path.
struct QatView {
    std::vector<std::vector<double>> qw1, qw2;
    std::vector<double> qb1, qb2;
    std::vector<double> trunc_pow; // 2^truncate_lsb per hidden neuron
    double clip_top = 255.0;
};

void forward_qat(const QatView& q, const Topology& t, const std::vector<double>& x, Workspace& ws) {
    for (int k = 0; k < t.n_hidden; ++k) {
        double acc = q.qb1[k];
        const auto& row = q.qw1[k];
        for (int j = 0; j < t.n_in; ++j)
            acc += row[j] * x[j];
        ws.z1[k] = acc;
        double h = 0.0;
        if (acc > 0.0) {
            h = std::floor(acc / q.trunc_pow[k]);
            if (h > q.clip_top)
                h = q.clip_top;
        }
        ws.h[k] = h;
    }
    for (int o = 0; o < t.n_out; ++o) {
        double acc = q.qb2[o];
        const auto& row = q.qw2[o];
        for (int k = 0; k < t.n_hidden; ++k)
            acc += row[k] * ws.h[k];
        ws.z2[o] = acc;
    }
}

} // namespace

FloatMLP train_float(const Dataset& train, const Topology& topology, const TrainConfig& cfg) {
    if ((int)train.n_features() != topology.n_in)
        fail(Err::shape, "topology n_in " + std::to_string(topology.n_in) + " does not match dataset features " +
                             std::to_string(train.n_features()));
    if (train.n_classes() > topology.n_out)
        fail(Err::shape, "topology n_out smaller than the number of classes");
    if (topology.n_in <= 0 || topology.n_hidden <= 0 || topology.n_out <= 0)
        fail(Err::invalid, "topology dimensions must be positive");
    if (cfg.batch <= 0 || cfg.epochs < 0 || !(cfg.lr > 0.0))
        fail(Err::invalid, "bad training hyperparameters");

    const Topology& t = topology;
    Rng rng(cfg.seed);
    FloatMLP m;
    m.topology = t;
    auto xavier = [&](int fan_in, int fan_out) {
        double limit = std::sqrt(6.0 / (fan_in + fan_out));
        return rng.uniform(-limit, limit);
    };
    m.w1.assign(t.n_hidden, std::vector<double>(t.n_in));
    for (auto& row : m.w1)
        for (auto& w : row)
            w = xavier(t.n_in, t.n_hidden);
    m.b1.assign(t.n_hidden, 0.0);
    m.w2.assign(t.n_out, std::vector<double>(t.n_hidden));
    for (auto& row : m.w2)
        for (auto& w : row)
            w = xavier(t.n_hidden, t.n_out);
    m.b2.assign(t.n_out, 0.0);

    FloatMLP best = m;
    double best_acc = float_accuracy(m, train);

    size_t n = train.n_samples();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Workspace ws;
    ws.resize(t);
    Grads g;
    g.resize(t);

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(order);
        for (size_t start = 0; start < n; start += (size_t)cfg.batch) {
            size_t end = std::min(n, start + (size_t)cfg.batch);
            double inv_m = 1.0 / (double)(end - start);
            g.zero();
            for (size_t bi = start; bi < end; ++bi) {
                const auto& x = train.features[order[bi]];
                int label = train.labels[order[bi]];
                for (int k = 0; k < t.n_hidden; ++k) {
                    double acc = m.b1[k];
                    for (int j = 0; j < t.n_in; ++j)
                        acc += m.w1[k][j] * x[j];
                    ws.z1[k] = acc;
                    ws.h[k] = acc > 0.0 ? acc : 0.0;
                }
                for (int o = 0; o < t.n_out; ++o) {
                    double acc = m.b2[o];
                    for (int k = 0; k < t.n_hidden; ++k)
                        acc += m.w2[o][k] * ws.h[k];
                    ws.z2[o] = acc;
                }
                double loss = softmax_ce(ws.z2, ws.p, label);
                if (!std::isfinite(loss))
                    fail(Err::internal, "non-finite loss at epoch " + std::to_string(epoch));
                for (int o = 0; o < t.n_out; ++o)
                    ws.dz2[o] = (ws.p[o] - (o == label ? 1.0 : 0.0)) * inv_m;
                for (int k = 0; k < t.n_hidden; ++k) {
                    double dh = 0.0;
                    for (int o = 0; o < t.n_out; ++o)
                        dh += m.w2[o][k] * ws.dz2[o];
                    ws.dz1[k] = ws.z1[k] > 0.0 ? dh : 0.0;
                }
                for (int o = 0; o < t.n_out; ++o) {
                    g.b2[o] += ws.dz2[o];
                    for (int k = 0; k < t.n_hidden; ++k)
                        g.w2[o][k] += ws.dz2[o] * ws.h[k];
                }
                for (int k = 0; k < t.n_hidden; ++k) {
                    g.b1[k] += ws.dz1[k];
                    for (int j = 0; j < t.n_in; ++j)
                        g.w1[k][j] += ws.dz1[k] * x[j];
                }
            }
            for (int k = 0; k < t.n_hidden; ++k) {
                m.b1[k] -= cfg.lr * g.b1[k];
                for (int j = 0; j < t.n_in; ++j)
                    m.w1[k][j] -= cfg.lr * g.w1[k][j];
            }
            for (int o = 0; o < t.n_out; ++o) {
                m.b2[o] -= cfg.lr * g.b2[o];
                for (int k = 0; k < t.n_hidden; ++k)
                    m.w2[o][k] -= cfg.lr * g.w2[o][k];
            }
        }
        double acc = float_accuracy(m, train);
        if (acc > best_acc) {
            best_acc = acc;
            best = m;
        }
    }
    return best;
}

double float_accuracy(const FloatMLP& m, const Dataset& data) {
    if (data.n_samples() == 0)
        fail(Err::invalid, "accuracy of an empty dataset");
    const Topology& t = m.topology;
    std::vector<double> z1(t.n_hidden), z2(t.n_out);
    size_t correct = 0;
    for (size_t i = 0; i < data.n_samples(); ++i) {
        const auto& x = data.features[i];
        for (int k = 0; k < t.n_hidden; ++k) {
            double acc = m.b1[k];
            for (int j = 0; j < t.n_in; ++j)
                acc += m.w1[k][j] * x[j];
            z1[k] = acc > 0.0 ? acc : 0.0;
        }
        for (int o = 0; o < t.n_out; ++o) {
            double acc = m.b2[o];
            for (int k = 0; k < t.n_hidden; ++k)
                acc += m.w2[o][k] * z1[k];
            z2[o] = acc;
        }
        if (argmax_lowest(z2) == data.labels[i])
            ++correct;
    }
    return (double)correct / (double)data.n_samples();
}

Po2 po2_quantize(double w, int weight_bits) {
    if (!std::isfinite(w))
        fail(Err::invalid, "po2_quantize expects a finite value");
    if (weight_bits < 2 || weight_bits > 16)
        fail(Err::invalid, "weight_bits must be in [2, 16]");
    int e_max = weight_bits - 1;
    int e_min = -e_max;
    Po2 q;
    double a = std::fabs(w);
    if (a < std::pow(2.0, e_min - 0.5)) // below half the smallest magnitude
        return q;                       // sign 0 = exact zero
    q.sign = w < 0.0 ? -1 : 1;
    double e = std::round(std::log2(a));
    q.exp = (int)std::clamp(e, (double)e_min, (double)e_max);
    return q;
}

FloatMLP fold_input_scale(const FloatMLP& m, double divisor) {
    if (!(divisor > 0.0))
        fail(Err::invalid, "input scale divisor must be positive");
    FloatMLP out = m;
    for (auto& row : out.w1)
        for (auto& w : row)
            w /= divisor;
    return out;
}

QuantMLP po2_quantize_mlp(const FloatMLP& m, int input_bits, int weight_bits) {
    QuantMLP q;
    q.topology = m.topology;
    q.input_bits = input_bits;
    q.qrelu.out_bits = 8;
    q.qrelu.truncate_lsb.assign(m.topology.n_hidden, 0);
    q.layers.resize(2);
    auto quantize_layer = [&](const std::vector<std::vector<double>>& w, const std::vector<double>& b,
                              QuantMLP::Layer& out) {
        out.weights.resize(w.size());
        for (size_t i = 0; i < w.size(); ++i) {
            out.weights[i].resize(w[i].size());
            for (size_t j = 0; j < w[i].size(); ++j)
                out.weights[i][j] = po2_quantize(w[i][j], weight_bits);
        }
        out.biases.resize(b.size());
        for (size_t i = 0; i < b.size(); ++i)
            out.biases[i] = po2_quantize(b[i], weight_bits);
    };
    quantize_layer(m.w1, m.b1, q.layers[0]);
    quantize_layer(m.w2, m.b2, q.layers[1]);
    return q;
}

int alignment_of(const QuantMLP& m) {
    int min_exp = 0;
    for (const auto& layer : m.layers) {
        for (const auto& row : layer.weights)
            for (const auto& w : row)
                if (w.sign != 0)
                    min_exp = std::min(min_exp, w.exp);
        for (const auto& b : layer.biases)
            if (b.sign != 0)
                min_exp = std::min(min_exp, b.exp);
    }
    return -min_exp;
}

QReluConfig fit_qrelu(const QuantMLP& m, const QuantizedDataset& train, int out_bits) {
    const Topology& t = m.topology;
    if ((int)train.n_features() != t.n_in)
        fail(Err::shape, "fit_qrelu: dataset feature count mismatch");
    QReluConfig cfg;
    cfg.out_bits = out_bits;
    cfg.truncate_lsb.assign(t.n_hidden, 0);

    int align = alignment_of(m);
    // Positive pre-activations per hidden neuron, in integer units (floored).
    std::vector<std::vector<int64_t>> pos(t.n_hidden);
    for (size_t i = 0; i < train.n_samples(); ++i) {
        const auto& x = train.features[i];
        for (int k = 0; k < t.n_hidden; ++k) {
            int64_t acc = 0;
            const auto& row = m.layers[0].weights[k];
            for (int j = 0; j < t.n_in; ++j)
                if (row[j].sign != 0)
                    acc += (int64_t)row[j].sign * ((int64_t)x[j] << (row[j].exp + align));
            const Po2& b = m.layers[0].biases[k];
            if (b.sign != 0)
                acc += (int64_t)b.sign << (b.exp + align);
            if (acc > 0)
                pos[k].push_back(acc >> align); // floor of the integer-scale value
        }
    }
    for (int k = 0; k < t.n_hidden; ++k) {
        if (pos[k].empty())
            continue; // all pre-activations non-positive: truncate 0
        std::sort(pos[k].begin(), pos[k].end());
        size_t idx = (size_t)std::ceil(0.99 * (double)pos[k].size());
        idx = idx == 0 ? 0 : idx - 1; // nearest-rank percentile
        int64_t p99 = pos[k][idx];
        int width = bit_width_u64((uint64_t)p99);
        cfg.truncate_lsb[k] = std::max(0, width - out_bits);
    }
    return cfg;
}

QuantMLP qat_retrain(const FloatMLP& m, const QuantizedDataset& train, const QReluConfig& qrelu, int epochs,
                     uint64_t seed, double lr, int batch, int weight_bits) {
    const Topology& t = m.topology;
    if ((int)train.n_features() != t.n_in)
        fail(Err::shape, "qat_retrain: dataset feature count mismatch");
    if (train.n_classes > t.n_out)
        fail(Err::shape, "qat_retrain: more classes than output neurons");

    FloatMLP master = m;
    size_t n = train.n_samples();
    std::vector<std::vector<double>> xf(n, std::vector<double>(t.n_in));
    for (size_t i = 0; i < n; ++i)
        for (int j = 0; j < t.n_in; ++j)
            xf[i][j] = (double)train.features[i][j];

    auto snapshot = [&](const QReluConfig* fixed) {
        QuantMLP q = po2_quantize_mlp(master, train.input_bits, weight_bits);
        q.qrelu = fixed ? *fixed : fit_qrelu(q, train, 8);
        if ((int)q.qrelu.truncate_lsb.size() != t.n_hidden)
            fail(Err::shape, "qrelu config size mismatch");
        return q;
    };
    auto view_of = [&](const QuantMLP& q) {
        QatView v;
        v.qw1.assign(t.n_hidden, std::vector<double>(t.n_in));
        v.qb1.assign(t.n_hidden, 0.0);
        v.qw2.assign(t.n_out, std::vector<double>(t.n_hidden));
        v.qb2.assign(t.n_out, 0.0);
        for (int k = 0; k < t.n_hidden; ++k) {
            for (int j = 0; j < t.n_in; ++j)
                v.qw1[k][j] = q.layers[0].weights[k][j].value();
            v.qb1[k] = q.layers[0].biases[k].value();
        }
        for (int o = 0; o < t.n_out; ++o) {
            for (int k = 0; k < t.n_hidden; ++k)
                v.qw2[o][k] = q.layers[1].weights[o][k].value();
            v.qb2[o] = q.layers[1].biases[o].value();
        }
        v.trunc_pow.resize(t.n_hidden);
        for (int k = 0; k < t.n_hidden; ++k)
            v.trunc_pow[k] = std::pow(2.0, q.qrelu.truncate_lsb[k]);
        v.clip_top = std::pow(2.0, q.qrelu.out_bits) - 1.0;
        return v;
    };
    auto quant_train_acc = [&](const QuantMLP& q) {
        QatView v = view_of(q);
        Workspace ws;
        ws.resize(t);
        size_t correct = 0;
        for (size_t i = 0; i < n; ++i) {
            forward_qat(v, t, xf[i], ws);
            if (argmax_lowest(ws.z2) == train.labels[i])
                ++correct;
        }
        return (double)correct / (double)n;
    };

    QuantMLP best = snapshot(&qrelu);
    double best_acc = quant_train_acc(best);

    Rng rng(seed);
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Workspace ws;
    ws.resize(t);
    Grads g;
    g.resize(t);

    for (int epoch = 1; epoch <= epochs; ++epoch) {
        // Truncation offsets track the drifting weights once per epoch; the
        // po2 view itself refreshes after every batch update.
        QReluConfig epoch_qrelu = snapshot(nullptr).qrelu;
        QuantMLP current = snapshot(&epoch_qrelu);
        QatView v = view_of(current);
        rng.shuffle(order);
        for (size_t start = 0; start < n; start += (size_t)batch) {
            size_t end = std::min(n, start + (size_t)batch);
            double inv_m = 1.0 / (double)(end - start);
            g.zero();
            for (size_t bi = start; bi < end; ++bi) {
                const auto& x = xf[order[bi]];
                int label = train.labels[order[bi]];
                forward_qat(v, t, x, ws);
                double loss = softmax_ce(ws.z2, ws.p, label);
                if (!std::isfinite(loss))
                    fail(Err::internal, "non-finite loss at epoch " + std::to_string(epoch));
                for (int o = 0; o < t.n_out; ++o)
                    ws.dz2[o] = (ws.p[o] - (o == label ? 1.0 : 0.0)) * inv_m;
                for (int k = 0; k < t.n_hidden; ++k) {
                    double dh = 0.0;
                    for (int o = 0; o < t.n_out; ++o)
                        dh += v.qw2[o][k] * ws.dz2[o];
                    // STE through QRelu: slope 1/2^t inside the linear
                    // region, zero when nullified or clipped.
                    bool active = ws.z1[k] > 0.0 && ws.h[k] < v.clip_top;
                    ws.dz1[k] = active ? dh / v.trunc_pow[k] : 0.0;
                }
                for (int o = 0; o < t.n_out; ++o) {
                    g.b2[o] += ws.dz2[o];
                    for (int k = 0; k < t.n_hidden; ++k)
                        g.w2[o][k] += ws.dz2[o] * ws.h[k];
                }
                for (int k = 0; k < t.n_hidden; ++k) {
                    g.b1[k] += ws.dz1[k];
                    for (int j = 0; j < t.n_in; ++j)
                        g.w1[k][j] += ws.dz1[k] * x[j];
                }
            }
            // STE: apply the quantized-forward gradient to the float masters.
            for (int k = 0; k < t.n_hidden; ++k) {
                master.b1[k] -= lr * g.b1[k];
                for (int j = 0; j < t.n_in; ++j)
                    master.w1[k][j] -= lr * g.w1[k][j];
            }
            for (int o = 0; o < t.n_out; ++o) {
                master.b2[o] -= lr * g.b2[o];
                for (int k = 0; k < t.n_hidden; ++k)
                    master.w2[o][k] -= lr * g.w2[o][k];
            }
            // Refresh the quantized view after each update.
            current = snapshot(&epoch_qrelu);
            v = view_of(current);
        }
        current = snapshot(nullptr);
        double acc = quant_train_acc(current);
        if (acc > best_acc) {
            best_acc = acc;
            best = current;
        }
    }
    if (train.n_classes > 0 && best_acc < 1.0 / (double)train.n_classes)
        std::fprintf(stderr, "warning: QAT accuracy %.4f collapsed below chance (1/%d)\n", best_acc, train.n_classes);
    return best;
}

namespace {

nlohmann::json topology_json(const Topology& t) {
    return nlohmann::json::array({t.n_in, t.n_hidden, t.n_out});
}

Topology topology_from(const nlohmann::json& j) {
    auto v = j.get<std::vector<int>>();
    if (v.size() != 3)
        fail(Err::parse, "topology must be [n_in, n_hidden, n_out]");
    return Topology{v[0], v[1], v[2]};
}

} // namespace

std::string float_mlp_to_json(const FloatMLP& m) {
    nlohmann::json j;
    j["topology"] = topology_json(m.topology);
    j["layers"] = nlohmann::json::array();
    j["layers"].push_back({{"weights", m.w1}, {"biases", m.b1}});
    j["layers"].push_back({{"weights", m.w2}, {"biases", m.b2}});
    return j.dump();
}

FloatMLP float_mlp_from_json(const std::string& text) {
    FloatMLP m;
    try {
        auto j = nlohmann::json::parse(text);
        m.topology = topology_from(j.at("topology"));
        const auto& layers = j.at("layers");
        if (layers.size() != 2)
            fail(Err::parse, "float model must have exactly 2 layers");
        m.w1 = layers[0].at("weights").get<std::vector<std::vector<double>>>();
        m.b1 = layers[0].at("biases").get<std::vector<double>>();
        m.w2 = layers[1].at("weights").get<std::vector<std::vector<double>>>();
        m.b2 = layers[1].at("biases").get<std::vector<double>>();
    } catch (const AxError&) {
        throw;
    } catch (const std::exception& e) {
        fail(Err::parse, std::string("bad float model JSON: ") + e.what());
    }
    return m;
}

std::string quant_mlp_to_json(const QuantMLP& m) {
    nlohmann::json j;
    j["topology"] = topology_json(m.topology);
    j["input_bits"] = m.input_bits;
    j["qrelu"] = {{"out_bits", m.qrelu.out_bits}, {"truncate_lsb", m.qrelu.truncate_lsb}};
    auto layer_json = [](const QuantMLP::Layer& l) {
        nlohmann::json lj;
        lj["weights"] = nlohmann::json::array();
        for (const auto& row : l.weights) {
            nlohmann::json rj = nlohmann::json::array();
            for (const auto& w : row)
                rj.push_back(nlohmann::json::array({w.sign, w.sign == 0 ? 0 : w.exp}));
            lj["weights"].push_back(std::move(rj));
        }
        lj["biases"] = nlohmann::json::array();
        for (const auto& b : l.biases)
            lj["biases"].push_back(nlohmann::json::array({b.sign, b.sign == 0 ? 0 : b.exp}));
        return lj;
    };
    j["layers"] = nlohmann::json::array();
    for (const auto& l : m.layers)
        j["layers"].push_back(layer_json(l));
    return j.dump();
}

QuantMLP quant_mlp_from_json(const std::string& text) {
    QuantMLP m;
    try {
        auto j = nlohmann::json::parse(text);
        m.topology = topology_from(j.at("topology"));
        m.input_bits = j.at("input_bits").get<int>();
        m.qrelu.out_bits = j.at("qrelu").at("out_bits").get<int>();
        m.qrelu.truncate_lsb = j.at("qrelu").at("truncate_lsb").get<std::vector<int>>();
        auto parse_po2 = [](const nlohmann::json& pj) {
            auto v = pj.get<std::vector<int>>();
            if (v.size() != 2 || v[0] < -1 || v[0] > 1)
                fail(Err::parse, "po2 weight must be [sign, exp] with sign in {-1,0,1}");
            Po2 w;
            w.sign = v[0];
            w.exp = v[0] == 0 ? 0 : v[1];
            return w;
        };
        for (const auto& lj : j.at("layers")) {
            QuantMLP::Layer l;
            for (const auto& rj : lj.at("weights")) {
                std::vector<Po2> row;
                for (const auto& wj : rj)
                    row.push_back(parse_po2(wj));
                l.weights.push_back(std::move(row));
            }
            for (const auto& bj : lj.at("biases"))
                l.biases.push_back(parse_po2(bj));
            m.layers.push_back(std::move(l));
        }
    } catch (const AxError&) {
        throw;
    } catch (const std::exception& e) {
        fail(Err::parse, std::string("bad quantized model JSON: ") + e.what());
    }
    if (m.layers.size() != 2)
        fail(Err::parse, "quantized model must have exactly 2 layers");
    const Topology& t = m.topology;
    if ((int)m.layers[0].weights.size() != t.n_hidden || (int)m.layers[1].weights.size() != t.n_out ||
        (int)m.layers[0].biases.size() != t.n_hidden || (int)m.layers[1].biases.size() != t.n_out ||
        (int)m.qrelu.truncate_lsb.size() != t.n_hidden)
        fail(Err::shape, "quantized model shapes do not match topology");
    for (const auto& row : m.layers[0].weights)
        if ((int)row.size() != t.n_in)
            fail(Err::shape, "hidden layer weight row length mismatch");
    for (const auto& row : m.layers[1].weights)
        if ((int)row.size() != t.n_hidden)
            fail(Err::shape, "output layer weight row length mismatch");
    return m;
}

void save_quant_mlp(const std::string& path, const QuantMLP& m) {
    write_file(path, quant_mlp_to_json(m) + "\n");
}

QuantMLP load_quant_mlp(const std::string& path) {
    return quant_mlp_from_json(read_file(path));
}

} // namespace axmlp
