#include "axmlp/infer.hpp"

#include "axmlp/common.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace axmlp {

int signed_width_for(int64_t lo, int64_t hi) {
    if (lo > hi)
        fail(Err::invalid, "signed_width_for: lo > hi");
    auto needed = [](int64_t v) {
        uint64_t mag = v >= 0 ? (uint64_t)v : (uint64_t)(-(v + 1));
        return bit_width_u64(mag) + 1;
    };
    return std::max({needed(lo), needed(hi), 1});
}

PreparedModel prepare_model(const QuantMLP& m, const AdderTreeLayout& layout, const Chromosome* chromosome) {
    if (chromosome && (int)chromosome->size() != layout.total_genes)
        fail(Err::shape, "chromosome length does not match layout");
    const Topology& t = m.topology;
    PreparedModel pm;
    pm.topology = t;
    pm.input_bits = m.input_bits;
    pm.out_bits = m.qrelu.out_bits;
    pm.align = layout.align;
    pm.hidden_taps.resize((size_t)t.n_hidden);
    pm.output_taps.resize((size_t)t.n_out);
    pm.hidden_bias.assign((size_t)t.n_hidden, 0);
    pm.output_bias.assign((size_t)t.n_out, 0);
    pm.trunc_shift.resize((size_t)t.n_hidden);
    for (int k = 0; k < t.n_hidden; ++k)
        pm.trunc_shift[k] = m.qrelu.truncate_lsb[(size_t)k] + pm.align;

    for (const auto& tree : layout.trees) {
        auto& taps = tree.layer == 0 ? pm.hidden_taps[(size_t)tree.neuron] : pm.output_taps[(size_t)tree.neuron];
        for (const auto& row : tree.rows) {
            PreparedModel::Tap tap;
            tap.input = row.input_index;
            tap.shift = row.exp + pm.align;
            if (tap.shift < 0)
                fail(Err::internal, "negative shift after alignment");
            tap.sign = tree.sign;
            tap.mask = chromosome ? row_mask(row, *chromosome) : (uint32_t)((1ull << row.bits) - 1);
            taps.push_back(tap);
        }
    }
    for (int k = 0; k < t.n_hidden; ++k) {
        const Po2& b = m.layers[0].biases[(size_t)k];
        if (b.sign != 0)
            pm.hidden_bias[(size_t)k] = (int64_t)b.sign << (b.exp + pm.align);
    }
    for (int o = 0; o < t.n_out; ++o) {
        const Po2& b = m.layers[1].biases[(size_t)o];
        if (b.sign != 0)
            pm.output_bias[(size_t)o] = (int64_t)b.sign << (b.exp + pm.align);
    }

    auto bounds = [](const std::vector<PreparedModel::Tap>& taps, int64_t bias, int64_t& lo, int64_t& hi) {
        int64_t pos = 0, neg = 0;
        for (const auto& tap : taps) {
            int64_t top = (int64_t)tap.mask << tap.shift;
            if (tap.sign > 0)
                pos += top;
            else
                neg += top;
        }
        lo = bias - neg;
        hi = bias + pos;
    };
    pm.hidden_lo.resize((size_t)t.n_hidden);
    pm.hidden_hi.resize((size_t)t.n_hidden);
    for (int k = 0; k < t.n_hidden; ++k) {
        bounds(pm.hidden_taps[(size_t)k], pm.hidden_bias[(size_t)k], pm.hidden_lo[(size_t)k], pm.hidden_hi[(size_t)k]);
        pm.hidden_width = std::max(pm.hidden_width, signed_width_for(pm.hidden_lo[(size_t)k], pm.hidden_hi[(size_t)k]));
    }
    pm.output_lo.resize((size_t)t.n_out);
    pm.output_hi.resize((size_t)t.n_out);
    for (int o = 0; o < t.n_out; ++o) {
        bounds(pm.output_taps[(size_t)o], pm.output_bias[(size_t)o], pm.output_lo[(size_t)o], pm.output_hi[(size_t)o]);
        pm.output_width = std::max(pm.output_width, signed_width_for(pm.output_lo[(size_t)o], pm.output_hi[(size_t)o]));
    }
    return pm;
}

void forward_units(const PreparedModel& pm, const uint32_t* x, int64_t* out_units) {
    const Topology& t = pm.topology;
    int64_t h[256];
    if (t.n_hidden > 256)
        fail(Err::invalid, "hidden layer too wide");
    for (int k = 0; k < t.n_hidden; ++k) {
        int64_t acc = pm.hidden_bias[(size_t)k];
        for (const auto& tap : pm.hidden_taps[(size_t)k]) {
            int64_t v = (int64_t)(x[tap.input] & tap.mask) << tap.shift;
            acc += tap.sign > 0 ? v : -v;
        }
        h[k] = qrelu_int(acc, pm.trunc_shift[(size_t)k], pm.out_bits);
    }
    for (int o = 0; o < t.n_out; ++o) {
        int64_t acc = pm.output_bias[(size_t)o];
        for (const auto& tap : pm.output_taps[(size_t)o]) {
            int64_t v = ((int64_t)h[tap.input] & tap.mask) << tap.shift;
            acc += tap.sign > 0 ? v : -v;
        }
        out_units[o] = acc;
    }
}

int predict(const PreparedModel& pm, const uint32_t* x) {
    int64_t units[256];
    if (pm.topology.n_out > 256)
        fail(Err::invalid, "output layer too wide");
    forward_units(pm, x, units);
    int best = 0;
    for (int o = 1; o < pm.topology.n_out; ++o)
        if (units[o] > units[best])
            best = o;
    return best;
}

void output_patterns(const PreparedModel& pm, const int64_t* units, uint64_t* patterns) {
    uint64_t offset = 1ull << (pm.output_width - 1);
    for (int o = 0; o < pm.topology.n_out; ++o)
        patterns[o] = (uint64_t)(units[o] + (int64_t)offset);
}

int predict_plan(const PreparedModel& pm, const ArgmaxPlan& plan, const uint32_t* x) {
    const Topology& t = pm.topology;
    if (t.n_out == 1)
        return 0;
    if (plan.empty())
        return predict(pm, x);
    if (plan.width != 0 && plan.width != pm.output_width)
        fail(Err::shape, "plan width does not match model output width");
    int64_t units[256];
    uint64_t patterns[256];
    if (t.n_out > 256)
        fail(Err::invalid, "output layer too wide");
    forward_units(pm, x, units);
    output_patterns(pm, units, patterns);

    struct Cand {
        uint64_t pattern;
        int index;
    };
    std::vector<Cand> cand((size_t)t.n_out);
    for (int o = 0; o < t.n_out; ++o)
        cand[(size_t)o] = {patterns[o], o};

    for (const auto& stage : plan.stages) {
        std::vector<Cand> next;
        std::vector<uint8_t> used(cand.size(), 0);
        for (const auto& comp : stage) {
            if (comp.a < 0 || comp.b < 0 || comp.a >= (int)cand.size() || comp.b >= (int)cand.size() ||
                comp.a == comp.b)
                fail(Err::shape, "plan comparator operand out of range");
            if (used[(size_t)comp.a] || used[(size_t)comp.b])
                fail(Err::shape, "plan candidate used twice in one stage");
            used[(size_t)comp.a] = used[(size_t)comp.b] = 1;
            uint64_t mask = 0;
            for (int bit : comp.kept_bits)
                mask |= 1ull << bit;
            uint64_t va = cand[(size_t)comp.a].pattern & mask;
            uint64_t vb = cand[(size_t)comp.b].pattern & mask;
            next.push_back(vb > va ? cand[(size_t)comp.b] : cand[(size_t)comp.a]);
        }
        for (size_t i = 0; i < cand.size(); ++i)
            if (!used[i])
                next.push_back(cand[i]);
        if (next.size() >= cand.size() && cand.size() > 1)
            fail(Err::shape, "plan stage does not shrink the candidate list");
        cand = std::move(next);
    }
    if (cand.size() != 1)
        fail(Err::shape, "plan does not reduce to a single winner");
    return cand[0].index;
}

double accuracy(const PreparedModel& pm, const QuantizedDataset& data, const ArgmaxPlan* plan) {
    if (data.n_samples() == 0)
        fail(Err::invalid, "accuracy of an empty dataset");
    if ((int)data.n_features() != pm.topology.n_in)
        fail(Err::shape, "dataset width does not match model");
    size_t correct = 0;
    for (size_t i = 0; i < data.n_samples(); ++i) {
        const uint32_t* x = data.features[i].data();
        int cls = plan ? predict_plan(pm, *plan, x) : predict(pm, x);
        if (cls == data.labels[i])
            ++correct;
    }
    return (double)correct / (double)data.n_samples();
}

int forward_exact(const QuantMLP& m, const std::vector<uint32_t>& x) {
    AdderTreeLayout layout = build_layout(m);
    PreparedModel pm = prepare_model(m, layout, nullptr);
    if ((int)x.size() != m.topology.n_in)
        fail(Err::shape, "input width mismatch");
    return predict(pm, x.data());
}

int forward_masked(const QuantMLP& m, const AdderTreeLayout& layout, const Chromosome& c,
                   const std::vector<uint32_t>& x) {
    PreparedModel pm = prepare_model(m, layout, &c);
    if ((int)x.size() != m.topology.n_in)
        fail(Err::shape, "input width mismatch");
    return predict(pm, x.data());
}

void export_predictions_csv(const std::string& path, const PreparedModel& pm, const QuantizedDataset& data,
                            const ArgmaxPlan* plan) {
    std::ostringstream out;
    out << "sample,label,prediction\n";
    for (size_t i = 0; i < data.n_samples(); ++i) {
        const uint32_t* x = data.features[i].data();
        int cls = plan ? predict_plan(pm, *plan, x) : predict(pm, x);
        out << i << "," << data.labels[i] << "," << cls << "\n";
    }
    write_file(path, out.str());
}

} // namespace axmlp
