#include "axmlp/netlist.hpp"

#include "axmlp/common.hpp"

#include <algorithm>
#include <map>

#include <json.hpp>

namespace axmlp {

NetlistBuilder::NetlistBuilder() {
    nl_.const0 = fresh();
    nl_.const1 = fresh();
}

int NetlistBuilder::fresh() {
    inv_of_.push_back(-1);
    return nl_.n_nets++;
}

int NetlistBuilder::add_input() {
    int n = fresh();
    nl_.inputs.push_back(n);
    return n;
}

void NetlistBuilder::set_bus_meta(int n_in, int input_bits) {
    nl_.n_in = n_in;
    nl_.input_bits = input_bits;
}

int NetlistBuilder::and2(int a, int b) {
    if (a == c0() || b == c0())
        return c0();
    if (a == c1())
        return b;
    if (b == c1())
        return a;
    if (a == b)
        return a;
    int o = fresh();
    nl_.cells.push_back({CellKind::AND, {a, b, -1}, {o, -1}});
    return o;
}

int NetlistBuilder::or2(int a, int b) {
    if (a == c1() || b == c1())
        return c1();
    if (a == c0())
        return b;
    if (b == c0())
        return a;
    if (a == b)
        return a;
    int o = fresh();
    nl_.cells.push_back({CellKind::OR, {a, b, -1}, {o, -1}});
    return o;
}

int NetlistBuilder::xor2(int a, int b) {
    if (a == b)
        return c0();
    if (a == c0())
        return b;
    if (b == c0())
        return a;
    if (a == c1())
        return inv(b);
    if (b == c1())
        return inv(a);
    int o = fresh();
    nl_.cells.push_back({CellKind::XOR, {a, b, -1}, {o, -1}});
    return o;
}

int NetlistBuilder::inv(int a) {
    if (a == c0())
        return c1();
    if (a == c1())
        return c0();
    if (inv_of_[(size_t)a] >= 0)
        return inv_of_[(size_t)a];
    int o = fresh();
    nl_.cells.push_back({CellKind::INV, {a, -1, -1}, {o, -1}});
    inv_of_[(size_t)a] = o;
    inv_of_[(size_t)o] = a;
    return o;
}

int NetlistBuilder::mux(int sel, int on_true, int on_false) {
    if (sel == c1())
        return on_true;
    if (sel == c0())
        return on_false;
    if (on_true == on_false)
        return on_true;
    return or2(and2(sel, on_true), and2(inv(sel), on_false));
}

std::pair<int, int> NetlistBuilder::half_add(int a, int b) {
    if (a == c0())
        return {b, c0()};
    if (b == c0())
        return {a, c0()};
    if (a == c1() && b == c1())
        return {c0(), c1()};
    if (a == c1())
        return {inv(b), b};
    if (b == c1())
        return {inv(a), a};
    if (a == b)
        return {c0(), a}; // a + a = 2a
    int s = fresh(), c = fresh();
    nl_.cells.push_back({CellKind::HA, {a, b, -1}, {s, c}});
    return {s, c};
}

std::pair<int, int> NetlistBuilder::full_add(int a, int b, int cin) {
    // Peel constants off first; at most one survives after normalization.
    int ones = 0;
    std::vector<int> vars;
    for (int v : {a, b, cin}) {
        if (v == c1())
            ++ones;
        else if (v != c0())
            vars.push_back(v);
    }
    if (ones == 3)
        return {c1(), c1()};
    if (ones == 2)
        return {vars.empty() ? c0() : vars[0], c1()}; // x + 2: sum x, carry 1
    if (ones == 1) {
        if (vars.empty())
            return {c1(), c0()};
        if (vars.size() == 1)
            return {inv(vars[0]), vars[0]};
        return {inv(xor2(vars[0], vars[1])), or2(vars[0], vars[1])};
    }
    if (vars.empty())
        return {c0(), c0()};
    if (vars.size() == 1)
        return {vars[0], c0()};
    if (vars.size() == 2)
        return half_add(vars[0], vars[1]);
    int s = fresh(), c = fresh();
    nl_.cells.push_back({CellKind::FA, {vars[0], vars[1], vars[2]}, {s, c}});
    return {s, c};
}

std::vector<int> NetlistBuilder::ripple_add(const std::vector<int>& a, const std::vector<int>& b, int cin,
                                            int out_width) {
    std::vector<int> sum((size_t)out_width, c0());
    int carry = cin;
    for (int k = 0; k < out_width; ++k) {
        int av = k < (int)a.size() ? a[(size_t)k] : c0();
        int bv = k < (int)b.size() ? b[(size_t)k] : c0();
        auto [s, c] = full_add(av, bv, carry);
        sum[(size_t)k] = s;
        carry = c;
    }
    return sum;
}

namespace {

struct TreeBit {
    int stage;
    int seq; // insertion order within the column, for stable earliest-first
    int net;
    bool operator<(const TreeBit& o) const { return stage != o.stage ? stage < o.stage : seq < o.seq; }
};

// Greedy earliest-stage-first carry-save reduction (same policy as
// reduction_oracle); constant bits have been folded out by the caller.
// Returns the two reduced operand rows.
std::pair<std::vector<int>, std::vector<int>> reduce_tree(NetlistBuilder& nb, std::vector<std::vector<TreeBit>>& cols) {
    int seq = 1 << 20;
    for (size_t k = 0; k < cols.size(); ++k) {
        std::sort(cols[k].begin(), cols[k].end());
        while (cols[k].size() >= 3) {
            TreeBit x = cols[k][0], y = cols[k][1], z = cols[k][2];
            cols[k].erase(cols[k].begin(), cols[k].begin() + 3);
            auto [s, c] = nb.full_add(x.net, y.net, z.net);
            int out_stage = std::max({x.stage, y.stage, z.stage}) + 1;
            if (k + 1 >= cols.size())
                cols.resize(k + 2); // may reallocate; index access only
            cols[k + 1].push_back(TreeBit{out_stage, seq++, c});
            TreeBit sb{out_stage, seq++, s};
            cols[k].insert(std::lower_bound(cols[k].begin(), cols[k].end(), sb), sb);
        }
    }
    std::vector<int> row0(cols.size(), -1), row1(cols.size(), -1);
    for (size_t k = 0; k < cols.size(); ++k) {
        std::sort(cols[k].begin(), cols[k].end());
        if (cols[k].size() > 2)
            fail(Err::internal, "tree reduction left more than two bits in a column");
        if (!cols[k].empty())
            row0[k] = cols[k][0].net;
        if (cols[k].size() > 1)
            row1[k] = cols[k][1].net;
    }
    auto pack = [&](std::vector<int>& row) {
        std::vector<int> out(row.size());
        for (size_t k = 0; k < row.size(); ++k)
            out[k] = row[k] < 0 ? -1 : row[k];
        return out;
    };
    return {pack(row0), pack(row1)};
}

std::vector<int> const_bits(NetlistBuilder& nb, uint64_t value, int width) {
    std::vector<int> bits((size_t)width);
    for (int k = 0; k < width; ++k)
        bits[(size_t)k] = (value >> k & 1) ? nb.c1() : nb.c0();
    return bits;
}

// Sums one sign's summand taps into a (bits, constant) pair: variable kept
// bits go through carry-save reduction + ripple CPA, constant contributions
// are returned for the caller to merge into its additive constant.
std::vector<int> build_tree_sum(NetlistBuilder& nb, const std::vector<PreparedModel::Tap>& taps, int sign,
                                const std::vector<std::vector<int>>& operand_nets, int width) {
    std::vector<std::vector<TreeBit>> cols;
    int seq = 0;
    for (const auto& tap : taps) {
        if (tap.sign != sign)
            continue;
        const auto& bits = operand_nets[(size_t)tap.input];
        for (int b = 0; b < (int)bits.size(); ++b) {
            if (!(tap.mask >> b & 1))
                continue;
            int col = tap.shift + b;
            if (col >= (int)cols.size())
                cols.resize((size_t)col + 1);
            cols[(size_t)col].push_back({0, seq++, bits[(size_t)b]});
        }
    }
    if (cols.empty())
        return std::vector<int>((size_t)width, nb.c0());
    auto [row0, row1] = reduce_tree(nb, cols);
    std::vector<int> a((size_t)width, nb.c0()), b2((size_t)width, nb.c0());
    for (size_t k = 0; k < row0.size() && k < (size_t)width; ++k) {
        if (row0[k] >= 0)
            a[k] = row0[k];
        if (row1[k] >= 0)
            b2[k] = row1[k];
    }
    return nb.ripple_add(a, b2, nb.c0(), width);
}

// acc = pos - neg + constant, two's complement over `width` bits.
std::vector<int> build_accumulator(NetlistBuilder& nb, const std::vector<PreparedModel::Tap>& taps,
                                   const std::vector<std::vector<int>>& operand_nets, int64_t const_units,
                                   int width) {
    bool has_pos = false, has_neg = false;
    for (const auto& tap : taps) {
        if (tap.mask == 0)
            continue;
        (tap.sign > 0 ? has_pos : has_neg) = true;
    }
    std::vector<int> acc;
    if (has_neg) {
        std::vector<int> pos = build_tree_sum(nb, taps, 1, operand_nets, width);
        std::vector<int> neg = build_tree_sum(nb, taps, -1, operand_nets, width);
        for (auto& bit : neg)
            bit = nb.inv(bit);
        acc = nb.ripple_add(pos, neg, nb.c1(), width); // pos + ~neg + 1
    } else if (has_pos) {
        acc = build_tree_sum(nb, taps, 1, operand_nets, width);
    } else {
        acc.assign((size_t)width, nb.c0());
    }
    uint64_t k = (uint64_t)const_units & (width >= 64 ? ~0ull : (1ull << width) - 1);
    if (k != 0)
        acc = nb.ripple_add(acc, const_bits(nb, k, width), nb.c0(), width);
    return acc;
}

std::vector<int> build_qrelu(NetlistBuilder& nb, const std::vector<int>& acc, int drop_bits, int out_bits) {
    int width = (int)acc.size();
    int sign = acc[(size_t)width - 1];
    int keep = nb.inv(sign);
    int ovf = nb.c0();
    for (int k = drop_bits + out_bits; k < width - 1; ++k)
        ovf = nb.or2(ovf, acc[(size_t)k]);
    std::vector<int> h((size_t)out_bits);
    for (int b = 0; b < out_bits; ++b) {
        int k = drop_bits + b;
        int bit = k < width - 1 ? acc[(size_t)k] : nb.c0();
        h[(size_t)b] = nb.and2(nb.or2(bit, ovf), keep);
    }
    return h;
}

struct BracketCand {
    std::vector<int> value; // pattern bits
    std::vector<int> index; // class index bits
};

BracketCand compare_and_pick(NetlistBuilder& nb, const BracketCand& a, const BracketCand& b, uint64_t mask) {
    // strictly-greater detection over kept bits, MSB first
    int b_gt = nb.c0();
    int eq = nb.c1();
    int width = (int)a.value.size();
    for (int k = width - 1; k >= 0; --k) {
        if (!(mask >> k & 1))
            continue;
        int av = a.value[(size_t)k], bv = b.value[(size_t)k];
        b_gt = nb.or2(b_gt, nb.and2(eq, nb.and2(nb.inv(av), bv)));
        eq = nb.and2(eq, nb.inv(nb.xor2(av, bv)));
    }
    BracketCand w;
    w.value.resize(a.value.size());
    for (size_t k = 0; k < a.value.size(); ++k)
        w.value[k] = nb.mux(b_gt, b.value[k], a.value[k]);
    w.index.resize(a.index.size());
    for (size_t k = 0; k < a.index.size(); ++k)
        w.index[k] = nb.mux(b_gt, b.index[k], a.index[k]);
    return w;
}

} // namespace

Netlist build_netlist(const QuantMLP& m, const AdderTreeLayout& layout, const Chromosome* chromosome,
                      const ArgmaxPlan* plan, bool include_argmax) {
    PreparedModel pm = prepare_model(m, layout, chromosome);
    const Topology& t = pm.topology;
    if (plan && !plan->empty() && plan->width != 0 && plan->width != pm.output_width)
        fail(Err::shape, "plan width does not match the model's comparator width");

    NetlistBuilder nb;
    nb.set_bus_meta(t.n_in, pm.input_bits);
    std::vector<std::vector<int>> input_nets((size_t)t.n_in);
    for (int j = 0; j < t.n_in; ++j) {
        input_nets[(size_t)j].resize((size_t)pm.input_bits);
        for (int b = 0; b < pm.input_bits; ++b)
            input_nets[(size_t)j][(size_t)b] = nb.add_input();
    }

    std::vector<std::vector<int>> hidden_nets((size_t)t.n_hidden);
    for (int k = 0; k < t.n_hidden; ++k) {
        std::vector<int> acc = build_accumulator(nb, pm.hidden_taps[(size_t)k], input_nets,
                                                 pm.hidden_bias[(size_t)k], pm.hidden_width);
        hidden_nets[(size_t)k] = build_qrelu(nb, acc, pm.trunc_shift[(size_t)k], pm.out_bits);
    }

    std::vector<std::vector<int>> out_acc((size_t)t.n_out);
    for (int o = 0; o < t.n_out; ++o)
        out_acc[(size_t)o] = build_accumulator(nb, pm.output_taps[(size_t)o], hidden_nets,
                                               pm.output_bias[(size_t)o], pm.output_width);

    if (!include_argmax) {
        std::vector<int> outs;
        for (const auto& acc : out_acc)
            for (int bit : acc)
                outs.push_back(bit);
        nb.set_outputs(std::move(outs));
        return nb.take();
    }

    int idx_bits = std::max(1, bit_width_u64((uint64_t)std::max(0, t.n_out - 1)));
    std::vector<BracketCand> cand((size_t)t.n_out);
    for (int o = 0; o < t.n_out; ++o) {
        auto& c = cand[(size_t)o];
        c.value = out_acc[(size_t)o];
        c.value[(size_t)pm.output_width - 1] = nb.inv(c.value[(size_t)pm.output_width - 1]);
        c.index.resize((size_t)idx_bits);
        for (int b = 0; b < idx_bits; ++b)
            c.index[(size_t)b] = (o >> b & 1) ? nb.c1() : nb.c0();
    }

    ArgmaxPlan fallback;
    const ArgmaxPlan* effective = plan;
    if (!effective || effective->empty()) {
        fallback = full_width_plan(t.n_out, pm.output_width);
        effective = &fallback;
    }
    uint64_t full_mask = pm.output_width >= 64 ? ~0ull : (1ull << pm.output_width) - 1;
    for (const auto& stage : effective->stages) {
        std::vector<BracketCand> next;
        std::vector<uint8_t> used(cand.size(), 0);
        for (const auto& comp : stage) {
            if (comp.a < 0 || comp.b < 0 || comp.a >= (int)cand.size() || comp.b >= (int)cand.size() ||
                comp.a == comp.b || used[(size_t)comp.a] || used[(size_t)comp.b])
                fail(Err::shape, "malformed argmax plan stage");
            used[(size_t)comp.a] = used[(size_t)comp.b] = 1;
            uint64_t mask = 0;
            for (int bit : comp.kept_bits)
                mask |= 1ull << bit;
            next.push_back(compare_and_pick(nb, cand[(size_t)comp.a], cand[(size_t)comp.b], mask & full_mask));
        }
        for (size_t i = 0; i < cand.size(); ++i)
            if (!used[i])
                next.push_back(cand[i]);
        cand = std::move(next);
    }
    if (cand.size() != 1)
        fail(Err::shape, "argmax plan does not reduce to one winner");
    nb.set_outputs(cand[0].index);
    return nb.take();
}

std::vector<uint8_t> simulate(const Netlist& n, const std::vector<uint8_t>& input) {
    if (input.size() != n.inputs.size())
        fail(Err::shape, "simulation input width mismatch");
    std::vector<uint8_t> val((size_t)n.n_nets, 0);
    val[(size_t)n.const1] = 1;
    for (size_t i = 0; i < input.size(); ++i)
        val[(size_t)n.inputs[i]] = input[i] ? 1 : 0;
    for (const auto& cell : n.cells) {
        uint8_t a = val[(size_t)cell.in[0]];
        uint8_t b = cell.in[1] >= 0 ? val[(size_t)cell.in[1]] : 0;
        uint8_t c = cell.in[2] >= 0 ? val[(size_t)cell.in[2]] : 0;
        switch (cell.kind) {
        case CellKind::AND:
            val[(size_t)cell.out[0]] = a & b;
            break;
        case CellKind::OR:
            val[(size_t)cell.out[0]] = a | b;
            break;
        case CellKind::XOR:
            val[(size_t)cell.out[0]] = a ^ b;
            break;
        case CellKind::INV:
            val[(size_t)cell.out[0]] = a ^ 1;
            break;
        case CellKind::HA:
            val[(size_t)cell.out[0]] = a ^ b;
            val[(size_t)cell.out[1]] = a & b;
            break;
        case CellKind::FA: {
            uint8_t s = a ^ b ^ c;
            uint8_t carry = (uint8_t)((a & b) | ((a ^ b) & c));
            val[(size_t)cell.out[0]] = s;
            val[(size_t)cell.out[1]] = carry;
            break;
        }
        }
    }
    std::vector<uint8_t> out;
    out.reserve(n.outputs.size());
    for (int net : n.outputs)
        out.push_back(val[(size_t)net]);
    return out;
}

int simulate_class(const Netlist& n, const uint32_t* x) {
    std::vector<uint8_t> input(n.inputs.size());
    for (int j = 0; j < n.n_in; ++j)
        for (int b = 0; b < n.input_bits; ++b)
            input[(size_t)(j * n.input_bits + b)] = (uint8_t)(x[j] >> b & 1);
    std::vector<uint8_t> out = simulate(n, input);
    int cls = 0;
    for (size_t k = 0; k < out.size(); ++k)
        cls |= (int)out[k] << k;
    return cls;
}

GateStats gate_stats(const Netlist& n) {
    GateStats s;
    for (const auto& cell : n.cells) {
        switch (cell.kind) {
        case CellKind::FA:
            ++s.fa;
            break;
        case CellKind::HA:
            ++s.ha;
            break;
        case CellKind::AND:
            ++s.and_;
            break;
        case CellKind::OR:
            ++s.or_;
            break;
        case CellKind::INV:
            ++s.inv;
            break;
        case CellKind::XOR:
            ++s.xor_;
            break;
        }
    }
    s.weighted = 2.0 * (double)s.fa + 1.0 * (double)s.ha + 0.5 * (double)(s.and_ + s.or_ + s.inv + s.xor_);
    return s;
}

std::string netlist_to_json(const Netlist& n) {
    static const char* kind_names[] = {"FA", "HA", "AND", "OR", "INV", "XOR"};
    nlohmann::json j;
    j["n_nets"] = n.n_nets;
    j["const0"] = n.const0;
    j["const1"] = n.const1;
    j["inputs"] = n.inputs;
    j["outputs"] = n.outputs;
    j["cells"] = nlohmann::json::array();
    for (const auto& cell : n.cells) {
        nlohmann::json cj;
        cj["kind"] = kind_names[(int)cell.kind];
        cj["in"] = nlohmann::json::array();
        for (int v : cell.in)
            if (v >= 0)
                cj["in"].push_back(v);
        cj["out"] = nlohmann::json::array();
        for (int v : cell.out)
            if (v >= 0)
                cj["out"].push_back(v);
        j["cells"].push_back(std::move(cj));
    }
    return j.dump();
}

} // namespace axmlp
