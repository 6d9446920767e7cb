#pragma once

#include "axmlp/adder_tree.hpp"
#include "axmlp/argmax_plan.hpp"
#include "axmlp/dataset.hpp"
#include "axmlp/mlp.hpp"

#include <cstdint>
#include <vector>

namespace axmlp {

// Smallest two's-complement width covering [lo, hi].
int signed_width_for(int64_t lo, int64_t hi);

// Compiled split-sign integer model: weights become (input, shift, sign)
// wire taps, chromosome masks are folded into per-tap bit masks, and all
// accumulation happens in int64 units of 2^-align.
struct PreparedModel {
    Topology topology;
    int input_bits = 4;
    int out_bits = 8;
    int align = 0;

    struct Tap {
        int input = 0;
        int shift = 0; // exp + align, always >= 0
        int sign = 1;
        uint32_t mask = 0; // keep-mask over the operand's bits
    };
    std::vector<std::vector<Tap>> hidden_taps; // per hidden neuron
    std::vector<std::vector<Tap>> output_taps; // per output neuron
    std::vector<int64_t> hidden_bias;          // in accumulator units
    std::vector<int64_t> output_bias;
    std::vector<int> trunc_shift; // per hidden neuron: truncate_lsb + align

    // Analytic per-neuron accumulator bounds under the folded masks.
    std::vector<int64_t> hidden_lo, hidden_hi;
    std::vector<int64_t> output_lo, output_hi;
    int hidden_width = 1; // layer-wide, used by the netlist
    int output_width = 1; // layer-wide, comparator operand width
};

// chromosome = nullptr means all-keep.
PreparedModel prepare_model(const QuantMLP& m, const AdderTreeLayout& layout, const Chromosome* chromosome);

// Output-layer accumulators in integer units; x must hold topology.n_in values.
void forward_units(const PreparedModel& pm, const uint32_t* x, int64_t* out_units);

// Exact argmax, lowest index on ties.
int predict(const PreparedModel& pm, const uint32_t* x);

// Bracket argmax under the plan (plan.width must be pm.output_width).
int predict_plan(const PreparedModel& pm, const ArgmaxPlan& plan, const uint32_t* x);

// Offset-binary comparison patterns (unsigned order == signed accumulator
// order); what the hardware comparators see.
void output_patterns(const PreparedModel& pm, const int64_t* units, uint64_t* patterns);

double accuracy(const PreparedModel& pm, const QuantizedDataset& data, const ArgmaxPlan* plan = nullptr);

// Convenience wrappers matching the one-shot operation contracts.
int forward_exact(const QuantMLP& m, const std::vector<uint32_t>& x);
int forward_masked(const QuantMLP& m, const AdderTreeLayout& layout, const Chromosome& c,
                   const std::vector<uint32_t>& x);

void export_predictions_csv(const std::string& path, const PreparedModel& pm, const QuantizedDataset& data,
                            const ArgmaxPlan* plan = nullptr);

} // namespace axmlp
