#pragma once

#include <string>
#include <vector>

namespace axmlp {

// One masked comparator: operands are positions in the stage's incoming
// candidate list, a < b, and the winner's full value advances. kept_bits are
// the compared bit positions (ascending); both operands are zeroed outside
// them, and the first operand wins ties.
struct PlanComparator {
    int a = 0;
    int b = 0;
    std::vector<int> kept_bits;
};

// Single-elimination bracket over the output neurons. Stage s consumes the
// candidate list C_s (stage 0: neuron indices in order) and produces
// C_{s+1} = winners in comparator order, then unpaired candidates ascending.
struct ArgmaxPlan {
    int width = 0; // operand width; derived from the model, not serialized
    std::vector<std::vector<PlanComparator>> stages;

    bool empty() const { return stages.empty(); }
};

// In-order full-width bracket (1st vs 2nd, 3rd vs 4th, ...): reproduces the
// exact lowest-index argmax bit-for-bit, ties included.
ArgmaxPlan full_width_plan(int n_candidates, int width);

std::string plan_to_json(const ArgmaxPlan& plan);
ArgmaxPlan plan_from_json(const std::string& text);

} // namespace axmlp
