#pragma once

#include "axmlp/adder_tree.hpp"
#include "axmlp/argmax_plan.hpp"
#include "axmlp/dataset.hpp"
#include "axmlp/infer.hpp"
#include "axmlp/mlp.hpp"

#include <cstdint>
#include <limits>
#include <utility>
#include <vector>

namespace axmlp {

inline constexpr int64_t kInfCost = std::numeric_limits<int64_t>::max() / 4;

// Minimum-cost perfect matching (the assignment step of the comparator
// pairing). Entries >= kInfCost are disallowed; an odd side is handled by the
// caller via a zero-cost dummy column. Deterministic lexicographic
// tie-breaking; exact optimum (verified against brute force in tests).
std::vector<std::pair<int, int>> hungarian_assign(const std::vector<std::vector<int64_t>>& cost);

// Greedy MSB-to-LSB bit selection for the comparator (i, j) with every other
// comparison exact; returns kept bit positions (ascending). The 0.5%-absolute
// train accuracy guard is evaluated against the full-width reference.
std::vector<int> greedy_bit_select(const PreparedModel& pm, const QuantizedDataset& train, int i, int j);

// Fits the full multi-stage bracket on the train set: per stage a cost matrix
// of greedy bit counts, minimum-cost pairing, then a sequential refit of the
// chosen comparators so the telescoped accuracy bound holds.
ArgmaxPlan build_plan(const QuantMLP& m, const AdderTreeLayout& layout, const Chromosome& c,
                      const QuantizedDataset& train);

} // namespace axmlp
