#pragma once

#include "axmlp/mlp.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace axmlp {

// One shifted operand feeding a neuron's accumulation tree. The operand has
// `bits` variable bits occupying tree-local columns (exp - tree.min_exp) ..
// (exp - tree.min_exp + bits - 1); genes index them LSB first.
struct TreeRow {
    int input_index = 0;
    int exp = 0;
    int bits = 0;
    int gene_base = 0;
};

struct SummandTree {
    int layer = 0;  // 0 = hidden, 1 = output
    int neuron = 0;
    int sign = 1; // +1 or -1
    int min_exp = 0;
    int width = 0; // tree-local column count
    std::vector<TreeRow> rows;
};

struct AdderTreeLayout {
    std::vector<SummandTree> trees;
    std::vector<int> operand_bits; // per layer: bits per summand operand
    int align = 0;                 // global shift of the source model
    int total_genes = 0;
};

// Keep/remove flags over every variable summand bit, canonical order:
// layer asc, neuron asc, positive tree before negative, rows by input index,
// bits LSB to MSB. 1 = keep.
using Chromosome = std::vector<uint8_t>;

AdderTreeLayout build_layout(const QuantMLP& m);

Chromosome all_keep(const AdderTreeLayout& layout);

// Bits of one row's keep-mask, LSB-aligned to the operand.
uint32_t row_mask(const TreeRow& row, const Chromosome& c);

// Eq. (2): FAs needed to reduce a column holding L_k bits plus the carries of
// the previous column, clamped at zero.
int fa_count_column(int L_k, int carry_in_FAs);

long long estimate_tree_area(const SummandTree& tree, const Chromosome& c);

// Eq. (3): total FA count over every tree of the MLP.
long long estimate_area(const AdderTreeLayout& layout, const Chromosome& c);

struct OracleResult {
    long long fa = 0;     // reduction full-adders (the Eq. (2)-(3) quantity)
    long long ha = 0;     // half-adders in the final carry-propagate add
    long long cpa_fa = 0; // full-adders in the final carry-propagate add
    int stages = 0;       // reduction stage depth
};

// Bit-by-bit greedy carry-save reduction (earliest-stage triples first,
// columns LSB to MSB) followed by a structural two-row ripple add. Used by
// tests as the independent check on estimate_area.
OracleResult reduction_oracle(const SummandTree& tree, const Chromosome& c);

// Same simulation on raw per-column bit counts (column index = vector index).
OracleResult reduce_columns(const std::vector<int>& column_bit_counts);

std::string chromosome_to_string(const Chromosome& c);
Chromosome chromosome_from_string(const std::string& s);

std::string layout_to_json(const AdderTreeLayout& layout);
AdderTreeLayout layout_from_json(const std::string& text);

} // namespace axmlp
