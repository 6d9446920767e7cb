#include "axmlp/adder_tree.hpp"

#include "axmlp/common.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <json.hpp>

namespace axmlp {

AdderTreeLayout build_layout(const QuantMLP& m) {
    if (m.layers.size() != 2)
        fail(Err::shape, "layout expects a two-layer quantized model");
    AdderTreeLayout layout;
    layout.align = alignment_of(m);
    layout.operand_bits = {m.input_bits, m.qrelu.out_bits};
    int gene = 0;
    for (int layer = 0; layer < 2; ++layer) {
        int bits = layout.operand_bits[layer];
        int n_neurons = (int)m.layers[layer].weights.size();
        for (int neuron = 0; neuron < n_neurons; ++neuron) {
            const auto& wrow = m.layers[layer].weights[neuron];
            for (int sign : {1, -1}) {
                SummandTree tree;
                tree.layer = layer;
                tree.neuron = neuron;
                tree.sign = sign;
                for (int j = 0; j < (int)wrow.size(); ++j) {
                    if (wrow[j].sign != sign)
                        continue;
                    TreeRow row;
                    row.input_index = j;
                    row.exp = wrow[j].exp;
                    row.bits = bits;
                    row.gene_base = gene;
                    gene += bits;
                    tree.rows.push_back(row);
                }
                if (tree.rows.empty())
                    continue;
                int min_exp = tree.rows[0].exp, max_exp = tree.rows[0].exp;
                for (const auto& r : tree.rows) {
                    min_exp = std::min(min_exp, r.exp);
                    max_exp = std::max(max_exp, r.exp);
                }
                tree.min_exp = min_exp;
                tree.width = (max_exp - min_exp) + bits;
                layout.trees.push_back(std::move(tree));
            }
        }
    }
    layout.total_genes = gene;
    return layout;
}

Chromosome all_keep(const AdderTreeLayout& layout) {
    return Chromosome((size_t)layout.total_genes, 1);
}

uint32_t row_mask(const TreeRow& row, const Chromosome& c) {
    uint32_t mask = 0;
    for (int b = 0; b < row.bits; ++b)
        if (c[(size_t)(row.gene_base + b)])
            mask |= 1u << b;
    return mask;
}

int fa_count_column(int L_k, int carry_in_FAs) {
    int m = L_k + carry_in_FAs - 2;
    return m <= 0 ? 0 : (m + 1) / 2; // ceil(m / 2)
}

namespace {

std::vector<int> column_counts(const SummandTree& tree, const Chromosome& c) {
    std::vector<int> counts((size_t)tree.width, 0);
    for (const auto& row : tree.rows) {
        for (int b = 0; b < row.bits; ++b) {
            if (!c[(size_t)(row.gene_base + b)])
                continue;
            int col = (row.exp - tree.min_exp) + b;
            counts[(size_t)col] += 1;
        }
    }
    return counts;
}

} // namespace

long long estimate_tree_area(const SummandTree& tree, const Chromosome& c) {
    std::vector<int> counts = column_counts(tree, c);
    long long total = 0;
    int carry = 0;
    for (size_t k = 0; k < counts.size() || carry > 0; ++k) {
        int L = k < counts.size() ? counts[k] : 0;
        int fa = fa_count_column(L, carry);
        total += fa;
        carry = fa;
    }
    return total;
}

long long estimate_area(const AdderTreeLayout& layout, const Chromosome& c) {
    if ((int)c.size() != layout.total_genes)
        fail(Err::shape, "chromosome length " + std::to_string(c.size()) + " does not match layout genes " +
                             std::to_string(layout.total_genes));
    long long total = 0;
    for (const auto& tree : layout.trees)
        total += estimate_tree_area(tree, c);
    return total;
}

OracleResult reduce_columns(const std::vector<int>& column_bit_counts) {
    // Multiset of stage tags per column; initial bits are stage 0.
    std::vector<std::multiset<int>> cols;
    cols.resize(column_bit_counts.size());
    for (size_t k = 0; k < column_bit_counts.size(); ++k)
        for (int i = 0; i < column_bit_counts[k]; ++i)
            cols[k].insert(0);

    OracleResult res;
    for (size_t k = 0; k < cols.size(); ++k) {
        while (cols[k].size() >= 3) {
            // Take the three earliest-stage bits; the FA output lands one
            // stage after the latest of them.
            int s = 0;
            for (int take = 0; take < 3; ++take) {
                auto it = cols[k].begin();
                s = std::max(s, *it);
                cols[k].erase(it);
            }
            int out_stage = s + 1;
            res.fa += 1;
            res.stages = std::max(res.stages, out_stage);
            cols[k].insert(out_stage);
            if (k + 1 >= cols.size())
                cols.resize(k + 2);
            cols[k + 1].insert(out_stage);
        }
    }

    // Structural ripple add of the remaining two rows.
    bool carry = false;
    for (size_t k = 0; k < cols.size(); ++k) {
        size_t items = cols[k].size() + (carry ? 1 : 0);
        if (items >= 3) {
            res.cpa_fa += 1;
            carry = true;
        } else if (items == 2) {
            res.ha += 1;
            carry = true;
        } else {
            carry = false;
        }
    }
    return res;
}

OracleResult reduction_oracle(const SummandTree& tree, const Chromosome& c) {
    return reduce_columns(column_counts(tree, c));
}

std::string chromosome_to_string(const Chromosome& c) {
    std::string s;
    s.reserve(c.size());
    for (uint8_t g : c)
        s.push_back(g ? '1' : '0');
    return s;
}

Chromosome chromosome_from_string(const std::string& s) {
    Chromosome c;
    c.reserve(s.size());
    for (char ch : s) {
        if (ch != '0' && ch != '1')
            fail(Err::parse, "chromosome string must contain only 0/1");
        c.push_back(ch == '1' ? 1 : 0);
    }
    return c;
}

std::string layout_to_json(const AdderTreeLayout& layout) {
    nlohmann::json j;
    j["align"] = layout.align;
    j["operand_bits"] = layout.operand_bits;
    j["trees"] = nlohmann::json::array();
    for (const auto& tree : layout.trees) {
        nlohmann::json tj;
        tj["layer"] = tree.layer;
        tj["neuron"] = tree.neuron;
        tj["sign"] = tree.sign;
        tj["rows"] = nlohmann::json::array();
        for (const auto& row : tree.rows)
            tj["rows"].push_back({{"input", row.input_index}, {"exp", row.exp}});
        j["trees"].push_back(std::move(tj));
    }
    return j.dump();
}

AdderTreeLayout layout_from_json(const std::string& text) {
    AdderTreeLayout layout;
    try {
        auto j = nlohmann::json::parse(text);
        layout.align = j.at("align").get<int>();
        layout.operand_bits = j.at("operand_bits").get<std::vector<int>>();
        int gene = 0;
        for (const auto& tj : j.at("trees")) {
            SummandTree tree;
            tree.layer = tj.at("layer").get<int>();
            tree.neuron = tj.at("neuron").get<int>();
            tree.sign = tj.at("sign").get<int>();
            if (tree.layer < 0 || tree.layer >= (int)layout.operand_bits.size())
                fail(Err::parse, "tree layer out of range");
            int bits = layout.operand_bits[(size_t)tree.layer];
            for (const auto& rj : tj.at("rows")) {
                TreeRow row;
                row.input_index = rj.at("input").get<int>();
                row.exp = rj.at("exp").get<int>();
                row.bits = bits;
                row.gene_base = gene;
                gene += bits;
                tree.rows.push_back(row);
            }
            if (tree.rows.empty())
                fail(Err::parse, "serialized tree without rows");
            int min_exp = tree.rows[0].exp, max_exp = tree.rows[0].exp;
            for (const auto& r : tree.rows) {
                min_exp = std::min(min_exp, r.exp);
                max_exp = std::max(max_exp, r.exp);
            }
            tree.min_exp = min_exp;
            tree.width = (max_exp - min_exp) + bits;
            layout.trees.push_back(std::move(tree));
        }
        layout.total_genes = gene;
    } catch (const AxError&) {
        throw;
    } catch (const std::exception& e) {
        fail(Err::parse, std::string("bad layout JSON: ") + e.what());
    }
    return layout;
}

} // namespace axmlp
