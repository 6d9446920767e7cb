#pragma once

#include "axmlp/adder_tree.hpp"
#include "axmlp/argmax_plan.hpp"
#include "axmlp/infer.hpp"
#include "axmlp/mlp.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace axmlp {

enum class CellKind { FA, HA, AND, OR, INV, XOR };

struct Cell {
    CellKind kind;
    std::array<int, 3> in{-1, -1, -1};
    std::array<int, 2> out{-1, -1};
};

struct Netlist {
    int n_nets = 0;
    int const0 = -1;
    int const1 = -1;
    int n_in = 0;      // primary input count (model inputs)
    int input_bits = 0;
    std::vector<int> inputs;  // nets of the flattened input bus, LSB first
    std::vector<int> outputs; // binary class index, LSB first
    std::vector<Cell> cells;  // topological order
};

struct GateStats {
    long long fa = 0, ha = 0, and_ = 0, or_ = 0, inv = 0, xor_ = 0;
    double weighted = 0.0; // FA 2, HA 1, simple gates 0.5
};

// Constant-folding structural builder; cells come out in topological order
// and every net is driven exactly once.
class NetlistBuilder {
  public:
    NetlistBuilder();
    int c0() const { return nl_.const0; }
    int c1() const { return nl_.const1; }
    int add_input();
    int and2(int a, int b);
    int or2(int a, int b);
    int xor2(int a, int b);
    int inv(int a);
    int mux(int sel, int on_true, int on_false);
    std::pair<int, int> half_add(int a, int b);          // (sum, carry)
    std::pair<int, int> full_add(int a, int b, int cin); // (sum, carry)
    // a + b + cin, truncated to out_width bits; short operands zero-extend.
    std::vector<int> ripple_add(const std::vector<int>& a, const std::vector<int>& b, int cin, int out_width);
    void set_outputs(std::vector<int> outs) { nl_.outputs = std::move(outs); }
    void set_bus_meta(int n_in, int input_bits);
    Netlist take() { return std::move(nl_); }

  private:
    int fresh();
    Netlist nl_;
    std::vector<int> inv_of_; // memoized inverter outputs, -1 = none
};

// Gate-level circuit for the masked model plus the plan's comparator bracket
// (or an exact full-width bracket when plan is null). chromosome null =
// all-keep. include_argmax=false exposes the raw output accumulators instead
// of the class index.
Netlist build_netlist(const QuantMLP& m, const AdderTreeLayout& layout, const Chromosome* chromosome,
                      const ArgmaxPlan* plan, bool include_argmax = true);

// Topological evaluation; input = one bit per flattened bus position.
std::vector<uint8_t> simulate(const Netlist& n, const std::vector<uint8_t>& input);

// Packs the quantized feature vector onto the bus and decodes the class.
int simulate_class(const Netlist& n, const uint32_t* x);

GateStats gate_stats(const Netlist& n);

std::string netlist_to_json(const Netlist& n);

} // namespace axmlp
