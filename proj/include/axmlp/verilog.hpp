#pragma once

#include "axmlp/netlist.hpp"

#include <string>
#include <utility>
#include <vector>

namespace axmlp {

struct EmitConfig {
    std::string module_name = "bespoke_mlp";
    bool include_argmax = true;
    // Rendered into the header comment in order (key: value).
    std::vector<std::pair<std::string, std::string>> header_fields;
};

// Flat combinational Verilog-2001 for an already-built netlist. Contains no
// multiplication operator token anywhere (comments included) and is
// deterministic byte-for-byte.
std::string render_verilog(const Netlist& n, const EmitConfig& cfg);

std::string emit_verilog(const QuantMLP& m, const AdderTreeLayout& layout, const Chromosome* chromosome,
                         const ArgmaxPlan* plan, const EmitConfig& cfg);

} // namespace axmlp
