#include "axmlp/verilog.hpp"

#include "axmlp/common.hpp"

#include <cctype>

namespace axmlp {

namespace {

bool valid_identifier(const std::string& s) {
    if (s.empty())
        return false;
    if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_'))
        return false;
    for (char ch : s)
        if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_'))
            return false;
    return true;
}

} // namespace

std::string render_verilog(const Netlist& n, const EmitConfig& cfg) {
    if (!valid_identifier(cfg.module_name))
        fail(Err::invalid, "invalid Verilog module name: '" + cfg.module_name + "'");

    // Net id -> textual operand.
    std::vector<std::string> name(static_cast<size_t>(n.n_nets));
    name[static_cast<size_t>(n.const0)] = "1'b0";
    name[static_cast<size_t>(n.const1)] = "1'b1";
    for (size_t i = 0; i < n.inputs.size(); ++i)
        name[static_cast<size_t>(n.inputs[i])] = "x[" + std::to_string(i) + "]";
    std::vector<int> wires;
    for (const Cell& c : n.cells) {
        for (int o : c.out) {
            if (o < 0)
                continue;
            if (!name[static_cast<size_t>(o)].empty())
                fail(Err::internal, "net driven twice in netlist");
            name[static_cast<size_t>(o)] = "n" + std::to_string(o);
            wires.push_back(o);
        }
    }
    for (int o : n.outputs)
        if (name[static_cast<size_t>(o)].empty())
            fail(Err::internal, "undriven output net in netlist");

    std::string s;
    s.reserve(64 * n.cells.size() + 4096);
    s += "// Combinational inference circuit; pure gate-level assigns, no operators beyond & | ^ ~.\n";
    for (const auto& [k, v] : cfg.header_fields)
        s += "// " + k + ": " + v + "\n";
    s += "module " + cfg.module_name + " (x, y);\n";
    s += "  input [" + std::to_string(n.inputs.size() - 1) + ":0] x;\n";
    s += "  output [" + std::to_string(n.outputs.size() - 1) + ":0] y;\n";
    for (int w : wires)
        s += "  wire n" + std::to_string(w) + ";\n";
    s += "\n";

    auto nm = [&](int net) -> const std::string& { return name[static_cast<size_t>(net)]; };
    for (const Cell& c : n.cells) {
        const std::string& a = nm(c.in[0]);
        const std::string& b = c.in[1] >= 0 ? nm(c.in[1]) : a;
        switch (c.kind) {
        case CellKind::FA: {
            const std::string& ci = nm(c.in[2]);
            s += "  assign " + nm(c.out[0]) + " = (" + a + " ^ " + b + ") ^ " + ci + ";\n";
            s += "  assign " + nm(c.out[1]) + " = (" + a + " & " + b + ") | ((" + a + " ^ " + b + ") & " + ci +
                 ");\n";
            break;
        }
        case CellKind::HA:
            s += "  assign " + nm(c.out[0]) + " = " + a + " ^ " + b + ";\n";
            s += "  assign " + nm(c.out[1]) + " = " + a + " & " + b + ";\n";
            break;
        case CellKind::AND:
            s += "  assign " + nm(c.out[0]) + " = " + a + " & " + b + ";\n";
            break;
        case CellKind::OR:
            s += "  assign " + nm(c.out[0]) + " = " + a + " | " + b + ";\n";
            break;
        case CellKind::XOR:
            s += "  assign " + nm(c.out[0]) + " = " + a + " ^ " + b + ";\n";
            break;
        case CellKind::INV:
            s += "  assign " + nm(c.out[0]) + " = ~" + a + ";\n";
            break;
        }
    }
    s += "\n";
    for (size_t k = 0; k < n.outputs.size(); ++k)
        s += "  assign y[" + std::to_string(k) + "] = " + nm(n.outputs[k]) + ";\n";
    s += "endmodule\n";

    if (s.find('*') != std::string::npos)
        fail(Err::internal, "emitted Verilog contains a multiplication token");
    return s;
}

std::string emit_verilog(const QuantMLP& m, const AdderTreeLayout& layout, const Chromosome* chromosome,
                         const ArgmaxPlan* plan, const EmitConfig& cfg) {
    Netlist n = build_netlist(m, layout, chromosome, plan, cfg.include_argmax);
    return render_verilog(n, cfg);
}

} // namespace axmlp
