#include "axmlp/adder_tree.hpp"
#include "axmlp/argmax.hpp"
#include "axmlp/common.hpp"
#include "axmlp/infer.hpp"
#include "axmlp/rng.hpp"
#include "axmlp/verilog.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <cctype>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace axmlp;

namespace {

// Minimal evaluator for the emitted subset of Verilog (operands, ~ & ^ |,
// parentheses). Deliberately independent of the netlist simulator so the two
// act as cross-checks.
struct ExprEval {
    const std::string& s;
    const std::map<std::string, uint8_t>& env;
    size_t p = 0;

    void ws() {
        while (p < s.size() && s[p] == ' ')
            ++p;
    }
    uint8_t primary() {
        ws();
        if (s[p] == '(') {
            ++p;
            uint8_t v = or_level();
            ws();
            REQUIRE(s[p] == ')');
            ++p;
            return v;
        }
        if (s[p] == '~') {
            ++p;
            return primary() ^ 1;
        }
        size_t q = p;
        while (q < s.size() &&
               (std::isalnum(static_cast<unsigned char>(s[q])) || s[q] == '_' || s[q] == '[' || s[q] == ']' ||
                s[q] == '\''))
            ++q;
        std::string tok = s.substr(p, q - p);
        p = q;
        REQUIRE(env.count(tok) == 1);
        return env.at(tok);
    }
    uint8_t and_level() {
        uint8_t v = primary();
        ws();
        while (p < s.size() && s[p] == '&') {
            ++p;
            v = v & primary();
            ws();
        }
        return v;
    }
    uint8_t xor_level() {
        uint8_t v = and_level();
        ws();
        while (p < s.size() && s[p] == '^') {
            ++p;
            v = v ^ and_level();
            ws();
        }
        return v;
    }
    uint8_t or_level() {
        uint8_t v = xor_level();
        ws();
        while (p < s.size() && s[p] == '|') {
            ++p;
            v = v | xor_level();
            ws();
        }
        return v;
    }
};

struct ParsedModule {
    int n_in = 0;
    int n_out = 0;
    std::set<std::string> wires;
    std::vector<std::pair<std::string, std::string>> assigns; // lhs, rhs
};

ParsedModule parse_module(const std::string& text) {
    ParsedModule m;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        size_t b = line.find_first_not_of(' ');
        if (b == std::string::npos)
            continue;
        std::string t = line.substr(b);
        if (t.rfind("input [", 0) == 0)
            m.n_in = std::stoi(t.substr(7)) + 1;
        else if (t.rfind("output [", 0) == 0)
            m.n_out = std::stoi(t.substr(8)) + 1;
        else if (t.rfind("wire ", 0) == 0)
            m.wires.insert(t.substr(5, t.size() - 6)); // strip trailing ';'
        else if (t.rfind("assign ", 0) == 0) {
            size_t eq = t.find(" = ");
            REQUIRE(eq != std::string::npos);
            REQUIRE(t.back() == ';');
            m.assigns.emplace_back(t.substr(7, eq - 7), t.substr(eq + 3, t.size() - eq - 4));
        }
    }
    return m;
}

// Runs one input vector through the parsed text.
std::vector<uint8_t> eval_module(const ParsedModule& m, const std::vector<uint8_t>& x) {
    REQUIRE((int)x.size() == m.n_in);
    std::map<std::string, uint8_t> env;
    env["1'b0"] = 0;
    env["1'b1"] = 1;
    for (int i = 0; i < m.n_in; ++i)
        env["x[" + std::to_string(i) + "]"] = x[(size_t)i];
    for (const auto& [lhs, rhs] : m.assigns) {
        ExprEval e{rhs, env};
        uint8_t v = e.or_level();
        REQUIRE(env.count(lhs) == 0); // single driver, topological order
        env[lhs] = v;
    }
    std::vector<uint8_t> y((size_t)m.n_out);
    for (int k = 0; k < m.n_out; ++k)
        y[(size_t)k] = env.at("y[" + std::to_string(k) + "]");
    return y;
}

uint32_t decode_class(const std::vector<uint8_t>& y) {
    uint32_t c = 0;
    for (size_t k = 0; k < y.size(); ++k)
        c |= (uint32_t)y[k] << k;
    return c;
}

} // namespace

TEST_CASE("emitted verilog matches the netlist exhaustively") {
    Rng rng(211);
    QuantMLP m = testutil::random_model(rng, 2, 2, 2, 3);
    AdderTreeLayout layout = build_layout(m);
    Chromosome c = testutil::random_chromosome(rng, layout.total_genes, 0.75);
    Netlist n = build_netlist(m, layout, &c, nullptr);
    EmitConfig cfg;
    std::string text = render_verilog(n, cfg);
    ParsedModule pm = parse_module(text);
    REQUIRE(pm.n_in == (int)n.inputs.size());
    REQUIRE(pm.n_out == (int)n.outputs.size());

    PreparedModel prep = prepare_model(m, layout, &c);
    for (uint32_t a = 0; a < 8; ++a)
        for (uint32_t b = 0; b < 8; ++b) {
            std::vector<uint8_t> x(6);
            for (int k = 0; k < 3; ++k) {
                x[(size_t)k] = (uint8_t)(a >> k & 1);
                x[(size_t)(3 + k)] = (uint8_t)(b >> k & 1);
            }
            std::vector<uint8_t> y = eval_module(pm, x);
            REQUIRE(y == simulate(n, x));
            uint32_t xi[2] = {a, b};
            REQUIRE(decode_class(y) == predict(prep, xi));
        }
}

TEST_CASE("emitted verilog honours a comparator plan") {
    Rng rng(223);
    QuantMLP m = testutil::random_model(rng, 3, 2, 4, 3);
    AdderTreeLayout layout = build_layout(m);
    Chromosome c = testutil::random_chromosome(rng, layout.total_genes, 0.85);
    QuantizedDataset train = testutil::random_qdataset(rng, m, 60);
    ArgmaxPlan plan = build_plan(m, layout, c, train);
    EmitConfig cfg;
    std::string text = emit_verilog(m, layout, &c, &plan, cfg);
    ParsedModule pmod = parse_module(text);

    PreparedModel prep = prepare_model(m, layout, &c);
    for (int iter = 0; iter < 200; ++iter) {
        std::vector<uint32_t> xi = testutil::random_input(rng, 3, 3);
        std::vector<uint8_t> x(9);
        for (int j = 0; j < 3; ++j)
            for (int b = 0; b < 3; ++b)
                x[(size_t)(j * 3 + b)] = (uint8_t)(xi[(size_t)j] >> b & 1);
        REQUIRE(decode_class(eval_module(pmod, x)) == predict_plan(prep, plan, xi.data()));
    }
}

TEST_CASE("module text structure and determinism") {
    Rng rng(227);
    QuantMLP m = testutil::random_model(rng, 2, 2, 3);
    AdderTreeLayout layout = build_layout(m);
    EmitConfig cfg;
    cfg.module_name = "sample_top";
    cfg.header_fields = {{"dataset", "demo"}, {"accuracy", "0.9125"}};
    std::string text = emit_verilog(m, layout, nullptr, nullptr, cfg);

    CHECK(text.rfind("// Combinational inference circuit", 0) == 0);
    CHECK(text.find("// dataset: demo\n") != std::string::npos);
    CHECK(text.find("// accuracy: 0.9125\n") != std::string::npos);
    CHECK(text.find("// dataset: demo") < text.find("// accuracy: 0.9125"));
    CHECK(text.find("module sample_top (x, y);") != std::string::npos);
    CHECK(text.find("input [7:0] x;") != std::string::npos); // 2 inputs x 4 bits
    CHECK(text.find("output [1:0] y;") != std::string::npos);
    CHECK(text.find('*') == std::string::npos);
    CHECK(text.substr(text.size() - 10) == "endmodule\n");

    // every internal assign target is a declared wire, each driven once
    ParsedModule pmod = parse_module(text);
    std::set<std::string> driven;
    for (const auto& [lhs, rhs] : pmod.assigns) {
        CHECK(driven.insert(lhs).second);
        if (lhs[0] == 'n')
            CHECK(pmod.wires.count(lhs) == 1);
    }
    for (const std::string& w : pmod.wires)
        CHECK(driven.count(w) == 1);

    CHECK(emit_verilog(m, layout, nullptr, nullptr, cfg) == text); // byte determinism
}

TEST_CASE("module names are validated") {
    Rng rng(229);
    QuantMLP m = testutil::random_model(rng, 2, 1, 2);
    AdderTreeLayout layout = build_layout(m);
    EmitConfig cfg;
    for (const char* bad : {"", "2bad", "has space", "has-dash", "dotted.name"}) {
        cfg.module_name = bad;
        CHECK_THROWS_AS(emit_verilog(m, layout, nullptr, nullptr, cfg), AxError);
    }
    cfg.module_name = "_ok_name_3";
    CHECK(emit_verilog(m, layout, nullptr, nullptr, cfg).find("module _ok_name_3 ") != std::string::npos);
}

TEST_CASE("malformed netlists are rejected") {
    Netlist bad;
    bad.n_nets = 5;
    bad.const0 = 0;
    bad.const1 = 1;
    bad.inputs = {2};
    Cell c1;
    c1.kind = CellKind::INV;
    c1.in = {2, -1, -1};
    c1.out = {3, -1};
    Cell c2 = c1;
    c2.out = {3, -1}; // drives the same net again
    bad.cells = {c1, c2};
    bad.outputs = {3};
    EmitConfig cfg;
    CHECK_THROWS_WITH_AS(render_verilog(bad, cfg), doctest::Contains("driven twice"), AxError);

    bad.cells = {c1};
    bad.outputs = {4}; // nothing drives net 4
    CHECK_THROWS_WITH_AS(render_verilog(bad, cfg), doctest::Contains("undriven"), AxError);
}

TEST_CASE("raw accumulator emission widths") {
    Rng rng(233);
    QuantMLP m = testutil::random_model(rng, 2, 2, 3, 3);
    AdderTreeLayout layout = build_layout(m);
    PreparedModel prep = prepare_model(m, layout, nullptr);
    EmitConfig cfg;
    cfg.include_argmax = false;
    std::string text = emit_verilog(m, layout, nullptr, nullptr, cfg);
    ParsedModule pmod = parse_module(text);
    CHECK(pmod.n_out == 3 * prep.output_width);
}
