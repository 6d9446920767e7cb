#include "axmlp/adder_tree.hpp"
#include "axmlp/common.hpp"
#include "axmlp/infer.hpp"
#include "axmlp/mlp.hpp"
#include "axmlp/rng.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

using namespace axmlp;

namespace {

QuantMLP hand_model(std::vector<std::vector<Po2>> w1, std::vector<Po2> b1, std::vector<std::vector<Po2>> w2,
                    std::vector<Po2> b2, int input_bits = 4) {
    QuantMLP m;
    m.topology = {(int)w1[0].size(), (int)w1.size(), (int)w2.size()};
    m.input_bits = input_bits;
    m.qrelu.out_bits = 8;
    m.qrelu.truncate_lsb.assign(w1.size(), 0);
    m.layers.resize(2);
    m.layers[0].weights = std::move(w1);
    m.layers[0].biases = std::move(b1);
    m.layers[1].weights = std::move(w2);
    m.layers[1].biases = std::move(b2);
    return m;
}

PreparedModel prep(const QuantMLP& m, const Chromosome* c = nullptr) {
    AdderTreeLayout layout = build_layout(m);
    return prepare_model(m, layout, c);
}

} // namespace

TEST_CASE("signed width covers the bound interval") {
    CHECK(signed_width_for(0, 0) == 1);
    CHECK(signed_width_for(-1, 0) == 1);
    CHECK(signed_width_for(0, 1) == 2);
    CHECK(signed_width_for(-2, 1) == 2);
    CHECK(signed_width_for(-128, 127) == 8);
    CHECK(signed_width_for(-129, 127) == 9);
    CHECK(signed_width_for(0, 255) == 9);
    CHECK_THROWS_AS(signed_width_for(1, 0), AxError);
}

TEST_CASE("hidden activation floors, clips, and nullifies in integer units") {
    // +x0 - x1 with x = (5,5) cancels to zero; relu output is 0
    QuantMLP cancel = hand_model({{{+1, 0}, {-1, 0}}}, {{0, 0}}, {{{+1, 0}}}, {{0, 0}});
    PreparedModel pm = prep(cancel);
    uint32_t x[2] = {5, 5};
    int64_t out = -1;
    forward_units(pm, x, &out);
    CHECK(out == 0);

    // 2^-2 * 5 = 1.25 floors to h=1; with w2=1 the output is 1 in real terms
    QuantMLP frac = hand_model({{{+1, -2}}}, {{0, 0}}, {{{+1, 0}}}, {{0, 0}});
    PreparedModel pf = prep(frac);
    CHECK(pf.align == 2);
    uint32_t x1[1] = {5};
    forward_units(pf, x1, &out);
    CHECK(out == 4); // h=1, output units = 1 << align

    // negative pre-activation nullifies instead of going negative
    uint32_t x2[2] = {3, 5};
    forward_units(pm, x2, &out);
    CHECK(out == 0);
    uint32_t x3[2] = {5, 3};
    forward_units(pm, x3, &out);
    CHECK(out == 2);
}

TEST_CASE("prediction matches a naive float reference on random models") {
    Rng rng(31);
    int checked = 0;
    for (int mi = 0; mi < 50; ++mi) {
        QuantMLP m = testutil::random_model(rng, 2 + (int)rng.below(5), 1 + (int)rng.below(5), 2 + (int)rng.below(5));
        AdderTreeLayout layout = build_layout(m);
        PreparedModel exact = prepare_model(m, layout, nullptr);
        Chromosome c = testutil::random_chromosome(rng, layout.total_genes, 0.75);
        PreparedModel masked = prepare_model(m, layout, &c);
        for (int xi = 0; xi < 100; ++xi) {
            std::vector<uint32_t> x = testutil::random_input(rng, m.topology.n_in, m.input_bits);
            REQUIRE(predict(exact, x.data()) == testutil::reference_predict(m, nullptr, x));
            REQUIRE(predict(masked, x.data()) == testutil::reference_predict(m, &c, x));
            checked += 2;
        }
    }
    CHECK(checked == 10000);
}

TEST_CASE("masked prediction is exhaustively correct on a tiny model") {
    Rng rng(37);
    QuantMLP m = testutil::random_model(rng, 2, 1, 2);
    AdderTreeLayout layout = build_layout(m);
    for (int ci = 0; ci < 40; ++ci) {
        Chromosome c = testutil::random_chromosome(rng, layout.total_genes, 0.6);
        PreparedModel pm = prepare_model(m, layout, &c);
        for (uint32_t a = 0; a < 16; ++a)
            for (uint32_t b = 0; b < 16; ++b) {
                std::vector<uint32_t> x = {a, b};
                REQUIRE(predict(pm, x.data()) == testutil::reference_predict(m, &c, x));
                REQUIRE(forward_masked(m, layout, c, x) == predict(pm, x.data()));
            }
    }
}

TEST_CASE("ties pick the lowest output index") {
    // identical output rows make every class score equal
    QuantMLP m = hand_model({{{+1, 0}}}, {{0, 0}}, {{{+1, 0}}, {{+1, 0}}, {{+1, 0}}}, {{0, 0}, {0, 0}, {0, 0}});
    PreparedModel pm = prep(m);
    uint32_t x[1] = {9};
    int64_t units[3];
    forward_units(pm, x, units);
    CHECK(units[0] == units[1]);
    CHECK(units[1] == units[2]);
    CHECK(predict(pm, x) == 0);
    ArgmaxPlan plan = full_width_plan(3, pm.output_width);
    CHECK(predict_plan(pm, plan, x) == 0);
}

TEST_CASE("analytic accumulator bounds contain every reachable output") {
    Rng rng(41);
    for (int mi = 0; mi < 20; ++mi) {
        QuantMLP m = testutil::random_model(rng, 3, 2, 3);
        AdderTreeLayout layout = build_layout(m);
        Chromosome c = testutil::random_chromosome(rng, layout.total_genes, 0.7);
        PreparedModel pm = prepare_model(m, layout, &c);
        int64_t units[3];
        for (int xi = 0; xi < 200; ++xi) {
            std::vector<uint32_t> x = testutil::random_input(rng, m.topology.n_in, m.input_bits);
            forward_units(pm, x.data(), units);
            for (int o = 0; o < 3; ++o) {
                REQUIRE(units[o] >= pm.output_lo[(size_t)o]);
                REQUIRE(units[o] <= pm.output_hi[(size_t)o]);
                REQUIRE(signed_width_for(pm.output_lo[(size_t)o], pm.output_hi[(size_t)o]) <= pm.output_width);
            }
        }
    }
}

TEST_CASE("offset-binary patterns sort like the signed units") {
    Rng rng(43);
    QuantMLP m = testutil::random_model(rng, 4, 3, 4);
    PreparedModel pm = prep(m);
    int64_t units[4];
    uint64_t patterns[4];
    for (int xi = 0; xi < 200; ++xi) {
        std::vector<uint32_t> x = testutil::random_input(rng, m.topology.n_in, m.input_bits);
        forward_units(pm, x.data(), units);
        output_patterns(pm, units, patterns);
        for (int a = 0; a < 4; ++a) {
            REQUIRE(patterns[a] < (1ull << pm.output_width));
            for (int b = 0; b < 4; ++b)
                REQUIRE((units[a] < units[b]) == (patterns[a] < patterns[b]));
        }
    }
}

TEST_CASE("full-width plan reproduces the exact argmax") {
    Rng rng(47);
    for (int mi = 0; mi < 20; ++mi) {
        int n_out = 2 + (int)rng.below(7);
        QuantMLP m = testutil::random_model(rng, 3, 2, n_out);
        PreparedModel pm = prep(m);
        ArgmaxPlan plan = full_width_plan(n_out, pm.output_width);
        for (int xi = 0; xi < 100; ++xi) {
            std::vector<uint32_t> x = testutil::random_input(rng, m.topology.n_in, m.input_bits);
            REQUIRE(predict_plan(pm, plan, x.data()) == predict(pm, x.data()));
        }
    }
}

TEST_CASE("plan validation rejects malformed brackets") {
    Rng rng(53);
    QuantMLP m = testutil::random_model(rng, 3, 2, 4);
    PreparedModel pm = prep(m);
    uint32_t x[3] = {1, 2, 3};

    ArgmaxPlan wrong_width = full_width_plan(4, pm.output_width + 1);
    CHECK_THROWS_AS(predict_plan(pm, wrong_width, x), AxError);

    ArgmaxPlan self;
    self.width = pm.output_width;
    self.stages = {{{0, 0, {0}}}};
    CHECK_THROWS_AS(predict_plan(pm, self, x), AxError);

    ArgmaxPlan reuse;
    reuse.width = pm.output_width;
    reuse.stages = {{{0, 1, {0}}, {1, 2, {0}}}};
    CHECK_THROWS_AS(predict_plan(pm, reuse, x), AxError);

    ArgmaxPlan hollow;
    hollow.width = pm.output_width;
    hollow.stages = {{}};
    CHECK_THROWS_AS(predict_plan(pm, hollow, x), AxError);

    ArgmaxPlan stuck;
    stuck.width = pm.output_width;
    stuck.stages = {{{0, 1, {0}}}}; // 4 candidates -> 3, never reaches 1
    CHECK_THROWS_AS(predict_plan(pm, stuck, x), AxError);

    // empty plan falls back to the exact argmax
    ArgmaxPlan none;
    CHECK(predict_plan(pm, none, x) == predict(pm, x));
}

TEST_CASE("accuracy counts matches over the dataset") {
    QuantMLP m = hand_model({{{+1, 0}}}, {{0, 0}}, {{{+1, 0}}, {{-1, 0}}}, {{0, 0}, {+1, 2}});
    PreparedModel pm = prep(m);
    // class 1 wins when -h + 4 > h, i.e. h < 2
    QuantizedDataset data;
    data.input_bits = 4;
    data.features = {{0}, {1}, {2}, {5}};
    data.labels = {1, 1, 0, 0};
    data.n_classes = 2;
    CHECK(accuracy(pm, data) == 1.0);
    data.labels = {1, 0, 0, 0};
    CHECK(accuracy(pm, data) == 0.75);
    ArgmaxPlan plan = full_width_plan(2, pm.output_width);
    CHECK(accuracy(pm, data, &plan) == 0.75);

    QuantizedDataset empty;
    CHECK_THROWS_AS(accuracy(pm, empty), AxError);
    QuantizedDataset wide = data;
    wide.features = {{1, 2}};
    wide.labels = {0};
    CHECK_THROWS_AS(accuracy(pm, wide), AxError);
}

TEST_CASE("prediction export writes one row per sample") {
    Rng rng(59);
    QuantMLP m = testutil::random_model(rng, 3, 2, 3);
    PreparedModel pm = prep(m);
    QuantizedDataset data = testutil::random_qdataset(rng, m, 12);
    testutil::ScratchDir dir("pred");
    std::string path = dir.file("p.csv");
    export_predictions_csv(path, pm, data);
    std::string text = read_file(path);
    CHECK(text.rfind("sample,label,prediction\n", 0) == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 13);
    // spot-check the first row against predict()
    int first = predict(pm, data.features[0].data());
    std::string row0 = "0," + std::to_string(data.labels[0]) + "," + std::to_string(first) + "\n";
    CHECK(text.find(row0) != std::string::npos);
}

TEST_CASE("wrapper input validation") {
    Rng rng(61);
    QuantMLP m = testutil::random_model(rng, 3, 2, 2);
    AdderTreeLayout layout = build_layout(m);
    CHECK_THROWS_AS(forward_exact(m, {1, 2}), AxError);
    CHECK_THROWS_AS(forward_masked(m, layout, all_keep(layout), {1, 2}), AxError);
    Chromosome bad(layout.total_genes + 1, 1);
    CHECK_THROWS_AS(prepare_model(m, layout, &bad), AxError);
}
