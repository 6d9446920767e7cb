#include "axmlp/adder_tree.hpp"
#include "axmlp/common.hpp"
#include "axmlp/infer.hpp"
#include "axmlp/nsga2.hpp"
#include "axmlp/rng.hpp"

#include "helpers.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

using namespace axmlp;

namespace {

Individual make_ind(double acc, int64_t fa, double violation = 0.0) {
    Individual ind;
    ind.accuracy = acc;
    ind.fa_area = fa;
    ind.violation = violation;
    return ind;
}

// Peeling oracle: rank 0 = dominated by nobody, remove, repeat.
std::vector<int> rank_oracle(const std::vector<Individual>& pop) {
    std::vector<int> rank(pop.size(), -1);
    int current = 0;
    size_t assigned = 0;
    while (assigned < pop.size()) {
        std::vector<size_t> layer;
        for (size_t i = 0; i < pop.size(); ++i) {
            if (rank[i] != -1)
                continue;
            bool dominated = false;
            for (size_t j = 0; j < pop.size() && !dominated; ++j)
                if (j != i && rank[j] == -1 && constrained_dominates(pop[j], pop[i]))
                    dominated = true;
            if (!dominated)
                layer.push_back(i);
        }
        REQUIRE(!layer.empty());
        for (size_t i : layer)
            rank[i] = current;
        assigned += layer.size();
        ++current;
    }
    return rank;
}

double kept_fraction(const Chromosome& c) {
    size_t kept = 0;
    for (uint8_t g : c)
        kept += g;
    return (double)kept / (double)c.size();
}

} // namespace

TEST_CASE("constraint domination ordering") {
    Individual better = make_ind(0.85, 90);
    Individual worse = make_ind(0.80, 100);
    CHECK(constrained_dominates(better, worse));
    CHECK(!constrained_dominates(worse, better));

    // strict improvement in one objective with equality in the other counts
    CHECK(constrained_dominates(make_ind(0.85, 90), make_ind(0.85, 95)));
    CHECK(constrained_dominates(make_ind(0.90, 90), make_ind(0.85, 90)));

    // equal points and trade-offs are mutually non-dominating
    CHECK(!constrained_dominates(make_ind(0.85, 90), make_ind(0.85, 90)));
    CHECK(!constrained_dominates(make_ind(0.90, 100), make_ind(0.80, 90)));
    CHECK(!constrained_dominates(make_ind(0.80, 90), make_ind(0.90, 100)));

    // feasibility first: a feasible point beats any infeasible one
    CHECK(constrained_dominates(make_ind(0.10, 500), make_ind(0.99, 1, 0.01)));
    CHECK(!constrained_dominates(make_ind(0.99, 1, 0.01), make_ind(0.10, 500)));

    // among infeasible points only the violation matters
    CHECK(constrained_dominates(make_ind(0.1, 900, 0.05), make_ind(0.9, 10, 0.10)));
    CHECK(!constrained_dominates(make_ind(0.9, 10, 0.10), make_ind(0.1, 900, 0.05)));
    CHECK(!constrained_dominates(make_ind(0.2, 5, 0.05), make_ind(0.3, 7, 0.05)));
}

TEST_CASE("nondominated sort agrees with the peeling oracle") {
    Rng rng(401);
    for (int iter = 0; iter < 20; ++iter) {
        std::vector<Individual> pop;
        for (int i = 0; i < 120; ++i) {
            double acc = (double)rng.below(20) / 20.0;
            int64_t fa = (int64_t)rng.below(50);
            double viol = rng.bernoulli(0.25) ? (double)(1 + rng.below(10)) / 100.0 : 0.0;
            pop.push_back(make_ind(acc, fa, viol));
        }
        std::vector<int> expect = rank_oracle(pop);
        fast_nondominated_sort(pop);
        for (size_t i = 0; i < pop.size(); ++i)
            REQUIRE(pop[i].rank == expect[i]);
    }
}

TEST_CASE("crowding distance hand cases") {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<Individual> pop = {make_ind(0.0, 0), make_ind(0.25, 10), make_ind(0.75, 30), make_ind(1.0, 40)};
    crowding_distance(pop, {0, 1, 2, 3});
    CHECK(pop[0].crowding == inf);
    CHECK(pop[3].crowding == inf);
    // (0.75-0.0)/1.0 + (30-0)/40 and (1.0-0.25)/1.0 + (40-10)/40
    CHECK(pop[1].crowding == doctest::Approx(1.5));
    CHECK(pop[2].crowding == doctest::Approx(1.5));

    // fronts of one or two members are all boundary
    crowding_distance(pop, {1, 2});
    CHECK(pop[1].crowding == inf);
    CHECK(pop[2].crowding == inf);
    crowding_distance(pop, {3});
    CHECK(pop[3].crowding == inf);

    // a dimension with no spread contributes nothing to the interior
    std::vector<Individual> flat = {make_ind(0.5, 0), make_ind(0.5, 10), make_ind(0.5, 40)};
    crowding_distance(flat, {0, 1, 2});
    CHECK(flat[0].crowding == inf);
    CHECK(flat[2].crowding == inf);
    CHECK(flat[1].crowding == doctest::Approx(1.0));
}

TEST_CASE("zero generations returns the evaluated seed population") {
    Rng rng(409);
    QuantMLP m = testutil::random_model(rng, 4, 3, 3);
    AdderTreeLayout layout = build_layout(m);
    QuantizedDataset train = testutil::random_qdataset(rng, m, 50);

    GaConfig cfg;
    cfg.population_size = 12;
    cfg.generations = 0;
    cfg.seed = 5;
    GaResult res = nsga2_optimize(m, layout, train, cfg);

    PreparedModel pm = prepare_model(m, layout, nullptr);
    CHECK(res.baseline_accuracy == accuracy(pm, train));
    CHECK(res.population.size() == 12);
    REQUIRE(!res.front.empty());

    // the all-keep anchor survives evaluation, so its objectives are present
    Chromosome keep = all_keep(layout);
    int64_t anchor_fa = estimate_area(layout, keep);
    bool anchor_seen = false;
    for (const Individual& ind : res.population)
        if (ind.chromosome == keep) {
            anchor_seen = true;
            CHECK(ind.fa_area == anchor_fa);
            CHECK(ind.accuracy == res.baseline_accuracy);
        }
    CHECK(anchor_seen);
}

TEST_CASE("front invariants and determinism") {
    Rng rng(419);
    QuantMLP m = testutil::random_model(rng, 4, 3, 3);
    AdderTreeLayout layout = build_layout(m);
    QuantizedDataset train = testutil::random_qdataset(rng, m, 60);

    GaConfig cfg;
    cfg.population_size = 24;
    cfg.generations = 8;
    cfg.seed = 11;
    GaResult res = nsga2_optimize(m, layout, train, cfg);

    double floor = res.baseline_accuracy - cfg.accuracy_loss_bound;
    REQUIRE(!res.front.empty());
    std::set<std::pair<int64_t, double>> seen;
    for (size_t i = 0; i < res.front.size(); ++i) {
        const Individual& ind = res.front[i];
        CHECK(ind.rank == 0);
        CHECK(ind.feasible());
        CHECK(ind.accuracy >= floor - 1e-12);
        CHECK(seen.insert({ind.fa_area, ind.accuracy}).second); // deduped
        // verify the reported objectives against independent recomputation
        PreparedModel pm = prepare_model(m, layout, &ind.chromosome);
        CHECK(ind.accuracy == accuracy(pm, train));
        CHECK(ind.fa_area == estimate_area(layout, ind.chromosome));
        if (i > 0) {
            // a deduped nondominated set is strictly increasing in both axes
            CHECK(res.front[i - 1].fa_area < ind.fa_area);
            CHECK(res.front[i - 1].accuracy < ind.accuracy);
        }
    }

    // pruning under a 0.15 loss bound finds something cheaper than all-keep
    int64_t anchor_fa = estimate_area(layout, all_keep(layout));
    CHECK(res.front.front().fa_area < anchor_fa);

    // population comes back sorted by (rank, fa_area, -accuracy)
    for (size_t i = 1; i < res.population.size(); ++i) {
        const Individual& a = res.population[i - 1];
        const Individual& b = res.population[i];
        bool ordered = a.rank < b.rank ||
                       (a.rank == b.rank &&
                        (a.fa_area < b.fa_area || (a.fa_area == b.fa_area && a.accuracy >= b.accuracy)));
        CHECK(ordered);
    }

    GaResult again = nsga2_optimize(m, layout, train, cfg);
    CHECK(front_to_jsonl(again.front) == front_to_jsonl(res.front));
}

TEST_CASE("feasible extremes never regress across generations") {
    Rng rng(421);
    QuantMLP m = testutil::random_model(rng, 3, 2, 3);
    AdderTreeLayout layout = build_layout(m);
    QuantizedDataset train = testutil::random_qdataset(rng, m, 40);

    GaConfig cfg;
    cfg.population_size = 20;
    cfg.generations = 10;
    cfg.seed = 3;
    double best_acc = -1.0;
    int64_t best_fa = std::numeric_limits<int64_t>::max();
    int calls = 0;
    nsga2_optimize(m, layout, train, cfg, [&](int gen, const std::vector<Individual>& pop) {
        CHECK(gen == calls);
        ++calls;
        double acc = -1.0;
        int64_t fa = std::numeric_limits<int64_t>::max();
        for (const Individual& ind : pop)
            if (ind.feasible()) {
                acc = std::max(acc, ind.accuracy);
                fa = std::min(fa, ind.fa_area);
            }
        CHECK(acc >= best_acc); // elitism keeps the accuracy extreme
        CHECK(fa <= best_fa);   // and the area extreme
        best_acc = acc;
        best_fa = fa;
    });
    CHECK(calls == 10);
}

TEST_CASE("initial population keeps bits at the configured probability") {
    Rng rng(431);
    QuantMLP m = testutil::random_model(rng, 40, 80, 10);
    AdderTreeLayout layout = build_layout(m);
    REQUIRE(layout.total_genes >= 10000);
    QuantizedDataset train = testutil::random_qdataset(rng, m, 8);

    GaConfig cfg;
    cfg.population_size = 16;
    cfg.generations = 0;
    cfg.seed = 77;
    GaResult res = nsga2_optimize(m, layout, train, cfg);
    int anchors = 0, in_band = 0;
    for (const Individual& ind : res.population) {
        double f = kept_fraction(ind.chromosome);
        if (f == 1.0)
            ++anchors;
        else if (f > 0.88 && f < 0.92)
            ++in_band;
    }
    CHECK(anchors == 1);
    CHECK(in_band == 15);
}

TEST_CASE("degenerate configurations") {
    Rng rng(433);
    QuantMLP m = testutil::random_model(rng, 3, 2, 2);
    AdderTreeLayout layout = build_layout(m);
    QuantizedDataset train = testutil::random_qdataset(rng, m, 30);

    GaConfig cfg;
    cfg.population_size = 1;
    cfg.generations = 2;
    GaResult res = nsga2_optimize(m, layout, train, cfg);
    CHECK(res.population.size() == 1);
    REQUIRE(res.front.size() == 1);

    cfg.population_size = 6;
    cfg.generations = 0;
    cfg.init_keep_probability = 1.0;
    GaResult all = nsga2_optimize(m, layout, train, cfg);
    REQUIRE(all.front.size() == 1); // every individual is the all-keep point
    CHECK(all.front[0].chromosome == all_keep(layout));

    cfg.population_size = 0;
    CHECK_THROWS_AS(nsga2_optimize(m, layout, train, cfg), AxError);
}

TEST_CASE("front jsonl round trip") {
    std::vector<Individual> front = {make_ind(0.8125, 42), make_ind(0.75, 17)};
    front[0].chromosome = {1, 0, 1, 1};
    front[1].chromosome = {0, 0, 0, 1};
    std::string text = front_to_jsonl(front);
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);
    std::vector<Individual> back = front_from_jsonl(text);
    REQUIRE(back.size() == 2);
    for (size_t i = 0; i < 2; ++i) {
        CHECK(back[i].chromosome == front[i].chromosome);
        CHECK(back[i].accuracy == front[i].accuracy);
        CHECK(back[i].fa_area == front[i].fa_area);
    }
    CHECK(front_from_jsonl("").empty());
    CHECK(front_from_jsonl("\n\n").empty());
    CHECK_THROWS_WITH_AS(front_from_jsonl("{\"chromosome\":\"1\",\"train_accuracy\":1,\"fa_area\":1}\nnot json\n"),
                         doctest::Contains("line 2"), AxError);
}
