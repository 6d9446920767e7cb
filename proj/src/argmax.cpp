#include "axmlp/argmax.hpp"

#include "axmlp/common.hpp"
#include "axmlp/parallel.hpp"

#include <algorithm>
#include <cassert>

#include <json.hpp>

namespace axmlp {

ArgmaxPlan full_width_plan(int n_candidates, int width) {
    if (n_candidates < 1)
        fail(Err::invalid, "full_width_plan needs at least one candidate");
    ArgmaxPlan plan;
    plan.width = width;
    std::vector<int> all_bits(width);
    for (int b = 0; b < width; ++b)
        all_bits[(size_t)b] = b;
    int remaining = n_candidates;
    while (remaining > 1) {
        std::vector<PlanComparator> stage;
        for (int a = 0; a + 1 < remaining; a += 2)
            stage.push_back({a, a + 1, all_bits});
        remaining = (int)stage.size() + (remaining % 2);
        plan.stages.push_back(std::move(stage));
    }
    return plan;
}

std::string plan_to_json(const ArgmaxPlan& plan) {
    nlohmann::json j;
    j["stages"] = nlohmann::json::array();
    for (const auto& stage : plan.stages) {
        nlohmann::json sj = nlohmann::json::array();
        for (const auto& comp : stage)
            sj.push_back({{"a", comp.a}, {"b", comp.b}, {"kept_bits", comp.kept_bits}});
        j["stages"].push_back(std::move(sj));
    }
    return j.dump();
}

ArgmaxPlan plan_from_json(const std::string& text) {
    ArgmaxPlan plan;
    try {
        auto j = nlohmann::json::parse(text);
        for (const auto& sj : j.at("stages")) {
            std::vector<PlanComparator> stage;
            for (const auto& cj : sj) {
                PlanComparator comp;
                comp.a = cj.at("a").get<int>();
                comp.b = cj.at("b").get<int>();
                comp.kept_bits = cj.at("kept_bits").get<std::vector<int>>();
                std::sort(comp.kept_bits.begin(), comp.kept_bits.end());
                stage.push_back(std::move(comp));
            }
            plan.stages.push_back(std::move(stage));
        }
    } catch (const AxError&) {
        throw;
    } catch (const std::exception& e) {
        fail(Err::parse, std::string("bad argmax plan JSON: ") + e.what());
    }
    return plan;
}

std::vector<std::pair<int, int>> hungarian_assign(const std::vector<std::vector<int64_t>>& cost) {
    int n = (int)cost.size();
    if (n < 1)
        fail(Err::invalid, "empty cost matrix");
    for (const auto& row : cost)
        if ((int)row.size() != n)
            fail(Err::shape, "cost matrix must be square");
    if (n % 2 != 0)
        fail(Err::invalid, "cost matrix side must be even (pad odd sides with a zero-cost dummy)");
    if (n > 24)
        fail(Err::invalid, "cost matrix too large");

    size_t full = (size_t)1 << n;
    std::vector<int64_t> dp(full, kInfCost);
    dp[0] = 0;
    for (size_t mask = 1; mask < full; ++mask) {
        int i = 0;
        while (!(mask >> i & 1))
            ++i;
        size_t rest_i = mask ^ ((size_t)1 << i);
        int64_t best = kInfCost;
        for (int j = i + 1; j < n; ++j) {
            if (!(mask >> j & 1))
                continue;
            int64_t c = cost[(size_t)i][(size_t)j];
            if (c >= kInfCost)
                continue;
            size_t rest = rest_i ^ ((size_t)1 << j);
            if (dp[rest] >= kInfCost)
                continue;
            best = std::min(best, c + dp[rest]);
        }
        dp[mask] = best;
    }
    if (dp[full - 1] >= kInfCost)
        fail(Err::invalid, "no feasible assignment");

    std::vector<std::pair<int, int>> pairs;
    size_t mask = full - 1;
    while (mask) {
        int i = 0;
        while (!(mask >> i & 1))
            ++i;
        size_t rest_i = mask ^ ((size_t)1 << i);
        for (int j = i + 1; j < n; ++j) {
            if (!(mask >> j & 1))
                continue;
            int64_t c = cost[(size_t)i][(size_t)j];
            if (c >= kInfCost)
                continue;
            size_t rest = rest_i ^ ((size_t)1 << j);
            if (dp[rest] < kInfCost && c + dp[rest] == dp[mask]) {
                pairs.emplace_back(i, j); // smallest j first: lexicographic optimum
                mask = rest;
                break;
            }
        }
    }
    return pairs;
}

namespace {

// Per-sample comparator operand patterns; fitting re-runs only the cheap
// bracket walk instead of the full forward pass.
struct PatternCache {
    int n_out = 0;
    int width = 0;
    std::vector<uint64_t> patterns; // n_samples x n_out
    std::vector<int> labels;
    size_t n() const { return labels.size(); }
};

PatternCache build_cache(const PreparedModel& pm, const QuantizedDataset& data) {
    PatternCache cache;
    cache.n_out = pm.topology.n_out;
    cache.width = pm.output_width;
    cache.labels = data.labels;
    cache.patterns.resize(data.n_samples() * (size_t)pm.topology.n_out);
    parallel_for(data.n_samples(), [&](size_t i) {
        int64_t units[256];
        forward_units(pm, data.features[i].data(), units);
        output_patterns(pm, units, &cache.patterns[i * (size_t)pm.topology.n_out]);
    });
    return cache;
}

uint64_t mask_of(const std::vector<int>& kept_bits) {
    uint64_t m = 0;
    for (int b : kept_bits)
        m |= 1ull << b;
    return m;
}

// A comparator under construction: operands are positions in the incoming
// candidate list; mask kInfCost-free; full-width when mask == ~0.
struct EvalComp {
    int a, b;
    uint64_t mask;
};

// Walks fitted stages then finishes with an exact full-width linear scan over
// whatever candidates remain; returns the winning original neuron index.
int eval_sample(const PatternCache& cache, size_t sample, const std::vector<std::vector<EvalComp>>& stages) {
    const uint64_t* p = &cache.patterns[sample * (size_t)cache.n_out];
    int idx[64];
    uint64_t val[64];
    int n = cache.n_out;
    for (int i = 0; i < n; ++i) {
        idx[i] = i;
        val[i] = p[i];
    }
    for (const auto& stage : stages) {
        int next_idx[64];
        uint64_t next_val[64];
        uint64_t used = 0;
        int m = 0;
        for (const auto& comp : stage) {
            uint64_t va = val[comp.a] & comp.mask;
            uint64_t vb = val[comp.b] & comp.mask;
            int w = vb > va ? comp.b : comp.a;
            next_idx[m] = idx[w];
            next_val[m] = val[w];
            ++m;
            used |= 1ull << comp.a;
            used |= 1ull << comp.b;
        }
        for (int i = 0; i < n; ++i) {
            if (used >> i & 1)
                continue;
            next_idx[m] = idx[i];
            next_val[m] = val[i];
            ++m;
        }
        n = m;
        std::copy(next_idx, next_idx + n, idx);
        std::copy(next_val, next_val + n, val);
    }
    int best = 0;
    for (int i = 1; i < n; ++i)
        if (val[i] > val[best])
            best = i;
    return idx[best];
}

double eval_accuracy(const PatternCache& cache, const std::vector<std::vector<EvalComp>>& stages) {
    size_t correct = 0;
    for (size_t s = 0; s < cache.n(); ++s)
        if (eval_sample(cache, s, stages) == cache.labels[s])
            ++correct;
    return (double)correct / (double)cache.n();
}

// Greedy MSB-to-LSB fit of the comparator at stages[stage_idx][comp_idx];
// every other comparator keeps its current mask. Guard: accuracy may not
// fall more than 0.005 below the full-width reference.
std::vector<int> fit_comparator(const PatternCache& cache, std::vector<std::vector<EvalComp>> stages, size_t stage_idx,
                                size_t comp_idx) {
    EvalComp& comp = stages[stage_idx][comp_idx];
    comp.mask = ~0ull;
    double reference = eval_accuracy(cache, stages);
    uint64_t full = cache.width >= 64 ? ~0ull : (1ull << cache.width) - 1;
    comp.mask = full;
    for (int bit = cache.width - 1; bit >= 0; --bit) {
        uint64_t tentative = comp.mask & ~(1ull << bit);
        comp.mask = tentative;
        if (eval_accuracy(cache, stages) < reference - 0.005)
            comp.mask = tentative | (1ull << bit); // keep the bit
    }
    std::vector<int> kept;
    for (int b = 0; b < cache.width; ++b)
        if (comp.mask >> b & 1)
            kept.push_back(b);
    return kept;
}

} // namespace

std::vector<int> greedy_bit_select(const PreparedModel& pm, const QuantizedDataset& train, int i, int j) {
    if (i == j || i < 0 || j < 0 || i >= pm.topology.n_out || j >= pm.topology.n_out)
        fail(Err::invalid, "greedy_bit_select needs two distinct output neurons");
    if (pm.topology.n_out > 64)
        fail(Err::invalid, "too many output neurons");
    PatternCache cache = build_cache(pm, train);
    std::vector<std::vector<EvalComp>> stages(1);
    stages[0].push_back({std::min(i, j), std::max(i, j), ~0ull});
    return fit_comparator(cache, stages, 0, 0);
}

ArgmaxPlan build_plan(const QuantMLP& m, const AdderTreeLayout& layout, const Chromosome& c,
                      const QuantizedDataset& train) {
    if (m.topology.n_out < 2)
        fail(Err::invalid, "build_plan needs at least two output neurons");
    if (m.topology.n_out > 64)
        fail(Err::invalid, "too many output neurons");
    PreparedModel pm = prepare_model(m, layout, &c);
    PatternCache cache = build_cache(pm, train);

    ArgmaxPlan plan;
    plan.width = pm.output_width;
    std::vector<std::vector<EvalComp>> fitted; // committed stages
    int n_candidates = m.topology.n_out;
    double base_acc = eval_accuracy(cache, fitted);
    int total_comparators = 0;

    while (n_candidates > 1) {
        // Cost matrix: greedy kept-bit count per candidate pair, each fitted
        // independently against the exact remainder.
        int n = n_candidates;
        std::vector<std::vector<int64_t>> cost((size_t)n, std::vector<int64_t>((size_t)n, kInfCost));
        std::vector<std::pair<int, int>> pair_list;
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j)
                pair_list.emplace_back(i, j);
        std::vector<int64_t> pair_cost(pair_list.size());
        parallel_for(pair_list.size(), [&](size_t pi) {
            auto [i, j] = pair_list[pi];
            auto stages = fitted;
            stages.emplace_back();
            stages.back().push_back({i, j, ~0ull});
            pair_cost[pi] = (int64_t)fit_comparator(cache, stages, stages.size() - 1, 0).size();
        });
        for (size_t pi = 0; pi < pair_list.size(); ++pi) {
            auto [i, j] = pair_list[pi];
            cost[(size_t)i][(size_t)j] = pair_cost[pi];
            cost[(size_t)j][(size_t)i] = pair_cost[pi];
        }

        // Pairing; odd candidate counts pass the dummy-matched one through.
        std::vector<std::vector<int64_t>> padded = cost;
        int side = n;
        if (n % 2 != 0) {
            side = n + 1;
            padded.resize((size_t)side);
            for (auto& row : padded)
                row.resize((size_t)side, 0);
            padded[(size_t)n].assign((size_t)side, 0);
        }
        for (int i = 0; i < side; ++i)
            padded[(size_t)i][(size_t)i] = kInfCost;
        auto pairs = hungarian_assign(padded);
        std::vector<std::pair<int, int>> real_pairs;
        for (auto [a, b] : pairs)
            if (a < n && b < n)
                real_pairs.emplace_back(a, b);
        std::sort(real_pairs.begin(), real_pairs.end());

        // Sequential refit in comparison order keeps the telescoped
        // accuracy bound: each reference equals the running plan accuracy.
        fitted.emplace_back();
        std::vector<PlanComparator> stage_out;
        for (auto [a, b] : real_pairs) {
            fitted.back().push_back({a, b, ~0ull});
            std::vector<int> kept = fit_comparator(cache, fitted, fitted.size() - 1, fitted.back().size() - 1);
            fitted.back().back().mask = mask_of(kept);
            stage_out.push_back({a, b, kept});
            ++total_comparators;
        }
        plan.stages.push_back(std::move(stage_out));
        n_candidates = (int)real_pairs.size() + (n_candidates - 2 * (int)real_pairs.size());
    }

    double final_acc = eval_accuracy(cache, fitted);
    if (final_acc < base_acc - 0.005 * (double)total_comparators - 1e-12)
        fail(Err::internal, "argmax plan violated its telescoped accuracy bound");
    return plan;
}

} // namespace axmlp
