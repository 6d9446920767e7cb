#include "axmlp/nsga2.hpp"

#include "axmlp/common.hpp"
#include "axmlp/infer.hpp"
#include "axmlp/parallel.hpp"
#include "axmlp/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <limits>
#include <sstream>

namespace axmlp {

bool constrained_dominates(const Individual& a, const Individual& b) {
    if (a.violation == 0.0 && b.violation > 0.0)
        return true;
    if (a.violation > 0.0 && b.violation == 0.0)
        return false;
    if (a.violation > 0.0 && b.violation > 0.0)
        return a.violation < b.violation;
    bool no_worse = a.accuracy >= b.accuracy && a.fa_area <= b.fa_area;
    bool better = a.accuracy > b.accuracy || a.fa_area < b.fa_area;
    return no_worse && better;
}

void fast_nondominated_sort(std::vector<Individual>& pop) {
    size_t n = pop.size();
    std::vector<std::vector<int>> dominated(n);
    std::vector<int> dom_count(n, 0);
    std::vector<int> current;
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) {
            if (i == j)
                continue;
            if (constrained_dominates(pop[i], pop[j]))
                dominated[i].push_back(static_cast<int>(j));
            else if (constrained_dominates(pop[j], pop[i]))
                ++dom_count[i];
        }
        if (dom_count[i] == 0) {
            pop[i].rank = 0;
            current.push_back(static_cast<int>(i));
        }
    }
    int rank = 0;
    while (!current.empty()) {
        std::vector<int> next;
        for (int i : current) {
            for (int j : dominated[static_cast<size_t>(i)]) {
                if (--dom_count[static_cast<size_t>(j)] == 0) {
                    pop[static_cast<size_t>(j)].rank = rank + 1;
                    next.push_back(j);
                }
            }
        }
        ++rank;
        current = std::move(next);
    }
}

void crowding_distance(std::vector<Individual>& pop, const std::vector<int>& front) {
    const double inf = std::numeric_limits<double>::infinity();
    for (int i : front)
        pop[static_cast<size_t>(i)].crowding = 0.0;
    if (front.size() <= 2) {
        for (int i : front)
            pop[static_cast<size_t>(i)].crowding = inf;
        return;
    }
    auto accumulate = [&](auto key) {
        std::vector<int> order = front;
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            double ka = key(pop[static_cast<size_t>(a)]), kb = key(pop[static_cast<size_t>(b)]);
            if (ka != kb)
                return ka < kb;
            return a < b;
        });
        double lo = key(pop[static_cast<size_t>(order.front())]);
        double hi = key(pop[static_cast<size_t>(order.back())]);
        pop[static_cast<size_t>(order.front())].crowding = inf;
        pop[static_cast<size_t>(order.back())].crowding = inf;
        if (hi <= lo)
            return;
        for (size_t k = 1; k + 1 < order.size(); ++k) {
            double gap = key(pop[static_cast<size_t>(order[k + 1])]) - key(pop[static_cast<size_t>(order[k - 1])]);
            pop[static_cast<size_t>(order[k])].crowding += gap / (hi - lo);
        }
    };
    accumulate([](const Individual& x) { return x.accuracy; });
    accumulate([](const Individual& x) { return static_cast<double>(x.fa_area); });
}

namespace {

void evaluate_all(std::vector<Individual>& pop, const QuantMLP& m, const AdderTreeLayout& layout,
                  const QuantizedDataset& train, double accuracy_floor) {
    parallel_for(pop.size(), [&](size_t i) {
        Individual& ind = pop[i];
        PreparedModel pm = prepare_model(m, layout, &ind.chromosome);
        ind.accuracy = accuracy(pm, train);
        ind.fa_area = estimate_area(layout, ind.chromosome);
        ind.violation = std::max(0.0, accuracy_floor - ind.accuracy);
    });
}

// Lower rank wins; within a rank larger crowding wins; index breaks remaining
// ties so runs are reproducible.
int tournament(const std::vector<Individual>& pop, Rng& rng) {
    int a = static_cast<int>(rng.below(pop.size()));
    int b = static_cast<int>(rng.below(pop.size()));
    const Individual& ia = pop[static_cast<size_t>(a)];
    const Individual& ib = pop[static_cast<size_t>(b)];
    if (ia.rank != ib.rank)
        return ia.rank < ib.rank ? a : b;
    if (ia.crowding != ib.crowding)
        return ia.crowding > ib.crowding ? a : b;
    return std::min(a, b);
}

// Groups indices 0..n-1 by Individual::rank, each group in index order.
std::vector<std::vector<int>> fronts_of(const std::vector<Individual>& pop) {
    int max_rank = 0;
    for (const Individual& ind : pop)
        max_rank = std::max(max_rank, ind.rank);
    std::vector<std::vector<int>> fronts(static_cast<size_t>(max_rank) + 1);
    for (size_t i = 0; i < pop.size(); ++i)
        fronts[static_cast<size_t>(pop[i].rank)].push_back(static_cast<int>(i));
    return fronts;
}

} // namespace

GaResult nsga2_optimize(const QuantMLP& m, const AdderTreeLayout& layout, const QuantizedDataset& train,
                        const GaConfig& cfg, const GaProgress& progress) {
    if (cfg.population_size < 1)
        fail(Err::invalid, "population_size must be positive");
    if (layout.total_genes <= 0)
        fail(Err::invalid, "layout has no genes to optimize");
    size_t genes = static_cast<size_t>(layout.total_genes);
    double mut_rate = cfg.mutation_rate > 0 ? cfg.mutation_rate : 1.0 / static_cast<double>(genes);

    Individual anchor;
    anchor.chromosome = all_keep(layout);
    {
        PreparedModel pm = prepare_model(m, layout, nullptr);
        anchor.accuracy = accuracy(pm, train);
        anchor.fa_area = estimate_area(layout, anchor.chromosome);
    }
    double accuracy_floor = anchor.accuracy - cfg.accuracy_loss_bound;

    std::vector<Individual> pop(static_cast<size_t>(cfg.population_size));
    pop[0] = anchor; // all-keep reference individual
    pop[0].violation = std::max(0.0, accuracy_floor - pop[0].accuracy);
    for (size_t i = 1; i < pop.size(); ++i) {
        Rng rng = Rng::stream(cfg.seed, 0, i);
        Chromosome c(genes);
        for (size_t g = 0; g < genes; ++g)
            c[g] = rng.bernoulli(cfg.init_keep_probability) ? 1 : 0;
        pop[i].chromosome = std::move(c);
    }
    {
        // Index 0 is already evaluated; evaluating it again is harmless and
        // keeps the hot path uniform.
        evaluate_all(pop, m, layout, train, accuracy_floor);
    }
    fast_nondominated_sort(pop);
    for (const std::vector<int>& f : fronts_of(pop))
        crowding_distance(pop, f);

    for (int gen = 0; gen < cfg.generations; ++gen) {
        std::vector<Individual> offspring;
        offspring.reserve(pop.size() + 1);
        size_t pairs = (pop.size() + 1) / 2;
        for (size_t p = 0; p < pairs; ++p) {
            Rng rng = Rng::stream(cfg.seed, static_cast<uint64_t>(gen) + 1, p);
            const Chromosome& pa = pop[static_cast<size_t>(tournament(pop, rng))].chromosome;
            const Chromosome& pb = pop[static_cast<size_t>(tournament(pop, rng))].chromosome;
            Chromosome ca = pa, cb = pb;
            if (rng.bernoulli(cfg.crossover_rate)) {
                for (size_t g = 0; g < genes; ++g)
                    if (rng.bernoulli(0.5))
                        std::swap(ca[g], cb[g]);
            }
            for (size_t g = 0; g < genes; ++g)
                if (rng.bernoulli(mut_rate))
                    ca[g] ^= 1;
            for (size_t g = 0; g < genes; ++g)
                if (rng.bernoulli(mut_rate))
                    cb[g] ^= 1;
            Individual ia, ib;
            ia.chromosome = std::move(ca);
            ib.chromosome = std::move(cb);
            offspring.push_back(std::move(ia));
            offspring.push_back(std::move(ib));
        }
        offspring.resize(pop.size());
        evaluate_all(offspring, m, layout, train, accuracy_floor);

        std::vector<Individual> combined;
        combined.reserve(pop.size() + offspring.size());
        for (Individual& ind : pop)
            combined.push_back(std::move(ind));
        for (Individual& ind : offspring)
            combined.push_back(std::move(ind));
        fast_nondominated_sort(combined);
        std::vector<std::vector<int>> fronts = fronts_of(combined);

        std::vector<Individual> next;
        next.reserve(pop.size());
        for (std::vector<int>& f : fronts) {
            crowding_distance(combined, f);
            if (next.size() + f.size() <= pop.size()) {
                for (int i : f)
                    next.push_back(std::move(combined[static_cast<size_t>(i)]));
            } else {
                std::sort(f.begin(), f.end(), [&](int a, int b) {
                    const Individual& x = combined[static_cast<size_t>(a)];
                    const Individual& y = combined[static_cast<size_t>(b)];
                    if (x.crowding != y.crowding)
                        return x.crowding > y.crowding;
                    return a < b;
                });
                for (int i : f) {
                    if (next.size() == pop.size())
                        break;
                    next.push_back(std::move(combined[static_cast<size_t>(i)]));
                }
            }
            if (next.size() == pop.size())
                break;
        }
        pop = std::move(next);
        fast_nondominated_sort(pop);
        for (const std::vector<int>& f : fronts_of(pop))
            crowding_distance(pop, f);
        if (progress)
            progress(gen, pop);
    }

    GaResult res;
    res.baseline_accuracy = anchor.accuracy;
    std::vector<Individual> front;
    for (const Individual& ind : pop)
        if (ind.rank == 0 && ind.feasible())
            front.push_back(ind);
    std::sort(front.begin(), front.end(), [](const Individual& a, const Individual& b) {
        if (a.fa_area != b.fa_area)
            return a.fa_area < b.fa_area;
        if (a.accuracy != b.accuracy)
            return a.accuracy > b.accuracy;
        return a.chromosome < b.chromosome;
    });
    for (const Individual& ind : front) {
        if (!res.front.empty() && res.front.back().fa_area == ind.fa_area && res.front.back().accuracy == ind.accuracy)
            continue;
        res.front.push_back(ind);
    }
    std::sort(pop.begin(), pop.end(), [](const Individual& a, const Individual& b) {
        if (a.rank != b.rank)
            return a.rank < b.rank;
        if (a.fa_area != b.fa_area)
            return a.fa_area < b.fa_area;
        return a.accuracy > b.accuracy;
    });
    res.population = std::move(pop);
    return res;
}

std::string front_to_jsonl(const std::vector<Individual>& front) {
    std::string out;
    for (const Individual& ind : front) {
        nlohmann::ordered_json j;
        j["chromosome"] = chromosome_to_string(ind.chromosome);
        j["train_accuracy"] = ind.accuracy;
        j["fa_area"] = ind.fa_area;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<Individual> front_from_jsonl(const std::string& text) {
    std::vector<Individual> front;
    std::istringstream in(text);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const std::exception& e) {
            fail(Err::parse, "front.jsonl line " + std::to_string(line_no) + ": " + e.what());
        }
        Individual ind;
        ind.chromosome = chromosome_from_string(j.at("chromosome").get<std::string>());
        ind.accuracy = j.at("train_accuracy").get<double>();
        ind.fa_area = j.at("fa_area").get<int64_t>();
        front.push_back(std::move(ind));
    }
    return front;
}

} // namespace axmlp
