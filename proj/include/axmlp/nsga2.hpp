#pragma once

#include "axmlp/adder_tree.hpp"
#include "axmlp/dataset.hpp"
#include "axmlp/mlp.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace axmlp {

struct Individual {
    Chromosome chromosome;
    double accuracy = 0.0; // train-set accuracy of the masked model
    int64_t fa_area = 0;   // full-adder count surrogate
    int rank = -1;
    double crowding = 0.0;
    double violation = 0.0; // max(0, accuracy_floor - accuracy); feasible iff 0

    bool feasible() const { return violation == 0.0; }
};

struct GaConfig {
    int population_size = 1000;
    int generations = 30;
    double init_keep_probability = 0.9;
    double crossover_rate = 0.9;
    double mutation_rate = 0.0; // <= 0 means 1/total_genes
    double accuracy_loss_bound = 0.15;
    uint64_t seed = 1;
};

struct GaResult {
    std::vector<Individual> front;      // feasible rank-0, deduped by objectives
    std::vector<Individual> population; // final population, sorted (rank, index)
    double baseline_accuracy = 0.0;     // all-keep train accuracy
};

// Constraint-domination (feasible beats infeasible, smaller violation beats
// larger; among feasible: maximize accuracy, minimize fa_area).
bool constrained_dominates(const Individual& a, const Individual& b);

// Fills Individual::rank for every element (0 = non-dominated).
void fast_nondominated_sort(std::vector<Individual>& pop);

// Fills Individual::crowding for the given front (indices into pop).
void crowding_distance(std::vector<Individual>& pop, const std::vector<int>& front);

using GaProgress = std::function<void(int generation, const std::vector<Individual>& population)>;

GaResult nsga2_optimize(const QuantMLP& m, const AdderTreeLayout& layout, const QuantizedDataset& train,
                        const GaConfig& cfg, const GaProgress& progress = nullptr);

// front.jsonl: one {"chromosome","train_accuracy","fa_area"} object per line.
std::string front_to_jsonl(const std::vector<Individual>& front);
std::vector<Individual> front_from_jsonl(const std::string& text);

} // namespace axmlp
