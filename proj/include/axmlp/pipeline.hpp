#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace axmlp {

// Mirrors the CLI flags; JSON config files use exactly these key names.
struct PipelineConfig {
    std::string dataset; // CSV path
    std::string label_col;
    std::vector<int> topology; // n_in, n_hidden, n_out
    uint64_t seed = 1;
    int population = 1000;
    int generations = 30;
    double acc_bound = 0.15;
    int input_bits = 4;
    int weight_bits = 8;
    std::string out_dir;
    int max_front_points = 0; // 0 = plan every front point
    double train_fraction = 0.7;
    double lr = 0.05;
    int batch = 32;
    int epochs = 500;
    double qat_lr = 0.002; // po2 retraining needs a much smaller step than float SGD
    int qat_epochs = 150;
    int qrelu_bits = 8;
    std::string module_name; // "" = derived from the dataset file name
};

PipelineConfig pipeline_config_from_json(const std::string& text);
std::string pipeline_config_to_json(const PipelineConfig& cfg);

struct ParetoPoint {
    int index = 0;
    bool anchor = false; // the all-keep reference design
    bool pareto = false; // survived the final (test accuracy, gate count) filter
    std::string chromosome;
    std::string chromosome_hash;
    std::string plan_hash;
    double train_accuracy = 0.0;
    double test_accuracy = 0.0;
    long long fa_estimate = 0;
    double gate_count = 0.0; // netlist weighted gates
    int comparators = 0;
    double avg_comparator_width = 0.0;
    double width_reduction = 1.0;
    std::string hdl_path; // relative to out_dir
};

// Maximal set under (maximize test_accuracy, minimize gate_count), returned in
// ascending gate-count order (stable for ties).
std::vector<ParetoPoint> pareto_filter(const std::vector<ParetoPoint>& points);

// Stages share state only through files in cfg.out_dir, so they can run in one
// process or as separate CLI invocations with identical results.
void stage_train(const PipelineConfig& cfg);    // qtrain/qtest.json, float_model.json
void stage_quantize(const PipelineConfig& cfg); // model.json
void stage_optimize(const PipelineConfig& cfg); // front.jsonl
void stage_argmax(const PipelineConfig& cfg);   // plans.jsonl
void stage_emit(const PipelineConfig& cfg);     // designs/, manifest.json, report.csv
void run_pipeline(const PipelineConfig& cfg);   // all five in order

// Pure function of manifest.json + timings.csv already in out_dir.
std::string render_report(const std::string& out_dir);
void stage_report(const PipelineConfig& cfg);

} // namespace axmlp
