#include "axmlp/pipeline.hpp"

#include "axmlp/argmax.hpp"
#include "axmlp/common.hpp"
#include "axmlp/infer.hpp"
#include "axmlp/netlist.hpp"
#include "axmlp/nsga2.hpp"
#include "axmlp/parallel.hpp"
#include "axmlp/rng.hpp"
#include "axmlp/verilog.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>

namespace axmlp {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "0.1.0";
const char* const kStageOrder[] = {"train", "quantize", "optimize", "argmax", "emit"};

std::string opath(const PipelineConfig& cfg, const std::string& name) {
    return (fs::path(cfg.out_dir) / name).string();
}

std::string sanitize_module(const std::string& stem) {
    std::string s;
    for (char ch : stem) {
        if (std::isalnum(static_cast<unsigned char>(ch)))
            s += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        else
            s += '_';
    }
    if (s.empty() || std::isdigit(static_cast<unsigned char>(s[0])))
        s = "m" + s;
    return s;
}

std::string module_base(const PipelineConfig& cfg) {
    if (!cfg.module_name.empty())
        return cfg.module_name;
    return sanitize_module(fs::path(cfg.dataset).stem().string());
}

void validate_config(const PipelineConfig& cfg) {
    if (cfg.dataset.empty())
        fail(Err::invalid, "config: dataset path is required");
    if (cfg.out_dir.empty())
        fail(Err::invalid, "config: out_dir is required");
    if (cfg.topology.size() != 3)
        fail(Err::invalid, "config: topology must be three integers (inputs,hidden,outputs)");
    for (int t : cfg.topology)
        if (t <= 0)
            fail(Err::invalid, "config: topology entries must be positive");
    if (cfg.input_bits < 1 || cfg.input_bits > 16)
        fail(Err::invalid, "config: input_bits must be in [1,16]");
    if (cfg.weight_bits < 2 || cfg.weight_bits > 16)
        fail(Err::invalid, "config: weight_bits must be in [2,16]");
    if (cfg.qrelu_bits < 1 || cfg.qrelu_bits > 16)
        fail(Err::invalid, "config: qrelu_bits must be in [1,16]");
    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0))
        fail(Err::invalid, "config: train_fraction must be in (0,1)");
    if (cfg.population < 2)
        fail(Err::invalid, "config: population must be at least 2");
    if (cfg.generations < 0 || cfg.epochs < 0 || cfg.qat_epochs < 0)
        fail(Err::invalid, "config: generations/epochs must be non-negative");
    if (cfg.acc_bound < 0.0 || cfg.acc_bound > 1.0)
        fail(Err::invalid, "config: acc_bound must be in [0,1]");
    if (cfg.max_front_points < 0)
        fail(Err::invalid, "config: max_front_points must be non-negative");
    if (!(cfg.lr > 0.0) || !(cfg.qat_lr > 0.0))
        fail(Err::invalid, "config: lr/qat_lr must be positive");
    if (cfg.batch < 1)
        fail(Err::invalid, "config: batch must be at least 1");
}

// Stage failures must name the stage they happened in.
template <typename Fn> void run_stage(const char* stage, Fn&& fn) {
    try {
        fn();
    } catch (const AxError& e) {
        throw AxError(e.code(), std::string("stage ") + stage + ": " + e.what());
    } catch (const std::exception& e) {
        throw AxError(Err::internal, std::string("stage ") + stage + ": " + e.what());
    }
}

std::map<std::string, double> load_timings(const std::string& out_dir) {
    std::map<std::string, double> t;
    fs::path p = fs::path(out_dir) / "timings.csv";
    if (!fs::exists(p))
        return t;
    std::istringstream in(read_file(p.string()));
    std::string line;
    while (std::getline(in, line)) {
        size_t comma = line.find(',');
        if (comma == std::string::npos || line.substr(0, comma) == "stage")
            continue;
        t[line.substr(0, comma)] = std::strtod(line.c_str() + comma + 1, nullptr);
    }
    return t;
}

void store_timing(const std::string& out_dir, const std::string& stage, double seconds) {
    std::map<std::string, double> t = load_timings(out_dir);
    t[stage] = seconds;
    std::string s = "stage,seconds\n";
    for (const char* name : kStageOrder)
        if (auto it = t.find(name); it != t.end())
            s += std::string(name) + "," + format_fixed(it->second, 3) + "\n";
    write_file((fs::path(out_dir) / "timings.csv").string(), s);
}

struct StageClock {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

// Rescales integer features back to the [0,1] grid the float net trains on.
Dataset scaled_dataset(const QuantizedDataset& q, const std::string& name) {
    Dataset d;
    d.name = name;
    double top = static_cast<double>((1u << q.input_bits) - 1);
    d.features.resize(q.n_samples());
    for (size_t i = 0; i < q.n_samples(); ++i) {
        d.features[i].resize(q.n_features());
        for (size_t j = 0; j < q.n_features(); ++j)
            d.features[i][j] = static_cast<double>(q.features[i][j]) / top;
    }
    d.labels = q.labels;
    d.feature_names.resize(q.n_features());
    d.label_names.resize(static_cast<size_t>(q.n_classes));
    return d;
}

struct PlanRecord {
    int index = 0;
    bool anchor = false;
    Chromosome chromosome;
    ArgmaxPlan plan;
};

std::vector<PlanRecord> load_plans(const std::string& path) {
    std::vector<PlanRecord> recs;
    std::istringstream in(read_file(path));
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty())
            continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const std::exception& e) {
            fail(Err::parse, "plans.jsonl line " + std::to_string(line_no) + ": " + e.what());
        }
        PlanRecord r;
        r.index = j.at("index").get<int>();
        r.anchor = j.at("anchor").get<bool>();
        r.chromosome = chromosome_from_string(j.at("chromosome").get<std::string>());
        r.plan = plan_from_json(j.at("plan").dump());
        recs.push_back(std::move(r));
    }
    return recs;
}

int64_t plan_kept_bits(const ArgmaxPlan& plan, int* n_comparators) {
    int64_t kept = 0;
    int comps = 0;
    for (const auto& stage : plan.stages)
        for (const PlanComparator& c : stage) {
            kept += static_cast<int64_t>(c.kept_bits.size());
            ++comps;
        }
    if (n_comparators)
        *n_comparators = comps;
    return kept;
}

ordered_json point_to_json(const ParetoPoint& p) {
    ordered_json j;
    j["index"] = p.index;
    j["anchor"] = p.anchor;
    j["pareto"] = p.pareto;
    j["chromosome"] = p.chromosome;
    j["chromosome_hash"] = p.chromosome_hash;
    j["plan_hash"] = p.plan_hash;
    j["train_accuracy"] = p.train_accuracy;
    j["test_accuracy"] = p.test_accuracy;
    j["fa_estimate"] = p.fa_estimate;
    j["gate_count"] = p.gate_count;
    j["comparators"] = p.comparators;
    j["avg_comparator_width"] = p.avg_comparator_width;
    j["width_reduction"] = p.width_reduction;
    j["hdl"] = p.hdl_path;
    return j;
}

ParetoPoint point_from_json(const json& j) {
    ParetoPoint p;
    p.index = j.at("index").get<int>();
    p.anchor = j.at("anchor").get<bool>();
    p.pareto = j.at("pareto").get<bool>();
    p.chromosome = j.at("chromosome").get<std::string>();
    p.chromosome_hash = j.at("chromosome_hash").get<std::string>();
    p.plan_hash = j.at("plan_hash").get<std::string>();
    p.train_accuracy = j.at("train_accuracy").get<double>();
    p.test_accuracy = j.at("test_accuracy").get<double>();
    p.fa_estimate = j.at("fa_estimate").get<long long>();
    p.gate_count = j.at("gate_count").get<double>();
    p.comparators = j.at("comparators").get<int>();
    p.avg_comparator_width = j.at("avg_comparator_width").get<double>();
    p.width_reduction = j.at("width_reduction").get<double>();
    p.hdl_path = j.at("hdl").get<std::string>();
    return p;
}

} // namespace

PipelineConfig pipeline_config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const std::exception& e) {
        fail(Err::parse, std::string("config: ") + e.what());
    }
    if (!j.is_object())
        fail(Err::parse, "config: top level must be a JSON object");
    PipelineConfig cfg;
    for (const auto& [key, v] : j.items()) {
        try {
            if (key == "dataset")
                cfg.dataset = v.get<std::string>();
            else if (key == "label_col")
                cfg.label_col = v.get<std::string>();
            else if (key == "topology")
                cfg.topology = v.get<std::vector<int>>();
            else if (key == "seed")
                cfg.seed = v.get<uint64_t>();
            else if (key == "population")
                cfg.population = v.get<int>();
            else if (key == "generations")
                cfg.generations = v.get<int>();
            else if (key == "acc_bound")
                cfg.acc_bound = v.get<double>();
            else if (key == "input_bits")
                cfg.input_bits = v.get<int>();
            else if (key == "weight_bits")
                cfg.weight_bits = v.get<int>();
            else if (key == "out_dir")
                cfg.out_dir = v.get<std::string>();
            else if (key == "max_front_points")
                cfg.max_front_points = v.get<int>();
            else if (key == "train_fraction")
                cfg.train_fraction = v.get<double>();
            else if (key == "lr")
                cfg.lr = v.get<double>();
            else if (key == "batch")
                cfg.batch = v.get<int>();
            else if (key == "epochs")
                cfg.epochs = v.get<int>();
            else if (key == "qat_lr")
                cfg.qat_lr = v.get<double>();
            else if (key == "qat_epochs")
                cfg.qat_epochs = v.get<int>();
            else if (key == "qrelu_bits")
                cfg.qrelu_bits = v.get<int>();
            else if (key == "module_name")
                cfg.module_name = v.get<std::string>();
            else
                fail(Err::parse, "config: unknown key '" + key + "'");
        } catch (const AxError&) {
            throw;
        } catch (const std::exception& e) {
            fail(Err::parse, "config: key '" + key + "': " + e.what());
        }
    }
    return cfg;
}

std::string pipeline_config_to_json(const PipelineConfig& cfg) {
    ordered_json j;
    j["dataset"] = cfg.dataset;
    j["label_col"] = cfg.label_col;
    j["topology"] = cfg.topology;
    j["seed"] = cfg.seed;
    j["population"] = cfg.population;
    j["generations"] = cfg.generations;
    j["acc_bound"] = cfg.acc_bound;
    j["input_bits"] = cfg.input_bits;
    j["weight_bits"] = cfg.weight_bits;
    j["out_dir"] = cfg.out_dir;
    j["max_front_points"] = cfg.max_front_points;
    j["train_fraction"] = cfg.train_fraction;
    j["lr"] = cfg.lr;
    j["batch"] = cfg.batch;
    j["epochs"] = cfg.epochs;
    j["qat_lr"] = cfg.qat_lr;
    j["qat_epochs"] = cfg.qat_epochs;
    j["qrelu_bits"] = cfg.qrelu_bits;
    j["module_name"] = cfg.module_name;
    return j.dump(2) + "\n";
}

std::vector<ParetoPoint> pareto_filter(const std::vector<ParetoPoint>& points) {
    std::vector<ParetoPoint> kept;
    for (const ParetoPoint& p : points) {
        bool dominated = false;
        for (const ParetoPoint& q : points) {
            if (q.test_accuracy >= p.test_accuracy && q.gate_count <= p.gate_count &&
                (q.test_accuracy > p.test_accuracy || q.gate_count < p.gate_count)) {
                dominated = true;
                break;
            }
        }
        if (!dominated)
            kept.push_back(p);
    }
    std::stable_sort(kept.begin(), kept.end(),
                     [](const ParetoPoint& a, const ParetoPoint& b) { return a.gate_count < b.gate_count; });
    return kept;
}

void stage_train(const PipelineConfig& cfg) {
    run_stage("train", [&] {
        validate_config(cfg);
        StageClock clock;
        Dataset d = load_csv(cfg.dataset, cfg.label_col); // fails before any output is written
        if (static_cast<int>(d.n_features()) != cfg.topology[0])
            fail(Err::shape, "topology expects " + std::to_string(cfg.topology[0]) + " inputs but dataset has " +
                                 std::to_string(d.n_features()) + " features");
        if (d.n_classes() != cfg.topology[2])
            fail(Err::shape, "topology expects " + std::to_string(cfg.topology[2]) + " outputs but dataset has " +
                                 std::to_string(d.n_classes()) + " classes");

        auto [train, test] = split_train_test(d, cfg.train_fraction, cfg.seed);
        NormStats stats = fit_normalization(train);
        QuantizedDataset qtrain = quantize_inputs(apply_normalization(train, stats), cfg.input_bits);
        QuantizedDataset qtest = quantize_inputs(apply_normalization(test, stats), cfg.input_bits);
        qtrain.n_classes = d.n_classes();
        qtest.n_classes = d.n_classes();
        save_qdataset(opath(cfg, "qtrain.json"), qtrain);
        save_qdataset(opath(cfg, "qtest.json"), qtest);

        Dataset strain = scaled_dataset(qtrain, d.name + "_train");
        Topology topo{cfg.topology[0], cfg.topology[1], cfg.topology[2]};
        TrainConfig tc{cfg.lr, cfg.batch, cfg.epochs, cfg.seed};
        FloatMLP m = train_float(strain, topo, tc);
        write_file(opath(cfg, "float_model.json"), float_mlp_to_json(m));
        std::cerr << "[train] " << d.name << ": " << train.n_samples() << " train / " << test.n_samples()
                  << " test samples, float train accuracy " << format_fixed(float_accuracy(m, strain), 4) << "\n";
        store_timing(cfg.out_dir, "train", clock.seconds());
    });
}

void stage_quantize(const PipelineConfig& cfg) {
    run_stage("quantize", [&] {
        validate_config(cfg);
        StageClock clock;
        FloatMLP fm = float_mlp_from_json(read_file(opath(cfg, "float_model.json")));
        QuantizedDataset qtrain = load_qdataset(opath(cfg, "qtrain.json"));
        double top = static_cast<double>((1u << cfg.input_bits) - 1);
        FloatMLP folded = fold_input_scale(fm, top);
        QuantMLP q0 = po2_quantize_mlp(folded, cfg.input_bits, cfg.weight_bits);
        QReluConfig qrelu = fit_qrelu(q0, qtrain, cfg.qrelu_bits);
        QuantMLP qm = qat_retrain(folded, qtrain, qrelu, cfg.qat_epochs, cfg.seed, cfg.qat_lr, cfg.batch, cfg.weight_bits);
        save_quant_mlp(opath(cfg, "model.json"), qm);
        PreparedModel pm = prepare_model(qm, build_layout(qm), nullptr);
        std::cerr << "[quantize] po2 train accuracy after QAT " << format_fixed(accuracy(pm, qtrain), 4) << "\n";
        store_timing(cfg.out_dir, "quantize", clock.seconds());
    });
}

void stage_optimize(const PipelineConfig& cfg) {
    run_stage("optimize", [&] {
        validate_config(cfg);
        StageClock clock;
        QuantMLP qm = load_quant_mlp(opath(cfg, "model.json"));
        QuantizedDataset qtrain = load_qdataset(opath(cfg, "qtrain.json"));
        AdderTreeLayout layout = build_layout(qm);
        GaConfig ga;
        ga.population_size = cfg.population;
        ga.generations = cfg.generations;
        ga.accuracy_loss_bound = cfg.acc_bound;
        ga.seed = cfg.seed;
        GaResult res = nsga2_optimize(qm, layout, qtrain, ga, [](int gen, const std::vector<Individual>& pop) {
            if ((gen + 1) % 5 != 0)
                return;
            int64_t best_area = -1;
            for (const Individual& ind : pop)
                if (ind.rank == 0 && ind.feasible() && (best_area < 0 || ind.fa_area < best_area))
                    best_area = ind.fa_area;
            std::cerr << "[optimize] generation " << (gen + 1) << ": best feasible FA area " << best_area << "\n";
        });
        write_file(opath(cfg, "front.jsonl"), front_to_jsonl(res.front));
        std::cerr << "[optimize] front size " << res.front.size() << ", all-keep train accuracy "
                  << format_fixed(res.baseline_accuracy, 4) << "\n";
        store_timing(cfg.out_dir, "optimize", clock.seconds());
    });
}

void stage_argmax(const PipelineConfig& cfg) {
    run_stage("argmax", [&] {
        validate_config(cfg);
        StageClock clock;
        QuantMLP qm = load_quant_mlp(opath(cfg, "model.json"));
        QuantizedDataset qtrain = load_qdataset(opath(cfg, "qtrain.json"));
        AdderTreeLayout layout = build_layout(qm);
        std::vector<Individual> front = front_from_jsonl(read_file(opath(cfg, "front.jsonl")));
        if (front.empty())
            fail(Err::invalid, "front.jsonl is empty, nothing to plan");

        // Cap the planned points but always keep both extremes of the front.
        std::vector<size_t> pick;
        if (cfg.max_front_points > 0 && front.size() > static_cast<size_t>(cfg.max_front_points)) {
            size_t n = front.size(), k = static_cast<size_t>(cfg.max_front_points);
            for (size_t i = 0; i < k; ++i) {
                size_t idx = k == 1 ? 0 : (i * (n - 1) + (k - 1) / 2) / (k - 1);
                if (pick.empty() || pick.back() != idx)
                    pick.push_back(idx);
            }
        } else {
            for (size_t i = 0; i < front.size(); ++i)
                pick.push_back(i);
        }

        Chromosome keep_all = all_keep(layout);
        std::string keep_all_str = chromosome_to_string(keep_all);
        std::vector<PlanRecord> recs;
        for (size_t idx : pick) {
            PlanRecord r;
            r.index = static_cast<int>(recs.size());
            r.chromosome = front[idx].chromosome;
            r.anchor = chromosome_to_string(r.chromosome) == keep_all_str;
            recs.push_back(std::move(r));
        }
        // The all-keep design is always planned and reported, even when the
        // GA front no longer contains it.
        if (std::none_of(recs.begin(), recs.end(), [](const PlanRecord& r) { return r.anchor; })) {
            PlanRecord r;
            r.index = static_cast<int>(recs.size());
            r.anchor = true;
            r.chromosome = keep_all;
            recs.push_back(std::move(r));
        }

        std::string out;
        for (PlanRecord& r : recs) {
            r.plan = build_plan(qm, layout, r.chromosome, qtrain);
            int comps = 0;
            int64_t kept = plan_kept_bits(r.plan, &comps);
            std::cerr << "[argmax] point " << r.index << (r.anchor ? " (anchor)" : "") << ": " << comps
                      << " comparators, " << kept << " compared bits\n";
            ordered_json j;
            j["index"] = r.index;
            j["anchor"] = r.anchor;
            j["chromosome"] = chromosome_to_string(r.chromosome);
            j["plan"] = json::parse(plan_to_json(r.plan));
            out += j.dump();
            out += '\n';
        }
        write_file(opath(cfg, "plans.jsonl"), out);
        store_timing(cfg.out_dir, "argmax", clock.seconds());
    });
}

void stage_emit(const PipelineConfig& cfg) {
    run_stage("emit", [&] {
        validate_config(cfg);
        StageClock clock;
        std::string model_text = read_file(opath(cfg, "model.json"));
        QuantMLP qm = quant_mlp_from_json(model_text);
        std::string model_hash = hex16(fnv1a64(model_text));
        QuantizedDataset qtrain = load_qdataset(opath(cfg, "qtrain.json"));
        QuantizedDataset qtest = load_qdataset(opath(cfg, "qtest.json"));
        FloatMLP fm = float_mlp_from_json(read_file(opath(cfg, "float_model.json")));
        AdderTreeLayout layout = build_layout(qm);
        std::vector<PlanRecord> recs = load_plans(opath(cfg, "plans.jsonl"));
        if (recs.empty())
            fail(Err::invalid, "plans.jsonl is empty, nothing to emit");
        std::string base = module_base(cfg);

        // Final assessment: test data is evaluated here and nowhere earlier.
        double float_train_acc = float_accuracy(fm, scaled_dataset(qtrain, "train"));
        double float_test_acc = float_accuracy(fm, scaled_dataset(qtest, "test"));
        PreparedModel exact = prepare_model(qm, layout, nullptr);
        double quant_train_acc = accuracy(exact, qtrain);
        double quant_test_acc = accuracy(exact, qtest);

        size_t n_in = qtrain.n_features();
        int total_bits = static_cast<int>(n_in) * cfg.input_bits;
        bool exhaustive = total_bits <= 16;
        size_t n_vectors = exhaustive ? (size_t(1) << total_bits) : 10000;
        uint32_t in_mask = (1u << cfg.input_bits) - 1;

        std::vector<ParetoPoint> points;
        for (const PlanRecord& r : recs) {
            ParetoPoint p;
            p.index = r.index;
            p.anchor = r.anchor;
            p.chromosome = chromosome_to_string(r.chromosome);
            p.chromosome_hash = hex16(fnv1a64(p.chromosome));
            std::string plan_text = plan_to_json(r.plan);
            p.plan_hash = hex16(fnv1a64(plan_text));

            PreparedModel pm = prepare_model(qm, layout, &r.chromosome);
            ArgmaxPlan plan = r.plan;
            plan.width = pm.output_width;
            p.train_accuracy = accuracy(pm, qtrain, &plan);
            p.test_accuracy = accuracy(pm, qtest, &plan);
            p.fa_estimate = estimate_area(layout, r.chromosome);
            p.comparators = 0;
            int64_t kept = plan_kept_bits(plan, &p.comparators);
            if (p.comparators > 0) {
                p.avg_comparator_width = static_cast<double>(kept) / p.comparators;
                p.width_reduction = static_cast<double>(pm.output_width) * p.comparators /
                                    static_cast<double>(std::max<int64_t>(1, kept));
            }

            Netlist net = build_netlist(qm, layout, &r.chromosome, &plan, true);
            GateStats stats = gate_stats(net);
            p.gate_count = stats.weighted;

            // The netlist must match the integer model before the design is
            // reported.
            parallel_for(n_vectors, [&](size_t v) {
                std::vector<uint32_t> x(n_in);
                if (exhaustive) {
                    uint64_t bits = v;
                    for (size_t j = 0; j < n_in; ++j) {
                        x[j] = static_cast<uint32_t>(bits) & in_mask;
                        bits >>= cfg.input_bits;
                    }
                } else {
                    Rng rng = Rng::stream(cfg.seed, 0xec0000u + static_cast<uint64_t>(r.index), v);
                    for (size_t j = 0; j < n_in; ++j)
                        x[j] = static_cast<uint32_t>(rng.below(in_mask + 1ull));
                }
                int hw = simulate_class(net, x.data());
                int sw = predict_plan(pm, plan, x.data());
                if (hw != sw)
                    fail(Err::internal, "netlist/model mismatch at point " + std::to_string(r.index) + " vector " +
                                            std::to_string(v) + ": hw=" + std::to_string(hw) +
                                            " sw=" + std::to_string(sw));
            });

            std::string module = base + "_p" + std::to_string(r.index);
            EmitConfig ec;
            ec.module_name = module;
            ec.header_fields = {
                {"module", module},
                {"model_hash", model_hash},
                {"chromosome_hash", p.chromosome_hash},
                {"plan_hash", p.plan_hash},
                {"train_accuracy", format_fixed(p.train_accuracy, 6)},
                {"test_accuracy", format_fixed(p.test_accuracy, 6)},
                {"fa_estimate", std::to_string(p.fa_estimate)},
                {"weighted_gates", format_fixed(p.gate_count, 1)},
            };
            p.hdl_path = "designs/" + module + ".v";
            write_file(opath(cfg, p.hdl_path), render_verilog(net, ec));
            std::cerr << "[emit] " << p.hdl_path << ": " << stats.fa << " FA, " << stats.ha << " HA, weighted "
                      << format_fixed(p.gate_count, 1) << ", test accuracy " << format_fixed(p.test_accuracy, 4)
                      << (p.anchor ? " (anchor)" : "") << "\n";
            points.push_back(std::move(p));
        }

        std::vector<ParetoPoint> front = pareto_filter(points);
        for (ParetoPoint& p : points)
            p.pareto = std::any_of(front.begin(), front.end(),
                                   [&](const ParetoPoint& q) { return q.index == p.index; });

        ordered_json manifest;
        manifest["version"] = kVersion;
        manifest["config"] = ordered_json::parse(pipeline_config_to_json(cfg));
        ordered_json ds;
        ds["path"] = cfg.dataset;
        ds["bytes_hash"] = hex16(fnv1a64(read_file(cfg.dataset)));
        ds["n_train"] = qtrain.n_samples();
        ds["n_test"] = qtest.n_samples();
        ds["n_features"] = n_in;
        ds["n_classes"] = qtrain.n_classes;
        manifest["dataset"] = ds;
        manifest["model_hash"] = model_hash;
        ordered_json metrics;
        metrics["float_train_accuracy"] = float_train_acc;
        metrics["float_test_accuracy"] = float_test_acc;
        metrics["quant_train_accuracy"] = quant_train_acc;
        metrics["quant_test_accuracy"] = quant_test_acc;
        manifest["metrics"] = metrics;
        ordered_json ver;
        ver["vectors_per_point"] = n_vectors;
        ver["exhaustive"] = exhaustive;
        manifest["verification"] = ver;
        ordered_json pts = ordered_json::array();
        for (const ParetoPoint& p : points)
            pts.push_back(point_to_json(p));
        manifest["points"] = pts;
        manifest["timings_file"] = "timings.csv";
        write_file(opath(cfg, "manifest.json"), manifest.dump(2) + "\n");

        store_timing(cfg.out_dir, "emit", clock.seconds());
        write_file(opath(cfg, "report.csv"), render_report(cfg.out_dir));
        std::cerr << "[emit] " << front.size() << " of " << points.size()
                  << " evaluated points survive the final Pareto filter\n";
    });
}

std::string render_report(const std::string& out_dir) {
    json manifest;
    try {
        manifest = json::parse(read_file((fs::path(out_dir) / "manifest.json").string()));
    } catch (const AxError&) {
        throw;
    } catch (const std::exception& e) {
        fail(Err::parse, std::string("manifest.json: ") + e.what());
    }
    std::vector<ParetoPoint> points;
    for (const json& pj : manifest.at("points"))
        points.push_back(point_from_json(pj));
    double float_test_acc = manifest.at("metrics").at("float_test_accuracy").get<double>();

    const ParetoPoint* anchor = nullptr;
    for (const ParetoPoint& p : points)
        if (p.anchor) {
            anchor = &p;
            break;
        }
    if (!anchor)
        fail(Err::invalid, "manifest has no anchor point");
    double fa_base = static_cast<double>(std::max(1ll, anchor->fa_estimate));
    double gate_base = std::max(1e-9, anchor->gate_count);

    std::string s = "points\n";
    s += "index,anchor,pareto,chromosome_hash,plan_hash,train_accuracy,test_accuracy,accuracy_loss,"
         "fa_estimate,fa_reduction,gate_count,gate_reduction,avg_comparator_width,width_reduction,hdl\n";
    for (const ParetoPoint& p : points) {
        s += std::to_string(p.index) + ",";
        s += std::string(p.anchor ? "1" : "0") + ",";
        s += std::string(p.pareto ? "1" : "0") + ",";
        s += p.chromosome_hash + ",";
        s += p.plan_hash + ",";
        s += format_fixed(p.train_accuracy, 6) + ",";
        s += format_fixed(p.test_accuracy, 6) + ",";
        s += format_fixed(float_test_acc - p.test_accuracy, 6) + ",";
        s += std::to_string(p.fa_estimate) + ",";
        s += format_fixed(fa_base / static_cast<double>(std::max(1ll, p.fa_estimate)), 2) + ",";
        s += format_fixed(p.gate_count, 1) + ",";
        s += format_fixed(gate_base / std::max(1e-9, p.gate_count), 2) + ",";
        s += format_fixed(p.avg_comparator_width, 2) + ",";
        s += format_fixed(p.width_reduction, 2) + ",";
        s += p.hdl_path + "\n";
    }
    s += "\ntimings\nstage,seconds\n";
    std::map<std::string, double> t = load_timings(out_dir);
    for (const char* name : kStageOrder)
        if (auto it = t.find(name); it != t.end())
            s += std::string(name) + "," + format_fixed(it->second, 3) + "\n";
    return s;
}

void stage_report(const PipelineConfig& cfg) {
    run_stage("report", [&] {
        if (cfg.out_dir.empty())
            fail(Err::invalid, "config: out_dir is required");
        write_file(opath(cfg, "report.csv"), render_report(cfg.out_dir));
    });
}

void run_pipeline(const PipelineConfig& cfg) {
    validate_config(cfg);
    stage_train(cfg);
    stage_quantize(cfg);
    stage_optimize(cfg);
    stage_argmax(cfg);
    stage_emit(cfg);
}

} // namespace axmlp
