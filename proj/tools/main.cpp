// Command-line front end; all real work happens behind the C API in libaxmlp.

#include <axmlp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace {

struct Flags {
    std::string config;
    std::string dataset;
    std::string label_col;
    std::string topology;
    std::string out_dir;
    std::string module_name;
    uint64_t seed = 1;
    int population = 1000;
    int generations = 30;
    double acc_bound = 0.15;
    int input_bits = 4;
    int weight_bits = 8;
    int max_front_points = 0;
    double train_fraction = 0.7;
    double lr = 0.05;
    int batch = 32;
    int epochs = 500;
    double qat_lr = 0.002;
    int qat_epochs = 150;
    int qrelu_bits = 8;
};

void add_common_options(CLI::App* cmd, Flags& f) {
    cmd->add_option("--config", f.config, "JSON config file; explicit flags override its values");
    cmd->add_option("--dataset", f.dataset, "CSV dataset path");
    cmd->add_option("--label-col", f.label_col, "label column: header name, 0-based index, or empty for last");
    cmd->add_option("--topology", f.topology, "network shape as inputs,hidden,outputs (e.g. 11,2,6)");
    cmd->add_option("--seed", f.seed, "master random seed");
    cmd->add_option("--population", f.population, "GA population size");
    cmd->add_option("--generations", f.generations, "GA generation count");
    cmd->add_option("--acc-bound", f.acc_bound, "GA absolute train-accuracy loss bound");
    cmd->add_option("--input-bits", f.input_bits, "input quantization bits");
    cmd->add_option("--weight-bits", f.weight_bits, "power-of-two weight bits");
    cmd->add_option("--out-dir", f.out_dir, "output directory for all artifacts");
    cmd->add_option("--max-front-points", f.max_front_points, "cap on planned front points (0 = all)");
    cmd->add_option("--train-fraction", f.train_fraction, "train split fraction");
    cmd->add_option("--lr", f.lr, "SGD learning rate");
    cmd->add_option("--batch", f.batch, "SGD minibatch size");
    cmd->add_option("--epochs", f.epochs, "float training epochs");
    cmd->add_option("--qat-lr", f.qat_lr, "QAT learning rate");
    cmd->add_option("--qat-epochs", f.qat_epochs, "quantization-aware retraining epochs");
    cmd->add_option("--qrelu-bits", f.qrelu_bits, "QRelu output bits");
    cmd->add_option("--module-name", f.module_name, "Verilog module base name");
}

nlohmann::json topology_json(const std::string& spec) {
    std::vector<int> t;
    std::stringstream ss(spec);
    std::string part;
    while (std::getline(ss, part, ','))
        t.push_back(std::stoi(part));
    return nlohmann::json(t);
}

// Config file first, explicitly-set flags on top.
std::string build_config(const CLI::App* cmd, const Flags& f) {
    nlohmann::json j = nlohmann::json::object();
    if (cmd->count("--config") > 0) {
        std::ifstream in(f.config);
        if (!in)
            throw CLI::ValidationError("--config", "cannot open " + f.config);
        j = nlohmann::json::parse(in);
    }
    auto set_if = [&](const char* flag, const char* key, auto value) {
        if (cmd->count(flag) > 0)
            j[key] = value;
    };
    set_if("--dataset", "dataset", f.dataset);
    set_if("--label-col", "label_col", f.label_col);
    if (cmd->count("--topology") > 0)
        j["topology"] = topology_json(f.topology);
    set_if("--seed", "seed", f.seed);
    set_if("--population", "population", f.population);
    set_if("--generations", "generations", f.generations);
    set_if("--acc-bound", "acc_bound", f.acc_bound);
    set_if("--input-bits", "input_bits", f.input_bits);
    set_if("--weight-bits", "weight_bits", f.weight_bits);
    set_if("--out-dir", "out_dir", f.out_dir);
    set_if("--max-front-points", "max_front_points", f.max_front_points);
    set_if("--train-fraction", "train_fraction", f.train_fraction);
    set_if("--lr", "lr", f.lr);
    set_if("--batch", "batch", f.batch);
    set_if("--epochs", "epochs", f.epochs);
    set_if("--qat-lr", "qat_lr", f.qat_lr);
    set_if("--qat-epochs", "qat_epochs", f.qat_epochs);
    set_if("--qrelu-bits", "qrelu_bits", f.qrelu_bits);
    set_if("--module-name", "module_name", f.module_name);
    return j.dump();
}

int run_call(ax_status (*fn)(const char*), const std::string& config) {
    ax_status s = fn(config.c_str());
    if (s != AX_OK) {
        std::fprintf(stderr, "error: %s\n", ax_last_error());
        return static_cast<int>(s);
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pareto-optimal bespoke MLP circuit generator"};
    app.set_version_flag("--version", std::string(ax_version()));
    app.require_subcommand(1);

    struct Sub {
        const char* name;
        const char* help;
        ax_status (*fn)(const char*);
    };
    const Sub subs[] = {
        {"train", "split/normalize/quantize the dataset and train the float baseline", ax_stage_train},
        {"quantize", "power-of-two quantization, QRelu fitting and QAT retraining", ax_stage_quantize},
        {"optimize", "NSGA-II search over summand-bit chromosomes", ax_stage_optimize},
        {"argmax", "fit approximate comparator plans for the front", ax_stage_argmax},
        {"emit", "verify netlists and write Verilog, manifest and report", ax_stage_emit},
        {"run", "full pipeline: train, quantize, optimize, argmax, emit", ax_run_pipeline},
        {"report", "regenerate report.csv from a finished run directory", ax_stage_report},
    };

    Flags flags;
    std::vector<std::pair<CLI::App*, const Sub*>> cmds;
    for (const Sub& s : subs) {
        CLI::App* cmd = app.add_subcommand(s.name, s.help);
        add_common_options(cmd, flags);
        cmds.emplace_back(cmd, &s);
    }

    CLI11_PARSE(app, argc, argv);

    for (auto& [cmd, sub] : cmds) {
        if (cmd->parsed()) {
            std::string config;
            try {
                config = build_config(cmd, flags);
            } catch (const std::exception& e) {
                std::fprintf(stderr, "error: %s\n", e.what());
                return 3;
            }
            return run_call(sub->fn, config);
        }
    }
    return 0;
}
