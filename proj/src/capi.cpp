#include "axmlp.h"

#include "axmlp/argmax_plan.hpp"
#include "axmlp/common.hpp"
#include "axmlp/dataset.hpp"
#include "axmlp/infer.hpp"
#include "axmlp/netlist.hpp"
#include "axmlp/pipeline.hpp"

#include <string>

using namespace axmlp;

namespace {

thread_local std::string g_last_error;

ax_status to_status(Err e) {
    switch (e) {
    case Err::io:
        return AX_ERR_IO;
    case Err::parse:
        return AX_ERR_PARSE;
    case Err::invalid:
        return AX_ERR_INVALID;
    case Err::shape:
        return AX_ERR_SHAPE;
    case Err::internal:
        return AX_ERR_INTERNAL;
    }
    return AX_ERR_INTERNAL;
}

template <typename Fn> ax_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return AX_OK;
    } catch (const AxError& e) {
        g_last_error = e.what();
        return to_status(e.code());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return AX_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return AX_ERR_INTERNAL;
    }
}

ax_status check_arg(bool ok, const char* msg) {
    if (ok)
        return AX_OK;
    g_last_error = msg;
    return AX_ERR_INVALID;
}

} // namespace

struct ax_dataset {
    Dataset d;
};

struct ax_model {
    QuantMLP m;
    AdderTreeLayout layout;
    PreparedModel prepared;
};

struct ax_netlist {
    Netlist n;
    size_t n_in = 0;
    int input_bits = 0;
};

extern "C" {

const char* ax_version(void) {
    return "0.1.0";
}

const char* ax_last_error(void) {
    return g_last_error.c_str();
}

ax_status ax_run_pipeline(const char* config_json) {
    if (ax_status s = check_arg(config_json != nullptr, "config_json is null"); s != AX_OK)
        return s;
    return guarded([&] { run_pipeline(pipeline_config_from_json(config_json)); });
}

#define AX_STAGE(fn_name, stage_fn)                                                                                  \
    ax_status fn_name(const char* config_json) {                                                                    \
        if (ax_status s = check_arg(config_json != nullptr, "config_json is null"); s != AX_OK)                      \
            return s;                                                                                                \
        return guarded([&] { stage_fn(pipeline_config_from_json(config_json)); });                                   \
    }

AX_STAGE(ax_stage_train, stage_train)
AX_STAGE(ax_stage_quantize, stage_quantize)
AX_STAGE(ax_stage_optimize, stage_optimize)
AX_STAGE(ax_stage_argmax, stage_argmax)
AX_STAGE(ax_stage_emit, stage_emit)
AX_STAGE(ax_stage_report, stage_report)

#undef AX_STAGE

ax_status ax_dataset_load_csv(const char* path, const char* label_column, ax_dataset** out) {
    if (ax_status s = check_arg(path && out, "path/out is null"); s != AX_OK)
        return s;
    *out = nullptr;
    return guarded([&] {
        auto h = new ax_dataset{load_csv(path, label_column ? label_column : "")};
        *out = h;
    });
}

ax_status ax_dataset_info(const ax_dataset* d, size_t* n_samples, size_t* n_features, int* n_classes) {
    if (ax_status s = check_arg(d != nullptr, "dataset handle is null"); s != AX_OK)
        return s;
    if (n_samples)
        *n_samples = d->d.n_samples();
    if (n_features)
        *n_features = d->d.n_features();
    if (n_classes)
        *n_classes = d->d.n_classes();
    return AX_OK;
}

void ax_dataset_free(ax_dataset* d) {
    delete d;
}

ax_status ax_model_load(const char* path, ax_model** out) {
    if (ax_status s = check_arg(path && out, "path/out is null"); s != AX_OK)
        return s;
    *out = nullptr;
    return guarded([&] {
        auto h = new ax_model;
        try {
            h->m = load_quant_mlp(path);
            h->layout = build_layout(h->m);
            h->prepared = prepare_model(h->m, h->layout, nullptr);
        } catch (...) {
            delete h;
            throw;
        }
        *out = h;
    });
}

ax_status ax_model_info(const ax_model* m, int* n_in, int* n_hidden, int* n_out, int* input_bits) {
    if (ax_status s = check_arg(m != nullptr, "model handle is null"); s != AX_OK)
        return s;
    if (n_in)
        *n_in = m->m.topology.n_in;
    if (n_hidden)
        *n_hidden = m->m.topology.n_hidden;
    if (n_out)
        *n_out = m->m.topology.n_out;
    if (input_bits)
        *input_bits = m->m.input_bits;
    return AX_OK;
}

ax_status ax_model_predict(const ax_model* m, const uint32_t* x, size_t n, int* class_out) {
    if (ax_status s = check_arg(m && x && class_out, "model/x/class_out is null"); s != AX_OK)
        return s;
    return guarded([&] {
        if (n != static_cast<size_t>(m->m.topology.n_in))
            fail(Err::shape, "expected " + std::to_string(m->m.topology.n_in) + " features, got " +
                                 std::to_string(n));
        uint32_t top = (1u << m->m.input_bits) - 1;
        for (size_t j = 0; j < n; ++j)
            if (x[j] > top)
                fail(Err::invalid, "feature " + std::to_string(j) + " exceeds input_bits range");
        *class_out = predict(m->prepared, x);
    });
}

void ax_model_free(ax_model* m) {
    delete m;
}

ax_status ax_netlist_build(const ax_model* m, const char* chromosome, const char* plan_json, ax_netlist** out) {
    if (ax_status s = check_arg(m && out, "model/out is null"); s != AX_OK)
        return s;
    *out = nullptr;
    return guarded([&] {
        const Chromosome* cp = nullptr;
        Chromosome c;
        if (chromosome) {
            c = chromosome_from_string(chromosome);
            cp = &c;
        }
        const ArgmaxPlan* pp = nullptr;
        ArgmaxPlan plan;
        if (plan_json) {
            plan = plan_from_json(plan_json);
            pp = &plan;
        }
        auto h = new ax_netlist;
        try {
            h->n = build_netlist(m->m, m->layout, cp, pp, true);
            h->n_in = static_cast<size_t>(m->m.topology.n_in);
            h->input_bits = m->m.input_bits;
        } catch (...) {
            delete h;
            throw;
        }
        *out = h;
    });
}

ax_status ax_netlist_stats(const ax_netlist* n, long long* fa, long long* ha, double* weighted) {
    if (ax_status s = check_arg(n != nullptr, "netlist handle is null"); s != AX_OK)
        return s;
    GateStats stats = gate_stats(n->n);
    if (fa)
        *fa = stats.fa;
    if (ha)
        *ha = stats.ha;
    if (weighted)
        *weighted = stats.weighted;
    return AX_OK;
}

ax_status ax_netlist_simulate(const ax_netlist* n, const uint32_t* x, size_t n_x, int* class_out) {
    if (ax_status s = check_arg(n && x && class_out, "netlist/x/class_out is null"); s != AX_OK)
        return s;
    return guarded([&] {
        if (n_x != n->n_in)
            fail(Err::shape, "expected " + std::to_string(n->n_in) + " features, got " + std::to_string(n_x));
        *class_out = simulate_class(n->n, x);
    });
}

void ax_netlist_free(ax_netlist* n) {
    delete n;
}

} // extern "C"
