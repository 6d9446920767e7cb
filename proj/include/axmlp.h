#ifndef AXMLP_H
#define AXMLP_H

/* C interface to the bespoke-MLP circuit generator. Every entry point returns
 * an ax_status (0 = success); ax_last_error() describes the most recent
 * failure on the calling thread. Handles are opaque and must be released with
 * their matching _free function. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ax_status {
    AX_OK = 0,
    AX_ERR_IO = 1,
    AX_ERR_PARSE = 2,
    AX_ERR_INVALID = 3,
    AX_ERR_SHAPE = 4,
    AX_ERR_INTERNAL = 5
} ax_status;

const char* ax_version(void);

/* Message for the last failing call on this thread; empty string if none. */
const char* ax_last_error(void);

/* ------------------------------------------------------------------ */
/* Pipeline. config_json mirrors the CLI flags (see README).           */

ax_status ax_run_pipeline(const char* config_json);
ax_status ax_stage_train(const char* config_json);
ax_status ax_stage_quantize(const char* config_json);
ax_status ax_stage_optimize(const char* config_json);
ax_status ax_stage_argmax(const char* config_json);
ax_status ax_stage_emit(const char* config_json);
ax_status ax_stage_report(const char* config_json);

/* ------------------------------------------------------------------ */
/* Datasets.                                                           */

typedef struct ax_dataset ax_dataset;

/* label_column: header name, 0-based index in decimal, or "" for last. */
ax_status ax_dataset_load_csv(const char* path, const char* label_column, ax_dataset** out);
ax_status ax_dataset_info(const ax_dataset* d, size_t* n_samples, size_t* n_features, int* n_classes);
void ax_dataset_free(ax_dataset* d);

/* ------------------------------------------------------------------ */
/* Quantized models.                                                   */

typedef struct ax_model ax_model;

ax_status ax_model_load(const char* path, ax_model** out);
ax_status ax_model_info(const ax_model* m, int* n_in, int* n_hidden, int* n_out, int* input_bits);
/* x: n_in quantized feature values, each < 2^input_bits. */
ax_status ax_model_predict(const ax_model* m, const uint32_t* x, size_t n, int* class_out);
void ax_model_free(ax_model* m);

/* ------------------------------------------------------------------ */
/* Gate-level netlists.                                                */

typedef struct ax_netlist ax_netlist;

/* chromosome: "01..." keep/remove string, or NULL for the exact design.
 * plan_json: argmax plan document, or NULL for the full-width bracket. */
ax_status ax_netlist_build(const ax_model* m, const char* chromosome, const char* plan_json, ax_netlist** out);
ax_status ax_netlist_stats(const ax_netlist* n, long long* fa, long long* ha, double* weighted);
ax_status ax_netlist_simulate(const ax_netlist* n, const uint32_t* x, size_t n_x, int* class_out);
void ax_netlist_free(ax_netlist* n);

#ifdef __cplusplus
}
#endif

#endif /* AXMLP_H */
