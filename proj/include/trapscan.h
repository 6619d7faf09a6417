/* trapscan C API: opaque handles, integer status codes, JSON strings for
 * structured options and results. Every function returns TS_OK on success;
 * on failure the return names the error class and ts_last_error() carries a
 * human-readable message for the calling thread.
 *
 * Strings returned through char** are heap-allocated; release them with
 * ts_string_free(). Handles are released with their matching *_close/_free.
 */

#ifndef TRAPSCAN_H
#define TRAPSCAN_H

#include <stdint.h>

#if defined(_WIN32)
#define TS_API __declspec(dllexport)
#else
#define TS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef int32_t ts_status;

enum {
    TS_OK = 0,
    TS_ERR_IO = 1,
    TS_ERR_MALFORMED_MANIFEST = 2,
    TS_ERR_TENSOR_BOUNDS = 3,
    TS_ERR_NON_FINITE = 4,
    TS_ERR_DIMENSION = 5,
    TS_ERR_NUMERICAL = 6,
    TS_ERR_FIT = 7,
    TS_ERR_DOMAIN = 8,
    TS_ERR_NOT_NORMALIZED = 9,
    TS_ERR_ZERO_TRACE = 10,
    TS_ERR_SHAPE_MISMATCH = 11,
    TS_ERR_LAYER_NOT_FOUND = 12,
    TS_ERR_DEGENERATE_SVD = 13,
    TS_ERR_TRAP_NOT_FOUND = 14,
    TS_ERR_DIVERGENCE = 15,
    TS_ERR_USAGE = 16,
    TS_ERR_INTERNAL = 17
};

typedef struct ts_checkpoint ts_checkpoint;
typedef struct ts_report ts_report;

TS_API const char* ts_version(void);
TS_API const char* ts_status_name(ts_status status);

/* Message for the most recent failure on the calling thread; never NULL. */
TS_API const char* ts_last_error(void);

/* Opens a checkpoint: parses the JSON manifest, maps the binary blob,
 * widens f32 tensors to f64, and validates every entry is finite. */
TS_API ts_status ts_checkpoint_open(const char* manifest_path, ts_checkpoint** out);
TS_API void ts_checkpoint_close(ts_checkpoint* checkpoint);

/* Manifest plus metadata as a JSON object. */
TS_API ts_status ts_checkpoint_info_json(const ts_checkpoint* checkpoint, char** out_json);

/* Runs the shuffled-spectrum scan over every 2-d layer.
 *
 * options_json keys (all optional):
 *   replicates           int    >= 1, default 5
 *   base_seed            uint   default 0
 *   c_tw                 float  > 0, default 4.0
 *   mean_instability     bool   default false; attach row-mean instability
 *                               reports for each detected outlier
 *   instability_trials   int    default 10000
 *   include_eigenvectors bool   default false
 *   threads              int    default 0 = hardware concurrency
 */
TS_API ts_status ts_scan_run(const ts_checkpoint* checkpoint, const char* options_json,
                             ts_report** out);
TS_API ts_status ts_report_to_json(const ts_report* report, char** out_json);
TS_API void ts_report_free(ts_report* report);

/* Scans one layer, selects a detected outlier, replaces its mapped rank-one
 * component with a random one of equal singular value, and scores the swap.
 *
 * options_json keys:
 *   layer_id        string  required; must name a "<name>.weight" layer
 *   trap_index      int     default 0; -1 = every detected outlier
 *   replicates, base_seed, c_tw           as for ts_scan_run
 *   num_probes      int     default 1024
 *   temperature     float   default 1.0
 *   probe_mean, probe_std   float; default from checkpoint metadata
 *                           input_mean/input_std, else 0/1
 *   eval_dataset    string  optional dataset path; enables the test-error
 *                           delta and the Harmful/Benign label
 *   tau_err         float   default 0.01
 *   seed            uint    default 0; replacement-vector seed
 *
 * Result: {"schema", "results": [...]} JSON array of per-trap records. */
TS_API ts_status ts_ablate_run(const ts_checkpoint* checkpoint, const char* options_json,
                               char** out_json);

/* Trains the synthetic-task demo model and writes checkpoints, dataset and
 * a training log under output_dir.
 *
 * config_json keys (all optional):
 *   classes int (10), input_dim int (16), train_per_class int (50),
 *   test_per_class int (100), noise float (0.25), separation float (2.0),
 *   hidden [int] ([32, 32]), learning_rate float (5e-4),
 *   weight_decay float (0), beta1 (0.9), beta2 (0.999), epsilon (1e-8),
 *   batch_size int (64), steps int (20000), init_scale float (8.0),
 *   seed uint (0), checkpoints int (12; log-spaced schedule incl. step 0)
 *
 * out_summary_json lists the files written and final metrics. */
TS_API ts_status ts_train_run(const char* config_json, const char* output_dir,
                              char** out_summary_json);

TS_API void ts_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif /* TRAPSCAN_H */
