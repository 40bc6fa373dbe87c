#ifndef SPINEBENCH_H
#define SPINEBENCH_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SB_API __declspec(dllexport)
#else
#define SB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct sb_volume sb_volume;
typedef struct sb_centroids sb_centroids;

typedef enum sb_status {
    SB_OK = 0,
    SB_ERR_INVALID_ARGUMENT = 1,
    SB_ERR_IO = 2,
    SB_ERR_FORMAT = 3,
    SB_ERR_INVALID_LABEL = 4,
    SB_ERR_GRID_MISMATCH = 5,
    SB_ERR_EMPTY_INPUT = 6,
    SB_ERR_NO_DECISION = 7,
    SB_ERR_INTERNAL = 99
} sb_status;

/* Message of the last failed call on this thread ("" if none). */
SB_API const char* sb_last_error(void);
SB_API const char* sb_version(void);

/* Frees any string returned through a char** out parameter. */
SB_API void sb_string_free(char* text);

SB_API sb_status sb_volume_load(const char* path, sb_volume** out);
SB_API void sb_volume_free(sb_volume* volume);
SB_API sb_status sb_volume_dims(const sb_volume* volume, int64_t dims[3]);
SB_API sb_status sb_volume_spacing(const sb_volume* volume, double spacing[3]);
/* Number of voxels carrying `code`. */
SB_API sb_status sb_volume_label_count(const sb_volume* volume, int code, size_t* out);

/* `voxel_space` != 0 maps coordinates through the affine of `reference`. */
SB_API sb_status sb_centroids_load(const char* path, int voxel_space, const sb_volume* reference, sb_centroids** out);
SB_API sb_status sb_centroids_parse(const char* json, int voxel_space, const sb_volume* reference, sb_centroids** out);
SB_API void sb_centroids_free(sb_centroids* centroids);
SB_API sb_status sb_centroids_count(const sb_centroids* centroids, size_t* out);

/* mode: "analysis", "ranking19" or "ranking20". Centroid sets may both be NULL. */
SB_API sb_status sb_evaluate_scan(const char* scan_id, const sb_volume* gt, const sb_volume* pred,
                                  const sb_centroids* gt_centroids, const sb_centroids* pred_centroids,
                                  const char* mode, char** out_json);

typedef struct sb_evaluate_options {
    const char* mode;           /* NULL means "analysis" */
    const char* centroid_space; /* "world" (default) or "voxel" */
    unsigned threads;           /* 0 is treated as 1 */
    int skip_errors;
    int label_shift;
} sb_evaluate_options;

SB_API void sb_evaluate_options_init(sb_evaluate_options* options);

/* Relative paths in the manifest resolve against `base_dir` (may be NULL). */
SB_API sb_status sb_evaluate_manifest(const char* manifest_json, const char* base_dir,
                                      const sb_evaluate_options* options, char** out_report_json);
SB_API sb_status sb_manifest_from_dirs(const char* gt_dir, const char* pred_dir, char** out_manifest_json);

/* format: "json", "csv" or "markdown". */
SB_API sb_status sb_report_render(const char* report_json, const char* format, char** out_text);

typedef struct sb_analyze_options {
    int fov;
    int regions;
    int vertebrae;
    int failures;
    int transitional;
    int label_shift;
    const double* curve_taus; /* NULL skips the curves block */
    size_t curve_tau_count;
    double failure_threshold;
} sb_analyze_options;

SB_API void sb_analyze_options_init(sb_analyze_options* options);
SB_API sb_status sb_analyze(const char* report_json, const sb_analyze_options* options, char** out_json);

typedef struct sb_rank_entry {
    const char* phase;
    const char* team;
    const char* report_json;
} sb_rank_entry;

/* Exactly one of `preset` ("verse19", "verse20") and `config_json` is non-NULL.
   `out_markdown` may be NULL. */
SB_API sb_status sb_rank(const sb_rank_entry* entries, size_t count, const char* preset, const char* config_json,
                         char** out_json, char** out_markdown);
SB_API sb_status sb_weight_preset(const char* name, char** out_json);

typedef enum sb_alternative { SB_GREATER = 0, SB_LESS = 1 } sb_alternative;
typedef enum sb_pvalue_method { SB_PVALUE_AUTO = 0, SB_PVALUE_EXACT = 1, SB_PVALUE_NORMAL = 2 } sb_pvalue_method;

/* One-sided signed-rank test of x against y. Returns SB_ERR_NO_DECISION
   when every difference is zero (statistic is still written). */
SB_API sb_status sb_wilcoxon(const double* x, const double* y, size_t n, sb_alternative alternative,
                             sb_pvalue_method method, double* statistic, double* p_value);

/* NaN fields keep the value from the candidate file or the default. */
typedef struct sb_mrf_overrides {
    double lambda;
    double bias;
    double threshold;
    double penalty;
} sb_mrf_overrides;

SB_API void sb_mrf_overrides_init(sb_mrf_overrides* overrides);
SB_API sb_status sb_labelseq_solve(const char* candidates_json, const char* stats_json,
                                   const sb_mrf_overrides* overrides, char** out_json);
SB_API sb_status sb_labelseq_stats(const char* centroid_dir, char** out_json);
SB_API sb_status sb_labelseq_check(const char* centroids_json, char** out_json);

SB_API sb_status sb_synth(const char* spec_json, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif
