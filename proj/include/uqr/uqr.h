/*
 * uqr: heteroscedastic-uncertainty image quality estimation.
 *
 * Every function returns a uqr_status. On failure the calling thread's
 * uqr_last_error() holds a one-line diagnostic until its next failing call.
 * Handles are opaque; release them with the matching *_free function.
 * Functions that take an out_dir create it and write manifest.yaml there.
 */
#ifndef UQR_UQR_H
#define UQR_UQR_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define UQR_API __attribute__((visibility("default")))
#else
#define UQR_API
#endif

typedef enum uqr_status {
  UQR_OK = 0,
  UQR_ERR_USAGE = 1,   /* invalid arguments or call sequence */
  UQR_ERR_DATA = 2,    /* unreadable or malformed files, configs, recipes */
  UQR_ERR_NUMERIC = 3, /* non-finite values, diverged training */
  UQR_ERR_INTERNAL = 4 /* unexpected failure inside the library */
} uqr_status;

typedef struct uqr_grid uqr_grid;
typedef struct uqr_model uqr_model;

UQR_API const char* uqr_version(void);
UQR_API const char* uqr_last_error(void);
/* The fully resolved default training config as YAML text. */
UQR_API const char* uqr_default_config(void);

/* ---- grids (real-valued images) ---- */

UQR_API uqr_status uqr_grid_create(size_t height, size_t width, const double* values, uqr_grid** out);
UQR_API uqr_status uqr_grid_load(const char* path, uqr_grid** out);
UQR_API uqr_status uqr_grid_save(const uqr_grid* grid, const char* path);
UQR_API uqr_status uqr_grid_shape(const uqr_grid* grid, size_t* height, size_t* width);
/* Copies height*width row-major values; capacity is the length of out. */
UQR_API uqr_status uqr_grid_values(const uqr_grid* grid, double* out, size_t capacity);
UQR_API void uqr_grid_free(uqr_grid* grid);

/* ---- phantoms and corruption ---- */

/* Writes phantom_<seed>.img and phantom_<seed>.lbl for seeds
 * first_seed .. first_seed + count - 1. config_path may be NULL (defaults)
 * and holds phantom settings (size, ribbon_thickness, ...). */
UQR_API uqr_status uqr_simulate(size_t count, uint64_t first_seed, const char* config_path, const char* out_dir);

/* Applies a recipe file to one grid. */
UQR_API uqr_status uqr_corrupt_grid(const uqr_grid* image, const char* recipe_path, uint64_t seed, uqr_grid** out);
/* File form: writes corrupted.img. */
UQR_API uqr_status uqr_corrupt(const char* image_path, const char* recipe_path, uint64_t seed, const char* out_dir);
/* Writes ladder_NN.img (zero-padded level) for each level and ladder.csv
 * (level, snr_db, file). */
UQR_API uqr_status uqr_corrupt_ladder(const char* image_path, double snr_start_db, double snr_end_db, size_t levels,
                                      uint64_t seed, const char* out_dir);

/* ---- training ---- */

/* task is "recon" or "multitask" and overrides the config; NULL keeps the
 * config's task. config_path may be NULL (defaults) or a previous run's
 * manifest.yaml. seed and iterations override the config when the
 * matching has_* flag is non-zero. verbose prints progress to stderr. */
UQR_API uqr_status uqr_train(const char* task, const char* config_path, int has_seed, uint64_t seed,
                             int has_iterations, size_t iterations, int verbose, const char* out_dir);

/* ---- models ---- */

UQR_API uqr_status uqr_model_load(const char* path, uqr_model** out);
UQR_API void uqr_model_free(uqr_model* model);
/* Non-zero when the model carries a segmentation head. */
UQR_API int uqr_model_has_segmentation(const uqr_model* model);
/* Any output pointer may be NULL. Sigma maps are exp(s / 2). The
 * segmentation outputs are set to NULL for reconstruction-only models. */
UQR_API uqr_status uqr_model_predict(const uqr_model* model, const uqr_grid* image, uqr_grid** recon_mean,
                                     uqr_grid** sigma_r, uqr_grid** seg_logit, uqr_grid** sigma_s);

/* ---- evaluation ---- */

/* Ladder protocol: ladder.csv (level, snr_db, median_sigma, mse, q1, q3)
 * and summary.yaml (OLS fit, R^2 or the degenerate flag, Spearman, the
 * permutation null). */
UQR_API uqr_status uqr_evaluate_ladder(const char* model_path, const char* image_path, uint64_t seed,
                                       double snr_start_db, double snr_end_db, size_t levels, const char* out_dir);

/* Partial-noise protocol over paired images and label maps. recipe_path
 * holds the steps applied inside the region (NULL: rician at 0 dB);
 * mask_path holds the region (NULL: bottom quarter). Writes partial.csv,
 * qc_clean.csv, qc_partial.csv and summary.yaml with the group comparison. */
UQR_API uqr_status uqr_evaluate_partial(const char* model_path, const char* const* image_paths,
                                        const char* const* label_paths, size_t count, const char* recipe_path,
                                        const char* mask_path, double max_overlap, uint64_t seed,
                                        const char* out_dir);

/* Raw uncertainty statistics per image: qc.csv. */
UQR_API uqr_status uqr_qc_score(const char* model_path, const char* const* image_paths, size_t count,
                                const char* out_dir);

/* Reads ladder.csv, partial.csv, qc*.csv and losses.csv files found in the
 * input directories and writes SVG plots plus report.yaml. */
UQR_API uqr_status uqr_report(const char* const* input_dirs, size_t count, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* UQR_UQR_H */
