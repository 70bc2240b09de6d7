/* Copyright (c) 2026 uwgs contributors
 * SPDX-License-Identifier: Apache-2.0
 *
 * uwgs — underwater degradation-aware Gaussian splatting.
 *
 * C API of the shared library. All functions return uwgs_status; on failure
 * uwgs_last_error() gives a thread-local human-readable message. Objects are
 * opaque handles released with their matching *_close function.
 */
#ifndef UWGS_H
#define UWGS_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum uwgs_status {
    UWGS_OK = 0,
    UWGS_ERR_INVALID = 1, /* bad arguments, malformed config/spec */
    UWGS_ERR_IO = 2,      /* missing files, failed reads/writes, checksums */
    UWGS_ERR_PARSE = 3,   /* unparseable input files */
    UWGS_ERR_NUMERIC = 4, /* NaN/inf during optimization */
    UWGS_ERR_INTERNAL = 5
} uwgs_status;

const char* uwgs_status_str(uwgs_status s);

/* Message describing the most recent failure on this thread. */
const char* uwgs_last_error(void);

/* Library version, encoded as major*10000 + minor*100 + patch. */
uint32_t uwgs_version(void);

/* ---- dataset synthesis --------------------------------------------------
 * Generates a synthetic underwater dataset from a scene spec JSON file.
 * overrides_json may be NULL or a JSON object overriding spec fields
 * ({"frames":4,"width":64,"height":48,"seed":3,...}). threads >= 1.
 */
uwgs_status uwgs_synth_dataset(const char* spec_json_path, const char* out_dir,
                               const char* overrides_json, int threads);

/* ---- training -----------------------------------------------------------
 * Trains on a generated dataset directory. config_json may be NULL (defaults)
 * or JSON text (not a path). Writes ckpt_final.ply (+ .sdm sidecar),
 * train_log.csv and resolved_config.json into out_dir. On success and when
 * final_ckpt_path is non-NULL, the checkpoint path is copied there
 * (truncated to path_cap).
 */
uwgs_status uwgs_train(const char* data_dir, const char* out_dir, const char* config_json,
                       char* final_ckpt_path, size_t path_cap);

/* ---- checkpoints --------------------------------------------------------*/
typedef struct uwgs_checkpoint uwgs_checkpoint;

uwgs_status uwgs_checkpoint_open(const char* ply_path, uwgs_checkpoint** out);
void uwgs_checkpoint_close(uwgs_checkpoint* ckpt);
uwgs_status uwgs_checkpoint_num_gaussians(const uwgs_checkpoint* ckpt, int64_t* out);
/* Mean of the per-frame water parameters stored in the checkpoint:
 * out9 = [A_r,A_g,A_b, beta_r,beta_g,beta_b, gamma_r,gamma_g,gamma_b]. */
uwgs_status uwgs_checkpoint_average_water(const uwgs_checkpoint* ckpt, float out9[9]);

/* ---- rendering ----------------------------------------------------------
 * cameras_src: a dataset directory (manifest.json) or a COLMAP text directory
 * (cameras.txt/images.txt/points3D.txt). mode: "intrinsic" renders the
 * water-free scene; "underwater" applies the per-Gaussian spatial-degradation
 * term using water9 (layout as above; pass NULL to use the checkpoint's
 * averaged water). Writes render_XXXX.png files into out_dir.
 */
uwgs_status uwgs_render_views(const uwgs_checkpoint* ckpt, const char* cameras_src,
                              const char* mode, const float* water9, const char* out_dir);

/* Renders a single view into caller-provided buffers (row-major [3,H,W] RGB
 * and [1,H,W] depth/alpha; any of the output pointers may be NULL).
 * camera16: fx, fy, cx, cy, width, height, R[9] row-major, T[3] appended =
 * 18 floats total. */
uwgs_status uwgs_render_view(const uwgs_checkpoint* ckpt, const float camera18[18],
                             const char* mode, const float* water9, float* rgb, float* depth,
                             float* alpha);

/* ---- evaluation ---------------------------------------------------------
 * mode: "intrinsic" (vs clean ground truth) or "degraded" (vs the degraded
 * inputs). Writes a JSON report; panel_dir may be NULL.
 */
uwgs_status uwgs_evaluate(const uwgs_checkpoint* ckpt, const char* data_dir, const char* mode,
                          const char* report_json_path, const char* panel_dir);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* UWGS_H */
