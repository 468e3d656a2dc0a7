#ifndef ATP_ATP_H
#define ATP_ATP_H

/*
 * C interface to the 4D aircraft-trajectory prediction toolkit.
 *
 * All functions return ATP_OK (0) on success. On failure they return
 * ATP_ERR_USAGE (1) for argument errors or ATP_ERR_DATA (2) for data,
 * manifest, or numeric errors; atp_last_error() gives a thread-local
 * description of the most recent failure on the calling thread.
 *
 * Handles are opaque and must be released with the matching close function.
 * Open handles are immutable and safe to share across threads.
 */

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#define ATP_OK 0
#define ATP_ERR_USAGE 1
#define ATP_ERR_DATA 2

typedef int atp_status;

typedef struct atp_store atp_store;  /* weather store + match index */
typedef struct atp_model atp_model;  /* trained checkpoint */

const char* atp_version(void);
const char* atp_last_error(void);

/* Worker threads used by batch stages (match, train, predict). Results are
 * identical for any value. Default 1. */
void atp_set_threads(int n);

/* ------------------------------------------------------------------ */
/* Handles                                                             */

atp_status atp_store_open(const char* dir, atp_store** out);
void atp_store_close(atp_store* store);
atp_status atp_store_grid_points(const atp_store* store, int64_t* n_points);

atp_status atp_model_open(const char* ckpt_path, atp_model** out);
void atp_model_close(atp_model* model);
atp_status atp_model_mixture_k(const atp_model* model, int* k);

/* Matches one 4D point against an open store: writes the 4-channel feature
 * cube (channel-major float32, channels x ny x nx, order convective,
 * temperature, u-wind, v-wind) into cube_out and the per-channel missing
 * flags into missing_out[4]. cube_out must hold 4*nx*ny floats; nx, ny are
 * returned through the pointers when non-NULL. course_rad is the track
 * course, counterclockwise from east. */
atp_status atp_match_point(const atp_store* store, double lon, double lat, double alt_ft,
                           double t_s, double course_rad, float* cube_out, uint8_t* missing_out,
                           int* nx, int* ny);

/* ------------------------------------------------------------------ */
/* Pipeline stages (file in, file out)                                 */

atp_status atp_run_synth(const char* config_path, const char* out_dir);
atp_status atp_run_match(const atp_store* store, const char* flights_path, const char* out_dir);
atp_status atp_run_train(const char* data_dir, const char* config_path, uint64_t seed,
                         const char* ckpt_out);
atp_status atp_run_predict(const atp_model* model, const atp_store* store,
                           const char* flights_path, int warmup, int horizon,
                           const char* out_path, int write_geojson);
atp_status atp_run_eval(const char* pred_path, const char* truth_path, const char* out_csv);
atp_status atp_run_export_activations(const char* ckpt_path, const char* cubes_path, int layer,
                                      int count, const char* out_csv);

#ifdef __cplusplus
}
#endif

#endif /* ATP_ATP_H */
