#include "atp/atp.h"

#include <atomic>
#include <string>

#include "core/pipeline.hpp"

namespace {

thread_local std::string g_last_error;
std::atomic<int> g_threads{1};

atp_status fail(const atp::Error& e) {
  g_last_error = e.what();
  return e.kind() == atp::Error::Kind::Usage ? ATP_ERR_USAGE : ATP_ERR_DATA;
}

atp_status fail_data(const std::exception& e) {
  g_last_error = e.what();
  return ATP_ERR_DATA;
}

template <typename Fn>
atp_status guarded(Fn&& fn) {
  try {
    fn();
    return ATP_OK;
  } catch (const atp::Error& e) {
    return fail(e);
  } catch (const std::exception& e) {
    return fail_data(e);
  }
}

atp_status usage(const char* msg) {
  g_last_error = msg;
  return ATP_ERR_USAGE;
}

}  // namespace

struct atp_store {
  atp::WeatherStore store;
  atp::MatchIndex index;
};

struct atp_model {
  atp::Checkpoint ck;
};

extern "C" {

const char* atp_version(void) { return "0.1.0"; }

const char* atp_last_error(void) { return g_last_error.c_str(); }

void atp_set_threads(int n) { g_threads.store(n < 1 ? 1 : n); }

atp_status atp_store_open(const char* dir, atp_store** out) {
  if (!dir || !out) return usage("atp_store_open: null argument");
  *out = nullptr;
  return guarded([&] {
    atp::WeatherStore store = atp::WeatherStore::load(dir);
    atp::MatchIndex index = atp::build_index(store);
    *out = new atp_store{std::move(store), std::move(index)};
  });
}

void atp_store_close(atp_store* store) { delete store; }

atp_status atp_store_grid_points(const atp_store* store, int64_t* n_points) {
  if (!store || !n_points) return usage("atp_store_grid_points: null argument");
  *n_points = static_cast<int64_t>(store->store.n());
  return ATP_OK;
}

atp_status atp_model_open(const char* ckpt_path, atp_model** out) {
  if (!ckpt_path || !out) return usage("atp_model_open: null argument");
  *out = nullptr;
  return guarded([&] { *out = new atp_model{atp::Checkpoint::load(ckpt_path)}; });
}

void atp_model_close(atp_model* model) { delete model; }

atp_status atp_model_mixture_k(const atp_model* model, int* k) {
  if (!model || !k) return usage("atp_model_mixture_k: null argument");
  *k = model->ck.params.cfg.mixture_k;
  return ATP_OK;
}

atp_status atp_match_point(const atp_store* store, double lon, double lat, double alt_ft,
                           double t_s, double course_rad, float* cube_out, uint8_t* missing_out,
                           int* nx, int* ny) {
  if (!store || !cube_out || !missing_out) return usage("atp_match_point: null argument");
  return guarded([&] {
    atp::TrackPoint pt;
    pt.lon = lon;
    pt.lat = lat;
    pt.alt_ft = alt_ft;
    pt.t_s = t_s;
    pt.course = course_rad;
    atp::GridParams grid;
    auto g = atp::generate_grid(pt, grid, store->store.atm_levels, store->store.wx_levels);
    atp::FeatureCube cube = atp::assemble_cube(g, store->store, store->index);
    std::size_t at = 0;
    for (int c = 0; c < 4; ++c) {
      const auto& ch = cube.channel[static_cast<std::size_t>(c)];
      for (int p = 0; p < grid.ny; ++p)
        for (int q = 0; q < grid.nx; ++q) cube_out[at++] = static_cast<float>(ch(p, q));
      missing_out[c] = cube.missing[static_cast<std::size_t>(c)] ? 1 : 0;
    }
    if (nx) *nx = grid.nx;
    if (ny) *ny = grid.ny;
  });
}

atp_status atp_run_synth(const char* config_path, const char* out_dir) {
  if (!config_path || !out_dir) return usage("atp_run_synth: null argument");
  return guarded([&] { atp::run_synth(config_path, out_dir); });
}

atp_status atp_run_match(const atp_store* store, const char* flights_path, const char* out_dir) {
  if (!store || !flights_path || !out_dir) return usage("atp_run_match: null argument");
  return guarded(
      [&] { atp::run_match(store->store, store->index, flights_path, out_dir, g_threads.load()); });
}

atp_status atp_run_train(const char* data_dir, const char* config_path, uint64_t seed,
                         const char* ckpt_out) {
  if (!data_dir || !config_path || !ckpt_out) return usage("atp_run_train: null argument");
  return guarded([&] { atp::run_train(data_dir, config_path, seed, ckpt_out, g_threads.load()); });
}

atp_status atp_run_predict(const atp_model* model, const atp_store* store,
                           const char* flights_path, int warmup, int horizon,
                           const char* out_path, int write_geojson) {
  if (!model || !store || !flights_path || !out_path) return usage("atp_run_predict: null argument");
  return guarded([&] {
    atp::run_predict(model->ck, store->store, store->index, flights_path, warmup, out_path,
                     write_geojson != 0, g_threads.load(), horizon);
  });
}

atp_status atp_run_eval(const char* pred_path, const char* truth_path, const char* out_csv) {
  if (!pred_path || !truth_path || !out_csv) return usage("atp_run_eval: null argument");
  return guarded([&] { atp::run_eval(pred_path, truth_path, out_csv); });
}

atp_status atp_run_export_activations(const char* ckpt_path, const char* cubes_path, int layer,
                                      int count, const char* out_csv) {
  if (!ckpt_path || !cubes_path || !out_csv)
    return usage("atp_run_export_activations: null argument");
  return guarded(
      [&] { atp::run_export_activations(ckpt_path, cubes_path, layer, count, out_csv); });
}

}  // extern "C"
