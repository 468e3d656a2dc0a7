#ifndef ATP_PIPELINE_HPP
#define ATP_PIPELINE_HPP

#include <cstdint>
#include <functional>
#include <string>

#include "core/beam.hpp"
#include "core/checkpoint.hpp"
#include "core/flight_io.hpp"
#include "core/metrics.hpp"
#include "core/synth.hpp"

namespace atp {

// High-level operations behind the CLI subcommands and the C API. Every
// function validates its inputs and throws atp::Error on failure.

// Weather store + flight corpus (train/eval split) + dataset stats.
void run_synth(const std::string& config_path, const std::string& out_dir);

// Batch feature-cube matching for a corpus; writes a cube set + flights copy.
void run_match(const std::string& store_dir, const std::string& flights_path,
               const std::string& out_dir, int threads);
void run_match(const WeatherStore& store, const MatchIndex& index, const std::string& flights_path,
               const std::string& out_dir, int threads);

// Fits the normalizer on the given data, trains, writes checkpoint + loss CSV.
void run_train(const std::string& data_dir, const std::string& config_path, std::uint64_t seed,
               const std::string& ckpt_out, int threads);

// Beam-search inference over each flight; optional GeoJSON alongside.
void run_predict(const std::string& ckpt_path, const std::string& store_dir,
                 const std::string& flights_path, int warmup, const std::string& out_path,
                 bool geojson, int threads, int horizon = -1);
void run_predict(const Checkpoint& ck, const WeatherStore& store, const MatchIndex& index,
                 const std::string& flights_path, int warmup, const std::string& out_path,
                 bool geojson, int threads, int horizon = -1);

// Error report: CSV per flight + summary JSON + histogram CSV.
CorpusErrorReport run_eval(const std::string& pred_path, const std::string& truth_path,
                           const std::string& out_csv);

// Conv feature maps for the first `count` cubes of a cube set.
void run_export_activations(const std::string& ckpt_path, const std::string& cubes_path, int layer,
                            int count, const std::string& out_csv);

// No-learning reference: fly the filed plan at the warm-up ground speed,
// holding the warm-up altitude. Used by evaluation baselines.
Flight baseline_plan_constant_speed(const Flight& truth, int warmup, double dt_s = 120.0);

// Deterministic helper shared by pipeline stages and tests.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace atp

#endif
