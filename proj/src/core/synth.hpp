#ifndef ATP_SYNTH_HPP
#define ATP_SYNTH_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "core/featurecube.hpp"
#include "core/preprocess.hpp"
#include "core/weather_store.hpp"

namespace atp {

// Deterministic synthetic-world generator: a weather store with smooth
// band-limited wind/temperature fields and drifting convective cells, plus a
// flight corpus with plan-deviation behavior (wind drift, storm avoidance).
struct SynthConfig {
  std::uint64_t seed = 42;

  // georef lattice
  double lon0 = -100.0, lat0 = 25.0, lon1 = -80.0, lat1 = 45.0;
  int grid_nlon = 81, grid_nlat = 81;

  // level tables
  std::vector<double> atm_levels_ft{0,     4000,  8000,  12000, 16000, 20000, 24000,
                                    28000, 32000, 36000, 40000, 45000, 52000, 60000};
  std::vector<double> wx_levels_ft;  // empty = convective default

  // time coverage, seconds since baseline
  double time_span_s = 6.0 * 3600.0;
  double atm_cadence_s = 3600.0;
  double wx_cadence_s = 3600.0;

  // wind/temperature field: sum of random sinusoidal modes
  int wind_modes = 6;
  double wind_amp_kts = 45.0;
  double wind_length_scale_deg = 9.0;
  double wind_time_scale_s = 21600.0;
  double temp_base_k = 288.0;
  double temp_lapse_k_per_kft = 2.0;
  double temp_amp_k = 8.0;

  // convective cells
  double convective_coverage = 0.04;  // target horizontal footprint fraction
  double cell_radius_deg = 0.8;
  double cell_drift_dps = 2.5e-5;    // degrees per second
  double cell_base_ft = 0.0;
  double cell_top_ft = 45000.0;
  double corridor_cell_frac = 0.6;   // fraction of cells seeded near the corridor

  // flights
  int n_flights = 500;
  double origin_lon = -97.0, origin_lat = 29.5;
  double dest_lon = -89.0, dest_lat = 37.5;
  double speed_kts = 450.0;
  double speed_jitter_frac = 0.05;
  double waypoint_every_deg = 2.0;
  double waypoint_jitter_deg = 0.18;
  double avoid_gain = 1.2;
  double capture_radius_deg = 0.3;
  double cruise_alt_ft = 35000.0;
  double cruise_alt_jitter_ft = 2000.0;
  double climb_rate_fpm = 2200.0;
  double descent_rate_fpm = 2000.0;
  double track_dt_s = 120.0;
  int min_track_len = 30;
  int max_track_len = 400;
  double split_frac = 0.8;

  void validate() const;
  nlohmann::json to_json() const;
  static SynthConfig from_json(const nlohmann::json& j);
};

WeatherStore gen_weather(const SynthConfig& cfg);

struct SynthCorpus {
  std::vector<Flight> train;
  std::vector<Flight> eval;
  int dropped = 0;
};

SynthCorpus gen_flights(const SynthConfig& cfg, const WeatherStore& store);

// Analytic wind field sampled by both the store rasterizer and the flight
// simulator, in knots.
void wind_at(const SynthConfig& cfg, double lon, double lat, double alt_ft, double t_s,
             double& u_kts, double& v_kts);

}  // namespace atp

#endif
