#ifndef ATP_FLIGHT_IO_HPP
#define ATP_FLIGHT_IO_HPP

#include <string>
#include <vector>

#include "core/featurecube.hpp"
#include "core/preprocess.hpp"

namespace atp {

// Flights as JSON-lines: one object per line with fields
// {id, plan:[[lon,lat],...], track:[[lon,lat,alt_ft,t_s],...]}.
// Derived kinematics are recomputed on load, never serialized.
std::vector<Flight> read_flights_jsonl(const std::string& path);
void write_flights_jsonl(const std::string& path, const std::vector<Flight>& flights);

// Prediction records mirror the flight format plus per-point 3-sigma bounds
// and cumulative log likelihood over the generated window.
struct PredictionRecord {
  Flight flight;       // warm-up points followed by generated points
  int warmup = 0;
  std::vector<double> sigma3_h_nmi;
  std::vector<double> sigma3_v_ft;
  std::vector<double> cum_loglik;
  double final_loglik = 0.0;
};

void write_predictions_jsonl(const std::string& path, const std::vector<PredictionRecord>& recs);
std::vector<PredictionRecord> read_predictions_jsonl(const std::string& path);
void write_predictions_geojson(const std::string& path, const std::vector<PredictionRecord>& recs);

// Feature-cube tensors for a corpus, one block of float32 [T][4][ny][nx] per
// flight plus per-cube missing flags, with a JSON manifest.
struct CubeSet {
  int nx = 0, ny = 0;
  std::vector<std::string> ids;
  std::vector<std::vector<FeatureCube>> cubes;
};

void write_cube_set(const std::string& dir, const CubeSet& set);
CubeSet read_cube_set(const std::string& dir_or_manifest);

}  // namespace atp

#endif
