#ifndef ATP_BEAM_HPP
#define ATP_BEAM_HPP

#include <optional>
#include <vector>

#include "core/featurecube.hpp"
#include "core/kalman.hpp"
#include "core/mdn_model.hpp"

namespace atp {

struct BeamConfig {
  int n_bs = -1;     // beam width; -1 means K^2 from the model
  int warmup = 20;   // observed track points fed before generation
  int horizon = -1;  // total trajectory length T; -1 means the truth length
  KalmanConfig kf;
  GridParams grid;
  MatchParams match;
};

struct StepDiag {
  int n_candidates = 0;
  int n_kept = 0;
  double min_kept_l = 0.0;
  double max_pruned_l = 0.0;
  bool has_pruned = false;
};

struct PredictedPoint {
  double lon = 0, lat = 0, alt_ft = 0, t_s = 0;
  double lon_spd = 0, lat_spd = 0;
  double sigma3_h_nmi = 0;  // 3-sigma horizontal band
  double sigma3_v_ft = 0;   // 3-sigma vertical band
  double cum_ll = 0;        // cumulative log likelihood at this step
};

struct PredictionResult {
  std::vector<PredictedPoint> points;  // smoothed best hypothesis, one per generated step
  double best_l = 0.0;
  std::vector<double> final_beam_l;    // surviving hypotheses, ranked
  std::vector<Vec5> runner_up;         // unsmoothed second-best chain, raw states
};

// Full inference for one flight: warm-up feed-forward, per-step K-way
// expansion filtered by the AKF and scored by the cumulative log likelihood,
// beam pruning to n_bs, recursive re-matching, RTS smoothing of the winner.
// Fully deterministic; no sampling.
PredictionResult generate_trajectory(const ModelParams& params, const Normalizer& normalizer,
                                     const Flight& flight, const WeatherStore& store,
                                     const MatchIndex& index, const BeamConfig& cfg,
                                     std::vector<StepDiag>* diag = nullptr);

}  // namespace atp

#endif
