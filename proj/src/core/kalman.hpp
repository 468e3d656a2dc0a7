#ifndef ATP_KALMAN_HPP
#define ATP_KALMAN_HPP

#include <vector>

#include <Eigen/Dense>

#include "core/mdn_model.hpp"

namespace atp {

using Mat5 = Eigen::Matrix<double, 5, 5>;

// Linear dynamics: constant horizontal speed, zero vertical speed; position
// couples to speed through dt. Gating thresholds apply to the sum of absolute
// lon/lat residuals.
struct KalmanConfig {
  double dt_s = 120.0;
  Eigen::Matrix<double, 5, 1> q_diag{1e-3, 1e-3, 1.0, 1e-6, 1e-6};
  double e1 = 0.8;              // outlier gate, degrees
  double e2 = 0.3;              // maneuver gate, degrees
  double qs = 10.0;             // maneuver process-noise inflation
  double outlier_penalty = -9.0;
  bool diag_s = true;           // invert only diag(S) in the update
  double pi1 = 0.8;             // weight on log phi in the cumulative score
  double pi2 = 0.2;             // weight on the density term
  bool density_at_mode = true;  // score the component at its own mean

  Mat5 dynamics() const;
  Mat5 q() const { return q_diag.asDiagonal(); }
};

struct AkfResult {
  Eigen::Matrix<double, 5, 1> x;       // filtered (or predicted, when gated out)
  Mat5 p;
  Eigen::Matrix<double, 5, 1> x_pred;  // prior prediction, kept for smoothing
  Mat5 p_pred;
  int outlier = 0;                     // M
};

// One adaptive Kalman step: predict, gate on |lon|+|lat| residual, update.
// Residual > e1: return the prediction, M=1. Residual > e2: redo the update
// with Q scaled by qs. Otherwise plain update.
AkfResult akf_step(const Eigen::Matrix<double, 5, 1>& x_prev, const Mat5& p_prev,
                   const Eigen::Matrix<double, 5, 1>& z, const Mat5& r, const KalmanConfig& cfg);

// Cumulative log likelihood of one expansion (component i of the mixture).
double cumulative_loglik(double l_parent, double phi_i, const Eigen::Matrix<double, 5, 1>& z,
                         const MixtureParams& mixture, int component, int outlier,
                         const KalmanConfig& cfg);

struct FilterStep {
  Eigen::Matrix<double, 5, 1> x_pred;
  Mat5 p_pred;
  Eigen::Matrix<double, 5, 1> x_filt;
  Mat5 p_filt;
};

struct SmoothedStep {
  Eigen::Matrix<double, 5, 1> x;
  Mat5 p;
};

// Rauch-Tung-Striebel backward pass over a complete forward history. Entry 0
// is the warm-up root (its prediction fields are unused).
std::vector<SmoothedStep> rts_smooth(const std::vector<FilterStep>& history,
                                     const KalmanConfig& cfg);

}  // namespace atp

#endif
