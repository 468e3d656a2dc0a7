#include "core/kalman.hpp"

#include <cmath>
#include <iostream>

namespace atp {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;
}

Mat5 KalmanConfig::dynamics() const {
  Mat5 a = Mat5::Identity();
  a(0, 3) = dt_s;
  a(1, 4) = dt_s;
  return a;
}

namespace {

struct UpdateOut {
  Eigen::Matrix<double, 5, 1> x;
  Mat5 p;
};

UpdateOut kalman_update(const Eigen::Matrix<double, 5, 1>& x_pred, const Mat5& p_pred,
                        const Eigen::Matrix<double, 5, 1>& residual, const Mat5& r, bool diag_s) {
  // H is the identity: the mixture measures the full state.
  Mat5 s = p_pred + r;
  Mat5 k;
  if (diag_s) {
    k = p_pred * s.diagonal().cwiseInverse().asDiagonal();
  } else {
    k = p_pred * s.inverse();
  }
  UpdateOut out;
  out.x = x_pred + k * residual;
  out.p = (Mat5::Identity() - k) * p_pred;
  return out;
}

}  // namespace

AkfResult akf_step(const Eigen::Matrix<double, 5, 1>& x_prev, const Mat5& p_prev,
                   const Eigen::Matrix<double, 5, 1>& z, const Mat5& r, const KalmanConfig& cfg) {
  if (!x_prev.allFinite() || !z.allFinite() || !p_prev.allFinite() || !r.allFinite())
    throw data_error("akf_step: non-finite input");
  const Mat5 a = cfg.dynamics();
  const Mat5 q = cfg.q();

  AkfResult res;
  res.x_pred = a * x_prev;
  res.p_pred = a * p_prev * a.transpose() + q;
  Eigen::Matrix<double, 5, 1> residual = z - res.x_pred;
  double gate = std::abs(residual[0]) + std::abs(residual[1]);

  if (gate > cfg.e1) {
    res.x = res.x_pred;
    res.p = res.p_pred;
    res.outlier = 1;
    return res;
  }
  if (gate > cfg.e2) {
    // maneuver: inflate the process noise and redo the whole step
    res.p_pred = a * p_prev * a.transpose() + cfg.qs * q;
    residual = z - res.x_pred;
    auto upd = kalman_update(res.x_pred, res.p_pred, residual, r, cfg.diag_s);
    res.x = upd.x;
    res.p = upd.p;
    res.outlier = 0;
    return res;
  }
  auto upd = kalman_update(res.x_pred, res.p_pred, residual, r, cfg.diag_s);
  res.x = upd.x;
  res.p = upd.p;
  res.outlier = 0;
  return res;
}

double cumulative_loglik(double l_parent, double phi_i, const Eigen::Matrix<double, 5, 1>& z,
                         const MixtureParams& mixture, int component, int outlier,
                         const KalmanConfig& cfg) {
  constexpr double kFloor = -1e30;
  double phi_term = (phi_i > 0.0) ? std::log(phi_i) : kFloor;
  double density = cfg.density_at_mode ? mixture.mode_log_density(component)
                                       : mixture.log_pdf(component, z);
  double penalty = outlier ? cfg.outlier_penalty : 0.0;
  double l = l_parent + cfg.pi1 * phi_term + cfg.pi2 * density + penalty;
  return std::max(l, kFloor);
}

std::vector<SmoothedStep> rts_smooth(const std::vector<FilterStep>& history,
                                     const KalmanConfig& cfg) {
  if (history.empty()) throw data_error("rts_smooth: empty history");
  const Mat5 a = cfg.dynamics();
  const std::size_t n = history.size();
  std::vector<SmoothedStep> out(n);
  out[n - 1] = {history[n - 1].x_filt, history[n - 1].p_filt};
  for (std::size_t t = n - 1; t-- > 0;) {
    Mat5 p_pred_next = history[t + 1].p_pred;
    Eigen::LDLT<Mat5> solver(p_pred_next);
    if (solver.info() != Eigen::Success || !solver.isPositive()) {
      std::cerr << "rts_smooth: regularizing singular predicted covariance at step " << t + 1
                << "\n";
      p_pred_next += 1e-9 * Mat5::Identity();
      solver.compute(p_pred_next);
    }
    // G = P_filt A^T P_pred^{-1}
    Mat5 g = (solver.solve(a * history[t].p_filt.transpose())).transpose();
    out[t].x = history[t].x_filt + g * (out[t + 1].x - history[t + 1].x_pred);
    out[t].p = history[t].p_filt + g * (out[t + 1].p - history[t + 1].p_pred) * g.transpose();
  }
  return out;
}

}  // namespace atp
