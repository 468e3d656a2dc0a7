#include "core/preprocess.hpp"

#include <algorithm>
#include <cmath>

namespace atp {

namespace {

bool in_box(const TrackPoint& p, const LonLat& center, double half_width) {
  return std::abs(p.lon - center.lon) <= half_width && std::abs(p.lat - center.lat) <= half_width;
}

}  // namespace

CleanResult clean_trajectory(const std::vector<TrackPoint>& track, const TerminalBoxes& boxes,
                             double max_gap_s, double max_jump_deg) {
  if (track.size() < 2) return {false, "too short"};
  if (!in_box(track.front(), boxes.origin, boxes.half_width_deg) ||
      !in_box(track.back(), boxes.dest, boxes.half_width_deg))
    return {false, "outside terminal area"};
  for (std::size_t i = 1; i < track.size(); ++i) {
    double dt = track[i].t_s - track[i - 1].t_s;
    if (dt > max_gap_s) return {false, "temporal discontinuity"};
    double jump = std::max(std::abs(track[i].lon - track[i - 1].lon),
                           std::abs(track[i].lat - track[i - 1].lat));
    if (jump > max_jump_deg) return {false, "spatial discontinuity"};
  }
  return {true, ""};
}

std::vector<TrackPoint> downsample(const std::vector<TrackPoint>& track) {
  if (track.size() < 2) throw data_error("downsample: track too short");
  std::vector<TrackPoint> out;
  for (std::size_t i = 0; i < track.size(); i += 2) out.push_back(track[i]);
  if ((track.size() - 1) % 2 != 0) out.push_back(track.back());
  return out;
}

void derive_kinematics(std::vector<TrackPoint>& track) {
  if (track.size() < 2) throw data_error("derive_kinematics: track too short");
  for (std::size_t i = 0; i + 1 < track.size(); ++i) {
    double dt = track[i + 1].t_s - track[i].t_s;
    if (dt == 0.0) throw data_error("derive_kinematics: zero dt");
    track[i].lon_spd = (track[i + 1].lon - track[i].lon) / dt;
    track[i].lat_spd = (track[i + 1].lat - track[i].lat) / dt;
    track[i].course = course_between({track[i].lon, track[i].lat},
                                     {track[i + 1].lon, track[i + 1].lat});
  }
  auto& last = track.back();
  const auto& prev = track[track.size() - 2];
  last.lon_spd = prev.lon_spd;
  last.lat_spd = prev.lat_spd;
  last.course = prev.course;
}

namespace {

double seg_len(const LonLat& a, const LonLat& b) {
  return std::hypot(b.lon - a.lon, b.lat - a.lat);
}

// Perpendicular and angular distance components of the MDL cost between the
// chord (a,b) and a data segment (c,d), flat degree coordinates.
void seg_distances(const LonLat& a, const LonLat& b, const LonLat& c, const LonLat& d,
                   double& dperp, double& dtheta) {
  double vx = b.lon - a.lon, vy = b.lat - a.lat;
  double len2 = vx * vx + vy * vy;
  auto perp = [&](const LonLat& p) {
    if (len2 == 0.0) return seg_len(a, p);
    double t = ((p.lon - a.lon) * vx + (p.lat - a.lat) * vy) / len2;
    LonLat proj{a.lon + t * vx, a.lat + t * vy};
    return seg_len(proj, p);
  };
  double d1 = perp(c), d2 = perp(d);
  dperp = (d1 + d2 == 0.0) ? 0.0 : (d1 * d1 + d2 * d2) / (d1 + d2);

  double wx = d.lon - c.lon, wy = d.lat - c.lat;
  double wlen = std::hypot(wx, wy);
  if (wlen == 0.0 || len2 == 0.0) {
    dtheta = 0.0;
    return;
  }
  double cosang = (vx * wx + vy * wy) / (std::sqrt(len2) * wlen);
  cosang = std::clamp(cosang, -1.0, 1.0);
  dtheta = (cosang >= 0.0) ? wlen * std::sqrt(1.0 - cosang * cosang) : wlen;
}

double log2p1(double x) { return std::log2(1.0 + x); }

// L(H) + L(D|H) for encoding waypoints (i..j) by the single chord (i,j).
double mdl_par(const std::vector<LonLat>& w, std::size_t i, std::size_t j) {
  double cost = log2p1(seg_len(w[i], w[j]));
  for (std::size_t k = i; k < j; ++k) {
    double dperp, dtheta;
    seg_distances(w[i], w[j], w[k], w[k + 1], dperp, dtheta);
    cost += log2p1(dperp) + log2p1(dtheta);
  }
  return cost;
}

// Cost of keeping all raw segments between i and j.
double mdl_nopar(const std::vector<LonLat>& w, std::size_t i, std::size_t j) {
  double cost = 0.0;
  for (std::size_t k = i; k < j; ++k) cost += log2p1(seg_len(w[k], w[k + 1]));
  return cost;
}

}  // namespace

FlightPlan partition_flight_plan(const FlightPlan& plan, double alpha) {
  if (alpha < 1.0 || alpha > 2.0) throw data_error("partition_flight_plan: alpha outside [1,2]");
  const auto& w = plan.waypoints;
  if (w.size() < 2) throw data_error("partition_flight_plan: plan too short");

  FlightPlan out;
  out.waypoints.push_back(w.front());
  std::size_t start = 0, length = 1;
  while (start + length < w.size()) {
    std::size_t curr = start + length;
    // Partition once the chord's description cost, scaled by alpha, exceeds
    // the raw cost: larger alpha cuts earlier and keeps more points.
    if (alpha * mdl_par(w, start, curr) > mdl_nopar(w, start, curr)) {
      if (curr - 1 == start) {  // single segment already over budget; keep it
        out.waypoints.push_back(w[curr]);
        start = curr;
      } else {
        out.waypoints.push_back(w[curr - 1]);
        start = curr - 1;
      }
      length = 1;
    } else {
      ++length;
    }
  }
  if (out.waypoints.size() < 2 || start != w.size() - 1) out.waypoints.push_back(w.back());
  return out;
}

Eigen::Matrix<double, 5, 1> raw_state_of(const TrackPoint& p) {
  Eigen::Matrix<double, 5, 1> x;
  x << p.lon, p.lat, p.alt_ft, p.lon_spd, p.lat_spd;
  return x;
}

Normalizer Normalizer::fit(const std::vector<Flight>& flights, LonLat origin, double origin_alt,
                           const std::vector<Eigen::MatrixXd>* wx_channels) {
  if (flights.empty()) throw data_error("normalizer: empty training set");
  Normalizer n;
  n.origin_lon = origin.lon;
  n.origin_lat = origin.lat;
  n.origin_alt = origin_alt;

  auto accumulate = [](std::vector<double>& sum, std::vector<double>& sq, std::vector<double>& cnt,
                       std::size_t ch, double v) {
    sum[ch] += v;
    sq[ch] += v * v;
    cnt[ch] += 1.0;
  };

  std::vector<double> ssum(5, 0), ssq(5, 0), scnt(5, 0);
  std::vector<double> psum(2, 0), psq(2, 0), pcnt(2, 0);
  for (const auto& f : flights) {
    for (const auto& p : f.track) {
      if (!p.has_course()) throw data_error("normalizer: kinematics not derived");
      double vals[5] = {p.lon - origin.lon, p.lat - origin.lat, p.alt_ft - origin_alt,
                        p.lon_spd, p.lat_spd};
      for (int c = 0; c < 5; ++c) accumulate(ssum, ssq, scnt, c, vals[c]);
    }
    for (const auto& wp : f.plan.waypoints) {
      accumulate(psum, psq, pcnt, 0, wp.lon - origin.lon);
      accumulate(psum, psq, pcnt, 1, wp.lat - origin.lat);
    }
  }
  auto finish = [](double sum, double sq, double cnt, double& mean, double& std_out) {
    mean = sum / cnt;
    double var = sq / cnt - mean * mean;
    std_out = std::sqrt(std::max(var, 0.0));
    if (std_out <= 0.0) throw data_error("normalizer: zero-variance channel");
  };
  for (int c = 0; c < 5; ++c) finish(ssum[c], ssq[c], scnt[c], n.state_mean[c], n.state_std[c]);
  for (int c = 0; c < 2; ++c) finish(psum[c], psq[c], pcnt[c], n.plan_mean[c], n.plan_std[c]);

  if (wx_channels) {
    if (wx_channels->size() % 3 != 0) throw data_error("normalizer: weather channels not in triples");
    std::vector<double> wsum(3, 0), wsq(3, 0), wcnt(3, 0);
    for (std::size_t i = 0; i < wx_channels->size(); ++i) {
      const auto& m = (*wx_channels)[i];
      int c = static_cast<int>(i % 3);
      wsum[c] += m.sum();
      wsq[c] += m.array().square().sum();
      wcnt[c] += static_cast<double>(m.size());
    }
    for (int c = 0; c < 3; ++c) finish(wsum[c], wsq[c], wcnt[c], n.wx_mean[c], n.wx_std[c]);
  } else {
    n.wx_mean = {0, 0, 0};
    n.wx_std = {1, 1, 1};
  }
  return n;
}

Eigen::Matrix<double, 5, 1> Normalizer::normalize_state(const Eigen::Matrix<double, 5, 1>& raw) const {
  Eigen::Matrix<double, 5, 1> x;
  double shifted[5] = {raw[0] - origin_lon, raw[1] - origin_lat, raw[2] - origin_alt, raw[3], raw[4]};
  for (int c = 0; c < 5; ++c) x[c] = (shifted[c] - state_mean[c]) / state_std[c];
  return x;
}

Eigen::Matrix<double, 5, 1> Normalizer::denormalize_state(const Eigen::Matrix<double, 5, 1>& norm) const {
  Eigen::Matrix<double, 5, 1> x;
  for (int c = 0; c < 5; ++c) x[c] = norm[c] * state_std[c] + state_mean[c];
  x[0] += origin_lon;
  x[1] += origin_lat;
  x[2] += origin_alt;
  return x;
}

Eigen::Vector2d Normalizer::normalize_plan_point(const LonLat& p) const {
  return {(p.lon - origin_lon - plan_mean[0]) / plan_std[0],
          (p.lat - origin_lat - plan_mean[1]) / plan_std[1]};
}

double Normalizer::normalize_wx(int channel, double raw) const {
  return (raw - wx_mean[channel]) / wx_std[channel];
}

Eigen::Matrix<double, 5, 1> Normalizer::state_of(const TrackPoint& p) const {
  return normalize_state(raw_state_of(p));
}

}  // namespace atp
