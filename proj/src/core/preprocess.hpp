#ifndef ATP_PREPROCESS_HPP
#define ATP_PREPROCESS_HPP

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "core/geo.hpp"

namespace atp {

using Vec5 = Eigen::Matrix<double, 5, 1>;

struct FlightPlan {
  std::vector<LonLat> waypoints;  // length >= 2
};

struct Flight {
  std::string id;
  FlightPlan plan;
  std::vector<TrackPoint> track;  // strictly increasing in t, length >= 2
};

struct TerminalBoxes {
  LonLat origin;
  LonLat dest;
  double half_width_deg = 0.5;
};

struct CleanResult {
  bool accepted = false;
  std::string reason;  // empty when accepted
};

// Rejects tracks with temporal gaps > max_gap_s, lateral jumps > max_jump_deg,
// or first/last points outside the terminal boxes. Rejection is a value.
CleanResult clean_trajectory(const std::vector<TrackPoint>& track, const TerminalBoxes& boxes,
                             double max_gap_s = 300.0, double max_jump_deg = 1.0);

// Keeps indices 0,2,4,...; the final point is always retained.
std::vector<TrackPoint> downsample(const std::vector<TrackPoint>& track);

// Fills course, lon_spd, lat_spd assuming constant ground velocity between
// consecutive points; the last point copies its predecessor's values.
void derive_kinematics(std::vector<TrackPoint>& track);

// MDL-based characteristic-point selection over the plan. alpha in [1,2]
// controls output length: larger alpha keeps more waypoints. Output is always
// a subsequence of the input containing both endpoints.
FlightPlan partition_flight_plan(const FlightPlan& plan, double alpha);

// Per-channel statistics for state variables, plan coordinates, and the three
// continuous weather channels. Positions are origin-subtracted before
// z-scoring; the convective channel is never normalized.
struct Normalizer {
  double origin_lon = 0.0, origin_lat = 0.0, origin_alt = 0.0;
  std::array<double, 5> state_mean{}, state_std{};  // lon,lat,alt,lon_spd,lat_spd
  std::array<double, 2> plan_mean{}, plan_std{};    // lon,lat
  std::array<double, 3> wx_mean{}, wx_std{};        // temperature,u,v

  // Fit on the training split only. Weather stats come from the matched cube
  // channels (temp,u,v) of the same flights.
  static Normalizer fit(const std::vector<Flight>& flights, LonLat origin, double origin_alt,
                        const std::vector<Eigen::MatrixXd>* wx_channels = nullptr);

  Eigen::Matrix<double, 5, 1> normalize_state(const Eigen::Matrix<double, 5, 1>& raw) const;
  Eigen::Matrix<double, 5, 1> denormalize_state(const Eigen::Matrix<double, 5, 1>& norm) const;
  Eigen::Vector2d normalize_plan_point(const LonLat& p) const;
  double normalize_wx(int channel, double raw) const;  // channel: 0=temp,1=u,2=v

  Eigen::Matrix<double, 5, 1> state_of(const TrackPoint& p) const;
};

Eigen::Matrix<double, 5, 1> raw_state_of(const TrackPoint& p);

}  // namespace atp

#endif
