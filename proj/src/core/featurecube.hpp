#ifndef ATP_FEATURECUBE_HPP
#define ATP_FEATURECUBE_HPP

#include <array>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "core/preprocess.hpp"
#include "core/spatial_index.hpp"
#include "core/weather_store.hpp"

namespace atp {

struct GridParams {
  double dx_deg = 2.0;
  double dy_deg = 2.0;
  int nx = 20;
  int ny = 20;
};

struct MatchParams {
  double altitude_buffer_ft = 20000.0;
  double time_bound_s = 3600.0;
};

// The rotated lattice ahead of one track point. Row k holds grid point
// (p, q) with k = p*nx + q: q advances along-track, p laterally.
struct FeatureCubeGrid {
  Eigen::Matrix<double, Eigen::Dynamic, 2> points;  // (nx*ny, 2) lon/lat
  int nx = 0, ny = 0;
  int atm_level = 0;
  int wx_level = 0;
  double t_s = 0.0;
};

// Matched nx x ny x 4 array. Channel order is fixed:
// 0 convective (0/1), 1 temperature, 2 u-wind, 3 v-wind.
struct FeatureCube {
  std::array<Eigen::MatrixXd, 4> channel;  // each ny rows x nx cols, (p, q)
  std::array<bool, 4> missing{false, false, false, false};

  int ny() const { return static_cast<int>(channel[0].rows()); }
  int nx() const { return static_cast<int>(channel[0].cols()); }
  // Row-major flattening of (p, q) with channels as columns, for the conv stack.
  Eigen::MatrixXd as_conv_input() const;
};

// Spatial 2-d tree over the georef plus nearest-time indexes over both time
// arrays. Immutable after build; concurrent queries are safe.
struct MatchIndex {
  KdTree2D spatial;
  TimeIndex t_atm;
  TimeIndex t_wx;
};

MatchIndex build_index(const WeatherStore& store);

// Algorithm: local grid spanning x in [0, dx] (ahead of the aircraft) and
// y in [-dy/2, dy/2], rotated by the course and translated to the point.
FeatureCubeGrid generate_grid(const TrackPoint& point, const GridParams& params,
                              const AltitudeTable& atm_levels, const AltitudeTable& wx_levels);
std::vector<FeatureCubeGrid> generate_grids(std::span<const TrackPoint> points,
                                            const GridParams& params,
                                            const AltitudeTable& atm_levels,
                                            const AltitudeTable& wx_levels);

// Nearest (space, level, time) values of u, v, temperature. When no store
// time lies within the bound the channels are zero-filled and missing is set.
void match_atmospheric(const FeatureCubeGrid& grid, const WeatherStore& store,
                       const MatchIndex& index, const MatchParams& params, Eigen::MatrixXd& u,
                       Eigen::MatrixXd& v, Eigen::MatrixXd& temp, bool& missing);

// Logical OR across all convective levels within the altitude buffer of the
// grid's matched level.
Eigen::MatrixXd match_convective(const FeatureCubeGrid& grid, const WeatherStore& store,
                                 const MatchIndex& index, const MatchParams& params,
                                 bool& missing);

// Stacks [convective, temperature, u, v]; z-scores channels 1..3 when a
// normalizer is supplied, never channel 0.
FeatureCube assemble_cube(const FeatureCubeGrid& grid, const WeatherStore& store,
                          const MatchIndex& index, const MatchParams& params = {},
                          const Normalizer* normalizer = nullptr);

std::vector<FeatureCube> assemble_cubes(std::span<const FeatureCubeGrid> grids,
                                        const WeatherStore& store, const MatchIndex& index,
                                        const MatchParams& params = {},
                                        const Normalizer* normalizer = nullptr);

}  // namespace atp

#endif
