#include "core/featurecube.hpp"

#include <cmath>

namespace atp {

Eigen::MatrixXd FeatureCube::as_conv_input() const {
  Eigen::MatrixXd out(channel[0].size(), 4);
  for (int c = 0; c < 4; ++c) {
    const auto& m = channel[c];
    for (int p = 0; p < m.rows(); ++p)
      for (int q = 0; q < m.cols(); ++q) out(p * m.cols() + q, c) = m(p, q);
  }
  return out;
}

MatchIndex build_index(const WeatherStore& store) {
  store.validate();
  return MatchIndex{KdTree2D(store.georef.points), TimeIndex(store.atm_times_s),
                    TimeIndex(store.wx_times_s)};
}

FeatureCubeGrid generate_grid(const TrackPoint& point, const GridParams& params,
                              const AltitudeTable& atm_levels, const AltitudeTable& wx_levels) {
  if (!point.has_course()) throw data_error("generate_grid: track point has no course");
  if (params.nx < 2 || params.ny < 2 || params.dx_deg <= 0.0 || params.dy_deg <= 0.0)
    throw data_error("generate_grid: invalid grid parameters");

  FeatureCubeGrid g;
  g.nx = params.nx;
  g.ny = params.ny;
  g.points.resize(params.nx * params.ny, 2);
  const double ddx = params.dx_deg / (params.nx - 1);
  const double ddy = params.dy_deg / (params.ny - 1);
  const double c = std::cos(point.course);
  const double s = std::sin(point.course);
  for (int p = 0; p < params.ny; ++p) {
    for (int q = 0; q < params.nx; ++q) {
      double x = q * ddx;                            // ahead of the aircraft
      double y = -params.dy_deg / 2.0 + p * ddy;     // lateral
      int k = p * params.nx + q;
      g.points(k, 0) = c * x - s * y + point.lon;    // rotate, then translate
      g.points(k, 1) = s * x + c * y + point.lat;
    }
  }
  g.atm_level = nearest_level(point.alt_ft, atm_levels);
  g.wx_level = nearest_level(point.alt_ft, wx_levels);
  g.t_s = point.t_s;
  return g;
}

std::vector<FeatureCubeGrid> generate_grids(std::span<const TrackPoint> points,
                                            const GridParams& params,
                                            const AltitudeTable& atm_levels,
                                            const AltitudeTable& wx_levels) {
  std::vector<FeatureCubeGrid> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(generate_grid(p, params, atm_levels, wx_levels));
  return out;
}

namespace {

// One spatial query per grid point, shared between the atmospheric and
// convective passes of the same grid.
std::vector<int> spatial_indices(const FeatureCubeGrid& grid, const MatchIndex& index) {
  std::vector<int> idx(static_cast<std::size_t>(grid.points.rows()));
  for (Eigen::Index k = 0; k < grid.points.rows(); ++k)
    idx[static_cast<std::size_t>(k)] = index.spatial.nearest(grid.points(k, 0), grid.points(k, 1));
  return idx;
}

void match_atmospheric_impl(const FeatureCubeGrid& grid, const WeatherStore& store,
                            const MatchIndex& index, const MatchParams& params,
                            const std::vector<int>& sidx, Eigen::MatrixXd& u, Eigen::MatrixXd& v,
                            Eigen::MatrixXd& temp, bool& missing) {
  u.setZero(grid.ny, grid.nx);
  v.setZero(grid.ny, grid.nx);
  temp.setZero(grid.ny, grid.nx);
  int tidx = index.t_atm.nearest_within(grid.t_s, params.time_bound_s);
  if (tidx < 0) {
    missing = true;
    return;
  }
  missing = false;
  for (int p = 0; p < grid.ny; ++p) {
    for (int q = 0; q < grid.nx; ++q) {
      int k = p * grid.nx + q;
      std::size_t flat = store.atm_index(static_cast<std::size_t>(tidx),
                                         static_cast<std::size_t>(grid.atm_level),
                                         static_cast<std::size_t>(sidx[static_cast<std::size_t>(k)]));
      u(p, q) = store.u[flat];
      v(p, q) = store.v[flat];
      temp(p, q) = store.temp[flat];
    }
  }
}

Eigen::MatrixXd match_convective_impl(const FeatureCubeGrid& grid, const WeatherStore& store,
                                      const MatchIndex& index, const MatchParams& params,
                                      const std::vector<int>& sidx, bool& missing) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(grid.ny, grid.nx);
  int tidx = index.t_wx.nearest_within(grid.t_s, params.time_bound_s);
  if (tidx < 0) {
    missing = true;
    return out;
  }
  missing = false;
  double level_alt = store.wx_levels.levels_ft[static_cast<std::size_t>(grid.wx_level)];
  for (std::size_t lvl = 0; lvl < store.wx_levels.levels_ft.size(); ++lvl) {
    double alt = store.wx_levels.levels_ft[lvl];
    if (alt < level_alt - params.altitude_buffer_ft || alt > level_alt + params.altitude_buffer_ft)
      continue;
    for (int p = 0; p < grid.ny; ++p) {
      for (int q = 0; q < grid.nx; ++q) {
        int k = p * grid.nx + q;
        std::size_t flat = store.wx_index(static_cast<std::size_t>(tidx), lvl,
                                          static_cast<std::size_t>(sidx[static_cast<std::size_t>(k)]));
        if (store.wx[flat]) out(p, q) = 1.0;
      }
    }
  }
  return out;
}

}  // namespace

void match_atmospheric(const FeatureCubeGrid& grid, const WeatherStore& store,
                       const MatchIndex& index, const MatchParams& params, Eigen::MatrixXd& u,
                       Eigen::MatrixXd& v, Eigen::MatrixXd& temp, bool& missing) {
  match_atmospheric_impl(grid, store, index, params, spatial_indices(grid, index), u, v, temp,
                         missing);
}

Eigen::MatrixXd match_convective(const FeatureCubeGrid& grid, const WeatherStore& store,
                                 const MatchIndex& index, const MatchParams& params,
                                 bool& missing) {
  return match_convective_impl(grid, store, index, params, spatial_indices(grid, index), missing);
}

FeatureCube assemble_cube(const FeatureCubeGrid& grid, const WeatherStore& store,
                          const MatchIndex& index, const MatchParams& params,
                          const Normalizer* normalizer) {
  FeatureCube cube;
  auto sidx = spatial_indices(grid, index);
  bool atm_missing = false, wx_missing = false;
  cube.channel[0] = match_convective_impl(grid, store, index, params, sidx, wx_missing);
  match_atmospheric_impl(grid, store, index, params, sidx, cube.channel[2], cube.channel[3],
                         cube.channel[1], atm_missing);
  cube.missing = {wx_missing, atm_missing, atm_missing, atm_missing};
  if (normalizer && !atm_missing) {
    // channel order [conv, temp, u, v]; normalizer channels are [temp, u, v]
    for (int c = 1; c < 4; ++c) {
      auto& m = cube.channel[c];
      m = (m.array() - normalizer->wx_mean[static_cast<std::size_t>(c - 1)]) /
          normalizer->wx_std[static_cast<std::size_t>(c - 1)];
    }
  }
  return cube;
}

std::vector<FeatureCube> assemble_cubes(std::span<const FeatureCubeGrid> grids,
                                        const WeatherStore& store, const MatchIndex& index,
                                        const MatchParams& params, const Normalizer* normalizer) {
  std::vector<FeatureCube> out;
  out.reserve(grids.size());
  for (const auto& g : grids) out.push_back(assemble_cube(g, store, index, params, normalizer));
  return out;
}

}  // namespace atp
