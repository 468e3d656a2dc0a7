#ifndef ATP_WEATHER_STORE_HPP
#define ATP_WEATHER_STORE_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "core/geo.hpp"

namespace atp {

// Gridded atmospheric (u-wind, v-wind, temperature) and binary convective
// fields indexed by (time, level, grid point). Payload arrays are flat
// little-endian binaries on disk: float32 per atmospheric channel, uint8 for
// convective, index order [time][level][point].
struct WeatherStore {
  GeoRef georef;
  AltitudeTable atm_levels;
  AltitudeTable wx_levels;
  std::vector<double> atm_times_s;  // strictly ascending, seconds since baseline
  std::vector<double> wx_times_s;
  std::string baseline_time = "2013-01-01T00:00Z";

  std::vector<float> u;      // [n_atm_times][n_atm_levels][N]
  std::vector<float> v;
  std::vector<float> temp;
  std::vector<std::uint8_t> wx;  // [n_wx_times][n_wx_levels][N]

  std::size_t n() const { return georef.size(); }
  std::size_t atm_index(std::size_t t, std::size_t level, std::size_t point) const {
    return (t * atm_levels.levels_ft.size() + level) * n() + point;
  }
  std::size_t wx_index(std::size_t t, std::size_t level, std::size_t point) const {
    return (t * wx_levels.levels_ft.size() + level) * n() + point;
  }

  void validate() const;
  void save(const std::string& dir) const;
  static WeatherStore load(const std::string& dir);
};

}  // namespace atp

#endif
