#include "core/geo.hpp"

#include <cmath>
#include <limits>

namespace atp {

namespace {
constexpr double kDegToRad = M_PI / 180.0;
}

void GeoRef::validate() const {
  if (points.empty()) throw data_error("georef: empty point set");
  for (const auto& p : points) {
    if (p.lon < -180.0 || p.lon > 180.0 || p.lat < -90.0 || p.lat > 90.0)
      throw data_error("georef: coordinate out of range");
  }
}

AltitudeTable AltitudeTable::convective_default() {
  AltitudeTable t;
  t.kind = Kind::Convective;
  for (double v : {0, 14, 20, 24, 29, 35, 39, 45, 50, 54, 60, 65, 69})
    t.levels_ft.push_back(v * 1000.0);
  return t;
}

void AltitudeTable::validate() const {
  if (levels_ft.empty()) throw data_error("altitude table: empty");
  for (std::size_t i = 1; i < levels_ft.size(); ++i)
    if (levels_ft[i] <= levels_ft[i - 1])
      throw data_error("altitude table: levels must be strictly ascending");
}

int nearest_level(double alt_ft, const AltitudeTable& table) {
  if (table.levels_ft.empty()) throw data_error("nearest_level: empty table");
  int best = 0;
  double best_d = std::abs(table.levels_ft[0] - alt_ft);
  for (std::size_t i = 1; i < table.levels_ft.size(); ++i) {
    double d = std::abs(table.levels_ft[i] - alt_ft);
    if (d < best_d) {  // strict: ties stay with the lower level
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

double haversine_nm(const LonLat& a, const LonLat& b) {
  double phi1 = a.lat * kDegToRad;
  double phi2 = b.lat * kDegToRad;
  double dphi = (b.lat - a.lat) * kDegToRad;
  double dlam = (b.lon - a.lon) * kDegToRad;
  double s1 = std::sin(dphi / 2.0);
  double s2 = std::sin(dlam / 2.0);
  double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
  h = std::min(1.0, h);
  return 2.0 * kEarthRadiusNm * std::asin(std::sqrt(h));
}

double course_between(const LonLat& a, const LonLat& b) {
  double dx = b.lon - a.lon;
  double dy = b.lat - a.lat;
  if (dx == 0.0 && dy == 0.0) throw data_error("course_between: degenerate segment");
  return std::atan2(dy, dx);
}

}  // namespace atp
