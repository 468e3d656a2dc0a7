#ifndef ATP_GEO_HPP
#define ATP_GEO_HPP

#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace atp {

// Error with a CLI-friendly category: usage errors map to exit code 1,
// data/manifest errors to exit code 2.
class Error : public std::runtime_error {
 public:
  enum class Kind { Usage, Data };
  Error(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline Error usage_error(const std::string& msg) { return Error(Error::Kind::Usage, msg); }
inline Error data_error(const std::string& msg) { return Error(Error::Kind::Data, msg); }

constexpr double kEarthRadiusNm = 3440.065;

struct LonLat {
  double lon = 0.0;
  double lat = 0.0;
};

// Fixed lattice of horizontal grid points indexing all weather fields.
// Point order is stable: index i is the permanent identity of grid point i.
// The point set is arbitrary; no rectangular factorization is ever assumed.
struct GeoRef {
  std::vector<LonLat> points;

  std::size_t size() const { return points.size(); }
  void validate() const;
};

struct AltitudeTable {
  enum class Kind { Atmospheric, Convective };
  std::vector<double> levels_ft;  // strictly ascending
  Kind kind = Kind::Atmospheric;

  // Unique storm altitudes, in feet.
  static AltitudeTable convective_default();
  void validate() const;
};

// One 4D sample on a trajectory. Course and speeds are derived quantities
// (see preprocess); NaN until derive_kinematics has run.
struct TrackPoint {
  double lon = 0.0;      // degrees
  double lat = 0.0;      // degrees
  double alt_ft = 0.0;   // feet
  double t_s = 0.0;      // seconds since store baseline time
  double course = std::numeric_limits<double>::quiet_NaN();   // radians, CCW from east
  double lon_spd = std::numeric_limits<double>::quiet_NaN();  // degrees/second
  double lat_spd = std::numeric_limits<double>::quiet_NaN();  // degrees/second

  bool has_course() const { return course == course; }
};

// Index of the level minimizing |level - alt|; ties go to the lower level.
int nearest_level(double alt_ft, const AltitudeTable& table);

// Great-circle distance on the sphere, in nautical miles.
double haversine_nm(const LonLat& a, const LonLat& b);

// Angle of the displacement vector (dlon, dlat), counterclockwise from the
// +lon (east) axis, in flat lon/lat coordinates. Throws on coincident points.
double course_between(const LonLat& a, const LonLat& b);

}  // namespace atp

#endif
