#ifndef ATP_SPATIAL_INDEX_HPP
#define ATP_SPATIAL_INDEX_HPP

#include <cstddef>
#include <span>
#include <vector>

#include "core/geo.hpp"

namespace atp {

// Static 2-d tree over (lon, lat) points. Nearest-neighbor queries return the
// index of a point at globally minimal flat Euclidean distance; exact-distance
// ties resolve to the smallest point index, matching the brute-force oracle.
class KdTree2D {
 public:
  explicit KdTree2D(std::span<const LonLat> points);

  int nearest(double lon, double lat) const;
  std::size_t size() const { return pts_.size(); }

  // Reference implementation used by tests and benchmarks.
  static int nearest_brute_force(std::span<const LonLat> points, double lon, double lat);

 private:
  struct Node {
    double split = 0.0;
    int axis = 0;        // 0 = lon, 1 = lat
    int left = -1;       // node index
    int right = -1;
    int first = 0;       // leaf payload: range into order_
    int count = 0;       // > 0 marks a leaf
  };

  int build(int first, int count, int depth);
  void search(int node, double lon, double lat, double& best_d2, int& best_idx) const;

  std::vector<LonLat> pts_;    // original order, query distance source
  std::vector<int> order_;     // permutation grouped by leaf
  std::vector<Node> nodes_;
  int root_ = -1;
  static constexpr int kLeafSize = 16;
};

// Nearest index into an ascending time array, subject to |t - times[i]| <= bound.
// Returns -1 when nothing qualifies. Equidistant neighbors resolve to the
// earlier time.
class TimeIndex {
 public:
  explicit TimeIndex(std::vector<double> times_ascending);
  int nearest_within(double t, double bound) const;
  const std::vector<double>& times() const { return times_; }

 private:
  std::vector<double> times_;
};

}  // namespace atp

#endif
