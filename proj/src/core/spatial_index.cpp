#include "core/spatial_index.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace atp {

namespace {

inline double dist2(const LonLat& p, double lon, double lat) {
  double dx = p.lon - lon;
  double dy = p.lat - lat;
  return dx * dx + dy * dy;
}

}  // namespace

KdTree2D::KdTree2D(std::span<const LonLat> points) : pts_(points.begin(), points.end()) {
  if (pts_.empty()) throw data_error("kdtree: empty point set");
  order_.resize(pts_.size());
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * pts_.size() / kLeafSize + 8);
  root_ = build(0, static_cast<int>(pts_.size()), 0);
}

int KdTree2D::build(int first, int count, int depth) {
  Node n;
  if (count <= kLeafSize) {
    n.first = first;
    n.count = count;
    nodes_.push_back(n);
    return static_cast<int>(nodes_.size()) - 1;
  }
  int axis = depth % 2;
  int mid = count / 2;
  auto key = [&](int idx) { return axis == 0 ? pts_[idx].lon : pts_[idx].lat; };
  std::nth_element(order_.begin() + first, order_.begin() + first + mid,
                   order_.begin() + first + count,
                   [&](int a, int b) { return key(a) < key(b) || (key(a) == key(b) && a < b); });
  n.axis = axis;
  n.split = key(order_[first + mid]);
  nodes_.push_back(n);
  int self = static_cast<int>(nodes_.size()) - 1;
  int left = build(first, mid, depth + 1);
  int right = build(first + mid, count - mid, depth + 1);
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

void KdTree2D::search(int node, double lon, double lat, double& best_d2, int& best_idx) const {
  const Node& n = nodes_[node];
  if (n.count > 0) {
    for (int i = n.first; i < n.first + n.count; ++i) {
      int idx = order_[i];
      double d2 = dist2(pts_[idx], lon, lat);
      if (d2 < best_d2 || (d2 == best_d2 && idx < best_idx)) {
        best_d2 = d2;
        best_idx = idx;
      }
    }
    return;
  }
  double q = (n.axis == 0) ? lon : lat;
  double diff = q - n.split;
  int near = (diff < 0.0) ? n.left : n.right;
  int far = (diff < 0.0) ? n.right : n.left;
  search(near, lon, lat, best_d2, best_idx);
  // Visit the far side on exact boundary contact too, so equal-distance ties
  // can still be claimed by a smaller index living across the plane.
  if (diff * diff <= best_d2) search(far, lon, lat, best_d2, best_idx);
}

int KdTree2D::nearest(double lon, double lat) const {
  double best_d2 = std::numeric_limits<double>::infinity();
  int best_idx = std::numeric_limits<int>::max();
  search(root_, lon, lat, best_d2, best_idx);
  return best_idx;
}

int KdTree2D::nearest_brute_force(std::span<const LonLat> points, double lon, double lat) {
  double best_d2 = std::numeric_limits<double>::infinity();
  int best_idx = std::numeric_limits<int>::max();
  for (std::size_t i = 0; i < points.size(); ++i) {
    double d2 = dist2(points[i], lon, lat);
    if (d2 < best_d2 || (d2 == best_d2 && static_cast<int>(i) < best_idx)) {
      best_d2 = d2;
      best_idx = static_cast<int>(i);
    }
  }
  return best_idx;
}

TimeIndex::TimeIndex(std::vector<double> times_ascending) : times_(std::move(times_ascending)) {
  for (std::size_t i = 1; i < times_.size(); ++i)
    if (times_[i] <= times_[i - 1]) throw data_error("time index: not strictly ascending");
}

int TimeIndex::nearest_within(double t, double bound) const {
  if (times_.empty()) return -1;
  auto it = std::lower_bound(times_.begin(), times_.end(), t);
  int hi = static_cast<int>(it - times_.begin());
  int lo = hi - 1;
  int best = -1;
  double best_d = std::numeric_limits<double>::infinity();
  if (lo >= 0) {
    best = lo;
    best_d = std::abs(t - times_[lo]);
  }
  if (hi < static_cast<int>(times_.size())) {
    double d = std::abs(times_[hi] - t);
    if (d < best_d) {
      best = hi;
      best_d = d;
    }
  }
  if (best < 0 || best_d > bound) return -1;
  return best;
}

}  // namespace atp
