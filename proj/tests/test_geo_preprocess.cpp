#include <doctest.h>

#include <cmath>

#include "core/geo.hpp"
#include "core/preprocess.hpp"
#include "core/rng.hpp"

using namespace atp;

TEST_CASE("nearest_level picks the closest level, ties toward the lower one") {
  AltitudeTable wx = AltitudeTable::convective_default();
  CHECK(nearest_level(36000, wx) == 5);  // 35,000 ft
  CHECK(nearest_level(0, wx) == 0);
  CHECK(nearest_level(22000, wx) == 2);  // equidistant 20k/24k -> 20k

  SUBCASE("idempotent on table entries") {
    for (std::size_t i = 0; i < wx.levels_ft.size(); ++i)
      CHECK(nearest_level(wx.levels_ft[i], wx) == static_cast<int>(i));
  }
}

TEST_CASE("haversine distance") {
  CHECK(haversine_nm({10, 20}, {10, 20}) == 0.0);
  CHECK(haversine_nm({0, 0}, {0, 1}) == doctest::Approx(60.0).epsilon(0.001));

  Rng rng(7);
  SUBCASE("symmetry") {
    for (int i = 0; i < 100; ++i) {
      LonLat a{rng.uniform(-120, -60), rng.uniform(20, 50)};
      LonLat b{rng.uniform(-120, -60), rng.uniform(20, 50)};
      CHECK(haversine_nm(a, b) == doctest::Approx(haversine_nm(b, a)).epsilon(1e-12));
    }
  }
  SUBCASE("triangle inequality") {
    for (int i = 0; i < 200; ++i) {
      LonLat a{rng.uniform(-120, -60), rng.uniform(20, 50)};
      LonLat b{rng.uniform(-120, -60), rng.uniform(20, 50)};
      LonLat c{rng.uniform(-120, -60), rng.uniform(20, 50)};
      double ab = haversine_nm(a, b), bc = haversine_nm(b, c), ac = haversine_nm(a, c);
      CHECK(ac <= ab + bc + 1e-9 * (ab + bc + 1.0));
    }
  }
}

TEST_CASE("course_between uses the math convention (CCW from east)") {
  CHECK(course_between({0, 0}, {1, 0}) == doctest::Approx(0.0));
  CHECK(course_between({0, 0}, {0, 1}) == doctest::Approx(M_PI / 2));
  CHECK(course_between({0, 0}, {-1, 0}) == doctest::Approx(M_PI));
  CHECK_THROWS_AS(course_between({1, 1}, {1, 1}), Error);

  SUBCASE("scaling along the ray does not change the course") {
    Rng rng(3);
    for (int i = 0; i < 50; ++i) {
      LonLat p{rng.uniform(-10, 10), rng.uniform(-10, 10)};
      double dx = rng.uniform(-1, 1), dy = rng.uniform(-1, 1);
      if (dx == 0 && dy == 0) continue;
      double s = rng.uniform(0.1, 5.0);
      double c1 = course_between(p, {p.lon + dx, p.lat + dy});
      double c2 = course_between(p, {p.lon + s * dx, p.lat + s * dy});
      CHECK(c1 == doctest::Approx(c2).epsilon(1e-12));
    }
  }
}

namespace {

std::vector<TrackPoint> straight_track(int n, double dt = 120.0, double dlon = 0.25) {
  std::vector<TrackPoint> t;
  for (int i = 0; i < n; ++i) t.push_back({-97.0 + i * dlon, 29.5, 30000, i * dt});
  return t;
}

}  // namespace

TEST_CASE("clean_trajectory") {
  TerminalBoxes boxes{{-97.0, 29.5}, {-97.0 + 9 * 0.25, 29.5}};
  auto good = straight_track(10);
  CHECK(clean_trajectory(good, boxes).accepted);

  SUBCASE("spatial discontinuity") {
    auto t = straight_track(10);
    t[5].lon += 3.0;
    auto r = clean_trajectory(t, boxes, 300, 1.0);
    CHECK_FALSE(r.accepted);
    CHECK(r.reason == "spatial discontinuity");
  }
  SUBCASE("temporal gap") {
    auto t = straight_track(10);
    for (std::size_t i = 5; i < t.size(); ++i) t[i].t_s += 400;
    auto r = clean_trajectory(t, boxes);
    CHECK_FALSE(r.accepted);
    CHECK(r.reason == "temporal discontinuity");
  }
  SUBCASE("outside terminal area") {
    auto t = straight_track(10);
    TerminalBoxes far{{-99.0, 29.5}, boxes.dest};  // origin 2 deg away from box center
    auto r = clean_trajectory(t, far);
    CHECK_FALSE(r.accepted);
    CHECK(r.reason == "outside terminal area");
  }
}

TEST_CASE("downsample keeps even indices and always the final point") {
  auto t10 = straight_track(10);
  auto d10 = downsample(t10);
  REQUIRE(d10.size() == 6);
  CHECK(d10[4].t_s == t10[8].t_s);
  CHECK(d10[5].t_s == t10[9].t_s);

  auto t9 = straight_track(9);
  auto d9 = downsample(t9);
  REQUIRE(d9.size() == 5);
  CHECK(d9.back().t_s == t9.back().t_s);

  auto t2 = straight_track(2);
  auto d2 = downsample(t2);
  REQUIRE(d2.size() == 2);
  CHECK(d2[0].t_s == t2[0].t_s);
  CHECK(d2[1].t_s == t2[1].t_s);
}

TEST_CASE("derive_kinematics") {
  SUBCASE("two points one degree east apart") {
    std::vector<TrackPoint> t{{0, 0, 30000, 0}, {1, 0, 30000, 120}};
    derive_kinematics(t);
    CHECK(t[0].lon_spd == doctest::Approx(1.0 / 120));
    CHECK(t[0].lat_spd == doctest::Approx(0.0));
    CHECK(t[0].course == doctest::Approx(0.0));
    CHECK(t[1].lon_spd == t[0].lon_spd);  // copy rule
  }
  SUBCASE("duplicate timestamps") {
    std::vector<TrackPoint> t{{0, 0, 0, 100}, {1, 0, 0, 100}};
    CHECK_THROWS_WITH_AS(derive_kinematics(t), "derive_kinematics: zero dt", Error);
  }
  SUBCASE("stationary pair propagates the degenerate-segment error") {
    std::vector<TrackPoint> t{{0, 0, 0, 0}, {0, 0, 0, 120}};
    CHECK_THROWS_WITH_AS(derive_kinematics(t), "course_between: degenerate segment", Error);
  }
  SUBCASE("L-shaped track copies the last course") {
    std::vector<TrackPoint> t{{0, 0, 0, 0}, {1, 0, 0, 120}, {1, 1, 0, 240}};
    derive_kinematics(t);
    CHECK(t[2].course == doctest::Approx(t[1].course));
  }
}

TEST_CASE("partition_flight_plan") {
  SUBCASE("collinear plan at alpha=1 keeps endpoints only") {
    FlightPlan plan;
    for (int i = 0; i < 10; ++i) plan.waypoints.push_back({static_cast<double>(i), 0.0});
    auto out = partition_flight_plan(plan, 1.0);
    REQUIRE(out.waypoints.size() == 2);
    CHECK(out.waypoints.front().lon == 0.0);
    CHECK(out.waypoints.back().lon == 9.0);
  }
  SUBCASE("endpoints always kept, output is a subsequence") {
    Rng rng(11);
    for (int rep = 0; rep < 20; ++rep) {
      FlightPlan plan;
      double x = 0, y = 0;
      int n = 5 + rng.uniform_int(15);
      for (int i = 0; i < n; ++i) {
        plan.waypoints.push_back({x, y});
        x += rng.uniform(0.3, 1.2);
        y += rng.uniform(-0.8, 0.8);
      }
      double alpha = rng.uniform(1.0, 2.0);
      auto out = partition_flight_plan(plan, alpha);
      CHECK(out.waypoints.front().lon == plan.waypoints.front().lon);
      CHECK(out.waypoints.back().lon == plan.waypoints.back().lon);
      // subsequence check
      std::size_t j = 0;
      for (const auto& wp : out.waypoints) {
        while (j < plan.waypoints.size() &&
               (plan.waypoints[j].lon != wp.lon || plan.waypoints[j].lat != wp.lat))
          ++j;
        CHECK(j < plan.waypoints.size());
      }
    }
  }
  SUBCASE("larger alpha keeps at least as many points on a zig-zag plan") {
    FlightPlan plan;
    for (int i = 0; i < 12; ++i) plan.waypoints.push_back({i * 1.0, (i % 2 == 0) ? 0.0 : 0.6});
    auto a1 = partition_flight_plan(plan, 1.0);
    auto a2 = partition_flight_plan(plan, 2.0);
    CHECK(a2.waypoints.size() >= a1.waypoints.size());
  }
  SUBCASE("alpha outside range") {
    FlightPlan plan;
    plan.waypoints = {{0, 0}, {1, 1}};
    CHECK_THROWS_AS(partition_flight_plan(plan, 0.5), Error);
    CHECK_THROWS_AS(partition_flight_plan(plan, 2.5), Error);
  }
}

TEST_CASE("normalizer round trip and convective passthrough") {
  std::vector<Flight> flights(3);
  Rng rng(5);
  for (std::size_t i = 0; i < flights.size(); ++i) {
    flights[i].id = "T" + std::to_string(i);
    flights[i].plan.waypoints = {{-97, 29.5}, {-93 + rng.uniform(-1, 1), 33}, {-89, 37.5}};
    for (int k = 0; k < 20; ++k)
      flights[i].track.push_back({-97 + 0.4 * k + 0.05 * rng.normal(),
                                  29.5 + 0.35 * k + 0.05 * rng.normal(),
                                  1000.0 * k + 100 * rng.normal(), 120.0 * k});
    derive_kinematics(flights[i].track);
  }
  Normalizer n = Normalizer::fit(flights, {-97, 29.5}, 0.0);

  SUBCASE("round trip") {
    Vec5 x = raw_state_of(flights[1].track[7]);
    Vec5 back = n.denormalize_state(n.normalize_state(x));
    for (int c = 0; c < 5; ++c)
      CHECK(back[c] == doctest::Approx(x[c]).epsilon(1e-9));
  }
  SUBCASE("training set maps to roughly zero mean unit variance") {
    double sum = 0, sq = 0, cnt = 0;
    for (const auto& f : flights)
      for (const auto& p : f.track) {
        Vec5 z = n.state_of(p);
        sum += z[0];
        sq += z[0] * z[0];
        cnt += 1;
      }
    CHECK(std::abs(sum / cnt) < 1e-9);
    CHECK(sq / cnt == doctest::Approx(1.0).epsilon(1e-6));
  }
  SUBCASE("zero variance channel is an error") {
    std::vector<Flight> flat = flights;
    for (auto& f : flat)
      for (auto& p : f.track) p.alt_ft = 35000;
    CHECK_THROWS_AS(Normalizer::fit(flat, {-97, 29.5}, 0.0), Error);
  }
}
