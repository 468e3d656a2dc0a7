#include <doctest.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>

#include "core/featurecube.hpp"
#include "core/flight_io.hpp"
#include "core/rng.hpp"
#include "core/synth.hpp"

using namespace atp;

namespace {

WeatherStore tiny_store(double u_fill = 7.0) {
  WeatherStore s;
  for (int iy = 0; iy < 30; ++iy)
    for (int ix = 0; ix < 30; ++ix)
      s.georef.points.push_back({-100.0 + ix * 0.5, 25.0 + iy * 0.5});
  s.atm_levels.kind = AltitudeTable::Kind::Atmospheric;
  s.atm_levels.levels_ft = {0, 10000, 20000, 30000, 40000};
  s.wx_levels = AltitudeTable::convective_default();
  s.atm_times_s = {0, 3600, 7200};
  s.wx_times_s = {0, 3600, 7200};
  std::size_t an = s.atm_times_s.size() * s.atm_levels.levels_ft.size() * s.n();
  s.u.assign(an, static_cast<float>(u_fill));
  s.v.assign(an, -3.0f);
  s.temp.assign(an, 220.0f);
  s.wx.assign(s.wx_times_s.size() * s.wx_levels.levels_ft.size() * s.n(), 0);
  return s;
}

TrackPoint point_with_course(double lon, double lat, double alt, double t, double course) {
  TrackPoint p;
  p.lon = lon;
  p.lat = lat;
  p.alt_ft = alt;
  p.t_s = t;
  p.course = course;
  p.lon_spd = 0.001;
  p.lat_spd = 0.0;
  return p;
}

}  // namespace

TEST_CASE("generate_grid matches the hand-derived corners") {
  AltitudeTable atm;
  atm.levels_ft = {0, 10000, 20000, 30000, 40000};
  AltitudeTable wx = AltitudeTable::convective_default();
  GridParams params;

  SUBCASE("course 0: grid extends east, half-width lateral") {
    auto g = generate_grid(point_with_course(-95, 30, 30000, 0, 0.0), params, atm, wx);
    REQUIRE(g.points.rows() == 400);
    CHECK(g.points(0, 0) == doctest::Approx(-95.0));
    CHECK(g.points(0, 1) == doctest::Approx(29.0));
    CHECK(g.points(399, 0) == doctest::Approx(-93.0));
    CHECK(g.points(399, 1) == doctest::Approx(31.0));
    CHECK(g.atm_level == 3);
    CHECK(g.wx_level == 4);  // 29,000 ft closest to 30,000
  }
  SUBCASE("course pi/2: the (0,-1) offset rotates to (+1,0)") {
    auto g = generate_grid(point_with_course(-95, 30, 30000, 0, M_PI / 2), params, atm, wx);
    CHECK(g.points(0, 0) == doctest::Approx(-94.0));
    CHECK(g.points(0, 1) == doctest::Approx(30.0));
  }
  SUBCASE("rotation is an isometry of the lattice") {
    auto a = generate_grid(point_with_course(-95, 30, 30000, 0, 0.0), params, atm, wx);
    auto b = generate_grid(point_with_course(-95, 30, 30000, 0, 1.234), params, atm, wx);
    for (int k : {0, 37, 201, 399}) {
      double da = std::hypot(a.points(k, 0) - a.points(0, 0), a.points(k, 1) - a.points(0, 1));
      double db = std::hypot(b.points(k, 0) - b.points(0, 0), b.points(k, 1) - b.points(0, 1));
      CHECK(da == doctest::Approx(db).epsilon(1e-9));
    }
  }
  SUBCASE("missing course is an error") {
    TrackPoint p;
    p.lon = -95;
    p.lat = 30;
    CHECK_THROWS_AS(generate_grid(p, params, atm, wx), Error);
  }
  SUBCASE("batch returns one grid per point with the right shape") {
    std::vector<TrackPoint> pts(7, point_with_course(-95, 30, 30000, 0, 0.5));
    auto grids = generate_grids(pts, params, atm, wx);
    REQUIRE(grids.size() == 7);
    for (const auto& g : grids) CHECK(g.points.rows() == 400);
  }
}

TEST_CASE("k-d tree equals the brute-force oracle, including ties") {
  SUBCASE("four-point example") {
    std::vector<LonLat> pts{{0, 0}, {1, 0}, {0, 1}, {1, 1}};
    KdTree2D tree(pts);
    CHECK(tree.nearest(0.4, 0.4) == 0);
    CHECK(tree.nearest(1.0, 1.0) == 3);
    // exact midpoint: ties resolve to the smallest index
    CHECK(tree.nearest(0.5, 0.0) == 0);
  }
  SUBCASE("randomized instances vs oracle") {
    Rng rng(99);
    for (int rep = 0; rep < 8; ++rep) {
      int n = 200 + rng.uniform_int(3000);
      std::vector<LonLat> pts;
      pts.reserve(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) pts.push_back({rng.uniform(-30, 0), rng.uniform(20, 50)});
      // sprinkle duplicates to stress the tie rule
      for (int i = 0; i < n / 20; ++i)
        pts[static_cast<std::size_t>(rng.uniform_int(n))] =
            pts[static_cast<std::size_t>(rng.uniform_int(n))];
      KdTree2D tree(pts);
      for (int q = 0; q < 300; ++q) {
        double lon = rng.uniform(-31, 1), lat = rng.uniform(19, 51);
        CHECK(tree.nearest(lon, lat) == KdTree2D::nearest_brute_force(pts, lon, lat));
      }
      // queries placed exactly on points
      for (int q = 0; q < 50; ++q) {
        const auto& p = pts[static_cast<std::size_t>(rng.uniform_int(n))];
        int got = tree.nearest(p.lon, p.lat);
        CHECK(got == KdTree2D::nearest_brute_force(pts, p.lon, p.lat));
      }
    }
  }
}

TEST_CASE("time index nearest-within-bound") {
  TimeIndex idx({0, 21600});
  CHECK(idx.nearest_within(3600, 3600) == 0);
  CHECK(idx.nearest_within(20000, 3600) == 1);
  CHECK(idx.nearest_within(10000, 3600) == -1);
  CHECK(idx.nearest_within(10800, 1e9) == 0);  // equidistant -> earlier time
}

TEST_CASE("atmospheric matching") {
  WeatherStore s = tiny_store(7.0);
  MatchIndex idx = build_index(s);
  AltitudeTable atm = s.atm_levels;
  auto grid = generate_grid(point_with_course(-95, 30, 31000, 1800, 0.3), GridParams{}, s.atm_levels,
                            s.wx_levels);

  SUBCASE("uniform field fills the channel") {
    Eigen::MatrixXd u, v, temp;
    bool missing = true;
    match_atmospheric(grid, s, idx, MatchParams{}, u, v, temp, missing);
    CHECK_FALSE(missing);
    CHECK(u.minCoeff() == doctest::Approx(7.0));
    CHECK(u.maxCoeff() == doctest::Approx(7.0));
    CHECK(temp(3, 5) == doctest::Approx(220.0));
  }
  SUBCASE("no time within the bound: zero fill + missing flag") {
    auto far = grid;
    far.t_s = 7200 + 4000;
    Eigen::MatrixXd u, v, temp;
    bool missing = false;
    match_atmospheric(far, s, idx, MatchParams{}, u, v, temp, missing);
    CHECK(missing);
    CHECK(u.cwiseAbs().maxCoeff() == 0.0);
  }
  SUBCASE("nearest time wins") {
    WeatherStore s2 = tiny_store();
    s2.atm_times_s = {0, 21600};
    std::size_t an = 2 * s2.atm_levels.levels_ft.size() * s2.n();
    s2.u.assign(an, 0.0f);
    s2.v.assign(an, 0.0f);
    s2.temp.assign(an, 0.0f);
    for (std::size_t l = 0; l < s2.atm_levels.levels_ft.size(); ++l)
      for (std::size_t p = 0; p < s2.n(); ++p) {
        s2.u[s2.atm_index(0, l, p)] = 1.0f;
        s2.u[s2.atm_index(1, l, p)] = 2.0f;
      }
    MatchIndex idx2 = build_index(s2);
    auto g2 = grid;
    g2.t_s = 3600;  // |3600-0| < |3600-21600|
    Eigen::MatrixXd u, v, temp;
    bool missing = false;
    match_atmospheric(g2, s2, idx2, MatchParams{}, u, v, temp, missing);
    CHECK_FALSE(missing);
    CHECK(u(0, 0) == doctest::Approx(1.0));
  }
}

TEST_CASE("convective matching ORs levels inside the altitude buffer") {
  WeatherStore s = tiny_store();
  MatchIndex idx = build_index(s);
  auto grid = generate_grid(point_with_course(-95, 30, 35000, 0, 0.0), GridParams{}, s.atm_levels,
                            s.wx_levels);
  REQUIRE(grid.wx_level == 5);  // 35,000 ft

  // storms at two different in-buffer levels land on well-separated grid
  // cells; a third storm sits 25,000 ft above the buffer
  int cell_a = grid.ny / 2 * grid.nx + 3;
  int cell_b = grid.ny / 2 * grid.nx + 16;
  int cell_c = 5 * grid.nx + 10;
  int pa = idx.spatial.nearest(grid.points(cell_a, 0), grid.points(cell_a, 1));
  int pb = idx.spatial.nearest(grid.points(cell_b, 0), grid.points(cell_b, 1));
  int pc = idx.spatial.nearest(grid.points(cell_c, 0), grid.points(cell_c, 1));
  REQUIRE(pa != pb);
  REQUIRE(pc != pa);
  REQUIRE(pc != pb);
  // levels 4 = 29,000 and 7 = 45,000 are inside 35k +/- 20k; 10 = 60,000 is not
  s.wx[s.wx_index(0, 4, static_cast<std::size_t>(pa))] = 1;
  s.wx[s.wx_index(0, 7, static_cast<std::size_t>(pb))] = 1;
  s.wx[s.wx_index(0, 10, static_cast<std::size_t>(pc))] = 1;

  bool missing = true;
  auto conv = match_convective(grid, s, idx, MatchParams{}, missing);
  CHECK_FALSE(missing);
  CHECK(conv(grid.ny / 2, 3) == 1.0);   // OR overlay sees both in-buffer levels
  CHECK(conv(grid.ny / 2, 16) == 1.0);
  CHECK(conv(5, 10) == 0.0);  // storm 25,000 ft above the buffer is excluded

  SUBCASE("no storms -> all zero") {
    WeatherStore clean = tiny_store();
    MatchIndex ci = build_index(clean);
    bool m = true;
    auto c = match_convective(grid, clean, ci, MatchParams{}, m);
    CHECK(c.sum() == 0.0);
  }
}

TEST_CASE("assemble_cube stacks channels and applies normalization policy") {
  WeatherStore s = tiny_store(7.0);
  MatchIndex idx = build_index(s);
  auto grid = generate_grid(point_with_course(-95, 30, 30000, 0, 0.0), GridParams{}, s.atm_levels,
                            s.wx_levels);

  FeatureCube cube = assemble_cube(grid, s, idx);
  CHECK(cube.nx() == 20);
  CHECK(cube.ny() == 20);
  CHECK(cube.channel[2](0, 0) == doctest::Approx(7.0));
  for (int c = 0; c < 4; ++c) CHECK_FALSE(cube.missing[static_cast<std::size_t>(c)]);

  SUBCASE("normalizer applies to channels 1..3 only") {
    Normalizer n;
    n.wx_mean = {220.0, 7.0, -3.0};
    n.wx_std = {10.0, 2.0, 1.0};
    FeatureCube z = assemble_cube(grid, s, idx, MatchParams{}, &n);
    CHECK(z.channel[1](0, 0) == doctest::Approx(0.0));
    CHECK(z.channel[2](0, 0) == doctest::Approx(0.0));
    CHECK(z.channel[0].sum() == 0.0);  // convective untouched
  }
  SUBCASE("fully missing window produces zero cube with flags") {
    auto far = grid;
    far.t_s = 1e9;
    FeatureCube z = assemble_cube(far, s, idx);
    for (int c = 0; c < 4; ++c) {
      CHECK(z.missing[static_cast<std::size_t>(c)]);
      CHECK(z.channel[static_cast<std::size_t>(c)].cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("batch and recursive modes are bitwise identical") {
  SynthConfig cfg;
  cfg.n_flights = 22;
  cfg.grid_nlon = 41;
  cfg.grid_nlat = 41;
  cfg.seed = 314;
  WeatherStore store = gen_weather(cfg);
  MatchIndex idx = build_index(store);
  SynthCorpus corpus = gen_flights(cfg, store);
  REQUIRE(corpus.train.size() + corpus.eval.size() >= 20);

  GridParams gp;
  MatchParams mp;
  int checked = 0;
  for (const auto& f : corpus.train) {
    if (checked >= 20) break;
    auto grids = generate_grids(f.track, gp, store.atm_levels, store.wx_levels);
    auto batch = assemble_cubes(grids, store, idx, mp, nullptr);
    for (std::size_t t = 0; t < f.track.size(); ++t) {
      auto grid = generate_grid(f.track[t], gp, store.atm_levels, store.wx_levels);
      FeatureCube rec = assemble_cube(grid, store, idx, mp, nullptr);
      REQUIRE(grid.points == grids[t].points);  // bitwise: same kernel
      for (int c = 0; c < 4; ++c) {
        REQUIRE(std::memcmp(rec.channel[static_cast<std::size_t>(c)].data(),
                            batch[t].channel[static_cast<std::size_t>(c)].data(),
                            sizeof(double) * 400) == 0);
      }
      REQUIRE(rec.missing == batch[t].missing);
    }
    ++checked;
  }
  CHECK(checked == 20);
}

TEST_CASE("store save/load round trip") {
  WeatherStore s = tiny_store(5.5);
  s.wx[s.wx_index(1, 3, 77)] = 1;
  auto dir = std::filesystem::temp_directory_path() / "atp_store_test";
  std::filesystem::remove_all(dir);
  s.save(dir.string());
  WeatherStore r = WeatherStore::load(dir.string());
  CHECK(r.n() == s.n());
  CHECK(r.atm_times_s == s.atm_times_s);
  CHECK(r.u == s.u);
  CHECK(r.wx == s.wx);
  CHECK(r.wx_levels.levels_ft == s.wx_levels.levels_ft);
  std::filesystem::remove_all(dir);
}

TEST_CASE("indexed matching is much faster than brute force at scale"
          * doctest::skip(false)) {
  // Desk-scale benchmark, not a correctness gate (the acceptance suite runs
  // the full-size version).
  Rng rng(123);
  int n = 30000, q = 2000;
  std::vector<LonLat> pts;
  pts.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) pts.push_back({rng.uniform(-130, -64), rng.uniform(22, 52)});
  KdTree2D tree(pts);

  std::vector<LonLat> queries;
  for (int i = 0; i < q; ++i) queries.push_back({rng.uniform(-130, -64), rng.uniform(22, 52)});

  auto t0 = std::chrono::steady_clock::now();
  long long acc1 = 0;
  for (const auto& query : queries) acc1 += tree.nearest(query.lon, query.lat);
  auto t1 = std::chrono::steady_clock::now();
  long long acc2 = 0;
  for (const auto& query : queries)
    acc2 += KdTree2D::nearest_brute_force(pts, query.lon, query.lat);
  auto t2 = std::chrono::steady_clock::now();
  REQUIRE(acc1 == acc2);
  auto indexed = std::chrono::duration<double>(t1 - t0).count();
  auto brute = std::chrono::duration<double>(t2 - t1).count();
  CHECK(brute > 3.0 * indexed);
}

TEST_CASE("cube set file round trip") {
  CubeSet set;
  set.nx = 4;
  set.ny = 3;
  Rng rng(17);
  set.ids = {"A", "B"};
  set.cubes.resize(2);
  for (auto& per_flight : set.cubes) {
    for (int t = 0; t < 5; ++t) {
      FeatureCube c;
      for (int ch = 0; ch < 4; ++ch) {
        c.channel[static_cast<std::size_t>(ch)].resize(3, 4);
        for (int p = 0; p < 3; ++p)
          for (int q = 0; q < 4; ++q)
            c.channel[static_cast<std::size_t>(ch)](p, q) =
                ch == 0 ? (rng.uniform() < 0.5 ? 0.0 : 1.0) : rng.normal();
      }
      c.missing[1] = t == 2;
      per_flight.push_back(std::move(c));
    }
  }
  auto dir = std::filesystem::temp_directory_path() / "atp_cubes_test";
  std::filesystem::remove_all(dir);
  write_cube_set(dir.string(), set);
  CubeSet r = read_cube_set(dir.string());
  REQUIRE(r.ids == set.ids);
  REQUIRE(r.cubes[1].size() == 5);
  CHECK(r.cubes[1][2].missing[1]);
  // float32 round trip
  CHECK(r.cubes[0][0].channel[1](1, 2) ==
        doctest::Approx(set.cubes[0][0].channel[1](1, 2)).epsilon(1e-6));
  std::filesystem::remove_all(dir);
}
