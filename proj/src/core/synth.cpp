#include "core/synth.hpp"

#include <cmath>
#include <iostream>

#include "core/rng.hpp"

namespace atp {

namespace {

constexpr double kKtsToDegPerSec = 1.0 / 216000.0;  // 1 kt ~ 1/60 deg/hr

struct Mode {
  double kx, ky, omega, phase, amp;
};

struct FieldModes {
  std::vector<Mode> u, v, temp;
};

std::vector<Mode> draw_modes(Rng& rng, int count, double amp, double length_deg, double time_s) {
  std::vector<Mode> modes;
  modes.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    Mode m;
    double ang = rng.uniform(0.0, 2.0 * M_PI);
    double wl = length_deg * rng.uniform(0.8, 2.5);
    m.kx = 2.0 * M_PI * std::cos(ang) / wl;
    m.ky = 2.0 * M_PI * std::sin(ang) / wl;
    m.omega = 2.0 * M_PI / (time_s * rng.uniform(0.8, 1.6));
    m.phase = rng.uniform(0.0, 2.0 * M_PI);
    m.amp = amp * rng.uniform(0.5, 1.0) / std::sqrt(static_cast<double>(count));
    modes.push_back(m);
  }
  return modes;
}

FieldModes make_modes(const SynthConfig& cfg) {
  FieldModes f;
  Rng rng = Rng::derive(cfg.seed, 0x11);
  f.u = draw_modes(rng, cfg.wind_modes, cfg.wind_amp_kts, cfg.wind_length_scale_deg,
                   cfg.wind_time_scale_s);
  f.v = draw_modes(rng, cfg.wind_modes, cfg.wind_amp_kts, cfg.wind_length_scale_deg,
                   cfg.wind_time_scale_s);
  f.temp = draw_modes(rng, cfg.wind_modes, cfg.temp_amp_k, cfg.wind_length_scale_deg * 1.5,
                      cfg.wind_time_scale_s);
  return f;
}

double eval_modes(const std::vector<Mode>& modes, double lon, double lat, double t) {
  double s = 0.0;
  for (const auto& m : modes) s += m.amp * std::sin(m.kx * lon + m.ky * lat + m.omega * t + m.phase);
  return s;
}

double alt_wind_factor(double alt_ft) {
  return 0.3 + 0.7 * std::min(alt_ft / 36000.0, 1.0);
}

struct Cell {
  double lon0, lat0;       // center at t = 0
  double dlon, dlat;       // drift, degrees/second
  double radius;
  double base_ft, top_ft;
};

std::vector<Cell> make_cells(const SynthConfig& cfg) {
  double area = (cfg.lon1 - cfg.lon0) * (cfg.lat1 - cfg.lat0);
  double cell_area = M_PI * cfg.cell_radius_deg * cfg.cell_radius_deg;
  int n = static_cast<int>(std::lround(cfg.convective_coverage * area / cell_area));
  std::vector<Cell> cells;
  if (n <= 0) return cells;
  Rng rng = Rng::derive(cfg.seed, 0x22);
  // keep the terminal areas clear so every flight can reach its boxes
  auto near_terminal = [&](double lon, double lat) {
    return std::hypot(lon - cfg.origin_lon, lat - cfg.origin_lat) < 2.2 ||
           std::hypot(lon - cfg.dest_lon, lat - cfg.dest_lat) < 2.2;
  };
  for (int i = 0; i < n; ++i) {
    Cell c;
    c.lon0 = cfg.lon0;
    c.lat0 = cfg.lat0;
    for (int attempt = 0; attempt < 32; ++attempt) {
      if (rng.uniform() < cfg.corridor_cell_frac) {
        double s = rng.uniform(0.2, 0.8);
        c.lon0 = cfg.origin_lon + s * (cfg.dest_lon - cfg.origin_lon) + 0.6 * rng.normal();
        c.lat0 = cfg.origin_lat + s * (cfg.dest_lat - cfg.origin_lat) + 0.6 * rng.normal();
      } else {
        c.lon0 = rng.uniform(cfg.lon0, cfg.lon1);
        c.lat0 = rng.uniform(cfg.lat0, cfg.lat1);
      }
      if (!near_terminal(c.lon0, c.lat0)) break;
    }
    double ang = rng.uniform(0.0, 2.0 * M_PI);
    c.dlon = cfg.cell_drift_dps * std::cos(ang);
    c.dlat = cfg.cell_drift_dps * std::sin(ang);
    c.radius = cfg.cell_radius_deg * rng.uniform(0.7, 1.3);
    c.base_ft = cfg.cell_base_ft;
    c.top_ft = cfg.cell_top_ft;
    cells.push_back(c);
  }
  return cells;
}

}  // namespace

void SynthConfig::validate() const {
  if (grid_nlon < 4 || grid_nlat < 4) throw data_error("synth config: resolution must be >= 4x4");
  if (convective_coverage < 0.0 || convective_coverage >= 1.0)
    throw data_error("synth config: coverage target outside [0,1)");
  if (lon1 <= lon0 || lat1 <= lat0) throw data_error("synth config: empty grid extent");
  if (n_flights < 1) throw data_error("synth config: need at least one flight");
  if (split_frac <= 0.0 || split_frac >= 1.0) throw data_error("synth config: bad split fraction");
  if (speed_kts <= 0 || track_dt_s <= 0) throw data_error("synth config: bad flight dynamics");
}

nlohmann::json SynthConfig::to_json() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["grid"] = {{"lon0", lon0}, {"lat0", lat0}, {"lon1", lon1}, {"lat1", lat1},
               {"nlon", grid_nlon}, {"nlat", grid_nlat}};
  j["levels"] = {{"atm_ft", atm_levels_ft}, {"wx_ft", wx_levels_ft}};
  j["time"] = {{"span_s", time_span_s}, {"atm_cadence_s", atm_cadence_s},
               {"wx_cadence_s", wx_cadence_s}};
  j["wind"] = {{"modes", wind_modes}, {"amp_kts", wind_amp_kts},
               {"length_scale_deg", wind_length_scale_deg}, {"time_scale_s", wind_time_scale_s}};
  j["temperature"] = {{"base_k", temp_base_k}, {"lapse_k_per_kft", temp_lapse_k_per_kft},
                      {"amp_k", temp_amp_k}};
  j["convection"] = {{"coverage", convective_coverage}, {"cell_radius_deg", cell_radius_deg},
                     {"drift_dps", cell_drift_dps}, {"base_ft", cell_base_ft},
                     {"top_ft", cell_top_ft}, {"corridor_frac", corridor_cell_frac}};
  j["flights"] = {{"count", n_flights}, {"origin", {origin_lon, origin_lat}},
                  {"dest", {dest_lon, dest_lat}}, {"speed_kts", speed_kts},
                  {"speed_jitter_frac", speed_jitter_frac},
                  {"waypoint_every_deg", waypoint_every_deg},
                  {"waypoint_jitter_deg", waypoint_jitter_deg}, {"avoid_gain", avoid_gain},
                  {"capture_radius_deg", capture_radius_deg}, {"cruise_alt_ft", cruise_alt_ft},
                  {"cruise_alt_jitter_ft", cruise_alt_jitter_ft},
                  {"climb_rate_fpm", climb_rate_fpm}, {"descent_rate_fpm", descent_rate_fpm},
                  {"track_dt_s", track_dt_s}, {"min_track_len", min_track_len},
                  {"max_track_len", max_track_len}, {"split_frac", split_frac}};
  return j;
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
  SynthConfig c;
  static const char* known[] = {"seed", "grid", "levels", "time", "wind", "temperature",
                                "convection", "flights"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || (it.key() == k);
    if (!ok) throw data_error("synth config: unknown key '" + it.key() + "'");
  }
  c.seed = j.value("seed", c.seed);
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    c.lon0 = g.value("lon0", c.lon0);
    c.lat0 = g.value("lat0", c.lat0);
    c.lon1 = g.value("lon1", c.lon1);
    c.lat1 = g.value("lat1", c.lat1);
    c.grid_nlon = g.value("nlon", c.grid_nlon);
    c.grid_nlat = g.value("nlat", c.grid_nlat);
  }
  if (j.contains("levels")) {
    const auto& g = j.at("levels");
    if (g.contains("atm_ft")) c.atm_levels_ft = g.at("atm_ft").get<std::vector<double>>();
    if (g.contains("wx_ft")) c.wx_levels_ft = g.at("wx_ft").get<std::vector<double>>();
  }
  if (j.contains("time")) {
    const auto& g = j.at("time");
    c.time_span_s = g.value("span_s", c.time_span_s);
    c.atm_cadence_s = g.value("atm_cadence_s", c.atm_cadence_s);
    c.wx_cadence_s = g.value("wx_cadence_s", c.wx_cadence_s);
  }
  if (j.contains("wind")) {
    const auto& g = j.at("wind");
    c.wind_modes = g.value("modes", c.wind_modes);
    c.wind_amp_kts = g.value("amp_kts", c.wind_amp_kts);
    c.wind_length_scale_deg = g.value("length_scale_deg", c.wind_length_scale_deg);
    c.wind_time_scale_s = g.value("time_scale_s", c.wind_time_scale_s);
  }
  if (j.contains("temperature")) {
    const auto& g = j.at("temperature");
    c.temp_base_k = g.value("base_k", c.temp_base_k);
    c.temp_lapse_k_per_kft = g.value("lapse_k_per_kft", c.temp_lapse_k_per_kft);
    c.temp_amp_k = g.value("amp_k", c.temp_amp_k);
  }
  if (j.contains("convection")) {
    const auto& g = j.at("convection");
    c.convective_coverage = g.value("coverage", c.convective_coverage);
    c.cell_radius_deg = g.value("cell_radius_deg", c.cell_radius_deg);
    c.cell_drift_dps = g.value("drift_dps", c.cell_drift_dps);
    c.cell_base_ft = g.value("base_ft", c.cell_base_ft);
    c.cell_top_ft = g.value("top_ft", c.cell_top_ft);
    c.corridor_cell_frac = g.value("corridor_frac", c.corridor_cell_frac);
  }
  if (j.contains("flights")) {
    const auto& g = j.at("flights");
    c.n_flights = g.value("count", c.n_flights);
    if (g.contains("origin")) {
      c.origin_lon = g.at("origin").at(0).get<double>();
      c.origin_lat = g.at("origin").at(1).get<double>();
    }
    if (g.contains("dest")) {
      c.dest_lon = g.at("dest").at(0).get<double>();
      c.dest_lat = g.at("dest").at(1).get<double>();
    }
    c.speed_kts = g.value("speed_kts", c.speed_kts);
    c.speed_jitter_frac = g.value("speed_jitter_frac", c.speed_jitter_frac);
    c.waypoint_every_deg = g.value("waypoint_every_deg", c.waypoint_every_deg);
    c.waypoint_jitter_deg = g.value("waypoint_jitter_deg", c.waypoint_jitter_deg);
    c.avoid_gain = g.value("avoid_gain", c.avoid_gain);
    c.capture_radius_deg = g.value("capture_radius_deg", c.capture_radius_deg);
    c.cruise_alt_ft = g.value("cruise_alt_ft", c.cruise_alt_ft);
    c.cruise_alt_jitter_ft = g.value("cruise_alt_jitter_ft", c.cruise_alt_jitter_ft);
    c.climb_rate_fpm = g.value("climb_rate_fpm", c.climb_rate_fpm);
    c.descent_rate_fpm = g.value("descent_rate_fpm", c.descent_rate_fpm);
    c.track_dt_s = g.value("track_dt_s", c.track_dt_s);
    c.min_track_len = g.value("min_track_len", c.min_track_len);
    c.max_track_len = g.value("max_track_len", c.max_track_len);
    c.split_frac = g.value("split_frac", c.split_frac);
  }
  c.validate();
  return c;
}

void wind_at(const SynthConfig& cfg, double lon, double lat, double alt_ft, double t_s,
             double& u_kts, double& v_kts) {
  FieldModes modes = make_modes(cfg);
  double f = alt_wind_factor(alt_ft);
  u_kts = f * eval_modes(modes.u, lon, lat, t_s);
  v_kts = f * eval_modes(modes.v, lon, lat, t_s);
}

WeatherStore gen_weather(const SynthConfig& cfg) {
  cfg.validate();
  WeatherStore s;
  s.baseline_time = "2013-01-01T00:00Z";
  double dlon = (cfg.lon1 - cfg.lon0) / (cfg.grid_nlon - 1);
  double dlat = (cfg.lat1 - cfg.lat0) / (cfg.grid_nlat - 1);
  for (int iy = 0; iy < cfg.grid_nlat; ++iy)
    for (int ix = 0; ix < cfg.grid_nlon; ++ix)
      s.georef.points.push_back({cfg.lon0 + ix * dlon, cfg.lat0 + iy * dlat});

  s.atm_levels.kind = AltitudeTable::Kind::Atmospheric;
  s.atm_levels.levels_ft = cfg.atm_levels_ft;
  s.wx_levels = AltitudeTable::convective_default();
  if (!cfg.wx_levels_ft.empty()) s.wx_levels.levels_ft = cfg.wx_levels_ft;

  for (double t = 0.0; t <= cfg.time_span_s + 1e-9; t += cfg.atm_cadence_s) s.atm_times_s.push_back(t);
  for (double t = 0.0; t <= cfg.time_span_s + 1e-9; t += cfg.wx_cadence_s) s.wx_times_s.push_back(t);

  const std::size_t n = s.n();
  const std::size_t n_atm_levels = s.atm_levels.levels_ft.size();
  const std::size_t n_wx_levels = s.wx_levels.levels_ft.size();
  s.u.resize(s.atm_times_s.size() * n_atm_levels * n);
  s.v.resize(s.u.size());
  s.temp.resize(s.u.size());
  s.wx.assign(s.wx_times_s.size() * n_wx_levels * n, 0);

  FieldModes modes = make_modes(cfg);
  for (std::size_t ti = 0; ti < s.atm_times_s.size(); ++ti) {
    double t = s.atm_times_s[ti];
    for (std::size_t li = 0; li < n_atm_levels; ++li) {
      double alt = s.atm_levels.levels_ft[li];
      double f = alt_wind_factor(alt);
      double lapse = cfg.temp_base_k - cfg.temp_lapse_k_per_kft * alt / 1000.0;
      for (std::size_t p = 0; p < n; ++p) {
        const auto& pt = s.georef.points[p];
        std::size_t at = s.atm_index(ti, li, p);
        s.u[at] = static_cast<float>(f * eval_modes(modes.u, pt.lon, pt.lat, t));
        s.v[at] = static_cast<float>(f * eval_modes(modes.v, pt.lon, pt.lat, t));
        s.temp[at] = static_cast<float>(lapse + eval_modes(modes.temp, pt.lon, pt.lat, t));
      }
    }
  }

  auto cells = make_cells(cfg);
  for (std::size_t ti = 0; ti < s.wx_times_s.size(); ++ti) {
    double t = s.wx_times_s[ti];
    for (const auto& cell : cells) {
      double clon = cell.lon0 + cell.dlon * t;
      double clat = cell.lat0 + cell.dlat * t;
      int ix0 = std::max(0, static_cast<int>(std::floor((clon - cell.radius - cfg.lon0) / dlon)));
      int ix1 = std::min(cfg.grid_nlon - 1,
                         static_cast<int>(std::ceil((clon + cell.radius - cfg.lon0) / dlon)));
      int iy0 = std::max(0, static_cast<int>(std::floor((clat - cell.radius - cfg.lat0) / dlat)));
      int iy1 = std::min(cfg.grid_nlat - 1,
                         static_cast<int>(std::ceil((clat + cell.radius - cfg.lat0) / dlat)));
      for (std::size_t li = 0; li < n_wx_levels; ++li) {
        double alt = s.wx_levels.levels_ft[li];
        if (alt < cell.base_ft || alt > cell.top_ft) continue;
        for (int iy = iy0; iy <= iy1; ++iy) {
          for (int ix = ix0; ix <= ix1; ++ix) {
            const std::size_t p = static_cast<std::size_t>(iy) * cfg.grid_nlon +
                                  static_cast<std::size_t>(ix);
            double dx = s.georef.points[p].lon - clon;
            double dy = s.georef.points[p].lat - clat;
            if (dx * dx + dy * dy <= cell.radius * cell.radius) s.wx[s.wx_index(ti, li, p)] = 1;
          }
        }
      }
    }
  }
  s.validate();
  return s;
}

SynthCorpus gen_flights(const SynthConfig& cfg, const WeatherStore& store) {
  cfg.validate();
  (void)store;
  SynthCorpus corpus;
  std::vector<Flight> accepted;
  auto cells = make_cells(cfg);
  FieldModes modes = make_modes(cfg);

  const double corridor_len = std::hypot(cfg.dest_lon - cfg.origin_lon,
                                         cfg.dest_lat - cfg.origin_lat);
  const double est_duration_s = corridor_len / (cfg.speed_kts * kKtsToDegPerSec);
  TerminalBoxes boxes{{cfg.origin_lon, cfg.origin_lat}, {cfg.dest_lon, cfg.dest_lat}};

  for (int fi = 0; fi < cfg.n_flights; ++fi) {
    Rng rng = Rng::derive(cfg.seed, 1000 + static_cast<std::uint64_t>(fi));
    Flight fl;
    fl.id = "F" + std::to_string(fi);

    double t0_max = std::max(0.0, cfg.time_span_s - 1.8 * est_duration_s);
    double t0 = rng.uniform(0.0, t0_max);
    double speed = cfg.speed_kts * (1.0 + cfg.speed_jitter_frac * (2.0 * rng.uniform() - 1.0));
    double speed_dgs = speed * kKtsToDegPerSec;
    double cruise = cfg.cruise_alt_ft + cfg.cruise_alt_jitter_ft * (2.0 * rng.uniform() - 1.0);

    // Plan: jittered waypoints along the corridor.
    double ux = (cfg.dest_lon - cfg.origin_lon) / corridor_len;
    double uy = (cfg.dest_lat - cfg.origin_lat) / corridor_len;
    int n_wp = std::max(2, static_cast<int>(std::ceil(corridor_len / cfg.waypoint_every_deg)) + 1);
    fl.plan.waypoints.push_back({cfg.origin_lon, cfg.origin_lat});
    for (int w = 1; w + 1 < n_wp; ++w) {
      double s = corridor_len * w / (n_wp - 1);
      double off = cfg.waypoint_jitter_deg * rng.normal();
      fl.plan.waypoints.push_back({cfg.origin_lon + s * ux - off * uy,
                                   cfg.origin_lat + s * uy + off * ux});
    }
    fl.plan.waypoints.push_back({cfg.dest_lon, cfg.dest_lat});

    // Track: plan-following point mass with wind drift and storm avoidance.
    double plon = cfg.origin_lon + 0.05 * rng.normal();
    double plat = cfg.origin_lat + 0.05 * rng.normal();
    double t = t0;
    std::size_t wp = 1;
    bool done = false;
    for (int step = 0; step < cfg.max_track_len; ++step) {
      double elapsed = t - t0;
      double dist_to_go = std::hypot(cfg.dest_lon - plon, cfg.dest_lat - plat);
      double time_to_go_min = dist_to_go / speed_dgs / 60.0;
      double alt = std::min({cruise, cfg.climb_rate_fpm * elapsed / 60.0,
                             cfg.descent_rate_fpm * time_to_go_min});
      alt = std::max(alt, 0.0);
      fl.track.push_back({plon, plat, alt, t});

      // capture the next waypoint by proximity, or skip it once it falls
      // behind the along-corridor progress (avoidance can deflect wide)
      double s_p = (plon - cfg.origin_lon) * ux + (plat - cfg.origin_lat) * uy;
      while (wp < fl.plan.waypoints.size()) {
        double dwx = fl.plan.waypoints[wp].lon - plon;
        double dwy = fl.plan.waypoints[wp].lat - plat;
        bool captured = std::hypot(dwx, dwy) <= cfg.capture_radius_deg;
        bool passed = false;
        if (wp + 1 < fl.plan.waypoints.size()) {
          double s_wp = (fl.plan.waypoints[wp].lon - cfg.origin_lon) * ux +
                        (fl.plan.waypoints[wp].lat - cfg.origin_lat) * uy;
          passed = s_p > s_wp + 0.05;
        }
        if (!captured && !passed) break;
        ++wp;
        if (captured && wp >= fl.plan.waypoints.size()) break;
      }
      if (wp >= fl.plan.waypoints.size()) {
        done = true;
        break;
      }

      double dx = fl.plan.waypoints[wp].lon - plon;
      double dy = fl.plan.waypoints[wp].lat - plat;
      double d = std::hypot(dx, dy);
      double vx = speed_dgs * dx / d;
      double vy = speed_dgs * dy / d;

      double wf = alt_wind_factor(alt);
      vx += wf * eval_modes(modes.u, plon, plat, t) * kKtsToDegPerSec;
      vy += wf * eval_modes(modes.v, plon, plat, t) * kKtsToDegPerSec;

      double ax = 0.0, ay = 0.0;
      for (const auto& cell : cells) {
        if (alt < cell.base_ft || alt > cell.top_ft) continue;
        double clon = cell.lon0 + cell.dlon * t;
        double clat = cell.lat0 + cell.dlat * t;
        double rx = plon - clon, ry = plat - clat;
        double cd = std::hypot(rx, ry);
        double reach = 2.5 * cell.radius;
        if (cd < 1e-9 || cd > reach) continue;
        double mag = cfg.avoid_gain * speed_dgs * (1.0 - cd / reach);
        ax += mag * rx / cd;
        ay += mag * ry / cd;
      }
      // cap the repulsion so forward progress never stalls
      double amag = std::hypot(ax, ay);
      double cap = 0.85 * speed_dgs;
      if (amag > cap) {
        ax *= cap / amag;
        ay *= cap / amag;
      }
      vx += ax;
      vy += ay;

      plon += vx * cfg.track_dt_s;
      plat += vy * cfg.track_dt_s;
      t += cfg.track_dt_s;
    }

    if (!done || static_cast<int>(fl.track.size()) < cfg.min_track_len) {
      ++corpus.dropped;
      std::cerr << "synth: dropped flight " << fl.id
                << (done ? " (too short)" : " (destination not reached)") << "\n";
      continue;
    }
    derive_kinematics(fl.track);
    auto clean = clean_trajectory(fl.track, boxes);
    if (!clean.accepted) {
      ++corpus.dropped;
      std::cerr << "synth: dropped flight " << fl.id << " (" << clean.reason << ")\n";
      continue;
    }
    accepted.push_back(std::move(fl));
  }

  std::size_t n_train = static_cast<std::size_t>(
      std::lround(cfg.split_frac * static_cast<double>(accepted.size())));
  n_train = std::min(std::max<std::size_t>(n_train, 1), accepted.size() - 1);
  for (std::size_t i = 0; i < accepted.size(); ++i) {
    if (i < n_train)
      corpus.train.push_back(std::move(accepted[i]));
    else
      corpus.eval.push_back(std::move(accepted[i]));
  }
  return corpus;
}

}  // namespace atp
