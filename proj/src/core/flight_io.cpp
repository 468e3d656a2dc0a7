#include "core/flight_io.hpp"

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

namespace atp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json flight_to_json(const Flight& f) {
  json plan = json::array();
  for (const auto& wp : f.plan.waypoints) plan.push_back({wp.lon, wp.lat});
  json track = json::array();
  for (const auto& p : f.track) track.push_back({p.lon, p.lat, p.alt_ft, p.t_s});
  return json{{"id", f.id}, {"plan", std::move(plan)}, {"track", std::move(track)}};
}

Flight flight_from_json(const json& j) {
  Flight f;
  f.id = j.at("id").get<std::string>();
  for (const auto& wp : j.at("plan"))
    f.plan.waypoints.push_back({wp.at(0).get<double>(), wp.at(1).get<double>()});
  for (const auto& p : j.at("track")) {
    TrackPoint tp;
    tp.lon = p.at(0).get<double>();
    tp.lat = p.at(1).get<double>();
    tp.alt_ft = p.at(2).get<double>();
    tp.t_s = p.at(3).get<double>();
    f.track.push_back(tp);
  }
  if (f.plan.waypoints.size() < 2) throw data_error("flight " + f.id + ": plan too short");
  if (f.track.size() < 2) throw data_error("flight " + f.id + ": track too short");
  for (std::size_t i = 1; i < f.track.size(); ++i)
    if (f.track[i].t_s <= f.track[i - 1].t_s)
      throw data_error("flight " + f.id + ": track times not strictly increasing");
  return f;
}

}  // namespace

std::vector<Flight> read_flights_jsonl(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw data_error("flights: cannot read " + path);
  std::vector<Flight> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(flight_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw data_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (out.empty()) throw data_error("flights: no records in " + path);
  return out;
}

void write_flights_jsonl(const std::string& path, const std::vector<Flight>& flights) {
  std::ofstream f(path);
  if (!f) throw data_error("flights: cannot write " + path);
  for (const auto& fl : flights) f << flight_to_json(fl).dump() << "\n";
}

void write_predictions_jsonl(const std::string& path, const std::vector<PredictionRecord>& recs) {
  std::ofstream f(path);
  if (!f) throw data_error("predictions: cannot write " + path);
  for (const auto& r : recs) {
    json j = flight_to_json(r.flight);
    j["warmup"] = r.warmup;
    j["sigma3_h_nmi"] = r.sigma3_h_nmi;
    j["sigma3_v_ft"] = r.sigma3_v_ft;
    j["cum_loglik"] = r.cum_loglik;
    j["final_loglik"] = r.final_loglik;
    f << j.dump() << "\n";
  }
}

std::vector<PredictionRecord> read_predictions_jsonl(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw data_error("predictions: cannot read " + path);
  std::vector<PredictionRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      PredictionRecord r;
      r.flight = flight_from_json(j);
      r.warmup = j.value("warmup", 0);
      if (j.contains("sigma3_h_nmi")) r.sigma3_h_nmi = j.at("sigma3_h_nmi").get<std::vector<double>>();
      if (j.contains("sigma3_v_ft")) r.sigma3_v_ft = j.at("sigma3_v_ft").get<std::vector<double>>();
      if (j.contains("cum_loglik")) r.cum_loglik = j.at("cum_loglik").get<std::vector<double>>();
      r.final_loglik = j.value("final_loglik", 0.0);
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw data_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (out.empty()) throw data_error("predictions: no records in " + path);
  return out;
}

void write_predictions_geojson(const std::string& path, const std::vector<PredictionRecord>& recs) {
  json features = json::array();
  for (const auto& r : recs) {
    json coords = json::array();
    for (const auto& p : r.flight.track) coords.push_back({p.lon, p.lat, p.alt_ft});
    features.push_back(json{
        {"type", "Feature"},
        {"geometry", {{"type", "LineString"}, {"coordinates", std::move(coords)}}},
        {"properties",
         {{"id", r.flight.id}, {"warmup", r.warmup}, {"final_loglik", r.final_loglik}}}});
  }
  json fc{{"type", "FeatureCollection"}, {"features", std::move(features)}};
  std::ofstream f(path);
  if (!f) throw data_error("geojson: cannot write " + path);
  f << fc.dump(1) << "\n";
}

void write_cube_set(const std::string& dir, const CubeSet& set) {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = "atp-cubes-v1";
  manifest["nx"] = set.nx;
  manifest["ny"] = set.ny;
  manifest["channels"] = 4;
  manifest["payload"] = "cubes.f32";
  manifest["missing"] = "missing.u8";
  json flights = json::array();

  std::ofstream bin(fs::path(dir) / "cubes.f32", std::ios::binary);
  std::ofstream miss(fs::path(dir) / "missing.u8", std::ios::binary);
  if (!bin || !miss) throw data_error("cubes: cannot write payload in " + dir);
  std::size_t offset = 0;
  for (std::size_t i = 0; i < set.cubes.size(); ++i) {
    flights.push_back(
        {{"id", set.ids[i]}, {"count", set.cubes[i].size()}, {"offset", offset}});
    for (const auto& cube : set.cubes[i]) {
      for (int c = 0; c < 4; ++c) {
        for (int p = 0; p < set.ny; ++p) {
          for (int q = 0; q < set.nx; ++q) {
            float v = static_cast<float>(cube.channel[static_cast<std::size_t>(c)](p, q));
            bin.write(reinterpret_cast<const char*>(&v), sizeof(float));
          }
        }
        std::uint8_t m = cube.missing[static_cast<std::size_t>(c)] ? 1 : 0;
        miss.write(reinterpret_cast<const char*>(&m), 1);
      }
      offset += 1;
    }
  }
  manifest["flights"] = std::move(flights);
  std::ofstream f(fs::path(dir) / "cubes_manifest.json");
  if (!f) throw data_error("cubes: cannot write manifest in " + dir);
  f << manifest.dump(1) << "\n";
}

CubeSet read_cube_set(const std::string& dir_or_manifest) {
  fs::path base(dir_or_manifest);
  fs::path manifest_path = fs::is_directory(base) ? base / "cubes_manifest.json" : base;
  fs::path dir = manifest_path.parent_path();
  std::ifstream f(manifest_path);
  if (!f) throw data_error("cubes: cannot read " + manifest_path.string());
  json m;
  try {
    f >> m;
  } catch (const json::exception& e) {
    throw data_error(std::string("cubes: bad manifest: ") + e.what());
  }
  if (m.value("format", "") != "atp-cubes-v1") throw data_error("cubes: unknown manifest format");

  CubeSet set;
  set.nx = m.at("nx").get<int>();
  set.ny = m.at("ny").get<int>();
  std::ifstream bin(dir / m.at("payload").get<std::string>(), std::ios::binary);
  std::ifstream miss(dir / m.at("missing").get<std::string>(), std::ios::binary);
  if (!bin || !miss) throw data_error("cubes: cannot read payload in " + dir.string());

  for (const auto& fl : m.at("flights")) {
    set.ids.push_back(fl.at("id").get<std::string>());
    std::size_t count = fl.at("count").get<std::size_t>();
    std::vector<FeatureCube> cubes;
    cubes.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      FeatureCube cube;
      for (int c = 0; c < 4; ++c) {
        auto& ch = cube.channel[static_cast<std::size_t>(c)];
        ch.resize(set.ny, set.nx);
        for (int p = 0; p < set.ny; ++p) {
          for (int q = 0; q < set.nx; ++q) {
            float v;
            bin.read(reinterpret_cast<char*>(&v), sizeof(float));
            ch(p, q) = v;
          }
        }
        std::uint8_t flag;
        miss.read(reinterpret_cast<char*>(&flag), 1);
        cube.missing[static_cast<std::size_t>(c)] = flag != 0;
      }
      if (!bin || !miss) throw data_error("cubes: payload truncated");
      cubes.push_back(std::move(cube));
    }
    set.cubes.push_back(std::move(cubes));
  }
  return set;
}

}  // namespace atp
