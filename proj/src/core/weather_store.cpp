#include "core/weather_store.hpp"

#include <bit>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

static_assert(std::endian::native == std::endian::little,
              "store payload format is little-endian");

namespace atp {

namespace fs = std::filesystem;
using nlohmann::json;

void WeatherStore::validate() const {
  georef.validate();
  atm_levels.validate();
  wx_levels.validate();
  auto check_times = [](const std::vector<double>& ts, const char* what) {
    if (ts.empty()) throw data_error(std::string("store: no ") + what + " times");
    for (std::size_t i = 1; i < ts.size(); ++i)
      if (ts[i] <= ts[i - 1]) throw data_error(std::string("store: ") + what + " times not ascending");
  };
  check_times(atm_times_s, "atmospheric");
  check_times(wx_times_s, "convective");
  std::size_t atm_n = atm_times_s.size() * atm_levels.levels_ft.size() * n();
  std::size_t wx_n = wx_times_s.size() * wx_levels.levels_ft.size() * n();
  if (u.size() != atm_n || v.size() != atm_n || temp.size() != atm_n)
    throw data_error("store: atmospheric payload size mismatch");
  if (wx.size() != wx_n) throw data_error("store: convective payload size mismatch");
  for (auto b : wx)
    if (b > 1) throw data_error("store: convective values must be 0/1");
}

namespace {

template <typename T>
void write_raw(const fs::path& path, const std::vector<T>& data) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw data_error("store: cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(T)));
}

template <typename T>
std::vector<T> read_raw(const fs::path& path, std::size_t expected) {
  std::ifstream f(path, std::ios::binary | std::ios::ate);
  if (!f) throw data_error("store: cannot read " + path.string());
  auto bytes = static_cast<std::size_t>(f.tellg());
  if (bytes != expected * sizeof(T))
    throw data_error("store: payload size mismatch in " + path.string());
  std::vector<T> data(expected);
  f.seekg(0);
  f.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes));
  return data;
}

}  // namespace

void WeatherStore::save(const std::string& dir) const {
  validate();
  fs::create_directories(dir);
  json m;
  m["format"] = "atp-weather-store-v1";
  m["baseline_time"] = baseline_time;
  json pts = json::array();
  for (const auto& p : georef.points) pts.push_back({p.lon, p.lat});
  m["georef_points"] = std::move(pts);
  m["atm_levels_ft"] = atm_levels.levels_ft;
  m["wx_levels_ft"] = wx_levels.levels_ft;
  m["atm_times_s"] = atm_times_s;
  m["wx_times_s"] = wx_times_s;
  m["shapes"] = {
      {"atm", {atm_times_s.size(), atm_levels.levels_ft.size(), n()}},
      {"wx", {wx_times_s.size(), wx_levels.levels_ft.size(), n()}},
  };
  m["payload"] = {{"u", "atm_u.f32"},
                  {"v", "atm_v.f32"},
                  {"temp", "atm_temp.f32"},
                  {"wx", "wx.u8"}};
  std::ofstream f(fs::path(dir) / "store_manifest.json");
  if (!f) throw data_error("store: cannot write manifest");
  f << m.dump(1) << "\n";

  write_raw(fs::path(dir) / "atm_u.f32", u);
  write_raw(fs::path(dir) / "atm_v.f32", v);
  write_raw(fs::path(dir) / "atm_temp.f32", temp);
  write_raw(fs::path(dir) / "wx.u8", wx);
}

WeatherStore WeatherStore::load(const std::string& dir) {
  std::ifstream f(fs::path(dir) / "store_manifest.json");
  if (!f) throw data_error("store: missing manifest in " + dir);
  json m;
  try {
    f >> m;
  } catch (const json::exception& e) {
    throw data_error(std::string("store: bad manifest: ") + e.what());
  }
  if (m.value("format", "") != "atp-weather-store-v1")
    throw data_error("store: unknown manifest format");

  WeatherStore s;
  s.baseline_time = m.value("baseline_time", s.baseline_time);
  for (const auto& p : m.at("georef_points"))
    s.georef.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  s.atm_levels.levels_ft = m.at("atm_levels_ft").get<std::vector<double>>();
  s.atm_levels.kind = AltitudeTable::Kind::Atmospheric;
  s.wx_levels.levels_ft = m.at("wx_levels_ft").get<std::vector<double>>();
  s.wx_levels.kind = AltitudeTable::Kind::Convective;
  s.atm_times_s = m.at("atm_times_s").get<std::vector<double>>();
  s.wx_times_s = m.at("wx_times_s").get<std::vector<double>>();

  std::size_t atm_n = s.atm_times_s.size() * s.atm_levels.levels_ft.size() * s.n();
  std::size_t wx_n = s.wx_times_s.size() * s.wx_levels.levels_ft.size() * s.n();
  s.u = read_raw<float>(fs::path(dir) / "atm_u.f32", atm_n);
  s.v = read_raw<float>(fs::path(dir) / "atm_v.f32", atm_n);
  s.temp = read_raw<float>(fs::path(dir) / "atm_temp.f32", atm_n);
  s.wx = read_raw<std::uint8_t>(fs::path(dir) / "wx.u8", wx_n);
  s.validate();
  return s;
}

}  // namespace atp
