#include "core/checkpoint.hpp"

#include <bit>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload format is little-endian");

namespace atp {

using nlohmann::json;

namespace {

json normalizer_to_json(const Normalizer& n) {
  return json{{"origin", {n.origin_lon, n.origin_lat, n.origin_alt}},
              {"state_mean", n.state_mean},
              {"state_std", n.state_std},
              {"plan_mean", n.plan_mean},
              {"plan_std", n.plan_std},
              {"wx_mean", n.wx_mean},
              {"wx_std", n.wx_std}};
}

Normalizer normalizer_from_json(const json& j) {
  Normalizer n;
  n.origin_lon = j.at("origin").at(0).get<double>();
  n.origin_lat = j.at("origin").at(1).get<double>();
  n.origin_alt = j.at("origin").at(2).get<double>();
  n.state_mean = j.at("state_mean").get<std::array<double, 5>>();
  n.state_std = j.at("state_std").get<std::array<double, 5>>();
  n.plan_mean = j.at("plan_mean").get<std::array<double, 2>>();
  n.plan_std = j.at("plan_std").get<std::array<double, 2>>();
  n.wx_mean = j.at("wx_mean").get<std::array<double, 3>>();
  n.wx_std = j.at("wx_std").get<std::array<double, 3>>();
  return n;
}

}  // namespace

void Checkpoint::save(const std::string& path) const {
  json m;
  m["format"] = "atp-checkpoint-v1";
  m["config"] = params.cfg.to_json();
  m["seed"] = seed;
  m["epoch"] = epoch;
  m["normalizer"] = normalizer_to_json(normalizer);
  json table = json::array();
  std::size_t offset = 0;
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    const auto& t = params.tensors[i];
    table.push_back({{"name", params.names[i]},
                     {"rows", t.rows()},
                     {"cols", t.cols()},
                     {"offset", offset}});
    offset += static_cast<std::size_t>(t.size());
  }
  m["tensors"] = std::move(table);
  m["payload"] = {{"file", path.substr(path.find_last_of('/') + 1) + ".bin"},
                  {"dtype", "f64le"},
                  {"count", offset}};

  std::ofstream f(path);
  if (!f) throw data_error("checkpoint: cannot write " + path);
  f << m.dump(1) << "\n";

  std::ofstream bin(path + ".bin", std::ios::binary);
  if (!bin) throw data_error("checkpoint: cannot write " + path + ".bin");
  for (const auto& t : params.tensors)
    bin.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(static_cast<std::size_t>(t.size()) * sizeof(double)));
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw data_error("checkpoint: cannot read " + path);
  json m;
  try {
    f >> m;
  } catch (const json::exception& e) {
    throw data_error(std::string("checkpoint: bad manifest: ") + e.what());
  }
  if (m.value("format", "") != "atp-checkpoint-v1")
    throw data_error("checkpoint: unknown manifest format");

  Checkpoint ck;
  ck.seed = m.value("seed", 0ULL);
  ck.epoch = m.value("epoch", 0);
  ck.normalizer = normalizer_from_json(m.at("normalizer"));
  ModelConfig cfg = ModelConfig::from_json(m.at("config"));
  ck.params = ModelParams::zeros(cfg);

  const auto& table = m.at("tensors");
  if (table.size() != ck.params.tensors.size())
    throw data_error("checkpoint: tensor count mismatch against config");

  std::ifstream bin(path + ".bin", std::ios::binary | std::ios::ate);
  if (!bin) throw data_error("checkpoint: cannot read " + path + ".bin");
  auto bytes = static_cast<std::size_t>(bin.tellg());
  bin.seekg(0);

  std::size_t expected = 0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto& e = table[i];
    auto& t = ck.params.tensors[i];
    if (e.at("name").get<std::string>() != ck.params.names[i] ||
        e.at("rows").get<Eigen::Index>() != t.rows() || e.at("cols").get<Eigen::Index>() != t.cols())
      throw data_error("checkpoint: tensor '" + e.at("name").get<std::string>() +
                       "' does not match the declared config");
    if (e.at("offset").get<std::size_t>() != expected)
      throw data_error("checkpoint: tensor table offsets out of order");
    expected += static_cast<std::size_t>(t.size());
  }
  if (bytes != expected * sizeof(double)) throw data_error("checkpoint: payload size mismatch");
  for (auto& t : ck.params.tensors)
    bin.read(reinterpret_cast<char*>(t.data()),
             static_cast<std::streamsize>(static_cast<std::size_t>(t.size()) * sizeof(double)));
  return ck;
}

}  // namespace atp
