#include "core/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <thread>

#include <nlohmann/json.hpp>

namespace atp {

namespace fs = std::filesystem;
using nlohmann::json;

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  int workers = std::max(1, threads);
  if (workers == 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::string> errors(n);
  std::atomic<std::size_t> cursor{0};
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = cursor.fetch_add(1); i < n; i = cursor.fetch_add(1)) {
        try {
          fn(i);
        } catch (const std::exception& e) {
          errors[i] = e.what();
        }
      }
    });
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (!e.empty()) throw data_error(e);
}

namespace {

json read_json_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw data_error("cannot read config " + path);
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw data_error(path + ": " + e.what());
  }
  return j;
}

}  // namespace

void run_synth(const std::string& config_path, const std::string& out_dir) {
  SynthConfig cfg = SynthConfig::from_json(read_json_file(config_path));
  WeatherStore store = gen_weather(cfg);
  store.save(out_dir);
  SynthCorpus corpus = gen_flights(cfg, store);
  if (corpus.train.empty() || corpus.eval.empty())
    throw data_error("synth: corpus too small after drops");
  write_flights_jsonl((fs::path(out_dir) / "flights_train.jsonl").string(), corpus.train);
  write_flights_jsonl((fs::path(out_dir) / "flights_eval.jsonl").string(), corpus.eval);

  auto length_stats = [](const std::vector<Flight>& fl) {
    std::size_t lo = SIZE_MAX, hi = 0, sum = 0;
    for (const auto& f : fl) {
      lo = std::min(lo, f.track.size());
      hi = std::max(hi, f.track.size());
      sum += f.track.size();
    }
    return json{{"count", fl.size()},
                {"min_len", lo},
                {"max_len", hi},
                {"mean_len", static_cast<double>(sum) / static_cast<double>(fl.size())}};
  };
  json stats{{"train", length_stats(corpus.train)},
             {"eval", length_stats(corpus.eval)},
             {"dropped", corpus.dropped},
             {"seed", cfg.seed}};
  std::ofstream f(fs::path(out_dir) / "dataset_stats.json");
  if (!f) throw data_error("synth: cannot write dataset stats");
  f << stats.dump(1) << "\n";
}

void run_match(const std::string& store_dir, const std::string& flights_path,
               const std::string& out_dir, int threads) {
  WeatherStore store = WeatherStore::load(store_dir);
  MatchIndex index = build_index(store);
  run_match(store, index, flights_path, out_dir, threads);
}

void run_match(const WeatherStore& store, const MatchIndex& index, const std::string& flights_path,
               const std::string& out_dir, int threads) {
  std::vector<Flight> flights = read_flights_jsonl(flights_path);
  for (auto& f : flights) derive_kinematics(f.track);

  GridParams grid;
  MatchParams match;
  CubeSet set;
  set.nx = grid.nx;
  set.ny = grid.ny;
  set.ids.resize(flights.size());
  set.cubes.resize(flights.size());
  parallel_for(flights.size(), threads, [&](std::size_t i) {
    auto grids = generate_grids(flights[i].track, grid, store.atm_levels, store.wx_levels);
    set.ids[i] = flights[i].id;
    set.cubes[i] = assemble_cubes(grids, store, index, match, nullptr);
  });
  write_cube_set(out_dir, set);
  write_flights_jsonl((fs::path(out_dir) / "flights.jsonl").string(), flights);
}

namespace {

struct TrainFileConfig {
  ModelConfig model;
  TrainConfig train;
  bool has_origin = false;
  double origin_lon = 0, origin_lat = 0, origin_alt = 0;
};

TrainFileConfig train_file_config(const json& j) {
  TrainFileConfig c;
  for (auto it = j.begin(); it != j.end(); ++it)
    if (it.key() != "model" && it.key() != "train" && it.key() != "origin")
      throw data_error("train config: unknown key '" + it.key() + "'");
  if (j.contains("model")) c.model = ModelConfig::from_json(j.at("model"));
  if (j.contains("train")) c.train = TrainConfig::from_json(j.at("train"));
  if (j.contains("origin")) {
    c.has_origin = true;
    c.origin_lon = j.at("origin").at(0).get<double>();
    c.origin_lat = j.at("origin").at(1).get<double>();
    c.origin_alt = j.at("origin").at(2).get<double>();
  }
  return c;
}

std::vector<TrainSample> build_samples(const std::vector<Flight>& flights,
                                       const std::vector<std::vector<FeatureCube>>& cubes,
                                       const Normalizer& nrm, const ModelConfig& cfg) {
  std::vector<TrainSample> samples(flights.size());
  for (std::size_t i = 0; i < flights.size(); ++i) {
    const Flight& f = flights[i];
    if (cubes[i].size() != f.track.size())
      throw data_error("train: cube count mismatch for flight " + f.id);
    TrainSample s;
    FlightPlan cp = partition_flight_plan(f.plan, cfg.plan_alpha);
    for (const auto& wp : cp.waypoints) s.plan.push_back(nrm.normalize_plan_point(wp));
    for (const auto& p : f.track) s.states.push_back(nrm.state_of(p));
    for (const auto& cube : cubes[i]) {
      FeatureCube c = cube;
      if (!c.missing[1]) {
        for (int ch = 1; ch < 4; ++ch)
          c.channel[static_cast<std::size_t>(ch)] =
              (c.channel[static_cast<std::size_t>(ch)].array() - nrm.wx_mean[static_cast<std::size_t>(ch - 1)]) /
              nrm.wx_std[static_cast<std::size_t>(ch - 1)];
      }
      s.cubes.push_back(c.as_conv_input());
    }
    samples[i] = std::move(s);
  }
  return samples;
}

}  // namespace

void run_train(const std::string& data_dir, const std::string& config_path, std::uint64_t seed,
               const std::string& ckpt_out, int threads) {
  TrainFileConfig cfg = train_file_config(read_json_file(config_path));
  cfg.model.validate();

  std::vector<Flight> flights = read_flights_jsonl((fs::path(data_dir) / "flights.jsonl").string());
  for (auto& f : flights) derive_kinematics(f.track);
  CubeSet set = read_cube_set(data_dir);
  if (set.ids.size() != flights.size()) throw data_error("train: cube set does not match corpus");
  for (std::size_t i = 0; i < flights.size(); ++i)
    if (set.ids[i] != flights[i].id) throw data_error("train: cube set flight order mismatch");
  if (set.nx != cfg.model.cube_nx || set.ny != cfg.model.cube_ny)
    throw data_error("train: cube shape does not match model config");

  LonLat origin{cfg.origin_lon, cfg.origin_lat};
  double origin_alt = cfg.origin_alt;
  if (!cfg.has_origin) {
    origin = flights.front().plan.waypoints.front();
    origin_alt = 0.0;
  }
  std::vector<Eigen::MatrixXd> wx_channels;
  for (const auto& per_flight : set.cubes)
    for (const auto& cube : per_flight) {
      if (cube.missing[1]) continue;
      wx_channels.push_back(cube.channel[1]);
      wx_channels.push_back(cube.channel[2]);
      wx_channels.push_back(cube.channel[3]);
    }
  Normalizer nrm = Normalizer::fit(flights, origin, origin_alt, &wx_channels);

  std::vector<TrainSample> samples = build_samples(flights, set.cubes, nrm, cfg.model);
  std::vector<EpochLog> log;
  ModelParams params = train_model(cfg.model, samples, cfg.train, seed, &log, threads);

  Checkpoint ck;
  ck.params = std::move(params);
  ck.normalizer = nrm;
  ck.seed = seed;
  ck.epoch = cfg.train.epochs;
  ck.save(ckpt_out);

  std::ofstream loss_csv(ckpt_out + ".loss.csv");
  if (!loss_csv) throw data_error("train: cannot write loss log");
  loss_csv << "epoch,mean_nll,lr\n";
  loss_csv.precision(12);
  for (const auto& e : log) loss_csv << e.epoch << "," << e.loss << "," << e.lr << "\n";
}

void run_predict(const std::string& ckpt_path, const std::string& store_dir,
                 const std::string& flights_path, int warmup, const std::string& out_path,
                 bool geojson, int threads, int horizon) {
  Checkpoint ck = Checkpoint::load(ckpt_path);
  WeatherStore store = WeatherStore::load(store_dir);
  MatchIndex index = build_index(store);
  run_predict(ck, store, index, flights_path, warmup, out_path, geojson, threads, horizon);
}

void run_predict(const Checkpoint& ck, const WeatherStore& store, const MatchIndex& index,
                 const std::string& flights_path, int warmup, const std::string& out_path,
                 bool geojson, int threads, int horizon) {
  if (warmup < 1) throw usage_error("predict: warm-up must be >= 1");
  std::vector<Flight> flights = read_flights_jsonl(flights_path);
  for (auto& f : flights) {
    derive_kinematics(f.track);
    int t = horizon > 0 ? horizon : static_cast<int>(f.track.size());
    if (warmup >= t)
      throw data_error("predict: warm-up " + std::to_string(warmup) +
                       " >= trajectory length " + std::to_string(t) + " for flight " + f.id);
  }

  BeamConfig cfg;
  cfg.warmup = warmup;
  cfg.horizon = horizon;

  std::vector<PredictionRecord> recs(flights.size());
  parallel_for(flights.size(), threads, [&](std::size_t i) {
    const Flight& f = flights[i];
    PredictionResult res = generate_trajectory(ck.params, ck.normalizer, f, store, index, cfg);
    PredictionRecord r;
    r.flight.id = f.id;
    r.flight.plan = f.plan;
    r.warmup = warmup;
    r.final_loglik = res.best_l;
    for (int t = 0; t < warmup; ++t) r.flight.track.push_back(f.track[static_cast<std::size_t>(t)]);
    for (const auto& p : res.points) {
      TrackPoint tp;
      tp.lon = p.lon;
      tp.lat = p.lat;
      tp.alt_ft = p.alt_ft;
      tp.t_s = p.t_s;
      r.flight.track.push_back(tp);
      r.sigma3_h_nmi.push_back(p.sigma3_h_nmi);
      r.sigma3_v_ft.push_back(p.sigma3_v_ft);
      r.cum_loglik.push_back(p.cum_ll);
    }
    recs[i] = std::move(r);
  });
  write_predictions_jsonl(out_path, recs);
  if (geojson) write_predictions_geojson(out_path + ".geojson", recs);
}

CorpusErrorReport run_eval(const std::string& pred_path, const std::string& truth_path,
                           const std::string& out_csv) {
  std::vector<PredictionRecord> preds = read_predictions_jsonl(pred_path);
  std::vector<Flight> truth = read_flights_jsonl(truth_path);

  std::vector<FlightErrorReport> reports;
  for (const auto& pr : preds) {
    const Flight* t = nullptr;
    for (const auto& tf : truth)
      if (tf.id == pr.flight.id) {
        t = &tf;
        break;
      }
    if (!t) throw data_error("eval: no truth flight with id " + pr.flight.id);
    reports.push_back(evaluate(pr.flight, *t, pr.warmup));
  }
  CorpusErrorReport corpus = aggregate(reports);
  write_report_csv(out_csv, reports, corpus);
  write_summary_json(out_csv + ".summary.json", corpus);
  write_histograms_csv(out_csv + ".hist.csv", reports);
  return corpus;
}

void run_export_activations(const std::string& ckpt_path, const std::string& cubes_path, int layer,
                            int count, const std::string& out_csv) {
  if (layer < 1 || layer > 2) throw usage_error("export-activations: layer must be 1 or 2");
  Checkpoint ck = Checkpoint::load(ckpt_path);
  CubeSet set = read_cube_set(cubes_path);

  std::ofstream f(out_csv);
  if (!f) throw data_error("export-activations: cannot write " + out_csv);
  f << "cube,layer,filter,row,col,value\n";
  f.precision(10);

  int exported = 0;
  for (std::size_t fi = 0; fi < set.cubes.size() && exported < count; ++fi) {
    for (const auto& raw : set.cubes[fi]) {
      if (exported >= count) break;
      FeatureCube cube = raw;
      if (!cube.missing[1]) {
        for (int ch = 1; ch < 4; ++ch)
          cube.channel[static_cast<std::size_t>(ch)] =
              (cube.channel[static_cast<std::size_t>(ch)].array() -
               ck.normalizer.wx_mean[static_cast<std::size_t>(ch - 1)]) /
              ck.normalizer.wx_std[static_cast<std::size_t>(ch - 1)];
      }
      ModelGraph g(ck.params);
      Var act = g.conv_layer_output(cube.as_conv_input(), layer);
      const Mat& a = g.tape.value(act);  // (h*w, filters)
      int w = ck.params.cfg.cube_nx;
      int h = ck.params.cfg.cube_ny;
      for (int l = 0; l < layer; ++l) {
        const auto& spec = ck.params.cfg.conv[static_cast<std::size_t>(l)];
        h = (h - spec.kh) / spec.stride + 1;
        w = (w - spec.kw) / spec.stride + 1;
      }
      for (Eigen::Index filt = 0; filt < a.cols(); ++filt)
        for (int row = 0; row < h; ++row)
          for (int col = 0; col < w; ++col)
            f << exported << "," << layer << "," << filt << "," << row << "," << col << ","
              << a(static_cast<Eigen::Index>(row) * w + col, filt) << "\n";
      ++exported;
    }
  }
  if (exported == 0) throw data_error("export-activations: cube set is empty");
}

Flight baseline_plan_constant_speed(const Flight& truth, int warmup, double dt_s) {
  if (warmup < 1 || static_cast<std::size_t>(warmup) >= truth.track.size())
    throw data_error("baseline: warm-up outside track");
  Flight out;
  out.id = truth.id;
  out.plan = truth.plan;
  for (int t = 0; t < warmup; ++t) out.track.push_back(truth.track[static_cast<std::size_t>(t)]);

  // Warm-up mean ground speed in degree space.
  double speed = 0.0;
  for (int t = 0; t + 1 < warmup; ++t) {
    const auto& a = truth.track[static_cast<std::size_t>(t)];
    const auto& b = truth.track[static_cast<std::size_t>(t + 1)];
    speed += std::hypot(b.lon - a.lon, b.lat - a.lat) / (b.t_s - a.t_s);
  }
  speed /= std::max(1, warmup - 1);

  const auto& wps = truth.plan.waypoints;
  const TrackPoint& last = truth.track[static_cast<std::size_t>(warmup - 1)];

  // Project the warm-up end onto the plan polyline (segment index + offset).
  std::size_t seg = 0;
  double seg_t = 0.0, best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < wps.size(); ++i) {
    double vx = wps[i + 1].lon - wps[i].lon, vy = wps[i + 1].lat - wps[i].lat;
    double len2 = vx * vx + vy * vy;
    double t = len2 > 0 ? ((last.lon - wps[i].lon) * vx + (last.lat - wps[i].lat) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    double px = wps[i].lon + t * vx, py = wps[i].lat + t * vy;
    double d = std::hypot(px - last.lon, py - last.lat);
    if (d < best_d) {
      best_d = d;
      seg = i;
      seg_t = t;
    }
  }

  double lon = wps[seg].lon + seg_t * (wps[seg + 1].lon - wps[seg].lon);
  double lat = wps[seg].lat + seg_t * (wps[seg + 1].lat - wps[seg].lat);
  for (std::size_t i = static_cast<std::size_t>(warmup); i < truth.track.size(); ++i) {
    double advance = speed * dt_s;
    while (advance > 0 && seg + 1 < wps.size()) {
      double vx = wps[seg + 1].lon - lon, vy = wps[seg + 1].lat - lat;
      double rem = std::hypot(vx, vy);
      if (rem > advance) {
        lon += advance * vx / rem;
        lat += advance * vy / rem;
        advance = 0;
      } else {
        lon = wps[seg + 1].lon;
        lat = wps[seg + 1].lat;
        advance -= rem;
        ++seg;
      }
    }
    TrackPoint p;
    p.lon = lon;
    p.lat = lat;
    p.alt_ft = last.alt_ft;
    p.t_s = truth.track[i].t_s;
    out.track.push_back(p);
  }
  return out;
}

}  // namespace atp
