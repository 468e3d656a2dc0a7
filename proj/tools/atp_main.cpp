// Command-line front end for the trajectory prediction toolkit. All work is
// done through the shared-library C interface; this file only parses
// arguments and maps statuses to exit codes (0 ok, 1 usage, 2 data).

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>

#include <CLI11.hpp>

#include "atp/atp.h"

namespace {

int finish(atp_status st) {
  if (st != ATP_OK) std::fprintf(stderr, "atp: %s\n", atp_last_error());
  return st;
}

struct StoreCloser {
  void operator()(atp_store* s) const { atp_store_close(s); }
};
struct ModelCloser {
  void operator()(atp_model* m) const { atp_model_close(m); }
};

using StorePtr = std::unique_ptr<atp_store, StoreCloser>;
using ModelPtr = std::unique_ptr<atp_model, ModelCloser>;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"4D aircraft trajectory prediction toolkit"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "worker threads for batch stages")->capture_default_str();

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic weather store and flight corpus");
  std::string synth_config, synth_out;
  synth->add_option("--config", synth_config, "synth config JSON")->required();
  synth->add_option("--out", synth_out, "output directory")->required();

  // match
  auto* match = app.add_subcommand("match", "batch-match flights against a weather store");
  std::string match_store, match_flights, match_out;
  match->add_option("--store", match_store, "weather store directory")->required();
  match->add_option("--flights", match_flights, "flights JSONL")->required();
  match->add_option("--out", match_out, "output directory for feature cubes")->required();

  // train
  auto* train = app.add_subcommand("train", "train the mixture-density model");
  std::string train_data, train_config, train_out;
  std::uint64_t train_seed = 0;
  train->add_option("--data", train_data, "matched dataset directory")->required();
  train->add_option("--config", train_config, "train config JSON")->required();
  train->add_option("--seed", train_seed, "training seed")->capture_default_str();
  train->add_option("--out", train_out, "checkpoint output path")->required();

  // predict
  auto* predict = app.add_subcommand("predict", "generate trajectories with beam search");
  std::string pred_ckpt, pred_store, pred_flights, pred_out;
  int pred_warmup = 20;
  int pred_horizon = -1;
  bool pred_geojson = false;
  predict->add_option("--ckpt", pred_ckpt, "checkpoint path")->required();
  predict->add_option("--store", pred_store, "weather store directory")->required();
  predict->add_option("--flights", pred_flights, "flights JSONL")->required();
  predict->add_option("--warmup", pred_warmup, "observed track points fed before generation")
      ->capture_default_str();
  predict->add_option("--horizon", pred_horizon,
                      "total trajectory length (default: ground-truth length)");
  predict->add_option("--out", pred_out, "predictions JSONL output")->required();
  predict->add_flag("--geojson", pred_geojson, "also write a GeoJSON LineString export");

  // eval
  auto* eval = app.add_subcommand("eval", "score predictions against ground truth");
  std::string eval_pred, eval_truth, eval_out;
  eval->add_option("--pred", eval_pred, "predictions JSONL")->required();
  eval->add_option("--truth", eval_truth, "truth flights JSONL")->required();
  eval->add_option("--out", eval_out, "report CSV output")->required();

  // export-activations
  auto* expact = app.add_subcommand("export-activations", "dump conv feature maps to CSV");
  std::string act_ckpt, act_cubes, act_out;
  int act_layer = 1;
  int act_count = 32;
  expact->add_option("--ckpt", act_ckpt, "checkpoint path")->required();
  expact->add_option("--cubes", act_cubes, "cube set directory or manifest")->required();
  expact->add_option("--layer", act_layer, "conv layer (1 or 2)")
      ->check(CLI::IsMember({1, 2}))
      ->capture_default_str();
  expact->add_option("--count", act_count, "number of cubes to export")->capture_default_str();
  expact->add_option("--out", act_out, "CSV output")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return ATP_ERR_USAGE;
  }

  atp_set_threads(threads);

  if (*synth) return finish(atp_run_synth(synth_config.c_str(), synth_out.c_str()));

  if (*match) {
    atp_store* raw = nullptr;
    atp_status st = atp_store_open(match_store.c_str(), &raw);
    if (st != ATP_OK) return finish(st);
    StorePtr store(raw);
    return finish(atp_run_match(store.get(), match_flights.c_str(), match_out.c_str()));
  }

  if (*train)
    return finish(
        atp_run_train(train_data.c_str(), train_config.c_str(), train_seed, train_out.c_str()));

  if (*predict) {
    atp_store* raw_store = nullptr;
    atp_status st = atp_store_open(pred_store.c_str(), &raw_store);
    if (st != ATP_OK) return finish(st);
    StorePtr store(raw_store);
    atp_model* raw_model = nullptr;
    st = atp_model_open(pred_ckpt.c_str(), &raw_model);
    if (st != ATP_OK) return finish(st);
    ModelPtr model(raw_model);
    return finish(atp_run_predict(model.get(), store.get(), pred_flights.c_str(), pred_warmup,
                                  pred_horizon, pred_out.c_str(), pred_geojson ? 1 : 0));
  }

  if (*eval) return finish(atp_run_eval(eval_pred.c_str(), eval_truth.c_str(), eval_out.c_str()));

  if (*expact)
    return finish(atp_run_export_activations(act_ckpt.c_str(), act_cubes.c_str(), act_layer,
                                             act_count, act_out.c_str()));

  return ATP_ERR_USAGE;
}
