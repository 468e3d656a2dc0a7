#include "core/mdn_model.hpp"

#include <atomic>
#include <cmath>
#include <thread>

namespace atp {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;
}

int ModelConfig::conv_flat() const {
  int h = cube_ny, w = cube_nx, ch = cube_channels;
  for (const auto& layer : conv) {
    h = (h - layer.kh) / layer.stride + 1;
    w = (w - layer.kw) / layer.stride + 1;
    ch = layer.filters;
    if (h <= 0 || w <= 0) throw data_error("model config: conv chain collapses the cube");
  }
  return h * w * ch;
}

void ModelConfig::validate() const {
  if (mixture_k < 1) throw data_error("model config: mixture_k must be >= 1");
  if (enc_layers < 1 || dec_layers < 1) throw data_error("model config: need >= 1 recurrent layer");
  if (enc_layers != dec_layers || enc_hidden != dec_hidden)
    throw data_error("model config: encoder/decoder shapes must match for state transfer");
  if (plan_embed < 1 || state_embed < 1 || conv_fc < 1)
    throw data_error("model config: embedding sizes must be positive");
  if (conv.empty()) throw data_error("model config: need at least one conv layer");
  if (plan_alpha < 1.0 || plan_alpha > 2.0) throw data_error("model config: plan_alpha outside [1,2]");
  conv_flat();
}

nlohmann::json ModelConfig::to_json() const {
  nlohmann::json j;
  j["mixture_k"] = mixture_k;
  j["plan_embed"] = plan_embed;
  j["enc_layers"] = enc_layers;
  j["enc_hidden"] = enc_hidden;
  j["state_embed"] = state_embed;
  j["dec_layers"] = dec_layers;
  j["dec_hidden"] = dec_hidden;
  j["conv_fc"] = conv_fc;
  j["cube_nx"] = cube_nx;
  j["cube_ny"] = cube_ny;
  j["cube_channels"] = cube_channels;
  j["mu_elu"] = mu_elu;
  j["transfer_cell"] = transfer_cell;
  j["plan_alpha"] = plan_alpha;
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& c : conv) layers.push_back({{"kh", c.kh}, {"kw", c.kw}, {"filters", c.filters}, {"stride", c.stride}});
  j["conv"] = std::move(layers);
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  static const char* known[] = {"mixture_k", "plan_embed", "enc_layers", "enc_hidden",
                                "state_embed", "dec_layers", "dec_hidden", "conv_fc",
                                "cube_nx", "cube_ny", "cube_channels", "mu_elu",
                                "transfer_cell", "plan_alpha", "conv"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || (it.key() == k);
    if (!ok) throw data_error("model config: unknown key '" + it.key() + "'");
  }
  c.mixture_k = j.value("mixture_k", c.mixture_k);
  c.plan_embed = j.value("plan_embed", c.plan_embed);
  c.enc_layers = j.value("enc_layers", c.enc_layers);
  c.enc_hidden = j.value("enc_hidden", c.enc_hidden);
  c.state_embed = j.value("state_embed", c.state_embed);
  c.dec_layers = j.value("dec_layers", c.dec_layers);
  c.dec_hidden = j.value("dec_hidden", c.dec_hidden);
  c.conv_fc = j.value("conv_fc", c.conv_fc);
  c.cube_nx = j.value("cube_nx", c.cube_nx);
  c.cube_ny = j.value("cube_ny", c.cube_ny);
  c.cube_channels = j.value("cube_channels", c.cube_channels);
  c.mu_elu = j.value("mu_elu", c.mu_elu);
  c.transfer_cell = j.value("transfer_cell", c.transfer_cell);
  c.plan_alpha = j.value("plan_alpha", c.plan_alpha);
  if (j.contains("conv")) {
    c.conv.clear();
    for (const auto& e : j.at("conv"))
      c.conv.push_back({e.at("kh").get<int>(), e.at("kw").get<int>(), e.at("filters").get<int>(),
                        e.at("stride").get<int>()});
  }
  c.validate();
  return c;
}

namespace {

struct TensorSpec {
  std::string name;
  Eigen::Index rows, cols;
  Eigen::Index fan_in;
  bool lstm_bias = false;
};

std::vector<TensorSpec> tensor_specs(const ModelConfig& cfg) {
  std::vector<TensorSpec> s;
  const int H = cfg.enc_hidden;
  s.push_back({"plan_embed_W", cfg.plan_embed, 2, 2});
  s.push_back({"plan_embed_b", cfg.plan_embed, 1, 2});
  for (int l = 0; l < cfg.enc_layers; ++l) {
    Eigen::Index in = (l == 0) ? cfg.plan_embed : H;
    s.push_back({"enc" + std::to_string(l) + "_W", 4 * H, in + H, in + H});
    s.push_back({"enc" + std::to_string(l) + "_b", 4 * H, 1, in + H, true});
  }
  int ch = cfg.cube_channels;
  for (std::size_t j = 0; j < cfg.conv.size(); ++j) {
    const auto& layer = cfg.conv[j];
    Eigen::Index fan = static_cast<Eigen::Index>(layer.kh) * layer.kw * ch;
    s.push_back({"conv" + std::to_string(j) + "_W", fan, layer.filters, fan});
    s.push_back({"conv" + std::to_string(j) + "_b", layer.filters, 1, fan});
    ch = layer.filters;
  }
  s.push_back({"conv_fc_W", cfg.conv_fc, cfg.conv_flat(), cfg.conv_flat()});
  s.push_back({"conv_fc_b", cfg.conv_fc, 1, cfg.conv_flat()});
  s.push_back({"dec_embed_W", cfg.state_embed, 5 + cfg.conv_fc, 5 + cfg.conv_fc});
  s.push_back({"dec_embed_b", cfg.state_embed, 1, 5 + cfg.conv_fc});
  for (int l = 0; l < cfg.dec_layers; ++l) {
    Eigen::Index in = (l == 0) ? cfg.state_embed : cfg.dec_hidden;
    s.push_back({"dec" + std::to_string(l) + "_W", 4 * cfg.dec_hidden, in + cfg.dec_hidden,
                 in + cfg.dec_hidden});
    s.push_back({"dec" + std::to_string(l) + "_b", 4 * cfg.dec_hidden, 1, in + cfg.dec_hidden, true});
  }
  s.push_back({"head_W", cfg.head_width(), cfg.dec_hidden, cfg.dec_hidden});
  s.push_back({"head_b", cfg.head_width(), 1, cfg.dec_hidden});
  return s;
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelParams p;
  p.cfg = cfg;
  Rng rng = Rng::derive(seed, 0x1717);
  for (const auto& spec : tensor_specs(cfg)) {
    Mat m(spec.rows, spec.cols);
    if (spec.cols == 1) {
      m.setZero();
      if (spec.lstm_bias) {
        // forget gate bias starts at 1
        Eigen::Index h = spec.rows / 4;
        m.block(h, 0, h, 1).setOnes();
      }
    } else {
      double a = 1.0 / std::sqrt(static_cast<double>(spec.fan_in));
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.uniform(-a, a);
    }
    p.names.push_back(spec.name);
    p.tensors.push_back(std::move(m));
  }
  return p;
}

ModelParams ModelParams::zeros(const ModelConfig& cfg) {
  ModelParams p = init(cfg, 0);
  for (auto& t : p.tensors) t.setZero();
  return p;
}

int ModelParams::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return static_cast<int>(i);
  throw data_error("model params: unknown tensor '" + name + "'");
}

std::size_t ModelParams::scalar_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += static_cast<std::size_t>(t.size());
  return n;
}

// ---------------------------------------------------------------------------
// Mixture parameter handling

MixtureParams unpack_mixture(const Eigen::VectorXd& head, int k) {
  if (head.size() != k * 15) throw data_error("unpack_mixture: bad head width");
  MixtureParams m;
  m.phi.resize(k);
  m.log_phi.resize(k);
  m.mu.resize(k, 5);
  m.l1.resize(static_cast<std::size_t>(k));
  m.l2.resize(static_cast<std::size_t>(k));

  Eigen::VectorXd z = head.head(k);
  double zmax = z.maxCoeff();
  double lse = zmax + std::log((z.array() - zmax).exp().sum());
  for (int i = 0; i < k; ++i) {
    m.log_phi[i] = z[i] - lse;
    m.phi[i] = std::exp(m.log_phi[i]);
    m.mu.row(i) = head.segment(k + 5 * i, 5).transpose();
    const int lb = k + 5 * k + 9 * i;
    Eigen::Matrix3d L1;
    L1 << std::exp(head[lb + 0]), 0, 0, head[lb + 1], std::exp(head[lb + 2]), 0, head[lb + 3],
        head[lb + 4], std::exp(head[lb + 5]);
    Eigen::Matrix2d L2;
    L2 << std::exp(head[lb + 6]), 0, head[lb + 7], std::exp(head[lb + 8]);
    m.l1[static_cast<std::size_t>(i)] = L1;
    m.l2[static_cast<std::size_t>(i)] = L2;
  }
  return m;
}

double MixtureParams::log_det(int i) const {
  auto si = static_cast<std::size_t>(i);
  double ld = 0.0;
  for (int j = 0; j < 3; ++j) ld += std::log(l1[si](j, j));
  for (int j = 0; j < 2; ++j) ld += std::log(l2[si](j, j));
  return 2.0 * ld;
}

double MixtureParams::log_pdf(int i, const Vec5& x) const {
  auto si = static_cast<std::size_t>(i);
  Vec5 d = x - mu.row(i).transpose();
  Eigen::Vector3d y1 = l1[si].triangularView<Eigen::Lower>().solve(d.head<3>());
  Eigen::Vector2d y2 = l2[si].triangularView<Eigen::Lower>().solve(d.tail<2>());
  double quad = y1.squaredNorm() + y2.squaredNorm();
  return -0.5 * (5.0 * kLog2Pi + log_det(i) + quad);
}

double MixtureParams::mode_log_density(int i) const {
  return -0.5 * (5.0 * kLog2Pi + log_det(i));
}

Eigen::Matrix<double, 5, 5> MixtureParams::sigma(int i) const {
  auto si = static_cast<std::size_t>(i);
  Eigen::Matrix<double, 5, 5> s = Eigen::Matrix<double, 5, 5>::Zero();
  s.topLeftCorner<3, 3>() = l1[si] * l1[si].transpose();
  s.bottomRightCorner<2, 2>() = l2[si] * l2[si].transpose();
  return s;
}

double MixtureParams::nll(const Vec5& x) const {
  Eigen::VectorXd ll(k());
  for (int i = 0; i < k(); ++i) ll[i] = log_phi[i] + log_pdf(i, x);
  double m = ll.maxCoeff();
  return -(m + std::log((ll.array() - m).exp().sum()));
}

Vec5 sample_state(const MixtureParams& mixture, Rng& rng) {
  double u = rng.uniform();
  int comp = mixture.k() - 1;
  double acc = 0.0;
  for (int i = 0; i < mixture.k(); ++i) {
    acc += mixture.phi[i];
    if (u < acc) {
      comp = i;
      break;
    }
  }
  auto sc = static_cast<std::size_t>(comp);
  Eigen::Vector3d z1{rng.normal(), rng.normal(), rng.normal()};
  Eigen::Vector2d z2{rng.normal(), rng.normal()};
  Vec5 x;
  x.head<3>() = mixture.mu.row(comp).head<3>().transpose() + mixture.l1[sc] * z1;
  x.tail<2>() = mixture.mu.row(comp).tail<2>().transpose() + mixture.l2[sc] * z2;
  return x;
}

double mixture_nll_value(const std::vector<Vec5>& targets,
                         const std::vector<MixtureParams>& mixtures) {
  if (targets.size() != mixtures.size()) throw data_error("mixture_nll: length mismatch");
  double total = 0.0;
  for (std::size_t t = 0; t < targets.size(); ++t) total += mixtures[t].nll(targets[t]);
  return total;
}

// ---------------------------------------------------------------------------
// Forward graph

ModelGraph::ModelGraph(const ModelParams& p) : params(&p) {
  leaf.reserve(p.tensors.size());
  for (const auto& t : p.tensors) leaf.push_back(tape.leaf(&t));
}

namespace {

struct LstmVars {
  Var h, c;
};

LstmVars lstm_step(Tape& t, Var w, Var b, Var x, Var h_prev, Var c_prev, int hidden) {
  Var hx = t.concat_rows(h_prev, x);
  Var gates = t.add(t.matmul(w, hx), b);
  Var i = t.sigmoid(t.slice_rows(gates, 0, hidden));
  Var f = t.sigmoid(t.slice_rows(gates, hidden, hidden));
  Var g = t.tanh(t.slice_rows(gates, 2 * hidden, hidden));
  Var o = t.sigmoid(t.slice_rows(gates, 3 * hidden, hidden));
  Var c = t.add(t.hadamard(f, c_prev), t.hadamard(i, g));
  Var h = t.hadamard(o, t.tanh(c));
  return {h, c};
}

}  // namespace

ModelGraph::State ModelGraph::encode_plan(const std::vector<Eigen::Vector2d>& plan) {
  if (plan.empty()) throw data_error("encode_plan: empty plan");
  const auto& cfg = params->cfg;
  const int H = cfg.enc_hidden;
  int wE = params->index_of("plan_embed_W"), bE = params->index_of("plan_embed_b");

  State s;
  for (int l = 0; l < cfg.enc_layers; ++l) {
    s.h.push_back(tape.constant(Mat::Zero(H, 1)));
    s.c.push_back(tape.constant(Mat::Zero(H, 1)));
  }
  for (const auto& wp : plan) {
    Var x = tape.constant(wp);
    Var e = tape.elu(tape.add(tape.matmul(leaf[wE], x), leaf[bE]));
    Var input = e;
    for (int l = 0; l < cfg.enc_layers; ++l) {
      int wi = params->index_of("enc" + std::to_string(l) + "_W");
      int bi = params->index_of("enc" + std::to_string(l) + "_b");
      auto out = lstm_step(tape, leaf[wi], leaf[bi], input, s.h[l], s.c[l], H);
      s.h[l] = out.h;
      s.c[l] = out.c;
      input = out.h;
    }
  }
  return s;
}

Var ModelGraph::conv_forward(const Mat& cube_input) {
  const auto& cfg = params->cfg;
  Var x = tape.constant(cube_input);
  int h = cfg.cube_ny, w = cfg.cube_nx;
  for (std::size_t j = 0; j < cfg.conv.size(); ++j) {
    const auto& layer = cfg.conv[j];
    int wi = params->index_of("conv" + std::to_string(j) + "_W");
    int bi = params->index_of("conv" + std::to_string(j) + "_b");
    x = tape.elu(tape.conv2d(x, h, w, leaf[wi], leaf[bi], layer.kh, layer.kw, layer.stride));
    h = (h - layer.kh) / layer.stride + 1;
    w = (w - layer.kw) / layer.stride + 1;
  }
  Var flat = tape.flatten_rows(x);
  int wi = params->index_of("conv_fc_W"), bi = params->index_of("conv_fc_b");
  return tape.elu(tape.add(tape.matmul(leaf[wi], flat), leaf[bi]));
}

Var ModelGraph::conv_layer_output(const Mat& cube_input, int layer) {
  const auto& cfg = params->cfg;
  if (layer < 1 || layer > static_cast<int>(cfg.conv.size()))
    throw usage_error("conv layer index out of range");
  Var x = tape.constant(cube_input);
  int h = cfg.cube_ny, w = cfg.cube_nx;
  for (int j = 0; j < layer; ++j) {
    const auto& spec = cfg.conv[static_cast<std::size_t>(j)];
    int wi = params->index_of("conv" + std::to_string(j) + "_W");
    int bi = params->index_of("conv" + std::to_string(j) + "_b");
    x = tape.elu(tape.conv2d(x, h, w, leaf[wi], leaf[bi], spec.kh, spec.kw, spec.stride));
    h = (h - spec.kh) / spec.stride + 1;
    w = (w - spec.kw) / spec.stride + 1;
  }
  return x;
}

ModelGraph::State ModelGraph::decoder_init(const State& encoded) const {
  State s = encoded;
  return s;
}

std::pair<ModelGraph::State, Var> ModelGraph::decoder_step(const State& prev, Var x, Var cvec) {
  const auto& cfg = params->cfg;
  Var joint = tape.concat_rows(x, cvec);
  int wE = params->index_of("dec_embed_W"), bE = params->index_of("dec_embed_b");
  Var e = tape.elu(tape.add(tape.matmul(leaf[wE], joint), leaf[bE]));
  State next;
  next.h.resize(static_cast<std::size_t>(cfg.dec_layers));
  next.c.resize(static_cast<std::size_t>(cfg.dec_layers));
  Var input = e;
  for (int l = 0; l < cfg.dec_layers; ++l) {
    int wi = params->index_of("dec" + std::to_string(l) + "_W");
    int bi = params->index_of("dec" + std::to_string(l) + "_b");
    auto out = lstm_step(tape, leaf[wi], leaf[bi], input, prev.h[static_cast<std::size_t>(l)],
                         prev.c[static_cast<std::size_t>(l)], cfg.dec_hidden);
    next.h[static_cast<std::size_t>(l)] = out.h;
    next.c[static_cast<std::size_t>(l)] = out.c;
    input = out.h;
  }
  int wi = params->index_of("head_W"), bi = params->index_of("head_b");
  Var head = tape.add(tape.matmul(leaf[wi], input), leaf[bi]);
  if (cfg.mu_elu) {
    const int k = cfg.mixture_k;
    Var z = tape.slice_rows(head, 0, k);
    Var mu = tape.elu(tape.slice_rows(head, k, 5 * k));
    Var chol = tape.slice_rows(head, 6 * k, 9 * k);
    head = tape.concat_rows(tape.concat_rows(z, mu), chol);
  }
  return {next, head};
}

std::pair<ModelGraph::State, Var> ModelGraph::decoder_step_values(const State& prev, const Vec5& x,
                                                                  const Mat& cube) {
  Var xs = tape.constant(x);
  Var cv = conv_forward(cube);
  return decoder_step(prev, xs, cv);
}

ModelGraph::State ModelGraph::constant_state(const RnnBundle& b) {
  State s;
  for (const auto& h : b.h) s.h.push_back(tape.constant(h));
  for (const auto& c : b.c) s.c.push_back(tape.constant(c));
  return s;
}

RnnBundle ModelGraph::bundle_of(const State& s) const {
  RnnBundle b;
  for (Var h : s.h) b.h.push_back(tape.value(h).col(0));
  for (Var c : s.c) b.c.push_back(tape.value(c).col(0));
  return b;
}

// ---------------------------------------------------------------------------
// Loss and training

namespace {

// Teacher-forced graph over one flight: inputs 0..T-2 predict targets 1..T-1.
Var flight_loss(ModelGraph& g, const TrainSample& sample) {
  if (sample.states.size() != sample.cubes.size())
    throw data_error("flight forward: track/cube length mismatch");
  if (sample.states.size() < 2) throw data_error("flight forward: need at least two states");
  auto state = g.decoder_init(g.encode_plan(sample.plan));
  std::vector<Var> terms;
  for (std::size_t t = 0; t + 1 < sample.states.size(); ++t) {
    auto [next, head] = g.decoder_step_values(state, sample.states[t], sample.cubes[t]);
    state = next;
    terms.push_back(g.tape.mixture_nll(head, sample.states[t + 1], g.params->cfg.mixture_k));
  }
  return g.tape.sum(terms);
}

}  // namespace

std::vector<MixtureParams> forward_flight(const TrainSample& sample, const ModelParams& params) {
  ModelGraph g(params);
  auto state = g.decoder_init(g.encode_plan(sample.plan));
  std::vector<MixtureParams> out;
  for (std::size_t t = 0; t + 1 < sample.states.size(); ++t) {
    auto [next, head] = g.decoder_step_values(state, sample.states[t], sample.cubes[t]);
    state = next;
    out.push_back(unpack_mixture(g.tape.value(head).col(0), params.cfg.mixture_k));
  }
  return out;
}

std::pair<double, std::vector<Mat>> loss_and_grads(const std::vector<TrainSample>& batch,
                                                   const ModelParams& params, int threads) {
  std::vector<Mat> total;
  for (const auto& t : params.tensors) total.push_back(Mat::Zero(t.rows(), t.cols()));
  double loss = 0.0;
  if (batch.empty()) return {loss, total};

  // Fixed-size chunks keep peak memory bounded; accumulation runs in flight
  // order afterwards so the result is independent of the thread count.
  constexpr std::size_t kChunk = 8;
  const int n_workers = std::max(1, threads);
  for (std::size_t base = 0; base < batch.size(); base += kChunk) {
    std::size_t count = std::min(kChunk, batch.size() - base);
    std::vector<double> losses(count, 0.0);
    std::vector<std::vector<Mat>> grads(count);
    std::vector<std::string> errors(count);
    auto work = [&](std::size_t slot) {
      try {
        ModelGraph g(params);
        Var l = flight_loss(g, batch[base + slot]);
        g.tape.backward(l);
        losses[slot] = g.tape.value(l)(0, 0);
        grads[slot].reserve(params.tensors.size());
        for (Var leaf : g.leaf) grads[slot].push_back(g.tape.grad(leaf));
      } catch (const std::exception& e) {
        errors[slot] = e.what();
      }
    };
    if (n_workers == 1 || count == 1) {
      for (std::size_t s = 0; s < count; ++s) work(s);
    } else {
      std::vector<std::thread> pool;
      std::atomic<std::size_t> cursor{0};
      for (int w = 0; w < n_workers; ++w)
        pool.emplace_back([&] {
          for (std::size_t s = cursor.fetch_add(1); s < count; s = cursor.fetch_add(1)) work(s);
        });
      for (auto& th : pool) th.join();
    }
    for (std::size_t s = 0; s < count; ++s) {
      if (!errors[s].empty()) throw data_error(errors[s]);
      loss += losses[s];
      for (std::size_t j = 0; j < total.size(); ++j) total[j] += grads[s][j];
    }
  }
  return {loss, total};
}

nlohmann::json TrainConfig::to_json() const {
  return nlohmann::json{{"lr0", lr0},
                        {"decay_every", decay_every},
                        {"decay_factor", decay_factor},
                        {"batch_size", batch_size},
                        {"momentum", momentum},
                        {"clip_norm", clip_norm},
                        {"epochs", epochs}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  TrainConfig c;
  static const char* known[] = {"lr0",      "decay_every", "decay_factor", "batch_size",
                                "momentum", "clip_norm",   "epochs"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known) ok = ok || (it.key() == k);
    if (!ok) throw data_error("train config: unknown key '" + it.key() + "'");
  }
  c.lr0 = j.value("lr0", c.lr0);
  c.decay_every = j.value("decay_every", c.decay_every);
  c.decay_factor = j.value("decay_factor", c.decay_factor);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.momentum = j.value("momentum", c.momentum);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.epochs = j.value("epochs", c.epochs);
  if (c.lr0 <= 0 || c.batch_size < 1 || c.epochs < 1 || c.decay_every < 1)
    throw data_error("train config: invalid values");
  return c;
}

ModelParams train_model(const ModelConfig& cfg, const std::vector<TrainSample>& dataset,
                        const TrainConfig& tc, std::uint64_t seed, std::vector<EpochLog>* log,
                        int threads) {
  if (dataset.empty()) throw data_error("train: empty dataset");
  ModelParams params = ModelParams::init(cfg, seed);
  std::vector<Mat> velocity;
  for (const auto& t : params.tensors) velocity.push_back(Mat::Zero(t.rows(), t.cols()));

  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    double lr = tc.lr0 * std::pow(tc.decay_factor, epoch / tc.decay_every);
    Rng shuffle_rng = Rng::derive(seed, 0x5175 + static_cast<std::uint64_t>(epoch));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(shuffle_rng.uniform_int(static_cast<int>(i)));
      std::swap(order[i - 1], order[j]);
    }

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(tc.batch_size)) {
      std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(tc.batch_size));
      std::vector<TrainSample> batch;
      batch.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) batch.push_back(dataset[order[i]]);

      auto [loss, grads] = loss_and_grads(batch, params, threads);
      if (!std::isfinite(loss))
        throw data_error("train: loss diverged (non-finite) at epoch " + std::to_string(epoch));
      epoch_loss += loss;

      double inv = 1.0 / static_cast<double>(batch.size());
      double norm2 = 0.0;
      for (auto& g : grads) {
        g *= inv;
        norm2 += g.squaredNorm();
      }
      double norm = std::sqrt(norm2);
      if (tc.clip_norm > 0 && norm > tc.clip_norm) {
        double scale = tc.clip_norm / norm;
        for (auto& g : grads) g *= scale;
      }
      // Nesterov momentum
      for (std::size_t j = 0; j < params.tensors.size(); ++j) {
        velocity[j] = tc.momentum * velocity[j] + grads[j];
        params.tensors[j] -= lr * (grads[j] + tc.momentum * velocity[j]);
      }
    }
    if (log) log->push_back({epoch, epoch_loss / static_cast<double>(dataset.size()), lr});
  }
  return params;
}

}  // namespace atp
