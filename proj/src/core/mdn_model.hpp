#ifndef ATP_MDN_MODEL_HPP
#define ATP_MDN_MODEL_HPP

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "core/rng.hpp"
#include "core/tape.hpp"

namespace atp {

using Vec5 = Eigen::Matrix<double, 5, 1>;

struct ConvLayerSpec {
  int kh = 3;
  int kw = 3;
  int filters = 16;
  int stride = 1;
};

struct ModelConfig {
  int mixture_k = 3;
  int plan_embed = 32;
  int enc_layers = 2;
  int enc_hidden = 128;
  int state_embed = 64;
  int dec_layers = 2;
  int dec_hidden = 128;
  int conv_fc = 32;
  int cube_nx = 20;
  int cube_ny = 20;
  int cube_channels = 4;
  std::vector<ConvLayerSpec> conv{{6, 6, 16, 2}, {3, 3, 16, 1}, {3, 3, 32, 1}};
  bool mu_elu = false;        // Eq. 5 mapping: identity by default, ELU optional
  bool transfer_cell = true;  // encoder cell state seeds the decoder too
  double plan_alpha = 1.5;    // characteristic-point parameter for plans

  int head_width() const { return mixture_k * 15; }  // phi + mu(5) + chol(6+3)
  int conv_flat() const;  // flattened size after the conv chain
  void validate() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// All weight and bias tensors, in a fixed named order derived from the config.
struct ModelParams {
  ModelConfig cfg;
  std::vector<std::string> names;
  std::vector<Mat> tensors;

  static ModelParams init(const ModelConfig& cfg, std::uint64_t seed);
  static ModelParams zeros(const ModelConfig& cfg);
  int index_of(const std::string& name) const;
  std::size_t scalar_count() const;
};

// Per-timestep Gaussian-mixture parameters decoded from a head vector.
struct MixtureParams {
  Eigen::VectorXd phi;                // K, sums to 1
  Eigen::VectorXd log_phi;            // K
  Eigen::MatrixXd mu;                 // K x 5
  std::vector<Eigen::Matrix3d> l1;    // position block Cholesky factors
  std::vector<Eigen::Matrix2d> l2;    // speed block Cholesky factors

  int k() const { return static_cast<int>(phi.size()); }
  double log_det(int i) const;
  // log N(x | mu_i, Sigma_i) via the Cholesky factors.
  double log_pdf(int i, const Vec5& x) const;
  // log density at the mode, -0.5 (5 log 2pi + log det Sigma_i).
  double mode_log_density(int i) const;
  Eigen::Matrix<double, 5, 5> sigma(int i) const;
  double nll(const Vec5& x) const;  // -log sum_i phi_i N(x | ...)
};

MixtureParams unpack_mixture(const Eigen::VectorXd& head, int k);

// Draws component i ~ phi, then X ~ N(mu_i, Sigma_i) via the factors.
Vec5 sample_state(const MixtureParams& mixture, Rng& rng);

// Recurrent hidden+cell pairs for each layer, as plain values (one hypothesis
// carries one of these during inference).
struct RnnBundle {
  std::vector<Eigen::VectorXd> h;
  std::vector<Eigen::VectorXd> c;
};

// Tape-side handles for one forward pass. Leaves are created once per tape in
// tensor order, so gradients can be read back positionally.
struct ModelGraph {
  Tape tape;
  std::vector<Var> leaf;

  explicit ModelGraph(const ModelParams& params);
  const ModelParams* params;

  struct State {
    std::vector<Var> h;
    std::vector<Var> c;
  };

  State encode_plan(const std::vector<Eigen::Vector2d>& plan);
  Var conv_forward(const Mat& cube_input);          // (H*W, C) -> (conv_fc, 1)
  Var conv_layer_output(const Mat& cube_input, int layer);  // activations after layer 1 or 2
  State decoder_init(const State& encoded) const;
  // One decoder step; returns the new state and the raw head output (45, 1).
  std::pair<State, Var> decoder_step(const State& prev, Var x, Var cvec);
  std::pair<State, Var> decoder_step_values(const State& prev, const Vec5& x, const Mat& cube);

  State constant_state(const RnnBundle& b);
  RnnBundle bundle_of(const State& s) const;
};

// One model-ready flight: normalized plan, normalized states, conv inputs.
struct TrainSample {
  std::vector<Eigen::Vector2d> plan;
  std::vector<Vec5> states;
  std::vector<Mat> cubes;  // (H*W, C) each, normalized
};

// Teacher-forced forward over a whole flight; mixture t models state t+1.
std::vector<MixtureParams> forward_flight(const TrainSample& sample, const ModelParams& params);

// Summed NLL over targets 1..T-1 plus gradients for every tensor.
std::pair<double, std::vector<Mat>> loss_and_grads(const std::vector<TrainSample>& batch,
                                                   const ModelParams& params, int threads = 1);

double mixture_nll_value(const std::vector<Vec5>& targets,
                         const std::vector<MixtureParams>& mixtures);

struct TrainConfig {
  double lr0 = 0.001;
  int decay_every = 1000;
  double decay_factor = 0.5;
  int batch_size = 256;
  double momentum = 0.9;
  double clip_norm = 5.0;
  int epochs = 50;

  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochLog {
  int epoch;
  double loss;  // mean per-flight NLL over the epoch
  double lr;
};

// Nesterov-momentum training with gradient clipping by global norm.
// Deterministic given the seed, regardless of thread count.
ModelParams train_model(const ModelConfig& cfg, const std::vector<TrainSample>& dataset,
                        const TrainConfig& tc, std::uint64_t seed,
                        std::vector<EpochLog>* log = nullptr, int threads = 1);

}  // namespace atp

#endif
