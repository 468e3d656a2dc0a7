#include "core/beam.hpp"

#include <algorithm>
#include <cmath>

namespace atp {

namespace {

struct Hypothesis {
  Vec5 x;          // filtered state, raw units
  Mat5 p;
  Vec5 x_pred;     // prior prediction kept for smoothing
  Mat5 p_pred;
  double l = 0.0;  // cumulative log likelihood
  int parent = -1;
  int comp = 0;
  int outlier = 0;
  double course = 0.0;
  RnnBundle bundle;
  MixtureParams mixture;  // predictive distribution for the next state
};

Mat5 denormalized_sigma(const MixtureParams& m, int comp, const Normalizer& nrm) {
  Mat5 d = Mat5::Zero();
  for (int c = 0; c < 5; ++c) d(c, c) = nrm.state_std[static_cast<std::size_t>(c)];
  return d * m.sigma(comp) * d;
}

}  // namespace

PredictionResult generate_trajectory(const ModelParams& params, const Normalizer& normalizer,
                                     const Flight& flight, const WeatherStore& store,
                                     const MatchIndex& index, const BeamConfig& cfg,
                                     std::vector<StepDiag>* diag) {
  const int k = params.cfg.mixture_k;
  const int n_bs = cfg.n_bs > 0 ? cfg.n_bs : k * k;
  const int warmup = cfg.warmup;
  const int horizon = cfg.horizon > 0 ? cfg.horizon : static_cast<int>(flight.track.size());
  if (warmup < 1) throw usage_error("generate_trajectory: warm-up must be >= 1");
  if (warmup >= horizon)
    throw data_error("generate_trajectory: warm-up " + std::to_string(warmup) +
                     " >= horizon " + std::to_string(horizon));
  if (static_cast<int>(flight.track.size()) < warmup)
    throw data_error("generate_trajectory: track shorter than warm-up");

  // Flight plan through characteristic-point selection, then normalization.
  FlightPlan cp = partition_flight_plan(flight.plan, params.cfg.plan_alpha);
  std::vector<Eigen::Vector2d> plan;
  plan.reserve(cp.waypoints.size());
  for (const auto& wp : cp.waypoints) plan.push_back(normalizer.normalize_plan_point(wp));

  // Warm-up: teacher-forced pass over the observed prefix.
  ModelGraph warm(params);
  auto state = warm.decoder_init(warm.encode_plan(plan));
  Var head{};
  for (int t = 0; t < warmup; ++t) {
    const TrackPoint& pt = flight.track[static_cast<std::size_t>(t)];
    if (!pt.has_course()) throw data_error("generate_trajectory: kinematics not derived");
    auto grid = generate_grid(pt, cfg.grid, store.atm_levels, store.wx_levels);
    FeatureCube cube = assemble_cube(grid, store, index, cfg.match, &normalizer);
    auto [next, h] = warm.decoder_step_values(state, normalizer.state_of(pt), cube.as_conv_input());
    state = next;
    head = h;
  }

  const TrackPoint& root_pt = flight.track[static_cast<std::size_t>(warmup - 1)];
  Hypothesis root;
  root.x = raw_state_of(root_pt);
  root.p = cfg.kf.q();  // warm-up covariance
  root.l = 0.0;
  root.course = root_pt.course;
  root.bundle = warm.bundle_of(state);
  root.mixture = unpack_mixture(warm.tape.value(head).col(0), k);

  std::vector<std::vector<Hypothesis>> steps;
  steps.push_back({std::move(root)});

  struct Candidate {
    AkfResult akf;
    double l;
    int parent;
    int comp;
  };

  const int n_generated = horizon - warmup;
  for (int s = 0; s < n_generated; ++s) {
    const auto& beam = steps.back();
    std::vector<Candidate> cands;
    cands.reserve(beam.size() * static_cast<std::size_t>(k));
    for (std::size_t j = 0; j < beam.size(); ++j) {
      const Hypothesis& h = beam[j];
      for (int i = 0; i < k; ++i) {
        Vec5 mu_norm = h.mixture.mu.row(i).transpose();
        Vec5 z = normalizer.denormalize_state(mu_norm);
        Mat5 r = denormalized_sigma(h.mixture, i, normalizer);
        Candidate c;
        c.akf = akf_step(h.x, h.p, z, r, cfg.kf);
        Vec5 filt_norm = normalizer.normalize_state(c.akf.x);
        c.l = cumulative_loglik(h.l, h.mixture.phi[i], filt_norm, h.mixture, i, c.akf.outlier,
                                cfg.kf);
        c.parent = static_cast<int>(j);
        c.comp = i;
        cands.push_back(std::move(c));
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      if (a.l != b.l) return a.l > b.l;
      if (a.comp != b.comp) return a.comp < b.comp;
      return a.parent < b.parent;
    });
    std::size_t keep = std::min(cands.size(), static_cast<std::size_t>(n_bs));
    if (diag) {
      StepDiag d;
      d.n_candidates = static_cast<int>(cands.size());
      d.n_kept = static_cast<int>(keep);
      d.min_kept_l = cands[keep - 1].l;
      d.has_pruned = keep < cands.size();
      d.max_pruned_l = d.has_pruned ? cands[keep].l : 0.0;
      diag->push_back(d);
    }

    double t_s = root_pt.t_s + (s + 1) * cfg.kf.dt_s;
    std::vector<Hypothesis> next;
    next.reserve(keep);
    for (std::size_t c = 0; c < keep; ++c) {
      const Candidate& cand = cands[c];
      const Hypothesis& parent = beam[static_cast<std::size_t>(cand.parent)];
      Hypothesis h;
      h.x = cand.akf.x;
      h.p = cand.akf.p;
      h.x_pred = cand.akf.x_pred;
      h.p_pred = cand.akf.p_pred;
      h.l = cand.l;
      h.parent = cand.parent;
      h.comp = cand.comp;
      h.outlier = cand.akf.outlier;
      h.course = (h.x[3] == 0.0 && h.x[4] == 0.0) ? parent.course : std::atan2(h.x[4], h.x[3]);

      TrackPoint pt;
      pt.lon = h.x[0];
      pt.lat = h.x[1];
      pt.alt_ft = h.x[2];
      pt.t_s = t_s;
      pt.course = h.course;
      pt.lon_spd = h.x[3];
      pt.lat_spd = h.x[4];
      auto grid = generate_grid(pt, cfg.grid, store.atm_levels, store.wx_levels);
      FeatureCube cube = assemble_cube(grid, store, index, cfg.match, &normalizer);

      ModelGraph g(params);
      auto prev = g.constant_state(parent.bundle);
      auto [ns, nh] = g.decoder_step_values(prev, normalizer.normalize_state(h.x),
                                            cube.as_conv_input());
      h.bundle = g.bundle_of(ns);
      h.mixture = unpack_mixture(g.tape.value(nh).col(0), k);
      next.push_back(std::move(h));
    }
    steps.push_back(std::move(next));
  }

  // Backtrack the winner (and the runner-up) from the final beam.
  const auto& final_beam = steps.back();
  PredictionResult result;
  for (const auto& h : final_beam) result.final_beam_l.push_back(h.l);
  result.best_l = final_beam.front().l;

  std::vector<int> chain(static_cast<std::size_t>(n_generated));
  int at = 0;
  for (int s = n_generated; s >= 1; --s) {
    chain[static_cast<std::size_t>(s - 1)] = at;
    at = steps[static_cast<std::size_t>(s)][static_cast<std::size_t>(at)].parent;
  }

  std::vector<FilterStep> history(static_cast<std::size_t>(n_generated) + 1);
  history[0] = {Vec5::Zero(), Mat5::Zero(), steps[0][0].x, steps[0][0].p};
  for (int s = 1; s <= n_generated; ++s) {
    const auto& h = steps[static_cast<std::size_t>(s)][static_cast<std::size_t>(chain[static_cast<std::size_t>(s - 1)])];
    history[static_cast<std::size_t>(s)] = {h.x_pred, h.p_pred, h.x, h.p};
  }
  auto smoothed = rts_smooth(history, cfg.kf);

  result.points.resize(static_cast<std::size_t>(n_generated));
  for (int s = 1; s <= n_generated; ++s) {
    const auto& sm = smoothed[static_cast<std::size_t>(s)];
    const auto& h = steps[static_cast<std::size_t>(s)][static_cast<std::size_t>(chain[static_cast<std::size_t>(s - 1)])];
    PredictedPoint& p = result.points[static_cast<std::size_t>(s - 1)];
    p.lon = sm.x[0];
    p.lat = sm.x[1];
    p.alt_ft = sm.x[2];
    p.lon_spd = sm.x[3];
    p.lat_spd = sm.x[4];
    p.t_s = root_pt.t_s + s * cfg.kf.dt_s;
    p.sigma3_h_nmi = 3.0 * std::sqrt(std::max(0.0, sm.p(0, 0) + sm.p(1, 1))) * 60.0;
    p.sigma3_v_ft = 3.0 * std::sqrt(std::max(0.0, sm.p(2, 2)));
    p.cum_ll = h.l;
  }

  if (final_beam.size() > 1) {
    int ru = 1;
    std::vector<Vec5> states(static_cast<std::size_t>(n_generated));
    int node = ru;
    for (int s = n_generated; s >= 1; --s) {
      const auto& h = steps[static_cast<std::size_t>(s)][static_cast<std::size_t>(node)];
      states[static_cast<std::size_t>(s - 1)] = h.x;
      node = h.parent;
    }
    result.runner_up = std::move(states);
  }
  return result;
}

}  // namespace atp
