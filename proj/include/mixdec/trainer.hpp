#pragma once

// Training loop: per mini-batch of training edges, sample negatives, mixup
// plans and decay links, evaluate the combined loss on a fresh full-graph
// forward pass, back-propagate and take an Adam step.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mixdec/decay.hpp"
#include "mixdec/error.hpp"
#include "mixdec/evaluator.hpp"
#include "mixdec/graph.hpp"
#include "mixdec/instrumentation.hpp"
#include "mixdec/io.hpp"
#include "mixdec/loss.hpp"
#include "mixdec/mixup.hpp"
#include "mixdec/model.hpp"
#include "mixdec/rng.hpp"

namespace mixdec {

struct TrainConfig {
  std::size_t epochs = 2500;
  std::size_t batch_size = 1024;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  SamplingMode mode = SamplingMode::MixDec;
  std::size_t eval_every = 0;  // 0 disables validation
  std::size_t eval_k = 30;
  bool select_best = true;     // keep the parameters with the best validation MRR
  bool log_timing = false;     // add wall time to log records (makes logs run-dependent)
  std::uint64_t seed = 0;
  SamplerCounts counts;
  BetaParams beta;
  KindProportions proportions;
  LossWeights loss_weights;

  void validate() const {
    if (epochs < 1) throw ValidationError("epochs must be >= 1");
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be > 0");
    if (!(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1))
      throw ValidationError("Adam betas must be in [0, 1)");
    if (!(adam_eps > 0)) throw ValidationError("adam_eps must be > 0");
    if (eval_k < 1) throw ValidationError("eval_k must be >= 1");
    beta.validate();
    proportions.validate();
  }
};

struct AdamState {
  Matrix m_emb, v_emb;
  std::vector<Matrix> m_w, v_w;
  std::uint64_t step = 0;

  static AdamState zeros_like(const ModelParams& p) {
    AdamState s;
    s.m_emb = s.v_emb = Matrix(p.embeddings.rows, p.embeddings.cols);
    for (const auto& w : p.weights) {
      s.m_w.emplace_back(w.rows, w.cols);
      s.v_w.emplace_back(w.rows, w.cols);
    }
    return s;
  }
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

namespace detail {

inline void adam_update(Matrix& p, const Matrix& g, Matrix& m, Matrix& v, double lr, double b1, double b2,
                        double eps, double bc1, double bc2) {
  for (std::size_t k = 0; k < p.data.size(); ++k) {
    double gk = g.data[k];
    m.data[k] = b1 * m.data[k] + (1.0 - b1) * gk;
    v.data[k] = b2 * v.data[k] + (1.0 - b2) * gk * gk;
    double mh = m.data[k] / bc1;
    double vh = v.data[k] / bc2;
    p.data[k] -= lr * mh / (std::sqrt(vh) + eps);
  }
}

inline bool all_finite(const Matrix& m) {
  for (double v : m.data)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace detail

/// Bias-corrected Adam update of every parameter block.
inline void adam_step(ModelParams& params, const Gradients& grads, AdamState& state, const TrainConfig& cfg) {
  if (!grads.embeddings.same_shape(params.embeddings) || grads.weights.size() != params.weights.size() ||
      !state.m_emb.same_shape(params.embeddings) || state.m_w.size() != params.weights.size())
    throw ValidationError("adam_step: shape mismatch");
  if (!detail::all_finite(grads.embeddings)) throw Error("adam_step: non-finite gradient (embeddings)");
  for (std::size_t l = 0; l < grads.weights.size(); ++l)
    if (!detail::all_finite(grads.weights[l]))
      throw Error("adam_step: non-finite gradient (layer " + std::to_string(l + 1) + ")");

  ++state.step;
  double t = static_cast<double>(state.step);
  double bc1 = 1.0 - std::pow(cfg.adam_beta1, t);
  double bc2 = 1.0 - std::pow(cfg.adam_beta2, t);
  detail::adam_update(params.embeddings, grads.embeddings, state.m_emb, state.v_emb, cfg.learning_rate,
                      cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, bc1, bc2);
  for (std::size_t l = 0; l < params.weights.size(); ++l)
    detail::adam_update(params.weights[l], grads.weights[l], state.m_w[l], state.v_w[l], cfg.learning_rate,
                        cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps, bc1, bc2);
}

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0, loss_ns = 0.0, loss_m = 0.0, loss_d = 0.0;
  std::optional<double> valid_mrr;
  double wall_seconds = 0.0;

  std::string to_json(bool timing) const {
    std::ostringstream ss;
    ss << "{\"epoch\": " << epoch << ", \"loss\": " << io::format_double(loss)
       << ", \"loss_ns\": " << io::format_double(loss_ns) << ", \"loss_m\": " << io::format_double(loss_m)
       << ", \"loss_d\": " << io::format_double(loss_d);
    if (valid_mrr) ss << ", \"valid_mrr\": " << io::format_double(*valid_mrr);
    if (timing) ss << ", \"wall_time_s\": " << io::format_double(wall_seconds);
    ss << "}";
    return ss.str();
  }
};

struct TrainState {
  ModelParams params;
  AdamState adam;
  std::size_t epochs_done = 0;
  std::optional<ModelParams> best_params;
  double best_valid_mrr = -1.0;
  std::size_t best_epoch = 0;

  /// Parameters to evaluate: the best validated ones when tracked, else current.
  const ModelParams& selected() const { return best_params ? *best_params : params; }

  friend bool operator==(const TrainState&, const TrainState&) = default;
};

/// Total loss and gradients for one batch at the current parameters.
struct StepResult {
  LossBreakdown loss;
  Gradients grads;
};

inline StepResult loss_and_gradients(const Propagator& prop, const ModelParams& params, const ModelConfig& cfg,
                                     const Batch& batch, SamplingMode mode, const LossWeights& weights = {}) {
  auto st = forward(prop, params, cfg);
  Matrix f = final_embeddings(st, cfg);
  Matrix d_f(f.rows, f.cols);
  StepResult r;
  r.loss = loss_total(batch, f, mode, weights, &d_f);
  r.grads = backward(prop, params, cfg, st, d_f);
  return r;
}

class Trainer {
 public:
  Trainer(const BipartiteGraph& graph, const DecayTable* decay, ModelConfig model_cfg, TrainConfig train_cfg,
          std::span<const CandidateSet> valid_sets = {})
      : g_(&graph),
        decay_(decay),
        model_cfg_(model_cfg),
        cfg_(train_cfg),
        valid_(valid_sets.begin(), valid_sets.end()),
        prop_(graph, model_cfg.aggregator) {
    model_cfg_.validate();
    cfg_.validate();
    if (uses_decay(cfg_.mode)) {
      if (decay_ == nullptr) throw ValidationError("decay sets are required for this sampling mode");
      if (decay_->cfg.anchor_kind != NodeKind::User || decay_->sets.size() != graph.n_users())
        throw ValidationError("decay table does not match the training graph");
    }
    edges_ = graph.edges();
    if (edges_.empty()) throw ValidationError("training graph has no edges");
  }

  const ModelConfig& model_config() const { return model_cfg_; }
  const TrainConfig& train_config() const { return cfg_; }

  TrainState initial_state() const {
    TrainState s;
    Rng rng = make_rng(model_cfg_.seed, "init");
    s.params = init_params(model_cfg_, g_->n_users(), g_->n_items(), rng);
    s.adam = AdamState::zeros_like(s.params);
    return s;
  }

  /// Samples the loss terms for `edges`. Streams are passed in so a caller
  /// controls determinism.
  Batch build_batch(std::span<const Interaction> edges, Rng& neg_rng, Rng& mix_rng, Rng& decay_rng) const {
    Batch b;
    const std::size_t nu = g_->n_users();
    bool mix = uses_mix(cfg_.mode), dec = uses_decay(cfg_.mode);
    if (mix) b.mix.emplace();
    if (dec) b.decay.emplace();
    b.ns.reserve(edges.size() * cfg_.counts.c);
    for (const auto& e : edges) {
      auto negs = sample_uniform_negatives(*g_, e.user, cfg_.counts.c, neg_rng);
      for (auto n : negs) b.ns.push_back({e.user, nu + e.item, nu + n});
      const DecaySet* ds = decay_ ? decay_->find(NodeId::user(e.user)) : nullptr;
      if (mix) {
        MixMode mm = cfg_.mode == SamplingMode::MixDec ? MixMode::MixDec : MixMode::Mixup;
        auto plan = plan_mix_pairs(*g_, e.user, e.item, negs, mm == MixMode::MixDec ? ds : nullptr, cfg_.counts,
                                   mm, cfg_.beta, mix_rng, cfg_.proportions);
        for (const auto& p : plan)
          b.mix->push_back({e.user, nu + p.i, nu + p.j, p.lambda, mixed_weight(p.lambda, p.w_i, p.w_j)});
      }
      if (dec && ds && !ds->empty()) {
        for (std::size_t t = 0; t < cfg_.counts.c_d; ++t) {
          ++instrumentation::counters().decay_draws;
          const auto& d = ds->entries[uniform_index(decay_rng, ds->entries.size())];
          b.decay->push_back({e.user, nu + d.node.index, d.weight});
        }
      }
    }
    return b;
  }

  /// Runs epoch `state.epochs_done + 1`. All randomness of an epoch derives
  /// from (seed, epoch), so a restored state continues bit-identically.
  EpochRecord run_epoch(TrainState& state) const {
    auto t0 = std::chrono::steady_clock::now();
    std::size_t epoch = state.epochs_done + 1;
    std::vector<Interaction> order = edges_;
    Rng batch_rng = make_rng(cfg_.seed, "batch", epoch);
    std::shuffle(order.begin(), order.end(), batch_rng);
    Rng neg_rng = make_rng(cfg_.seed, "negatives", epoch);
    Rng mix_rng = make_rng(cfg_.seed, "mix", epoch);
    Rng decay_rng = make_rng(cfg_.seed, "decay", epoch);

    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t n_batches = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += cfg_.batch_size) {
      std::size_t hi = std::min(order.size(), lo + cfg_.batch_size);
      Batch batch = build_batch(std::span(order).subspan(lo, hi - lo), neg_rng, mix_rng, decay_rng);
      auto step = loss_and_gradients(prop_, state.params, model_cfg_, batch, cfg_.mode, cfg_.loss_weights);
      if (!std::isfinite(step.loss.total))
        throw Error("training diverged: non-finite loss at epoch " + std::to_string(epoch));
      adam_step(state.params, step.grads, state.adam, cfg_);
      rec.loss += step.loss.total;
      rec.loss_ns += step.loss.ns;
      rec.loss_m += step.loss.m;
      rec.loss_d += step.loss.d;
      ++n_batches;
    }
    double inv = 1.0 / static_cast<double>(n_batches);
    rec.loss *= inv;
    rec.loss_ns *= inv;
    rec.loss_m *= inv;
    rec.loss_d *= inv;
    state.epochs_done = epoch;

    bool last = epoch == cfg_.epochs;
    if (cfg_.eval_every > 0 && !valid_.empty() && (epoch % cfg_.eval_every == 0 || last)) {
      double m = evaluate(state.params, model_cfg_, *g_, valid_, cfg_.eval_k).mrr;
      rec.valid_mrr = m;
      if (cfg_.select_best && m > state.best_valid_mrr) {
        state.best_valid_mrr = m;
        state.best_epoch = epoch;
        state.best_params = state.params;
      }
    }
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rec;
  }

  /// Trains until `cfg.epochs` epochs are done (or `stop_after`, if smaller).
  std::vector<EpochRecord> run(TrainState& state, std::size_t stop_after = 0,
                               const std::function<void(const EpochRecord&)>& on_epoch = {}) const {
    std::size_t until = stop_after ? std::min(stop_after, cfg_.epochs) : cfg_.epochs;
    std::vector<EpochRecord> log;
    while (state.epochs_done < until) {
      log.push_back(run_epoch(state));
      if (on_epoch) on_epoch(log.back());
    }
    return log;
  }

 private:
  const BipartiteGraph* g_;
  const DecayTable* decay_;
  ModelConfig model_cfg_;
  TrainConfig cfg_;
  std::vector<CandidateSet> valid_;
  Propagator prop_;
  std::vector<Interaction> edges_;
};

struct TrainResult {
  TrainState state;
  std::vector<EpochRecord> log;
};

inline TrainResult train(const BipartiteGraph& graph, const DecayTable* decay, const ModelConfig& model_cfg,
                         const TrainConfig& train_cfg, std::span<const CandidateSet> valid_sets = {}) {
  Trainer t(graph, decay, model_cfg, train_cfg, valid_sets);
  TrainResult r;
  r.state = t.initial_state();
  r.log = t.run(r.state);
  return r;
}

// ---- checkpoints ---------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[8] = {'M', 'I', 'X', 'D', 'E', 'C', 'C', 'K'};

struct Checkpoint {
  ModelConfig model;  // dim, layers, aggregator, activation, final embedding
  std::size_t n_users = 0, n_items = 0;
  TrainState state;
  bool has_adam = true;
};

namespace detail {

inline void put_params(io::BinaryWriter& w, const ModelParams& p) {
  w.put_doubles(p.embeddings.data);
  for (const auto& m : p.weights) w.put_doubles(m.data);
}

inline ModelParams get_params(io::BinaryReader& r, const ModelConfig& cfg, std::size_t n_nodes) {
  ModelParams p;
  p.embeddings = Matrix(n_nodes, cfg.dim);
  r.get_doubles(p.embeddings.data);
  for (std::size_t l = 0; l < cfg.effective_layers(); ++l) {
    Matrix m(cfg.dim, cfg.dim);
    r.get_doubles(m.data);
    p.weights.push_back(std::move(m));
  }
  return p;
}

}  // namespace detail

inline std::string serialize_checkpoint(const Checkpoint& c) {
  check_shapes(c.state.params, c.model, c.n_users + c.n_items);
  io::BinaryWriter w;
  w.put_bytes(std::string_view(kCheckpointMagic, 8));
  w.put<std::uint32_t>(kCheckpointVersion);
  w.put<std::uint64_t>(c.model.dim);
  w.put<std::uint64_t>(c.model.layers);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.model.aggregator));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.model.activation));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.model.final_embedding));
  w.put<std::uint64_t>(c.n_users);
  w.put<std::uint64_t>(c.n_items);
  w.put<std::uint64_t>(c.state.epochs_done);
  detail::put_params(w, c.state.params);
  w.put<std::uint8_t>(c.has_adam ? 1 : 0);
  if (c.has_adam) {
    w.put<std::uint64_t>(c.state.adam.step);
    w.put_doubles(c.state.adam.m_emb.data);
    w.put_doubles(c.state.adam.v_emb.data);
    for (std::size_t l = 0; l < c.state.adam.m_w.size(); ++l) {
      w.put_doubles(c.state.adam.m_w[l].data);
      w.put_doubles(c.state.adam.v_w[l].data);
    }
  }
  w.put<std::uint8_t>(c.state.best_params ? 1 : 0);
  w.put<double>(c.state.best_valid_mrr);
  w.put<std::uint64_t>(c.state.best_epoch);
  if (c.state.best_params) detail::put_params(w, *c.state.best_params);
  w.seal();
  return w.bytes();
}

inline Checkpoint parse_checkpoint(std::string bytes, const std::string& source = "checkpoint") {
  io::BinaryReader r(std::move(bytes), source);
  r.verify_seal();
  if (r.get_bytes(8) != std::string_view(kCheckpointMagic, 8)) throw IoError(source + ": not a checkpoint");
  auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion)
    throw IoError(source + ": checkpoint version " + std::to_string(version) + " unsupported (expected " +
                  std::to_string(kCheckpointVersion) + ")");
  Checkpoint c;
  c.model.dim = r.get<std::uint64_t>();
  c.model.layers = r.get<std::uint64_t>();
  auto agg = r.get<std::uint32_t>(), act = r.get<std::uint32_t>(), fin = r.get<std::uint32_t>();
  if (agg > 2 || act > 1 || fin > 1) throw IoError(source + ": bad model header");
  c.model.aggregator = static_cast<Aggregator>(agg);
  c.model.activation = static_cast<Activation>(act);
  c.model.final_embedding = static_cast<FinalEmbedding>(fin);
  c.n_users = r.get<std::uint64_t>();
  c.n_items = r.get<std::uint64_t>();
  c.state.epochs_done = r.get<std::uint64_t>();
  std::size_t n_nodes = c.n_users + c.n_items;
  c.state.params = detail::get_params(r, c.model, n_nodes);
  c.has_adam = r.get<std::uint8_t>() != 0;
  c.state.adam = AdamState::zeros_like(c.state.params);
  if (c.has_adam) {
    c.state.adam.step = r.get<std::uint64_t>();
    r.get_doubles(c.state.adam.m_emb.data);
    r.get_doubles(c.state.adam.v_emb.data);
    for (std::size_t l = 0; l < c.state.adam.m_w.size(); ++l) {
      r.get_doubles(c.state.adam.m_w[l].data);
      r.get_doubles(c.state.adam.v_w[l].data);
    }
  }
  bool has_best = r.get<std::uint8_t>() != 0;
  c.state.best_valid_mrr = r.get<double>();
  c.state.best_epoch = r.get<std::uint64_t>();
  if (has_best) c.state.best_params = detail::get_params(r, c.model, n_nodes);
  if (!r.at_end()) throw IoError(source + ": trailing bytes");
  return c;
}

inline void checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  io::atomic_write(path, serialize_checkpoint(c));
}

inline Checkpoint restore(const std::filesystem::path& path) {
  return parse_checkpoint(io::read_file(path), path.string());
}

}  // namespace mixdec
