#pragma once

// Flat `key = value` run configuration. Every key has a default; unknown keys
// are rejected, and values are checked against the owning module when the
// typed configs are built.

#include <cstdint>
#include <filesystem>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mixdec/decay.hpp"
#include "mixdec/error.hpp"
#include "mixdec/evaluator.hpp"
#include "mixdec/graph.hpp"
#include "mixdec/io.hpp"
#include "mixdec/model.hpp"
#include "mixdec/study.hpp"
#include "mixdec/synthetic.hpp"
#include "mixdec/trainer.hpp"

namespace mixdec {

class RunConfig {
 public:
  RunConfig() : values_(defaults()) {}

  static const std::map<std::string, std::string>& defaults() {
    static const std::map<std::string, std::string> d = {
        {"seed", "0"},
        // model
        {"dim", "128"},
        {"layers", "3"},
        {"aggregator", "gcn"},
        {"activation", "relu"},
        {"final_embedding", "last"},
        {"init_scale", "0.1"},
        // trainer
        {"epochs", "2500"},
        {"batch_size", "1024"},
        {"learning_rate", "0.001"},
        {"adam_beta1", "0.9"},
        {"adam_beta2", "0.999"},
        {"adam_eps", "1e-08"},
        {"mode", "mixdec"},
        {"eval_every", "0"},
        {"select_best", "true"},
        {"log_timing", "false"},
        {"checkpoint_every", "0"},
        {"c", "20"},
        {"c_m", "5"},
        {"c_d", "5"},
        {"alpha", "0.2"},
        {"beta", "0.5"},
        {"mix_pos_pos", "1"},
        {"mix_pos_neg", "1"},
        {"mix_pos_decay", "1"},
        {"w_ns", "1"},
        {"w_m", "1"},
        {"w_d", "1"},
        // decay sampler
        {"rho", "0.5"},
        {"k", "500"},
        {"l", "3"},
        {"decay_mode", "exact"},
        {"path_count", "shortest"},
        {"num_walks", "100"},
        {"decay_anchor", "user"},
        {"threads", "1"},
        // evaluator
        {"K", "30"},
        {"n_neg", "499"},
        {"candidates_per_user", "false"},
        {"tie_rule", "optimistic"},
        {"sparsity_ratios", "0,0.2,0.5,0.7"},
        {"sparsity_modes", "uniform,mixup,mixdec"},
        {"sparsity_seeds", "5"},
        // data
        {"input_delimiter", "tab"},
        {"min_degree", "10"},
        {"filter_strict", "false"},
        {"filter_fixpoint", "true"},
        {"split_train", "0.7"},
        {"split_valid", "0.1"},
        {"split_test", "0.2"},
        // synthetic benchmark
        {"synth_users", "200"},
        {"synth_items", "200"},
        {"synth_blocks", "10"},
        {"synth_p_in", "0.3"},
        {"synth_p_out", "0.01"},
        {"synth_min_degree", "3"},
    };
    return d;
  }

  void set(const std::string& key, const std::string& value) {
    if (!defaults().count(key)) throw ValidationError("unknown config key '" + key + "'");
    values_[key] = value;
  }

  /// Parses `key=value` (as given to --set).
  void set_assignment(const std::string& kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) throw ValidationError("expected key=value, got '" + kv + "'");
    set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
  }

  void load(std::istream& in, const std::string& source = "config") {
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      auto t = trim(line);
      if (t.empty() || t.front() == '#') continue;
      auto eq = t.find('=');
      if (eq == std::string::npos) throw ParseError(source + ": expected key = value", lineno);
      try {
        set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
      } catch (const ValidationError& e) {
        throw ValidationError(source + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

  void load_file(const std::filesystem::path& path) {
    auto in = io::open_input(path);
    load(in, path.string());
  }

  const std::string& raw(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ValidationError("unknown config key '" + key + "'");
    return it->second;
  }

  std::uint64_t get_u64(const std::string& key) const {
    const auto& v = raw(key);
    try {
      std::size_t pos = 0;
      if (!v.empty() && v.front() == '-') throw std::invalid_argument("negative");
      auto x = std::stoull(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("trailing");
      return x;
    } catch (const std::logic_error&) {
      throw ValidationError("config '" + key + "': expected a non-negative integer, got '" + v + "'");
    }
  }

  double get_double(const std::string& key) const {
    const auto& v = raw(key);
    try {
      std::size_t pos = 0;
      double x = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument("trailing");
      return x;
    } catch (const std::logic_error&) {
      throw ValidationError("config '" + key + "': expected a number, got '" + v + "'");
    }
  }

  bool get_bool(const std::string& key) const {
    const auto& v = raw(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ValidationError("config '" + key + "': expected true/false, got '" + v + "'");
  }

  std::vector<std::string> get_list(const std::string& key) const {
    std::vector<std::string> out;
    std::stringstream ss(raw(key));
    std::string item;
    while (std::getline(ss, item, ','))
      if (auto t = trim(item); !t.empty()) out.push_back(t);
    return out;
  }

  /// Sorted `key = value` lines; loading this text reproduces the config.
  std::string resolved() const {
    std::ostringstream ss;
    for (const auto& [k, v] : values_) ss << k << " = " << v << '\n';
    return ss.str();
  }

  // ---- typed views; each validates against its module ----

  ModelConfig model() const {
    ModelConfig m;
    m.dim = get_u64("dim");
    m.layers = get_u64("layers");
    m.aggregator = parse_aggregator(raw("aggregator"));
    m.activation = pick<Activation>("activation", {{"relu", Activation::Relu}, {"none", Activation::None}});
    m.final_embedding =
        pick<FinalEmbedding>("final_embedding", {{"last", FinalEmbedding::LastLayer}, {"mean", FinalEmbedding::LayerMean}});
    m.init_scale = get_double("init_scale");
    m.seed = get_u64("seed");
    m.validate();
    return m;
  }

  TrainConfig train() const {
    TrainConfig t;
    t.epochs = get_u64("epochs");
    t.batch_size = get_u64("batch_size");
    t.learning_rate = get_double("learning_rate");
    t.adam_beta1 = get_double("adam_beta1");
    t.adam_beta2 = get_double("adam_beta2");
    t.adam_eps = get_double("adam_eps");
    t.mode = parse_mode(raw("mode"));
    t.eval_every = get_u64("eval_every");
    t.eval_k = get_u64("K");
    t.select_best = get_bool("select_best");
    t.log_timing = get_bool("log_timing");
    t.seed = get_u64("seed");
    t.counts = {get_u64("c"), get_u64("c_m"), get_u64("c_d")};
    t.beta = {get_double("alpha"), get_double("beta")};
    t.proportions = {get_double("mix_pos_pos"), get_double("mix_pos_neg"), get_double("mix_pos_decay")};
    t.loss_weights = {get_double("w_ns"), get_double("w_m"), get_double("w_d")};
    t.validate();
    return t;
  }

  DecayConfig decay() const {
    DecayConfig d;
    d.hops = static_cast<std::uint32_t>(get_u64("l"));
    d.rho = get_double("rho");
    d.k = get_u64("k");
    d.mode = pick<DecayMode>("decay_mode", {{"exact", DecayMode::ExactBfs}, {"walk", DecayMode::RandomWalk}});
    d.path_count = pick<PathCountMode>(
        "path_count", {{"shortest", PathCountMode::ShortestPaths}, {"all_walks", PathCountMode::AllWalks}});
    d.num_walks = get_u64("num_walks");
    d.seed = get_u64("seed");
    d.anchor_kind = pick<NodeKind>("decay_anchor", {{"user", NodeKind::User}, {"item", NodeKind::Item}});
    d.validate();
    return d;
  }

  CandidateOptions candidates() const {
    CandidateOptions c;
    c.n_neg = get_u64("n_neg");
    c.seed = get_u64("seed");
    c.per_user = get_bool("candidates_per_user");
    if (c.n_neg < 1) throw ValidationError("n_neg must be >= 1");
    return c;
  }

  TieRule tie_rule() const {
    return pick<TieRule>("tie_rule", {{"optimistic", TieRule::Optimistic}, {"pessimistic", TieRule::Pessimistic}});
  }

  FilterOptions filter() const {
    FilterOptions f;
    f.min_degree = get_u64("min_degree");
    f.strict = get_bool("filter_strict");
    f.fixpoint = get_bool("filter_fixpoint");
    if (f.min_degree < 1) throw ValidationError("min_degree must be >= 1");
    return f;
  }

  InteractionFileFormat input_format() const {
    InteractionFileFormat f;
    f.delimiter = pick<InteractionFileFormat::Delimiter>(
        "input_delimiter",
        {{"tab", InteractionFileFormat::Delimiter::Tab}, {"whitespace", InteractionFileFormat::Delimiter::Whitespace}});
    return f;
  }

  SplitRatios split() const {
    SplitRatios r{get_double("split_train"), get_double("split_valid"), get_double("split_test")};
    validate(r);
    return r;
  }

  SyntheticGraphSpec synthetic() const {
    SyntheticGraphSpec s;
    s.n_users = get_u64("synth_users");
    s.n_items = get_u64("synth_items");
    s.n_blocks = get_u64("synth_blocks");
    s.in_block_edge_prob = get_double("synth_p_in");
    s.cross_block_edge_prob = get_double("synth_p_out");
    s.min_degree = get_u64("synth_min_degree");
    s.seed = get_u64("seed");
    s.validate();
    return s;
  }

  PipelineConfig pipeline() const {
    PipelineConfig p;
    p.model = model();
    p.train = train();
    p.decay = decay();
    p.candidates = candidates();
    p.k = get_u64("K");
    p.tie = tie_rule();
    p.threads = static_cast<unsigned>(get_u64("threads"));
    if (p.k < 1) throw ValidationError("K must be >= 1");
    return p;
  }

  std::vector<double> sparsity_ratios() const {
    std::vector<double> out;
    for (const auto& s : get_list("sparsity_ratios")) {
      try {
        out.push_back(std::stod(s));
      } catch (const std::logic_error&) {
        throw ValidationError("sparsity_ratios: bad value '" + s + "'");
      }
      if (!(out.back() >= 0.0 && out.back() < 1.0)) throw ValidationError("sparsity ratios must be in [0, 1)");
    }
    if (out.empty()) throw ValidationError("sparsity_ratios is empty");
    return out;
  }

  std::vector<SamplingMode> sparsity_modes() const {
    std::vector<SamplingMode> out;
    for (const auto& s : get_list("sparsity_modes")) out.push_back(parse_mode(s));
    if (out.empty()) throw ValidationError("sparsity_modes is empty");
    return out;
  }

  /// Seeds used by the sparsity study: `seed`, `seed + 1`, ...
  std::vector<std::uint64_t> sparsity_seeds() const {
    std::vector<std::uint64_t> out;
    auto n = get_u64("sparsity_seeds");
    if (n < 1) throw ValidationError("sparsity_seeds must be >= 1");
    for (std::uint64_t s = 0; s < n; ++s) out.push_back(get_u64("seed") + s);
    return out;
  }

  static SamplingMode parse_mode(const std::string& s) {
    if (s == "uniform") return SamplingMode::UniformOnly;
    if (s == "mixup") return SamplingMode::Mixup;
    if (s == "decay") return SamplingMode::Decay;
    if (s == "mixdec") return SamplingMode::MixDec;
    throw ValidationError("unknown sampling mode '" + s + "' (uniform|mixup|decay|mixdec)");
  }

  static Aggregator parse_aggregator(const std::string& s) {
    if (s == "embedding") return Aggregator::EmbeddingOnly;
    if (s == "sage") return Aggregator::MeanSage;
    if (s == "gcn") return Aggregator::GcnNorm;
    throw ValidationError("unknown aggregator '" + s + "' (embedding|sage|gcn)");
  }

 private:
  static std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
  }

  template <class E>
  E pick(const std::string& key, std::initializer_list<std::pair<const char*, E>> options) const {
    const auto& v = raw(key);
    std::string names;
    for (const auto& [name, value] : options) {
      if (v == name) return value;
      names += names.empty() ? name : std::string("|") + name;
    }
    throw ValidationError("config '" + key + "': expected " + names + ", got '" + v + "'");
  }

  std::map<std::string, std::string> values_;
};

}  // namespace mixdec
