#pragma once

// End-to-end train + evaluate runs and the edge-dropping sparsity study.

#include <cstdint>
#include <cstdio>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mixdec/decay.hpp"
#include "mixdec/evaluator.hpp"
#include "mixdec/graph.hpp"
#include "mixdec/model.hpp"
#include "mixdec/trainer.hpp"

namespace mixdec {

inline const char* mode_name(SamplingMode m) {
  switch (m) {
    case SamplingMode::UniformOnly: return "uniform";
    case SamplingMode::Mixup: return "mixup";
    case SamplingMode::Decay: return "decay";
    case SamplingMode::MixDec: return "mixdec";
  }
  return "?";
}

inline const char* mode_label(SamplingMode m) {
  switch (m) {
    case SamplingMode::UniformOnly: return "Uniform Negative Sampling";
    case SamplingMode::Mixup: return "Mixup Sampling";
    case SamplingMode::Decay: return "Decay Sampling";
    case SamplingMode::MixDec: return "MixDec Sampling";
  }
  return "?";
}

struct PipelineConfig {
  ModelConfig model;
  TrainConfig train;
  DecayConfig decay;
  CandidateOptions candidates;
  std::size_t k = 30;
  TieRule tie = TieRule::Optimistic;
  unsigned threads = 1;
};

/// A split with its training graph and fixed validation/test candidate sets.
struct PreparedData {
  InteractionDataset dataset;
  DatasetSplit split;
  BipartiteGraph train_graph;
  std::vector<CandidateSet> valid_sets, test_sets;
};

inline PreparedData prepare(InteractionDataset ds, DatasetSplit split, const CandidateOptions& cand) {
  PreparedData p;
  p.train_graph = build_graph(ds.n_users(), ds.n_items(), split.train);
  CandidateOptions vopt = cand;
  vopt.seed = derive_seed(cand.seed, "valid-candidates");
  p.valid_sets = build_candidate_sets(split.valid, ds.interactions, ds.n_users(), ds.n_items(), vopt);
  p.test_sets = build_candidate_sets(split.test, ds.interactions, ds.n_users(), ds.n_items(), cand);
  p.dataset = std::move(ds);
  p.split = std::move(split);
  return p;
}

struct RunOutcome {
  MetricsReport test;
  TrainResult training;
};

/// Trains one sampling mode on `train_graph` (decay sets built from it when
/// needed) and scores the selected parameters on the test candidate sets.
inline RunOutcome run_mode(const PreparedData& data, const BipartiteGraph& train_graph, PipelineConfig cfg,
                           SamplingMode mode) {
  cfg.train.mode = mode;
  std::optional<DecayTable> decay;
  if (uses_decay(mode)) decay = precompute_all(train_graph, cfg.decay, cfg.threads);
  RunOutcome out;
  out.training = train(train_graph, decay ? &*decay : nullptr, cfg.model, cfg.train, data.valid_sets);
  out.test = evaluate(out.training.state.selected(), cfg.model, train_graph, data.test_sets, cfg.k, cfg.tie);
  return out;
}

struct SparsityTable {
  std::vector<double> ratios;
  std::vector<SamplingMode> modes;
  std::vector<std::uint64_t> seeds;
  // mrr[mode][ratio][seed]
  std::vector<std::vector<std::vector<double>>> mrr;

  double mean(std::size_t mode, std::size_t ratio) const {
    const auto& v = mrr[mode][ratio];
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  }

  /// Rows are modes, columns are dropping ratios; modes after the first also
  /// get an improvement row relative to the first mode.
  std::string to_text() const {
    std::ostringstream ss;
    char buf[64];
    constexpr std::size_t label_w = 28;
    auto pad = [](const std::string& s) { return s + std::string(s.size() < label_w ? label_w - s.size() : 1, ' '); };
    ss << pad("Dropping Ratio");
    for (double r : ratios) {
      std::snprintf(buf, sizeof buf, "%10.0f%%", r * 100.0);
      ss << buf;
    }
    ss << '\n';
    for (std::size_t m = 0; m < modes.size(); ++m) {
      ss << pad(mode_label(modes[m]));
      for (std::size_t r = 0; r < ratios.size(); ++r) {
        std::snprintf(buf, sizeof buf, "%11.4f", mean(m, r));
        ss << buf;
      }
      ss << '\n';
      if (m > 0) {
        ss << pad("Improvement");
        for (std::size_t r = 0; r < ratios.size(); ++r) {
          double base = mean(0, r);
          double imp = base > 0 ? (mean(m, r) - base) / base * 100.0 : 0.0;
          std::snprintf(buf, sizeof buf, "%10.2f%%", imp);
          ss << buf;
        }
        ss << '\n';
      }
    }
    return ss.str();
  }
};

/// For each ratio and seed, drops that share of training edges, retrains every
/// mode from the same initialization and evaluates on the fixed test sets.
inline SparsityTable sparsity_study(const PreparedData& data, const std::vector<double>& ratios,
                                    const std::vector<SamplingMode>& modes, const std::vector<std::uint64_t>& seeds,
                                    const PipelineConfig& base) {
  SparsityTable t{ratios, modes, seeds, {}};
  t.mrr.assign(modes.size(), std::vector<std::vector<double>>(ratios.size()));
  for (std::size_t r = 0; r < ratios.size(); ++r) {
    for (std::uint64_t seed : seeds) {
      BipartiteGraph g = drop_edges(data.train_graph, ratios[r], derive_seed(seed, "sparsity-drop", r));
      PipelineConfig cfg = base;
      cfg.model.seed = seed;
      cfg.train.seed = seed;
      cfg.decay.seed = seed;
      for (std::size_t m = 0; m < modes.size(); ++m)
        t.mrr[m][r].push_back(run_mode(data, g, cfg, modes[m]).test.mrr);
    }
  }
  return t;
}

}  // namespace mixdec
