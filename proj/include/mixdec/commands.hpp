#pragma once

// One function per CLI verb. Each reads its inputs, runs the matching module
// pipeline and writes its artifacts atomically under a run directory, next to
// the resolved config that produced them.

#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mixdec/config.hpp"
#include "mixdec/decay.hpp"
#include "mixdec/error.hpp"
#include "mixdec/evaluator.hpp"
#include "mixdec/graph.hpp"
#include "mixdec/io.hpp"
#include "mixdec/log.hpp"
#include "mixdec/study.hpp"
#include "mixdec/synthetic.hpp"
#include "mixdec/trainer.hpp"

namespace mixdec::cmd {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitMissingInput = 2;
inline constexpr int kExitValidation = 3;

/// Exit status for an exception escaping a command.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const MissingInputError*>(&e)) return kExitMissingInput;
  if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const ParseError*>(&e)) return kExitValidation;
  return kExitRuntime;
}

inline void write_resolved(const fs::path& run, const RunConfig& cfg) {
  io::atomic_write(run / "config.resolved", cfg.resolved());
}

inline void write_dataset(const fs::path& path, const InteractionDataset& ds) {
  std::ostringstream ss;
  write_interactions(ss, ds, ds.interactions);
  io::atomic_write(path, ss.str());
}

inline void require_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw MissingInputError("no such directory: " + dir.string());
}

/// synth: run/interactions.tsv
inline void synth(const RunConfig& cfg, const fs::path& run) {
  auto spec = cfg.synthetic();
  auto ds = generate_synthetic(spec);
  write_resolved(run, cfg);
  write_dataset(run / "interactions.tsv", ds);
  log::info("synth: " + std::to_string(ds.n_users()) + " users, " + std::to_string(ds.n_items()) + " items, " +
            std::to_string(ds.interactions.size()) + " interactions");
}

/// ingest: raw interaction file -> filtered run/interactions.tsv
inline void ingest(const RunConfig& cfg, const fs::path& input, const fs::path& run) {
  auto fmt = cfg.input_format();
  auto opt = cfg.filter();
  auto raw = load_interactions(input, fmt);
  auto ds = filter_min_interactions(raw, opt);
  write_resolved(run, cfg);
  write_dataset(run / "interactions.tsv", ds);
  log::info("ingest: kept " + std::to_string(ds.interactions.size()) + " of " +
            std::to_string(raw.interactions.size()) + " interactions (" + std::to_string(raw.duplicates_dropped) +
            " duplicates dropped)");
}

/// split: interaction file -> run/split/{nodes,train,valid,test}.tsv, seed.txt
inline void split(const RunConfig& cfg, const fs::path& input, const fs::path& run) {
  auto ratios = cfg.split();
  auto ds = load_interactions(input, cfg.input_format());
  auto sp = split_dataset(ds, ratios, cfg.get_u64("seed"));
  write_resolved(run, cfg);
  write_split(run / "split", ds, sp);
}

inline PreparedData load_prepared(const RunConfig& cfg, const fs::path& split_dir) {
  require_dir(split_dir);
  auto cand = cfg.candidates();
  auto b = read_split(split_dir);
  return prepare(std::move(b.dataset), std::move(b.split), cand);
}

/// precompute-decay: training graph of a split -> run/decay.tsv
inline void precompute_decay(const RunConfig& cfg, const fs::path& split_dir, const fs::path& run) {
  auto dcfg = cfg.decay();
  require_dir(split_dir);
  auto b = read_split(split_dir);
  auto g = build_graph(b.dataset.n_users(), b.dataset.n_items(), b.split.train);
  auto table = precompute_all(g, dcfg, static_cast<unsigned>(cfg.get_u64("threads")));
  write_resolved(run, cfg);
  write_decay_table(run / "decay.tsv", table);
}

inline void require_same_model(const ModelConfig& stored, const ModelConfig& want) {
  auto field = [](const char* name, std::size_t a, std::size_t b) {
    if (a != b)
      throw ValidationError(std::string("checkpoint ") + name + " = " + std::to_string(a) + " but config has " +
                            std::to_string(b));
  };
  field("dim", stored.dim, want.dim);
  field("layers", stored.effective_layers(), want.effective_layers());
  field("aggregator", static_cast<std::size_t>(stored.aggregator), static_cast<std::size_t>(want.aggregator));
  field("activation", static_cast<std::size_t>(stored.activation), static_cast<std::size_t>(want.activation));
  field("final_embedding", static_cast<std::size_t>(stored.final_embedding),
        static_cast<std::size_t>(want.final_embedding));
}

inline void require_same_graph(const Checkpoint& c, const BipartiteGraph& g) {
  if (c.n_users != g.n_users() || c.n_items != g.n_items())
    throw ValidationError("checkpoint covers " + std::to_string(c.n_users) + " users x " +
                          std::to_string(c.n_items) + " items, split has " + std::to_string(g.n_users()) + " x " +
                          std::to_string(g.n_items()));
}

struct TrainOptions {
  std::optional<fs::path> decay_file;  // computed in-process when absent
  bool resume = false;                 // continue from run/checkpoint.bin
};

/// train: run/{config.resolved, train.log.jsonl, checkpoint.bin, metrics.json}
inline void train(const RunConfig& cfg, const fs::path& split_dir, const fs::path& run, const TrainOptions& opt = {}) {
  auto pc = cfg.pipeline();
  auto every = cfg.get_u64("checkpoint_every");
  auto data = load_prepared(cfg, split_dir);

  std::optional<DecayTable> decay;
  if (uses_decay(pc.train.mode)) {
    decay = opt.decay_file ? read_decay_table(*opt.decay_file)
                           : precompute_all(data.train_graph, pc.decay, pc.threads);
  }
  Trainer trainer(data.train_graph, decay ? &*decay : nullptr, pc.model, pc.train, data.valid_sets);

  TrainState state;
  std::vector<std::string> lines;
  const fs::path ck_path = run / "checkpoint.bin", log_path = run / "train.log.jsonl";
  if (opt.resume && fs::exists(ck_path)) {
    auto c = restore(ck_path);
    require_same_model(c.model, pc.model);
    require_same_graph(c, data.train_graph);
    if (!c.has_adam) throw ValidationError("checkpoint has no optimizer state; cannot resume");
    state = std::move(c.state);
    if (fs::exists(log_path)) {
      std::istringstream in(io::read_file(log_path));
      std::string line;
      while (lines.size() < state.epochs_done && std::getline(in, line))
        if (!line.empty()) lines.push_back(line);
    }
    log::info("train: resuming after epoch " + std::to_string(state.epochs_done));
  } else {
    state = trainer.initial_state();
  }

  auto save = [&] {
    Checkpoint c{pc.model, data.train_graph.n_users(), data.train_graph.n_items(), state, true};
    checkpoint(ck_path, c);
    std::string text;
    for (const auto& l : lines) text += l + '\n';
    io::atomic_write(log_path, text);
  };

  write_resolved(run, cfg);
  trainer.run(state, 0, [&](const EpochRecord& rec) {
    lines.push_back(rec.to_json(pc.train.log_timing));
    if (every > 0 && rec.epoch % every == 0 && rec.epoch < pc.train.epochs) save();
  });
  save();

  auto report = evaluate(state.selected(), pc.model, data.train_graph, data.test_sets, pc.k, pc.tie);
  io::atomic_write(run / "metrics.json", report.to_json());
  char buf[96];
  std::snprintf(buf, sizeof buf, "train: test MRR %.4f, Hit@%zu %.4f", report.mrr, pc.k, report.hit_at_k);
  log::info(buf);
}

/// evaluate: checkpoint on the test split -> run/metrics.json
inline void evaluate(const RunConfig& cfg, const fs::path& split_dir, const fs::path& checkpoint_path,
                     const fs::path& run) {
  auto pc = cfg.pipeline();
  auto data = load_prepared(cfg, split_dir);
  auto c = restore(checkpoint_path);
  require_same_model(c.model, pc.model);
  require_same_graph(c, data.train_graph);
  auto report = mixdec::evaluate(c.state.selected(), pc.model, data.train_graph, data.test_sets, pc.k, pc.tie);
  write_resolved(run, cfg);
  io::atomic_write(run / "metrics.json", report.to_json());
}

/// sparsity: edge-dropping study -> run/sparsity.txt
inline void sparsity(const RunConfig& cfg, const fs::path& split_dir, const fs::path& run) {
  auto pc = cfg.pipeline();
  auto ratios = cfg.sparsity_ratios();
  auto modes = cfg.sparsity_modes();
  auto seeds = cfg.sparsity_seeds();
  auto data = load_prepared(cfg, split_dir);
  write_resolved(run, cfg);
  auto table = sparsity_study(data, ratios, modes, seeds, pc);
  io::atomic_write(run / "sparsity.txt", table.to_text());
}

}  // namespace mixdec::cmd
