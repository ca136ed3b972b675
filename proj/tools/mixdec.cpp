#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mixdec/commands.hpp"

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  bool quiet = false;

  void attach(CLI::App* sub) {
    sub->add_option("--config", config, "key = value config file");
    sub->add_option("--set", sets, "override one key (key=value); repeatable");
    sub->add_option("--seed", seed, "master seed for every random stream");
    sub->add_flag("-q,--quiet", quiet, "suppress progress and warnings");
  }

  mixdec::RunConfig resolve() const {
    mixdec::RunConfig cfg;
    if (!config.empty()) cfg.load_file(config);
    for (const auto& kv : sets) cfg.set_assignment(kv);
    if (seed) cfg.set("seed", std::to_string(*seed));
    mixdec::log::set_quiet(quiet);
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  namespace cmd = mixdec::cmd;
  CLI::App app{"Graph recommender training with soft-link sampling"};
  app.require_subcommand(1);

  Common common;
  std::string run, input, split_dir, decay_file, checkpoint_path;
  bool resume = false;

  auto* synth = app.add_subcommand("synth", "generate a planted-block interaction graph");
  auto* ingest = app.add_subcommand("ingest", "load and degree-filter a raw interaction file");
  auto* split = app.add_subcommand("split", "split interactions into train/valid/test per user");
  auto* decay = app.add_subcommand("precompute-decay", "build decay sets from a split's training graph");
  auto* train = app.add_subcommand("train", "train a model and score it on the test split");
  auto* eval = app.add_subcommand("evaluate", "score a checkpoint on the test split");
  auto* sparsity = app.add_subcommand("sparsity", "edge-dropping study across sampling modes");

  for (auto* sub : {synth, ingest, split, decay, train, eval, sparsity}) {
    common.attach(sub);
    sub->add_option("--run", run, "output directory")->required();
  }
  for (auto* sub : {ingest, split}) sub->add_option("--input", input, "interaction file")->required();
  for (auto* sub : {decay, train, eval, sparsity})
    sub->add_option("--split", split_dir, "split directory (from `split`)")->required();
  train->add_option("--decay", decay_file, "precomputed decay table (default: build in-process)");
  train->add_flag("--resume", resume, "continue from <run>/checkpoint.bin if present");
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return cmd::kExitValidation;
  }

  try {
    auto cfg = common.resolve();
    if (synth->parsed()) {
      cmd::synth(cfg, run);
    } else if (ingest->parsed()) {
      cmd::ingest(cfg, input, run);
    } else if (split->parsed()) {
      cmd::split(cfg, input, run);
    } else if (decay->parsed()) {
      cmd::precompute_decay(cfg, split_dir, run);
    } else if (train->parsed()) {
      cmd::TrainOptions opt;
      if (!decay_file.empty()) opt.decay_file = decay_file;
      opt.resume = resume;
      cmd::train(cfg, split_dir, run, opt);
    } else if (eval->parsed()) {
      cmd::evaluate(cfg, split_dir, checkpoint_path, run);
    } else if (sparsity->parsed()) {
      cmd::sparsity(cfg, split_dir, run);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cmd::exit_code_for(e);
  }
  return cmd::kExitOk;
}
