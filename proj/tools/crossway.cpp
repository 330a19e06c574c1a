// Command-line front end: train / eval / analyze / select over a sectioned
// key=value experiment configuration.
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crossway/harness.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> overrides;
  bool resume = false;
};

void add_common(CLI::App* app, CommonOpts& opts) {
  app->add_option("--config", opts.config_path, "experiment configuration file");
  app->add_option("--out", opts.out_dir, "output directory (overrides run.out_dir)");
  app->add_option("--seed", opts.seeds, "run seed, repeatable (overrides run.seeds)");
  app->add_option("--override", opts.overrides, "section.key=value, repeatable");
  app->add_flag("--resume", opts.resume, "resume training from an existing checkpoint");
}

crossway::ExperimentConfig resolve(const CommonOpts& opts) {
  crossway::ExperimentConfig cfg = crossway::load_config(opts.config_path, opts.overrides);
  if (!opts.out_dir.empty()) cfg.run.out_dir = opts.out_dir;
  if (!opts.seeds.empty()) cfg.run.seeds = opts.seeds;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-objective intersection control workbench"};
  app.require_subcommand(1);

  CommonOpts train_opts, eval_opts, analyze_opts, select_opts;
  CLI::App* train = app.add_subcommand("train", "train policies, one run per seed");
  add_common(train, train_opts);
  CLI::App* eval = app.add_subcommand("eval", "sweep the omega grid with trained checkpoints");
  add_common(eval, eval_opts);
  CLI::App* analyze = app.add_subcommand("analyze", "aggregate seeds and build the front report");
  add_common(analyze, analyze_opts);
  CLI::App* select = app.add_subcommand("select", "pick the fairest feasible front policy");
  add_common(select, select_opts);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return crossway::cmd_train(resolve(train_opts), train_opts.resume);
    if (eval->parsed()) return crossway::cmd_eval(resolve(eval_opts));
    if (analyze->parsed()) return crossway::cmd_analyze(resolve(analyze_opts));
    if (select->parsed()) return crossway::cmd_select(resolve(select_opts));
  } catch (const crossway::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
