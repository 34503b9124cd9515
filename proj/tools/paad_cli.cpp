// Command-line front end: simulate corridors, train the failure predictor,
// evaluate checkpoints, stream the runtime monitor, and emit plot data.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "paad/commands.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  uint64_t seed = 0;
  bool seed_set = false;
};

paad::RunConfig resolve_config(const CommonArgs& args) {
  paad::RunConfig cfg =
      args.config_path.empty() ? paad::default_run_config() : paad::load_run_config(args.config_path);
  if (args.seed_set) cfg.seed = args.seed;
  return cfg;
}

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON run configuration")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", args.seed, "master seed override")
      ->each([&](const std::string&) { args.seed_set = true; });
}

struct AblationArgs {
  std::string fusion, attention, path_view;
  bool no_reconstruction = false;
};

void add_ablations(CLI::App* cmd, AblationArgs& args) {
  cmd->add_option("--fusion-mode", args.fusion, "both | camera_only | lidar_only");
  cmd->add_option("--attention", args.attention, "mha | mlp");
  cmd->add_flag("--no-reconstruction", args.no_reconstruction,
                "drop the decoder and its loss terms");
  cmd->add_option("--path-view", args.path_view, "front | bev");
}

void apply_ablations(paad::RunConfig& cfg, const AblationArgs& args) {
  if (!args.fusion.empty()) cfg.model.fusion = paad::fusion_from_string(args.fusion);
  if (!args.attention.empty()) cfg.model.attention = paad::attention_from_string(args.attention);
  if (args.no_reconstruction) cfg.model.reconstruction = false;
  if (!args.path_view.empty()) cfg.model.path_view = paad::path_view_from_string(args.path_view);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"proactive failure prediction for corridor navigation"};
  app.require_subcommand(1);

  CommonArgs sim_common, train_common, eval_common, mon_common;
  AblationArgs ablations;

  auto* sim = app.add_subcommand("simulate", "generate a recorded dataset");
  std::string sim_out = "data.pads";
  add_common(sim, sim_common);
  sim->add_option("--out", sim_out, "dataset file to write");

  auto* train = app.add_subcommand("train", "fit the predictor on a dataset");
  std::string train_data, train_out = "model.paad", train_resume;
  add_common(train, train_common);
  add_ablations(train, ablations);
  train->add_option("--data", train_data, "training dataset")->required()->check(CLI::ExistingFile);
  train->add_option("--out", train_out, "checkpoint file to write");
  train->add_option("--resume", train_resume, "checkpoint to continue from")
      ->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "offline metrics for one or more checkpoints");
  std::vector<std::string> eval_ckpts;
  std::string eval_data, eval_out = "report.json";
  add_common(eval, eval_common);
  eval->add_option("--checkpoint", eval_ckpts, "checkpoint(s) to evaluate; repeat for a grid")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--data", eval_data, "evaluation dataset")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", eval_out, "JSON report to write");

  auto* mon = app.add_subcommand("monitor", "stream frames through the runtime monitor");
  std::string mon_ckpt, mon_data, mon_out = "events.log", mon_summary;
  add_common(mon, mon_common);
  mon->add_option("--checkpoint", mon_ckpt, "checkpoint to run")->required()->check(CLI::ExistingFile);
  mon->add_option("--data", mon_data, "recorded stream")->required()->check(CLI::ExistingFile);
  mon->add_option("--out", mon_out, "event log to write");
  mon->add_option("--summary", mon_summary, "JSON summary to write");

  auto* plot = app.add_subcommand("plot", "emit plot-ready text from an eval report");
  std::string plot_report, plot_dir = "plots";
  plot->add_option("--report", plot_report, "evaluation report")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", plot_dir, "directory for the delimited files");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) {
      paad::cmd_simulate(resolve_config(sim_common), sim_out, std::cout);
    } else if (train->parsed()) {
      paad::RunConfig cfg = resolve_config(train_common);
      apply_ablations(cfg, ablations);
      paad::cmd_train(cfg, train_data, train_out, train_resume, std::cout);
    } else if (eval->parsed()) {
      paad::cmd_eval(resolve_config(eval_common), eval_ckpts, eval_data, eval_out, std::cout);
    } else if (mon->parsed()) {
      paad::cmd_monitor(resolve_config(mon_common), mon_ckpt, mon_data, mon_out, mon_summary,
                        std::cout);
    } else if (plot->parsed()) {
      paad::cmd_plot(plot_report, plot_dir, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
