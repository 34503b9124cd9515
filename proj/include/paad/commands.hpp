#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "paad/config.hpp"
#include "paad/dataset.hpp"
#include "paad/monitor.hpp"
#include "paad/trainer.hpp"

namespace paad {

// Library entry points behind the command-line subcommands, so every
// behavior is testable without spawning a process.

struct SimulateStats {
  int64_t frames = 0;
  int64_t anomalous = 0;
  double fraction = 0.0;
};

// Runs sim.episodes independent episodes (each with its own derived world
// seed) and writes one dataset file. Prints an anomaly-fraction summary.
SimulateStats cmd_simulate(const RunConfig& cfg, const std::string& out_path,
                           std::ostream& log);

// Builds the configured model (or resumes from a checkpoint), trains it
// on the recorded frames, and writes a checkpoint. Logs one line per
// epoch. ConfigError when the dataset shapes disagree with the model.
TrainResult cmd_train(const RunConfig& cfg, const std::string& data_path,
                      const std::string& out_checkpoint,
                      const std::string& resume_checkpoint, std::ostream& log);

// Evaluates each checkpoint on the recorded frames: every (frame, step)
// pair joins one flat pool. Writes a JSON report with F1 at 0.5, the
// precision-recall curve with its area, and score densities for the
// normal and failure pools. Returns the report.
nlohmann::json cmd_eval(const RunConfig& cfg, const std::vector<std::string>& checkpoints,
                        const std::string& data_path, const std::string& out_report,
                        std::ostream& log);

struct MonitorSummary {
  int64_t frames = 0;
  int windows = 0;       // maximal runs of frames with an anomalous horizon
  int detected = 0;      // windows holding at least one alert
  int false_alerts = 0;  // alerts outside every window
  int alerts = 0;
};

// Counts labeled anomaly windows and which of them the alerts hit.
MonitorSummary summarize_events(const std::vector<MonitorEvent>& events, const Dataset& ds);

// Streams the recorded frames through the runtime monitor, writing one
// "timestamp score alert" line per frame plus a JSON summary.
MonitorSummary cmd_monitor(const RunConfig& cfg, const std::string& checkpoint,
                           const std::string& data_path, const std::string& out_events,
                           const std::string& out_summary, std::ostream& log);

// Emits plot-ready delimited text (PR curve points, density grids) for
// every row of an evaluation report.
void cmd_plot(const std::string& report_path, const std::string& out_dir, std::ostream& log);

}  // namespace paad
