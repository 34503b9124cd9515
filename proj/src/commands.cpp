#include "paad/commands.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>

#include "paad/checkpoint.hpp"
#include "paad/metrics.hpp"

namespace paad {

using nlohmann::json;

SimulateStats cmd_simulate(const RunConfig& cfg, const std::string& out_path,
                           std::ostream& log) {
  cfg.validate();
  std::vector<ObservationFrame> frames;
  frames.reserve(static_cast<size_t>(cfg.sim.episodes) * cfg.sim.steps);
  for (int e = 0; e < cfg.sim.episodes; ++e) {
    WorldConfig world = cfg.world;
    // every episode gets its own corridor and fault sequence
    world.seed = Rng::derive(cfg.seed, {kStreamWorld, static_cast<uint64_t>(e)}).next_u64();
    std::vector<ObservationFrame> ep =
        run_episode(world, cfg.camera, cfg.sim.steps, cfg.model.horizon,
                    static_cast<uint32_t>(e));
    frames.insert(frames.end(), std::make_move_iterator(ep.begin()),
                  std::make_move_iterator(ep.end()));
  }
  Dataset ds = dataset_from_frames(std::move(frames), cfg.camera.image_h, cfg.camera.image_w,
                                   kLidarBeams, cfg.model.horizon);
  save_dataset(ds, out_path);

  SimulateStats stats;
  stats.frames = static_cast<int64_t>(ds.frames.size());
  stats.anomalous = ds.anomalous_count();
  stats.fraction = stats.frames > 0
                       ? static_cast<double>(stats.anomalous) / static_cast<double>(stats.frames)
                       : 0.0;
  log << "wrote " << stats.frames << " frames (" << cfg.sim.episodes << " episodes) to "
      << out_path << "\n";
  log << "anomalous frames: " << stats.anomalous << " (" << std::fixed << std::setprecision(2)
      << 100.0 * stats.fraction << "%)\n";
  log.flush();
  return stats;
}

namespace {

void check_shapes(const ModelT<float>& m, const Dataset& ds) {
  if (m.cfg.has_camera() &&
      (ds.image_h != m.cfg.image_h || ds.image_w != m.cfg.image_w))
    throw ConfigError("dataset image " + std::to_string(ds.image_h) + "x" +
                      std::to_string(ds.image_w) + " does not match the model input");
  if (m.cfg.has_lidar() && ds.lidar_beams != m.cfg.lidar_beams)
    throw ConfigError("dataset beam count does not match the model input");
  if (ds.horizon != m.cfg.horizon)
    throw ConfigError("dataset horizon does not match the model");
}

std::string ablation_label(const PaadConfig& c) {
  std::string s = "fusion=";
  s += to_string(c.fusion);
  s += " attention=";
  s += to_string(c.attention);
  s += c.reconstruction ? " reconstruction=on" : " reconstruction=off";
  s += " path_view=";
  s += to_string(c.path_view);
  return s;
}

json kde_to_json(const DensityEstimate& est) {
  return json{{"bandwidth", est.bandwidth}, {"x", est.x}, {"density", est.density}};
}

}  // namespace

TrainResult cmd_train(const RunConfig& cfg, const std::string& data_path,
                      const std::string& out_checkpoint,
                      const std::string& resume_checkpoint, std::ostream& log) {
  cfg.validate();
  const Dataset ds = load_dataset(data_path);
  ModelT<float> m = resume_checkpoint.empty()
                        ? build_model<float>(cfg.model, cfg.camera, cfg.bev, cfg.seed)
                        : load_checkpoint(resume_checkpoint);
  m.training = true;
  check_shapes(m, ds);
  log << "training " << ablation_label(m.cfg) << " on " << ds.frames.size() << " frames ("
      << ds.anomalous_count() << " anomalous), seed " << cfg.seed << "\n";

  const TrainResult res = train_model(m, ds, cfg.train, cfg.seed, [&](const EpochLog& ep) {
    char line[192];
    std::snprintf(line, sizeof(line),
                  "epoch %3d  total %12.4f  bce/frame %.5f  recon %12.4f  kl %10.4f",
                  ep.epoch, ep.loss.total, ep.mean_bce, ep.loss.recon_nll, ep.loss.kl);
    log << line;
    if (ep.val_bce >= 0.0) {
      std::snprintf(line, sizeof(line), "  val bce/frame %.5f", ep.val_bce);
      log << line;
    }
    if (ep.val_pr_auc >= 0.0) {
      std::snprintf(line, sizeof(line), "  val pr-auc %.4f", ep.val_pr_auc);
      log << line;
    }
    log << "\n";
    log.flush();
  });
  if (res.early_stopped) log << "early stop: train bce reached the target\n";
  if (res.best_epoch >= 0) {
    const EpochLog& kept = res.epochs[static_cast<size_t>(res.best_epoch)];
    log << "kept epoch " << res.best_epoch;
    if (kept.val_pr_auc >= 0.0) log << " (val pr-auc " << kept.val_pr_auc << ")";
    else log << " (val bce/frame " << kept.val_bce << ")";
    log << "\n";
  }
  save_checkpoint(m, out_checkpoint);
  log << "checkpoint written to " << out_checkpoint << "\n";
  log.flush();
  return res;
}

json cmd_eval(const RunConfig& cfg, const std::vector<std::string>& checkpoints,
              const std::string& data_path, const std::string& out_report,
              std::ostream& log) {
  cfg.eval.validate();
  cfg.monitor.validate();
  if (checkpoints.empty()) throw InputError("evaluation needs at least one checkpoint");
  const Dataset ds = load_dataset(data_path);
  if (ds.frames.empty()) throw InputError("evaluation needs a nonempty dataset");

  json rows = json::array();
  for (const std::string& path : checkpoints) {
    ModelT<float> m = load_checkpoint(path);
    m.training = false;
    check_shapes(m, ds);

    // one flat pool of (frame, horizon step) pairs
    std::vector<float> preds;
    std::vector<uint8_t> labels;
    preds.reserve(ds.frames.size() * ds.horizon);
    labels.reserve(ds.frames.size() * ds.horizon);
    for (const ObservationFrame& f : ds.frames) {
      const std::vector<float> profile = predict(m, f);
      preds.insert(preds.end(), profile.begin(), profile.end());
      labels.insert(labels.end(), f.labels.begin(), f.labels.end());
    }

    const F1Result f1 = f1_at_half(preds, labels);
    int64_t positives = 0;
    for (uint8_t y : labels) positives += y;

    json row{{"checkpoint", path},
             {"label", ablation_label(m.cfg)},
             {"frames", ds.frames.size()},
             {"pool", preds.size()},
             {"positives", positives},
             {"gamma", cfg.monitor.gamma},
             {"f1",
              {{"precision", f1.precision},
               {"recall", f1.recall},
               {"f1", f1.f1},
               {"degenerate", f1.degenerate}}}};

    if (positives > 0 && positives < static_cast<int64_t>(labels.size())) {
      const PrCurve pr = pr_auc(preds, labels);
      json points = json::array();
      for (const PrPoint& p : pr.points)
        points.push_back({p.threshold, p.precision, p.recall});
      row["pr"] = {{"auc", pr.auc}, {"points", points}};
    } else {
      row["pr"] = nullptr;
    }

    std::vector<float> normal_scores, failure_scores;
    for (size_t i = 0; i < preds.size(); ++i)
      (labels[i] ? failure_scores : normal_scores).push_back(preds[i]);
    row["kde_normal"] = normal_scores.size() >= 2
                            ? kde_to_json(kde_bounded(normal_scores, cfg.eval.kde_grid))
                            : json(nullptr);
    row["kde_failure"] = failure_scores.size() >= 2
                             ? kde_to_json(kde_bounded(failure_scores, cfg.eval.kde_grid))
                             : json(nullptr);
    rows.push_back(std::move(row));

    char line[160];
    std::snprintf(line, sizeof(line), "%s  f1 %.4f  pr-auc %s  (pool %zu, positives %" PRId64 ")",
                  ablation_label(m.cfg).c_str(), f1.f1,
                  rows.back()["pr"].is_null()
                      ? "n/a"
                      : std::to_string(rows.back()["pr"]["auc"].get<double>()).c_str(),
                  preds.size(), positives);
    log << line << "\n";
    log.flush();
  }

  json report{{"kde_grid", cfg.eval.kde_grid}, {"rows", rows}};
  if (!out_report.empty()) {
    std::ofstream out(out_report);
    if (!out) throw IoError("cannot write report file: " + out_report);
    out << report.dump(2) << "\n";
    if (!out) throw IoError("short write to report file: " + out_report);
    log << "report written to " << out_report << "\n";
  }
  return report;
}

MonitorSummary summarize_events(const std::vector<MonitorEvent>& events, const Dataset& ds) {
  if (events.size() != ds.frames.size())
    throw InputError("event log and dataset disagree on frame count");
  MonitorSummary s;
  s.frames = static_cast<int64_t>(events.size());
  bool in_window = false;
  bool window_hit = false;
  uint32_t episode = 0;
  for (size_t i = 0; i < events.size(); ++i) {
    bool anomalous = false;
    for (uint8_t y : ds.frames[i].labels) anomalous = anomalous || y != 0;
    // windows never span episodes
    if (in_window && (ds.frames[i].episode != episode || !anomalous)) {
      s.detected += window_hit ? 1 : 0;
      in_window = false;
    }
    episode = ds.frames[i].episode;
    if (anomalous && !in_window) {
      ++s.windows;
      in_window = true;
      window_hit = false;
    }
    if (events[i].alert) {
      ++s.alerts;
      if (in_window)
        window_hit = true;
      else
        ++s.false_alerts;
    }
  }
  if (in_window) s.detected += window_hit ? 1 : 0;
  return s;
}

MonitorSummary cmd_monitor(const RunConfig& cfg, const std::string& checkpoint,
                           const std::string& data_path, const std::string& out_events,
                           const std::string& out_summary, std::ostream& log) {
  cfg.monitor.validate();
  const Dataset ds = load_dataset(data_path);
  ModelT<float> m = load_checkpoint(checkpoint);
  m.training = false;
  check_shapes(m, ds);

  const std::vector<MonitorEvent> events = process_stream(m, ds.frames, cfg.monitor);
  if (!out_events.empty()) {
    std::ofstream out(out_events);
    if (!out) throw IoError("cannot write event log: " + out_events);
    char line[96];
    for (const MonitorEvent& ev : events) {
      std::snprintf(line, sizeof(line), "%.6f %.6f %d\n", ev.timestamp, ev.score,
                    ev.alert ? 1 : 0);
      out << line;
    }
    if (!out) throw IoError("short write to event log: " + out_events);
  }

  const MonitorSummary s = summarize_events(events, ds);
  log << "frames " << s.frames << "  anomaly windows " << s.windows << "  detected "
      << s.detected << "  false alerts " << s.false_alerts << "  alerts " << s.alerts << "\n";
  log.flush();
  if (!out_summary.empty()) {
    json j{{"frames", s.frames},
           {"windows", s.windows},
           {"detected", s.detected},
           {"false_alerts", s.false_alerts},
           {"alerts", s.alerts},
           {"gamma", cfg.monitor.gamma},
           {"threshold", cfg.monitor.threshold},
           {"consecutive_required", cfg.monitor.consecutive_required}};
    std::ofstream out(out_summary);
    if (!out) throw IoError("cannot write summary file: " + out_summary);
    out << j.dump(2) << "\n";
    if (!out) throw IoError("short write to summary file: " + out_summary);
  }
  return s;
}

void cmd_plot(const std::string& report_path, const std::string& out_dir, std::ostream& log) {
  std::ifstream in(report_path);
  if (!in) throw IoError("cannot open report file: " + report_path);
  json report;
  try {
    report = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("report file is not valid JSON: ") + e.what());
  }
  if (!report.contains("rows") || !report["rows"].is_array())
    throw ConfigError("report file has no evaluation rows");

  std::filesystem::create_directories(out_dir);
  auto write_kde = [&](const json& kde, const std::string& path) {
    if (kde.is_null()) return;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write plot file: " + path);
    char line[80];
    for (size_t i = 0; i < kde["x"].size(); ++i) {
      std::snprintf(line, sizeof(line), "%.9g\t%.9g\n", kde["x"][i].get<double>(),
                    kde["density"][i].get<double>());
      out << line;
    }
  };

  int idx = 0;
  for (const json& row : report["rows"]) {
    const std::string tag = std::to_string(idx);
    if (!row["pr"].is_null()) {
      const std::string path = out_dir + "/pr_curve_" + tag + ".tsv";
      std::ofstream out(path);
      if (!out) throw IoError("cannot write plot file: " + path);
      char line[120];
      for (const json& p : row["pr"]["points"]) {
        std::snprintf(line, sizeof(line), "%.9g\t%.9g\t%.9g\n", p[0].get<double>(),
                      p[1].get<double>(), p[2].get<double>());
        out << line;
      }
    }
    write_kde(row["kde_normal"], out_dir + "/kde_normal_" + tag + ".tsv");
    write_kde(row["kde_failure"], out_dir + "/kde_failure_" + tag + ".tsv");
    log << "row " << idx << " (" << row.value("label", std::string("?")) << ") plotted\n";
    ++idx;
  }
  log.flush();
}

}  // namespace paad
