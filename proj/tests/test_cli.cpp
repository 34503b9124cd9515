#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "paad/checkpoint.hpp"
#include "paad/commands.hpp"
#include "test_models.hpp"

using namespace paad;

namespace {

struct TempPath {
  std::string path;
  explicit TempPath(const char* name) : path(std::string("/tmp/paad_cli_") + name) {}
  ~TempPath() { std::filesystem::remove_all(path); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// simulator-backed config, shrunk to the test camera and a short corridor
RunConfig sim_config() {
  RunConfig cfg;
  cfg.model = testutil::tiny_config();
  cfg.model.lidar_beams = kLidarBeams;  // the simulator always emits full scans
  cfg.model.latent_dim = 4;
  cfg.model.token_dim = 8;
  cfg.camera = testutil::tiny_camera();
  cfg.bev = testutil::tiny_bev();
  cfg.world.length = 40.0;
  cfg.world.heading_fault_prob = 0.12;  // short runs still see both classes
  cfg.sim.episodes = 3;
  cfg.sim.steps = 30;
  cfg.train.epochs = 2;
  cfg.train.batch_size = 16;
  cfg.train.val_fraction = 0.0;
  cfg.eval.kde_grid = 32;
  cfg.seed = 5;
  return cfg;
}

// file-backed copy of the sixteen-frame memorization setup
ObservationFrame content_frame(Rng& rng, uint32_t episode, uint32_t step, bool anomalous) {
  ObservationFrame f;
  f.episode = episode;
  f.step = step;
  f.stamp = static_cast<double>(step) / 3.0;
  f.image.h = 16;
  f.image.w = 24;
  f.image.px.resize(16 * 24);
  for (auto& p : f.image.px) p = static_cast<uint8_t>(rng.next_below(256));
  f.lidar.resize(32);
  for (auto& r : f.lidar) r = static_cast<float>(rng.uniform(0.05, 10.0));
  for (int k = 0; k < 3; ++k)
    f.path.pts.push_back({rng.uniform(0.1, 2.0), rng.uniform(-0.5, 0.5)});
  f.labels = anomalous ? std::vector<uint8_t>{0, 1, 1} : std::vector<uint8_t>{0, 0, 0};
  return f;
}

Dataset memorization_dataset(uint64_t seed) {
  Rng rng(seed);
  std::vector<ObservationFrame> frames;
  for (int i = 0; i < 16; ++i)
    frames.push_back(content_frame(rng, static_cast<uint32_t>(i / 4),
                                   static_cast<uint32_t>(i % 4), i % 2 == 0));
  return dataset_from_frames(std::move(frames), 16, 24, 32, 3);
}

RunConfig memorization_config() {
  RunConfig cfg;
  cfg.model = testutil::tiny_config();
  cfg.camera = testutil::tiny_camera();
  cfg.bev = testutil::tiny_bev();
  cfg.train.lr = 5e-3;
  cfg.train.epochs = 3000;
  cfg.train.batch_size = 16;
  cfg.train.val_fraction = 0.0;
  cfg.train.early_stop_bce = 0.008;
  cfg.eval.kde_grid = 32;
  cfg.seed = 23;
  return cfg;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("simulate writes a deterministic dataset with both outcome classes") {
    TempPath a("sim_a.pads"), b("sim_b.pads");
    std::ostringstream log;
    const RunConfig cfg = sim_config();
    const SimulateStats stats = cmd_simulate(cfg, a.path, log);
    CHECK(stats.frames == 90);
    REQUIRE(stats.anomalous > 0);
    CHECK(stats.anomalous < stats.frames);
    CHECK(log.str().find("anomalous frames") != std::string::npos);

    static_cast<void>(cmd_simulate(cfg, b.path, log));
    CHECK(slurp(a.path) == slurp(b.path));

    const Dataset back = load_dataset(a.path);
    CHECK(back.frames.size() == 90);
    CHECK(back.horizon == 3);
    CHECK(back.lidar_beams == kLidarBeams);

    // episodes are genuinely different corridors
    CHECK(back.frames[0].lidar != back.frames[30].lidar);
  }

  TEST_CASE("simulate with zero steps leaves a header-only file") {
    TempPath f("sim_empty.pads");
    RunConfig cfg = sim_config();
    cfg.sim.steps = 0;
    std::ostringstream log;
    const SimulateStats stats = cmd_simulate(cfg, f.path, log);
    CHECK(stats.frames == 0);
    CHECK(load_dataset(f.path).frames.empty());
  }

  TEST_CASE("train fits the simulated data end to end and writes a checkpoint") {
    TempPath data("train.pads"), ckpt("train.paad");
    std::ostringstream log;
    const RunConfig cfg = sim_config();
    static_cast<void>(cmd_simulate(cfg, data.path, log));
    const TrainResult res = cmd_train(cfg, data.path, ckpt.path, "", log);
    CHECK(res.epochs.size() == 2);
    CHECK(log.str().find("epoch") != std::string::npos);
    const ModelT<float> m = load_checkpoint(ckpt.path);
    CHECK(m.cfg.lidar_beams == kLidarBeams);
  }

  TEST_CASE("a memorized dataset evaluates to perfect scores") {
    TempPath data("mem.pads"), ckpt("mem.paad"), report("mem_report.json"), plots("mem_plots");
    save_dataset(memorization_dataset(31), data.path);
    const RunConfig cfg = memorization_config();
    std::ostringstream log;
    const TrainResult res = cmd_train(cfg, data.path, ckpt.path, "", log);
    REQUIRE(res.early_stopped);  // hit the overfit target

    const nlohmann::json rep = cmd_eval(cfg, {ckpt.path}, data.path, report.path, log);
    REQUIRE(rep["rows"].size() == 1);
    const auto& row = rep["rows"][0];
    CHECK(row["f1"]["f1"].get<double>() == 1.0);
    CHECK(row["pr"]["auc"].get<double>() == 1.0);
    CHECK(row["pool"].get<int64_t>() == 48);
    CHECK_FALSE(row["kde_normal"].is_null());
    CHECK_FALSE(row["kde_failure"].is_null());

    // plot emission: one file per curve, one line per point
    cmd_plot(report.path, plots.path, log);
    const std::string pr = slurp(plots.path + "/pr_curve_0.tsv");
    const size_t pr_lines = static_cast<size_t>(std::count(pr.begin(), pr.end(), '\n'));
    CHECK(pr_lines == row["pr"]["points"].size());
    const std::string kn = slurp(plots.path + "/kde_normal_0.tsv");
    CHECK(static_cast<int>(std::count(kn.begin(), kn.end(), '\n')) == cfg.eval.kde_grid);

    // identical on a second run
    TempPath plots2("mem_plots2");
    cmd_plot(report.path, plots2.path, log);
    CHECK(slurp(plots2.path + "/pr_curve_0.tsv") == pr);
  }

  TEST_CASE("eval emits one grid row per checkpoint") {
    TempPath data("grid.pads"), ck1("grid1.paad"), ck2("grid2.paad"), report("grid.json");
    save_dataset(memorization_dataset(37), data.path);
    RunConfig cfg = memorization_config();
    cfg.train.epochs = 2;
    cfg.train.early_stop_bce = 0.0;
    std::ostringstream log;
    static_cast<void>(cmd_train(cfg, data.path, ck1.path, "", log));
    cfg.model.attention = AttentionKind::kMlp;
    cfg.seed = 24;
    static_cast<void>(cmd_train(cfg, data.path, ck2.path, "", log));

    const nlohmann::json rep =
        cmd_eval(cfg, {ck1.path, ck2.path}, data.path, report.path, log);
    REQUIRE(rep["rows"].size() == 2);
    CHECK(rep["rows"][0]["label"].get<std::string>().find("attention=mha") != std::string::npos);
    CHECK(rep["rows"][1]["label"].get<std::string>().find("attention=mlp") != std::string::npos);
  }

  TEST_CASE("resumed training starts from the saved weights") {
    TempPath data("resume.pads"), ck1("resume1.paad"), ck2("resume2.paad");
    save_dataset(memorization_dataset(41), data.path);
    RunConfig cfg = memorization_config();
    cfg.train.epochs = 40;
    cfg.train.early_stop_bce = 0.0;
    std::ostringstream log;
    const TrainResult first = cmd_train(cfg, data.path, ck1.path, "", log);

    // the resumed run must pick up where the loss left off, not restart
    const TrainResult resumed = cmd_train(cfg, data.path, ck2.path, ck1.path, log);
    const double fresh_start = first.epochs.front().mean_bce;
    const double resumed_start = resumed.epochs.front().mean_bce;
    const double saved_end = first.epochs.back().mean_bce;
    CHECK(resumed_start < fresh_start);
    CHECK(resumed_start < saved_end * 1.5 + 0.02);
  }

  TEST_CASE("window accounting on a hand-traced stream") {
    // anomalous frames: episode 0 = [0,1,1,0,1], episode 1 = [1,1,0,0]
    std::vector<ObservationFrame> frames;
    Rng rng(43);
    auto add = [&](uint32_t ep, uint32_t st, bool bad) {
      frames.push_back(content_frame(rng, ep, st, bad));
    };
    add(0, 0, false);
    add(0, 1, true);
    add(0, 2, true);
    add(0, 3, false);
    add(0, 4, true);
    add(1, 0, true);
    add(1, 1, true);
    add(1, 2, false);
    add(1, 3, false);
    const Dataset ds = dataset_from_frames(std::move(frames), 16, 24, 32, 3);

    std::vector<MonitorEvent> events(9);
    for (size_t i = 0; i < events.size(); ++i) {
      events[i].episode = ds.frames[i].episode;
      events[i].step = ds.frames[i].step;
    }
    events[2].alert = true;  // inside window 1
    events[3].alert = true;  // outside any window
    events[8].alert = true;  // outside (window 3 ended at index 6)

    const MonitorSummary s = summarize_events(events, ds);
    CHECK(s.frames == 9);
    CHECK(s.windows == 3);  // [1,2], [4], [5,6] split at the episode boundary from [4]
    CHECK(s.detected == 1);
    CHECK(s.false_alerts == 2);
    CHECK(s.alerts == 3);

    CHECK_THROWS_AS(static_cast<void>(summarize_events({}, ds)), InputError);
  }

  TEST_CASE("monitor streams a dataset and its summary matches a recount") {
    TempPath data("mon.pads"), ckpt("mon.paad"), events("mon_events.log"),
        summary("mon_summary.json");
    std::ostringstream log;
    const RunConfig cfg = sim_config();
    static_cast<void>(cmd_simulate(cfg, data.path, log));
    static_cast<void>(cmd_train(cfg, data.path, ckpt.path, "", log));

    const MonitorSummary s =
        cmd_monitor(cfg, ckpt.path, data.path, events.path, summary.path, log);
    CHECK(s.frames == 90);
    CHECK(s.detected <= s.windows);
    CHECK(s.alerts >= s.detected);

    const std::string text = slurp(events.path);
    const int64_t lines = std::count(text.begin(), text.end(), '\n');
    CHECK(lines == 90);
    int64_t flagged = 0;
    std::istringstream rows(text);
    std::string line;
    while (std::getline(rows, line)) flagged += line.size() > 1 && line.back() == '1' ? 1 : 0;
    CHECK(flagged == s.alerts);

    const auto j = nlohmann::json::parse(slurp(summary.path));
    CHECK(j["windows"].get<int>() == s.windows);
    CHECK(j["false_alerts"].get<int>() == s.false_alerts);

    // byte-identical on a rerun
    TempPath events2("mon_events2.log");
    static_cast<void>(cmd_monitor(cfg, ckpt.path, data.path, events2.path, "", log));
    CHECK(slurp(events2.path) == text);
  }

  TEST_CASE("plot rejects missing or malformed reports") {
    std::ostringstream log;
    CHECK_THROWS_AS(cmd_plot("/nonexistent/report.json", "/tmp/paad_cli_nowhere", log), IoError);
    TempPath bad("bad_report.json");
    std::ofstream(bad.path) << "{not json";
    CHECK_THROWS_AS(cmd_plot(bad.path, "/tmp/paad_cli_nowhere", log), ConfigError);
    TempPath norows("norows.json");
    std::ofstream(norows.path) << "{}";
    CHECK_THROWS_AS(cmd_plot(norows.path, "/tmp/paad_cli_nowhere", log), ConfigError);
  }

  TEST_CASE("eval and train refuse mismatched shapes") {
    TempPath data("shape.pads"), ckpt("shape.paad");
    save_dataset(memorization_dataset(47), data.path);
    RunConfig cfg = memorization_config();
    cfg.train.epochs = 1;
    cfg.train.early_stop_bce = 0.0;
    std::ostringstream log;
    static_cast<void>(cmd_train(cfg, data.path, ckpt.path, "", log));

    RunConfig wide = cfg;
    wide.model.image_w = 32;
    wide.camera.image_w = 32;
    CHECK_THROWS_AS(static_cast<void>(cmd_train(wide, data.path, "/tmp/paad_cli_x.paad", "", log)),
                    ConfigError);
    CHECK_THROWS_AS(static_cast<void>(cmd_eval(cfg, {}, data.path, "", log)), InputError);
  }
}
