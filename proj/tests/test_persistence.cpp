#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "paad/checkpoint.hpp"
#include "paad/config.hpp"
#include "paad/dataset.hpp"
#include "test_models.hpp"

using namespace paad;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const char* name) : path(std::string("/tmp/paad_test_") + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void spit(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

ObservationFrame fixture_frame(Rng& rng, uint32_t episode, uint32_t step) {
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
  f.labels = {0, static_cast<uint8_t>(rng.bernoulli(0.5) ? 1 : 0), 1};
  return f;
}

Dataset fixture_dataset(uint64_t seed, int n) {
  Rng rng(seed);
  std::vector<ObservationFrame> frames;
  for (int i = 0; i < n; ++i)
    frames.push_back(fixture_frame(rng, static_cast<uint32_t>(i / 4), static_cast<uint32_t>(i % 4)));
  return dataset_from_frames(std::move(frames), 16, 24, 32, 3);
}

}  // namespace

TEST_SUITE("persistence") {
  TEST_CASE("run configuration survives a json round trip") {
    RunConfig cfg = default_run_config();
    cfg.seed = 99;
    cfg.model.fusion = FusionMode::kLidarOnly;
    cfg.model.attention = AttentionKind::kMlp;
    cfg.model.reconstruction = false;
    cfg.model.path_view = PathView::kBev;
    cfg.world.heading_fault_prob = 0.03;
    cfg.train.epochs = 7;
    cfg.monitor.gamma = 0.8;
    const RunConfig back = run_config_from_json(to_json(cfg));
    CHECK(back.seed == 99);
    CHECK(back.model.fusion == FusionMode::kLidarOnly);
    CHECK(back.model.attention == AttentionKind::kMlp);
    CHECK_FALSE(back.model.reconstruction);
    CHECK(back.model.path_view == PathView::kBev);
    CHECK(back.world.heading_fault_prob == 0.03);
    CHECK(back.train.epochs == 7);
    CHECK(back.monitor.gamma == 0.8);
    CHECK(back.camera.focal_px == 40.0);  // desk default carried through
  }

  TEST_CASE("sparse configs keep defaults, typos are rejected") {
    const RunConfig c = run_config_from_json(nlohmann::json::parse(R"({"train":{"epochs":3}})"));
    CHECK(c.train.epochs == 3);
    CHECK(c.train.batch_size == 32);
    CHECK(c.model.horizon == 10);
    CHECK_THROWS_AS(static_cast<void>(run_config_from_json(
                        nlohmann::json::parse(R"({"trian":{}})"))),
                    ConfigError);
    CHECK_THROWS_AS(static_cast<void>(run_config_from_json(
                        nlohmann::json::parse(R"({"train":{"epocs":3}})"))),
                    ConfigError);
    CHECK_THROWS_AS(static_cast<void>(run_config_from_json(
                        nlohmann::json::parse(R"({"train":{"epochs":"three"}})"))),
                    ConfigError);
    CHECK_THROWS_AS(static_cast<void>(run_config_from_json(
                        nlohmann::json::parse(R"({"model":{"fusion":"cam"}})"))),
                    ConfigError);
  }

  TEST_CASE("config files round trip on disk") {
    TempFile f("cfg.json");
    RunConfig cfg = default_run_config();
    cfg.sim.episodes = 4;
    save_run_config(cfg, f.path);
    const RunConfig back = load_run_config(f.path);
    CHECK(back.sim.episodes == 4);
    CHECK(to_json(back) == to_json(cfg));
    CHECK_THROWS_AS(static_cast<void>(load_run_config("/nonexistent/nope.json")), IoError);
    spit(f.path, "{not json");
    CHECK_THROWS_AS(static_cast<void>(load_run_config(f.path)), ConfigError);
  }

  TEST_CASE("nested validation failures surface through the run config") {
    RunConfig cfg = default_run_config();
    cfg.train.batch_size = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = default_run_config();
    cfg.eval.kde_grid = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = default_run_config();
    cfg.sim.steps = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }

  TEST_CASE("datasets round trip field for field") {
    TempFile f("roundtrip.pads");
    const Dataset ds = fixture_dataset(601, 10);
    save_dataset(ds, f.path);
    const Dataset back = load_dataset(f.path);
    CHECK(back.image_h == 16);
    CHECK(back.image_w == 24);
    CHECK(back.lidar_beams == 32);
    CHECK(back.horizon == 3);
    REQUIRE(back.frames.size() == ds.frames.size());
    for (size_t i = 0; i < ds.frames.size(); ++i) {
      const auto& a = ds.frames[i];
      const auto& b = back.frames[i];
      CHECK(a.episode == b.episode);
      CHECK(a.step == b.step);
      CHECK(a.stamp == b.stamp);
      CHECK(a.image.px == b.image.px);
      CHECK(a.lidar == b.lidar);
      CHECK(a.labels == b.labels);
      REQUIRE(a.path.pts.size() == b.path.pts.size());
      for (size_t k = 0; k < a.path.pts.size(); ++k) {
        CHECK(a.path.pts[k].x == b.path.pts[k].x);
        CHECK(a.path.pts[k].y == b.path.pts[k].y);
      }
    }
    CHECK(ds.anomalous_count() == back.anomalous_count());
  }

  TEST_CASE("a reloaded dataset rewrites to identical bytes") {
    TempFile f1("bytes1.pads"), f2("bytes2.pads");
    save_dataset(fixture_dataset(602, 7), f1.path);
    save_dataset(load_dataset(f1.path), f2.path);
    CHECK(slurp(f1.path) == slurp(f2.path));
  }

  TEST_CASE("an empty dataset is a valid header-only file") {
    TempFile f("empty.pads");
    save_dataset(dataset_from_frames({}, 16, 24, 32, 3), f.path);
    const Dataset back = load_dataset(f.path);
    CHECK(back.frames.empty());
    CHECK(back.horizon == 3);
  }

  TEST_CASE("dataset files reject corruption") {
    TempFile f("corrupt.pads");
    save_dataset(fixture_dataset(603, 3), f.path);
    const std::string good = slurp(f.path);

    spit(f.path, "XXXX" + good.substr(4));
    CHECK_THROWS_AS(static_cast<void>(load_dataset(f.path)), IoError);
    spit(f.path, good.substr(0, good.size() - 5));
    CHECK_THROWS_AS(static_cast<void>(load_dataset(f.path)), IoError);
    spit(f.path, good + "z");
    CHECK_THROWS_AS(static_cast<void>(load_dataset(f.path)), IoError);
    CHECK_THROWS_AS(static_cast<void>(load_dataset("/nonexistent/nope.pads")), IoError);

    Dataset bad = fixture_dataset(604, 2);
    bad.frames[1].lidar.pop_back();
    CHECK_THROWS_AS(save_dataset(bad, f.path), DimensionError);
  }

  TEST_CASE("checkpoints restore the exact architecture and weights") {
    TempFile f("model.paad");
    auto m = testutil::tiny_model<float>(71);
    m.cfg.reconstruction = true;
    save_checkpoint(m, f.path);
    ModelT<float> back = load_checkpoint(f.path);

    CHECK(back.cfg.horizon == m.cfg.horizon);
    CHECK(back.cfg.fusion == m.cfg.fusion);
    CHECK(back.camera.focal_px == m.camera.focal_px);
    CHECK(back.bev.px_per_m == m.bev.px_per_m);
    REQUIRE(back.params.items.size() == m.params.items.size());
    for (const auto& [name, p] : m.params.items) {
      const auto& q = back.params.at(name);
      CHECK(q.value.shape == p.value.shape);
      CHECK(q.value.data == p.value.data);  // bitwise
    }

    // profiles reproduce bit for bit
    m.training = false;
    back.training = false;
    Rng rng(72);
    const ObservationFrame frame = fixture_frame(rng, 0, 0);
    CHECK(predict(m, frame) == predict(back, frame));
  }

  TEST_CASE("a rewritten checkpoint is byte-identical") {
    TempFile f1("ck1.paad"), f2("ck2.paad");
    save_checkpoint(testutil::tiny_model<float>(73), f1.path);
    save_checkpoint(load_checkpoint(f1.path), f2.path);
    CHECK(slurp(f1.path) == slurp(f2.path));
  }

  TEST_CASE("checkpoint files reject corruption") {
    TempFile f("ckbad.paad");
    save_checkpoint(testutil::tiny_model<float>(74), f.path);
    const std::string good = slurp(f.path);

    spit(f.path, "XXXX" + good.substr(4));
    CHECK_THROWS_AS(static_cast<void>(load_checkpoint(f.path)), IoError);
    spit(f.path, good.substr(0, good.size() / 2));
    CHECK_THROWS_AS(static_cast<void>(load_checkpoint(f.path)), IoError);
    spit(f.path, good + "z");
    CHECK_THROWS_AS(static_cast<void>(load_checkpoint(f.path)), IoError);

    // swap the declared attention kind: the tensor table no longer matches
    const size_t at = good.find("\"attention\":\"mha\"");
    REQUIRE(at != std::string::npos);
    std::string warped = good;
    warped.replace(at, 17, "\"attention\":\"mlp\"");
    spit(f.path, warped);
    CHECK_THROWS_AS(static_cast<void>(load_checkpoint(f.path)), ConfigError);
  }
}
