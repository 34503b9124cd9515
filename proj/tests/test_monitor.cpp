#include <doctest.h>

#include <cmath>
#include <limits>

#include "paad/monitor.hpp"
#include "test_models.hpp"

using namespace paad;

namespace {

ObservationFrame stream_frame(const ModelT<float>& m, Rng& rng, uint32_t episode,
                              uint32_t step) {
  ObservationFrame f;
  f.episode = episode;
  f.step = step;
  f.image.h = m.camera.image_h;
  f.image.w = m.camera.image_w;
  f.image.px.resize(static_cast<size_t>(f.image.h) * f.image.w);
  for (auto& p : f.image.px) p = static_cast<uint8_t>(rng.next_below(256));
  f.lidar.resize(m.cfg.lidar_beams);
  for (auto& r : f.lidar) r = static_cast<float>(rng.uniform(0.2, 9.0));
  for (int k = 0; k < m.cfg.horizon; ++k)
    f.path.pts.push_back({0.2 * (k + 1), rng.uniform(-0.3, 0.3)});
  f.labels.assign(m.cfg.horizon, 0);
  return f;
}

}  // namespace

TEST_SUITE("monitor") {
  TEST_CASE("anomaly score hand values") {
    CHECK(anomaly_score({1.0f, 1.0f, 1.0f, 1.0f}, 0.73) == 1.0);
    CHECK(anomaly_score({0.0f, 0.0f, 0.0f}, 0.9) == 0.0);
    // gamma 1 averages the profile
    CHECK(anomaly_score({0.2f, 0.4f, 0.6f}, 1.0) == doctest::Approx(0.4));
    // leading spike: score equals the normalizer itself
    std::vector<float> spike(10, 0.0f);
    spike[0] = 1.0f;
    const double expect = (1.0 - 0.9) / (1.0 - std::pow(0.9, 10));
    CHECK(anomaly_score(spike, 0.9) == doctest::Approx(expect).epsilon(1e-12));
    CHECK(anomaly_score(spike, 0.9) == doctest::Approx(0.15354).epsilon(1e-4));
  }

  TEST_CASE("anomaly score stays inside the unit interval") {
    Rng rng(77);
    for (int trial = 0; trial < 200; ++trial) {
      std::vector<float> profile(1 + rng.next_below(12));
      for (auto& y : profile) y = static_cast<float>(rng.uniform(0.0, 1.0));
      const double g = rng.uniform(0.05, 1.0);
      const double s = anomaly_score(profile, g);
      CHECK(s >= 0.0);
      CHECK(s <= 1.0);
    }
  }

  TEST_CASE("anomaly score input validation") {
    CHECK_THROWS_AS(static_cast<void>(anomaly_score({}, 0.9)), InputError);
    CHECK_THROWS_AS(static_cast<void>(anomaly_score({0.5f}, 0.0)), ConfigError);
    CHECK_THROWS_AS(static_cast<void>(anomaly_score({0.5f}, 1.01)), ConfigError);
  }

  TEST_CASE("the discount normalizer inverts its own sum to machine precision") {
    for (double gamma : {0.5, 0.9, 0.99, 1.0}) {
      double norm = 0.0, w = 1.0;
      for (int k = 0; k < 10; ++k) {
        norm += w;
        w *= gamma;
      }
      const double beta = 1.0 / norm;
      CHECK(std::abs(beta * norm - 1.0) <= 4.0 * std::numeric_limits<double>::epsilon());
    }
  }

  TEST_CASE("three exceedances in a row raise exactly one alert") {
    MonitorConfig cfg;
    MonitorState st;
    CHECK_FALSE(monitor_step(st, 0.6, cfg));
    CHECK_FALSE(monitor_step(st, 0.6, cfg));
    CHECK(monitor_step(st, 0.6, cfg));
    // the run keeps counting but stays quiet
    CHECK_FALSE(monitor_step(st, 0.9, cfg));
    CHECK_FALSE(monitor_step(st, 0.9, cfg));
    CHECK(st.run == 5);
  }

  TEST_CASE("a dip restarts the count") {
    MonitorConfig cfg;
    MonitorState st;
    const std::vector<double> scores{0.6, 0.6, 0.4, 0.6, 0.6, 0.6};
    std::vector<bool> alerts;
    for (double s : scores) alerts.push_back(monitor_step(st, s, cfg));
    CHECK(alerts == std::vector<bool>{false, false, false, false, false, true});
  }

  TEST_CASE("scores at or below the threshold never alert") {
    MonitorConfig cfg;
    MonitorState st;
    for (int i = 0; i < 20; ++i) CHECK_FALSE(monitor_step(st, 0.5, cfg));  // boundary is out
    CHECK(st.run == 0);
  }

  TEST_CASE("alerts replay a direct rule trace on random streams") {
    Rng rng(501);
    for (int trial = 0; trial < 1000; ++trial) {
      MonitorConfig cfg;
      cfg.threshold = rng.uniform(0.2, 0.8);
      cfg.consecutive_required = 1 + static_cast<int>(rng.next_below(5));
      MonitorState st;
      int run = 0;
      const int len = 1 + static_cast<int>(rng.next_below(40));
      for (int i = 0; i < len; ++i) {
        const double s = rng.uniform(0.0, 1.0);
        run = s > cfg.threshold ? run + 1 : 0;
        const bool want = run == cfg.consecutive_required;
        CHECK(monitor_step(st, s, cfg) == want);
      }
    }
  }

  TEST_CASE("monitor configuration validation") {
    MonitorConfig cfg;
    cfg.validate();
    MonitorConfig bad = cfg;
    bad.gamma = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.threshold = 1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.consecutive_required = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.rate_hz = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
  }

  TEST_CASE("a stream runs deterministically and stamps timestamps from steps") {
    auto m = testutil::tiny_model<float>(3);
    m.training = false;
    Rng rng(52);
    std::vector<ObservationFrame> frames;
    for (uint32_t t = 0; t < 8; ++t) frames.push_back(stream_frame(m, rng, 2, t));

    MonitorConfig cfg;
    const auto log_a = process_stream(m, frames, cfg);
    const auto log_b = process_stream(m, frames, cfg);
    REQUIRE(log_a.size() == 8);
    for (size_t i = 0; i < log_a.size(); ++i) {
      CHECK(log_a[i].score == log_b[i].score);
      CHECK(log_a[i].alert == log_b[i].alert);
      CHECK(log_a[i].timestamp == doctest::Approx(static_cast<double>(i) / cfg.rate_hz));
      CHECK(log_a[i].episode == 2);
      CHECK(log_a[i].score >= 0.0);
      CHECK(log_a[i].score <= 1.0);
    }
    CHECK(process_stream(m, {}, cfg).empty());
  }

  TEST_CASE("a zeroed head scores one half everywhere and never alerts") {
    auto m = testutil::tiny_model<float>(9);
    m.training = false;
    auto& w = m.params.at("head.l2.w").value.data;
    std::fill(w.begin(), w.end(), 0.0f);
    Rng rng(53);
    std::vector<ObservationFrame> frames;
    for (uint32_t t = 0; t < 6; ++t) frames.push_back(stream_frame(m, rng, 0, t));
    for (const MonitorEvent& ev : process_stream(m, frames, MonitorConfig{})) {
      CHECK(ev.score == 0.5);
      CHECK_FALSE(ev.alert);
    }
  }

  TEST_CASE("steps must advance inside an episode, and a new episode resets") {
    auto m = testutil::tiny_model<float>(4);
    m.training = false;
    Rng rng(54);
    StreamMonitor mon(&m, MonitorConfig{});
    static_cast<void>(mon.process(stream_frame(m, rng, 1, 0)));
    static_cast<void>(mon.process(stream_frame(m, rng, 1, 1)));
    CHECK_THROWS_AS(static_cast<void>(mon.process(stream_frame(m, rng, 1, 1))), StreamError);
    // a fresh episode may restart its step counter; the old run cannot
    // carry across the boundary, so at most this one frame counts
    static_cast<void>(mon.process(stream_frame(m, rng, 2, 0)));
    CHECK(mon.state().run <= 1);

    mon.reset();
    static_cast<void>(mon.process(stream_frame(m, rng, 1, 0)));  // fine after reset
  }

  TEST_CASE("a training-mode model is rejected by the stream") {
    auto m = testutil::tiny_model<float>(5);
    Rng rng(55);
    StreamMonitor mon(&m, MonitorConfig{});
    CHECK_THROWS_AS(static_cast<void>(mon.process(stream_frame(m, rng, 0, 0))), StateError);
    CHECK_THROWS_AS(StreamMonitor(nullptr, MonitorConfig{}), InputError);
  }
}
