#include "paad/monitor.hpp"

namespace paad {

void MonitorConfig::validate() const {
  if (!(gamma > 0.0) || gamma > 1.0) throw ConfigError("discount must lie in (0, 1]");
  if (!(threshold > 0.0) || !(threshold < 1.0))
    throw ConfigError("score threshold must lie in (0, 1)");
  if (consecutive_required < 1)
    throw ConfigError("alert rule needs at least 1 consecutive exceedance");
  if (!(rate_hz > 0.0)) throw ConfigError("frame rate must be positive");
}

double anomaly_score(const std::vector<float>& profile, double gamma) {
  if (profile.empty()) throw InputError("anomaly score needs a nonempty profile");
  if (!(gamma > 0.0) || gamma > 1.0) throw ConfigError("discount must lie in (0, 1]");
  double sum = 0.0, norm = 0.0, w = 1.0;
  for (float y : profile) {
    sum += w * static_cast<double>(y);
    norm += w;
    w *= gamma;
  }
  return sum / norm;
}

bool monitor_step(MonitorState& st, double score, const MonitorConfig& cfg) {
  st.last_score = score;
  if (score > cfg.threshold) {
    ++st.run;
    st.alert = st.run == cfg.consecutive_required;
  } else {
    st.run = 0;
    st.alert = false;
  }
  return st.alert;
}

StreamMonitor::StreamMonitor(const ModelT<float>* model, MonitorConfig cfg)
    : model_(model), cfg_(cfg) {
  if (model_ == nullptr) throw InputError("stream monitor needs a model");
  cfg_.validate();
}

void StreamMonitor::reset() {
  state_ = MonitorState{};
  have_frame_ = false;
}

MonitorEvent StreamMonitor::process(const ObservationFrame& frame) {
  if (have_frame_ && frame.episode == episode_) {
    if (frame.step <= last_step_)
      throw StreamError("frame steps must increase within an episode");
  } else {
    // new episode, new run
    state_ = MonitorState{};
  }
  episode_ = frame.episode;
  last_step_ = frame.step;
  have_frame_ = true;

  const std::vector<float> profile = predict(*model_, frame);
  MonitorEvent ev;
  ev.episode = frame.episode;
  ev.step = frame.step;
  ev.timestamp = static_cast<double>(frame.step) / cfg_.rate_hz;
  ev.score = anomaly_score(profile, cfg_.gamma);
  ev.alert = monitor_step(state_, ev.score, cfg_);
  return ev;
}

std::vector<MonitorEvent> process_stream(const ModelT<float>& model,
                                         const std::vector<ObservationFrame>& frames,
                                         const MonitorConfig& cfg) {
  StreamMonitor mon(&model, cfg);
  std::vector<MonitorEvent> log;
  log.reserve(frames.size());
  for (const ObservationFrame& f : frames) log.push_back(mon.process(f));
  return log;
}

}  // namespace paad
