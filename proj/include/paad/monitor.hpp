#pragma once

#include <cstdint>
#include <vector>

#include "paad/errors.hpp"
#include "paad/fieldsim.hpp"
#include "paad/model.hpp"

namespace paad {

// Streaming anomaly scoring: collapse each failure profile to one scalar,
// threshold it, and alert on a run of consecutive exceedances.

struct MonitorConfig {
  double gamma = 0.9;      // discount over the horizon, in (0, 1]
  double threshold = 0.5;  // score cutoff, in (0, 1)
  int consecutive_required = 3;
  double rate_hz = 10.0;  // frame timestamps are step / rate_hz

  void validate() const;  // ConfigError
};

// s = beta * sum_k gamma^k * profile[k], beta = 1 / sum_k gamma^k.
// Lands in [0,1]; equals the plain mean at gamma = 1.
// InputError on an empty profile, ConfigError on gamma outside (0, 1].
double anomaly_score(const std::vector<float>& profile, double gamma);

struct MonitorState {
  int run = 0;  // consecutive scores above threshold so far
  double last_score = 0.0;
  bool alert = false;
};

// Advances the run counter. Returns true exactly when the run length
// reaches consecutive_required; the run keeps counting past it, so no
// second alert fires until a below-threshold score resets the state.
bool monitor_step(MonitorState& st, double score, const MonitorConfig& cfg);

struct MonitorEvent {
  uint32_t episode = 0;
  uint32_t step = 0;
  double timestamp = 0.0;  // seconds within the episode
  double score = 0.0;
  bool alert = false;
};

// One consumer per stream. Frames must arrive grouped by episode with
// strictly increasing steps inside each; a new episode id resets the
// run counter. The model must be in inference mode.
class StreamMonitor {
 public:
  StreamMonitor(const ModelT<float>* model, MonitorConfig cfg);

  // predict -> anomaly_score -> step. StreamError if the step does not
  // advance within the current episode.
  MonitorEvent process(const ObservationFrame& frame);

  void reset();
  const MonitorState& state() const { return state_; }

 private:
  const ModelT<float>* model_;
  MonitorConfig cfg_;
  MonitorState state_;
  bool have_frame_ = false;
  uint32_t episode_ = 0;
  uint32_t last_step_ = 0;
};

// Runs a whole recorded stream through a fresh StreamMonitor.
std::vector<MonitorEvent> process_stream(const ModelT<float>& model,
                                         const std::vector<ObservationFrame>& frames,
                                         const MonitorConfig& cfg);

}  // namespace paad
