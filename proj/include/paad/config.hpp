#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "paad/errors.hpp"
#include "paad/fieldsim.hpp"
#include "paad/geometry.hpp"
#include "paad/model.hpp"
#include "paad/monitor.hpp"

namespace paad {

// One run configuration covers every command: simulate, train, eval,
// monitor. Parsing is strict about key names (a typo is a ConfigError),
// lenient about omissions (missing keys keep their defaults).

struct TrainConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 32;
  int epochs = 40;
  // the profile term is weighted alpha = alpha_per_frame * train set size
  double alpha_per_frame = 0.1;
  double sigma_hyper = 1.0;   // reconstruction noise scale
  double val_fraction = 0.2;  // episodes held out for validation
  double early_stop_bce = 0.0;  // stop when train BCE drops below; 0 disables
  bool rebalance = true;        // equalize anomalous/normal frame counts
  // return the weights of the best-validation epoch (highest pr-auc,
  // falling back to lowest bce when the pool has one class)
  bool keep_best = true;

  void validate() const;  // ConfigError
};

struct SimConfig {
  int episodes = 50;
  int steps = 100;  // frames per episode

  void validate() const;  // ConfigError
};

struct EvalConfig {
  int kde_grid = 128;

  void validate() const;  // ConfigError
};

struct RunConfig {
  PaadConfig model;
  CameraModel camera;
  BevConfig bev;
  WorldConfig world;
  MonitorConfig monitor;
  TrainConfig train;
  SimConfig sim;
  EvalConfig eval;
  uint64_t seed = 1;

  void validate() const;
};

// Desk-scale defaults: 60x80 camera matching the model's input resolution.
RunConfig default_run_config();

// Per-section JSON codecs, shared with the checkpoint header.
nlohmann::json to_json(const PaadConfig& c);
nlohmann::json to_json(const CameraModel& c);
nlohmann::json to_json(const BevConfig& c);
nlohmann::json to_json(const WorldConfig& c);
nlohmann::json to_json(const MonitorConfig& c);
nlohmann::json to_json(const TrainConfig& c);
nlohmann::json to_json(const SimConfig& c);
nlohmann::json to_json(const EvalConfig& c);
nlohmann::json to_json(const RunConfig& c);

PaadConfig paad_config_from_json(const nlohmann::json& j);
CameraModel camera_from_json(const nlohmann::json& j);
BevConfig bev_from_json(const nlohmann::json& j);
WorldConfig world_from_json(const nlohmann::json& j);
MonitorConfig monitor_from_json(const nlohmann::json& j);
TrainConfig train_from_json(const nlohmann::json& j);
SimConfig sim_from_json(const nlohmann::json& j);
EvalConfig eval_from_json(const nlohmann::json& j);
RunConfig run_config_from_json(const nlohmann::json& j);

// File forms. load throws IoError when unreadable, ConfigError when the
// text does not parse or names an unknown key.
RunConfig load_run_config(const std::string& path);
void save_run_config(const RunConfig& cfg, const std::string& path);

}  // namespace paad
