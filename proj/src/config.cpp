#include "paad/config.hpp"

#include <fstream>
#include <sstream>

namespace paad {

using nlohmann::json;

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw ConfigError("moment decays must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("optimizer epsilon must be positive");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (epochs < 1) throw ConfigError("epoch count must be at least 1");
  if (!(alpha_per_frame > 0.0)) throw ConfigError("profile weight must be positive");
  if (!(sigma_hyper > 0.0)) throw ConfigError("reconstruction noise scale must be positive");
  if (val_fraction < 0.0 || val_fraction >= 1.0)
    throw ConfigError("validation fraction must lie in [0, 1)");
  if (early_stop_bce < 0.0) throw ConfigError("early stop target cannot be negative");
}

void SimConfig::validate() const {
  if (episodes < 1) throw ConfigError("need at least one episode");
  if (steps < 0) throw ConfigError("steps per episode cannot be negative");
}

void EvalConfig::validate() const {
  if (kde_grid < 2) throw ConfigError("density grid needs at least 2 points");
}

void RunConfig::validate() const {
  model.validate();
  camera.validate();
  if (bev.grid_h < 1 || bev.grid_w < 1 || !(bev.px_per_m > 0.0))
    throw ConfigError("top-down grid must have positive size and scale");
  world.validate();
  monitor.validate();
  train.validate();
  sim.validate();
  eval.validate();
}

RunConfig default_run_config() {
  RunConfig cfg;
  cfg.camera.image_h = 60;
  cfg.camera.image_w = 80;
  cfg.camera.focal_px = 40.0;
  cfg.camera.cx = 40.0;
  cfg.camera.cy = 30.0;
  return cfg;
}

namespace {

void require_object(const json& j, const char* section) {
  if (!j.is_object()) throw ConfigError(std::string(section) + " must be a JSON object");
}

[[noreturn]] void unknown_key(const char* section, const std::string& key) {
  throw ConfigError(std::string("unknown ") + section + " key: " + key);
}

[[noreturn]] void bad_value(const char* section, const std::string& key, const char* what) {
  throw ConfigError(std::string("bad value for ") + section + "." + key + ": " + what);
}

}  // namespace

json to_json(const PaadConfig& c) {
  return json{{"horizon", c.horizon},
              {"latent_dim", c.latent_dim},
              {"token_dim", c.token_dim},
              {"heads", c.heads},
              {"head_hidden", c.head_hidden},
              {"image_hidden", c.image_hidden},
              {"lidar_hidden", c.lidar_hidden},
              {"conv_channels", {c.conv_channels[0], c.conv_channels[1], c.conv_channels[2]}},
              {"image_h", c.image_h},
              {"image_w", c.image_w},
              {"lidar_beams", c.lidar_beams},
              {"lidar_range", c.lidar_range},
              {"fusion", to_string(c.fusion)},
              {"attention", to_string(c.attention)},
              {"reconstruction", c.reconstruction},
              {"path_view", to_string(c.path_view)}};
}

PaadConfig paad_config_from_json(const json& j) {
  require_object(j, "model");
  PaadConfig c;
  for (const auto& [key, val] : j.items()) {
    try {
      if (key == "horizon") c.horizon = val.get<int>();
      else if (key == "latent_dim") c.latent_dim = val.get<int>();
      else if (key == "token_dim") c.token_dim = val.get<int>();
      else if (key == "heads") c.heads = val.get<int>();
      else if (key == "head_hidden") c.head_hidden = val.get<int>();
      else if (key == "image_hidden") c.image_hidden = val.get<int>();
      else if (key == "lidar_hidden") c.lidar_hidden = val.get<int>();
      else if (key == "conv_channels") {
        const auto ch = val.get<std::vector<int>>();
        if (ch.size() != 3) throw ConfigError("conv_channels needs exactly 3 entries");
        for (int i = 0; i < 3; ++i) c.conv_channels[i] = ch[i];
      } else if (key == "image_h") c.image_h = val.get<int>();
      else if (key == "image_w") c.image_w = val.get<int>();
      else if (key == "lidar_beams") c.lidar_beams = val.get<int>();
      else if (key == "lidar_range") c.lidar_range = val.get<double>();
      else if (key == "fusion") c.fusion = fusion_from_string(val.get<std::string>());
      else if (key == "attention") c.attention = attention_from_string(val.get<std::string>());
      else if (key == "reconstruction") c.reconstruction = val.get<bool>();
      else if (key == "path_view") c.path_view = path_view_from_string(val.get<std::string>());
      else unknown_key("model", key);
    } catch (const json::exception& e) {
      bad_value("model", key, e.what());
    }
  }
  return c;
}

json to_json(const CameraModel& c) {
  return json{{"focal_px", c.focal_px}, {"cx", c.cx},
              {"cy", c.cy},             {"height_m", c.height_m},
              {"pitch_rad", c.pitch_rad}, {"image_h", c.image_h},
              {"image_w", c.image_w}};
}

CameraModel camera_from_json(const json& j) {
  require_object(j, "camera");
  CameraModel c;
  for (const auto& [key, val] : j.items()) {
    try {
      if (key == "focal_px") c.focal_px = val.get<double>();
      else if (key == "cx") c.cx = val.get<double>();
      else if (key == "cy") c.cy = val.get<double>();
      else if (key == "height_m") c.height_m = val.get<double>();
      else if (key == "pitch_rad") c.pitch_rad = val.get<double>();
      else if (key == "image_h") c.image_h = val.get<int>();
      else if (key == "image_w") c.image_w = val.get<int>();
      else unknown_key("camera", key);
    } catch (const json::exception& e) {
      bad_value("camera", key, e.what());
    }
  }
  return c;
}

json to_json(const BevConfig& c) {
  return json{{"grid_h", c.grid_h}, {"grid_w", c.grid_w}, {"px_per_m", c.px_per_m}};
}

BevConfig bev_from_json(const json& j) {
  require_object(j, "bev");
  BevConfig c;
  for (const auto& [key, val] : j.items()) {
    try {
      if (key == "grid_h") c.grid_h = val.get<int>();
      else if (key == "grid_w") c.grid_w = val.get<int>();
      else if (key == "px_per_m") c.px_per_m = val.get<double>();
      else unknown_key("bev", key);
    } catch (const json::exception& e) {
      bad_value("bev", key, e.what());
    }
  }
  return c;
}

json to_json(const WorldConfig& c) {
  return json{{"row_spacing", c.row_spacing},
              {"stalk_radius", c.stalk_radius},
              {"stalk_pitch", c.stalk_pitch},
              {"stalk_height", c.stalk_height},
              {"gap_prob", c.gap_prob},
              {"clutter_density", c.clutter_density},
              {"clutter_radius", c.clutter_radius},
              {"camera_occlusion_prob", c.camera_occlusion_prob},
              {"lidar_occlusion_prob", c.lidar_occlusion_prob},
              {"heading_fault_prob", c.heading_fault_prob},
              {"fault_min_frames", c.fault_min_frames},
              {"fault_max_frames", c.fault_max_frames},
              {"fault_bias_min", c.fault_bias_min},
              {"fault_bias_max", c.fault_bias_max},
              {"length", c.length},
              {"robot_radius", c.robot_radius},
              {"speed", c.speed},
              {"frame_rate", c.frame_rate},
              {"lidar_max_range", c.lidar_max_range},
              {"seed", c.seed}};
}

WorldConfig world_from_json(const json& j) {
  require_object(j, "world");
  WorldConfig c;
  for (const auto& [key, val] : j.items()) {
    try {
      if (key == "row_spacing") c.row_spacing = val.get<double>();
      else if (key == "stalk_radius") c.stalk_radius = val.get<double>();
      else if (key == "stalk_pitch") c.stalk_pitch = val.get<double>();
      else if (key == "stalk_height") c.stalk_height = val.get<double>();
      else if (key == "gap_prob") c.gap_prob = val.get<double>();
      else if (key == "clutter_density") c.clutter_density = val.get<double>();
      else if (key == "clutter_radius") c.clutter_radius = val.get<double>();
      else if (key == "camera_occlusion_prob") c.camera_occlusion_prob = val.get<double>();
      else if (key == "lidar_occlusion_prob") c.lidar_occlusion_prob = val.get<double>();
      else if (key == "heading_fault_prob") c.heading_fault_prob = val.get<double>();
      else if (key == "fault_min_frames") c.fault_min_frames = val.get<int>();
      else if (key == "fault_max_frames") c.fault_max_frames = val.get<int>();
      else if (key == "fault_bias_min") c.fault_bias_min = val.get<double>();
      else if (key == "fault_bias_max") c.fault_bias_max = val.get<double>();
      else if (key == "length") c.length = val.get<double>();
      else if (key == "robot_radius") c.robot_radius = val.get<double>();
      else if (key == "speed") c.speed = val.get<double>();
      else if (key == "frame_rate") c.frame_rate = val.get<double>();
      else if (key == "lidar_max_range") c.lidar_max_range = val.get<double>();
      else if (key == "seed") c.seed = val.get<uint64_t>();
      else unknown_key("world", key);
    } catch (const json::exception& e) {
      bad_value("world", key, e.what());
    }
  }
  return c;
}

json to_json(const MonitorConfig& c) {
  return json{{"gamma", c.gamma},
              {"threshold", c.threshold},
              {"consecutive_required", c.consecutive_required},
              {"rate_hz", c.rate_hz}};
}

MonitorConfig monitor_from_json(const json& j) {
  require_object(j, "monitor");
  MonitorConfig c;
  for (const auto& [key, val] : j.items()) {
    try {
      if (key == "gamma") c.gamma = val.get<double>();
      else if (key == "threshold") c.threshold = val.get<double>();
      else if (key == "consecutive_required") c.consecutive_required = val.get<int>();
      else if (key == "rate_hz") c.rate_hz = val.get<double>();
      else unknown_key("monitor", key);
    } catch (const json::exception& e) {
      bad_value("monitor", key, e.what());
    }
  }
  return c;
}

json to_json(const TrainConfig& c) {
  return json{{"lr", c.lr},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"eps", c.eps},
              {"batch_size", c.batch_size},
              {"epochs", c.epochs},
              {"alpha_per_frame", c.alpha_per_frame},
              {"sigma_hyper", c.sigma_hyper},
              {"val_fraction", c.val_fraction},
              {"early_stop_bce", c.early_stop_bce},
              {"rebalance", c.rebalance},
              {"keep_best", c.keep_best}};
}

TrainConfig train_from_json(const json& j) {
  require_object(j, "train");
  TrainConfig c;
  for (const auto& [key, val] : j.items()) {
    try {
      if (key == "lr") c.lr = val.get<double>();
      else if (key == "beta1") c.beta1 = val.get<double>();
      else if (key == "beta2") c.beta2 = val.get<double>();
      else if (key == "eps") c.eps = val.get<double>();
      else if (key == "batch_size") c.batch_size = val.get<int>();
      else if (key == "epochs") c.epochs = val.get<int>();
      else if (key == "alpha_per_frame") c.alpha_per_frame = val.get<double>();
      else if (key == "sigma_hyper") c.sigma_hyper = val.get<double>();
      else if (key == "val_fraction") c.val_fraction = val.get<double>();
      else if (key == "early_stop_bce") c.early_stop_bce = val.get<double>();
      else if (key == "rebalance") c.rebalance = val.get<bool>();
      else if (key == "keep_best") c.keep_best = val.get<bool>();
      else unknown_key("train", key);
    } catch (const json::exception& e) {
      bad_value("train", key, e.what());
    }
  }
  return c;
}

json to_json(const SimConfig& c) {
  return json{{"episodes", c.episodes}, {"steps", c.steps}};
}

SimConfig sim_from_json(const json& j) {
  require_object(j, "sim");
  SimConfig c;
  for (const auto& [key, val] : j.items()) {
    try {
      if (key == "episodes") c.episodes = val.get<int>();
      else if (key == "steps") c.steps = val.get<int>();
      else unknown_key("sim", key);
    } catch (const json::exception& e) {
      bad_value("sim", key, e.what());
    }
  }
  return c;
}

json to_json(const EvalConfig& c) { return json{{"kde_grid", c.kde_grid}}; }

EvalConfig eval_from_json(const json& j) {
  require_object(j, "eval");
  EvalConfig c;
  for (const auto& [key, val] : j.items()) {
    try {
      if (key == "kde_grid") c.kde_grid = val.get<int>();
      else unknown_key("eval", key);
    } catch (const json::exception& e) {
      bad_value("eval", key, e.what());
    }
  }
  return c;
}

json to_json(const RunConfig& c) {
  return json{{"model", to_json(c.model)},     {"camera", to_json(c.camera)},
              {"bev", to_json(c.bev)},         {"world", to_json(c.world)},
              {"monitor", to_json(c.monitor)}, {"train", to_json(c.train)},
              {"sim", to_json(c.sim)},         {"eval", to_json(c.eval)},
              {"seed", c.seed}};
}

RunConfig run_config_from_json(const json& j) {
  require_object(j, "run config");
  RunConfig c = default_run_config();
  for (const auto& [key, val] : j.items()) {
    if (key == "model") c.model = paad_config_from_json(val);
    else if (key == "camera") c.camera = camera_from_json(val);
    else if (key == "bev") c.bev = bev_from_json(val);
    else if (key == "world") c.world = world_from_json(val);
    else if (key == "monitor") c.monitor = monitor_from_json(val);
    else if (key == "train") c.train = train_from_json(val);
    else if (key == "sim") c.sim = sim_from_json(val);
    else if (key == "eval") c.eval = eval_from_json(val);
    else if (key == "seed") {
      try {
        c.seed = val.get<uint64_t>();
      } catch (const json::exception& e) {
        bad_value("run config", key, e.what());
      }
    } else unknown_key("run config", key);
  }
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

void save_run_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config file: " + path);
  out << to_json(cfg).dump(2) << "\n";
  if (!out) throw IoError("short write to config file: " + path);
}

}  // namespace paad
