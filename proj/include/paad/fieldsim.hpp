#pragma once

#include <cstdint>
#include <vector>

#include "paad/geometry.hpp"
#include "paad/rng.hpp"

namespace paad {

// Synthetic under-canopy navigation world: two stalk rows parallel to the x
// axis at y = +-spacing/2, optional clutter inside the corridor, a scripted
// row-following planner with injectable heading faults, and simple camera /
// 2D LiDAR sensor models with independent per-frame corruption channels.

constexpr int kLidarBeams = 1081;
constexpr double kLidarFovDeg = 270.0;
constexpr double kLidarStepDeg = 0.25;

struct Pose {
  double x = 0;
  double y = 0;        // lateral, right-positive
  double heading = 0;  // rotates x toward y
};

struct WorldConfig {
  double row_spacing = 0.76;
  double stalk_radius = 0.025;
  double stalk_pitch = 0.25;
  double stalk_height = 1.5;
  double gap_prob = 0.05;
  double clutter_density = 0.05;  // circles per meter of corridor
  double clutter_radius = 0.06;
  double camera_occlusion_prob = 0.10;
  double lidar_occlusion_prob = 0.10;
  double heading_fault_prob = 0.012;  // onset probability per frame
  int fault_min_frames = 3;
  int fault_max_frames = 9;
  double fault_bias_min = 0.26;  // radians
  double fault_bias_max = 0.61;
  double length = 200.0;
  double robot_radius = 0.15;
  double speed = 0.6;       // m/s
  double frame_rate = 3.0;  // Hz
  double lidar_max_range = 10.0;
  uint64_t seed = 1;

  double step_m() const { return speed / frame_rate; }
  void validate() const;
};

struct Circle {
  double x = 0;
  double y = 0;
  double r = 0;
  uint8_t kind = 0;  // 0 stalk, 1 clutter
};

struct World {
  WorldConfig cfg;
  std::vector<Circle> circles;  // sorted by x

  // half-open index range of circles with center x in [lo, hi]
  std::pair<size_t, size_t> x_window(double lo, double hi) const;
};

struct Image8 {
  int h = 0;
  int w = 0;
  std::vector<uint8_t> px;

  uint8_t at(int r, int c) const { return px[static_cast<size_t>(r) * w + c]; }
};

struct OcclusionEvent {
  double coverage = 0.7;  // fraction of the frame replaced
  uint64_t texture_seed = 0;
};

struct PlanNoise {
  double heading_bias = 0;  // radians added to the planner's target heading
};

struct ObservationFrame {
  Image8 image;
  std::vector<float> lidar;
  PlannedPath path;             // robot frame
  std::vector<uint8_t> labels;  // one per waypoint, absorbing
  uint32_t episode = 0;
  uint32_t step = 0;
  double stamp = 0.0;  // seconds since episode start
};

World generate_world(const WorldConfig& cfg);

namespace kern {
// OpenMP ray cast over beams, using the world's sorted-x window.
std::vector<float> lidar_scan(const World& world, const Pose& pose);
}  // namespace kern

namespace ref {
// Serial brute-force twin; bit-identical to kern::lidar_scan.
std::vector<float> lidar_scan(const World& world, const Pose& pose);
}  // namespace ref

// Grayscale render: dark background, stalks as depth-scaled vertical splats,
// clutter as low blobs. An occlusion event overwrites the bottom `coverage`
// of the frame with a bright near-field texture and touches nothing else.
Image8 render_camera(const World& world, const Pose& pose, const CameraModel& cam,
                     const OcclusionEvent* occlusion = nullptr);

// Scripted row follower: rolls the pose toward the corridor centerline with
// fixed waypoint spacing; noise.heading_bias corrupts the target heading.
// Returns waypoints in the robot frame.
PlannedPath plan_path(const World& world, const Pose& pose, const PlanNoise& noise,
                      int horizon);

PlannedPath to_world_frame(const PlannedPath& local, const Pose& pose);

// Per-waypoint failure labels for a world-frame path: 1 when the waypoint is
// within collision distance of an obstacle or further than spacing/2 from the
// centerline. Labels absorb: once 1, all later waypoints are 1.
std::vector<uint8_t> label_horizon(const World& world, const PlannedPath& world_path);

// Deterministic episode rollout at the configured frame rate. The robot
// executes the first step of each plan; on failure it is reset to the
// centerline and the episode continues.
std::vector<ObservationFrame> run_episode(const WorldConfig& cfg, const CameraModel& cam,
                                          int steps, int horizon, uint32_t episode_id);

}  // namespace paad
