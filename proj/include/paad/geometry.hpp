#pragma once

#include <cstdint>
#include <vector>

#include "paad/errors.hpp"

namespace paad {

// Conventions: robot frame has x forward (meters) and y lateral, positive to
// the right; image row 0 is the top. A positive camera pitch tilts the view
// downward.

struct Vec2 {
  double x = 0;  // forward
  double y = 0;  // lateral, right-positive
};

struct CameraModel {
  double focal_px = 160.0;
  double cx = 160.0;  // principal point column
  double cy = 120.0;  // principal point row
  double height_m = 0.3;
  double pitch_rad = 0.0;
  int image_h = 240;
  int image_w = 320;

  void validate() const;
  // first image row at or below the horizon; rows above it see no ground
  int horizon_row() const;
  // projects a ground point in the robot frame; returns false when the point
  // is behind the camera
  bool project_ground(const Vec2& p, double& row, double& col) const;
};

struct PlannedPath {
  std::vector<Vec2> pts;
};

// Binary rasterized view of a planned path. roi_row0 keeps the original row
// index of the first stored row after cropping.
struct PathImage {
  int rows = 0;
  int cols = 0;
  int roi_row0 = 0;
  std::vector<uint8_t> px;

  uint8_t at(int r, int c) const { return px[static_cast<size_t>(r) * cols + c]; }
  void set(int r, int c) { px[static_cast<size_t>(r) * cols + c] = 1; }
  int64_t count_nonzero() const;
};

struct BevConfig {
  int grid_h = 80;
  int grid_w = 80;
  double px_per_m = 20.0;
};

// Forward-camera rasterization of the path onto the ground plane. Waypoints
// behind the camera are skipped; segments are clipped to the frame.
PathImage project_path(const PlannedPath& path, const CameraModel& cam);

// Crops everything above the horizon row. Idempotent: cropping an already
// cropped image returns it unchanged.
PathImage crop_roi(const PathImage& img, const CameraModel& cam);

// Top-down rasterization with the robot at the bottom-center of the grid.
PathImage project_bev(const PlannedPath& path, const BevConfig& bev);

}  // namespace paad
