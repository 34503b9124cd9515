#include "paad/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace paad {

namespace {

constexpr double kMinDepth = 0.05;  // meters in front of the lens

// integer midpoint segment rasterization, endpoint-exact, clipped to frame
void draw_segment(PathImage& img, int64_t r0, int64_t c0, int64_t r1, int64_t c1) {
  const int64_t dr = std::abs(r1 - r0), dc = std::abs(c1 - c0);
  const int64_t sr = r0 < r1 ? 1 : -1, sc = c0 < c1 ? 1 : -1;
  int64_t err = (dc > dr ? dc : -dr) / 2;
  int64_t r = r0, c = c0;
  while (true) {
    if (r >= 0 && r < img.rows && c >= 0 && c < img.cols)
      img.set(static_cast<int>(r), static_cast<int>(c));
    if (r == r1 && c == c1) break;
    const int64_t e = err;
    if (e > -dc) {
      err -= dr;
      c += sc;
    }
    if (e < dr) {
      err += dc;
      r += sr;
    }
  }
}

}  // namespace

void CameraModel::validate() const {
  if (image_h < 1 || image_w < 1)
    throw ConfigError("camera: image size " + std::to_string(image_h) + "x" +
                      std::to_string(image_w) + " is empty");
  if (!(focal_px > 0)) throw ConfigError("camera: focal length must be positive");
  if (!(height_m > 0)) throw ConfigError("camera: mount height must be positive");
  if (cx < 0 || cx > image_w - 1 || cy < 0 || cy > image_h - 1)
    throw ConfigError("camera: principal point outside the image");
}

int CameraModel::horizon_row() const {
  const double row = cy - focal_px * std::tan(pitch_rad);
  const long r = std::lround(row);
  if (r < 0) return 0;
  if (r > image_h) return image_h;
  return static_cast<int>(r);
}

bool CameraModel::project_ground(const Vec2& p, double& row, double& col) const {
  const double ct = std::cos(pitch_rad), st = std::sin(pitch_rad);
  const double depth = p.x * ct + height_m * st;
  if (depth < kMinDepth) return false;
  col = cx + focal_px * p.y / depth;
  row = cy + focal_px * (height_m * ct - p.x * st) / depth;
  return true;
}

int64_t PathImage::count_nonzero() const {
  int64_t n = 0;
  for (uint8_t v : px) n += v != 0;
  return n;
}

PathImage project_path(const PlannedPath& path, const CameraModel& cam) {
  cam.validate();
  PathImage img;
  img.rows = cam.image_h;
  img.cols = cam.image_w;
  img.roi_row0 = 0;
  img.px.assign(static_cast<size_t>(img.rows) * img.cols, 0);

  std::vector<int64_t> rr, cc;
  std::vector<char> ok;
  rr.reserve(path.pts.size());
  for (const Vec2& p : path.pts) {
    double row, col;
    if (cam.project_ground(p, row, col) && std::abs(row) < 1e7 && std::abs(col) < 1e7) {
      rr.push_back(std::llround(row));
      cc.push_back(std::llround(col));
      ok.push_back(1);
    } else {
      rr.push_back(0);
      cc.push_back(0);
      ok.push_back(0);
    }
  }
  for (size_t i = 0; i < rr.size(); ++i) {
    if (!ok[i]) continue;
    if (i + 1 < rr.size() && ok[i + 1])
      draw_segment(img, rr[i], cc[i], rr[i + 1], cc[i + 1]);
    else
      draw_segment(img, rr[i], cc[i], rr[i], cc[i]);
  }
  return img;
}

PathImage crop_roi(const PathImage& img, const CameraModel& cam) {
  cam.validate();
  const int h0 = cam.horizon_row();
  if (h0 >= cam.image_h)
    throw ConfigError("crop: horizon row " + std::to_string(h0) + " leaves an empty region");
  if (img.roi_row0 == h0 && img.rows == cam.image_h - h0) return img;  // already cropped
  if (img.roi_row0 != 0 || img.rows != cam.image_h || img.cols != cam.image_w)
    throw DimensionError("crop: image " + std::to_string(img.rows) + "x" +
                         std::to_string(img.cols) + " does not match the camera frame");
  PathImage out;
  out.rows = cam.image_h - h0;
  out.cols = img.cols;
  out.roi_row0 = h0;
  out.px.assign(static_cast<size_t>(out.rows) * out.cols, 0);
  for (int r = 0; r < out.rows; ++r)
    std::copy_n(img.px.begin() + static_cast<size_t>(r + h0) * img.cols, img.cols,
                out.px.begin() + static_cast<size_t>(r) * out.cols);
  return out;
}

PathImage project_bev(const PlannedPath& path, const BevConfig& bev) {
  if (bev.grid_h < 1 || bev.grid_w < 1 || !(bev.px_per_m > 0))
    throw ConfigError("bev: invalid grid configuration");
  PathImage img;
  img.rows = bev.grid_h;
  img.cols = bev.grid_w;
  img.roi_row0 = 0;
  img.px.assign(static_cast<size_t>(img.rows) * img.cols, 0);

  std::vector<int64_t> rr, cc;
  for (const Vec2& p : path.pts) {
    rr.push_back(std::llround(bev.grid_h - p.x * bev.px_per_m));
    cc.push_back(std::llround(bev.grid_w / 2.0 + p.y * bev.px_per_m));
  }
  for (size_t i = 0; i < rr.size(); ++i) {
    if (i + 1 < rr.size())
      draw_segment(img, rr[i], cc[i], rr[i + 1], cc[i + 1]);
    else
      draw_segment(img, rr[i], cc[i], rr[i], cc[i]);
  }
  return img;
}

}  // namespace paad
