#include "paad/fieldsim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace paad {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kMaxCircleRadius = 0.12;  // window margin for the x index
constexpr double kLookahead = 0.8;
constexpr double kMaxTurnPerStep = 0.25;
constexpr double kHeadingClamp = 1.2;

float cast_beam(const Circle* circles, size_t n, double ox, double oy, double dx, double dy,
                double max_range) {
  double best = max_range;
  for (size_t i = 0; i < n; ++i) {
    const double cxo = ox - circles[i].x;
    const double cyo = oy - circles[i].y;
    const double b = cxo * dx + cyo * dy;
    const double c = cxo * cxo + cyo * cyo - circles[i].r * circles[i].r;
    const double disc = b * b - c;
    if (disc < 0) continue;
    const double s = std::sqrt(disc);
    double t = -b - s;
    if (t <= 1e-9) t = -b + s;
    if (t > 1e-9 && t < best) best = t;
  }
  return static_cast<float>(best);
}

}  // namespace

void WorldConfig::validate() const {
  if (!(row_spacing > 0) || !(stalk_pitch > 0) || !(length > 0))
    throw ConfigError("world: spacing, pitch and length must be positive");
  if (!(stalk_radius > 0) || stalk_radius * 1.2 > kMaxCircleRadius ||
      clutter_radius > kMaxCircleRadius)
    throw ConfigError("world: obstacle radii must be in (0, 0.1]");
  if (gap_prob < 0 || gap_prob > 1 || camera_occlusion_prob < 0 ||
      camera_occlusion_prob > 1 || lidar_occlusion_prob < 0 || lidar_occlusion_prob > 1 ||
      heading_fault_prob < 0 || heading_fault_prob > 1)
    throw ConfigError("world: probabilities must be in [0,1]");
  if (clutter_density < 0) throw ConfigError("world: clutter density must be >= 0");
  if (!(speed > 0) || !(frame_rate > 0))
    throw ConfigError("world: speed and frame rate must be positive");
  if (!(lidar_max_range > 0)) throw ConfigError("world: lidar range must be positive");
  if (fault_min_frames < 1 || fault_max_frames < fault_min_frames)
    throw ConfigError("world: fault duration range is empty");
}

std::pair<size_t, size_t> World::x_window(double lo, double hi) const {
  auto cmp_lo = [](const Circle& c, double v) { return c.x < v; };
  auto cmp_hi = [](double v, const Circle& c) { return v < c.x; };
  const size_t a =
      std::lower_bound(circles.begin(), circles.end(), lo, cmp_lo) - circles.begin();
  const size_t b =
      std::upper_bound(circles.begin(), circles.end(), hi, cmp_hi) - circles.begin();
  return {a, b};
}

World generate_world(const WorldConfig& cfg) {
  cfg.validate();
  World world;
  world.cfg = cfg;
  Rng rng = Rng::derive(cfg.seed, {kStreamWorld});

  const int n = static_cast<int>(std::floor(cfg.length / cfg.stalk_pitch));
  const double half = cfg.row_spacing / 2.0;
  for (int k = 0; k < n; ++k) {
    for (int side = 0; side < 2; ++side) {
      const bool gap = rng.bernoulli(cfg.gap_prob);
      const double jitter = 0.8 + 0.4 * rng.uniform();
      if (gap) continue;
      Circle c;
      c.x = k * cfg.stalk_pitch;
      c.y = side == 0 ? -half : half;
      c.r = cfg.stalk_radius * jitter;
      c.kind = 0;
      world.circles.push_back(c);
    }
  }

  const int nc = static_cast<int>(std::floor(cfg.clutter_density * cfg.length));
  const double margin = cfg.clutter_radius + 0.02;
  for (int k = 0; k < nc; ++k) {
    Circle c;
    c.x = rng.uniform(0.0, cfg.length);
    c.y = rng.uniform(-(half - margin), half - margin);
    c.r = cfg.clutter_radius * (0.7 + 0.6 * rng.uniform());
    c.kind = 1;
    world.circles.push_back(c);
  }

  std::sort(world.circles.begin(), world.circles.end(),
            [](const Circle& a, const Circle& b) { return a.x < b.x; });
  return world;
}

namespace kern {

std::vector<float> lidar_scan(const World& world, const Pose& pose) {
  const double max_range = world.cfg.lidar_max_range;
  const auto [i0, i1] =
      world.x_window(pose.x - max_range - kMaxCircleRadius, pose.x + max_range + kMaxCircleRadius);
  const Circle* cs = world.circles.data() + i0;
  const size_t n = i1 - i0;
  std::vector<float> out(kLidarBeams);
  const double base = pose.heading - kLidarFovDeg / 2.0 * kPi / 180.0;
  const double step = kLidarStepDeg * kPi / 180.0;
#pragma omp parallel for schedule(static)
  for (int i = 0; i < kLidarBeams; ++i) {
    const double a = base + step * i;
    out[static_cast<size_t>(i)] =
        cast_beam(cs, n, pose.x, pose.y, std::cos(a), std::sin(a), max_range);
  }
  return out;
}

}  // namespace kern

namespace ref {

std::vector<float> lidar_scan(const World& world, const Pose& pose) {
  const double max_range = world.cfg.lidar_max_range;
  std::vector<float> out(kLidarBeams);
  const double base = pose.heading - kLidarFovDeg / 2.0 * kPi / 180.0;
  const double step = kLidarStepDeg * kPi / 180.0;
  for (int i = 0; i < kLidarBeams; ++i) {
    const double a = base + step * i;
    out[static_cast<size_t>(i)] = cast_beam(world.circles.data(), world.circles.size(), pose.x,
                                            pose.y, std::cos(a), std::sin(a), max_range);
  }
  return out;
}

}  // namespace ref

Image8 render_camera(const World& world, const Pose& pose, const CameraModel& cam,
                     const OcclusionEvent* occlusion) {
  cam.validate();
  Image8 img;
  img.h = cam.image_h;
  img.w = cam.image_w;
  img.px.assign(static_cast<size_t>(img.h) * img.w, 0);

  const double view_range = 12.0;
  const auto [i0, i1] = world.x_window(pose.x - view_range, pose.x + view_range);
  const double ch = std::cos(pose.heading), sh = std::sin(pose.heading);
  const double ct = std::cos(cam.pitch_rad), st = std::sin(cam.pitch_rad);

  struct Splat {
    double depth;
    size_t idx;
  };
  std::vector<Splat> order;
  for (size_t i = i0; i < i1; ++i) {
    const Circle& c = world.circles[i];
    const double dx = c.x - pose.x, dy = c.y - pose.y;
    const double fwd = ch * dx + sh * dy;
    if (fwd < 0.12 || fwd > view_range) continue;
    order.push_back({fwd, i});
  }
  std::sort(order.begin(), order.end(), [](const Splat& a, const Splat& b) {
    if (a.depth != b.depth) return a.depth > b.depth;  // far first
    return a.idx < b.idx;
  });

  for (const Splat& s : order) {
    const Circle& c = world.circles[s.idx];
    const double dx = c.x - pose.x, dy = c.y - pose.y;
    const double fwd = ch * dx + sh * dy;
    const double lat = -sh * dx + ch * dy;
    const double obj_h = c.kind == 0 ? world.cfg.stalk_height : 2.5 * c.r;

    // rows for the base (z = 0) and the top (z = obj_h)
    const double depth0 = fwd * ct + cam.height_m * st;
    const double depth1 = fwd * ct + (cam.height_m - obj_h) * st;
    if (depth0 < 0.05 || depth1 < 0.05) continue;
    const double col = cam.cx + cam.focal_px * lat / depth0;
    const double row0 = cam.cy + cam.focal_px * (cam.height_m * ct - fwd * st) / depth0;
    const double row1 =
        cam.cy + cam.focal_px * ((cam.height_m - obj_h) * ct - fwd * st) / depth1;
    const double wpx = cam.focal_px * c.r / depth0;

    int r_top = static_cast<int>(std::lround(std::min(row0, row1)));
    int r_bot = static_cast<int>(std::lround(std::max(row0, row1)));
    int c_lo = static_cast<int>(std::lround(col - wpx));
    int c_hi = static_cast<int>(std::lround(col + wpx));
    r_top = std::max(r_top, 0);
    r_bot = std::min(r_bot, img.h - 1);
    c_lo = std::max(c_lo, 0);
    c_hi = std::min(c_hi, img.w - 1);
    if (r_top > r_bot || c_lo > c_hi) continue;

    const uint64_t tone = Rng::mix(world.cfg.seed ^ (0x9e3779b97f4a7c15ull * (s.idx + 1)));
    const double base_v = c.kind == 0 ? 110.0 + double(tone % 70) : 70.0 + double(tone % 40);
    const double v = base_v + 90.0 / (1.0 + 0.3 * fwd);
    const uint8_t shade = static_cast<uint8_t>(std::min(245.0, v));
    for (int r = r_top; r <= r_bot; ++r)
      for (int cc = c_lo; cc <= c_hi; ++cc)
        img.px[static_cast<size_t>(r) * img.w + cc] = shade;
  }

  if (occlusion) {
    const double cov = std::clamp(occlusion->coverage, 0.0, 1.0);
    const int r0 = static_cast<int>(std::lround(img.h * (1.0 - cov)));
    Rng rng(occlusion->texture_seed);
    for (int r = std::max(r0, 0); r < img.h; r += 2) {
      for (int cc = 0; cc < img.w; cc += 2) {
        const uint8_t v = static_cast<uint8_t>(120 + rng.next_below(110));
        for (int rr = r; rr < std::min(r + 2, img.h); ++rr)
          for (int c2 = cc; c2 < std::min(cc + 2, img.w); ++c2)
            img.px[static_cast<size_t>(rr) * img.w + c2] = v;
      }
    }
  }
  return img;
}

PlannedPath plan_path(const World& world, const Pose& pose, const PlanNoise& noise,
                      int horizon) {
  if (horizon < 1) throw InputError("plan: horizon must be >= 1");
  const double spacing = world.cfg.step_m();
  PlannedPath local;
  local.pts.reserve(static_cast<size_t>(horizon));

  double x = pose.x, y = pose.y, psi = pose.heading;
  const double ch = std::cos(pose.heading), sh = std::sin(pose.heading);
  for (int k = 0; k < horizon; ++k) {
    const double desired = noise.heading_bias + std::atan2(-y, kLookahead);
    const double delta = std::clamp(desired - psi, -kMaxTurnPerStep, kMaxTurnPerStep);
    psi = std::clamp(psi + delta, -kHeadingClamp, kHeadingClamp);
    x += spacing * std::cos(psi);
    y += spacing * std::sin(psi);
    const double dx = x - pose.x, dy = y - pose.y;
    local.pts.push_back({ch * dx + sh * dy, -sh * dx + ch * dy});
  }
  return local;
}

PlannedPath to_world_frame(const PlannedPath& local, const Pose& pose) {
  PlannedPath world;
  world.pts.reserve(local.pts.size());
  const double ch = std::cos(pose.heading), sh = std::sin(pose.heading);
  for (const Vec2& p : local.pts)
    world.pts.push_back({pose.x + ch * p.x - sh * p.y, pose.y + sh * p.x + ch * p.y});
  return world;
}

std::vector<uint8_t> label_horizon(const World& world, const PlannedPath& world_path) {
  const double half = world.cfg.row_spacing / 2.0;
  const double reach = kMaxCircleRadius + world.cfg.robot_radius + 1e-6;
  std::vector<uint8_t> labels(world_path.pts.size(), 0);
  bool failed = false;
  for (size_t k = 0; k < world_path.pts.size(); ++k) {
    if (!failed) {
      const Vec2& p = world_path.pts[k];
      if (std::abs(p.y) > half) {
        failed = true;
      } else {
        const auto [a, b] = world.x_window(p.x - reach, p.x + reach);
        for (size_t i = a; i < b; ++i) {
          const Circle& c = world.circles[i];
          const double d2 = (c.x - p.x) * (c.x - p.x) + (c.y - p.y) * (c.y - p.y);
          const double lim = c.r + world.cfg.robot_radius;
          if (d2 < lim * lim) {
            failed = true;
            break;
          }
        }
      }
    }
    labels[k] = failed ? 1 : 0;
  }
  return labels;
}

namespace {

bool pose_failed(const World& world, const Pose& pose) {
  PlannedPath p;
  p.pts.push_back({pose.x, pose.y});
  return label_horizon(world, p)[0] != 0;
}

}  // namespace

std::vector<ObservationFrame> run_episode(const WorldConfig& cfg, const CameraModel& cam,
                                          int steps, int horizon, uint32_t episode_id) {
  if (steps < 0) throw InputError("episode: steps must be >= 0");
  if (horizon < 1) throw InputError("episode: horizon must be >= 1");
  const World world = generate_world(cfg);

  Pose robot{1.0, 0.0, 0.0};
  int fault_left = 0;
  double fault_bias = 0;

  std::vector<ObservationFrame> frames;
  frames.reserve(static_cast<size_t>(steps));
  for (int t = 0; t < steps; ++t) {
    Rng rng_fault = Rng::derive(cfg.seed, {kStreamFault, static_cast<uint64_t>(t)});
    if (fault_left == 0 && rng_fault.bernoulli(cfg.heading_fault_prob)) {
      fault_left = cfg.fault_min_frames +
                   static_cast<int>(rng_fault.next_below(
                       static_cast<uint64_t>(cfg.fault_max_frames - cfg.fault_min_frames + 1)));
      const double mag = rng_fault.uniform(cfg.fault_bias_min, cfg.fault_bias_max);
      fault_bias = rng_fault.bernoulli(0.5) ? mag : -mag;
    }

    PlanNoise noise;
    noise.heading_bias = fault_left > 0 ? fault_bias : 0.0;
    const PlannedPath local = plan_path(world, robot, noise, horizon);
    const PlannedPath wpath = to_world_frame(local, robot);

    ObservationFrame frame;
    frame.episode = episode_id;
    frame.step = static_cast<uint32_t>(t);
    frame.stamp = static_cast<double>(t) / cfg.frame_rate;
    frame.path = local;
    frame.labels = label_horizon(world, wpath);

    frame.lidar = kern::lidar_scan(world, robot);
    Rng rng_lo = Rng::derive(cfg.seed, {kStreamOcclusionLidar, static_cast<uint64_t>(t)});
    if (rng_lo.bernoulli(cfg.lidar_occlusion_prob)) {
      const double cov = rng_lo.uniform(0.7, 1.0);
      const int count = static_cast<int>(cov * kLidarBeams);
      const int start = static_cast<int>(rng_lo.next_below(kLidarBeams));
      for (int i = 0; i < count; ++i) {
        const int b = (start + i) % kLidarBeams;
        frame.lidar[static_cast<size_t>(b)] =
            static_cast<float>(0.05 + 0.3 * rng_lo.uniform());
      }
    }

    Rng rng_co = Rng::derive(cfg.seed, {kStreamOcclusionCamera, static_cast<uint64_t>(t)});
    if (rng_co.bernoulli(cfg.camera_occlusion_prob)) {
      OcclusionEvent ev;
      ev.coverage = rng_co.uniform(0.7, 0.95);
      ev.texture_seed = rng_co.next_u64();
      frame.image = render_camera(world, robot, cam, &ev);
    } else {
      frame.image = render_camera(world, robot, cam, nullptr);
    }

    frames.push_back(std::move(frame));

    // execute the first planned step
    if (fault_left > 0) --fault_left;
    const PlannedPath first = to_world_frame(local, robot);
    const double nx = first.pts[0].x, ny = first.pts[0].y;
    robot.heading = std::atan2(ny - robot.y, nx - robot.x);
    robot.x = nx;
    robot.y = ny;

    if (pose_failed(world, robot)) {
      robot.x += 1.0;
      robot.y = 0.0;
      robot.heading = 0.0;
      fault_left = 0;
      fault_bias = 0;
    }
    if (robot.x > cfg.length - 3.0) {
      robot.x = 1.0;
      robot.y = 0.0;
      robot.heading = 0.0;
      fault_left = 0;
      fault_bias = 0;
    }
  }
  return frames;
}

}  // namespace paad
