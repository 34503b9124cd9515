#include "paad/dataset.hpp"

#include <fstream>

#include "wire.hpp"

namespace paad {

namespace {
constexpr char kMagic[4] = {'P', 'A', 'D', 'S'};
constexpr uint16_t kVersion = 1;
}  // namespace

void Dataset::validate() const {
  const size_t px = static_cast<size_t>(image_h) * image_w;
  for (const ObservationFrame& f : frames) {
    if (f.image.h != image_h || f.image.w != image_w || f.image.px.size() != px)
      throw DimensionError("frame image does not match the dataset header");
    if (f.lidar.size() != lidar_beams)
      throw DimensionError("frame scan does not match the dataset header");
    if (f.path.pts.size() != horizon || f.labels.size() != horizon)
      throw DimensionError("frame horizon does not match the dataset header");
  }
}

int64_t Dataset::anomalous_count() const {
  int64_t n = 0;
  for (const ObservationFrame& f : frames) {
    bool any = false;
    for (uint8_t y : f.labels) any = any || y != 0;
    n += any ? 1 : 0;
  }
  return n;
}

Dataset dataset_from_frames(std::vector<ObservationFrame> frames, int image_h, int image_w,
                            int lidar_beams, int horizon) {
  Dataset ds;
  ds.image_h = static_cast<uint16_t>(image_h);
  ds.image_w = static_cast<uint16_t>(image_w);
  ds.lidar_beams = static_cast<uint16_t>(lidar_beams);
  ds.horizon = static_cast<uint16_t>(horizon);
  ds.frames = std::move(frames);
  ds.validate();
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
  ds.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write dataset file: " + path);
  out.write(kMagic, 4);
  wire::put_u16(out, kVersion);
  wire::put_u16(out, ds.image_h);
  wire::put_u16(out, ds.image_w);
  wire::put_u16(out, ds.lidar_beams);
  wire::put_u16(out, ds.horizon);
  wire::put_u32(out, static_cast<uint32_t>(ds.frames.size()));
  for (const ObservationFrame& f : ds.frames) {
    wire::put_u32(out, f.episode);
    wire::put_u32(out, f.step);
    wire::put_f64(out, f.stamp);
    out.write(reinterpret_cast<const char*>(f.image.px.data()),
              static_cast<std::streamsize>(f.image.px.size()));
    for (float r : f.lidar) wire::put_f32(out, r);
    for (const Vec2& wp : f.path.pts) {
      wire::put_f64(out, wp.x);
      wire::put_f64(out, wp.y);
    }
    out.write(reinterpret_cast<const char*>(f.labels.data()),
              static_cast<std::streamsize>(f.labels.size()));
  }
  out.flush();
  if (!out) throw IoError("short write to dataset file: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset file: " + path);
  char magic[4];
  wire::get_raw(in, magic, 4, "dataset magic");
  if (std::memcmp(magic, kMagic, 4) != 0) throw IoError("not a dataset file: " + path);
  const uint16_t version = wire::get_u16(in, "dataset version");
  if (version != kVersion)
    throw IoError("unsupported dataset version " + std::to_string(version));

  Dataset ds;
  ds.image_h = wire::get_u16(in, "image height");
  ds.image_w = wire::get_u16(in, "image width");
  ds.lidar_beams = wire::get_u16(in, "beam count");
  ds.horizon = wire::get_u16(in, "horizon");
  const uint32_t count = wire::get_u32(in, "frame count");
  const size_t px = static_cast<size_t>(ds.image_h) * ds.image_w;

  ds.frames.resize(count);
  for (uint32_t i = 0; i < count; ++i) {
    ObservationFrame& f = ds.frames[i];
    f.episode = wire::get_u32(in, "episode id");
    f.step = wire::get_u32(in, "step");
    f.stamp = wire::get_f64(in, "timestamp");
    f.image.h = ds.image_h;
    f.image.w = ds.image_w;
    f.image.px.resize(px);
    wire::get_raw(in, f.image.px.data(), px, "image bytes");
    f.lidar.resize(ds.lidar_beams);
    for (float& r : f.lidar) r = wire::get_f32(in, "scan ranges");
    f.path.pts.resize(ds.horizon);
    for (Vec2& wp : f.path.pts) {
      wp.x = wire::get_f64(in, "waypoints");
      wp.y = wire::get_f64(in, "waypoints");
    }
    f.labels.resize(ds.horizon);
    wire::get_raw(in, f.labels.data(), ds.horizon, "labels");
  }
  if (in.peek() != std::char_traits<char>::eof())
    throw IoError("trailing bytes after the declared records: " + path);
  ds.validate();
  return ds;
}

}  // namespace paad
