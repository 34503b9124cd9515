#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "paad/errors.hpp"
#include "paad/fieldsim.hpp"

namespace paad {

// Recorded frames on disk: a fixed-shape header followed by one record per
// frame (episode, step, timestamp, image bytes, ranges as 32-bit reals,
// waypoints, labels). Write then read returns every field byte for byte.

struct Dataset {
  uint16_t image_h = 0;
  uint16_t image_w = 0;
  uint16_t lidar_beams = 0;
  uint16_t horizon = 0;
  std::vector<ObservationFrame> frames;

  // DimensionError when any frame disagrees with the header shapes.
  void validate() const;

  // frames whose horizon contains at least one failure
  int64_t anomalous_count() const;
};

Dataset dataset_from_frames(std::vector<ObservationFrame> frames, int image_h, int image_w,
                            int lidar_beams, int horizon);

void save_dataset(const Dataset& ds, const std::string& path);  // IoError

// IoError on a bad magic, unsupported version, truncation, or trailing bytes.
Dataset load_dataset(const std::string& path);

}  // namespace paad
