#pragma once

#include <cstdint>
#include <vector>

#include "paad/errors.hpp"

namespace paad {

// Offline evaluation over flat pools of (probability, label) pairs.
// The positive class is "failure".

struct F1Result {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // set when any denominator was zero and the corresponding value was
  // reported as 0 instead
  bool degenerate = false;
};

// Threshold fixed at 0.5; a prediction is positive iff p > 0.5 (strict).
// InputError on empty or mismatched inputs, or labels outside {0,1}.
F1Result f1_at_half(const std::vector<float>& preds, const std::vector<uint8_t>& labels);

struct PrPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

struct PrCurve {
  // one point per distinct score, thresholds descending; recall is
  // non-decreasing down the list
  std::vector<PrPoint> points;
  double auc = 0.0;  // average precision
};

// Sweeps every distinct score as a threshold (classify positive iff
// p >= threshold), handling tied scores atomically, and accumulates
// average precision. InputError unless both classes are present.
PrCurve pr_auc(const std::vector<float>& preds, const std::vector<uint8_t>& labels);

struct DensityEstimate {
  std::vector<double> x;        // grid midpoints in (0,1)
  std::vector<double> density;  // >= 0, integrates to 1 over the grid
  double bandwidth = 0.0;       // in logit space
};

// Gaussian KDE on (0,1): samples are clamped away from the endpoints,
// mapped through the logit, smoothed with a Silverman-rule bandwidth,
// and mapped back with the 1/(x(1-x)) change-of-variables factor. The
// result is renormalized so the midpoint-rule integral is exactly 1.
// InputError with fewer than 2 samples or a grid smaller than 2.
DensityEstimate kde_bounded(const std::vector<float>& samples, int grid_size);

}  // namespace paad
