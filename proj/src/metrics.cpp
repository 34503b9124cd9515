#include "paad/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace paad {

namespace {

void check_pool(const std::vector<float>& preds, const std::vector<uint8_t>& labels) {
  if (preds.empty()) throw InputError("metric pool is empty");
  if (preds.size() != labels.size())
    throw InputError("prediction and label counts differ");
  for (uint8_t y : labels)
    if (y > 1) throw InputError("labels must be 0 or 1");
}

}  // namespace

F1Result f1_at_half(const std::vector<float>& preds, const std::vector<uint8_t>& labels) {
  check_pool(preds, labels);
  int64_t tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    const bool pos = preds[i] > 0.5f;
    if (pos && labels[i]) ++tp;
    if (pos && !labels[i]) ++fp;
    if (!pos && labels[i]) ++fn;
  }
  F1Result r;
  if (tp + fp > 0)
    r.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  else
    r.degenerate = true;
  if (tp + fn > 0)
    r.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  else
    r.degenerate = true;
  if (r.precision + r.recall > 0)
    r.f1 = 2.0 * r.precision * r.recall / (r.precision + r.recall);
  else
    r.degenerate = true;
  return r;
}

PrCurve pr_auc(const std::vector<float>& preds, const std::vector<uint8_t>& labels) {
  check_pool(preds, labels);
  int64_t total_pos = 0;
  for (uint8_t y : labels) total_pos += y;
  if (total_pos == 0 || total_pos == static_cast<int64_t>(labels.size()))
    throw InputError("PR curve needs both classes in the pool");

  std::vector<size_t> order(preds.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return preds[a] > preds[b]; });

  PrCurve curve;
  int64_t tp = 0, fp = 0;
  double prev_recall = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    // consume every pair tied at this score before measuring the point
    const float score = preds[order[i]];
    while (i < order.size() && preds[order[i]] == score) {
      if (labels[order[i]]) ++tp; else ++fp;
      ++i;
    }
    PrPoint pt;
    pt.threshold = score;
    pt.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    pt.recall = static_cast<double>(tp) / static_cast<double>(total_pos);
    curve.auc += pt.precision * (pt.recall - prev_recall);
    prev_recall = pt.recall;
    curve.points.push_back(pt);
  }
  return curve;
}

DensityEstimate kde_bounded(const std::vector<float>& samples, int grid_size) {
  if (samples.size() < 2) throw InputError("density estimate needs at least 2 samples");
  if (grid_size < 2) throw InputError("density grid needs at least 2 points");

  const double lo = 1e-6, hi = 1.0 - 1e-6;
  const size_t n = samples.size();
  std::vector<double> u(n);
  for (size_t i = 0; i < n; ++i) {
    const double x = std::clamp(static_cast<double>(samples[i]), lo, hi);
    u[i] = std::log(x / (1.0 - x));
  }

  double mean = 0.0;
  for (double v : u) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : u) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n - 1);
  const double sd = std::sqrt(var);

  std::vector<double> sorted = u;
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(n - 1);
    const size_t k = static_cast<size_t>(pos);
    const double frac = pos - static_cast<double>(k);
    if (k + 1 >= n) return sorted[n - 1];
    return sorted[k] * (1.0 - frac) + sorted[k + 1] * frac;
  };
  const double iqr = quantile(0.75) - quantile(0.25);

  double spread = sd;
  if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
  if (!(spread > 1e-12)) spread = 1e-3;  // all samples identical after clamping
  const double h = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);

  DensityEstimate est;
  est.bandwidth = h;
  est.x.resize(grid_size);
  est.density.resize(grid_size);
  const double cell = 1.0 / static_cast<double>(grid_size);
  const double norm = 1.0 / (static_cast<double>(n) * h * std::sqrt(2.0 * M_PI));
  for (int g = 0; g < grid_size; ++g) {
    const double x = (static_cast<double>(g) + 0.5) * cell;
    est.x[g] = x;
    const double ux = std::log(x / (1.0 - x));
    double f = 0.0;
    for (double v : u) {
      const double t = (ux - v) / h;
      f += std::exp(-0.5 * t * t);
    }
    est.density[g] = norm * f / (x * (1.0 - x));
  }

  double integral = 0.0;
  for (double d : est.density) integral += d * cell;
  if (!(integral > 0.0)) throw NumericError("density estimate collapsed to zero");
  for (double& d : est.density) d /= integral;
  return est;
}

}  // namespace paad
