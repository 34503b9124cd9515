#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <type_traits>
#include <vector>

#include "paad/model.hpp"

namespace paad {

// Mixed training objective: alpha-weighted binary cross-entropy on the
// failure profile plus the Gaussian reconstruction error and the closed-form
// divergence of the scan posterior from the standard normal prior. All terms
// follow a dataset-sum convention: a batch contributes its sum scaled by
// N / B, so reported values estimate the full-dataset objective.

struct LossBreakdown {
  double bce = 0;  // dataset-sum estimates
  double recon_nll = 0;
  double kl = 0;
  double total = 0;
  double alpha = 0;
};

constexpr double kBceClamp = 1e-7;
constexpr double kLogVarianceFloor = 1e-12;

// mean over the horizon of the clamped cross-entropy for one profile
template <class S>
double bce_profile(const S* p, const uint8_t* y, int t) {
  double acc = 0;
  for (int i = 0; i < t; ++i) {
    const double pi = std::clamp(static_cast<double>(p[i]), kBceClamp, 1.0 - kBceClamp);
    acc += y[i] ? -std::log(pi) : -std::log(1.0 - pi);
  }
  return acc / t;
}

template <class S>
double bce(const TensorT<S>& pred, const std::vector<uint8_t>& label) {
  if (pred.ndim() != 1 || pred.dim(0) != static_cast<int>(label.size()))
    throw DimensionError("cross-entropy: profile " + pred.shape_str() + " vs " +
                         std::to_string(label.size()) + " labels");
  return bce_profile(pred.ptr(), label.data(), pred.dim(0));
}

// (1 / (2 sigma^2)) * ||x - mean||^2, the Gaussian misfit up to a constant
template <class S>
double gaussian_recon_nll(const TensorT<S>& x, const TensorT<S>& mean, double sigma_hyper) {
  if (!(sigma_hyper > 0)) throw ConfigError("reconstruction sigma must be positive");
  if (!x.same_shape(mean))
    throw DimensionError("reconstruction: target " + x.shape_str() + " vs mean " +
                         mean.shape_str());
  double acc = 0;
  for (int64_t i = 0; i < x.numel(); ++i) {
    const double d = static_cast<double>(x.data[static_cast<size_t>(i)]) -
                     static_cast<double>(mean.data[static_cast<size_t>(i)]);
    acc += d * d;
  }
  return acc / (2.0 * sigma_hyper * sigma_hyper);
}

// 1/2 sum(mu^2 + sigma^2 - 1 - log sigma^2) against the standard normal
template <class S>
double kl_to_standard_normal(const TensorT<S>& mu, const TensorT<S>& sigma) {
  if (!mu.same_shape(sigma))
    throw DimensionError("divergence: mu " + mu.shape_str() + " vs sigma " +
                         sigma.shape_str());
  double acc = 0;
  for (int64_t i = 0; i < mu.numel(); ++i) {
    const double m = static_cast<double>(mu.data[static_cast<size_t>(i)]);
    const double s = static_cast<double>(sigma.data[static_cast<size_t>(i)]);
    if (!(s > 0)) throw NumericError("divergence: sigma must be positive");
    const double s2 = std::max(s * s, kLogVarianceFloor);
    acc += m * m + s2 - 1.0 - std::log(s2);
  }
  return 0.5 * acc;
}

// One training batch, already encoded to model inputs.
template <class S>
struct Batch {
  TensorT<S> path;              // [B,1,rows,cols]
  TensorT<S> image;             // [B,1,H,W]; empty without the camera branch
  TensorT<S> lidar;             // [B,L] normalized; empty without the LiDAR branch
  std::vector<uint8_t> labels;  // B * T, row-major

  int size() const { return path.ndim() > 0 ? path.dim(0) : 0; }
};

struct LossScale {
  double alpha = 1.0;
  double sigma_hyper = 1.0;
  int64_t dataset_size = 1;  // N in the dataset-sum convention
};

// Evaluates the objective on one batch; with backprop it also accumulates
// parameter gradients (one frozen posterior draw per datapoint, passed as
// `noise` whenever the decoder is active).
template <class S>
LossBreakdown total_loss(ModelT<S>& m, const Batch<S>& batch, const LossScale& scale,
                         std::type_identity_t<const TensorT<S>*> noise, bool backprop) {
  if (!m.training) throw StateError("the training objective requires training mode");
  if (!(scale.sigma_hyper > 0)) throw ConfigError("reconstruction sigma must be positive");
  if (scale.dataset_size < 1) throw ConfigError("dataset size must be positive");
  const PaadConfig& cfg = m.cfg;
  const int bn = batch.size();
  if (bn < 1) throw InputError("empty batch");
  if (static_cast<int>(batch.labels.size()) != bn * cfg.horizon)
    throw DimensionError("labels: " + std::to_string(batch.labels.size()) + " for batch " +
                         std::to_string(bn) + " x horizon " + std::to_string(cfg.horizon));

  ForwardCache<S> cache;
  const auto out =
      forward(m, batch.path, batch.image, batch.lidar, noise, backprop ? &cache : nullptr);

  const double w = static_cast<double>(scale.dataset_size) / bn;
  LossBreakdown lb;
  lb.alpha = scale.alpha;

  TensorT<S> d_probs;
  if (backprop) d_probs = TensorT<S>({bn, cfg.horizon});
  for (int b = 0; b < bn; ++b) {
    const S* p = out.probs.ptr() + static_cast<int64_t>(b) * cfg.horizon;
    const uint8_t* y = batch.labels.data() + static_cast<int64_t>(b) * cfg.horizon;
    lb.bce += bce_profile(p, y, cfg.horizon);
    if (backprop) {
      S* dp = d_probs.ptr() + static_cast<int64_t>(b) * cfg.horizon;
      for (int t = 0; t < cfg.horizon; ++t) {
        const double pi = static_cast<double>(p[t]);
        if (pi < kBceClamp || pi > 1.0 - kBceClamp) continue;  // clamped flat
        const double dy = (pi - (y[t] ? 1.0 : 0.0)) / (pi * (1.0 - pi));
        dp[t] = static_cast<S>(scale.alpha * w * dy / cfg.horizon);
      }
    }
  }
  lb.bce *= w;

  const bool elbo = cfg.has_decoder();
  TensorT<S> d_recon, d_mu, d_sigma;
  if (elbo) {
    // reconstruction misfit against the normalized input scan
    const double inv_s2 = 1.0 / (scale.sigma_hyper * scale.sigma_hyper);
    if (backprop) d_recon = TensorT<S>({bn, cfg.lidar_beams});
    double sq = 0;
    for (int64_t i = 0; i < out.recon.numel(); ++i) {
      const double d = static_cast<double>(out.recon.data[static_cast<size_t>(i)]) -
                       static_cast<double>(batch.lidar.data[static_cast<size_t>(i)]);
      sq += d * d;
      if (backprop) d_recon.data[static_cast<size_t>(i)] = static_cast<S>(w * inv_s2 * d);
    }
    lb.recon_nll = w * 0.5 * inv_s2 * sq;

    if (backprop) {
      d_mu = TensorT<S>({bn, cfg.latent_dim});
      d_sigma = TensorT<S>({bn, cfg.latent_dim});
    }
    double kl = 0;
    for (int64_t i = 0; i < out.mu.numel(); ++i) {
      const double mu = static_cast<double>(out.mu.data[static_cast<size_t>(i)]);
      const double s = static_cast<double>(out.sigma.data[static_cast<size_t>(i)]);
      if (!(s > 0)) throw NumericError("divergence: sigma must be positive");
      const double s2 = std::max(s * s, kLogVarianceFloor);
      kl += mu * mu + s2 - 1.0 - std::log(s2);
      if (backprop) {
        d_mu.data[static_cast<size_t>(i)] = static_cast<S>(w * mu);
        const double ds = s * s > kLogVarianceFloor ? s - 1.0 / s : s;
        d_sigma.data[static_cast<size_t>(i)] = static_cast<S>(w * ds);
      }
    }
    lb.kl = w * 0.5 * kl;
  }

  lb.total = lb.alpha * lb.bce + lb.recon_nll + lb.kl;
  if (backprop)
    model_backward(m, cache, d_probs, elbo ? &d_recon : nullptr, elbo ? &d_mu : nullptr,
                   elbo ? &d_sigma : nullptr);
  return lb;
}

}  // namespace paad
