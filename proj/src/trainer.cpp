#include "paad/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "paad/metrics.hpp"

namespace paad {

namespace {

void fisher_yates(std::vector<size_t>& v, Rng& rng) {
  for (size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[rng.next_below(i)]);
}

bool frame_anomalous(const ObservationFrame& f) {
  for (uint8_t y : f.labels)
    if (y) return true;
  return false;
}

// resize a class to m frames: subsample when large, tile + top up when small
std::vector<size_t> resample_class(const std::vector<size_t>& cls, size_t m, Rng& rng) {
  std::vector<size_t> out;
  out.reserve(m);
  if (cls.size() >= m) {
    std::vector<size_t> pool = cls;
    fisher_yates(pool, rng);
    out.assign(pool.begin(), pool.begin() + static_cast<ptrdiff_t>(m));
    return out;
  }
  while (out.size() + cls.size() <= m) out.insert(out.end(), cls.begin(), cls.end());
  std::vector<size_t> pool = cls;
  fisher_yates(pool, rng);
  out.insert(out.end(), pool.begin(), pool.begin() + static_cast<ptrdiff_t>(m - out.size()));
  return out;
}

}  // namespace

void split_by_episode(const Dataset& ds, double val_fraction, uint64_t seed,
                      std::vector<size_t>& train_out, std::vector<size_t>& val_out) {
  train_out.clear();
  val_out.clear();
  std::set<uint32_t> ids;
  for (const ObservationFrame& f : ds.frames) ids.insert(f.episode);
  std::vector<size_t> order(ids.size());
  std::vector<uint32_t> episodes(ids.begin(), ids.end());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng = Rng::derive(seed, {kStreamTrain, 0});
  fisher_yates(order, rng);
  const size_t val_n =
      static_cast<size_t>(std::llround(val_fraction * static_cast<double>(episodes.size())));
  std::set<uint32_t> val_ids;
  for (size_t i = order.size() - val_n; i < order.size(); ++i)
    val_ids.insert(episodes[order[i]]);
  for (size_t i = 0; i < ds.frames.size(); ++i)
    (val_ids.count(ds.frames[i].episode) ? val_out : train_out).push_back(i);
}

std::vector<size_t> rebalance_frames(const Dataset& ds, const std::vector<size_t>& idx,
                                     uint64_t seed) {
  std::vector<size_t> anom, norm;
  for (size_t i : idx) (frame_anomalous(ds.frames[i]) ? anom : norm).push_back(i);
  if (anom.empty() || norm.empty())
    throw InputError("rebalancing needs both outcome classes in the training pool");
  const size_t m = static_cast<size_t>(std::llround(
      std::sqrt(static_cast<double>(anom.size()) * static_cast<double>(norm.size()))));
  Rng rng = Rng::derive(seed, {kStreamTrain, 1});
  std::vector<size_t> out = resample_class(anom, m, rng);
  const std::vector<size_t> n = resample_class(norm, m, rng);
  out.insert(out.end(), n.begin(), n.end());
  return out;
}

Batch<float> make_batch(const ModelT<float>& m, const Dataset& ds,
                        const std::vector<size_t>& order, size_t begin, size_t end) {
  const int bn = static_cast<int>(end - begin);
  Batch<float> batch;
  batch.path = TensorT<float>({bn, 1, m.path_rows, m.path_cols});
  if (m.cfg.has_camera())
    batch.image = TensorT<float>({bn, 1, m.cfg.image_h, m.cfg.image_w});
  if (m.cfg.has_lidar()) batch.lidar = TensorT<float>({bn, m.cfg.lidar_beams});
  batch.labels.resize(static_cast<size_t>(bn) * m.cfg.horizon);

  const size_t path_sz = static_cast<size_t>(m.path_rows) * m.path_cols;
  const size_t img_sz = static_cast<size_t>(m.cfg.image_h) * m.cfg.image_w;
  for (int i = 0; i < bn; ++i) {
    const ObservationFrame& f = ds.frames[order[begin + i]];
    encode_path(m, f.path, batch.path.ptr() + static_cast<size_t>(i) * path_sz);
    if (m.cfg.has_camera())
      encode_image(m, f.image, batch.image.ptr() + static_cast<size_t>(i) * img_sz);
    if (m.cfg.has_lidar())
      encode_lidar(m, f.lidar,
                   batch.lidar.ptr() + static_cast<size_t>(i) * m.cfg.lidar_beams);
    std::copy(f.labels.begin(), f.labels.end(),
              batch.labels.begin() + static_cast<size_t>(i) * m.cfg.horizon);
  }
  return batch;
}

double mean_inference_bce(ModelT<float>& m, const Dataset& ds,
                          const std::vector<size_t>& idx) {
  if (idx.empty()) throw InputError("no frames to evaluate");
  const bool was_training = m.training;
  m.training = false;
  double acc = 0.0;
  for (size_t i : idx) {
    const ObservationFrame& f = ds.frames[i];
    const std::vector<float> probs = predict(m, f);
    acc += bce_profile(probs.data(), f.labels.data(), m.cfg.horizon);
  }
  m.training = was_training;
  return acc / static_cast<double>(idx.size());
}

ValScores validation_scores(ModelT<float>& m, const Dataset& ds,
                            const std::vector<size_t>& idx) {
  if (idx.empty()) throw InputError("no frames to evaluate");
  const bool was_training = m.training;
  m.training = false;
  ValScores out;
  std::vector<float> preds;
  std::vector<uint8_t> labels;
  preds.reserve(idx.size() * m.cfg.horizon);
  labels.reserve(idx.size() * m.cfg.horizon);
  double acc = 0.0;
  for (size_t i : idx) {
    const ObservationFrame& f = ds.frames[i];
    const std::vector<float> probs = predict(m, f);
    acc += bce_profile(probs.data(), f.labels.data(), m.cfg.horizon);
    preds.insert(preds.end(), probs.begin(), probs.end());
    labels.insert(labels.end(), f.labels.begin(), f.labels.end());
  }
  m.training = was_training;
  out.bce = acc / static_cast<double>(idx.size());
  bool any_pos = false, any_neg = false;
  for (uint8_t y : labels) (y ? any_pos : any_neg) = true;
  if (any_pos && any_neg) out.pr_auc = pr_auc(preds, labels).auc;
  return out;
}

TrainResult train_model(ModelT<float>& m, const Dataset& ds, const TrainConfig& tc,
                        uint64_t seed,
                        const std::function<void(const EpochLog&)>& on_epoch) {
  if (!m.training) throw StateError("training needs a model in training mode");
  tc.validate();
  if (ds.horizon != m.cfg.horizon)
    throw ConfigError("dataset horizon " + std::to_string(ds.horizon) +
                      " does not match the model horizon " + std::to_string(m.cfg.horizon));

  TrainResult res;
  std::vector<size_t> train_idx;
  split_by_episode(ds, tc.val_fraction, seed, train_idx, res.val_indices);
  if (train_idx.empty()) throw InputError("no training frames after the episode split");
  res.train_indices = tc.rebalance ? rebalance_frames(ds, train_idx, seed) : train_idx;

  const int64_t n = static_cast<int64_t>(res.train_indices.size());
  LossScale scale;
  scale.alpha = tc.alpha_per_frame * static_cast<double>(n);
  scale.sigma_hyper = tc.sigma_hyper;
  scale.dataset_size = n;
  AdamConfig adam;
  adam.lr = tc.lr;
  adam.beta1 = tc.beta1;
  adam.beta2 = tc.beta2;
  adam.eps = tc.eps;

  // best-validation weights, restored after the last epoch; ranking quality
  // decides when the pool has both classes, otherwise plain bce
  std::vector<std::vector<float>> best_params;
  double best_val = std::numeric_limits<double>::infinity();
  double best_auc = -std::numeric_limits<double>::infinity();
  const bool track_best = tc.keep_best && !res.val_indices.empty();

  const int latent = m.cfg.latent_dim;
  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    std::vector<size_t> order = res.train_indices;
    Rng order_rng = Rng::derive(seed, {kStreamTrain, 1000 + static_cast<uint64_t>(epoch)});
    fisher_yates(order, order_rng);
    Rng noise_rng = Rng::derive(seed, {kStreamNoise, static_cast<uint64_t>(epoch)});

    EpochLog log;
    log.epoch = epoch;
    double bce_sum = 0.0, recon_sum = 0.0, kl_sum = 0.0;
    for (size_t b0 = 0; b0 < order.size(); b0 += static_cast<size_t>(tc.batch_size)) {
      const size_t b1 = std::min(order.size(), b0 + static_cast<size_t>(tc.batch_size));
      const int bn = static_cast<int>(b1 - b0);
      const Batch<float> batch = make_batch(m, ds, order, b0, b1);

      TensorT<float> noise;
      const TensorT<float>* noise_ptr = nullptr;
      if (m.cfg.has_decoder()) {
        noise = TensorT<float>({bn, latent});
        for (float& v : noise.data) v = static_cast<float>(noise_rng.normal());
        noise_ptr = &noise;
      }

      m.params.zero_grads();
      const LossBreakdown lb = total_loss(m, batch, scale, noise_ptr, true);
      m.params.mark_grads();
      adam_step(m.params, adam);

      // de-scale each batch estimate back to its own sum, so the epoch
      // figures are true per-pass totals
      const double frac = static_cast<double>(bn) / static_cast<double>(n);
      bce_sum += lb.bce * frac;
      recon_sum += lb.recon_nll * frac;
      kl_sum += lb.kl * frac;
      ++log.batches;
    }
    log.loss.alpha = scale.alpha;
    log.loss.bce = bce_sum;
    log.loss.recon_nll = recon_sum;
    log.loss.kl = kl_sum;
    log.loss.total = scale.alpha * bce_sum + recon_sum + kl_sum;
    log.mean_bce = bce_sum / static_cast<double>(n);
    if (!res.val_indices.empty()) {
      const ValScores vs = validation_scores(m, ds, res.val_indices);
      log.val_bce = vs.bce;
      log.val_pr_auc = vs.pr_auc;
    }
    const bool improved = log.val_pr_auc >= 0.0 ? log.val_pr_auc > best_auc
                                                : log.val_bce < best_val;
    if (track_best && improved) {
      best_val = log.val_bce;
      best_auc = log.val_pr_auc;
      res.best_epoch = epoch;
      best_params.clear();
      for (const auto& [name, p] : m.params.items) best_params.push_back(p.value.data);
    }
    res.epochs.push_back(log);
    if (on_epoch) on_epoch(log);
    if (tc.early_stop_bce > 0.0 && log.mean_bce < tc.early_stop_bce) {
      res.early_stopped = true;
      break;
    }
  }
  if (res.best_epoch >= 0 &&
      res.best_epoch != static_cast<int>(res.epochs.size()) - 1) {
    size_t k = 0;
    for (auto& [name, p] : m.params.items) p.value.data = best_params[k++];
  }
  return res;
}

}  // namespace paad
