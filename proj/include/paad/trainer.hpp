#pragma once

#include <functional>
#include <vector>

#include "paad/config.hpp"
#include "paad/dataset.hpp"
#include "paad/loss.hpp"
#include "paad/model.hpp"

namespace paad {

// Adam training over recorded frames: episode-level validation split,
// class rebalancing of the training pool only, shuffled minibatches,
// one loss breakdown logged per epoch.

struct EpochLog {
  int epoch = 0;
  LossBreakdown loss;     // dataset-sum estimates averaged over the epoch
  double mean_bce = 0.0;  // per-frame profile loss
  double val_bce = -1.0;  // per-frame, on held-out episodes; -1 when none
  double val_pr_auc = -1.0;  // -1 when no validation or single-class pool
  int batches = 0;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  std::vector<size_t> train_indices;  // post-rebalance; repeats allowed
  std::vector<size_t> val_indices;
  bool early_stopped = false;
  int best_epoch = -1;  // epoch whose weights were kept, -1 when none tracked
};

struct ValScores {
  double bce = 0.0;
  double pr_auc = -1.0;  // -1 when the pool has a single class
};

// Frames grouped by episode id; whole episodes go to one side so no
// temporal neighbors leak across the split.
void split_by_episode(const Dataset& ds, double val_fraction, uint64_t seed,
                      std::vector<size_t>& train_out, std::vector<size_t>& val_out);

// Equalizes the classes at round(sqrt(n_anomalous * n_normal)) frames
// each: the larger class is subsampled, the smaller tiled then topped up.
// InputError when either class is missing.
std::vector<size_t> rebalance_frames(const Dataset& ds, const std::vector<size_t>& idx,
                                     uint64_t seed);

// Encodes the frames order[begin:end) into one training batch.
Batch<float> make_batch(const ModelT<float>& m, const Dataset& ds,
                        const std::vector<size_t>& order, size_t begin, size_t end);

// Mean per-frame profile loss with the model run in inference mode.
double mean_inference_bce(ModelT<float>& m, const Dataset& ds,
                          const std::vector<size_t>& idx);

// One inference pass over idx: per-frame bce plus ranking quality of the
// pooled (frame, step) scores.
ValScores validation_scores(ModelT<float>& m, const Dataset& ds,
                            const std::vector<size_t>& idx);

// StateError unless the model is in training mode; ConfigError when the
// dataset horizon disagrees with the model; InputError on an empty or
// (with rebalancing) single-class training pool.
TrainResult train_model(ModelT<float>& m, const Dataset& ds, const TrainConfig& tc,
                        uint64_t seed,
                        const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace paad
