#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "paad/fieldsim.hpp"
#include "paad/geometry.hpp"
#include "paad/layers.hpp"
#include "paad/rng.hpp"
#include "paad/tensor.hpp"

namespace paad {

// Failure-probability predictor: three feature branches (planned path, camera,
// variational LiDAR), attention fusion over the two sensor tokens, and a
// sigmoid head giving one failure probability per future step. The LiDAR
// decoder exists only as a training aid; inference never samples.

enum class FusionMode { kBoth, kCameraOnly, kLidarOnly };
enum class AttentionKind { kMha, kMlp };
enum class PathView { kFront, kBev };

inline const char* to_string(FusionMode m) {
  switch (m) {
    case FusionMode::kBoth: return "both";
    case FusionMode::kCameraOnly: return "camera_only";
    default: return "lidar_only";
  }
}
inline const char* to_string(AttentionKind a) {
  return a == AttentionKind::kMha ? "mha" : "mlp";
}
inline const char* to_string(PathView v) { return v == PathView::kFront ? "front" : "bev"; }

inline FusionMode fusion_from_string(const std::string& s) {
  if (s == "both") return FusionMode::kBoth;
  if (s == "camera_only") return FusionMode::kCameraOnly;
  if (s == "lidar_only") return FusionMode::kLidarOnly;
  throw ConfigError("unknown fusion mode: " + s);
}
inline AttentionKind attention_from_string(const std::string& s) {
  if (s == "mha") return AttentionKind::kMha;
  if (s == "mlp") return AttentionKind::kMlp;
  throw ConfigError("unknown attention kind: " + s);
}
inline PathView path_view_from_string(const std::string& s) {
  if (s == "front") return PathView::kFront;
  if (s == "bev") return PathView::kBev;
  throw ConfigError("unknown path view: " + s);
}

struct PaadConfig {
  int horizon = 10;     // prediction steps
  int latent_dim = 32;  // LiDAR latent width
  int token_dim = 64;   // per-sensor token entering fusion
  int heads = 8;
  int head_hidden = 128;  // first layer of the prediction head
  int image_hidden = 64;
  int lidar_hidden = 128;
  int conv_channels[3] = {8, 16, 32};
  int image_h = 60;
  int image_w = 80;
  int lidar_beams = kLidarBeams;
  double lidar_range = 10.0;  // ranges clipped here, then divided by it
  FusionMode fusion = FusionMode::kBoth;
  AttentionKind attention = AttentionKind::kMha;
  bool reconstruction = true;
  PathView path_view = PathView::kFront;

  bool has_camera() const { return fusion != FusionMode::kLidarOnly; }
  bool has_lidar() const { return fusion != FusionMode::kCameraOnly; }
  bool has_decoder() const { return has_lidar() && reconstruction; }

  void validate() const {
    if (horizon < 1) throw ConfigError("prediction horizon must be at least 1");
    if (latent_dim < 1 || token_dim < 1 || head_hidden < 1 || image_hidden < 1 ||
        lidar_hidden < 1)
      throw ConfigError("feature widths must be positive");
    if (heads < 1 || token_dim % heads != 0)
      throw ConfigError("token dim " + std::to_string(token_dim) +
                        " not divisible by head count " + std::to_string(heads));
    for (int c : conv_channels)
      if (c < 1) throw ConfigError("conv channel counts must be positive");
    if (image_h < 1 || image_w < 1) throw ConfigError("camera resolution must be positive");
    if (lidar_beams < 1) throw ConfigError("scan length must be positive");
    if (!(lidar_range > 0)) throw ConfigError("range normalization must be positive");
    if (has_lidar() && token_dim != 2 * latent_dim)
      throw ConfigError("token dim must be twice the latent dim (token is [mu, sigma]): " +
                        std::to_string(token_dim) + " vs 2x" + std::to_string(latent_dim));
  }
};

// spatial extent after the three stride-2 conv blocks; the first two pool
inline std::pair<int, int> conv_stack_dims(int h, int w, const char* what) {
  for (int blk = 0; blk < 3; ++blk) {
    h = conv_out_dim(h);
    w = conv_out_dim(w);
    if (blk < 2) {
      h /= 2;
      w /= 2;
    }
    if (h < 1 || w < 1)
      throw ConfigError(std::string(what) + " resolution too small for the conv stack");
  }
  return {h, w};
}

template <class S>
struct ModelT {
  PaadConfig cfg;
  CameraModel camera;
  BevConfig bev;
  ParamStoreT<S> params;
  bool training = true;

  // derived
  int path_rows = 0, path_cols = 0;
  int path_feat = 0;
  int cam_feat = 0;
  int obs_dim = 0;  // fused observation width, always 2 * token_dim
};

using Model = ModelT<float>;

template <class S>
ModelT<S> build_model(const PaadConfig& cfg, const CameraModel& camera, const BevConfig& bev,
                      uint64_t seed) {
  cfg.validate();
  camera.validate();
  if (bev.grid_h < 1 || bev.grid_w < 1 || !(bev.px_per_m > 0))
    throw ConfigError("top-down grid needs positive extent and scale");
  const bool uses_camera_frame = cfg.has_camera() || cfg.path_view == PathView::kFront;
  if (uses_camera_frame && (camera.image_h != cfg.image_h || camera.image_w != cfg.image_w))
    throw ConfigError("camera frame " + std::to_string(camera.image_h) + "x" +
                      std::to_string(camera.image_w) + " does not match the configured input " +
                      std::to_string(cfg.image_h) + "x" + std::to_string(cfg.image_w));

  ModelT<S> m;
  m.cfg = cfg;
  m.camera = camera;
  m.bev = bev;

  if (cfg.path_view == PathView::kFront) {
    const int h0 = camera.horizon_row();
    if (h0 >= camera.image_h) throw ConfigError("camera horizon leaves no ground region");
    m.path_rows = camera.image_h - h0;
    m.path_cols = camera.image_w;
  } else {
    m.path_rows = bev.grid_h;
    m.path_cols = bev.grid_w;
  }

  {
    const auto [ph, pw] = conv_stack_dims(m.path_rows, m.path_cols, "path view");
    m.path_feat = cfg.conv_channels[2] * ph * pw;
  }
  if (cfg.has_camera()) {
    const auto [ch, cw] = conv_stack_dims(cfg.image_h, cfg.image_w, "camera");
    m.cam_feat = cfg.conv_channels[2] * ch * cw;
  }
  m.obs_dim = 2 * cfg.token_dim;

  auto& ps = m.params;
  auto add_conv = [&](const std::string& name, int oc, int ic) {
    auto& w = ps.add(name + ".w", {oc, ic, 3, 3});
    init_uniform_fanin(w.value, ic * 9, seed, name + ".w");
    ps.add(name + ".b", {oc});
  };
  auto add_linear = [&](const std::string& name, int in, int out) {
    auto& w = ps.add(name + ".w", {in, out});
    init_uniform_fanin(w.value, in, seed, name + ".w");
    ps.add(name + ".b", {out});
  };

  add_conv("path_cnn.conv1", cfg.conv_channels[0], 1);
  add_conv("path_cnn.conv2", cfg.conv_channels[1], cfg.conv_channels[0]);
  add_conv("path_cnn.conv3", cfg.conv_channels[2], cfg.conv_channels[1]);
  if (cfg.has_camera()) {
    add_conv("cam_cnn.conv1", cfg.conv_channels[0], 1);
    add_conv("cam_cnn.conv2", cfg.conv_channels[1], cfg.conv_channels[0]);
    add_conv("cam_cnn.conv3", cfg.conv_channels[2], cfg.conv_channels[1]);
    add_linear("cam_fc.l1", m.cam_feat, cfg.image_hidden);
    add_linear("cam_fc.l2", cfg.image_hidden, cfg.token_dim);
  }
  if (cfg.has_lidar()) {
    add_linear("lidar_enc.l1", cfg.lidar_beams, cfg.lidar_hidden);
    add_linear("lidar_enc.mu", cfg.lidar_hidden, cfg.latent_dim);
    add_linear("lidar_enc.logvar", cfg.lidar_hidden, cfg.latent_dim);
    if (cfg.has_decoder()) {
      add_linear("lidar_dec.l1", cfg.latent_dim, cfg.lidar_hidden);
      add_linear("lidar_dec.out", cfg.lidar_hidden, cfg.lidar_beams);
    }
  }
  if (cfg.attention == AttentionKind::kMha) {
    add_linear("fuse.mha.q", cfg.token_dim, cfg.token_dim);
    add_linear("fuse.mha.k", cfg.token_dim, cfg.token_dim);
    add_linear("fuse.mha.v", cfg.token_dim, cfg.token_dim);
    add_linear("fuse.mha.o", cfg.token_dim, cfg.token_dim);
  } else {
    add_linear("fuse.mlp.l1", m.obs_dim, m.obs_dim);
    add_linear("fuse.mlp.l2", m.obs_dim, m.obs_dim);
  }
  add_linear("head.l1", m.obs_dim + m.path_feat, cfg.head_hidden);
  add_linear("head.l2", cfg.head_hidden, cfg.horizon);
  return m;
}

template <class S>
struct ForwardCache {
  ConvBlockCache<S> path_blk[3];
  TensorT<S> path_flat;
  ConvBlockCache<S> cam_blk[3];
  TensorT<S> cam_flat, cam_h1, cam_tok;
  TensorT<S> lidar_in, lid_h1, mu, logvar, sigma;
  TensorT<S> noise, z, dec_h1;
  TensorT<S> seq;  // [B, 2, D]
  MhaCache<S> mha;
  TensorT<S> mlp_h1;
  TensorT<S> fobs;
  TensorT<S> head_in, head_h1, probs;
};

template <class S>
struct ForwardOut {
  TensorT<S> probs;      // [B, T], strictly inside (0,1)
  TensorT<S> mu, sigma;  // [B, d]; empty without the LiDAR branch
  TensorT<S> recon;      // [B, L]; empty outside training or without the decoder
};

namespace detail {

template <class S>
TensorT<S> conv_stack(const TensorT<S>& in, const ParamStoreT<S>& ps, const std::string& stem,
                      ConvBlockCache<S>* blocks) {
  TensorT<S> x = in;
  for (int blk = 0; blk < 3; ++blk) {
    const std::string name = stem + ".conv" + std::to_string(blk + 1);
    x = conv_block_forward(x, ps.at(name + ".w").value, ps.at(name + ".b").value, true,
                           blk < 2, blocks ? &blocks[blk] : nullptr);
  }
  x.shape = {x.dim(0), static_cast<int>(x.numel() / x.dim(0))};
  return x;
}

}  // namespace detail

// One batched pass. `noise` is the frozen reparameterization draw [B, d]; it
// is required in training whenever the decoder is active and rejected
// otherwise (inference is sampling-free).
template <class S>
ForwardOut<S> forward(const ModelT<S>& m, const TensorT<S>& path, const TensorT<S>& image,
                      const TensorT<S>& lidar, std::type_identity_t<const TensorT<S>*> noise,
                      std::type_identity_t<ForwardCache<S>*> cache) {
  const PaadConfig& cfg = m.cfg;
  const int bn = path.ndim() > 0 ? path.dim(0) : 0;
  require_shape(path, {bn, 1, m.path_rows, m.path_cols}, "path view input");
  if (cfg.has_camera()) require_shape(image, {bn, 1, cfg.image_h, cfg.image_w}, "camera input");
  if (cfg.has_lidar()) require_shape(lidar, {bn, cfg.lidar_beams}, "scan input");
  const bool wants_noise = m.training && cfg.has_decoder();
  if (wants_noise && !noise) throw StateError("training forward needs a frozen noise draw");
  if (!wants_noise && noise)
    throw StateError("noise injection only applies to training with the decoder active");

  const auto& ps = m.params;
  ForwardOut<S> out;

  TensorT<S> path_flat = detail::conv_stack(path, ps, "path_cnn", cache ? cache->path_blk : nullptr);

  TensorT<S> cam_tok;
  if (cfg.has_camera()) {
    TensorT<S> cam_flat =
        detail::conv_stack(image, ps, "cam_cnn", cache ? cache->cam_blk : nullptr);
    TensorT<S> h1 = relu_forward(
        linear_forward(cam_flat, ps.at("cam_fc.l1.w").value, ps.at("cam_fc.l1.b").value));
    cam_tok = linear_forward(h1, ps.at("cam_fc.l2.w").value, ps.at("cam_fc.l2.b").value);
    if (cache) {
      cache->cam_flat = std::move(cam_flat);
      cache->cam_h1 = std::move(h1);
      cache->cam_tok = cam_tok;
    }
  }

  TensorT<S> lid_tok;
  if (cfg.has_lidar()) {
    TensorT<S> h1 = relu_forward(
        linear_forward(lidar, ps.at("lidar_enc.l1.w").value, ps.at("lidar_enc.l1.b").value));
    TensorT<S> mu =
        linear_forward(h1, ps.at("lidar_enc.mu.w").value, ps.at("lidar_enc.mu.b").value);
    TensorT<S> logvar = linear_forward(h1, ps.at("lidar_enc.logvar.w").value,
                                       ps.at("lidar_enc.logvar.b").value);
    TensorT<S> sigma = logvar;
    for (S& v : sigma.data) v = std::exp(S(0.5) * v);
    require_finite(sigma, "scan posterior sigma");

    lid_tok = TensorT<S>({bn, cfg.token_dim});
    for (int b = 0; b < bn; ++b) {
      S* row = lid_tok.ptr() + static_cast<int64_t>(b) * cfg.token_dim;
      const S* mrow = mu.ptr() + static_cast<int64_t>(b) * cfg.latent_dim;
      const S* srow = sigma.ptr() + static_cast<int64_t>(b) * cfg.latent_dim;
      for (int i = 0; i < cfg.latent_dim; ++i) {
        row[i] = mrow[i];
        row[cfg.latent_dim + i] = srow[i];
      }
    }

    if (wants_noise) {
      require_shape(*noise, {bn, cfg.latent_dim}, "reparameterization noise");
      TensorT<S> z = reparameterize(mu, sigma, *noise);
      TensorT<S> dh1 = relu_forward(
          linear_forward(z, ps.at("lidar_dec.l1.w").value, ps.at("lidar_dec.l1.b").value));
      out.recon =
          linear_forward(dh1, ps.at("lidar_dec.out.w").value, ps.at("lidar_dec.out.b").value);
      if (cache) {
        cache->noise = *noise;
        cache->z = std::move(z);
        cache->dec_h1 = std::move(dh1);
      }
    }
    if (cache) {
      cache->lidar_in = lidar;
      cache->lid_h1 = std::move(h1);
      cache->mu = mu;
      cache->logvar = std::move(logvar);
      cache->sigma = sigma;
    }
    out.mu = std::move(mu);
    out.sigma = std::move(sigma);
  }

  // two-token sequence; a lone sensor fills both slots so head shapes are
  // fixed across ablations
  const int d = cfg.token_dim;
  TensorT<S> seq({bn, 2, d});
  const TensorT<S>& tok0 = cfg.has_camera() ? cam_tok : lid_tok;
  const TensorT<S>& tok1 = cfg.has_lidar() ? lid_tok : cam_tok;
  for (int b = 0; b < bn; ++b) {
    const S* r0 = tok0.ptr() + static_cast<int64_t>(b) * d;
    const S* r1 = tok1.ptr() + static_cast<int64_t>(b) * d;
    S* dst = seq.ptr() + static_cast<int64_t>(b) * 2 * d;
    for (int i = 0; i < d; ++i) dst[i] = r0[i];
    for (int i = 0; i < d; ++i) dst[d + i] = r1[i];
  }

  TensorT<S> fobs;
  if (cfg.attention == AttentionKind::kMha) {
    TensorT<S> att = mha_forward(seq, cfg.heads, ps.at("fuse.mha.q.w").value,
                                 ps.at("fuse.mha.q.b").value, ps.at("fuse.mha.k.w").value,
                                 ps.at("fuse.mha.k.b").value, ps.at("fuse.mha.v.w").value,
                                 ps.at("fuse.mha.v.b").value, ps.at("fuse.mha.o.w").value,
                                 ps.at("fuse.mha.o.b").value, cache ? &cache->mha : nullptr);
    fobs = TensorT<S>({bn, m.obs_dim});
    for (int64_t i = 0; i < fobs.numel(); ++i)
      fobs.data[static_cast<size_t>(i)] =
          seq.data[static_cast<size_t>(i)] + att.data[static_cast<size_t>(i)];
  } else {
    TensorT<S> flat = seq;
    flat.shape = {bn, m.obs_dim};
    TensorT<S> h1 = relu_forward(
        linear_forward(flat, ps.at("fuse.mlp.l1.w").value, ps.at("fuse.mlp.l1.b").value));
    fobs = linear_forward(h1, ps.at("fuse.mlp.l2.w").value, ps.at("fuse.mlp.l2.b").value);
    if (cache) cache->mlp_h1 = std::move(h1);
  }

  TensorT<S> head_in({bn, m.obs_dim + m.path_feat});
  for (int b = 0; b < bn; ++b) {
    S* dst = head_in.ptr() + static_cast<int64_t>(b) * (m.obs_dim + m.path_feat);
    const S* fo = fobs.ptr() + static_cast<int64_t>(b) * m.obs_dim;
    const S* pf = path_flat.ptr() + static_cast<int64_t>(b) * m.path_feat;
    for (int i = 0; i < m.obs_dim; ++i) dst[i] = fo[i];
    for (int i = 0; i < m.path_feat; ++i) dst[m.obs_dim + i] = pf[i];
  }
  TensorT<S> head_h1 = relu_forward(
      linear_forward(head_in, ps.at("head.l1.w").value, ps.at("head.l1.b").value));
  TensorT<S> logits =
      linear_forward(head_h1, ps.at("head.l2.w").value, ps.at("head.l2.b").value);
  out.probs = sigmoid_forward(logits);

  if (cache) {
    cache->path_flat = std::move(path_flat);
    cache->seq = std::move(seq);
    cache->fobs = std::move(fobs);
    cache->head_in = std::move(head_in);
    cache->head_h1 = std::move(head_h1);
    cache->probs = out.probs;
  }
  return out;
}

namespace detail {

template <class S>
void conv_stack_backward(ParamStoreT<S>& ps, int last_channels, const ConvBlockCache<S>* blocks,
                         const std::string& stem, const TensorT<S>& gflat) {
  // recover the spatial shape of the last block's output
  TensorT<S> g = gflat;
  const TensorT<S>& last_in = blocks[2].input;
  const int oh = conv_out_dim(last_in.dim(2)), ow = conv_out_dim(last_in.dim(3));
  g.shape = {gflat.dim(0), last_channels, oh, ow};
  for (int blk = 2; blk >= 0; --blk) {
    const std::string name = stem + ".conv" + std::to_string(blk + 1);
    const TensorT<S>& w = ps.at(name + ".w").value;
    TensorT<S> gin(blocks[blk].input.shape);
    conv_block_backward(blocks[blk], w, g, blk > 0 ? &gin : nullptr,
                        ps.at(name + ".w").grad, ps.at(name + ".b").grad);
    if (blk > 0) g = std::move(gin);
  }
}

}  // namespace detail

// Accumulates parameter gradients for one batch. d_probs is required; the
// other signals are optional direct gradients on the decoder mean and the
// posterior moments (the objective's reconstruction and divergence terms).
template <class S>
void model_backward(ModelT<S>& m, const ForwardCache<S>& cache, const TensorT<S>& d_probs,
                    const TensorT<S>* d_recon, const TensorT<S>* d_mu,
                    const TensorT<S>* d_sigma) {
  if (!m.training) throw StateError("backward pass outside training mode");
  const PaadConfig& cfg = m.cfg;
  auto& ps = m.params;
  const int bn = cache.probs.dim(0);
  const int d = cfg.token_dim;
  require_shape(d_probs, {bn, cfg.horizon}, "profile gradient");

  // head
  TensorT<S> glogits({bn, cfg.horizon});
  sigmoid_backward(cache.probs, d_probs, glogits);
  TensorT<S> gh1({bn, cfg.head_hidden});
  linear_backward(cache.head_h1, ps.at("head.l2.w").value, glogits, &gh1,
                  &ps.at("head.l2.w").grad, &ps.at("head.l2.b").grad);
  TensorT<S> gh1pre({bn, cfg.head_hidden});
  relu_backward(cache.head_h1, gh1, gh1pre);
  TensorT<S> ghead_in({bn, m.obs_dim + m.path_feat});
  linear_backward(cache.head_in, ps.at("head.l1.w").value, gh1pre, &ghead_in,
                  &ps.at("head.l1.w").grad, &ps.at("head.l1.b").grad);

  TensorT<S> gfobs({bn, m.obs_dim});
  TensorT<S> gpath_flat({bn, m.path_feat});
  for (int b = 0; b < bn; ++b) {
    const S* src = ghead_in.ptr() + static_cast<int64_t>(b) * (m.obs_dim + m.path_feat);
    S* fo = gfobs.ptr() + static_cast<int64_t>(b) * m.obs_dim;
    S* pf = gpath_flat.ptr() + static_cast<int64_t>(b) * m.path_feat;
    for (int i = 0; i < m.obs_dim; ++i) fo[i] = src[i];
    for (int i = 0; i < m.path_feat; ++i) pf[i] = src[m.obs_dim + i];
  }

  detail::conv_stack_backward(ps, cfg.conv_channels[2], cache.path_blk, "path_cnn", gpath_flat);

  // fusion
  TensorT<S> gseq({bn, 2, d});
  if (cfg.attention == AttentionKind::kMha) {
    TensorT<S> gatt = gfobs;
    gatt.shape = {bn, 2, d};
    for (int64_t i = 0; i < gseq.numel(); ++i)
      gseq.data[static_cast<size_t>(i)] = gatt.data[static_cast<size_t>(i)];  // residual
    MhaGrads<S> grads{&ps.at("fuse.mha.q.w").grad, &ps.at("fuse.mha.q.b").grad,
                      &ps.at("fuse.mha.k.w").grad, &ps.at("fuse.mha.k.b").grad,
                      &ps.at("fuse.mha.v.w").grad, &ps.at("fuse.mha.v.b").grad,
                      &ps.at("fuse.mha.o.w").grad, &ps.at("fuse.mha.o.b").grad};
    mha_backward(cache.mha, cfg.heads, ps.at("fuse.mha.q.w").value,
                 ps.at("fuse.mha.k.w").value, ps.at("fuse.mha.v.w").value,
                 ps.at("fuse.mha.o.w").value, gatt, gseq, grads);
  } else {
    TensorT<S> gmh1({bn, m.obs_dim});
    linear_backward(cache.mlp_h1, ps.at("fuse.mlp.l2.w").value, gfobs, &gmh1,
                    &ps.at("fuse.mlp.l2.w").grad, &ps.at("fuse.mlp.l2.b").grad);
    TensorT<S> gmh1pre({bn, m.obs_dim});
    relu_backward(cache.mlp_h1, gmh1, gmh1pre);
    TensorT<S> flat = cache.seq;
    flat.shape = {bn, m.obs_dim};
    TensorT<S> gflat({bn, m.obs_dim});
    linear_backward(flat, ps.at("fuse.mlp.l1.w").value, gmh1pre, &gflat,
                    &ps.at("fuse.mlp.l1.w").grad, &ps.at("fuse.mlp.l1.b").grad);
    gseq = std::move(gflat);
    gseq.shape = {bn, 2, d};
  }

  // split the sequence gradient back onto the source tokens
  TensorT<S> gcam_tok, glid_tok;
  if (cfg.has_camera()) gcam_tok = TensorT<S>({bn, d});
  if (cfg.has_lidar()) glid_tok = TensorT<S>({bn, d});
  for (int b = 0; b < bn; ++b) {
    const S* g0 = gseq.ptr() + static_cast<int64_t>(b) * 2 * d;
    const S* g1 = g0 + d;
    if (cfg.has_camera()) {
      S* gc = gcam_tok.ptr() + static_cast<int64_t>(b) * d;
      for (int i = 0; i < d; ++i) gc[i] += g0[i];
      if (!cfg.has_lidar())
        for (int i = 0; i < d; ++i) gc[i] += g1[i];
    }
    if (cfg.has_lidar()) {
      S* gl = glid_tok.ptr() + static_cast<int64_t>(b) * d;
      for (int i = 0; i < d; ++i) gl[i] += g1[i];
      if (!cfg.has_camera())
        for (int i = 0; i < d; ++i) gl[i] += g0[i];
    }
  }

  if (cfg.has_camera()) {
    TensorT<S> gch1({bn, cfg.image_hidden});
    linear_backward(cache.cam_h1, ps.at("cam_fc.l2.w").value, gcam_tok, &gch1,
                    &ps.at("cam_fc.l2.w").grad, &ps.at("cam_fc.l2.b").grad);
    TensorT<S> gch1pre({bn, cfg.image_hidden});
    relu_backward(cache.cam_h1, gch1, gch1pre);
    TensorT<S> gcam_flat({bn, m.cam_feat});
    linear_backward(cache.cam_flat, ps.at("cam_fc.l1.w").value, gch1pre, &gcam_flat,
                    &ps.at("cam_fc.l1.w").grad, &ps.at("cam_fc.l1.b").grad);
    detail::conv_stack_backward(ps, cfg.conv_channels[2], cache.cam_blk, "cam_cnn", gcam_flat);
  }

  if (cfg.has_lidar()) {
    const int ld = cfg.latent_dim;
    TensorT<S> gmu({bn, ld}), gsigma({bn, ld});
    for (int b = 0; b < bn; ++b) {
      const S* gl = glid_tok.ptr() + static_cast<int64_t>(b) * d;
      S* gm = gmu.ptr() + static_cast<int64_t>(b) * ld;
      S* gs = gsigma.ptr() + static_cast<int64_t>(b) * ld;
      for (int i = 0; i < ld; ++i) {
        gm[i] += gl[i];
        gs[i] += gl[ld + i];
      }
    }
    if (d_mu) {
      require_shape(*d_mu, {bn, ld}, "posterior mean gradient");
      for (int64_t i = 0; i < gmu.numel(); ++i)
        gmu.data[static_cast<size_t>(i)] += d_mu->data[static_cast<size_t>(i)];
    }
    if (d_sigma) {
      require_shape(*d_sigma, {bn, ld}, "posterior sigma gradient");
      for (int64_t i = 0; i < gsigma.numel(); ++i)
        gsigma.data[static_cast<size_t>(i)] += d_sigma->data[static_cast<size_t>(i)];
    }
    if (d_recon) {
      if (!cfg.has_decoder()) throw StateError("reconstruction gradient without a decoder");
      require_shape(*d_recon, {bn, cfg.lidar_beams}, "reconstruction gradient");
      TensorT<S> gdh1({bn, cfg.lidar_hidden});
      linear_backward(cache.dec_h1, ps.at("lidar_dec.out.w").value, *d_recon, &gdh1,
                      &ps.at("lidar_dec.out.w").grad, &ps.at("lidar_dec.out.b").grad);
      TensorT<S> gdh1pre({bn, cfg.lidar_hidden});
      relu_backward(cache.dec_h1, gdh1, gdh1pre);
      TensorT<S> gz({bn, ld});
      linear_backward(cache.z, ps.at("lidar_dec.l1.w").value, gdh1pre, &gz,
                      &ps.at("lidar_dec.l1.w").grad, &ps.at("lidar_dec.l1.b").grad);
      reparameterize_backward(cache.noise, gz, gmu, gsigma);
    }

    // sigma = exp(0.5 * logvar)
    TensorT<S> glogvar({bn, ld});
    for (int64_t i = 0; i < glogvar.numel(); ++i)
      glogvar.data[static_cast<size_t>(i)] = S(0.5) * cache.sigma.data[static_cast<size_t>(i)] *
                                             gsigma.data[static_cast<size_t>(i)];

    TensorT<S> glh1({bn, cfg.lidar_hidden});
    linear_backward(cache.lid_h1, ps.at("lidar_enc.mu.w").value, gmu, &glh1,
                    &ps.at("lidar_enc.mu.w").grad, &ps.at("lidar_enc.mu.b").grad);
    linear_backward(cache.lid_h1, ps.at("lidar_enc.logvar.w").value, glogvar, &glh1,
                    &ps.at("lidar_enc.logvar.w").grad, &ps.at("lidar_enc.logvar.b").grad);
    TensorT<S> glh1pre({bn, cfg.lidar_hidden});
    relu_backward(cache.lid_h1, glh1, glh1pre);
    linear_backward(cache.lidar_in, ps.at("lidar_enc.l1.w").value, glh1pre,
                    (TensorT<S>*)nullptr, &ps.at("lidar_enc.l1.w").grad,
                    &ps.at("lidar_enc.l1.b").grad);
  }
}

// training aid only: decode a latent back to a scan mean
template <class S>
TensorT<S> lidar_decode(const ModelT<S>& m, const TensorT<S>& z) {
  if (!m.training) throw StateError("decoding is a training aid; inference skips it");
  if (!m.cfg.has_decoder()) throw StateError("decoder disabled by configuration");
  const auto& ps = m.params;
  TensorT<S> h1 = relu_forward(
      linear_forward(z, ps.at("lidar_dec.l1.w").value, ps.at("lidar_dec.l1.b").value));
  return linear_forward(h1, ps.at("lidar_dec.out.w").value, ps.at("lidar_dec.out.b").value);
}

// ---------------------------------------------------------------------------
// frame encoding shared by training and streaming prediction

template <class S>
void encode_path(const ModelT<S>& m, const PlannedPath& path, S* dst) {
  PathImage img;
  if (m.cfg.path_view == PathView::kFront)
    img = crop_roi(project_path(path, m.camera), m.camera);
  else
    img = project_bev(path, m.bev);
  const int64_t n = static_cast<int64_t>(m.path_rows) * m.path_cols;
  for (int64_t i = 0; i < n; ++i) dst[i] = static_cast<S>(img.px[static_cast<size_t>(i)]);
}

template <class S>
void encode_image(const ModelT<S>& m, const Image8& img, S* dst) {
  if (img.h != m.cfg.image_h || img.w != m.cfg.image_w)
    throw DimensionError("camera frame " + std::to_string(img.h) + "x" + std::to_string(img.w) +
                         " does not match the model input");
  const int64_t n = static_cast<int64_t>(img.h) * img.w;
  for (int64_t i = 0; i < n; ++i)
    dst[i] = static_cast<S>(img.px[static_cast<size_t>(i)]) / S(255);
}

template <class S>
void encode_lidar(const ModelT<S>& m, const std::vector<float>& scan, S* dst) {
  if (static_cast<int>(scan.size()) != m.cfg.lidar_beams)
    throw DimensionError("scan length " + std::to_string(scan.size()) +
                         " does not match the model input " +
                         std::to_string(m.cfg.lidar_beams));
  const S range = static_cast<S>(m.cfg.lidar_range);
  for (size_t i = 0; i < scan.size(); ++i) {
    S v = static_cast<S>(scan[i]);
    if (v < S(0)) v = S(0);
    if (v > range) v = range;
    dst[i] = v / range;
  }
}

// Sampling-free single-frame prediction; the model must be in inference mode.
template <class S>
std::vector<S> predict(const ModelT<S>& m, const ObservationFrame& frame) {
  if (m.training) throw StateError("prediction requires inference mode");
  TensorT<S> path({1, 1, m.path_rows, m.path_cols});
  encode_path(m, frame.path, path.ptr());
  TensorT<S> image, lidar;
  if (m.cfg.has_camera()) {
    image = TensorT<S>({1, 1, m.cfg.image_h, m.cfg.image_w});
    encode_image(m, frame.image, image.ptr());
  }
  if (m.cfg.has_lidar()) {
    lidar = TensorT<S>({1, m.cfg.lidar_beams});
    encode_lidar(m, frame.lidar, lidar.ptr());
  }
  const auto out =
      forward(m, path, image, lidar, (const TensorT<S>*)nullptr, (ForwardCache<S>*)nullptr);
  return std::vector<S>(out.probs.data.begin(), out.probs.data.end());
}

}  // namespace paad
