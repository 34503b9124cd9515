#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <type_traits>
#include <vector>

#include "paad/errors.hpp"
#include "paad/kernels.hpp"
#include "paad/tensor.hpp"

namespace paad {

// ---------------------------------------------------------------------------
// parameter store

template <class S>
struct ParamT {
  TensorT<S> value;
  TensorT<S> grad;
  TensorT<S> m;  // Adam first moment
  TensorT<S> v;  // Adam second moment
};

template <class S>
struct ParamStoreT {
  std::map<std::string, ParamT<S>> items;  // sorted: deterministic iteration
  int64_t step_count = 0;
  bool grads_populated = false;

  ParamT<S>& add(const std::string& name, std::vector<int> shape) {
    if (items.count(name)) throw StateError("parameter already registered: " + name);
    ParamT<S> p;
    p.value = TensorT<S>(shape);
    p.grad = TensorT<S>(shape);
    p.m = TensorT<S>(shape);
    p.v = TensorT<S>(std::move(shape));
    return items.emplace(name, std::move(p)).first->second;
  }

  ParamT<S>& at(const std::string& name) {
    auto it = items.find(name);
    if (it == items.end()) throw StateError("unknown parameter: " + name);
    return it->second;
  }
  const ParamT<S>& at(const std::string& name) const {
    auto it = items.find(name);
    if (it == items.end()) throw StateError("unknown parameter: " + name);
    return it->second;
  }

  TensorT<S>& value(const std::string& name) { return at(name).value; }
  const TensorT<S>& value(const std::string& name) const { return at(name).value; }
  TensorT<S>& grad(const std::string& name) { return at(name).grad; }

  void zero_grads() {
    for (auto& [k, p] : items) p.grad.fill(S(0));
    grads_populated = false;
  }

  void mark_grads() { grads_populated = true; }

  int64_t param_count() const {
    int64_t n = 0;
    for (const auto& [k, p] : items) n += p.value.numel();
    return n;
  }
};

using ParamStore = ParamStoreT<float>;

struct AdamConfig {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One optimizer step with bias correction. Consumes the accumulated gradients
// and clears them; stepping again without a fresh backward pass is an error.
template <class S>
void adam_step(ParamStoreT<S>& store, const AdamConfig& cfg) {
  if (!store.grads_populated)
    throw StateError("adam_step called without freshly accumulated gradients");
  store.step_count += 1;
  const double t = static_cast<double>(store.step_count);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [name, p] : store.items) {
    S* val = p.value.ptr();
    S* g = p.grad.ptr();
    S* m = p.m.ptr();
    S* v = p.v.ptr();
    const int64_t n = p.value.numel();
    for (int64_t i = 0; i < n; ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = cfg.beta1 * static_cast<double>(m[i]) + (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * static_cast<double>(v[i]) + (1.0 - cfg.beta2) * gi * gi;
      m[i] = static_cast<S>(mi);
      v[i] = static_cast<S>(vi);
      val[i] -= static_cast<S>(cfg.lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.eps));
    }
    p.grad.fill(S(0));
  }
  store.grads_populated = false;
}

// ---------------------------------------------------------------------------
// linear

template <class S>
TensorT<S> linear_forward(const TensorT<S>& in, const TensorT<S>& w, const TensorT<S>& b) {
  if (in.ndim() != 2 || w.ndim() != 2 || in.dim(1) != w.dim(0))
    throw DimensionError("linear: input " + in.shape_str() + " incompatible with weights " +
                         w.shape_str());
  if (b.ndim() != 1 || b.dim(0) != w.dim(1))
    throw DimensionError("linear: bias " + b.shape_str() + " incompatible with weights " +
                         w.shape_str());
  const int bn = in.dim(0), id = in.dim(1), od = w.dim(1);
  TensorT<S> out({bn, od});
  kern::matmul(in.ptr(), w.ptr(), out.ptr(), bn, id, od);
  for (int r = 0; r < bn; ++r) {
    S* row = out.ptr() + static_cast<int64_t>(r) * od;
    for (int o = 0; o < od; ++o) row[o] += b.data[static_cast<size_t>(o)];
  }
  return out;
}

// Accumulates into any non-null gradient output.
template <class S>
void linear_backward(const TensorT<S>& in, const TensorT<S>& w, const TensorT<S>& gout,
                     TensorT<S>* gin, TensorT<S>* gw, TensorT<S>* gb) {
  const int bn = in.dim(0), id = in.dim(1), od = w.dim(1);
  require_shape(gout, {bn, od}, "linear backward: output gradient");
  if (gin) {
    require_shape(*gin, {bn, id}, "linear backward: input gradient");
    kern::matmul_a_bt(gout.ptr(), w.ptr(), gin->ptr(), bn, id, od);
  }
  if (gw) {
    require_shape(*gw, {id, od}, "linear backward: weight gradient");
    kern::matmul_at_b(in.ptr(), gout.ptr(), gw->ptr(), bn, id, od);
  }
  if (gb) {
    require_shape(*gb, {od}, "linear backward: bias gradient");
    for (int r = 0; r < bn; ++r) {
      const S* row = gout.ptr() + static_cast<int64_t>(r) * od;
      for (int o = 0; o < od; ++o) gb->data[static_cast<size_t>(o)] += row[o];
    }
  }
}

// ---------------------------------------------------------------------------
// activations (finite inputs assumed; NaN input is a numeric error)

template <class S>
TensorT<S> relu_forward(const TensorT<S>& x) {
  require_finite(x, "relu input");
  TensorT<S> y = x;
  for (S& v : y.data) v = v > S(0) ? v : S(0);
  return y;
}

// gin += gout * 1[x > 0]
template <class S>
void relu_backward(const TensorT<S>& x, const TensorT<S>& gout, TensorT<S>& gin) {
  for (int64_t i = 0; i < x.numel(); ++i)
    if (x.data[static_cast<size_t>(i)] > S(0))
      gin.data[static_cast<size_t>(i)] += gout.data[static_cast<size_t>(i)];
}

template <class S>
constexpr S sigmoid_margin() {
  return std::is_same_v<S, float> ? S(1e-6) : S(1e-12);
}

template <class S>
S sigmoid_scalar(S x) {
  S y;
  if (x >= S(0)) {
    const S e = std::exp(-x);
    y = S(1) / (S(1) + e);
  } else {
    const S e = std::exp(x);
    y = e / (S(1) + e);
  }
  const S m = sigmoid_margin<S>();
  if (y < m) y = m;
  if (y > S(1) - m) y = S(1) - m;
  return y;
}

// outputs strictly inside (0,1)
template <class S>
TensorT<S> sigmoid_forward(const TensorT<S>& x) {
  require_finite(x, "sigmoid input");
  TensorT<S> y = x;
  for (S& v : y.data) v = sigmoid_scalar(v);
  return y;
}

// gin += gout * y(1-y), y the cached forward output
template <class S>
void sigmoid_backward(const TensorT<S>& y, const TensorT<S>& gout, TensorT<S>& gin) {
  for (int64_t i = 0; i < y.numel(); ++i) {
    const S yi = y.data[static_cast<size_t>(i)];
    gin.data[static_cast<size_t>(i)] += gout.data[static_cast<size_t>(i)] * yi * (S(1) - yi);
  }
}

// softmax along one axis, max-subtracted for stability
template <class S>
TensorT<S> softmax_forward(const TensorT<S>& x, int axis) {
  require_finite(x, "softmax input");
  if (axis < 0 || axis >= x.ndim()) throw DimensionError("softmax: axis out of range");
  int64_t outer = 1, inner = 1;
  const int len = x.dim(axis);
  for (int i = 0; i < axis; ++i) outer *= x.dim(i);
  for (int i = axis + 1; i < x.ndim(); ++i) inner *= x.dim(i);
  TensorT<S> y = x;
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = o * len * inner + in;
      S mx = y.data[static_cast<size_t>(base)];
      for (int j = 1; j < len; ++j)
        mx = std::max(mx, y.data[static_cast<size_t>(base + j * inner)]);
      S sum = S(0);
      for (int j = 0; j < len; ++j) {
        S& v = y.data[static_cast<size_t>(base + j * inner)];
        v = std::exp(v - mx);
        sum += v;
      }
      for (int j = 0; j < len; ++j) y.data[static_cast<size_t>(base + j * inner)] /= sum;
    }
  }
  return y;
}

// gin += J^T gout with J the softmax Jacobian; y the cached forward output
template <class S>
void softmax_backward(const TensorT<S>& y, const TensorT<S>& gout, int axis, TensorT<S>& gin) {
  int64_t outer = 1, inner = 1;
  const int len = y.dim(axis);
  for (int i = 0; i < axis; ++i) outer *= y.dim(i);
  for (int i = axis + 1; i < y.ndim(); ++i) inner *= y.dim(i);
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = o * len * inner + in;
      S dot = S(0);
      for (int j = 0; j < len; ++j) {
        const size_t idx = static_cast<size_t>(base + j * inner);
        dot += gout.data[idx] * y.data[idx];
      }
      for (int j = 0; j < len; ++j) {
        const size_t idx = static_cast<size_t>(base + j * inner);
        gin.data[idx] += y.data[idx] * (gout.data[idx] - dot);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// conv block: 3x3 conv, stride 2, zero padding 1, optional ReLU, optional
// 2x2 max pool


template <class S>
struct ConvBlockCache {
  TensorT<S> input;
  TensorT<S> conv_out;  // pre-activation
  std::vector<int32_t> argmax;
  bool relu = false;
  bool pool = false;
};

template <class S>
TensorT<S> conv_block_forward(const TensorT<S>& in, const TensorT<S>& w, const TensorT<S>& b,
                              bool relu, bool pool, ConvBlockCache<S>* cache) {
  if (in.ndim() != 4) throw DimensionError("conv block: input must be [B,C,H,W]");
  const int bn = in.dim(0), ic = in.dim(1), ih = in.dim(2), iw = in.dim(3);
  if (ih < 1 || iw < 1)
    throw DimensionError("conv block: input " + in.shape_str() + " smaller than 3x3 kernel");
  if (w.ndim() != 4 || w.dim(1) != ic || w.dim(2) != 3 || w.dim(3) != 3)
    throw DimensionError("conv block: weights " + w.shape_str() + " incompatible with input " +
                         in.shape_str());
  const int oc = w.dim(0);
  const int oh = conv_out_dim(ih), ow = conv_out_dim(iw);
  TensorT<S> conv({bn, oc, oh, ow});
  kern::conv2d_forward(in.ptr(), w.ptr(), b.ptr(), conv.ptr(), bn, ic, ih, iw, oc, oh, ow);
  if (relu)
    for (S& v : conv.data) v = v > S(0) ? v : S(0);
  if (cache) {
    cache->input = in;
    cache->relu = relu;
    cache->pool = pool;
  }
  if (!pool) {
    if (cache) cache->conv_out = conv;
    return conv;
  }
  const int ph = oh / 2, pw = ow / 2;
  if (ph < 1 || pw < 1)
    throw DimensionError("conv block: pooling a " + conv.shape_str() + " map would be empty");
  TensorT<S> pooled({bn, oc, ph, pw});
  std::vector<int32_t> argmax(static_cast<size_t>(pooled.numel()));
  kern::maxpool2_forward(conv.ptr(), pooled.ptr(), argmax.data(), bn * oc, oh, ow, ph, pw);
  if (cache) {
    cache->conv_out = std::move(conv);
    cache->argmax = std::move(argmax);
  }
  return pooled;
}

// relu mask is taken from the cached post-relu map: units at exactly zero
// (clipped or dead) pass no gradient
template <class S>
void conv_block_backward(const ConvBlockCache<S>& cache, const TensorT<S>& w,
                         const TensorT<S>& gout, TensorT<S>* gin, TensorT<S>& gw,
                         TensorT<S>& gb) {
  const TensorT<S>& in = cache.input;
  const int bn = in.dim(0), ic = in.dim(1), ih = in.dim(2), iw = in.dim(3);
  const int oc = w.dim(0);
  const int oh = conv_out_dim(ih), ow = conv_out_dim(iw);
  TensorT<S> gconv({bn, oc, oh, ow});
  if (cache.pool) {
    const int ph = oh / 2, pw = ow / 2;
    kern::maxpool2_backward(gout.ptr(), cache.argmax.data(), gconv.ptr(), bn * oc, oh, ow, ph,
                            pw);
  } else {
    gconv = gout;
  }
  if (cache.relu) {
    for (int64_t i = 0; i < gconv.numel(); ++i)
      if (!(cache.conv_out.data[static_cast<size_t>(i)] > S(0)))
        gconv.data[static_cast<size_t>(i)] = S(0);
  }
  kern::conv2d_backward_filters(in.ptr(), gconv.ptr(), gw.ptr(), gb.ptr(), bn, ic, ih, iw, oc,
                                oh, ow);
  if (gin)
    kern::conv2d_backward_input(gconv.ptr(), w.ptr(), gin->ptr(), bn, ic, ih, iw, oc, oh, ow);
}

// ---------------------------------------------------------------------------
// multi-head self-attention over a short token sequence

template <class S>
struct MhaCache {
  TensorT<S> x;     // [B,T,D] input sequence
  TensorT<S> q, k, v;
  TensorT<S> attn;  // [B,H,T,T]
  TensorT<S> ctx;   // [B,T,D] concatenated head outputs
};

template <class S>
struct MhaGrads {
  TensorT<S>*gwq, *gbq, *gwk, *gbk, *gwv, *gbv, *gwo, *gbo;
};

template <class S>
TensorT<S> mha_forward(const TensorT<S>& x, int heads, const TensorT<S>& wq,
                       const TensorT<S>& bq, const TensorT<S>& wk, const TensorT<S>& bk,
                       const TensorT<S>& wv, const TensorT<S>& bv, const TensorT<S>& wo,
                       const TensorT<S>& bo, MhaCache<S>* cache) {
  if (x.ndim() != 3) throw DimensionError("attention: input must be [B,T,D]");
  const int bn = x.dim(0), sl = x.dim(1), d = x.dim(2);
  if (heads < 1 || d % heads != 0)
    throw ConfigError("attention: token dim " + std::to_string(d) +
                      " not divisible by head count " + std::to_string(heads));
  const int hd = d / heads;
  const S scale = S(1) / static_cast<S>(std::sqrt(static_cast<double>(hd)));

  TensorT<S> flat = x;
  flat.shape = {bn * sl, d};
  TensorT<S> q = linear_forward(flat, wq, bq);
  TensorT<S> k = linear_forward(flat, wk, bk);
  TensorT<S> v = linear_forward(flat, wv, bv);

  TensorT<S> attn({bn, heads, sl, sl});
  TensorT<S> ctx({bn * sl, d});
  for (int b = 0; b < bn; ++b) {
    for (int h = 0; h < heads; ++h) {
      TensorT<S> scores({sl, sl});
      for (int i = 0; i < sl; ++i) {
        const S* qi = q.ptr() + (static_cast<int64_t>(b) * sl + i) * d + h * hd;
        for (int j = 0; j < sl; ++j) {
          const S* kj = k.ptr() + (static_cast<int64_t>(b) * sl + j) * d + h * hd;
          S acc = S(0);
          for (int e = 0; e < hd; ++e) acc += qi[e] * kj[e];
          scores.data[static_cast<size_t>(i * sl + j)] = acc * scale;
        }
      }
      TensorT<S> sm = softmax_forward(scores, 1);
      for (int i = 0; i < sl; ++i) {
        S* ci = ctx.ptr() + (static_cast<int64_t>(b) * sl + i) * d + h * hd;
        for (int j = 0; j < sl; ++j) {
          const S a = sm.data[static_cast<size_t>(i * sl + j)];
          const S* vj = v.ptr() + (static_cast<int64_t>(b) * sl + j) * d + h * hd;
          for (int e = 0; e < hd; ++e) ci[e] += a * vj[e];
        }
      }
      for (int i = 0; i < sl; ++i)
        for (int j = 0; j < sl; ++j)
          attn.data[static_cast<size_t>(((static_cast<int64_t>(b) * heads + h) * sl + i) * sl +
                                        j)] = sm.data[static_cast<size_t>(i * sl + j)];
    }
  }
  TensorT<S> out = linear_forward(ctx, wo, bo);
  out.shape = {bn, sl, d};
  if (cache) {
    cache->x = x;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->attn = std::move(attn);
    cache->ctx = std::move(ctx);
  }
  return out;
}

template <class S>
void mha_backward(const MhaCache<S>& cache, int heads, const TensorT<S>& wq,
                  const TensorT<S>& wk, const TensorT<S>& wv, const TensorT<S>& wo,
                  const TensorT<S>& gout, TensorT<S>& gx, const MhaGrads<S>& g) {
  const int bn = cache.x.dim(0), sl = cache.x.dim(1), d = cache.x.dim(2);
  const int hd = d / heads;
  const S scale = S(1) / static_cast<S>(std::sqrt(static_cast<double>(hd)));

  TensorT<S> gflatout = gout;
  gflatout.shape = {bn * sl, d};
  TensorT<S> gctx({bn * sl, d});
  linear_backward(cache.ctx, wo, gflatout, &gctx, g.gwo, g.gbo);

  TensorT<S> gq({bn * sl, d}), gk({bn * sl, d}), gv({bn * sl, d});
  for (int b = 0; b < bn; ++b) {
    for (int h = 0; h < heads; ++h) {
      const S* attn =
          cache.attn.ptr() + ((static_cast<int64_t>(b) * heads + h) * sl) * sl;
      // gattn and softmax backward
      TensorT<S> gattn({sl, sl});
      for (int i = 0; i < sl; ++i) {
        const S* gci = gctx.ptr() + (static_cast<int64_t>(b) * sl + i) * d + h * hd;
        for (int j = 0; j < sl; ++j) {
          const S* vj = cache.v.ptr() + (static_cast<int64_t>(b) * sl + j) * d + h * hd;
          S acc = S(0);
          for (int e = 0; e < hd; ++e) acc += gci[e] * vj[e];
          gattn.data[static_cast<size_t>(i * sl + j)] = acc;
          S* gvj = gv.ptr() + (static_cast<int64_t>(b) * sl + j) * d + h * hd;
          const S a = attn[i * sl + j];
          for (int e = 0; e < hd; ++e) gvj[e] += a * gci[e];
        }
      }
      for (int i = 0; i < sl; ++i) {
        S dot = S(0);
        for (int j = 0; j < sl; ++j)
          dot += gattn.data[static_cast<size_t>(i * sl + j)] * attn[i * sl + j];
        for (int j = 0; j < sl; ++j) {
          const S gs = attn[i * sl + j] *
                       (gattn.data[static_cast<size_t>(i * sl + j)] - dot) * scale;
          const S* kj = cache.k.ptr() + (static_cast<int64_t>(b) * sl + j) * d + h * hd;
          const S* qi = cache.q.ptr() + (static_cast<int64_t>(b) * sl + i) * d + h * hd;
          S* gqi = gq.ptr() + (static_cast<int64_t>(b) * sl + i) * d + h * hd;
          S* gkj = gk.ptr() + (static_cast<int64_t>(b) * sl + j) * d + h * hd;
          for (int e = 0; e < hd; ++e) {
            gqi[e] += gs * kj[e];
            gkj[e] += gs * qi[e];
          }
        }
      }
    }
  }

  TensorT<S> flat = cache.x;
  flat.shape = {bn * sl, d};
  TensorT<S> gflat({bn * sl, d});
  linear_backward(flat, wq, gq, &gflat, g.gwq, g.gbq);
  linear_backward(flat, wk, gk, &gflat, g.gwk, g.gbk);
  linear_backward(flat, wv, gv, &gflat, g.gwv, g.gbv);
  for (int64_t i = 0; i < gx.numel(); ++i)
    gx.data[static_cast<size_t>(i)] += gflat.data[static_cast<size_t>(i)];
}

// ---------------------------------------------------------------------------
// reparameterized Gaussian sample

template <class S>
TensorT<S> reparameterize(const TensorT<S>& mu, const TensorT<S>& sigma,
                          const TensorT<S>& noise) {
  if (!mu.same_shape(sigma) || !mu.same_shape(noise))
    throw DimensionError("reparameterize: mu " + mu.shape_str() + ", sigma " +
                         sigma.shape_str() + ", noise " + noise.shape_str() + " must match");
  TensorT<S> z = mu;
  for (int64_t i = 0; i < z.numel(); ++i) {
    const S s = sigma.data[static_cast<size_t>(i)];
    if (!(s > S(0))) throw NumericError("reparameterize: sigma must be positive");
    z.data[static_cast<size_t>(i)] += s * noise.data[static_cast<size_t>(i)];
  }
  return z;
}

// gmu += gz, gsigma += gz * noise
template <class S>
void reparameterize_backward(const TensorT<S>& noise, const TensorT<S>& gz, TensorT<S>& gmu,
                             TensorT<S>& gsigma) {
  for (int64_t i = 0; i < gz.numel(); ++i) {
    gmu.data[static_cast<size_t>(i)] += gz.data[static_cast<size_t>(i)];
    gsigma.data[static_cast<size_t>(i)] +=
        gz.data[static_cast<size_t>(i)] * noise.data[static_cast<size_t>(i)];
  }
}

// fan-in scaled uniform init, seeded per tensor name so construction order
// does not matter
template <class S>
void init_uniform_fanin(TensorT<S>& w, int fan_in, uint64_t seed, const std::string& name) {
  uint64_t h = Rng::mix(seed + 0x51ed270b7a3fca32ull);
  for (char c : name) h = Rng::mix(h ^ static_cast<uint64_t>(static_cast<unsigned char>(c)));
  Rng rng = Rng::derive(h, {kStreamInit});
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in > 0 ? fan_in : 1));
  fill_uniform(w, rng, -bound, bound);
}

}  // namespace paad
