#pragma once

#include <cstdint>
#include <limits>

namespace paad {

// output extent of a 3x3 stride-2 pad-1 convolution
inline int conv_out_dim(int d) { return (d - 1) / 2 + 1; }

// Dense compute kernels. paad::kern holds the OpenMP-parallel variants used
// by the layer ops; paad::ref holds plain serial twins kept as the reference
// implementation for equivalence tests and the kernel benchmark. Every output
// element is an independent gather (or a scatter into a region owned by one
// thread), so kern and ref produce bit-identical results for any thread
// count.

namespace ref {

// c[m,n] = a[m,k] * b[k,n]
template <class S>
inline void matmul(const S* a, const S* b, S* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    S* crow = c + static_cast<int64_t>(i) * n;
    for (int j = 0; j < n; ++j) crow[j] = S(0);
    const S* arow = a + static_cast<int64_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const S av = arow[p];
      const S* brow = b + static_cast<int64_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// c[i,o] += a[m,i]^T * b[m,o]  (weight-gradient shape)
template <class S>
inline void matmul_at_b(const S* a, const S* b, S* c, int m, int i_dim, int o_dim) {
  for (int i = 0; i < i_dim; ++i) {
    S* crow = c + static_cast<int64_t>(i) * o_dim;
    for (int r = 0; r < m; ++r) {
      const S av = a[static_cast<int64_t>(r) * i_dim + i];
      const S* brow = b + static_cast<int64_t>(r) * o_dim;
      for (int o = 0; o < o_dim; ++o) crow[o] += av * brow[o];
    }
  }
}

// c[m,i] += b[m,o] * w[i,o]^T  (input-gradient shape)
template <class S>
inline void matmul_a_bt(const S* b, const S* w, S* c, int m, int i_dim, int o_dim) {
  for (int r = 0; r < m; ++r) {
    const S* brow = b + static_cast<int64_t>(r) * o_dim;
    S* crow = c + static_cast<int64_t>(r) * i_dim;
    for (int i = 0; i < i_dim; ++i) {
      const S* wrow = w + static_cast<int64_t>(i) * o_dim;
      S acc = S(0);
      for (int o = 0; o < o_dim; ++o) acc += brow[o] * wrow[o];
      crow[i] += acc;
    }
  }
}

// 3x3 convolution, stride 2, zero padding 1.
template <class S>
inline void conv2d_forward(const S* in, const S* w, const S* bias, S* out, int bn, int ic,
                           int ih, int iw, int oc, int oh, int ow) {
  for (int n = 0; n < bn; ++n) {
    for (int f = 0; f < oc; ++f) {
      S* oplane = out + ((static_cast<int64_t>(n) * oc + f) * oh) * ow;
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          S acc = bias[f];
          for (int c = 0; c < ic; ++c) {
            const S* iplane = in + ((static_cast<int64_t>(n) * ic + c) * ih) * iw;
            const S* wk = w + ((static_cast<int64_t>(f) * ic + c) * 3) * 3;
            for (int ky = 0; ky < 3; ++ky) {
              const int sy = y * 2 + ky - 1;
              if (sy < 0 || sy >= ih) continue;
              for (int kx = 0; kx < 3; ++kx) {
                const int sx = x * 2 + kx - 1;
                if (sx < 0 || sx >= iw) continue;
                acc += iplane[static_cast<int64_t>(sy) * iw + sx] * wk[ky * 3 + kx];
              }
            }
          }
          oplane[static_cast<int64_t>(y) * ow + x] = acc;
        }
      }
    }
  }
}

template <class S>
inline void conv2d_backward_input(const S* gout, const S* w, S* gin, int bn, int ic, int ih,
                                  int iw, int oc, int oh, int ow) {
  for (int n = 0; n < bn; ++n) {
    for (int f = 0; f < oc; ++f) {
      const S* gplane = gout + ((static_cast<int64_t>(n) * oc + f) * oh) * ow;
      for (int y = 0; y < oh; ++y) {
        for (int x = 0; x < ow; ++x) {
          const S g = gplane[static_cast<int64_t>(y) * ow + x];
          for (int c = 0; c < ic; ++c) {
            S* iplane = gin + ((static_cast<int64_t>(n) * ic + c) * ih) * iw;
            const S* wk = w + ((static_cast<int64_t>(f) * ic + c) * 3) * 3;
            for (int ky = 0; ky < 3; ++ky) {
              const int sy = y * 2 + ky - 1;
              if (sy < 0 || sy >= ih) continue;
              for (int kx = 0; kx < 3; ++kx) {
                const int sx = x * 2 + kx - 1;
                if (sx < 0 || sx >= iw) continue;
                iplane[static_cast<int64_t>(sy) * iw + sx] += g * wk[ky * 3 + kx];
              }
            }
          }
        }
      }
    }
  }
}

template <class S>
inline void conv2d_backward_filters(const S* in, const S* gout, S* gw, S* gb, int bn, int ic,
                                    int ih, int iw, int oc, int oh, int ow) {
  for (int f = 0; f < oc; ++f) {
    S bacc = S(0);
    for (int n = 0; n < bn; ++n) {
      const S* gplane = gout + ((static_cast<int64_t>(n) * oc + f) * oh) * ow;
      for (int64_t t = 0; t < static_cast<int64_t>(oh) * ow; ++t) bacc += gplane[t];
    }
    gb[f] += bacc;
    for (int c = 0; c < ic; ++c) {
      S* wk = gw + ((static_cast<int64_t>(f) * ic + c) * 3) * 3;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          S acc = S(0);
          for (int n = 0; n < bn; ++n) {
            const S* gplane = gout + ((static_cast<int64_t>(n) * oc + f) * oh) * ow;
            const S* iplane = in + ((static_cast<int64_t>(n) * ic + c) * ih) * iw;
            for (int y = 0; y < oh; ++y) {
              const int sy = y * 2 + ky - 1;
              if (sy < 0 || sy >= ih) continue;
              for (int x = 0; x < ow; ++x) {
                const int sx = x * 2 + kx - 1;
                if (sx < 0 || sx >= iw) continue;
                acc += gplane[static_cast<int64_t>(y) * ow + x] *
                       iplane[static_cast<int64_t>(sy) * iw + sx];
              }
            }
          }
          wk[ky * 3 + kx] += acc;
        }
      }
    }
  }
}

// 2x2 max pooling, stride 2, trailing odd row/column dropped. Ties pick the
// first element in scan order. argmax stores the flat in-plane index.
template <class S>
inline void maxpool2_forward(const S* in, S* out, int32_t* argmax, int planes, int ih, int iw,
                             int oh, int ow) {
  for (int p = 0; p < planes; ++p) {
    const S* iplane = in + static_cast<int64_t>(p) * ih * iw;
    S* oplane = out + static_cast<int64_t>(p) * oh * ow;
    int32_t* aplane = argmax + static_cast<int64_t>(p) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        int best = (y * 2) * iw + x * 2;
        S bv = iplane[best];
        const int cand[3] = {(y * 2) * iw + x * 2 + 1, (y * 2 + 1) * iw + x * 2,
                             (y * 2 + 1) * iw + x * 2 + 1};
        for (int idx : cand) {
          if (iplane[idx] > bv) {
            bv = iplane[idx];
            best = idx;
          }
        }
        oplane[static_cast<int64_t>(y) * ow + x] = bv;
        aplane[static_cast<int64_t>(y) * ow + x] = best;
      }
    }
  }
}

template <class S>
inline void maxpool2_backward(const S* gout, const int32_t* argmax, S* gin, int planes, int ih,
                              int iw, int oh, int ow) {
  for (int p = 0; p < planes; ++p) {
    const S* gplane = gout + static_cast<int64_t>(p) * oh * ow;
    const int32_t* aplane = argmax + static_cast<int64_t>(p) * oh * ow;
    S* iplane = gin + static_cast<int64_t>(p) * ih * iw;
    for (int64_t t = 0; t < static_cast<int64_t>(oh) * ow; ++t) iplane[aplane[t]] += gplane[t];
  }
}

}  // namespace ref

namespace kern {

template <class S>
inline void matmul(const S* a, const S* b, S* c, int m, int k, int n) {
#pragma omp parallel for schedule(static) if (static_cast<int64_t>(m) * k * n > 32768)
  for (int i = 0; i < m; ++i) {
    S* crow = c + static_cast<int64_t>(i) * n;
    for (int j = 0; j < n; ++j) crow[j] = S(0);
    const S* arow = a + static_cast<int64_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const S av = arow[p];
      const S* brow = b + static_cast<int64_t>(p) * n;
      for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <class S>
inline void matmul_at_b(const S* a, const S* b, S* c, int m, int i_dim, int o_dim) {
#pragma omp parallel for schedule(static) if (static_cast<int64_t>(m) * i_dim * o_dim > 32768)
  for (int i = 0; i < i_dim; ++i) {
    S* crow = c + static_cast<int64_t>(i) * o_dim;
    for (int r = 0; r < m; ++r) {
      const S av = a[static_cast<int64_t>(r) * i_dim + i];
      const S* brow = b + static_cast<int64_t>(r) * o_dim;
      for (int o = 0; o < o_dim; ++o) crow[o] += av * brow[o];
    }
  }
}

template <class S>
inline void matmul_a_bt(const S* b, const S* w, S* c, int m, int i_dim, int o_dim) {
#pragma omp parallel for schedule(static) if (static_cast<int64_t>(m) * i_dim * o_dim > 32768)
  for (int r = 0; r < m; ++r) {
    const S* brow = b + static_cast<int64_t>(r) * o_dim;
    S* crow = c + static_cast<int64_t>(r) * i_dim;
    for (int i = 0; i < i_dim; ++i) {
      const S* wrow = w + static_cast<int64_t>(i) * o_dim;
      S acc = S(0);
      for (int o = 0; o < o_dim; ++o) acc += brow[o] * wrow[o];
      crow[i] += acc;
    }
  }
}

template <class S>
inline void conv2d_forward(const S* in, const S* w, const S* bias, S* out, int bn, int ic,
                           int ih, int iw, int oc, int oh, int ow) {
#pragma omp parallel for collapse(2) schedule(static) if (bn * oc > 1)
  for (int n = 0; n < bn; ++n) {
    for (int f = 0; f < oc; ++f) {
      ref::conv2d_forward(in + static_cast<int64_t>(n) * ic * ih * iw,
                          w + static_cast<int64_t>(f) * ic * 9, bias + f,
                          out + ((static_cast<int64_t>(n) * oc + f) * oh) * ow, 1, ic, ih, iw,
                          1, oh, ow);
    }
  }
}

// parallel over batch items only: each thread scatters into its own image
template <class S>
inline void conv2d_backward_input(const S* gout, const S* w, S* gin, int bn, int ic, int ih,
                                  int iw, int oc, int oh, int ow) {
#pragma omp parallel for schedule(static) if (bn > 1)
  for (int n = 0; n < bn; ++n) {
    ref::conv2d_backward_input(gout + static_cast<int64_t>(n) * oc * oh * ow, w,
                               gin + static_cast<int64_t>(n) * ic * ih * iw, 1, ic, ih, iw, oc,
                               oh, ow);
  }
}

// parallel over output channels: each thread owns one slice of gw and gb
template <class S>
inline void conv2d_backward_filters(const S* in, const S* gout, S* gw, S* gb, int bn, int ic,
                                    int ih, int iw, int oc, int oh, int ow) {
#pragma omp parallel for schedule(static) if (oc > 1)
  for (int f = 0; f < oc; ++f) {
    S bacc = S(0);
    for (int n = 0; n < bn; ++n) {
      const S* gplane = gout + ((static_cast<int64_t>(n) * oc + f) * oh) * ow;
      for (int64_t t = 0; t < static_cast<int64_t>(oh) * ow; ++t) bacc += gplane[t];
    }
    gb[f] += bacc;
    for (int c = 0; c < ic; ++c) {
      S* wk = gw + ((static_cast<int64_t>(f) * ic + c) * 3) * 3;
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          S acc = S(0);
          for (int n = 0; n < bn; ++n) {
            const S* gplane = gout + ((static_cast<int64_t>(n) * oc + f) * oh) * ow;
            const S* iplane = in + ((static_cast<int64_t>(n) * ic + c) * ih) * iw;
            for (int y = 0; y < oh; ++y) {
              const int sy = y * 2 + ky - 1;
              if (sy < 0 || sy >= ih) continue;
              for (int x = 0; x < ow; ++x) {
                const int sx = x * 2 + kx - 1;
                if (sx < 0 || sx >= iw) continue;
                acc += gplane[static_cast<int64_t>(y) * ow + x] *
                       iplane[static_cast<int64_t>(sy) * iw + sx];
              }
            }
          }
          wk[ky * 3 + kx] += acc;
        }
      }
    }
  }
}

template <class S>
inline void maxpool2_forward(const S* in, S* out, int32_t* argmax, int planes, int ih, int iw,
                             int oh, int ow) {
#pragma omp parallel for schedule(static) if (planes > 1)
  for (int p = 0; p < planes; ++p) {
    ref::maxpool2_forward(in + static_cast<int64_t>(p) * ih * iw,
                          out + static_cast<int64_t>(p) * oh * ow,
                          argmax + static_cast<int64_t>(p) * oh * ow, 1, ih, iw, oh, ow);
  }
}

template <class S>
inline void maxpool2_backward(const S* gout, const int32_t* argmax, S* gin, int planes, int ih,
                              int iw, int oh, int ow) {
#pragma omp parallel for schedule(static) if (planes > 1)
  for (int p = 0; p < planes; ++p) {
    ref::maxpool2_backward(gout + static_cast<int64_t>(p) * oh * ow,
                           argmax + static_cast<int64_t>(p) * oh * ow,
                           gin + static_cast<int64_t>(p) * ih * iw, 1, ih, iw, oh, ow);
  }
}

}  // namespace kern

}  // namespace paad
