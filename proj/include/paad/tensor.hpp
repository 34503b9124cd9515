#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "paad/errors.hpp"
#include "paad/rng.hpp"

namespace paad {

// Dense row-major tensor. Scalar type is a template parameter: float is the
// working precision, double instantiations exist for finite-difference
// gradient checks.
template <class S>
struct TensorT {
  std::vector<int> shape;
  std::vector<S> data;

  TensorT() = default;
  explicit TensorT(std::vector<int> shp) : shape(std::move(shp)) {
    data.assign(static_cast<size_t>(numel_of(shape)), S(0));
  }

  static int64_t numel_of(const std::vector<int>& shp) {
    int64_t n = 1;
    for (int d : shp) {
      if (d < 0) throw DimensionError("tensor dimension must be non-negative");
      n *= d;
    }
    return n;
  }

  static TensorT zeros(std::vector<int> shp) { return TensorT(std::move(shp)); }

  static TensorT full(std::vector<int> shp, S v) {
    TensorT t(std::move(shp));
    for (S& x : t.data) x = v;
    return t;
  }

  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int ndim() const { return static_cast<int>(shape.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }

  S* ptr() { return data.data(); }
  const S* ptr() const { return data.data(); }

  bool same_shape(const TensorT& o) const { return shape == o.shape; }

  void fill(S v) {
    for (S& x : data) x = v;
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
    os << "]";
    return os.str();
  }
};

using Tensor = TensorT<float>;

template <class S>
void fill_uniform(TensorT<S>& t, Rng& rng, double lo, double hi) {
  for (S& x : t.data) x = static_cast<S>(rng.uniform(lo, hi));
}

template <class S>
void fill_normal(TensorT<S>& t, Rng& rng) {
  for (S& x : t.data) x = static_cast<S>(rng.normal());
}

template <class S>
bool all_finite(const TensorT<S>& t) {
  for (S x : t.data)
    if (!std::isfinite(static_cast<double>(x))) return false;
  return true;
}

template <class S>
void require_finite(const TensorT<S>& t, const char* what) {
  if (!all_finite(t)) throw NumericError(std::string("non-finite values in ") + what);
}

template <class S>
void require_shape(const TensorT<S>& t, const std::vector<int>& shp, const char* what) {
  if (t.shape != shp) {
    TensorT<S> want;
    want.shape = shp;
    throw DimensionError(std::string(what) + ": got " + t.shape_str() + ", want " +
                         want.shape_str());
  }
}

}  // namespace paad
