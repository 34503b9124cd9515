// Benchmarks the OpenMP kernels against their serial reference twins and
// checks that both produce identical bytes.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "paad/fieldsim.hpp"
#include "paad/kernels.hpp"
#include "paad/rng.hpp"
#include "paad/tensor.hpp"

namespace {

double now_s() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

double time_call(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  const double t0 = now_s();
  for (int i = 0; i < reps; ++i) fn();
  return (now_s() - t0) / reps;
}

void report(const char* name, double gflop, double t_ref, double t_omp, bool identical) {
  std::printf("%-22s ref %8.2f ms (%6.2f GF/s)   omp %8.2f ms (%6.2f GF/s)   x%.2f  %s\n",
              name, t_ref * 1e3, gflop / t_ref, t_omp * 1e3, gflop / t_omp, t_ref / t_omp,
              identical ? "identical" : "MISMATCH");
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (OpenMP disabled)\n");
#endif

  paad::Rng rng(42);

  {
    const int m = 384, k = 384, n = 384;
    paad::Tensor a({m, k}), b({k, n}), c1({m, n}), c2({m, n});
    paad::fill_uniform(a, rng, -1, 1);
    paad::fill_uniform(b, rng, -1, 1);
    const double t_ref =
        time_call([&] { paad::ref::matmul(a.ptr(), b.ptr(), c1.ptr(), m, k, n); }, 5);
    const double t_omp =
        time_call([&] { paad::kern::matmul(a.ptr(), b.ptr(), c2.ptr(), m, k, n); }, 5);
    report("matmul 384^3", 2.0 * m * k * n * 1e-9, t_ref, t_omp,
           std::memcmp(c1.ptr(), c2.ptr(), sizeof(float) * c1.numel()) == 0);
  }

  {
    const int bn = 16, ic = 8, ih = 120, iw = 160, oc = 16;
    const int oh = paad::conv_out_dim(ih), ow = paad::conv_out_dim(iw);
    paad::Tensor in({bn, ic, ih, iw}), w({oc, ic, 3, 3}), bias({oc});
    paad::Tensor o1({bn, oc, oh, ow}), o2({bn, oc, oh, ow});
    paad::fill_uniform(in, rng, -1, 1);
    paad::fill_uniform(w, rng, -1, 1);
    paad::fill_uniform(bias, rng, -1, 1);
    const double t_ref = time_call(
        [&] {
          paad::ref::conv2d_forward(in.ptr(), w.ptr(), bias.ptr(), o1.ptr(), bn, ic, ih, iw,
                                    oc, oh, ow);
        },
        5);
    const double t_omp = time_call(
        [&] {
          paad::kern::conv2d_forward(in.ptr(), w.ptr(), bias.ptr(), o2.ptr(), bn, ic, ih, iw,
                                     oc, oh, ow);
        },
        5);
    report("conv3x3 s2", 2.0 * bn * oc * oh * ow * ic * 9 * 1e-9, t_ref, t_omp,
           std::memcmp(o1.ptr(), o2.ptr(), sizeof(float) * o1.numel()) == 0);
  }

  {
    paad::WorldConfig wc;
    wc.length = 60;
    wc.seed = 7;
    const paad::World world = paad::generate_world(wc);
    const paad::Pose pose{8.0, 0.05, 0.02};
    std::vector<float> s1, s2;
    const double t_ref = time_call([&] { s1 = paad::ref::lidar_scan(world, pose); }, 20);
    const double t_omp = time_call([&] { s2 = paad::kern::lidar_scan(world, pose); }, 20);
    const double gflop = 1e-9 * 12.0 * 1081.0 * world.circles.size();
    report("lidar 1081 beams", gflop, t_ref, t_omp,
           s1.size() == s2.size() &&
               std::memcmp(s1.data(), s2.data(), sizeof(float) * s1.size()) == 0);
  }

  return 0;
}
