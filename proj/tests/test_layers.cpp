#include <doctest.h>

#include <cmath>
#include <limits>

#include "paad/layers.hpp"
#include "paad/rng.hpp"
#include "test_util.hpp"

using namespace paad;
using testutil::collect_coords;
using testutil::fd_check;

namespace {

// scalar probe loss: L = sum(c .* y + 0.5 * d .* y^2), dL/dy = c + d .* y
struct ProbeLoss {
  TensorT<double> c, d;

  explicit ProbeLoss(const std::vector<int>& shape, Rng& rng) : c(shape), d(shape) {
    fill_uniform(c, rng, -1, 1);
    fill_uniform(d, rng, -1, 1);
  }
  double value(const TensorT<double>& y) const {
    double acc = 0;
    for (int64_t i = 0; i < y.numel(); ++i) {
      const double v = y.data[static_cast<size_t>(i)];
      acc += c.data[static_cast<size_t>(i)] * v + 0.5 * d.data[static_cast<size_t>(i)] * v * v;
    }
    return acc;
  }
  TensorT<double> grad(const TensorT<double>& y) const {
    TensorT<double> g = y;
    for (int64_t i = 0; i < y.numel(); ++i)
      g.data[static_cast<size_t>(i)] =
          c.data[static_cast<size_t>(i)] + d.data[static_cast<size_t>(i)] * y.data[static_cast<size_t>(i)];
    return g;
  }
};

}  // namespace

TEST_SUITE("diffcore") {
  TEST_CASE("linear with identity weights and zero bias is the identity") {
    TensorT<float> in({1, 3});
    in.fill(1.0f);
    TensorT<float> w({3, 3}), b({3});
    for (int i = 0; i < 3; ++i) w.data[static_cast<size_t>(i * 3 + i)] = 1.0f;
    const auto out = linear_forward(in, w, b);
    REQUIRE(out.shape == std::vector<int>{1, 3});
    for (float v : out.data) CHECK(v == 1.0f);
  }

  TEST_CASE("linear rejects mismatched shapes and names both") {
    TensorT<float> in({2, 4}), w({5, 3}), b({3});
    CHECK_THROWS_WITH_AS(static_cast<void>(linear_forward(in, w, b)),
                         doctest::Contains("[2,4]"), DimensionError);
    CHECK_THROWS_WITH_AS(static_cast<void>(linear_forward(in, w, b)),
                         doctest::Contains("[5,3]"), DimensionError);
  }

  TEST_CASE("linear backward matches central finite differences") {
    Rng rng(11);
    TensorT<double> in({4, 6}), w({6, 3}), b({3});
    fill_uniform(in, rng, -1, 1);
    fill_uniform(w, rng, -1, 1);
    fill_uniform(b, rng, -1, 1);
    ProbeLoss probe({4, 3}, rng);

    const auto out = linear_forward(in, w, b);
    TensorT<double> gin({4, 6}), gw({6, 3}), gb({3});
    linear_backward(in, w, probe.grad(out), &gin, &gw, &gb);

    std::vector<double*> coords;
    std::vector<double> analytic;
    collect_coords(in, coords);
    collect_coords(w, coords);
    collect_coords(b, coords);
    for (auto* t : {&gin, &gw, &gb})
      for (double v : t->data) analytic.push_back(v);

    const auto rep = fd_check(coords, analytic,
                              [&] { return probe.value(linear_forward(in, w, b)); });
    CHECK(rep.failed == 0);
    CHECK(rep.skipped == 0);
    CHECK(rep.checked == static_cast<int>(coords.size()));
  }

  TEST_CASE("conv block maps an all-zero 4x4 input to all-zero 1x1 maps") {
    TensorT<float> in({1, 1, 4, 4}), w({5, 1, 3, 3}), b({5});
    Rng rng(7);
    fill_uniform(w, rng, -1, 1);
    const auto out = conv_block_forward(in, w, b, false, true, (ConvBlockCache<float>*)nullptr);
    CHECK(out.shape == std::vector<int>{1, 5, 1, 1});
    for (float v : out.data) CHECK(v == 0.0f);
  }

  TEST_CASE("three stride-2 blocks reproduce the floor shape arithmetic") {
    // pooling after the first two blocks only
    auto stack_dims = [](int h, int w) {
      int dh = h, dw = w;
      for (int blk = 0; blk < 3; ++blk) {
        dh = (dh - 1) / 2 + 1;
        dw = (dw - 1) / 2 + 1;
        if (blk < 2) {
          dh /= 2;
          dw /= 2;
        }
      }
      return std::pair<int, int>{dh, dw};
    };

    Rng rng(13);
    for (auto [ih, iw] : {std::pair<int, int>{240, 320}, {60, 80}, {37, 53}}) {
      TensorT<float> x({1, 1, ih, iw});
      fill_uniform(x, rng, 0, 1);
      const int chans[3] = {8, 16, 32};
      int ic = 1;
      for (int blk = 0; blk < 3; ++blk) {
        TensorT<float> w({chans[blk], ic, 3, 3}), b({chans[blk]});
        fill_uniform(w, rng, -0.1, 0.1);
        x = conv_block_forward(x, w, b, true, blk < 2, (ConvBlockCache<float>*)nullptr);
        ic = chans[blk];
      }
      const auto [eh, ew] = stack_dims(ih, iw);
      CHECK(x.shape == std::vector<int>{1, 32, eh, ew});
      if (ih == 240) CHECK(x.shape == std::vector<int>{1, 32, 8, 10});
    }
  }

  TEST_CASE("conv block backward matches central finite differences") {
    Rng rng(17);
    TensorT<double> in({2, 2, 9, 11}), w({3, 2, 3, 3}), b({3});
    fill_uniform(in, rng, -1, 1);
    fill_uniform(w, rng, -0.7, 0.7);
    fill_uniform(b, rng, -0.5, 0.5);

    auto run = [&](ConvBlockCache<double>* cache) {
      return conv_block_forward(in, w, b, false, true, cache);
    };
    ConvBlockCache<double> cache;
    const auto out = run(&cache);
    ProbeLoss probe(out.shape, rng);

    TensorT<double> gin(in.shape), gw(w.shape), gb(b.shape);
    conv_block_backward(cache, w, probe.grad(out), &gin, gw, gb);

    std::vector<double*> coords;
    std::vector<double> analytic;
    collect_coords(in, coords);
    collect_coords(w, coords);
    collect_coords(b, coords);
    for (auto* t : {&gin, &gw, &gb})
      for (double v : t->data) analytic.push_back(v);

    const auto rep =
        fd_check(coords, analytic, [&] { return probe.value(run(nullptr)); });
    CHECK(rep.failed == 0);
    // pool argmax switches may exclude the odd coordinate
    CHECK(rep.skipped <= static_cast<int>(coords.size()) / 20);
  }

  TEST_CASE("relu clamps negatives and passes positives") {
    TensorT<float> x({2});
    x.data = {-2.5f, 3.0f};
    const auto y = relu_forward(x);
    CHECK(y.data[0] == 0.0f);
    CHECK(y.data[1] == 3.0f);
  }

  TEST_CASE("relu backward matches finite differences away from the kink") {
    Rng rng(19);
    TensorT<double> x({40});
    for (auto& v : x.data) {
      v = rng.uniform(0.05, 1.5);
      if (rng.bernoulli(0.5)) v = -v;
    }
    ProbeLoss probe({40}, rng);
    const auto y = relu_forward(x);
    TensorT<double> gx({40});
    relu_backward(x, probe.grad(y), gx);

    std::vector<double*> coords;
    std::vector<double> analytic;
    collect_coords(x, coords);
    for (double v : gx.data) analytic.push_back(v);
    const auto rep =
        fd_check(coords, analytic, [&] { return probe.value(relu_forward(x)); });
    CHECK(rep.failed == 0);
    CHECK(rep.skipped == 0);
  }

  TEST_CASE("sigmoid of zero is one half and outputs stay inside (0,1)") {
    TensorT<float> x({3});
    x.data = {0.0f, 100.0f, -100.0f};
    const auto y = sigmoid_forward(x);
    CHECK(y.data[0] == 0.5f);
    CHECK(y.data[1] < 1.0f);
    CHECK(y.data[1] > 0.99f);
    CHECK(y.data[2] > 0.0f);
    CHECK(y.data[2] < 0.01f);
  }

  TEST_CASE("activations reject NaN input") {
    TensorT<float> x({2});
    x.data[1] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(static_cast<void>(relu_forward(x)), NumericError);
    CHECK_THROWS_AS(static_cast<void>(sigmoid_forward(x)), NumericError);
    CHECK_THROWS_AS(static_cast<void>(softmax_forward(x, 0)), NumericError);
  }

  TEST_CASE("sigmoid backward matches finite differences") {
    Rng rng(23);
    TensorT<double> x({30});
    fill_uniform(x, rng, -3, 3);
    ProbeLoss probe({30}, rng);
    const auto y = sigmoid_forward(x);
    TensorT<double> gx({30});
    sigmoid_backward(y, probe.grad(y), gx);

    std::vector<double*> coords;
    std::vector<double> analytic;
    collect_coords(x, coords);
    for (double v : gx.data) analytic.push_back(v);
    const auto rep =
        fd_check(coords, analytic, [&] { return probe.value(sigmoid_forward(x)); });
    CHECK(rep.failed == 0);
    CHECK(rep.skipped == 0);
  }

  TEST_CASE("softmax of a constant row is uniform and rows sum to one") {
    TensorT<float> x({1, 3});
    x.fill(4.25f);
    const auto y = softmax_forward(x, 1);
    for (float v : y.data) CHECK(v == doctest::Approx(1.0f / 3.0f).epsilon(1e-7));

    Rng rng(29);
    TensorT<float> z({5, 7});
    fill_uniform(z, rng, -30, 30);
    const auto s = softmax_forward(z, 1);
    for (int r = 0; r < 5; ++r) {
      float sum = 0;
      for (int c = 0; c < 7; ++c) sum += s.data[static_cast<size_t>(r * 7 + c)];
      CHECK(std::abs(sum - 1.0f) <= 1e-6f);
    }
    CHECK_THROWS_AS(static_cast<void>(softmax_forward(z, 2)), DimensionError);
  }

  TEST_CASE("softmax backward matches finite differences on both axes") {
    Rng rng(31);
    for (int axis = 0; axis < 2; ++axis) {
      TensorT<double> x({4, 5});
      fill_uniform(x, rng, -2, 2);
      ProbeLoss probe({4, 5}, rng);
      const auto y = softmax_forward(x, axis);
      TensorT<double> gx({4, 5});
      softmax_backward(y, probe.grad(y), axis, gx);

      std::vector<double*> coords;
      std::vector<double> analytic;
      collect_coords(x, coords);
      for (double v : gx.data) analytic.push_back(v);
      const auto rep = fd_check(coords, analytic,
                                [&] { return probe.value(softmax_forward(x, axis)); });
      CHECK(rep.failed == 0);
      CHECK(rep.skipped == 0);
    }
  }

  TEST_CASE("single-token attention weight is exactly one") {
    Rng rng(37);
    const int d = 8, heads = 2;
    TensorT<float> x({1, 1, d});
    fill_uniform(x, rng, -1, 1);
    TensorT<float> wq({d, d}), wk({d, d}), wv({d, d}), wo({d, d});
    TensorT<float> bq({d}), bk({d}), bv({d}), bo({d});
    for (auto* w : {&wq, &wk, &wv, &wo}) fill_uniform(*w, rng, -1, 1);
    MhaCache<float> cache;
    static_cast<void>(mha_forward(x, heads, wq, bq, wk, bk, wv, bv, wo, bo, &cache));
    for (float a : cache.attn.data) CHECK(a == 1.0f);
  }

  TEST_CASE("zero query and key projections give uniform attention") {
    Rng rng(41);
    const int d = 8, heads = 4;
    TensorT<float> x({2, 2, d});
    fill_uniform(x, rng, -1, 1);
    TensorT<float> wq({d, d}), wk({d, d}), wv({d, d}), wo({d, d});
    TensorT<float> bq({d}), bk({d}), bv({d}), bo({d});
    fill_uniform(wv, rng, -1, 1);
    fill_uniform(wo, rng, -1, 1);
    MhaCache<float> cache;
    static_cast<void>(mha_forward(x, heads, wq, bq, wk, bk, wv, bv, wo, bo, &cache));
    for (float a : cache.attn.data) CHECK(a == 0.5f);
  }

  TEST_CASE("attention rejects token dims not divisible by the head count") {
    TensorT<float> x({1, 2, 6});
    TensorT<float> w({6, 6}), b({6});
    CHECK_THROWS_AS(
        static_cast<void>(mha_forward(x, 4, w, b, w, b, w, b, w, b, (MhaCache<float>*)nullptr)),
        ConfigError);
  }

  TEST_CASE("attention backward matches central finite differences") {
    Rng rng(43);
    const int bn = 2, sl = 2, d = 8, heads = 2;
    TensorT<double> x({bn, sl, d});
    fill_uniform(x, rng, -1, 1);
    TensorT<double> wq({d, d}), wk({d, d}), wv({d, d}), wo({d, d});
    TensorT<double> bq({d}), bk({d}), bv({d}), bo({d});
    for (auto* w : {&wq, &wk, &wv, &wo}) fill_uniform(*w, rng, -0.8, 0.8);
    for (auto* b : {&bq, &bk, &bv, &bo}) fill_uniform(*b, rng, -0.3, 0.3);
    ProbeLoss probe({bn, sl, d}, rng);

    auto fwd = [&](MhaCache<double>* cache) {
      return mha_forward(x, heads, wq, bq, wk, bk, wv, bv, wo, bo, cache);
    };
    MhaCache<double> cache;
    const auto out = fwd(&cache);

    TensorT<double> gx(x.shape);
    TensorT<double> gwq(wq.shape), gwk(wk.shape), gwv(wv.shape), gwo(wo.shape);
    TensorT<double> gbq(bq.shape), gbk(bk.shape), gbv(bv.shape), gbo(bo.shape);
    MhaGrads<double> grads{&gwq, &gbq, &gwk, &gbk, &gwv, &gbv, &gwo, &gbo};
    mha_backward(cache, heads, wq, wk, wv, wo, probe.grad(out), gx, grads);

    std::vector<double*> coords;
    std::vector<double> analytic;
    collect_coords(x, coords);
    for (auto* t : {&wq, &bq, &wk, &bk, &wv, &bv, &wo, &bo}) collect_coords(*t, coords);
    for (auto* t : std::initializer_list<TensorT<double>*>{&gx, &gwq, &gbq, &gwk, &gbk, &gwv,
                                                           &gbv, &gwo, &gbo})
      for (double v : t->data) analytic.push_back(v);

    const auto rep = fd_check(coords, analytic, [&] { return probe.value(fwd(nullptr)); });
    CHECK(rep.failed == 0);
    CHECK(rep.skipped == 0);
  }

  TEST_CASE("adam with zero gradients from a fresh state leaves parameters unchanged") {
    ParamStoreT<float> store;
    auto& p = store.add("w", {4});
    p.value.data = {1.0f, -2.0f, 0.5f, 3.0f};
    const auto before = p.value.data;
    store.mark_grads();
    adam_step(store, AdamConfig{});
    CHECK(store.at("w").value.data == before);
  }

  TEST_CASE("adam first step matches the hand-computed update") {
    ParamStoreT<double> store;
    auto& p = store.add("w", {1});
    p.value.data[0] = 0.7;
    p.grad.data[0] = 1.0;
    store.mark_grads();
    const AdamConfig cfg;
    adam_step(store, cfg);
    // bias-corrected first step: lr * 1 / (1 + eps)
    const double expect = 0.7 - cfg.lr * 1.0 / (1.0 + cfg.eps);
    CHECK(store.at("w").value.data[0] == doctest::Approx(expect).epsilon(1e-12));
  }

  TEST_CASE("identical gradients produce identical updates") {
    ParamStoreT<float> store;
    store.add("a", {3}).value.fill(0.25f);
    store.add("b", {3}).value.fill(0.25f);
    for (int step = 0; step < 5; ++step) {
      store.grad("a").fill(0.1f * static_cast<float>(step + 1));
      store.grad("b").fill(0.1f * static_cast<float>(step + 1));
      store.mark_grads();
      adam_step(store, AdamConfig{});
    }
    CHECK(store.value("a").data == store.value("b").data);
  }

  TEST_CASE("adam without freshly accumulated gradients is a state error") {
    ParamStoreT<float> store;
    store.add("w", {2});
    store.mark_grads();
    adam_step(store, AdamConfig{});
    CHECK_THROWS_AS(adam_step(store, AdamConfig{}), StateError);
  }

  TEST_CASE("reparameterize passes mu through with zero noise") {
    TensorT<float> mu({3}), sigma({3}), noise({3});
    mu.data = {0.3f, -1.0f, 2.0f};
    sigma.fill(0.7f);
    const auto z = reparameterize(mu, sigma, noise);
    CHECK(z.data == mu.data);
  }

  TEST_CASE("reparameterize gradient in sigma equals the injected noise") {
    Rng rng(47);
    TensorT<double> mu({5}), sigma({5}), noise({5}), gz({5});
    fill_uniform(mu, rng, -1, 1);
    fill_uniform(sigma, rng, 0.2, 1.5);
    fill_normal(noise, rng);
    gz.fill(1.0);
    TensorT<double> gmu({5}), gsigma({5});
    reparameterize_backward(noise, gz, gmu, gsigma);
    for (int i = 0; i < 5; ++i) {
      CHECK(gmu.data[static_cast<size_t>(i)] == 1.0);
      CHECK(gsigma.data[static_cast<size_t>(i)] == noise.data[static_cast<size_t>(i)]);
    }
  }

  TEST_CASE("reparameterize rejects non-positive sigma") {
    TensorT<float> mu({2}), sigma({2}), noise({2});
    sigma.data = {0.5f, -0.1f};
    CHECK_THROWS_AS(static_cast<void>(reparameterize(mu, sigma, noise)), NumericError);
  }

  TEST_CASE("forward passes are bit-identical across repeats") {
    Rng rng(53);
    TensorT<float> in({6, 10}), w({10, 4}), b({4});
    fill_uniform(in, rng, -1, 1);
    fill_uniform(w, rng, -1, 1);
    fill_uniform(b, rng, -1, 1);
    const auto a = linear_forward(in, w, b);
    const auto c = linear_forward(in, w, b);
    CHECK(a.data == c.data);
  }
}
