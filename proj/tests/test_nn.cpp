#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "testutil.hpp"
#include "vtd/nn.hpp"

using namespace vtd;
using namespace vtd::nn;
using vtdtest::GradTarget;
using vtdtest::finite_diff_check;
using vtdtest::random_tensor;

namespace {

// scalar readout so every layer output feeds a single loss; fixed weights make
// the readout part of the differentiated chain
double weighted_sum(const Tensor& y, const Tensor& w) { return (y.data * w.data).sum(); }

Tensor weighted_sum_grad(const Tensor& w) { return w; }

}  // namespace

TEST_CASE("linear gradients match finite differences") {
  Rng rng(11);
  Linear lin("lin", 5, 4, rng);
  Tensor x = random_tensor({3, 5}, rng);
  Tensor w = random_tensor({3, 4}, rng);
  Tensor gx;

  auto loss = [&]() { return weighted_sum(lin.infer(x), w); };
  auto compute = [&]() {
    lin.w.zero_grad();
    lin.b.zero_grad();
    lin.forward(x);
    gx = lin.backward(weighted_sum_grad(w));
  };
  compute();
  const auto r = finite_diff_check(
      loss, {{"w", &lin.w.value, &lin.w.grad}, {"b", &lin.b.value, &lin.b.grad},
             {"x", &x, &gx}});
  CHECK(r.max_rel_err < 1e-6);
}

TEST_CASE("conv2d gradients match finite differences (stride 2, pad 1)") {
  Rng rng(12);
  Conv2d conv("conv", 2, 3, 3, 2, 1, rng);
  Tensor x = random_tensor({2, 2, 6, 6}, rng);
  Tensor w = random_tensor({2, 3, 3, 3}, rng);
  Tensor gx;

  auto loss = [&]() { return weighted_sum(conv.infer(x), w); };
  auto compute = [&]() {
    conv.w.zero_grad();
    conv.b.zero_grad();
    conv.forward(x);
    gx = conv.backward(weighted_sum_grad(w));
  };
  compute();
  const auto r = finite_diff_check(
      loss, {{"w", &conv.w.value, &conv.w.grad}, {"b", &conv.b.value, &conv.b.grad},
             {"x", &x, &gx}});
  CHECK(r.max_rel_err < 1e-6);
}

TEST_CASE("conv2d forward matches a direct convolution loop") {
  Rng rng(13);
  Conv2d conv("conv", 2, 3, 3, 1, 1, rng);
  Tensor x = random_tensor({1, 2, 5, 5}, rng);
  Tensor y = conv.infer(x);
  REQUIRE(y.shape() == std::vector<int64_t>{1, 3, 5, 5});

  for (int64_t co = 0; co < 3; ++co)
    for (int64_t oy = 0; oy < 5; ++oy)
      for (int64_t ox = 0; ox < 5; ++ox) {
        double want = conv.b.value.data[co];
        for (int64_t ci = 0; ci < 2; ++ci)
          for (int64_t ky = 0; ky < 3; ++ky)
            for (int64_t kx = 0; kx < 3; ++kx) {
              const int64_t iy = oy - 1 + ky, ix = ox - 1 + kx;
              if (iy < 0 || iy >= 5 || ix < 0 || ix >= 5) continue;
              want += conv.w.value.at(co, (ci * 3 + ky) * 3 + kx) * x.at(0, ci, iy, ix);
            }
        REQUIRE(y.at(0, co, oy, ox) == doctest::Approx(want).epsilon(1e-12));
      }
}

TEST_CASE("batchnorm TRAIN gradients match finite differences") {
  Rng rng(14);
  BatchNorm1d bn("bn", 4);
  bn.gamma.value = random_tensor({4}, rng, 0.5, 1.5);
  bn.beta.value = random_tensor({4}, rng);
  Tensor x = random_tensor({6, 4}, rng);
  Tensor w = random_tensor({6, 4}, rng);
  Tensor gx;

  // forward mutates running stats; pin them per evaluation for a clean check
  auto loss = [&]() {
    BatchNorm1d probe = bn;
    return weighted_sum(probe.forward(x, Mode::TRAIN), w);
  };
  auto compute = [&]() {
    BatchNorm1d probe = bn;
    probe.gamma.zero_grad();
    probe.beta.zero_grad();
    probe.forward(x, Mode::TRAIN);
    gx = probe.backward(weighted_sum_grad(w));
    bn.gamma.grad = probe.gamma.grad;
    bn.beta.grad = probe.beta.grad;
  };
  compute();
  const auto r = finite_diff_check(
      loss, {{"gamma", &bn.gamma.value, &bn.gamma.grad},
             {"beta", &bn.beta.value, &bn.beta.grad},
             {"x", &x, &gx}});
  CHECK(r.max_rel_err < 1e-5);
}

TEST_CASE("batchnorm EVAL uses running statistics and passes FD") {
  Rng rng(15);
  BatchNorm1d bn("bn", 3);
  bn.run_mean = random_tensor({3}, rng);
  bn.run_var = random_tensor({3}, rng, 0.5, 2.0);
  bn.gamma.value = random_tensor({3}, rng, 0.5, 1.5);
  bn.beta.value = random_tensor({3}, rng);
  Tensor x = random_tensor({4, 3}, rng);
  Tensor w = random_tensor({4, 3}, rng);
  Tensor gx;

  auto loss = [&]() { return weighted_sum(bn.infer(x), w); };
  auto compute = [&]() {
    bn.gamma.zero_grad();
    bn.beta.zero_grad();
    bn.forward(x, Mode::EVAL);
    gx = bn.backward(weighted_sum_grad(w));
  };
  compute();
  const auto r = finite_diff_check(
      loss, {{"gamma", &bn.gamma.value, &bn.gamma.grad},
             {"beta", &bn.beta.value, &bn.beta.grad},
             {"x", &x, &gx}});
  CHECK(r.max_rel_err < 1e-6);

  // EVAL forward equals infer and ignores the batch distribution
  Tensor y1 = bn.forward(x, Mode::EVAL);
  Tensor y2 = bn.infer(x);
  CHECK(y1.bitwise_equal(y2));
}

TEST_CASE("layernorm gradients match finite differences") {
  Rng rng(16);
  LayerNorm ln("ln", 6);
  ln.gamma.value = random_tensor({6}, rng, 0.5, 1.5);
  ln.beta.value = random_tensor({6}, rng);
  Tensor x = random_tensor({5, 6}, rng);
  Tensor w = random_tensor({5, 6}, rng);
  Tensor gx;

  auto loss = [&]() { return weighted_sum(ln.infer(x), w); };
  auto compute = [&]() {
    ln.gamma.zero_grad();
    ln.beta.zero_grad();
    ln.forward(x);
    gx = ln.backward(weighted_sum_grad(w));
  };
  compute();
  const auto r = finite_diff_check(
      loss, {{"gamma", &ln.gamma.value, &ln.gamma.grad},
             {"beta", &ln.beta.value, &ln.beta.grad},
             {"x", &x, &gx}});
  CHECK(r.max_rel_err < 1e-5);
}

TEST_CASE("attention and transformer layer gradients match finite differences") {
  Rng rng(17);
  TransformerLayer layer("tl", 8, 2, 16, rng);
  Tensor x = random_tensor({2, 3, 8}, rng);
  Tensor w = random_tensor({2, 3, 8}, rng);
  Tensor gx;

  auto loss = [&]() { return weighted_sum(layer.infer(x), w); };
  auto compute = [&]() {
    std::vector<Param*> ps;
    layer.collect(ps);
    for (Param* p : ps) p->zero_grad();
    layer.forward(x);
    gx = layer.backward(weighted_sum_grad(w));
  };
  compute();

  std::vector<Param*> ps;
  layer.collect(ps);
  std::vector<GradTarget> targets{{"x", &x, &gx}};
  for (Param* p : ps) targets.push_back({p->name, &p->value, &p->grad});
  const auto r = finite_diff_check(loss, targets);
  INFO(r.worst);
  CHECK(r.max_rel_err <= 1e-3);
}

TEST_CASE("upsample and global average pool round-trip gradients") {
  Rng rng(18);
  Upsample2x up;
  GlobalAvgPool2d pool;
  Tensor x = random_tensor({2, 3, 4, 4}, rng);
  Tensor w = random_tensor({2, 3}, rng);
  Tensor gx;

  auto loss = [&]() { return weighted_sum(pool.infer(up.infer(x)), w); };
  auto compute = [&]() {
    pool.forward(up.forward(x));
    gx = up.backward(pool.backward(weighted_sum_grad(w)));
  };
  compute();
  const auto r = finite_diff_check(loss, {{"x", &x, &gx}});
  CHECK(r.max_rel_err < 1e-6);
}

TEST_CASE("adam reduces a quadratic") {
  Rng rng(19);
  Param p("p", random_tensor({8}, rng));
  Adam opt(0.05);
  opt.attach({&p});
  double first = p.value.data.square().sum();
  for (int step = 0; step < 200; ++step) {
    opt.zero_grad();
    p.grad.data = 2.0 * p.value.data;
    opt.step();
  }
  CHECK(p.value.data.square().sum() < 1e-3 * first);
}

TEST_CASE("layers are deterministic for fixed inputs") {
  Rng rng1(20), rng2(20);
  TransformerLayer a("t", 8, 2, 16, rng1), b("t", 8, 2, 16, rng2);
  Rng rx(21);
  Tensor x = random_tensor({1, 4, 8}, rx);
  Tensor ya = a.infer(x), yb = b.infer(x);
  CHECK(ya.bitwise_equal(yb));
  CHECK(a.infer(x).bitwise_equal(ya));
}
