#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "testutil.hpp"
#include "vtd/fusion.hpp"

using namespace vtd;

namespace {

// Scalar-loop oracle for the gate + fusion forward pass with running-stat
// normalization. Written against the equations, independent of the layer code.
struct GateOracle {
  // w1: [h][c], w2: [c][h]
  std::vector<std::vector<double>> w1, w2;
  std::vector<double> g1, b1, m1, v1;  // hidden-width norm params
  std::vector<double> g2, b2, m2, v2;  // channel-width norm params
  double eps = 1e-5;

  std::vector<double> rho(const std::vector<double>& f_local,
                          const std::vector<double>& f_glob) const {
    const size_t c = w1[0].size(), h = w1.size();
    std::vector<double> s(c);
    for (size_t i = 0; i < c; ++i) s[i] = f_local[i] + f_glob[i];

    std::vector<double> z1(h);
    for (size_t i = 0; i < h; ++i) {
      double acc = 0.0;
      for (size_t j = 0; j < c; ++j) acc += w1[i][j] * s[j];
      acc = g1[i] * (acc - m1[i]) / std::sqrt(v1[i] + eps) + b1[i];
      z1[i] = acc > 0.0 ? acc : 0.0;
    }
    std::vector<double> out(c);
    for (size_t i = 0; i < c; ++i) {
      double acc = 0.0;
      for (size_t j = 0; j < h; ++j) acc += w2[i][j] * z1[j];
      acc = g2[i] * (acc - m2[i]) / std::sqrt(v2[i] + eps) + b2[i];
      out[i] = 1.0 / (1.0 + std::exp(-acc));
    }
    return out;
  }

  std::vector<double> fused(const std::vector<double>& f_local,
                            const std::vector<double>& f_glob) const {
    const auto r = rho(f_local, f_glob);
    std::vector<double> out(r.size());
    for (size_t i = 0; i < r.size(); ++i)
      out[i] = r[i] * f_local[i] + (1.0 - r[i]) * f_glob[i];
    return out;
  }
};

FusionGate random_gate(int64_t c, int64_t r, Rng& rng) {
  FusionGate gate(c, r, rng);
  const int64_t h = c / r;
  for (int64_t i = 0; i < h; ++i) {
    gate.bn1.gamma.value.data[i] = rng.uniform(0.5, 1.5);
    gate.bn1.beta.value.data[i] = rng.uniform(-0.5, 0.5);
    gate.bn1.run_mean.data[i] = rng.uniform(-0.5, 0.5);
    gate.bn1.run_var.data[i] = rng.uniform(0.5, 2.0);
  }
  for (int64_t i = 0; i < c; ++i) {
    gate.bn2.gamma.value.data[i] = rng.uniform(0.5, 1.5);
    gate.bn2.beta.value.data[i] = rng.uniform(-0.5, 0.5);
    gate.bn2.run_mean.data[i] = rng.uniform(-0.5, 0.5);
    gate.bn2.run_var.data[i] = rng.uniform(0.5, 2.0);
  }
  return gate;
}

GateOracle oracle_of(const FusionGate& gate) {
  const int64_t c = gate.channels();
  const int64_t h = c / gate.reduction();
  GateOracle o;
  o.w1.assign(static_cast<size_t>(h), std::vector<double>(static_cast<size_t>(c)));
  o.w2.assign(static_cast<size_t>(c), std::vector<double>(static_cast<size_t>(h)));
  for (int64_t i = 0; i < h; ++i)
    for (int64_t j = 0; j < c; ++j) o.w1[static_cast<size_t>(i)][static_cast<size_t>(j)] = gate.w1.w.value.at(i, j);
  for (int64_t i = 0; i < c; ++i)
    for (int64_t j = 0; j < h; ++j) o.w2[static_cast<size_t>(i)][static_cast<size_t>(j)] = gate.w2.w.value.at(i, j);
  auto vec = [](const Tensor& t) {
    return std::vector<double>(t.data.data(), t.data.data() + t.numel());
  };
  o.g1 = vec(gate.bn1.gamma.value);
  o.b1 = vec(gate.bn1.beta.value);
  o.m1 = vec(gate.bn1.run_mean);
  o.v1 = vec(gate.bn1.run_var);
  o.g2 = vec(gate.bn2.gamma.value);
  o.b2 = vec(gate.bn2.beta.value);
  o.m2 = vec(gate.bn2.run_mean);
  o.v2 = vec(gate.bn2.run_var);
  return o;
}

}  // namespace

TEST_CASE("gate + fusion match the scalar-loop oracle on 100 random instances") {
  Rng rng(61);
  for (int trial = 0; trial < 100; ++trial) {
    FusionGate gate = random_gate(8, 4, rng);
    const GateOracle oracle = oracle_of(gate);

    Tensor fl = vtdtest::random_tensor({1, 8}, rng, -3.0, 3.0);
    Tensor fg = vtdtest::random_tensor({1, 8}, rng, -3.0, 3.0);
    Tensor s = fl;
    s.data += fg.data;
    const Tensor rho = gate.infer(s);
    const Tensor fa = fuse(fl, fg, rho);

    std::vector<double> vl(fl.data.data(), fl.data.data() + 8);
    std::vector<double> vg(fg.data.data(), fg.data.data() + 8);
    const auto want_rho = oracle.rho(vl, vg);
    const auto want_fa = oracle.fused(vl, vg);
    for (int i = 0; i < 8; ++i) {
      REQUIRE(std::abs(rho.data[i] - want_rho[static_cast<size_t>(i)]) < 1e-6);
      REQUIRE(std::abs(fa.data[i] - want_fa[static_cast<size_t>(i)]) < 1e-6);
    }
  }
}

TEST_CASE("zero weights with identity normalization give rho = 0.5") {
  Rng rng(62);
  FusionGate gate(8, 4, rng);
  gate.w1.w.value.data.setZero();
  gate.w2.w.value.data.setZero();
  Tensor s = vtdtest::random_tensor({3, 8}, rng);
  const Tensor rho = gate.infer(s);
  for (int64_t i = 0; i < rho.numel(); ++i) REQUIRE(rho.data[i] == 0.5);
}

TEST_CASE("gate output always lies strictly inside (0,1)") {
  Rng rng(63);
  for (int trial = 0; trial < 50; ++trial) {
    FusionGate gate = random_gate(16, 4, rng);
    Tensor s = vtdtest::random_tensor({4, 16}, rng, -10.0, 10.0);
    const Tensor rho = gate.infer(s);
    for (int64_t i = 0; i < rho.numel(); ++i) {
      REQUIRE(rho.data[i] > 0.0);
      REQUIRE(rho.data[i] < 1.0);
    }
  }
}

TEST_CASE("gate depends on the inputs only through their sum") {
  Rng rng(64);
  FusionGate gate = random_gate(8, 4, rng);
  Tensor fl = vtdtest::random_tensor({1, 8}, rng);
  Tensor fg = vtdtest::random_tensor({1, 8}, rng);
  Tensor s1 = fl;
  s1.data += fg.data;
  Tensor s2 = fg;
  s2.data += fl.data;  // swapped order, same sum
  CHECK(gate.infer(s1).bitwise_equal(gate.infer(s2)));
}

TEST_CASE("fuse: equal inputs are a fixed point for any gate") {
  Rng rng(65);
  Tensor v = vtdtest::random_tensor({1, 16}, rng);
  Tensor rho = vtdtest::random_tensor({1, 16}, rng, 0.01, 0.99);
  const Tensor fa = fuse(v, v, rho);
  CHECK((fa.data - v.data).abs().maxCoeff() < 1e-15);
}

TEST_CASE("fuse: rho = 0.5 gives the midpoint") {
  Rng rng(66);
  Tensor fl = vtdtest::random_tensor({1, 16}, rng);
  Tensor fg = vtdtest::random_tensor({1, 16}, rng);
  Tensor rho = Tensor::full({1, 16}, 0.5);
  const Tensor fa = fuse(fl, fg, rho);
  for (int i = 0; i < 16; ++i)
    REQUIRE(fa.data[i] == doctest::Approx((fl.data[i] + fg.data[i]) / 2.0).epsilon(1e-12));
}

TEST_CASE("fuse matches a loop oracle and stays within channel bounds") {
  Rng rng(67);
  Tensor fl = vtdtest::random_tensor({1, 16}, rng, -5.0, 5.0);
  Tensor fg = vtdtest::random_tensor({1, 16}, rng, -5.0, 5.0);
  Tensor rho = vtdtest::random_tensor({1, 16}, rng, 0.0001, 0.9999);
  const Tensor fa = fuse(fl, fg, rho);
  for (int i = 0; i < 16; ++i) {
    const double want = rho.data[i] * fl.data[i] + (1 - rho.data[i]) * fg.data[i];
    REQUIRE(std::abs(fa.data[i] - want) < 1e-7);
    REQUIRE(fa.data[i] >= std::min(fl.data[i], fg.data[i]) - 1e-12);
    REQUIRE(fa.data[i] <= std::max(fl.data[i], fg.data[i]) + 1e-12);
  }
  CHECK_THROWS_AS(fuse(fl, vtdtest::random_tensor({1, 8}, rng), rho), DimensionMismatch);
}

TEST_CASE("per-channel boundedness over 1000 random trials at C=128") {
  Rng rng(68);
  FusionGate gate = random_gate(128, 4, rng);
  for (int trial = 0; trial < 1000; ++trial) {
    Tensor fl = vtdtest::random_tensor({1, 128}, rng, -10.0, 10.0);
    Tensor fg = vtdtest::random_tensor({1, 128}, rng, -10.0, 10.0);
    Tensor s = fl;
    s.data += fg.data;
    const Tensor fa = fuse(fl, fg, gate.infer(s));
    for (int c = 0; c < 128; ++c) {
      REQUIRE(fa.data[c] >= std::min(fl.data[c], fg.data[c]));
      REQUIRE(fa.data[c] <= std::max(fl.data[c], fg.data[c]));
    }
  }
}

TEST_CASE("classifier head: zero weights give probability one half") {
  Rng rng(69);
  ClassifierHead head(8, rng);
  head.lin.w.value.data.setZero();
  head.lin.b.value.data.setZero();
  Tensor x = vtdtest::random_tensor({4, 8}, rng);
  const Tensor p = head.infer(x);
  for (int i = 0; i < 4; ++i) REQUIRE(p.data[i] == 0.5);
}

TEST_CASE("classifier probabilities always lie in [0,1] (1000 random features)") {
  Rng rng(70);
  ClassifierHead head(16, rng);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor x = vtdtest::random_tensor({100, 16}, rng, -50.0, 50.0);
    const Tensor p = head.infer(x);
    for (int i = 0; i < 100; ++i) {
      REQUIRE(p.data[i] >= 0.0);
      REQUIRE(p.data[i] <= 1.0);
    }
  }
}

TEST_CASE("loss: exact predictions and the uniform coin") {
  Tensor labels = Tensor::from_vector({4}, {1.0, 0.0, 1.0, 0.0});
  CHECK(bce_loss(labels, labels) <= 1e-6);

  Tensor half = Tensor::full({4}, 0.5);
  CHECK(std::abs(bce_loss(half, labels) - std::log(2.0)) < 1e-9);

  Tensor short_labels = Tensor::full({3}, 0.0);
  CHECK_THROWS_AS(bce_loss(half, short_labels), LengthMismatch);
}

TEST_CASE("loss matches a loop oracle on random batches") {
  Rng rng(71);
  for (int trial = 0; trial < 20; ++trial) {
    const int64_t n = 1 + static_cast<int64_t>(rng.uniform_int(64));
    Tensor p({n}), y({n});
    for (int64_t i = 0; i < n; ++i) {
      p.data[i] = rng.uniform(0.001, 0.999);
      y.data[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
    }
    double want = 0.0;
    for (int64_t i = 0; i < n; ++i)
      want -= y.data[i] * std::log(p.data[i]) + (1.0 - y.data[i]) * std::log(1.0 - p.data[i]);
    want /= static_cast<double>(n);
    REQUIRE(std::abs(bce_loss(p, y) - want) < 1e-9);
  }
}

TEST_CASE("analytic gradients through loss-classify-fuse-gate match finite differences") {
  Rng rng(72);
  FusionGate gate = random_gate(8, 4, rng);
  ClassifierHead head(8, rng);
  Tensor fl = vtdtest::random_tensor({2, 8}, rng, -2.0, 2.0);
  Tensor fg = vtdtest::random_tensor({2, 8}, rng, -2.0, 2.0);
  Tensor labels = Tensor::from_vector({2}, {1.0, 0.0});

  Tensor g_fl, g_fg;

  auto loss = [&]() {
    Tensor s = fl;
    s.data += fg.data;
    const Tensor rho = gate.infer(s);
    const Tensor fa = fuse(fl, fg, rho);
    return bce_loss(head.infer(fa), labels);
  };

  auto compute = [&]() {
    for (auto* p : gate.params()) p->zero_grad();
    for (auto* p : head.params()) p->zero_grad();
    Tensor s = fl;
    s.data += fg.data;
    const Tensor rho = gate.forward(s, nn::Mode::EVAL);
    const Tensor fa = fuse(fl, fg, rho);
    const Tensor probs = head.forward(fa);
    const Tensor gprob = bce_grad(probs, labels);
    const Tensor gfa = head.backward(gprob);
    FuseGrads fgr = fuse_backward(gfa, fl, fg, rho);
    const Tensor gs = gate.backward(fgr.g_rho);
    g_fl = fgr.g_local;
    g_fl.data += gs.data;
    g_fg = fgr.g_glob;
    g_fg.data += gs.data;
  };
  compute();

  std::vector<vtdtest::GradTarget> targets{{"f_local", &fl, &g_fl}, {"f_glob", &fg, &g_fg}};
  for (auto* p : gate.params()) targets.push_back({p->name, &p->value, &p->grad});
  for (auto* p : head.params()) targets.push_back({p->name, &p->value, &p->grad});

  const auto r = vtdtest::finite_diff_check(loss, targets, 1e-4);
  INFO(r.worst);
  CHECK(r.max_rel_err <= 1e-3);
}

TEST_CASE("no NaN or Inf anywhere for extreme inputs (10^4 forward passes)") {
  Rng rng(73);
  FusionGate gate = random_gate(16, 4, rng);
  ClassifierHead head(16, rng);
  for (int trial = 0; trial < 10000; ++trial) {
    Tensor fl = vtdtest::random_tensor({1, 16}, rng, -10.0, 10.0);
    Tensor fg = vtdtest::random_tensor({1, 16}, rng, -10.0, 10.0);
    Tensor s = fl;
    s.data += fg.data;
    const Tensor rho = gate.infer(s);
    const Tensor fa = fuse(fl, fg, rho);
    const Tensor p = head.infer(fa);
    REQUIRE(rho.all_finite());
    REQUIRE(fa.all_finite());
    REQUIRE(p.all_finite());
  }
}

TEST_CASE("gate rejects mismatched dimensions and non-positive running variance") {
  Rng rng(74);
  FusionGate gate(8, 4, rng);
  CHECK_THROWS_AS(gate.infer(vtdtest::random_tensor({1, 9}, rng)), DimensionMismatch);
  CHECK_THROWS_AS(FusionGate(9, 4, rng), DimensionMismatch);

  gate.bn1.run_var.data[0] = 0.0;
  CHECK_THROWS_AS(gate.bn1.check_running_variance(), NonPositiveVariance);
}
