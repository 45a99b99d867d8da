#include <doctest.h>

#include <random>
#include <sstream>

#include "attrnoise/nn.hpp"

using namespace attrnoise::nn;
using Eigen::MatrixXd;

namespace {

MatrixXd uniform(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

MatrixXd bernoulli_mask(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = (rng() % 4 == 0) ? 0.0 : 1.0;
  return m;
}

double loss_of(const ModelParams& p, const MatrixXd& x, const MatrixXd& t, const MatrixXd& m) {
  return masked_mse(predict(p, x), t, m);
}

// Largest entrywise relative error between backprop and central differences.
double max_gradient_error(const ModelParams& params, const MatrixXd& x, const MatrixXd& t, const MatrixXd& m,
                          double h = 1e-5) {
  const auto fw = forward(params, x);
  const auto g = backward(params, fw.cache, fw.output, t, m);
  double worst = 0.0;
  auto probe = [&](double analytic, double& slot) {
    const double keep = slot;
    slot = keep + h;
    const double up = loss_of(params, x, t, m);
    slot = keep - h;
    const double down = loss_of(params, x, t, m);
    slot = keep;
    const double numeric = (up - down) / (2 * h);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    worst = std::max(worst, std::abs(analytic - numeric) / denom);
  };
  auto& mp = const_cast<ModelParams&>(params);
  for (std::size_t l = 0; l < mp.layers.size(); ++l) {
    auto& L = mp.layers[l];
    for (Eigen::Index i = 0; i < L.weight.size(); ++i) probe(g.layers[l].weight.data()[i], L.weight.data()[i]);
    for (Eigen::Index i = 0; i < L.bias.size(); ++i) probe(g.layers[l].bias(i), L.bias(i));
  }
  return worst;
}

}  // namespace

TEST_CASE("forward: zero network with sigmoid output gives exactly 0.5") {
  auto p = init_params({LayerSpec::dense(4, 3, Activation::relu), LayerSpec::dense(3, 4, Activation::sigmoid)}, 1);
  for (auto& l : p.layers) {
    l.weight.setZero();
    l.bias.setZero();
  }
  std::mt19937_64 rng(2);
  const auto out = predict(p, uniform(5, 4, rng));
  CHECK((out.array() == 0.5).all());
}

TEST_CASE("forward: identity layer passes input through") {
  auto p = init_params({LayerSpec::dense(3, 3, Activation::identity)}, 1);
  p.layers[0].weight.setIdentity();
  std::mt19937_64 rng(3);
  const MatrixXd x = uniform(4, 3, rng);
  CHECK(predict(p, x) == x);
}

TEST_CASE("forward: matches a straight-line oracle on a 2-layer net") {
  const auto p = init_params({LayerSpec::dense(4, 5, Activation::relu), LayerSpec::dense(5, 4, Activation::sigmoid)}, 9);
  std::mt19937_64 rng(4);
  const MatrixXd x = uniform(3, 4, rng);
  const auto out = predict(p, x);
  for (int r = 0; r < 3; ++r) {
    double h[5];
    for (int o = 0; o < 5; ++o) {
      double z = p.layers[0].bias(o);
      for (int i = 0; i < 4; ++i) z += p.layers[0].weight(o, i) * x(r, i);
      h[o] = z > 0 ? z : 0.0;
    }
    for (int o = 0; o < 4; ++o) {
      double z = p.layers[1].bias(o);
      for (int i = 0; i < 5; ++i) z += p.layers[1].weight(o, i) * h[i];
      CHECK(std::abs(out(r, o) - 1.0 / (1.0 + std::exp(-z))) < 1e-12);
    }
  }
}

TEST_CASE("forward: conv1d matches a direct padded cross-correlation") {
  const auto p = init_params({LayerSpec::conv1d(6, 2, 3, 3, Activation::identity)}, 5);
  std::mt19937_64 rng(6);
  const MatrixXd x = uniform(2, 12, rng);
  const auto out = predict(p, x);
  const auto& w = p.layers[0].weight;
  for (int r = 0; r < 2; ++r)
    for (int pos = 0; pos < 6; ++pos)
      for (int o = 0; o < 3; ++o) {
        double z = p.layers[0].bias(o);
        for (int c = 0; c < 2; ++c)
          for (int t = 0; t < 3; ++t) {
            const int src = pos + t - 1;
            if (src >= 0 && src < 6) z += w(o, c * 3 + t) * x(r, src * 2 + c);
          }
        CHECK(std::abs(out(r, pos * 3 + o) - z) < 1e-12);
      }
}

TEST_CASE("forward: rejects a width mismatch") {
  const auto p = init_params({LayerSpec::dense(4, 4, Activation::sigmoid)}, 1);
  CHECK_THROWS_AS(forward(p, MatrixXd::Zero(2, 5)), ShapeError);
}

TEST_CASE("conv1d with kernel 1 equals a per-position dense layer") {
  const auto conv = init_params({LayerSpec::conv1d(5, 3, 2, 1, Activation::relu)}, 8);
  // Block-diagonal dense layer built from the same 2x3 kernel.
  auto dense = init_params({LayerSpec::dense(15, 10, Activation::relu)}, 0);
  dense.layers[0].weight.setZero();
  for (int pos = 0; pos < 5; ++pos) {
    dense.layers[0].weight.block(pos * 2, pos * 3, 2, 3) = conv.layers[0].weight;
    dense.layers[0].bias.segment(pos * 2, 2) = conv.layers[0].bias;
  }
  std::mt19937_64 rng(9);
  const MatrixXd x = uniform(7, 15, rng);
  CHECK((predict(conv, x) - predict(dense, x)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("masked_mse: examples") {
  MatrixXd pred(1, 2), target(1, 2), mask(1, 2);
  pred << 2, 4;
  target << 1, 2;
  mask << 1, 0;
  CHECK(masked_mse(pred, target, mask) == 1.0);
  CHECK(masked_mse(pred, pred, MatrixXd::Ones(1, 2)) == 0.0);
  CHECK(masked_mse(pred, target, MatrixXd::Zero(1, 2)) == 0.0);
  CHECK_THROWS_AS(masked_mse(pred, MatrixXd::Zero(2, 2), mask), ShapeError);
}

TEST_CASE("masked_mse: masked cells contribute nothing, even when non-finite") {
  MatrixXd pred(2, 2), target(2, 2), mask(2, 2);
  pred << 0.3, std::numeric_limits<double>::infinity(), 0.1, 0.9;
  target << 0.2, 0.5, std::nan(""), 0.4;
  mask << 1, 0, 0, 1;
  CHECK(masked_mse(pred, target, mask) == doctest::Approx(0.01 + 0.25).epsilon(1e-15));
}

TEST_CASE("masked_mse: invariant under joint cell permutation") {
  std::mt19937_64 rng(12);
  const MatrixXd p = uniform(6, 5, rng), t = uniform(6, 5, rng), m = bernoulli_mask(6, 5, rng);
  std::vector<int> perm(30);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  MatrixXd p2(6, 5), t2(6, 5), m2(6, 5);
  for (int k = 0; k < 30; ++k) {
    p2.data()[k] = p.data()[perm[k]];
    t2.data()[k] = t.data()[perm[k]];
    m2.data()[k] = m.data()[perm[k]];
  }
  CHECK(masked_mse(p2, t2, m2) == doctest::Approx(masked_mse(p, t, m)).epsilon(1e-14));
}

TEST_CASE("backward: all-zero mask gives exactly zero gradients") {
  const auto p = init_params(dense_autoencoder(9), 3);
  std::mt19937_64 rng(4);
  const MatrixXd x = uniform(5, 9, rng, 0, 1);
  const auto fw = forward(p, x);
  const auto g = backward(p, fw.cache, fw.output, x, MatrixXd::Zero(5, 9));
  for (const auto& l : g.layers) {
    CHECK((l.weight.array() == 0.0).all());
    CHECK((l.bias.array() == 0.0).all());
  }
}

TEST_CASE("backward: gradients do not depend on masked target entries") {
  const auto p = init_params(dense_autoencoder(6), 3);
  std::mt19937_64 rng(5);
  const MatrixXd x = uniform(4, 6, rng, 0, 1);
  const MatrixXd m = bernoulli_mask(4, 6, rng);
  MatrixXd t2 = x;
  for (Eigen::Index k = 0; k < x.size(); ++k)
    if (m.data()[k] == 0.0) t2.data()[k] = 1e6;
  const auto fw = forward(p, x);
  const auto a = backward(p, fw.cache, fw.output, x, m);
  const auto b = backward(p, fw.cache, fw.output, t2, m);
  for (std::size_t l = 0; l < a.layers.size(); ++l) {
    CHECK(a.layers[l].weight == b.layers[l].weight);
    CHECK(a.layers[l].bias == b.layers[l].bias);
  }
}

TEST_CASE("backward: central differences on a 5x6 problem") {
  const auto p = init_params({LayerSpec::dense(6, 4, Activation::relu), LayerSpec::dense(4, 6, Activation::sigmoid)}, 21);
  std::mt19937_64 rng(22);
  const MatrixXd x = uniform(5, 6, rng), t = uniform(5, 6, rng, 0, 1), m = bernoulli_mask(5, 6, rng);
  CHECK(max_gradient_error(p, x, t, m) < 1e-4);
}

TEST_CASE("backward: doubling residuals scales loss by 4 and gradients by 2 on a linear net") {
  const auto p = init_params({LayerSpec::dense(3, 3, Activation::identity)}, 2);
  std::mt19937_64 rng(7);
  const MatrixXd x = uniform(4, 3, rng), t = uniform(4, 3, rng), m = bernoulli_mask(4, 3, rng);
  const auto fw = forward(p, x);
  const MatrixXd t2 = fw.output - 2.0 * (fw.output - t);
  CHECK(masked_mse(fw.output, t2, m) == doctest::Approx(4.0 * masked_mse(fw.output, t, m)).epsilon(1e-12));
  const auto g1 = backward(p, fw.cache, fw.output, t, m);
  const auto g2 = backward(p, fw.cache, fw.output, t2, m);
  CHECK((g2.layers[0].weight - 2.0 * g1.layers[0].weight).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g2.layers[0].bias - 2.0 * g1.layers[0].bias).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("backward: rejects a stale cache") {
  const auto p = init_params(dense_autoencoder(8), 1);
  const auto other = init_params(dense_autoencoder(10), 1);
  std::mt19937_64 rng(1);
  const MatrixXd x = uniform(3, 10, rng, 0, 1);
  const auto fw = forward(other, x);
  CHECK_THROWS_AS(backward(p, fw.cache, fw.output, x, MatrixXd::Ones(3, 10)), ShapeError);
}

TEST_CASE("adam: zero gradient keeps params and decays moments") {
  auto p = init_params({LayerSpec::dense(2, 2, Activation::identity)}, 1);
  const auto before = p;
  auto st = AdamState::for_params(p);
  adam_step(p, zeros_like(p), st);
  CHECK(p.layers[0].weight == before.layers[0].weight);
  CHECK(p.layers[0].bias == before.layers[0].bias);
  CHECK(st.step_count == 1);

  st.first_moment.layers[0].weight.setConstant(1.0);
  st.second_moment.layers[0].weight.setConstant(1.0);
  adam_step(p, zeros_like(p), st);
  CHECK(st.first_moment.layers[0].weight(0, 0) == doctest::Approx(0.9));
  CHECK(st.second_moment.layers[0].weight(0, 0) == doctest::Approx(0.999));
  CHECK(st.step_count == 2);
}

TEST_CASE("adam: first step on a scalar moves by about lr") {
  auto p = init_params({LayerSpec::dense(1, 1, Activation::identity)}, 1);
  p.layers[0].weight(0, 0) = 0.0;
  auto g = zeros_like(p);
  g.layers[0].weight(0, 0) = 1.0;
  auto st = AdamState::for_params(p, {0.1, 0.9, 0.999, 1e-8});
  adam_step(p, g, st);
  CHECK(p.layers[0].weight(0, 0) == doctest::Approx(-0.1).epsilon(1e-6));
}

TEST_CASE("adam: 200 steps on (w-3)^2 converge") {
  auto p = init_params({LayerSpec::dense(1, 1, Activation::identity)}, 1);
  p.layers[0].weight(0, 0) = 0.0;
  auto st = AdamState::for_params(p, {0.1, 0.9, 0.999, 1e-8});
  for (int i = 0; i < 200; ++i) {
    auto g = zeros_like(p);
    g.layers[0].weight(0, 0) = 2.0 * (p.layers[0].weight(0, 0) - 3.0);
    adam_step(p, g, st);
  }
  CHECK(std::abs(p.layers[0].weight(0, 0) - 3.0) < 0.1);
  CHECK(st.step_count == 200);
}

TEST_CASE("adam: non-finite gradient aborts") {
  auto p = init_params({LayerSpec::dense(2, 2, Activation::identity)}, 1);
  auto g = zeros_like(p);
  g.layers[0].bias(1) = std::nan("");
  auto st = AdamState::for_params(p);
  CHECK_THROWS_AS(adam_step(p, g, st), NonFiniteError);
}

TEST_CASE("architectures chain from d back to d") {
  for (std::size_t d : {3u, 17u, 64u}) {
    auto dense = init_params(dense_autoencoder(d), 1);
    dense.validate();
    CHECK(dense.input_width() == d);
    CHECK(dense.output_width() == d);
    CHECK(dense.layers[1].spec.in_width == std::max<std::size_t>((d + 1) / 2, 8));
    auto conv = init_params(conv_autoencoder(d), 1);
    conv.validate();
    CHECK(conv.output_width() == d);
  }
  CHECK_THROWS_AS(LayerSpec::conv1d(4, 1, 1, 2, Activation::relu).validate(), ShapeError);
}

TEST_CASE("save_params/load_params round trip is exact") {
  const auto p = init_params(conv_autoencoder(7), 13);
  std::stringstream s;
  save_params(p, s);
  const auto q = load_params(s);
  REQUIRE(q.layers.size() == p.layers.size());
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    CHECK(q.layers[l].spec == p.layers[l].spec);
    CHECK(q.layers[l].weight == p.layers[l].weight);
    CHECK(q.layers[l].bias == p.layers[l].bias);
  }
}
