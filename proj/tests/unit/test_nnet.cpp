#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "esdrl/checkpoint.hpp"
#include "esdrl/nnet.hpp"
#include "esdrl/optim.hpp"

using namespace esdrl::nn;

namespace {

Mlp make_net(std::vector<int> sizes, OutputActivation act, std::uint64_t seed) {
  MlpSpec spec;
  spec.layer_sizes = std::move(sizes);
  spec.output_activation = act;
  Mlp net(spec);
  std::mt19937_64 rng(seed);
  net.initialize(rng, 0.3);
  return net;
}

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0, 1);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Worst relative error between backward and central differences over random
// parameter probes, for the scalar loss sum(C .* net(X)).
double gradient_check(Mlp& net, int probes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Matrix X = random_matrix(net.input_dim(), 6, rng);
  const Matrix C = random_matrix(net.output_dim(), 6, rng);
  MlpTape tape;
  net.forward(X, tape);
  const auto analytic = net.backward(tape, C).flatten();
  auto theta = net.params().flatten();
  auto loss = [&](const std::vector<double>& p) {
    net.params().assign_flat(p);
    return (net.forward(X).array() * C.array()).sum();
  };
  std::uniform_int_distribution<std::size_t> pick(0, theta.size() - 1);
  double worst = 0;
  for (int k = 0; k < probes; ++k) {
    const std::size_t i = pick(rng);
    const double h = 1e-6 * std::max(1.0, std::abs(theta[i]));
    auto p = theta;
    p[i] = theta[i] + h;
    const double up = loss(p);
    p[i] = theta[i] - h;
    const double down = loss(p);
    const double fd = (up - down) / (2 * h);
    const double scale = std::max({std::abs(fd), std::abs(analytic[i]), 1e-6});
    worst = std::max(worst, std::abs(fd - analytic[i]) / scale);
  }
  net.params().assign_flat(theta);
  return worst;
}

}  // namespace

TEST(Nnet, GradientCheckSmallTanh) {
  Mlp net = make_net({5, 16, 16, 3}, OutputActivation::tanh_scaled, 1);
  EXPECT_LT(gradient_check(net, 64, 2), 1e-5);
}

TEST(Nnet, GradientCheckSmallIdentity) {
  Mlp net = make_net({7, 32, 32, 32, 1}, OutputActivation::identity, 3);
  EXPECT_LT(gradient_check(net, 64, 4), 1e-5);
}

TEST(Nnet, InputGradientMatchesFiniteDifferences) {
  Mlp net = make_net({4, 24, 24, 1}, OutputActivation::identity, 5);
  std::mt19937_64 rng(6);
  Matrix X = random_matrix(4, 3, rng);
  MlpTape tape;
  net.forward(X, tape);
  Matrix dX;
  net.backward(tape, Matrix::Ones(1, 3), &dX);
  for (Eigen::Index i = 0; i < X.size(); ++i) {
    Matrix up = X, down = X;
    up.data()[i] += 1e-6;
    down.data()[i] -= 1e-6;
    const double fd = (net.forward(up).sum() - net.forward(down).sum()) / 2e-6;
    EXPECT_NEAR(dX.data()[i], fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST(Nnet, LayerNormOutputIsStandardized) {
  Mlp net = make_net({3, 50, 1}, OutputActivation::identity, 8);
  std::mt19937_64 rng(9);
  MlpTape tape;
  net.forward(random_matrix(3, 4, rng), tape);
  ASSERT_GE(tape.normed.size(), 1u);
  for (Eigen::Index c = 0; c < 4; ++c) {
    const auto col = tape.normed[0].col(c);
    EXPECT_NEAR(col.mean(), 0.0, 1e-12);
    EXPECT_NEAR(col.squaredNorm() / 50.0, 1.0, 1e-3);
  }
}

TEST(Nnet, TanhOutputRespectsScale) {
  MlpSpec spec;
  spec.layer_sizes = {2, 8, 2};
  spec.output_activation = OutputActivation::tanh_scaled;
  spec.output_scale = {0.5, 2.0};
  Mlp net(spec);
  std::mt19937_64 rng(1);
  net.initialize(rng, 50.0);
  const Matrix out = net.forward(Matrix(random_matrix(2, 100, rng) * 100));
  EXPECT_LE(out.row(0).cwiseAbs().maxCoeff(), 0.5);
  EXPECT_LE(out.row(1).cwiseAbs().maxCoeff(), 2.0);
}

TEST(Nnet, FlattenRoundTrip) {
  Mlp net = make_net({3, 4, 2}, OutputActivation::identity, 2);
  auto flat = net.params().flatten();
  EXPECT_EQ(flat.size(), net.params().count());
  for (double& v : flat) v += 1.0;
  net.params().assign_flat(flat);
  EXPECT_EQ(net.params().flatten(), flat);
  EXPECT_THROW(net.params().assign_flat({1.0}), std::invalid_argument);
}

TEST(Optim, FirstAdamStepIsSignedLearningRate) {
  Mlp net = make_net({2, 3, 1}, OutputActivation::identity, 4);
  const auto before = net.params().flatten();
  MlpParams g = net.params().zeros_like();
  std::vector<double> gflat(g.count());
  for (std::size_t i = 0; i < gflat.size(); ++i) gflat[i] = (i % 3 == 0 ? -1.0 : 0.5) * static_cast<double>(i + 1);
  g.assign_flat(gflat);
  AdamState st(net.params(), 0.01);
  adam_step(net.params(), g, st);
  const auto after = net.params().flatten();
  for (std::size_t i = 0; i < after.size(); ++i)
    EXPECT_NEAR(after[i] - before[i], -0.01 * gflat[i] / (std::abs(gflat[i]) + st.epsilon), 1e-12);
}

TEST(Optim, AdamRejectsNonFiniteGradient) {
  Mlp net = make_net({2, 3, 1}, OutputActivation::identity, 4);
  const auto before = net.params().flatten();
  MlpParams g = net.params().zeros_like();
  g.layers[0].W(0, 0) = std::nan("");
  AdamState st(net.params(), 0.01);
  EXPECT_THROW(adam_step(net.params(), g, st), std::invalid_argument);
  EXPECT_EQ(net.params().flatten(), before);
}

TEST(Optim, PolyakClosedForm) {
  Mlp online = make_net({3, 5, 2}, OutputActivation::identity, 10);
  Mlp target = make_net({3, 5, 2}, OutputActivation::identity, 11);
  const auto th = online.params().flatten();
  const auto t0 = target.params().flatten();
  const double tau = 0.05;
  const int n = 40;
  for (int k = 0; k < n; ++k) polyak(target.params(), online.params(), tau);
  const auto tn = target.params().flatten();
  const double decay = std::pow(1 - tau, n);
  for (std::size_t i = 0; i < th.size(); ++i) EXPECT_NEAR(tn[i], th[i] + decay * (t0[i] - th[i]), 1e-13);
}

TEST(Checkpoint, RoundTrip) {
  Mlp net = make_net({3, 6, 6, 2}, OutputActivation::tanh_scaled, 12);
  Checkpoint ck;
  ck.header["note"] = "x";
  put_network(ck, "actor", net);
  const Checkpoint back = deserialize(serialize(ck));
  const Mlp copy = get_network(back, "actor");
  EXPECT_EQ(copy.params().flatten(), net.params().flatten());
  EXPECT_EQ(copy.spec().layer_sizes, net.spec().layer_sizes);
  EXPECT_EQ(back.header["note"], "x");
}

TEST(Checkpoint, CorruptionIsDetected) {
  Mlp net = make_net({3, 6, 2}, OutputActivation::identity, 13);
  Checkpoint ck;
  put_network(ck, "critic", net);
  const std::string good = serialize(ck);

  std::string flipped = good;
  flipped[good.size() / 2] ^= 0x01;
  EXPECT_THROW(deserialize(flipped), CheckpointError);
  EXPECT_THROW(deserialize(good.substr(0, good.size() - 9)), CheckpointError);
  std::string magic = good;
  magic[0] = 'X';
  EXPECT_THROW(deserialize(magic), CheckpointError);
  EXPECT_THROW(deserialize(""), CheckpointError);
}

TEST(Checkpoint, MissingNetworkIsAnError) {
  Checkpoint ck;
  EXPECT_ANY_THROW(get_network(ck, "actor"));
}
