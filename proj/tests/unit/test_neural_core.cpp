#include <cmath>
#include <limits>
#include <vector>

#include "../support/oracles.hpp"
#include "doctest.h"
#include "tailgan/errors.hpp"
#include "tailgan/gpd.hpp"
#include "tailgan/nn/adam.hpp"
#include "tailgan/nn/dense_net.hpp"
#include "tailgan/nn/losses.hpp"
#include "tailgan/nn/reparam.hpp"
#include "tailgan/nn/serialization.hpp"

using namespace tailgan;
using namespace tailgan::nn;
using doctest::Approx;

namespace {

Matrix random_batch(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

// Scalar loss sum(c .* output) so d loss / d output = c.
double probe_loss(const DenseNet& net, const Matrix& x, const Matrix& c) {
  return (net.predict(x).array() * c.array()).sum();
}

const std::vector<Activation> kAllActivations = {Activation::identity(), Activation::relu(),
                                                 Activation::leaky_relu(), Activation::tanh(),
                                                 Activation::softplus(), Activation::sigmoid()};

}  // namespace

TEST_CASE("activation values") {
  CHECK(activate(Activation::relu(), -2.0) == 0.0);
  CHECK(activate(Activation::leaky_relu(), -2.0) == Approx(-0.02));
  CHECK(activate(Activation::sigmoid(), 0.0) == 0.5);
  CHECK(activate(Activation::softplus(), 0.0) == Approx(std::log(2.0)));
  // Stable softplus at large magnitudes.
  CHECK(activate(Activation::softplus(), 800.0) == Approx(800.0));
  CHECK(activate(Activation::softplus(), -800.0) >= 0.0);
  CHECK(std::isfinite(activate(Activation::softplus(), -800.0)));
  for (const double x : {-30.0, -1.0, 0.3, 5.0}) {
    CHECK(activate(Activation::softplus(), x) == Approx(oracle::softplus(x)).epsilon(1e-13));
  }
  for (const auto kind : {ActivationKind::identity, ActivationKind::relu, ActivationKind::leaky_relu,
                          ActivationKind::tanh, ActivationKind::softplus, ActivationKind::sigmoid}) {
    CHECK(activation_kind_from_string(to_string(kind)) == kind);
  }
  CHECK_THROWS(activation_kind_from_string("gelu"));
}

TEST_CASE("forward: zero net, identity layer, hand-computed 2x2") {
  Rng rng(3);
  const std::vector<std::size_t> widths = {3, 4, 2};
  DenseNet net = DenseNet::create(widths, Activation::tanh(), Activation::sigmoid(), rng);
  net.set_parameters(Vector::Zero(static_cast<Eigen::Index>(net.parameter_count())));
  const Matrix out = net.predict(random_batch(rng, 5, 3));
  CHECK((out.array() == 0.5).all());

  DenseLayer id{Matrix::Identity(3, 3), Vector::Zero(3), Activation::identity()};
  const DenseNet ident({id});
  const Matrix x = random_batch(rng, 4, 3);
  CHECK(ident.predict(x) == x);

  DenseLayer l1{Matrix(2, 2), Vector(2), Activation::relu()};
  l1.weight << 1.0, -2.0, 0.5, 3.0;
  l1.bias << 0.25, -1.0;
  DenseLayer l2{Matrix(1, 2), Vector(1), Activation::identity()};
  l2.weight << 2.0, -1.0;
  l2.bias << 0.5;
  const DenseNet hand({l1, l2});
  Matrix in(1, 2);
  in << 1.0, 2.0;
  // h = relu([1 - 4 + 0.25, 0.5 + 6 - 1]) = [0, 5.5]; y = 0 - 5.5 + 0.5 = -5.
  CHECK(hand.predict(in)(0, 0) == Approx(-5.0));

  CHECK_THROWS_AS(hand.predict(Matrix::Zero(1, 3)), DimensionError);
  DenseLayer bad{Matrix::Zero(2, 5), Vector::Zero(2), Activation::identity()};
  CHECK_THROWS_AS(DenseNet({l1, bad}), DimensionError);
}

TEST_CASE("backward: zero output gradient and linear least squares") {
  Rng rng(5);
  const std::vector<std::size_t> widths = {4, 6, 3};
  const DenseNet net = DenseNet::create(widths, Activation::leaky_relu(), Activation::identity(), rng);
  const Matrix x = random_batch(rng, 7, 4);
  const ForwardPass fp = net.forward(x);
  const Gradients g = net.backward(fp.tape, Matrix::Zero(7, 3));
  CHECK(g.flatten().isZero(0.0));
  CHECK(g.input.isZero(0.0));

  DenseLayer lin{random_batch(rng, 2, 3), Vector::Random(2), Activation::identity()};
  const DenseNet one({lin});
  Matrix xi(1, 3);
  xi << 0.5, -1.0, 2.0;
  Matrix y(1, 2);
  y << 0.3, -0.7;
  const ForwardPass p = one.forward(xi);
  const Matrix residual = p.output - y;
  const Gradients lg = one.backward(p.tape, 2.0 * residual);
  const Matrix expected_w = 2.0 * residual.transpose() * xi;
  CHECK((lg.weight[0] - expected_w).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK((lg.bias[0] - 2.0 * residual.transpose()).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("backward rejects a stale tape and mismatched shapes") {
  Rng rng(9);
  const std::vector<std::size_t> widths = {2, 3, 1};
  DenseNet net = DenseNet::create(widths, Activation::relu(), Activation::identity(), rng);
  const ForwardPass fp = net.forward(random_batch(rng, 2, 2));
  CHECK_THROWS_AS(net.backward(fp.tape, Matrix::Zero(2, 2)), DimensionError);
  net.set_parameters(net.parameters());
  CHECK_THROWS_AS(net.backward(fp.tape, Matrix::Zero(2, 1)), std::logic_error);
}

TEST_CASE("gradient check for every activation tag") {
  // Central differences at h = 1e-5 on 100 random parameter probes per tag.
  Rng rng(11);
  const double h = 1e-5;
  for (const Activation& act : kAllActivations) {
    int failures = 0;
    for (int probe = 0; probe < 100; ++probe) {
      const std::vector<std::size_t> widths = {3, 5, 4, 2};
      const DenseNet net = DenseNet::create(widths, act, act, rng);
      const Matrix x = random_batch(rng, 1 + static_cast<Eigen::Index>(rng.index(8)), 3);
      const Matrix c = random_batch(rng, x.rows(), 2);
      const ForwardPass fp = net.forward(x);
      const Vector analytic = net.backward(fp.tape, c).flatten();
      Vector dir(analytic.size());
      for (Eigen::Index i = 0; i < dir.size(); ++i) dir[i] = rng.normal();
      const Vector theta = net.parameters();
      const auto f = [&](const Vector& p) {
        DenseNet copy = net;
        copy.set_parameters(p);
        return probe_loss(copy, x, c);
      };
      const double numeric = oracle::directional_difference(f, theta, dir, h);
      const double exact = analytic.dot(dir);
      // relu kinks inside the finite-difference stencil are skipped, not counted.
      if (oracle::relative_error(exact, numeric, 1e-6) > 1e-4) {
        bool kink = false;
        if (act.kind == ActivationKind::relu || act.kind == ActivationKind::leaky_relu) {
          for (const Matrix& pre : fp.tape.pre_activations) kink |= (pre.cwiseAbs().minCoeff() < 1e-3);
        }
        if (!kink) ++failures;
      }
    }
    INFO("activation " << to_string(act.kind));
    CHECK(failures == 0);
  }
}

TEST_CASE("input gradient matches finite differences") {
  Rng rng(12);
  const std::vector<std::size_t> widths = {4, 6, 1};
  const DenseNet net = DenseNet::create(widths, Activation::tanh(), Activation::softplus(), rng);
  const Matrix x = random_batch(rng, 3, 4);
  const Matrix c = Matrix::Ones(3, 1);
  const Matrix gin = net.backward(net.forward(x).tape, c).input;
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index k = 0; k < x.cols(); ++k) {
      Matrix xp = x, xm = x;
      xp(r, k) += 1e-5;
      xm(r, k) -= 1e-5;
      const double numeric = (probe_loss(net, xp, c) - probe_loss(net, xm, c)) / 2e-5;
      CHECK(oracle::relative_error(gin(r, k), numeric) <= 1e-6);
    }
  }
}

TEST_CASE("adam_step examples") {
  AdamConfig cfg;
  cfg.learning_rate = 0.1;
  AdamState s = AdamState::zeros(1, cfg);
  Vector p(1);
  p << 2.0;
  Vector g(1);
  g << 1.0;
  CHECK(adam_step(s, p, g) == StepStatus::applied);
  CHECK(s.step == 1);
  CHECK(p[0] == Approx(1.9).epsilon(1e-6));

  AdamState z = AdamState::zeros(3, cfg);
  Vector q = Vector::Constant(3, 1.5);
  CHECK(adam_step(z, q, Vector::Zero(3)) == StepStatus::applied);
  CHECK(z.step == 1);
  CHECK((q.array() == 1.5).all());

  Vector bad(3);
  bad << 1.0, std::numeric_limits<double>::quiet_NaN(), 0.0;
  const AdamState before = z;
  CHECK(adam_step(z, q, bad) == StepStatus::rejected_non_finite);
  CHECK(z.step == before.step);
  CHECK(z.first_moment == before.first_moment);
  CHECK((q.array() == 1.5).all());
  CHECK_THROWS_AS(adam_step(z, q, Vector::Zero(2)), DimensionError);
}

TEST_CASE("adam follows the bias-corrected recurrence") {
  AdamConfig cfg{0.01, 0.5, 0.999, 1e-8};
  AdamState s = AdamState::zeros(2, cfg);
  Vector p(2);
  p << 0.3, -0.4;
  double m0 = 0, v0 = 0, x0 = 0.3;
  Rng rng(1);
  for (int t = 1; t <= 25; ++t) {
    Vector g(2);
    g << rng.normal(), rng.normal();
    m0 = 0.5 * m0 + 0.5 * g[0];
    v0 = 0.999 * v0 + 0.001 * g[0] * g[0];
    const double mh = m0 / (1 - std::pow(0.5, t));
    const double vh = v0 / (1 - std::pow(0.999, t));
    x0 -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    adam_step(s, p, g);
  }
  CHECK(p[0] == Approx(x0).epsilon(1e-12));
}

TEST_CASE("clip_global_norm") {
  Vector g(2);
  g << 3.0, 4.0;
  CHECK(clip_global_norm(g, 5.0) == Approx(5.0));
  CHECK(g[0] == 3.0);
  CHECK(clip_global_norm(g, 1.0) == Approx(5.0));
  CHECK(g.norm() == Approx(1.0));
  CHECK(g[0] == Approx(0.6));
}

TEST_CASE("identical training runs are bit-identical") {
  const auto run = [] {
    Rng rng(77);
    const std::vector<std::size_t> widths = {3, 8, 1};
    DenseNet net = DenseNet::create(widths, Activation::leaky_relu(), Activation::identity(), rng);
    AdamState st = AdamState::zeros(net.parameter_count(), {});
    for (int it = 0; it < 30; ++it) {
      const Matrix x = random_batch(rng, 4, 3);
      const ForwardPass fp = net.forward(x);
      apply_update(net, st, net.backward(fp.tape, fp.output).flatten(), 5.0);
    }
    return net.parameters();
  };
  const Vector a = run();
  const Vector b = run();
  CHECK(a == b);
}

TEST_CASE("bce_with_logits") {
  const std::vector<double> zeros = {0.0, 0.0, 0.0};
  const std::vector<double> labels = {1.0, 0.0, 1.0};
  CHECK(bce_with_logits(zeros, labels).value == Approx(std::log(2.0)).epsilon(1e-15));
  const LossValue big = bce_with_logits(std::vector<double>{20.0}, 1.0);
  CHECK(big.value == Approx(oracle::bce(20.0, 1.0)).epsilon(1e-9));
  CHECK(big.value == Approx(2.061e-9).epsilon(1e-3));
  CHECK(bce_with_logits(std::vector<double>{-20.0}, 1.0).value == Approx(20.0).epsilon(1e-8));
  CHECK(std::isfinite(bce_with_logits(std::vector<double>{-1000.0}, 1.0).value));
  CHECK(bce_with_logits(std::vector<double>{-1000.0}, 1.0).value == Approx(1000.0));
  CHECK_THROWS_AS(bce_with_logits(std::vector<double>{}, 1.0), DomainError);
  CHECK_THROWS_AS(bce_with_logits(zeros, std::vector<double>{1.0}), DimensionError);

  Rng rng(4);
  std::vector<double> l(6), y(6);
  for (std::size_t i = 0; i < l.size(); ++i) {
    l[i] = 4.0 * rng.normal();
    y[i] = static_cast<double>(rng.index(2));
  }
  const LossValue lv = bce_with_logits(l, y);
  double expected = 0.0;
  for (std::size_t i = 0; i < l.size(); ++i) expected += oracle::bce(l[i], y[i]) / 6.0;
  CHECK(lv.value == Approx(expected).epsilon(1e-12));
  for (std::size_t i = 0; i < l.size(); ++i) {
    auto lp = l, lm = l;
    lp[i] += 1e-6;
    lm[i] -= 1e-6;
    const double numeric = (bce_with_logits(lp, y).value - bce_with_logits(lm, y).value) / 2e-6;
    CHECK(oracle::relative_error(lv.grad[i], numeric) <= 1e-5);
  }
}

TEST_CASE("gpd_reparam_sample") {
  const std::vector<double> u = {1.0 - std::pow(1.5, -2.0)};
  const ReparamSample s = gpd_reparam_sample({0.5, 1.0}, u);
  CHECK(s.values[0] == Approx(1.0).epsilon(1e-14));
  CHECK(s.values[0] == Approx(gpd_quantile(u[0], {0.5, 1.0})).epsilon(1e-14));

  const std::vector<double> tiny = {1e-15};
  CHECK(gpd_reparam_sample({0.3, 2.0}, tiny).values[0] <= 1e-13);
  CHECK_THROWS_AS(gpd_reparam_sample({0.3, 2.0}, std::vector<double>{0.0}), DomainError);
  CHECK_THROWS_AS(gpd_reparam_sample({0.3, 2.0}, std::vector<double>{1.0}), DomainError);

  Rng rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const double xi = trial % 10 == 0 ? 0.0 : -0.4 + 0.9 * rng.uniform();
    const double beta = 0.1 + 5.0 * rng.uniform();
    const std::vector<double> uu = {0.01 + 0.98 * rng.uniform()};
    const ReparamSample r = gpd_reparam_sample({xi, beta}, uu);
    CHECK(r.d_scale[0] == Approx(r.values[0] / beta).epsilon(1e-12));
    if (std::abs(xi) > 1e-3) {
      const double h = 1e-6;
      const double numeric = (gpd_reparam_sample({xi + h, beta}, uu).values[0] -
                              gpd_reparam_sample({xi - h, beta}, uu).values[0]) / (2 * h);
      CHECK(oracle::relative_error(r.d_shape[0], numeric) <= 1e-5);
    } else if (xi == 0.0) {
      const double l = std::log1p(-uu[0]);
      CHECK(r.d_shape[0] == Approx(0.5 * beta * l * l).epsilon(1e-12));
    }
  }
}

TEST_CASE("reparameterized draws match gpd_sample in distribution") {
  Rng rng(21);
  const GpdParams p{0.2, 1.3};
  std::vector<double> u(100'000);
  for (auto& x : u) x = rng.uniform_open();
  const std::vector<double> a = gpd_reparam_sample(p, u).values;
  const std::vector<double> b = gpd_sample(100'000, p, rng);
  CHECK(oracle::ks_two_sample(a, b) <= 0.01);
}

TEST_CASE("network and optimizer JSON round-trip bit for bit") {
  Rng rng(31);
  const std::vector<std::size_t> widths = {5, 7, 3};
  DenseNet net = DenseNet::create(widths, Activation::leaky_relu(0.2), Activation::softplus(), rng);
  AdamState st = AdamState::zeros(net.parameter_count(), {2e-4, 0.5, 0.999, 1e-8});
  const ForwardPass fp = net.forward(random_batch(rng, 3, 5));
  apply_update(net, st, net.backward(fp.tape, fp.output).flatten(), 5.0);

  const DenseNet back = dense_net_from_json(nlohmann::json::parse(to_json(net).dump()));
  CHECK(back.parameters() == net.parameters());
  CHECK(back.layers()[0].activation == net.layers()[0].activation);
  CHECK(back.layers()[1].activation == net.layers()[1].activation);
  const AdamState sb = adam_state_from_json(nlohmann::json::parse(to_json(st).dump()));
  CHECK(sb.step == st.step);
  CHECK(sb.first_moment == st.first_moment);
  CHECK(sb.second_moment == st.second_moment);
  CHECK(sb.config.beta1 == 0.5);

  nlohmann::json broken = to_json(net);
  broken["layers"][0]["weight"].erase(0);
  CHECK_THROWS_AS(dense_net_from_json(broken), ConfigError);
  CHECK_THROWS_AS(dense_net_from_json(nlohmann::json::object()), ConfigError);
}
