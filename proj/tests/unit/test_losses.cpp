#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "core/losses.hpp"
#include "core/random.hpp"
#include "test_support.hpp"

using namespace attrivae;
using nn::Matrix;

TEST_CASE("recon_loss analytic cases") {
  const std::vector<double> half(8, 0.5), ones(8, 1.0);
  CHECK(recon_loss<double>(half, half, 1, ReconKind::bce) == doctest::Approx(8 * std::numbers::ln2).epsilon(1e-12));
  CHECK(recon_loss<double>(half, ones, 1, ReconKind::bce) == doctest::Approx(5.545177444479562).epsilon(1e-12));
  CHECK(std::abs(recon_loss<double>(half, ones, 1, ReconKind::bce) - 8 * std::numbers::ln2) < 1e-9);
  const std::vector<double> x{0.1, 0.7, 0.3, 0.9};
  CHECK(recon_loss<double>(x, x, 1, ReconKind::mse) == 0.0);
  // Two samples of four voxels: batch mean of per-sample sums.
  CHECK(recon_loss<double>(half, half, 2, ReconKind::bce) == doctest::Approx(4 * std::numbers::ln2));
}

TEST_CASE("kl_loss closed form") {
  Matrix<double> mu = Matrix<double>::Zero(4, 3), lv = Matrix<double>::Zero(4, 3);
  CHECK(kl_loss(mu, lv) == 0.0);
  Matrix<double> mu1 = Matrix<double>::Zero(4, 1), lv1 = Matrix<double>::Zero(4, 1);
  mu1(0, 0) = 1.0;
  CHECK(kl_loss(mu1, lv1) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("kl_loss matches a Monte-Carlo estimate") {
  Rng rng(11);
  const int d = 3;
  Matrix<double> mu(d, 1), lv(d, 1);
  for (int i = 0; i < d; ++i) {
    mu(i, 0) = rng.uniform(-1.0, 1.0);
    lv(i, 0) = rng.uniform(-1.0, 0.5);
  }
  const double closed = kl_loss(mu, lv);
  // KL(q||p) = E_q[log q(z) - log p(z)].
  const int draws = 1000000;
  double acc = 0.0;
  for (int s = 0; s < draws; ++s) {
    for (int i = 0; i < d; ++i) {
      const double sigma = std::exp(0.5 * lv(i, 0));
      const double e = rng.normal();
      const double z = mu(i, 0) + sigma * e;
      acc += -0.5 * e * e - std::log(sigma) + 0.5 * z * z;
    }
  }
  const double mc = acc / draws;
  CHECK(std::abs(mc - closed) <= 0.01 * closed);
}

namespace {

double ar_two(double z0, double z1, double a0, double a1, double delta) {
  Matrix<double> z(1, 2);
  z << z0, z1;
  Matrix<double> a(2, 1);
  a << a0, a1;
  AttributeMapping m;
  m.entries = {{"a", 0}};
  return attr_reg_loss(z, a, m, delta);
}

}  // namespace

TEST_CASE("attr_reg_loss hand oracles") {
  CHECK(ar_two(0, 10, 0, 1, 10) <= 1e-3);
  CHECK(ar_two(0, 10, 1, 0, 10) == 1.0);
  CHECK(ar_two(3, 3, 0.5, 0.5, 10) == 0.0);
}

TEST_CASE("attr_reg_loss sums over mapped attributes on their dimensions") {
  Matrix<double> z = Matrix<double>::Zero(3, 2);
  z(2, 1) = 10.0;  // dim 2 increases with attribute 1
  z(0, 0) = 10.0;  // dim 0 decreases with attribute 0 -> anti-monotone
  Matrix<double> a(2, 2);
  a << 0, 0, 1, 1;
  AttributeMapping m;
  m.entries = {{"first", 0}, {"second", 2}};
  CHECK(attr_reg_loss(z, a, m, 10.0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("mlp_loss analytic cases") {
  Matrix<double> y(1, 2);
  y << 0.5, 0.5;
  const std::vector<int> l01{0, 1};
  CHECK(mlp_loss(y, std::span<const int>(l01)) == doctest::Approx(std::numbers::ln2).epsilon(1e-12));
  Matrix<double> y2(1, 2);
  y2 << 0.9, 0.1;
  const std::vector<int> l10{1, 0};
  CHECK(std::abs(mlp_loss(y2, std::span<const int>(l10)) + std::log(0.9)) < 1e-9);
  double prev = 1e9;
  for (double p : {0.6, 0.8, 0.95, 0.999}) {
    Matrix<double> yp(1, 1);
    yp << p;
    const std::vector<int> one{1};
    const double l = mlp_loss(yp, std::span<const int>(one));
    CHECK(l < prev);
    prev = l;
  }
}

namespace {

struct TotalFixture {
  nn::FeatureMap<double> x{1, 2, {2, 2, 1}}, x_hat{1, 2, {2, 2, 1}};
  Matrix<double> mu = Matrix<double>::Zero(3, 2), lv = Matrix<double>::Zero(3, 2), z = Matrix<double>::Zero(3, 2);
  Matrix<double> y = Matrix<double>::Constant(1, 2, 0.3);
  std::vector<int> labels{0, 1};
  Matrix<double> attrs{2, 1};
  AttributeMapping mapping;

  TotalFixture() {
    for (std::size_t i = 0; i < x.data.size(); ++i) {
      x.data[i] = (i % 3) / 3.0;
      x_hat.data[i] = 0.2 + 0.1 * static_cast<double>(i % 4);
    }
    mu(0, 0) = 1.0;
    lv(1, 1) = -0.5;
    z(1, 0) = 0.2;
    z(1, 1) = -0.3;
    attrs << 0.0, 1.0;
    mapping.entries = {{"a", 1}};
  }

  LossInputs<double> inputs() const {
    LossInputs<double> in;
    in.x = &x;
    in.x_hat = &x_hat;
    in.mu = &mu;
    in.logvar = &lv;
    in.z = &z;
    in.y_pred = &y;
    in.labels = labels;
    in.attrs = &attrs;
    in.mapping = &mapping;
    return in;
  }
};

}  // namespace

TEST_CASE("total_loss honours the variant toggles") {
  TotalFixture f;
  LossWeights w{2.0, 200.0, 10.0};
  const auto off = total_loss(f.inputs(), w, {false, false, false});
  CHECK(off.total == doctest::Approx(off.recon + off.kl).epsilon(1e-15));
  CHECK(off.mlp == 0.0);
  CHECK(off.ar == 0.0);
  const auto beta = total_loss(f.inputs(), w, {true, false, false});
  CHECK(beta.total == doctest::Approx(beta.recon + 2.0 * beta.kl).epsilon(1e-15));
  const auto all = total_loss(f.inputs(), w, {true, true, true});
  CHECK(all.mlp > 0.0);
  CHECK(all.ar > 0.0);
  CHECK(std::abs(all.total - (all.recon + 2.0 * all.kl + all.mlp + 200.0 * all.ar)) <= 1e-9);
}

TEST_CASE("variants map to toggles") {
  CHECK(toggles_for(Variant::attri_vae) == VariantToggles{true, true, true});
  CHECK(toggles_for(Variant::vae) == VariantToggles{false, false, false});
  CHECK(toggles_for(Variant::beta_vae) == VariantToggles{true, false, false});
  CHECK(toggles_for(Variant::ar_vae) == VariantToggles{true, false, true});
  CHECK(effective_beta({2.0, 200.0, 10.0}, toggles_for(Variant::vae)) == 1.0);
  CHECK(parse_variant("beta_vae") == Variant::beta_vae);
  CHECK_THROWS(parse_variant("gan"));
}

TEST_CASE("AttributeMapping validation") {
  AttributeMapping m;
  m.entries = {{"a", 0}, {"b", 0}};
  CHECK_THROWS(m.validate(4));
  m.entries = {{"a", 0}, {"b", 4}};
  CHECK_THROWS(m.validate(4));
  m.entries = {{"a", 0}, {"b", 3}};
  CHECK_NOTHROW(m.validate(4));
  CHECK(m.dim_of("b") == 3);
  CHECK_FALSE(m.dim_of("c").has_value());
}

TEST_CASE("loss gradients match central differences") {
  Rng rng(3);
  const double h = 1e-6;

  SUBCASE("recon bce and mse") {
    for (ReconKind kind : {ReconKind::bce, ReconKind::mse}) {
      std::vector<double> xh(12), x(12), g(12);
      for (int i = 0; i < 12; ++i) {
        xh[i] = rng.uniform(0.05, 0.95);
        x[i] = rng.uniform(0.0, 1.0);
      }
      recon_loss<double>(xh, x, 3, kind, g);
      auto f = [&](const std::vector<double>& v) { return recon_loss<double>(v, x, 3, kind); };
      CHECK(test_support::max_rel_error(g, test_support::numeric_gradient(f, xh, h)) <= 1e-4);
    }
  }

  SUBCASE("kl") {
    Matrix<double> mu(4, 3), lv(4, 3), gmu, glv;
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
      mu.data()[i] = rng.uniform(-1, 1);
      lv.data()[i] = rng.uniform(-1, 1);
    }
    kl_loss(mu, lv, &gmu, &glv);
    auto fmu = [&](const std::vector<double>& v) {
      return kl_loss(Matrix<double>(Eigen::Map<const Matrix<double>>(v.data(), 4, 3)), lv);
    };
    auto flv = [&](const std::vector<double>& v) {
      return kl_loss(mu, Matrix<double>(Eigen::Map<const Matrix<double>>(v.data(), 4, 3)));
    };
    CHECK(test_support::max_rel_error(test_support::to_vector(gmu),
                                      test_support::numeric_gradient(fmu, test_support::to_vector(mu), h)) <= 1e-4);
    CHECK(test_support::max_rel_error(test_support::to_vector(glv),
                                      test_support::numeric_gradient(flv, test_support::to_vector(lv), h)) <= 1e-4);
  }

  SUBCASE("attribute regularization") {
    const int n = 6;
    Matrix<double> z(3, n), a(n, 2), gz;
    for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = rng.uniform(-1, 1);
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.uniform(0, 1);
    AttributeMapping m;
    m.entries = {{"p", 2}, {"q", 0}};
    attr_reg_loss(z, a, m, 1.5, &gz);
    auto f = [&](const std::vector<double>& v) {
      return attr_reg_loss(Matrix<double>(Eigen::Map<const Matrix<double>>(v.data(), 3, n)), a, m, 1.5);
    };
    CHECK(test_support::max_rel_error(test_support::to_vector(gz),
                                      test_support::numeric_gradient(f, test_support::to_vector(z), h)) <= 1e-4);
  }

  SUBCASE("classifier bce") {
    Matrix<double> y(1, 5), g;
    for (int i = 0; i < 5; ++i) y(0, i) = rng.uniform(0.05, 0.95);
    const std::vector<int> labels{0, 1, 1, 0, 1};
    mlp_loss(y, std::span<const int>(labels), &g);
    auto f = [&](const std::vector<double>& v) {
      return mlp_loss(Matrix<double>(Eigen::Map<const Matrix<double>>(v.data(), 1, 5)), std::span<const int>(labels));
    };
    CHECK(test_support::max_rel_error(test_support::to_vector(g),
                                      test_support::numeric_gradient(f, test_support::to_vector(y), h)) <= 1e-4);
  }
}
