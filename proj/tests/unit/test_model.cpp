#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "core/model.hpp"
#include "core/random.hpp"
#include "test_support.hpp"

using namespace attrivae;
using nn::Matrix;

namespace {

template <typename T>
nn::FeatureMap<T> random_batch(const ModelConfig& c, int n, std::uint64_t seed) {
  Rng rng(seed);
  nn::FeatureMap<T> x(1, n, c.image_shape);
  for (auto& v : x.data) v = static_cast<T>(rng.uniform());
  return x;
}

}  // namespace

TEST_CASE("reparameterize closed forms") {
  Matrix<double> mu(2, 1), lv(2, 1), noise(2, 1);
  mu << 1.0, -3.0;
  lv << std::log(4.0), 0.7;
  noise << 0.0, 0.0;
  CHECK(reparameterize(mu, lv, noise) == mu);
  noise << 0.5, 0.0;
  CHECK(reparameterize(mu, lv, noise)(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
  Matrix<double> zero = Matrix<double>::Zero(2, 1), n2(2, 1);
  n2 << 0.3, -1.2;
  CHECK(reparameterize(zero, zero, n2) == n2);
}

TEST_CASE("default architecture encodes to 64 latent dimensions") {
  ModelConfig c;
  Model<float> m(c);
  m.init_weights(5);
  const auto x = random_batch<float>(c, 2, 1);
  const auto lat = m.encode(x);
  CHECK(lat.mu.rows() == 64);
  CHECK(lat.logvar.rows() == 64);
  CHECK(lat.mu.cols() == 2);
  CHECK(lat.mu.allFinite());
  CHECK(lat.logvar.allFinite());
  CHECK(m.feature_extent() == nn::Extent3{4, 4, 1});
  const auto again = m.encode(x);
  CHECK(again.mu == lat.mu);
  CHECK(again.logvar == lat.logvar);
}

TEST_CASE("decoder and classifier outputs are probabilities of the right shape") {
  const auto c = test_support::tiny_config();
  Model<float> m(c);
  m.init_weights(9);
  Rng rng(2);
  Matrix<float> z(c.latent_dim, 4);
  for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] = static_cast<float>(3.0 * rng.normal());
  const auto x = m.decode(z);
  CHECK(x.extent == c.image_shape);
  CHECK(x.batch == 4);
  CHECK(x.channels == 1);
  for (float v : x.data) {
    CHECK(v > 0.0f);
    CHECK(v < 1.0f);
  }
  const auto y = m.classify(z);
  CHECK(y.cols() == 4);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    CHECK(y.data()[i] > 0.0f);
    CHECK(y.data()[i] < 1.0f);
  }
  CHECK(m.classify(z) == y);
}

TEST_CASE("Xavier initialization") {
  SUBCASE("deterministic per seed") {
    const auto c = test_support::tiny_config();
    Model<float> a(c), b(c), d(c);
    a.init_weights(42);
    b.init_weights(42);
    d.init_weights(43);
    const auto pa = a.parameters(), pb = b.parameters(), pd = d.parameters();
    bool any_diff = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
      CHECK(pa[i]->value == pb[i]->value);
      any_diff = any_diff || pa[i]->value != pd[i]->value;
    }
    CHECK(any_diff);
  }
  SUBCASE("bound and variance") {
    Rng rng(1);
    nn::Param<double> p("w", 100 * 100, nn::Init::xavier_uniform, 100, 100);
    p.initialize(rng);
    const double bound = std::sqrt(6.0 / 200.0);
    for (double v : p.value) CHECK(std::abs(v) <= bound);
    nn::Param<double> q("w", 256 * 256, nn::Init::xavier_uniform, 256, 256);
    q.initialize(rng);
    const double mean = std::accumulate(q.value.begin(), q.value.end(), 0.0) / q.value.size();
    double var = 0;
    for (double v : q.value) var += (v - mean) * (v - mean);
    var /= q.value.size();
    CHECK(std::abs(var - 2.0 / 512.0) <= 0.1 * 2.0 / 512.0);
  }
}

TEST_CASE("ModelConfig validation") {
  ModelConfig c;
  c.latent_dim = 300;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = ModelConfig{};
  c.conv_channels[2] = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("float and double models agree after cast") {
  const auto c = test_support::tiny_config();
  Model<float> m(c);
  m.init_weights(4);
  const Model<double> md = m.cast<double>();
  const auto lf = m.encode(random_batch<float>(c, 2, 8));
  const auto ld = md.encode(random_batch<double>(c, 2, 8));
  CHECK((lf.mu.cast<double>() - ld.mu).cwiseAbs().maxCoeff() < 1e-4);
}

namespace {

// Sampled entries of every parameter: analytic gradient vs central differences
// of a scalar objective recomputed from scratch.
void check_parameter_gradients(Model<double>& m, const std::function<double()>& objective,
                               const std::function<void()>& backward, double tol) {
  m.zero_grad();
  backward();
  std::vector<double> analytic, numeric;
  for (auto* p : m.parameters()) {
    const std::size_t n = p->value.size();
    for (std::size_t k : {std::size_t{0}, n / 3, n - 1}) {
      const double keep = p->value[k];
      const double h = 1e-6;
      p->value[k] = keep + h;
      const double up = objective();
      p->value[k] = keep - h;
      const double down = objective();
      p->value[k] = keep;
      analytic.push_back(p->grad[k]);
      numeric.push_back((up - down) / (2 * h));
    }
  }
  CHECK(test_support::max_rel_error(analytic, numeric) <= tol);
}

}  // namespace

TEST_CASE("model backward passes match central differences") {
  const auto c = test_support::tiny_config();
  Model<float> mf(c);
  mf.init_weights(21);
  Model<double> m = mf.cast<double>();
  const int n = 3;
  const auto x = random_batch<double>(c, n, 5);
  Rng rng(6);
  Matrix<double> cmu(c.latent_dim, n), clv(c.latent_dim, n), z(c.latent_dim, n);
  for (Eigen::Index i = 0; i < cmu.size(); ++i) {
    cmu.data()[i] = rng.normal();
    clv.data()[i] = rng.normal();
    z.data()[i] = rng.normal();
  }

  SUBCASE("encoder") {
    auto objective = [&] {
      typename Model<double>::EncoderTape tape;
      const auto lat = m.encode(x, nn::Mode::train, tape);
      return (lat.mu.array() * cmu.array()).sum() + (lat.logvar.array() * clv.array()).sum();
    };
    auto backward = [&] {
      typename Model<double>::EncoderTape tape;
      m.encode(x, nn::Mode::train, tape);
      m.encode_backward(tape, cmu, clv);
    };
    check_parameter_gradients(m, objective, backward, 1e-4);
  }

  SUBCASE("decoder, including the latent input") {
    nn::FeatureMap<double> cx(1, n, c.image_shape);
    for (auto& v : cx.data) v = rng.normal();
    auto objective_at = [&](const Matrix<double>& zz) {
      typename Model<double>::DecoderTape tape;
      const auto out = m.decode(zz, nn::Mode::train, tape);
      double s = 0;
      for (std::size_t i = 0; i < out.data.size(); ++i) s += out.data[i] * cx.data[i];
      return s;
    };
    Matrix<double> gz;
    auto backward = [&] {
      typename Model<double>::DecoderTape tape;
      m.decode(z, nn::Mode::train, tape);
      gz = m.decode_backward(tape, cx);
    };
    check_parameter_gradients(m, [&] { return objective_at(z); }, backward, 1e-4);
    auto f = [&](const std::vector<double>& v) {
      return objective_at(Matrix<double>(Eigen::Map<const Matrix<double>>(v.data(), z.rows(), z.cols())));
    };
    CHECK(test_support::max_rel_error(test_support::to_vector(gz),
                                      test_support::numeric_gradient(f, test_support::to_vector(z), 1e-6)) <= 1e-4);
  }

  SUBCASE("classifier") {
    Matrix<double> cy(1, n);
    cy << 0.3, -1.0, 2.0;
    auto objective = [&] {
      typename Model<double>::ClassifierTape tape;
      return (m.classify(z, tape).array() * cy.array()).sum();
    };
    auto backward = [&] {
      typename Model<double>::ClassifierTape tape;
      m.classify(z, tape);
      m.classify_backward(tape, cy);
    };
    check_parameter_gradients(m, objective, backward, 1e-4);
  }
}
