#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "eslab/common.hpp"
#include "eslab/density.hpp"

using namespace eslab;

namespace {

// 0.5 * log(2 pi e), the differential entropy of a unit Gaussian.
constexpr double kUnitGaussianEntropy = 1.4189385332046727;

GaussianDensity gauss1(double mu, double var) {
  GaussianDensity g;
  g.mean = Eigen::VectorXd::Constant(1, mu);
  g.covariance = Eigen::MatrixXd::Constant(1, 1, var);
  return g;
}

GridDensity uniform_grid(double value, long cells) {
  GridDensity g = GridDensity::zeros({{0.0, 1.0}}, {cells});
  g.values.setConstant(value);
  return g;
}

}  // namespace

TEST_CASE("normalize rescales a uniform grid to unit mass") {
  const GridDensity g = normalize(uniform_grid(2.0, 10));
  CHECK(g.values.maxCoeff() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(g.mass() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("normalize is idempotent") {
  const GridDensity once = normalize(uniform_grid(3.7, 16));
  const GridDensity twice = normalize(once);
  CHECK((twice.values - once.values).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("normalize keeps a spike as a delta-like cell") {
  GridDensity g = GridDensity::zeros({{-1.0, 1.0}}, {9});
  g.values[4] = 123.0;  // cell centered at 0
  const GridDensity n = normalize(g);
  CHECK(n.values[4] == doctest::Approx(1.0 / n.cell_volume).epsilon(1e-14));
  CHECK(n.mass() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("normalize rejects an all-zero grid") {
  CHECK_THROWS_AS(normalize(uniform_grid(0.0, 8)), DegenerateInputError);
}

TEST_CASE("gaussian entropy closed form") {
  CHECK(entropy(gauss1(0.0, 1.0)) == doctest::Approx(kUnitGaussianEntropy).epsilon(1e-12));
  // Scaling law H(sigma) = H(1) + log sigma.
  CHECK(entropy(gauss1(3.0, 4.0)) ==
        doctest::Approx(kUnitGaussianEntropy + std::log(2.0)).epsilon(1e-12));
  // Negative differential entropy is fine for concentrated states.
  CHECK(entropy(gauss1(0.0, 1e-4)) < 0.0);
}

TEST_CASE("grid quadrature reproduces the gaussian entropy") {
  const GridDensity g = grid_from_gaussian(gauss1(0.0, 1.0), {{-8.0, 8.0}}, {4096});
  CHECK(std::abs(entropy(g) - kUnitGaussianEntropy) <= 1e-4);
}

TEST_CASE("k-NN estimator agrees with the closed form at scale") {
  const ParticleEnsemble e = sample(gauss1(0.0, 1.0), 100000, 404);
  CHECK(std::abs(entropy(e) - kUnitGaussianEntropy) <= 0.02);
}

TEST_CASE("k-NN estimator is unbiased within 3 standard errors over 20 seeds") {
  const int seeds = 20;
  std::vector<double> estimates;
  for (int s = 0; s < seeds; ++s) {
    estimates.push_back(entropy(sample(gauss1(0.0, 1.0), 2000, 1000 + s)));
  }
  double mean = 0.0;
  for (double v : estimates) mean += v;
  mean /= seeds;
  double var = 0.0;
  for (double v : estimates) var += (v - mean) * (v - mean);
  var /= (seeds - 1);
  const double se = std::sqrt(var / seeds);
  CHECK(std::abs(mean - kUnitGaussianEntropy) <= 3.0 * se);
}

TEST_CASE("k-NN estimator preconditions") {
  ParticleEnsemble tiny = ParticleEnsemble::uniform(Eigen::MatrixXd::Random(3, 1));
  CHECK_THROWS_AS(entropy(tiny, 3), InputError);  // needs k + 1 particles
  ParticleEnsemble weighted = ParticleEnsemble::uniform(Eigen::MatrixXd::Random(10, 1));
  weighted.weights.setConstant(0.5 / 9.0);
  weighted.weights[0] = 0.5;
  CHECK_THROWS_AS(entropy(weighted, 3), InputError);
}

TEST_CASE("entropy is translation invariant in all three representations") {
  const double shift = 2.5;
  // Gaussian: exact.
  CHECK(entropy(gauss1(0.0, 1.3)) == doctest::Approx(entropy(gauss1(shift, 1.3))).epsilon(1e-14));
  // Particles: distances unchanged.
  const ParticleEnsemble e = sample(gauss1(0.0, 1.0), 4000, 7);
  ParticleEnsemble moved = e;
  moved.positions.array() += shift;
  CHECK(entropy(moved) == doctest::Approx(entropy(e)).epsilon(1e-9));
  // Grid: same values on a shifted domain.
  const GridDensity g = grid_from_gaussian(gauss1(0.0, 1.0), {{-8.0, 8.0}}, {1024});
  GridDensity moved_grid = g;
  moved_grid.domain = {{-8.0 + shift, 8.0 + shift}};
  CHECK(entropy(moved_grid) == doctest::Approx(entropy(g)).epsilon(1e-14));
}

TEST_CASE("expectation closed forms for gaussian x quadratic") {
  const Potential quad = Potential::quadratic(1, 1.0);
  CHECK(expectation(gauss1(0.0, 1.0), quad) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(expectation(gauss1(2.0, 1.0), quad) == doctest::Approx(2.5).epsilon(1e-14));
}

TEST_CASE("gaussian x quadratic closed form matches grid quadrature") {
  const Potential quad = Potential::quadratic(1, 1.3);
  const GridDensity g = grid_from_gaussian(gauss1(0.5, 1.21), {{-9.0, 9.0}}, {4096});
  CHECK(std::abs(expectation(g, quad) - expectation(gauss1(0.5, 1.21), quad)) <= 1e-6);
}

TEST_CASE("gaussian x double-well uses quadrature that matches gaussian moments") {
  // E[(x^2 - a)^2]/4 from moments: E x^2 = mu^2 + s2, E x^4 = mu^4 + 6 mu^2 s2 + 3 s2^2.
  const double mu = 0.7, s2 = 0.8, a = 1.0;
  const double ex2 = mu * mu + s2;
  const double ex4 = mu * mu * mu * mu + 6.0 * mu * mu * s2 + 3.0 * s2 * s2;
  const double oracle = 0.25 * (ex4 - 2.0 * a * ex2 + a * a);
  CHECK(expectation(gauss1(mu, s2), Potential::double_well(1, a)) ==
        doctest::Approx(oracle).epsilon(1e-10));
}

TEST_CASE("delta-like grid reports the potential at its spike") {
  GridDensity g = GridDensity::zeros({{-1.0, 1.0}}, {9});
  g.values[4] = 1.0;
  const GridDensity n = normalize(g);
  CHECK(expectation(n, Potential::quadratic(1, 1.0)) == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("expectation is linear in the mixture-well components") {
  const GridDensity g = grid_from_gaussian(gauss1(0.3, 1.0), {{-8.0, 8.0}}, {2048});
  std::vector<GaussianBump> bumps;
  bumps.push_back({1.2, Eigen::VectorXd::Constant(1, 0.8), 0.6});
  const Potential mixture = Potential::gaussian_mixture_well(1, 0.9, bumps);
  const Potential quad_unit = Potential::quadratic(1, 1.0);
  // Direct quadrature of the bump term alone.
  NeumaierSum bump_term;
  for (long i = 0; i < g.values.size(); ++i) {
    const double x = g.cell_center(i)[0];
    bump_term.add(g.values[i] * 1.2 * std::exp(-(x - 0.8) * (x - 0.8) / (2.0 * 0.36)));
  }
  const double expected =
      0.9 * expectation(g, quad_unit) - bump_term.value() * g.cell_volume;
  CHECK(expectation(g, mixture) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("sampling is deterministic and converges") {
  const ParticleEnsemble a = sample(gauss1(0.0, 1.0), 100000, 99);
  const ParticleEnsemble b = sample(gauss1(0.0, 1.0), 100000, 99);
  CHECK(a.positions == b.positions);  // bit-identical
  CHECK(std::abs(mean_of(a)[0]) <= 0.02);

  GaussianDensity g2;
  g2.mean = Eigen::Vector2d(1.0, -0.5);
  Eigen::Matrix2d cov;
  cov << 1.0, 0.4, 0.4, 0.7;
  g2.covariance = cov;
  const ParticleEnsemble e2 = sample(g2, 100000, 123);
  const Eigen::MatrixXd sample_cov = covariance_of(e2);
  CHECK((sample_cov - cov).norm() / cov.norm() <= 0.05);
}

TEST_CASE("grid_from_gaussian reproduces entropy and guards truncation") {
  const GridDensity g = grid_from_gaussian(gauss1(0.0, 1.0), {{-8.0, 8.0}}, {2048});
  CHECK(std::abs(entropy(g) - kUnitGaussianEntropy) <= 1e-4);
  CHECK_THROWS_AS(grid_from_gaussian(gauss1(0.0, 1.0), {{-1.0, 1.0}}, {512}), TruncationError);
  // Under-resolved: cell width above sigma / 2.
  CHECK_THROWS_AS(grid_from_gaussian(gauss1(0.0, 1e-4), {{-8.0, 8.0}}, {128}), TruncationError);
}

TEST_CASE("density validation catches bad inputs") {
  GaussianDensity g;
  g.mean = Eigen::VectorXd::Zero(2);
  g.covariance = Eigen::MatrixXd::Zero(2, 2);
  CHECK_THROWS_AS(g.validate(), InputError);  // not positive definite

  CHECK_THROWS_AS(sample(gauss1(0.0, 1.0), 1, 5), InputError);

  GridDensity bad = GridDensity::zeros({{0.0, 1.0}, {0.0, 1.0}, {0.0, 1.0}}, {4, 4, 4});
  CHECK_THROWS_AS(bad.validate(), InputError);  // d > 2
}
