#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "eslab/common.hpp"
#include "eslab/potential.hpp"
#include "eslab/rng.hpp"

using namespace eslab;

namespace {

Eigen::VectorXd point1(double x) { return Eigen::VectorXd::Constant(1, x); }

// Independent oracle for gradients: plain central difference of value().
double central_difference(const Potential& p, double x, double h) {
  return (p.value(point1(x + h)) - p.value(point1(x - h))) / (2.0 * h);
}

std::vector<Eigen::VectorXd> random_probes(int dim, int count, std::uint64_t seed) {
  std::vector<Eigen::VectorXd> probes;
  for (int i = 0; i < count; ++i) {
    Eigen::VectorXd x(dim);
    for (int a = 0; a < dim; ++a) {
      x[a] = -3.0 + 6.0 * uniform01(seed, RngStream::TestProbes,
                                    static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(a));
    }
    probes.push_back(x);
  }
  return probes;
}

Potential sample_mixture_well(int dim) {
  std::vector<GaussianBump> bumps;
  bumps.push_back({1.5, Eigen::VectorXd::Constant(dim, 1.0), 0.7});
  bumps.push_back({0.8, Eigen::VectorXd::Constant(dim, -1.2), 0.5});
  return Potential::gaussian_mixture_well(dim, 0.6, std::move(bumps));
}

}  // namespace

TEST_CASE("quadratic values and gradients") {
  const Potential p = Potential::quadratic(1, 1.0);
  CHECK(p.value(point1(0.0)) == 0.0);
  CHECK(p.value(point1(2.0)) == 2.0);
  CHECK(p.gradient(point1(2.0))[0] == 2.0);
}

TEST_CASE("double well values and gradients") {
  const Potential p = Potential::double_well(1, 1.0);
  CHECK(p.value(point1(1.0)) == 0.0);  // well bottom
  CHECK(p.gradient(point1(0.0))[0] == 0.0);
  // Oracle value at theta = 2: central difference of (theta^2 - 1)^2 / 4.
  const double oracle = central_difference(p, 2.0, 1e-5);
  CHECK(oracle == doctest::Approx(6.0).epsilon(1e-6));
  CHECK(p.gradient(point1(2.0))[0] == doctest::Approx(oracle).epsilon(1e-8));
}

TEST_CASE("mixture well gradient matches the finite-difference oracle pointwise") {
  const Potential p = sample_mixture_well(1);
  for (double x : {-2.0, -0.3, 0.0, 0.9, 1.4, 2.7}) {
    const double oracle = central_difference(p, x, 1e-6);
    CHECK(p.gradient(point1(x))[0] == doctest::Approx(oracle).epsilon(1e-7));
  }
}

TEST_CASE("gradient_check over random probes") {
  const double h = 1e-4;
  CHECK(gradient_check(Potential::quadratic(2, 1.7), random_probes(2, 100, 11), h) <= 1e-6);
  CHECK(gradient_check(Potential::double_well(2, 1.0), random_probes(2, 100, 12), h) <= 1e-5);
  CHECK(gradient_check(sample_mixture_well(2), random_probes(2, 100, 13), h) <= 1e-5);
}

TEST_CASE("dimension mismatch raises an input error") {
  const Potential p = Potential::quadratic(2, 1.0);
  CHECK_THROWS_AS(p.value(point1(1.0)), InputError);
  CHECK_THROWS_AS(p.gradient(point1(1.0)), InputError);
}

TEST_CASE("invalid parameters are rejected") {
  CHECK_THROWS_AS(Potential::quadratic(1, 0.0), InputError);
  CHECK_THROWS_AS(Potential::double_well(1, -1.0), InputError);
  CHECK_THROWS_AS(Potential::gaussian_mixture_well(1, 0.0, {}), InputError);
  CHECK_THROWS_AS(
      Potential::gaussian_mixture_well(1, 1.0, {{-1.0, Eigen::VectorXd::Zero(1), 1.0}}),
      InputError);
  CHECK_THROWS_AS(gradient_check(Potential::quadratic(1, 1.0), {}, 0.0), InputError);
}

TEST_CASE("reported lower bound sits below a dense grid scan") {
  const std::vector<Potential> catalog = {Potential::quadratic(1, 2.0),
                                          Potential::double_well(1, 1.5), sample_mixture_well(1)};
  for (const Potential& p : catalog) {
    double scan_min = std::numeric_limits<double>::infinity();
    for (int i = 0; i <= 4000; ++i) {
      scan_min = std::min(scan_min, p.value(point1(-4.0 + 8.0 * i / 4000.0)));
    }
    CHECK(p.lower_bound() <= scan_min + 1e-12);
  }
}

TEST_CASE("confinement: values blow up along rays") {
  for (const Potential& p :
       {Potential::quadratic(2, 0.5), Potential::double_well(2, 1.0), sample_mixture_well(2)}) {
    const Eigen::VectorXd dir = Eigen::VectorXd::Constant(2, 1.0).normalized();
    double prev = p.value(10.0 * dir);
    for (double r : {30.0, 100.0, 300.0}) {
      const double v = p.value(r * dir);
      CHECK(v > prev);
      prev = v;
    }
    CHECK(prev > 1e3);
  }
}
