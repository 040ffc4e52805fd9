#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "eslab/common.hpp"
#include "eslab/density.hpp"
#include "eslab/dynamics.hpp"
#include "eslab/rng.hpp"
#include "eslab/transport.hpp"

using namespace eslab;

namespace {

GaussianDensity gauss1(double mu, double var) {
  GaussianDensity g;
  g.mean = Eigen::VectorXd::Constant(1, mu);
  g.covariance = Eigen::MatrixXd::Constant(1, 1, var);
  return g;
}

ParticleEnsemble atoms1d(std::vector<double> xs) {
  Eigen::MatrixXd pts(static_cast<long>(xs.size()), 1);
  for (std::size_t i = 0; i < xs.size(); ++i) pts(static_cast<long>(i), 0) = xs[i];
  return ParticleEnsemble::uniform(std::move(pts));
}

// Brute-force optimal assignment cost over all permutations (uniform weights).
double brute_force_cost(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const long n = a.rows();
  std::vector<long> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0L);
  double best = std::numeric_limits<double>::infinity();
  do {
    double cost = 0.0;
    for (long i = 0; i < n; ++i) {
      cost += (a.row(i) - b.row(perm[static_cast<std::size_t>(i)])).squaredNorm();
    }
    best = std::min(best, cost);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(n);
}

// Independent 1D oracle for arbitrary weights: the monotone (merged-CDF)
// coupling is optimal for convex costs.
double monotone_coupling_cost(std::vector<double> xa, std::vector<double> wa,
                              std::vector<double> xb, std::vector<double> wb) {
  std::vector<std::size_t> ia(xa.size()), ib(xb.size());
  std::iota(ia.begin(), ia.end(), 0u);
  std::iota(ib.begin(), ib.end(), 0u);
  std::sort(ia.begin(), ia.end(), [&](std::size_t i, std::size_t j) { return xa[i] < xa[j]; });
  std::sort(ib.begin(), ib.end(), [&](std::size_t i, std::size_t j) { return xb[i] < xb[j]; });
  double cost = 0.0;
  std::size_t i = 0, j = 0;
  double ra = wa[ia[0]], rb = wb[ib[0]];
  while (i < ia.size() && j < ib.size()) {
    const double m = std::min(ra, rb);
    const double d = xa[ia[i]] - xb[ib[j]];
    cost += m * d * d;
    ra -= m;
    rb -= m;
    if (ra <= 1e-15 && ++i < ia.size()) ra = wa[ia[i]];
    if (rb <= 1e-15 && ++j < ib.size()) rb = wb[ib[j]];
  }
  return cost;
}

ParticleEnsemble random_cloud(int n, int dim, std::uint64_t seed, bool random_weights) {
  Eigen::MatrixXd pts(n, dim);
  Eigen::VectorXd w(n);
  for (int i = 0; i < n; ++i) {
    for (int a = 0; a < dim; ++a) {
      pts(i, a) = 4.0 * (uniform01(seed, RngStream::TestProbes, static_cast<std::uint64_t>(i),
                                   static_cast<std::uint64_t>(a)) -
                         0.5);
    }
    w[i] = random_weights
               ? 0.1 + uniform01(seed, RngStream::TestProbes, static_cast<std::uint64_t>(i), 9)
               : 1.0;
  }
  w /= w.sum();
  ParticleEnsemble e;
  e.positions = pts;
  e.weights = w;
  return e;
}

}  // namespace

TEST_CASE("gaussian W2: identity, translation, and dilation") {
  CHECK(w2_gaussian(gauss1(0, 1), gauss1(0, 1)) <= 1e-12);
  // Pure translation of equal covariances: W2 = |mu0 - mu1|.
  const double w_translate = w2_gaussian(gauss1(2.0, 1.0), gauss1(2.0 * std::exp(-1.0), 1.0));
  CHECK(w_translate == doctest::Approx(2.0 - 2.0 * std::exp(-1.0)).epsilon(1e-12));
  // Pure dilation: W2 = |s0 - s1|.
  CHECK(w2_gaussian(gauss1(0, 1), gauss1(0, 4)) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("gaussian W2 agrees with exact OT on quantile atoms") {
  const GaussianDensity a = gauss1(2.0, 1.0);
  const GaussianDensity b = gauss1(2.0 * std::exp(-1.0), 1.0);
  const ParticleEnsemble qa = quantize_1d(DensityState(a), 512);
  const ParticleEnsemble qb = quantize_1d(DensityState(b), 512);
  const double exact = w2_discrete_exact(qa, qb).first;
  CHECK(std::abs(exact - w2_gaussian(a, b)) <= 1e-3);

  const ParticleEnsemble qc = quantize_1d(DensityState(gauss1(0, 1)), 512);
  const ParticleEnsemble qd = quantize_1d(DensityState(gauss1(0, 4)), 512);
  CHECK(std::abs(w2_discrete_exact(qc, qd).first - 1.0) <= 1e-3);
}

TEST_CASE("gaussian W2 reduces to the per-axis form on diagonal covariances") {
  GaussianDensity a, b;
  a.mean = Eigen::Vector2d(0.0, 1.0);
  a.covariance = Eigen::Vector2d(1.0, 0.25).asDiagonal();
  b.mean = Eigen::Vector2d(2.0, -1.0);
  b.covariance = Eigen::Vector2d(4.0, 2.25).asDiagonal();
  const double expected = std::sqrt(4.0 + 4.0 + (1.0 - 2.0) * (1.0 - 2.0) + (0.5 - 1.5) * (0.5 - 1.5));
  CHECK(w2_gaussian(a, b) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(w2_gaussian(b, a) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("quantile W2: identical grids, translated grids, two-atom clouds") {
  const GridDensity g0 = grid_from_gaussian(gauss1(0.0, 1.0), {{-8.0, 8.0}}, {1024});
  CHECK(w2_1d(DensityState(g0), DensityState(g0)) <= 1e-12);

  const GridDensity g3 = grid_from_gaussian(gauss1(3.0, 1.0), {{-5.0, 11.0}}, {1024});
  CHECK(std::abs(w2_1d(DensityState(g0), DensityState(g3)) - 3.0) <= 1e-3);

  // Brute force over the two couplings of {0,1} -> {1,2}: monotone wins.
  const ParticleEnsemble pa = atoms1d({0.0, 1.0});
  const ParticleEnsemble pb = atoms1d({1.0, 2.0});
  const double monotone = 0.5 * (1.0 + 1.0);
  const double crossed = 0.5 * (4.0 + 0.0);
  CHECK(monotone < crossed);
  CHECK(w2_1d(DensityState(pa), DensityState(pb)) ==
        doctest::Approx(std::sqrt(monotone)).epsilon(1e-12));
}

TEST_CASE("quantile W2 rejects multi-dimensional input") {
  GaussianDensity g2;
  g2.mean = Eigen::Vector2d::Zero();
  g2.covariance = Eigen::Matrix2d::Identity();
  CHECK_THROWS_AS(w2_1d(DensityState(g2), DensityState(g2)), InputError);
}

TEST_CASE("exact OT: identical supports cost nothing") {
  const ParticleEnsemble a = random_cloud(12, 2, 3, false);
  const auto [dist, plan] = w2_discrete_exact(a, a);
  CHECK(dist <= 1e-9);
  plan.validate();
}

TEST_CASE("exact OT: the two-atom example has the monotone plan") {
  const auto [dist, plan] = w2_discrete_exact(atoms1d({0.0, 1.0}), atoms1d({1.0, 2.0}));
  CHECK(dist == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(plan.cost == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(plan.coupling(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(plan.coupling(1, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(plan.coupling(0, 1) <= 1e-12);
  plan.validate();
}

TEST_CASE("exact OT matches brute force on small uniform clouds") {
  for (std::uint64_t seed = 0; seed < 12; ++seed) {
    const int n = 4 + static_cast<int>(seed % 3);
    const ParticleEnsemble a = random_cloud(n, 2, 100 + seed, false);
    const ParticleEnsemble b = random_cloud(n, 2, 200 + seed, false);
    const auto [dist, plan] = w2_discrete_exact(a, b);
    plan.validate();
    CHECK(plan.cost == doctest::Approx(brute_force_cost(a.positions, b.positions)).epsilon(1e-10));
  }
}

TEST_CASE("exact OT: sorted equal-weight 1D atoms match monotonically") {
  const ParticleEnsemble a = atoms1d({-2.0, -0.5, 0.1, 1.4, 3.0});
  const ParticleEnsemble b = atoms1d({-1.0, 0.0, 0.5, 2.0, 4.0});
  const auto [dist, plan] = w2_discrete_exact(a, b);
  for (long i = 0; i < 5; ++i) {
    CHECK(plan.coupling(i, i) == doctest::Approx(0.2).epsilon(1e-12));
  }
  (void)dist;
}

TEST_CASE("exact OT matches the 1D monotone-coupling oracle for general weights") {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const int n = 5 + static_cast<int>(seed % 20);
    const int m = 7 + static_cast<int>((3 * seed) % 17);
    const ParticleEnsemble a = random_cloud(n, 1, 300 + seed, true);
    const ParticleEnsemble b = random_cloud(m, 1, 400 + seed, true);
    const auto [dist, plan] = w2_discrete_exact(a, b);
    plan.validate();
    const double oracle = monotone_coupling_cost(
        std::vector<double>(a.positions.data(), a.positions.data() + n),
        std::vector<double>(a.weights.data(), a.weights.data() + n),
        std::vector<double>(b.positions.data(), b.positions.data() + m),
        std::vector<double>(b.weights.data(), b.weights.data() + m));
    CHECK(plan.cost == doctest::Approx(oracle).epsilon(1e-9));
    (void)dist;
  }
}

TEST_CASE("exact OT refuses oversized supports") {
  Eigen::MatrixXd big = Eigen::MatrixXd::Random(513, 1);
  Eigen::VectorXd w = Eigen::VectorXd::Constant(513, 1.0 / 513.0);
  CHECK_THROWS_AS(w2_discrete_exact(big, w, big, w), ScaleError);
}

TEST_CASE("metric axioms hold on random discrete triples") {
  int violations = 0;
  for (std::uint64_t t = 0; t < 200; ++t) {
    const ParticleEnsemble a = random_cloud(6 + t % 5, 2, 1000 + t, true);
    const ParticleEnsemble b = random_cloud(5 + (t + 1) % 6, 2, 2000 + t, true);
    const ParticleEnsemble c = random_cloud(4 + (t + 2) % 7, 2, 3000 + t, true);
    const double ab = w2_discrete_exact(a, b).first;
    const double ba = w2_discrete_exact(b, a).first;
    const double bc = w2_discrete_exact(b, c).first;
    const double ac = w2_discrete_exact(a, c).first;
    if (std::abs(ab - ba) > 1e-9) ++violations;
    if (ac > ab + bc + 1e-9) ++violations;
    if (w2_discrete_exact(a, a).first > 1e-9) ++violations;
  }
  CHECK(violations == 0);
}

TEST_CASE("sinkhorn: identical supports cost at most the entropic bias") {
  // Well-separated atoms: grid spacing 1 in 2D.
  const int side = 4;
  Eigen::MatrixXd pts(side * side, 2);
  for (int i = 0; i < side; ++i) {
    for (int j = 0; j < side; ++j) {
      pts(i * side + j, 0) = i;
      pts(i * side + j, 1) = j;
    }
  }
  Eigen::VectorXd w = Eigen::VectorXd::Constant(side * side, 1.0 / (side * side));
  const double eps = 1e-3;
  const SinkhornResult res = sinkhorn(pts, w, pts, w, eps);
  CHECK(res.cost <= eps * std::log(static_cast<double>(side * side)) + 1e-6);
  CHECK(res.marginal_violation <= 1e-9);
  res.plan.validate();
}

TEST_CASE("sinkhorn approaches the exact two-atom cost") {
  const ParticleEnsemble a = atoms1d({0.0, 1.0});
  const ParticleEnsemble b = atoms1d({1.0, 2.0});
  const SinkhornResult res = sinkhorn(a.positions, a.weights, b.positions, b.weights, 1e-3);
  CHECK(std::abs(res.cost - 1.0) <= 5e-3);
}

TEST_CASE("sinkhorn cost decreases monotonically along the epsilon ladder") {
  const ParticleEnsemble a = random_cloud(24, 2, 71, true);
  const ParticleEnsemble b = random_cloud(30, 2, 72, true);
  const double exact = w2_discrete_exact(a, b).second.cost;
  double prev = std::numeric_limits<double>::infinity();
  for (double eps : {1e-1, 3e-2, 1e-2, 3e-3, 1e-3}) {
    const SinkhornResult res = sinkhorn(a.positions, a.weights, b.positions, b.weights, eps);
    CHECK(res.cost <= prev + 1e-9);
    CHECK(res.cost >= exact - 1e-9);  // entropic plans are feasible, never better
    prev = res.cost;
  }
  CHECK(std::abs(prev - exact) <= 5e-3);
}

TEST_CASE("sinkhorn reports non-convergence") {
  const ParticleEnsemble a = random_cloud(16, 2, 81, false);
  const ParticleEnsemble b = random_cloud(16, 2, 82, false);
  CHECK_THROWS_AS(sinkhorn(a.positions, a.weights, b.positions, b.weights, 1e-4, 3, 1e-12),
                  ConvergenceError);
}

TEST_CASE("mccann interpolation reproduces endpoints and the gaussian midpoint") {
  const DensityState q0(gauss1(0.0, 1.0));
  const DensityState q1(gauss1(4.0, 1.0));
  const auto start = std::get<GaussianDensity>(mccann_interpolate(q0, q1, 0.0));
  const auto end = std::get<GaussianDensity>(mccann_interpolate(q0, q1, 1.0));
  CHECK(start.mean[0] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(end.mean[0] == doctest::Approx(4.0).epsilon(1e-14));
  const auto mid = std::get<GaussianDensity>(mccann_interpolate(q0, q1, 0.5));
  CHECK(mid.mean[0] == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(mid.covariance(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("gaussian interpolation interpolates standard deviations in 1D") {
  const DensityState q0(gauss1(-1.0, 1.0));
  const DensityState q1(gauss1(3.0, 9.0));
  const auto mid = std::get<GaussianDensity>(mccann_interpolate(q0, q1, 0.25));
  CHECK(mid.mean[0] == doctest::Approx(0.0).epsilon(1e-13));
  const double expected_sd = 0.75 * 1.0 + 0.25 * 3.0;
  CHECK(std::sqrt(mid.covariance(0, 0)) == doctest::Approx(expected_sd).epsilon(1e-12));
}

TEST_CASE("mccann interpolation is a constant-speed path") {
  const DensityState q0(gauss1(0.0, 1.0));
  const DensityState q1(gauss1(4.0, 2.25));
  const double total = w2_gaussian(gauss1(0.0, 1.0), gauss1(4.0, 2.25));
  const auto mid = std::get<GaussianDensity>(mccann_interpolate(q0, q1, 0.5));
  CHECK(std::abs(w2_gaussian(gauss1(0.0, 1.0), mid) - 0.5 * total) <= 1e-6);
  const auto quarter = std::get<GaussianDensity>(mccann_interpolate(q0, q1, 0.25));
  CHECK(std::abs(w2_gaussian(gauss1(0.0, 1.0), quarter) - 0.25 * total) <= 1e-6);
}

TEST_CASE("grid quantile interpolation tracks the gaussian geodesic") {
  const GridDensity g0 = grid_from_gaussian(gauss1(0.0, 1.0), {{-8.0, 8.0}}, {512});
  const GridDensity g1 = grid_from_gaussian(gauss1(3.0, 2.25), {{-6.0, 12.0}}, {512});
  const auto mid = std::get<GridDensity>(
      mccann_interpolate(DensityState(g0), DensityState(g1), 0.5));
  CHECK(std::abs(mid.mass() - 1.0) <= 1e-9);
  CHECK(std::abs(mean_of(mid)[0] - 1.5) <= 1e-3);
  const double expected_sd = 0.5 * 1.0 + 0.5 * 1.5;
  CHECK(std::abs(std::sqrt(covariance_of(mid)(0, 0)) - expected_sd) <= 1e-3);
}

TEST_CASE("displacement of a discrete plan moves atoms linearly") {
  const ParticleEnsemble a = atoms1d({0.0, 1.0});
  const ParticleEnsemble b = atoms1d({1.0, 2.0});
  const auto cloud = std::get<ParticleEnsemble>(
      mccann_interpolate(DensityState(a), DensityState(b), 0.5));
  CHECK(cloud.count() == 2);
  std::vector<double> xs = {cloud.positions(0, 0), cloud.positions(1, 0)};
  std::sort(xs.begin(), xs.end());
  CHECK(xs[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(xs[1] == doctest::Approx(1.5).epsilon(1e-12));
}

TEST_CASE("geodesic action equals W2^2 in closed form") {
  const GaussianDensity a = gauss1(2.0, 1.0);
  const GaussianDensity b = gauss1(2.0 * std::exp(-1.0), 1.0);
  const GeodesicPath path = make_geodesic(DensityState(a), DensityState(b));
  const double w2 = w2_gaussian(a, b);
  CHECK(std::abs(path_action(path) - w2 * w2) <= 1e-9);
  CHECK(w2 * w2 == doctest::Approx(1.5983056035749122).epsilon(1e-12));
}

TEST_CASE("fokker-planck action exceeds the geodesic action between its endpoints") {
  const Potential quad = Potential::quadratic(1, 1.0);
  Schedule sched{1.0, 2048, 1};
  const TrajectoryRecord traj = ou_closed_form_trajectory(gauss1(2.0, 1.0), quad, 1.0, sched);
  const double action = path_action(traj);
  const double sigma_true = 2.0 * (1.0 - std::exp(-2.0));
  CHECK(action == doctest::Approx(sigma_true).epsilon(1e-5));
  const double w2 = w2_gaussian(gauss1(2.0, 1.0), gauss1(2.0 * std::exp(-1.0), 1.0));
  CHECK(action >= w2 * w2);
}

TEST_CASE("stationary path has zero action; short records are rejected") {
  const Potential quad = Potential::quadratic(1, 1.0);
  Schedule sched{1.0, 16, 1};
  const TrajectoryRecord traj = ou_closed_form_trajectory(gauss1(0.0, 1.0), quad, 1.0, sched);
  CHECK(path_action(traj) == 0.0);

  Schedule coarse{1.0, 1, 1};
  const TrajectoryRecord two = ou_closed_form_trajectory(gauss1(1.0, 1.0), quad, 1.0, coarse);
  CHECK_THROWS_AS(path_action(two), ResolutionError);
}

TEST_CASE("backend agreement on random gaussian pairs") {
  for (std::uint64_t t = 0; t < 20; ++t) {
    const double mu0 = -3.0 + 6.0 * uniform01(t, RngStream::TestProbes, 0, 0);
    const double mu1 = -3.0 + 6.0 * uniform01(t, RngStream::TestProbes, 0, 1);
    const double v0 = 0.25 + 3.75 * uniform01(t, RngStream::TestProbes, 0, 2);
    const double v1 = 0.25 + 3.75 * uniform01(t, RngStream::TestProbes, 0, 3);
    const GaussianDensity a = gauss1(mu0, v0);
    const GaussianDensity b = gauss1(mu1, v1);

    const double closed = w2_gaussian(a, b);
    const double quantile = w2_1d(DensityState(a), DensityState(b), 16384);
    const double exact =
        w2_discrete_exact(quantize_1d(DensityState(a), 512), quantize_1d(DensityState(b), 512))
            .first;
    CHECK(std::abs(closed - quantile) <= 1e-3);
    CHECK(std::abs(closed - exact) <= 1e-3);
    CHECK(std::abs(quantile - exact) <= 1e-3);
  }
}

TEST_CASE("w2_auto picks the highest-precision applicable backend") {
  CHECK(w2_auto(DensityState(gauss1(0, 1)), DensityState(gauss1(1, 1))).second == "gaussian");
  const GridDensity g = grid_from_gaussian(gauss1(0.0, 1.0), {{-8.0, 8.0}}, {512});
  CHECK(w2_auto(DensityState(g), DensityState(g)).second == "quantile");
  const ParticleEnsemble a = random_cloud(10, 2, 5, false);
  CHECK(w2_auto(DensityState(a), DensityState(a)).second == "exact");
}

TEST_CASE("quantization preserves the mean and approximates the source") {
  const ParticleEnsemble q = quantize_1d(DensityState(gauss1(1.0, 4.0)), 256);
  CHECK(std::abs(mean_of(q)[0] - 1.0) <= 1e-10);
  CHECK(std::abs(covariance_of(q)(0, 0) - 4.0) <= 0.05);
}
