#include "eslab/transport.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "eslab/common.hpp"

namespace eslab {

namespace {

constexpr long kExactSolverLimit = 512;

Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& m, double eigen_floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd lam = es.eigenvalues();
  for (long i = 0; i < lam.size(); ++i) lam[i] = std::sqrt(std::max(lam[i], eigen_floor));
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd symmetric_inv_sqrt(const Eigen::MatrixXd& m, double eigen_floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  Eigen::VectorXd lam = es.eigenvalues();
  for (long i = 0; i < lam.size(); ++i) lam[i] = 1.0 / std::sqrt(std::max(lam[i], eigen_floor));
  return es.eigenvectors() * lam.asDiagonal() * es.eigenvectors().transpose();
}

// Monge map matrix A with A Sigma0 A = Sigma1; x -> mu1 + A (x - mu0).
Eigen::MatrixXd bures_map(const GaussianDensity& g0, const GaussianDensity& g1) {
  constexpr double kFloor = 1e-14;
  const Eigen::MatrixXd root0 = symmetric_sqrt(g0.covariance, kFloor);
  const Eigen::MatrixXd inv_root0 = symmetric_inv_sqrt(g0.covariance, kFloor);
  const Eigen::MatrixXd middle = symmetric_sqrt(root0 * g1.covariance * root0, 0.0);
  return inv_root0 * middle * inv_root0;
}

// Inverse standard normal CDF: Acklam's rational approximation plus one
// Newton step against erf, giving ~1e-15 relative accuracy.
double norm_quantile(double u) {
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (u < plow) {
    const double q = std::sqrt(-2.0 * std::log(u));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (u <= 1.0 - plow) {
    const double q = u - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - u));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double err = 0.5 * std::erfc(-x / std::sqrt(2.0)) - u;
  x -= err * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  return x;
}

double norm_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

// Quantile function of a 1D state.
class Quantile1D {
public:
  static Quantile1D from_state(const DensityState& q) {
    Quantile1D fn;
    if (const auto* grid = std::get_if<GridDensity>(&q)) {
      grid->validate();
      if (grid->dim() != 1) throw InputError("quantile: grid must be one-dimensional");
      const GridDensity g = normalize(*grid);
      fn.kind_ = Kind::Grid;
      const long n = g.cells[0];
      fn.grid_lo_ = g.domain[0].first;
      fn.grid_dx_ = g.cell_width(0);
      fn.density_ = std::vector<double>(g.values.data(), g.values.data() + n);
      fn.cum_.assign(static_cast<std::size_t>(n) + 1, 0.0);
      NeumaierSum acc;
      for (long i = 0; i < n; ++i) {
        acc.add(g.values[i] * g.cell_volume);
        fn.cum_[static_cast<std::size_t>(i) + 1] = acc.value();
      }
      fn.cum_.back() = 1.0;
      return fn;
    }
    if (const auto* pts = std::get_if<ParticleEnsemble>(&q)) {
      pts->validate();
      if (pts->dim() != 1) throw InputError("quantile: particles must be one-dimensional");
      fn.kind_ = Kind::Atoms;
      const long n = pts->count();
      std::vector<long> order(static_cast<std::size_t>(n));
      std::iota(order.begin(), order.end(), 0L);
      std::sort(order.begin(), order.end(), [&](long i, long j) {
        return pts->positions(i, 0) < pts->positions(j, 0);
      });
      fn.atoms_.reserve(order.size());
      fn.cum_.reserve(order.size());
      NeumaierSum acc;
      for (long idx : order) {
        acc.add(pts->weights[idx]);
        fn.atoms_.push_back(pts->positions(idx, 0));
        fn.cum_.push_back(acc.value());
      }
      fn.cum_.back() = 1.0;
      return fn;
    }
    const auto& g = std::get<GaussianDensity>(q);
    g.validate();
    if (g.dim() != 1) throw InputError("quantile: Gaussian must be one-dimensional");
    fn.kind_ = Kind::Gaussian;
    fn.gauss_mu_ = g.mean[0];
    fn.gauss_sigma_ = std::sqrt(g.covariance(0, 0));
    return fn;
  }

  double operator()(double u) const {
    switch (kind_) {
      case Kind::Gaussian:
        return gauss_mu_ + gauss_sigma_ * norm_quantile(u);
      case Kind::Atoms: {
        const auto it = std::lower_bound(cum_.begin(), cum_.end(), u);
        const std::size_t j = std::min<std::size_t>(
            static_cast<std::size_t>(it - cum_.begin()), atoms_.size() - 1);
        return atoms_[j];
      }
      case Kind::Grid: {
        const auto it = std::lower_bound(cum_.begin() + 1, cum_.end(), u);
        const std::size_t cell = std::min<std::size_t>(
            static_cast<std::size_t>(it - cum_.begin()) - 1, density_.size() - 1);
        const double lo = grid_lo_ + static_cast<double>(cell) * grid_dx_;
        const double slope = density_[cell];
        if (slope <= 0.0) return lo;
        return lo + (u - cum_[cell]) / slope;
      }
    }
    return 0.0;
  }

private:
  enum class Kind { Gaussian, Atoms, Grid };
  Kind kind_ = Kind::Gaussian;
  double gauss_mu_ = 0.0, gauss_sigma_ = 1.0;
  std::vector<double> atoms_;
  std::vector<double> density_;
  std::vector<double> cum_;
  double grid_lo_ = 0.0, grid_dx_ = 1.0;
};

bool is_1d(const DensityState& q) { return state_dim(q) == 1; }

Eigen::MatrixXd squared_cost_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd c(a.rows(), b.rows());
  for (long i = 0; i < a.rows(); ++i) {
    for (long j = 0; j < b.rows(); ++j) {
      c(i, j) = (a.row(i) - b.row(j)).squaredNorm();
    }
  }
  return c;
}

void check_weights(const Eigen::VectorXd& w, const char* side) {
  if (w.size() < 1) throw InputError(std::string("transport: empty ") + side + " support");
  if (w.minCoeff() < 0.0) throw InputError(std::string("transport: negative ") + side + " weight");
  if (std::abs(w.sum() - 1.0) > 1e-9) {
    throw InputError(std::string("transport: ") + side + " weights must sum to 1");
  }
}

double plan_cost(const Eigen::MatrixXd& coupling, const Eigen::MatrixXd& cost) {
  NeumaierSum acc;
  for (long i = 0; i < coupling.rows(); ++i) {
    for (long j = 0; j < coupling.cols(); ++j) {
      if (coupling(i, j) != 0.0) acc.add(coupling(i, j) * cost(i, j));
    }
  }
  return acc.value();
}

}  // namespace

void TransportPlan::validate(double marginal_tol) const {
  if (coupling.rows() != source_weights.size() || coupling.cols() != target_weights.size()) {
    throw InputError("TransportPlan: coupling shape mismatch");
  }
  if (coupling.minCoeff() < -1e-15) throw InputError("TransportPlan: negative coupling mass");
  const Eigen::VectorXd row = coupling.rowwise().sum();
  const Eigen::VectorXd col = coupling.colwise().sum();
  if ((row - source_weights).cwiseAbs().maxCoeff() > marginal_tol) {
    throw InputError("TransportPlan: row marginals off by " +
                     fmt_double((row - source_weights).cwiseAbs().maxCoeff()));
  }
  if ((col - target_weights).cwiseAbs().maxCoeff() > marginal_tol) {
    throw InputError("TransportPlan: column marginals off by " +
                     fmt_double((col - target_weights).cwiseAbs().maxCoeff()));
  }
  const double recomputed = plan_cost(coupling, squared_cost_matrix(source_points, target_points));
  if (std::abs(recomputed - cost) > 1e-12 * std::max(1.0, std::abs(cost))) {
    throw InputError("TransportPlan: stored cost is inconsistent with the coupling");
  }
}

double w2_gaussian(const GaussianDensity& g0, const GaussianDensity& g1) {
  g0.validate();
  g1.validate();
  if (g0.dim() != g1.dim()) throw InputError("w2_gaussian: dimension mismatch");
  const Eigen::MatrixXd root1 = symmetric_sqrt(g1.covariance, 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(root1 * g0.covariance * root1);
  double cross = 0.0;
  for (long i = 0; i < es.eigenvalues().size(); ++i) {
    cross += std::sqrt(std::max(es.eigenvalues()[i], 0.0));
  }
  const double squared = (g0.mean - g1.mean).squaredNorm() + g0.covariance.trace() +
                         g1.covariance.trace() - 2.0 * cross;
  return std::sqrt(std::max(squared, 0.0));
}

double w2_1d(const DensityState& q0, const DensityState& q1, long quantile_nodes) {
  if (!is_1d(q0) || !is_1d(q1)) throw InputError("w2_1d: inputs must be one-dimensional");
  if (quantile_nodes < 4096) quantile_nodes = 4096;
  const Quantile1D f0 = Quantile1D::from_state(q0);
  const Quantile1D f1 = Quantile1D::from_state(q1);
  NeumaierSum acc;
  for (long j = 0; j < quantile_nodes; ++j) {
    const double u = (static_cast<double>(j) + 0.5) / static_cast<double>(quantile_nodes);
    const double diff = f0(u) - f1(u);
    acc.add(diff * diff);
  }
  return std::sqrt(acc.value() / static_cast<double>(quantile_nodes));
}

std::pair<double, TransportPlan> w2_discrete_exact(const Eigen::MatrixXd& a_points,
                                                   const Eigen::VectorXd& a_weights,
                                                   const Eigen::MatrixXd& b_points,
                                                   const Eigen::VectorXd& b_weights) {
  const long n = a_points.rows();
  const long m = b_points.rows();
  if (n > kExactSolverLimit || m > kExactSolverLimit) {
    throw ScaleError("w2_discrete_exact: supports above " + std::to_string(kExactSolverLimit) +
                     " atoms; use the sinkhorn backend");
  }
  if (a_points.cols() != b_points.cols()) throw InputError("w2_discrete_exact: dimension mismatch");
  if (a_weights.size() != n || b_weights.size() != m) {
    throw InputError("w2_discrete_exact: weight count mismatch");
  }
  check_weights(a_weights, "source");
  check_weights(b_weights, "target");

  const Eigen::MatrixXd cost = squared_cost_matrix(a_points, b_points);
  // Successive shortest paths with potentials; reduced costs stay >= 0 so
  // plain Dijkstra applies. Exact for this problem size, no scaling tricks.
  Eigen::VectorXd pot_a = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd pot_b = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd rem_a = a_weights;
  Eigen::VectorXd rem_b = b_weights;
  // Make both sides sum to the same total so the flow closes exactly.
  rem_b *= rem_a.sum() / rem_b.sum();
  Eigen::MatrixXd coupling = Eigen::MatrixXd::Zero(n, m);

  const long nodes = n + m;
  const double eps = 1e-15;
  double remaining = rem_a.sum();
  std::vector<double> dist(static_cast<std::size_t>(nodes));
  std::vector<char> settled(static_cast<std::size_t>(nodes));
  std::vector<long> parent(static_cast<std::size_t>(nodes));
  long guard = 0;
  const long guard_limit = 50 * nodes + 1000;

  while (remaining > eps) {
    if (++guard > guard_limit) {
      throw ConvergenceError("w2_discrete_exact: augmentation limit exceeded", remaining);
    }
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    std::fill(settled.begin(), settled.end(), 0);
    std::fill(parent.begin(), parent.end(), -1L);
    for (long i = 0; i < n; ++i) {
      if (rem_a[i] > eps) dist[static_cast<std::size_t>(i)] = 0.0;
    }
    long sink = -1;
    for (long iter = 0; iter < nodes; ++iter) {
      long best = -1;
      double best_dist = std::numeric_limits<double>::infinity();
      for (long v = 0; v < nodes; ++v) {
        if (!settled[static_cast<std::size_t>(v)] && dist[static_cast<std::size_t>(v)] < best_dist) {
          best = v;
          best_dist = dist[static_cast<std::size_t>(v)];
        }
      }
      if (best < 0) break;
      settled[static_cast<std::size_t>(best)] = 1;
      if (best >= n && rem_b[best - n] > eps) {
        sink = best - n;
        break;
      }
      if (best < n) {
        const long i = best;
        for (long j = 0; j < m; ++j) {
          const double rc = std::max(cost(i, j) - pot_a[i] - pot_b[j], 0.0);
          if (dist[static_cast<std::size_t>(i)] + rc < dist[static_cast<std::size_t>(n + j)]) {
            dist[static_cast<std::size_t>(n + j)] = dist[static_cast<std::size_t>(i)] + rc;
            parent[static_cast<std::size_t>(n + j)] = i;
          }
        }
      } else {
        const long j = best - n;
        for (long i = 0; i < n; ++i) {
          if (coupling(i, j) <= eps) continue;  // backward edge needs mass
          if (dist[static_cast<std::size_t>(n + j)] < dist[static_cast<std::size_t>(i)]) {
            dist[static_cast<std::size_t>(i)] = dist[static_cast<std::size_t>(n + j)];
            parent[static_cast<std::size_t>(i)] = n + j;
          }
        }
      }
    }
    if (sink < 0) {
      throw ConvergenceError("w2_discrete_exact: no augmenting path found", remaining);
    }
    const double reach = dist[static_cast<std::size_t>(n + sink)];
    for (long i = 0; i < n; ++i) {
      pot_a[i] -= std::min(dist[static_cast<std::size_t>(i)], reach);
    }
    for (long j = 0; j < m; ++j) {
      pot_b[j] += std::min(dist[static_cast<std::size_t>(n + j)], reach);
    }
    // Walk the path back to a free source to find the bottleneck.
    double bottleneck = rem_b[sink];
    long node = n + sink;
    while (true) {
      const long prev = parent[static_cast<std::size_t>(node)];
      if (prev < 0) {
        bottleneck = std::min(bottleneck, rem_a[node]);
        break;
      }
      if (node >= n) {
        // forward edge prev -> node, unconstrained
      } else {
        bottleneck = std::min(bottleneck, coupling(node, prev - n));
      }
      node = prev;
    }
    node = n + sink;
    while (true) {
      const long prev = parent[static_cast<std::size_t>(node)];
      if (prev < 0) {
        rem_a[node] -= bottleneck;
        break;
      }
      if (node >= n) {
        coupling(prev, node - n) += bottleneck;
      } else {
        coupling(node, prev - n) -= bottleneck;
      }
      node = prev;
    }
    rem_b[sink] -= bottleneck;
    remaining -= bottleneck;
  }

  TransportPlan plan;
  plan.source_points = a_points;
  plan.target_points = b_points;
  plan.source_weights = a_weights;
  plan.target_weights = b_weights;
  plan.coupling = coupling;
  plan.cost = plan_cost(coupling, cost);
  return {std::sqrt(std::max(plan.cost, 0.0)), std::move(plan)};
}

std::pair<double, TransportPlan> w2_discrete_exact(const ParticleEnsemble& a,
                                                   const ParticleEnsemble& b) {
  a.validate();
  b.validate();
  return w2_discrete_exact(a.positions, a.weights, b.positions, b.weights);
}

namespace {

// pot_out_i = eps * (log w_i - LSE_j((other_j - cost_ij) / eps))
void sinkhorn_half_step(const Eigen::MatrixXd& cost, const Eigen::VectorXd& log_w,
                        const Eigen::VectorXd& other, double eps, bool rows,
                        Eigen::VectorXd& pot_out, int workers) {
  const long count = rows ? cost.rows() : cost.cols();
  const long inner = rows ? cost.cols() : cost.rows();
  parallel_for_chunks(count, workers, [&](std::int64_t lo, std::int64_t hi) {
    for (std::int64_t i = lo; i < hi; ++i) {
      double peak = -std::numeric_limits<double>::infinity();
      for (long j = 0; j < inner; ++j) {
        const double v = (other[j] - (rows ? cost(i, j) : cost(j, i))) / eps;
        peak = std::max(peak, v);
      }
      double sum = 0.0;
      for (long j = 0; j < inner; ++j) {
        sum += std::exp((other[j] - (rows ? cost(i, j) : cost(j, i))) / eps - peak);
      }
      pot_out[i] = eps * (log_w[i] - peak - std::log(sum));
    }
  });
}

}  // namespace

SinkhornResult sinkhorn(const Eigen::MatrixXd& a_points, const Eigen::VectorXd& a_weights,
                        const Eigen::MatrixXd& b_points, const Eigen::VectorXd& b_weights,
                        double epsilon, long max_iters, double tol, int workers) {
  if (!(epsilon > 0.0)) throw InputError("sinkhorn: epsilon must be > 0");
  if (a_points.cols() != b_points.cols()) throw InputError("sinkhorn: dimension mismatch");
  check_weights(a_weights, "source");
  check_weights(b_weights, "target");
  if (a_weights.minCoeff() <= 0.0 || b_weights.minCoeff() <= 0.0) {
    throw InputError("sinkhorn: weights must be strictly positive");
  }

  const long n = a_points.rows();
  const long m = b_points.rows();
  const Eigen::MatrixXd cost = squared_cost_matrix(a_points, b_points);
  const Eigen::VectorXd log_a = a_weights.array().log();
  const Eigen::VectorXd log_b = b_weights.array().log();

  Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(m);

  // Epsilon ladder from a quarter of the cost range down to the target.
  std::vector<double> ladder;
  double level = std::max(cost.maxCoeff() / 4.0, epsilon);
  while (level > epsilon * 1.5) {
    ladder.push_back(level);
    level *= 0.5;
  }
  ladder.push_back(epsilon);

  long iterations = 0;
  double violation = std::numeric_limits<double>::infinity();
  const auto row_violation = [&](double eps) {
    double worst = 0.0;
    for (long i = 0; i < n; ++i) {
      NeumaierSum acc;
      for (long j = 0; j < m; ++j) {
        acc.add(std::exp((f[i] + g[j] - cost(i, j)) / eps));
      }
      worst = std::max(worst, std::abs(acc.value() - a_weights[i]));
    }
    return worst;
  };

  for (std::size_t lvl = 0; lvl < ladder.size(); ++lvl) {
    const double eps = ladder[lvl];
    const bool final_level = lvl + 1 == ladder.size();
    const double level_tol = final_level ? tol : std::max(tol, 1e-3);
    long level_iters = 0;
    while (true) {
      if (iterations >= max_iters) {
        throw ConvergenceError("sinkhorn: marginal violation " + fmt_double(violation) +
                                   " after " + std::to_string(iterations) + " iterations",
                               violation);
      }
      sinkhorn_half_step(cost, log_a, g, eps, true, f, workers);
      sinkhorn_half_step(cost, log_b, f, eps, false, g, workers);
      ++iterations;
      ++level_iters;
      violation = row_violation(eps);
      if (violation <= level_tol) break;
      if (!final_level && level_iters >= 50) break;  // move the ladder along
    }
  }
  if (violation > tol) {
    throw ConvergenceError("sinkhorn: marginal violation " + fmt_double(violation) + " after " +
                               std::to_string(iterations) + " iterations",
                           violation);
  }

  TransportPlan plan;
  plan.source_points = a_points;
  plan.target_points = b_points;
  plan.source_weights = a_weights;
  plan.target_weights = b_weights;
  plan.coupling.resize(n, m);
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j < m; ++j) {
      plan.coupling(i, j) = std::exp((f[i] + g[j] - cost(i, j)) / epsilon);
    }
  }
  plan.cost = plan_cost(plan.coupling, cost);

  SinkhornResult result;
  result.cost = plan.cost;
  result.plan = std::move(plan);
  result.iterations = iterations;
  result.marginal_violation = violation;
  return result;
}

GeodesicPath make_geodesic(const DensityState& q0, const DensityState& q1, long samples) {
  if (samples < 3) throw ResolutionError("make_geodesic: need at least 3 sample times");
  GeodesicPath path;
  path.q0 = q0;
  path.q1 = q1;
  for (long k = 0; k < samples; ++k) {
    path.sample_times.push_back(static_cast<double>(k) / static_cast<double>(samples - 1));
  }
  if (std::holds_alternative<GaussianDensity>(q0) && std::holds_alternative<GaussianDensity>(q1)) {
    path.rule = GeodesicRule::GaussianClosedForm;
    return path;
  }
  if (std::holds_alternative<GridDensity>(q0) && std::holds_alternative<GridDensity>(q1)) {
    if (state_dim(q0) != 1 || state_dim(q1) != 1) {
      throw UnsupportedError("make_geodesic: grid geodesics are one-dimensional only");
    }
    path.rule = GeodesicRule::QuantileGrid;
    return path;
  }
  if (std::holds_alternative<ParticleEnsemble>(q0) &&
      std::holds_alternative<ParticleEnsemble>(q1)) {
    path.rule = GeodesicRule::PlanDisplacement;
    path.plan = w2_discrete_exact(std::get<ParticleEnsemble>(q0), std::get<ParticleEnsemble>(q1))
                    .second;
    return path;
  }
  throw UnsupportedError("make_geodesic: endpoints must share a representation");
}

namespace {

GaussianDensity gaussian_interpolant(const GaussianDensity& g0, const GaussianDensity& g1,
                                     double s) {
  const Eigen::MatrixXd map = bures_map(g0, g1);
  const long d = g0.mean.size();
  const Eigen::MatrixXd blend =
      (1.0 - s) * Eigen::MatrixXd::Identity(d, d) + s * map;
  GaussianDensity out;
  out.mean = (1.0 - s) * g0.mean + s * g1.mean;
  out.covariance = blend * g0.covariance * blend;
  // Symmetrize away rounding junk so downstream validation stays happy.
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

GridDensity quantile_interpolant(const GridDensity& g0, const GridDensity& g1, double s) {
  const Quantile1D f0 = Quantile1D::from_state(DensityState(g0));
  const Quantile1D f1 = Quantile1D::from_state(DensityState(g1));
  const double lo = (1.0 - s) * g0.domain[0].first + s * g1.domain[0].first;
  const double hi = (1.0 - s) * g0.domain[0].second + s * g1.domain[0].second;
  const long cells = std::max(g0.cells[0], g1.cells[0]);
  GridDensity out = GridDensity::zeros({{lo, hi}}, {cells});

  // CDF of the interpolant at a position x: measure of {u : Q_s(u) <= x}.
  const auto cdf = [&](double x) {
    double ulo = 0.0, uhi = 1.0;
    if ((1.0 - s) * f0(1e-12) + s * f1(1e-12) > x) return 0.0;
    if ((1.0 - s) * f0(1.0 - 1e-12) + s * f1(1.0 - 1e-12) <= x) return 1.0;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (ulo + uhi);
      const double qs = (1.0 - s) * f0(mid) + s * f1(mid);
      if (qs <= x) {
        ulo = mid;
      } else {
        uhi = mid;
      }
    }
    return 0.5 * (ulo + uhi);
  };

  const double dx = out.cell_width(0);
  double left = 0.0;  // cdf at the lower domain edge
  for (long i = 0; i < cells; ++i) {
    const double right = i + 1 == cells ? 1.0 : cdf(lo + static_cast<double>(i + 1) * dx);
    out.values[i] = std::max(right - left, 0.0) / dx;
    left = right;
  }
  return normalize(out);
}

}  // namespace

ParticleEnsemble mccann_interpolate(const TransportPlan& plan, double s) {
  const long n = plan.coupling.rows();
  const long m = plan.coupling.cols();
  const int d = static_cast<int>(plan.source_points.cols());
  std::vector<Eigen::VectorXd> pts;
  std::vector<double> mass;
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j < m; ++j) {
      if (plan.coupling(i, j) <= 1e-15) continue;
      pts.push_back((1.0 - s) * plan.source_points.row(i).transpose() +
                    s * plan.target_points.row(j).transpose());
      mass.push_back(plan.coupling(i, j));
    }
  }
  ParticleEnsemble out;
  out.positions.resize(static_cast<long>(pts.size()), d);
  out.weights.resize(static_cast<long>(pts.size()));
  double total = 0.0;
  for (double w : mass) total += w;
  for (std::size_t r = 0; r < pts.size(); ++r) {
    out.positions.row(static_cast<long>(r)) = pts[r].transpose();
    out.weights[static_cast<long>(r)] = mass[r] / total;
  }
  out.validate();
  return out;
}

DensityState mccann_interpolate(const DensityState& q0, const DensityState& q1, double s) {
  if (s < 0.0 || s > 1.0) throw InputError("mccann_interpolate: s must lie in [0, 1]");
  if (std::holds_alternative<GaussianDensity>(q0) && std::holds_alternative<GaussianDensity>(q1)) {
    return gaussian_interpolant(std::get<GaussianDensity>(q0), std::get<GaussianDensity>(q1), s);
  }
  if (std::holds_alternative<GridDensity>(q0) && std::holds_alternative<GridDensity>(q1)) {
    if (state_dim(q0) != 1) {
      throw UnsupportedError("mccann_interpolate: grid interpolation is one-dimensional only");
    }
    return quantile_interpolant(std::get<GridDensity>(q0), std::get<GridDensity>(q1), s);
  }
  if (std::holds_alternative<ParticleEnsemble>(q0) &&
      std::holds_alternative<ParticleEnsemble>(q1)) {
    const auto plan =
        w2_discrete_exact(std::get<ParticleEnsemble>(q0), std::get<ParticleEnsemble>(q1)).second;
    return mccann_interpolate(plan, s);
  }
  throw UnsupportedError("mccann_interpolate: endpoints must share a representation");
}

double path_action(const TrajectoryRecord& traj) {
  traj.validate();
  if (traj.s.size() < 3) {
    throw ResolutionError("path_action: need at least 3 snapshots for the time integral");
  }
  if (traj.sigma.empty()) {
    throw UnsupportedError("path_action: trajectory carries no sigma series");
  }
  NeumaierSum acc;
  for (std::size_t k = 1; k < traj.s.size(); ++k) {
    const double dtau = (traj.s[k] - traj.s[k - 1]) * traj.schedule.horizon;
    acc.add(0.5 * dtau * (traj.sigma[k] + traj.sigma[k - 1]));
  }
  // Normalized action: horizon * integral of the physical rate.
  return traj.schedule.horizon * acc.value();
}

double path_action(const GeodesicPath& path) {
  if (path.sample_times.size() < 3) {
    throw ResolutionError("path_action: need at least 3 sample times");
  }
  const std::vector<double>& ts = path.sample_times;
  std::vector<double> rate(ts.size(), 0.0);

  switch (path.rule) {
    case GeodesicRule::GaussianClosedForm: {
      const auto& g0 = std::get<GaussianDensity>(path.q0);
      const auto& g1 = std::get<GaussianDensity>(path.q1);
      const Eigen::MatrixXd map = bures_map(g0, g1);
      const long d = g0.mean.size();
      const Eigen::MatrixXd shift = map - Eigen::MatrixXd::Identity(d, d);
      // E |v|^2 along displacement lines, constant in s.
      const double value = (g1.mean - g0.mean).squaredNorm() +
                           (shift * g0.covariance * shift.transpose()).trace();
      std::fill(rate.begin(), rate.end(), value);
      break;
    }
    case GeodesicRule::PlanDisplacement: {
      if (!path.plan) throw InputError("path_action: displacement path lacks a plan");
      std::fill(rate.begin(), rate.end(), path.plan->cost);
      break;
    }
    case GeodesicRule::QuantileGrid: {
      // Measure the realized (rebinned) path: finite-difference quantile
      // velocities between neighboring interpolants.
      constexpr long kNodes = 4096;
      std::vector<Quantile1D> fns;
      fns.reserve(ts.size());
      for (double s : ts) {
        fns.push_back(Quantile1D::from_state(mccann_interpolate(path.q0, path.q1, s)));
      }
      for (std::size_t k = 0; k < ts.size(); ++k) {
        const std::size_t prev = k == 0 ? 0 : k - 1;
        const std::size_t next = k + 1 == ts.size() ? k : k + 1;
        const double span = ts[next] - ts[prev];
        NeumaierSum acc;
        for (long j = 0; j < kNodes; ++j) {
          const double u = (static_cast<double>(j) + 0.5) / static_cast<double>(kNodes);
          const double v = (fns[next](u) - fns[prev](u)) / span;
          acc.add(v * v);
        }
        rate[k] = acc.value() / static_cast<double>(kNodes);
      }
      break;
    }
  }

  NeumaierSum acc;
  for (std::size_t k = 1; k < ts.size(); ++k) {
    acc.add(0.5 * (ts[k] - ts[k - 1]) * (rate[k] + rate[k - 1]));
  }
  return acc.value();
}

std::pair<double, std::string> w2_auto(const DensityState& q0, const DensityState& q1) {
  if (std::holds_alternative<GaussianDensity>(q0) && std::holds_alternative<GaussianDensity>(q1)) {
    return {w2_gaussian(std::get<GaussianDensity>(q0), std::get<GaussianDensity>(q1)), "gaussian"};
  }
  if (state_dim(q0) == 1 && state_dim(q1) == 1) {
    return {w2_1d(q0, q1), "quantile"};
  }
  const auto* e0 = std::get_if<ParticleEnsemble>(&q0);
  const auto* e1 = std::get_if<ParticleEnsemble>(&q1);
  if (e0 != nullptr && e1 != nullptr) {
    if (e0->count() <= kExactSolverLimit && e1->count() <= kExactSolverLimit) {
      return {w2_discrete_exact(*e0, *e1).first, "exact"};
    }
    const auto res = sinkhorn(e0->positions, e0->weights, e1->positions, e1->weights, 1e-3);
    return {std::sqrt(std::max(res.cost, 0.0)), "sinkhorn"};
  }
  throw InputError("w2_auto: no transport backend applies to this pair of representations");
}

ParticleEnsemble quantize_1d(const DensityState& q, long n) {
  if (n < 2) throw InputError("quantize_1d: need n >= 2");
  if (state_dim(q) != 1) throw InputError("quantize_1d: state must be one-dimensional");
  Eigen::MatrixXd pts(n, 1);
  if (const auto* g = std::get_if<GaussianDensity>(&q)) {
    const double mu = g->mean[0];
    const double sigma = std::sqrt(g->covariance(0, 0));
    // Slice barycenters: n * (pdf(z_lo) - pdf(z_hi)) in standard units.
    double pdf_lo = 0.0;  // pdf at -inf
    for (long i = 0; i < n; ++i) {
      const double pdf_hi =
          i + 1 == n ? 0.0 : norm_pdf(norm_quantile(static_cast<double>(i + 1) / n));
      pts(i, 0) = mu + sigma * static_cast<double>(n) * (pdf_lo - pdf_hi);
      pdf_lo = pdf_hi;
    }
  } else if (std::holds_alternative<GridDensity>(q)) {
    const Quantile1D fn = Quantile1D::from_state(q);
    // 16-point Gauss-Legendre barycenter of each quantile slice.
    static const double gl_x[] = {-0.9894009349916499, -0.9445750230732326, -0.8656312023878318,
                                  -0.755404408355003,  -0.6178762444026438, -0.4580167776572274,
                                  -0.2816035507792589, -0.09501250983763744, 0.09501250983763744,
                                  0.2816035507792589,  0.4580167776572274,  0.6178762444026438,
                                  0.755404408355003,   0.8656312023878318,  0.9445750230732326,
                                  0.9894009349916499};
    static const double gl_w[] = {0.02715245941175409, 0.06225352393864789, 0.09515851168249278,
                                  0.1246289712555339,  0.1495959888165767,  0.1691565193950025,
                                  0.1826034150449236,  0.1894506104550685,  0.1894506104550685,
                                  0.1826034150449236,  0.1691565193950025,  0.1495959888165767,
                                  0.1246289712555339,  0.09515851168249278, 0.06225352393864789,
                                  0.02715245941175409};
    for (long i = 0; i < n; ++i) {
      const double ulo = static_cast<double>(i) / n;
      const double uhi = static_cast<double>(i + 1) / n;
      NeumaierSum acc;
      for (int k = 0; k < 16; ++k) {
        const double u = 0.5 * (ulo + uhi) + 0.5 * (uhi - ulo) * gl_x[k];
        acc.add(gl_w[k] * fn(u));
      }
      pts(i, 0) = 0.5 * acc.value();  // mean over the slice
    }
  } else {
    throw UnsupportedError("quantize_1d: particles are already discrete");
  }
  return ParticleEnsemble::uniform(std::move(pts));
}

}  // namespace eslab
