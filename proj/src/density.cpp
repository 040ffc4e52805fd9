#include "eslab/density.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "eslab/common.hpp"
#include "eslab/rng.hpp"

namespace eslab {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Euler-Mascheroni constant for the digamma of integer arguments.
constexpr double kEulerGamma = 0.57721566490153286060651209008240;

double digamma_int(long n) {
  // psi(n) = H_{n-1} - gamma for integer n >= 1.
  NeumaierSum h;
  for (long j = 1; j < n; ++j) h.add(1.0 / static_cast<double>(j));
  return h.value() - kEulerGamma;
}

double unit_ball_log_volume(int d) {
  // log V_d = (d/2) log(pi) - log Gamma(d/2 + 1)
  return 0.5 * d * std::log(M_PI) - std::lgamma(0.5 * d + 1.0);
}

// Exact k-nearest-neighbor queries; median split on the widest axis.
class KdTree {
public:
  explicit KdTree(const Eigen::MatrixXd& pts) : pts_(pts), index_(pts.rows()) {
    std::iota(index_.begin(), index_.end(), 0L);
    nodes_.reserve(static_cast<std::size_t>(2 * pts.rows() / kLeafSize + 2));
    root_ = build(0, pts.rows());
  }

  // Distances to the k nearest neighbors of pts.row(self), excluding self.
  std::vector<double> knn_distances(long self, int k) const {
    std::vector<double> best(static_cast<std::size_t>(k), std::numeric_limits<double>::infinity());
    Eigen::VectorXd q = pts_.row(self);
    search(root_, q, self, best);
    for (auto& d2 : best) d2 = std::sqrt(d2);
    return best;
  }

private:
  static constexpr long kLeafSize = 16;

  struct Node {
    int axis = -1;       // -1 marks a leaf
    double split = 0.0;
    long begin = 0, end = 0;  // leaf payload range in index_
    long left = -1, right = -1;
  };

  long build(long begin, long end) {
    Node node;
    node.begin = begin;
    node.end = end;
    if (end - begin <= kLeafSize) {
      nodes_.push_back(node);
      return static_cast<long>(nodes_.size()) - 1;
    }
    // Widest-extent axis.
    int axis = 0;
    double best_extent = -1.0;
    for (int a = 0; a < pts_.cols(); ++a) {
      double lo = std::numeric_limits<double>::infinity(), hi = -lo;
      for (long i = begin; i < end; ++i) {
        const double v = pts_(index_[i], a);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (hi - lo > best_extent) {
        best_extent = hi - lo;
        axis = a;
      }
    }
    const long mid = (begin + end) / 2;
    std::nth_element(index_.begin() + begin, index_.begin() + mid, index_.begin() + end,
                     [&](long a, long b) { return pts_(a, axis) < pts_(b, axis); });
    node.axis = axis;
    node.split = pts_(index_[mid], axis);
    nodes_.push_back(node);
    const long id = static_cast<long>(nodes_.size()) - 1;
    const long left = build(begin, mid);
    const long right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  void search(long id, const Eigen::VectorXd& q, long self, std::vector<double>& best) const {
    const Node& node = nodes_[static_cast<std::size_t>(id)];
    if (node.axis < 0) {
      for (long i = node.begin; i < node.end; ++i) {
        const long j = index_[i];
        if (j == self) continue;
        const double d2 = (pts_.row(j).transpose() - q).squaredNorm();
        if (d2 < best.back()) {
          best.back() = d2;
          for (std::size_t b = best.size() - 1; b > 0 && best[b] < best[b - 1]; --b) {
            std::swap(best[b], best[b - 1]);
          }
        }
      }
      return;
    }
    const double delta = q[node.axis] - node.split;
    const long near = delta < 0.0 ? node.left : node.right;
    const long far = delta < 0.0 ? node.right : node.left;
    search(near, q, self, best);
    if (delta * delta < best.back()) search(far, q, self, best);
  }

  const Eigen::MatrixXd& pts_;
  std::vector<long> index_;
  std::vector<Node> nodes_;
  long root_ = 0;
};

// Gauss-Hermite nodes/weights for int f(x) e^{-x^2} dx, via the Jacobi matrix.
void gauss_hermite(int n, Eigen::VectorXd& nodes, Eigen::VectorXd& weights) {
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int i = 1; i < n; ++i) {
    const double b = std::sqrt(0.5 * i);
    jacobi(i, i - 1) = b;
    jacobi(i - 1, i) = b;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jacobi);
  nodes = es.eigenvalues();
  weights.resize(n);
  const double sqrt_pi = std::sqrt(M_PI);
  for (int i = 0; i < n; ++i) {
    const double v0 = es.eigenvectors()(0, i);
    weights[i] = sqrt_pi * v0 * v0;
  }
}

Eigen::MatrixXd cholesky_of(const GaussianDensity& g) {
  Eigen::LLT<Eigen::MatrixXd> llt(g.covariance);
  if (llt.info() != Eigen::Success) {
    throw InputError("GaussianDensity: covariance is not positive definite");
  }
  return llt.matrixL();
}

}  // namespace

bool ParticleEnsemble::weights_uniform(double tol) const {
  const double w = 1.0 / static_cast<double>(count());
  return (weights.array() - w).abs().maxCoeff() <= tol;
}

void ParticleEnsemble::validate() const {
  if (count() < 2) throw InputError("ParticleEnsemble: needs at least 2 particles");
  if (dim() < 1) throw InputError("ParticleEnsemble: dimension must be >= 1");
  if (weights.size() != count()) throw InputError("ParticleEnsemble: weight count mismatch");
  if (weights.minCoeff() < 0.0) throw InputError("ParticleEnsemble: negative weight");
  NeumaierSum s;
  for (long i = 0; i < weights.size(); ++i) s.add(weights[i]);
  if (std::abs(s.value() - 1.0) > 1e-12) {
    throw InputError("ParticleEnsemble: weights must sum to 1 (got " + fmt_double(s.value()) + ")");
  }
  if (!positions.allFinite()) throw InputError("ParticleEnsemble: non-finite position");
}

ParticleEnsemble ParticleEnsemble::uniform(Eigen::MatrixXd positions, std::uint64_t seed) {
  ParticleEnsemble e;
  const long n = positions.rows();
  e.positions = std::move(positions);
  e.weights = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  e.seed_provenance = seed;
  e.validate();
  return e;
}

long GridDensity::cell_count() const {
  long n = 1;
  for (long c : cells) n *= c;
  return n;
}

double GridDensity::cell_width(int axis) const {
  return (domain[axis].second - domain[axis].first) / static_cast<double>(cells[axis]);
}

double GridDensity::center(int axis, long index) const {
  return domain[axis].first + (static_cast<double>(index) + 0.5) * cell_width(axis);
}

Eigen::VectorXd GridDensity::cell_center(long flat) const {
  Eigen::VectorXd x(dim());
  long rem = flat;
  for (int a = 0; a < dim(); ++a) {
    x[a] = center(a, rem % cells[a]);
    rem /= cells[a];
  }
  return x;
}

double GridDensity::mass() const {
  NeumaierSum s;
  for (long i = 0; i < values.size(); ++i) s.add(values[i]);
  return s.value() * cell_volume;
}

void GridDensity::validate() const {
  const int d = dim();
  if (d < 1 || d > 2) throw InputError("GridDensity: dimension must be 1 or 2");
  if (domain.size() != cells.size()) throw InputError("GridDensity: domain/cells size mismatch");
  long n = 1;
  for (int a = 0; a < d; ++a) {
    if (cells[a] < 2) throw InputError("GridDensity: needs >= 2 cells per axis");
    if (!(domain[a].second > domain[a].first)) throw InputError("GridDensity: empty axis domain");
    n *= cells[a];
  }
  if (values.size() != n) throw InputError("GridDensity: value count mismatch");
  if (!values.allFinite()) throw InputError("GridDensity: non-finite value");
  if (values.minCoeff() < 0.0) throw InputError("GridDensity: negative cell value");
  double vol = 1.0;
  for (int a = 0; a < d; ++a) vol *= cell_width(a);
  if (std::abs(vol - cell_volume) > 1e-12 * vol) throw InputError("GridDensity: cell_volume mismatch");
}

GridDensity GridDensity::zeros(std::vector<std::pair<double, double>> domain, std::vector<long> cells) {
  GridDensity g;
  g.domain = std::move(domain);
  g.cells = std::move(cells);
  long n = 1;
  double vol = 1.0;
  for (std::size_t a = 0; a < g.cells.size(); ++a) {
    n *= g.cells[a];
    vol *= (g.domain[a].second - g.domain[a].first) / static_cast<double>(g.cells[a]);
  }
  g.values = Eigen::VectorXd::Zero(n);
  g.cell_volume = vol;
  return g;
}

void GaussianDensity::validate() const {
  if (mean.size() < 1) throw InputError("GaussianDensity: empty mean");
  if (covariance.rows() != mean.size() || covariance.cols() != mean.size()) {
    throw InputError("GaussianDensity: covariance shape mismatch");
  }
  if ((covariance - covariance.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw InputError("GaussianDensity: covariance not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(covariance);
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw InputError("GaussianDensity: covariance not positive definite");
  }
}

int state_dim(const DensityState& q) {
  return std::visit([](const auto& s) { return s.dim(); }, q);
}

GridDensity normalize(const GridDensity& g) {
  g.validate();
  const double m = g.mass();
  if (!(m > 0.0)) throw DegenerateInputError("normalize: grid carries no mass");
  GridDensity out = g;
  out.values /= m;
  return out;
}

double log_floor(const GridDensity& g) {
  const double peak = g.values.size() > 0 ? g.values.maxCoeff() : 0.0;
  return std::max(1e-300, 1e-12 * peak);
}

double entropy(const GaussianDensity& g) {
  g.validate();
  const int d = g.dim();
  Eigen::LLT<Eigen::MatrixXd> llt(g.covariance);
  double log_det = 0.0;
  const Eigen::MatrixXd l = llt.matrixL();
  for (int i = 0; i < d; ++i) log_det += 2.0 * std::log(l(i, i));
  return 0.5 * (d * (1.0 + std::log(kTwoPi)) + log_det);
}

double entropy(const GridDensity& g) {
  const double floor = log_floor(g);
  NeumaierSum s;
  for (long i = 0; i < g.values.size(); ++i) {
    const double q = g.values[i];
    if (q <= 0.0) continue;  // -q log q -> 0
    s.add(-q * std::log(std::max(q, floor)));
  }
  return s.value() * g.cell_volume;
}

double entropy(const ParticleEnsemble& e, int k) {
  e.validate();
  if (k < 1) throw InputError("entropy: k must be >= 1");
  if (e.count() < k + 1) {
    throw InputError("entropy: k-NN estimator needs at least k+1 particles");
  }
  if (!e.weights_uniform()) {
    throw InputError("entropy: k-NN estimator requires uniform weights");
  }
  const long n = e.count();
  const int d = e.dim();
  const KdTree tree(e.positions);
  NeumaierSum log_eps;
  for (long i = 0; i < n; ++i) {
    const double eps = tree.knn_distances(i, k).back();
    log_eps.add(std::log(std::max(eps, 1e-290)));
  }
  return digamma_int(n) - digamma_int(k) + unit_ball_log_volume(d) +
         d * log_eps.value() / static_cast<double>(n);
}

double entropy(const DensityState& q) {
  return std::visit([](const auto& s) { return entropy(s); }, q);
}

double expectation(const GaussianDensity& g, const Potential& p) {
  g.validate();
  if (g.dim() != p.dim()) throw InputError("expectation: dimension mismatch");
  if (p.kind() == PotentialKind::Quadratic) {
    return 0.5 * p.stiffness() * (g.mean.squaredNorm() + g.covariance.trace());
  }
  const int d = g.dim();
  if (d > 2) {
    throw UnsupportedError("expectation: Gaussian x non-quadratic only supported for d <= 2");
  }
  constexpr int kNodes = 64;
  Eigen::VectorXd nodes, weights;
  gauss_hermite(kNodes, nodes, weights);
  const Eigen::MatrixXd l = cholesky_of(g);
  const double sqrt2 = std::sqrt(2.0);
  NeumaierSum acc;
  if (d == 1) {
    for (int i = 0; i < kNodes; ++i) {
      Eigen::VectorXd theta = g.mean + sqrt2 * l * Eigen::VectorXd::Constant(1, nodes[i]);
      acc.add(weights[i] * p.value(theta));
    }
    return acc.value() / std::sqrt(M_PI);
  }
  for (int i = 0; i < kNodes; ++i) {
    for (int j = 0; j < kNodes; ++j) {
      Eigen::Vector2d z(nodes[i], nodes[j]);
      Eigen::VectorXd theta = g.mean + sqrt2 * l * z;
      acc.add(weights[i] * weights[j] * p.value(theta));
    }
  }
  return acc.value() / M_PI;
}

double expectation(const GridDensity& g, const Potential& p) {
  g.validate();
  if (g.dim() != p.dim()) throw InputError("expectation: dimension mismatch");
  NeumaierSum acc;
  for (long i = 0; i < g.values.size(); ++i) {
    if (g.values[i] == 0.0) continue;
    acc.add(g.values[i] * p.value(g.cell_center(i)));
  }
  return acc.value() * g.cell_volume;
}

double expectation(const ParticleEnsemble& e, const Potential& p) {
  e.validate();
  if (e.dim() != p.dim()) throw InputError("expectation: dimension mismatch");
  NeumaierSum acc;
  for (long i = 0; i < e.count(); ++i) {
    acc.add(e.weights[i] * p.value(e.positions.row(i)));
  }
  return acc.value();
}

double expectation(const DensityState& q, const Potential& p) {
  return std::visit([&](const auto& s) { return expectation(s, p); }, q);
}

ParticleEnsemble sample(const GaussianDensity& g, long n, std::uint64_t seed) {
  g.validate();
  if (n < 2) throw InputError("sample: need n >= 2");
  const int d = g.dim();
  const Eigen::MatrixXd l = cholesky_of(g);
  Eigen::MatrixXd pts(n, d);
  for (long i = 0; i < n; ++i) {
    Eigen::VectorXd z(d);
    for (int j = 0; j < d; j += 2) {
      const NormalPair np = normal_pair(seed, RngStream::GaussianSampling,
                                        static_cast<std::uint64_t>(i),
                                        static_cast<std::uint64_t>(j / 2));
      z[j] = np.z0;
      if (j + 1 < d) z[j + 1] = np.z1;
    }
    pts.row(i) = (g.mean + l * z).transpose();
  }
  return ParticleEnsemble::uniform(std::move(pts), seed);
}

GridDensity grid_from_gaussian(const GaussianDensity& g,
                               std::vector<std::pair<double, double>> domain,
                               std::vector<long> cells) {
  g.validate();
  const int d = g.dim();
  if (static_cast<int>(domain.size()) != d || static_cast<int>(cells.size()) != d) {
    throw InputError("grid_from_gaussian: domain/cells must match the Gaussian dimension");
  }
  GridDensity grid = GridDensity::zeros(std::move(domain), std::move(cells));
  grid.validate();

  for (int a = 0; a < d; ++a) {
    const double sigma = std::sqrt(g.covariance(a, a));
    if (grid.cell_width(a) > 0.5 * sigma) {
      throw TruncationError("grid_from_gaussian: cell width " + fmt_double(grid.cell_width(a)) +
                            " exceeds sigma/2 on axis " + std::to_string(a) +
                            "; increase the cell count");
    }
  }

  const Eigen::MatrixXd l = cholesky_of(g);
  double log_norm = -0.5 * d * std::log(kTwoPi);
  for (int i = 0; i < d; ++i) log_norm -= std::log(l(i, i));
  Eigen::LLT<Eigen::MatrixXd> llt(g.covariance);
  for (long i = 0; i < grid.values.size(); ++i) {
    const Eigen::VectorXd diff = grid.cell_center(i) - g.mean;
    const double m2 = diff.dot(llt.solve(diff));
    grid.values[i] = std::exp(log_norm - 0.5 * m2);
  }
  const double covered = grid.mass();
  if (1.0 - covered > 1e-6) {
    throw TruncationError("grid_from_gaussian: domain clips mass " + fmt_double(1.0 - covered) +
                          " (> 1e-6); enlarge the domain");
  }
  return normalize(grid);
}

Eigen::VectorXd mean_of(const ParticleEnsemble& e) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(e.dim());
  for (int a = 0; a < e.dim(); ++a) {
    NeumaierSum s;
    for (long i = 0; i < e.count(); ++i) s.add(e.weights[i] * e.positions(i, a));
    m[a] = s.value();
  }
  return m;
}

Eigen::MatrixXd covariance_of(const ParticleEnsemble& e) {
  const Eigen::VectorXd m = mean_of(e);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(e.dim(), e.dim());
  for (int a = 0; a < e.dim(); ++a) {
    for (int b = a; b < e.dim(); ++b) {
      NeumaierSum s;
      for (long i = 0; i < e.count(); ++i) {
        s.add(e.weights[i] * (e.positions(i, a) - m[a]) * (e.positions(i, b) - m[b]));
      }
      c(a, b) = s.value();
      c(b, a) = s.value();
    }
  }
  return c;
}

Eigen::VectorXd mean_of(const GridDensity& g) {
  Eigen::VectorXd m = Eigen::VectorXd::Zero(g.dim());
  for (int a = 0; a < g.dim(); ++a) {
    NeumaierSum s;
    for (long i = 0; i < g.values.size(); ++i) {
      s.add(g.values[i] * g.cell_center(i)[a]);
    }
    m[a] = s.value() * g.cell_volume;
  }
  return m;
}

Eigen::MatrixXd covariance_of(const GridDensity& g) {
  const Eigen::VectorXd m = mean_of(g);
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(g.dim(), g.dim());
  for (int a = 0; a < g.dim(); ++a) {
    for (int b = a; b < g.dim(); ++b) {
      NeumaierSum s;
      for (long i = 0; i < g.values.size(); ++i) {
        const Eigen::VectorXd x = g.cell_center(i);
        s.add(g.values[i] * (x[a] - m[a]) * (x[b] - m[b]));
      }
      c(a, b) = s.value() * g.cell_volume;
      c(b, a) = c(a, b);
    }
  }
  return c;
}

}  // namespace eslab
