#ifndef ESLAB_DENSITY_HPP
#define ESLAB_DENSITY_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <variant>
#include <vector>

#include "eslab/potential.hpp"

namespace eslab {

// Weighted particle cloud over R^d. Weights are nonnegative and sum to one.
struct ParticleEnsemble {
  Eigen::MatrixXd positions;  // N x d
  Eigen::VectorXd weights;    // N, sums to 1
  std::uint64_t seed_provenance = 0;

  long count() const { return positions.rows(); }
  int dim() const { return static_cast<int>(positions.cols()); }
  bool weights_uniform(double tol = 1e-9) const;
  void validate() const;

  static ParticleEnsemble uniform(Eigen::MatrixXd positions, std::uint64_t seed = 0);
};

// Piecewise-constant density on a uniform cell grid, d <= 2.
// Layout is row-major with axis 0 fastest: flat = iy * cells[0] + ix.
struct GridDensity {
  std::vector<std::pair<double, double>> domain;  // per-axis [lo, hi]
  std::vector<long> cells;                        // per-axis counts
  Eigen::VectorXd values;                         // nonnegative, cell-averaged
  double cell_volume = 0.0;

  int dim() const { return static_cast<int>(cells.size()); }
  long cell_count() const;
  double cell_width(int axis) const;
  double center(int axis, long index) const;
  Eigen::VectorXd cell_center(long flat) const;
  double mass() const;
  void validate() const;

  static GridDensity zeros(std::vector<std::pair<double, double>> domain, std::vector<long> cells);
};

struct GaussianDensity {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // symmetric positive definite

  int dim() const { return static_cast<int>(mean.size()); }
  void validate() const;
};

using DensityState = std::variant<ParticleEnsemble, GridDensity, GaussianDensity>;

int state_dim(const DensityState& q);

// Rescales cell values so total mass is exactly one. Throws
// DegenerateInputError on an all-zero grid.
GridDensity normalize(const GridDensity& g);

// Differential entropy H[q] = -int q log q.
//   Gaussian:  0.5 * log((2 pi e)^d det Sigma)
//   grid:      midpoint quadrature with a floor on the log argument
//   particles: Kozachenko-Leonenko k-NN estimator (uniform weights)
double entropy(const GaussianDensity& g);
double entropy(const GridDensity& g);
double entropy(const ParticleEnsemble& e, int k = 3);
double entropy(const DensityState& q);

// E_q[Phi]. Gaussian x Quadratic uses the closed form (k/2)(|mu|^2 + tr Sigma);
// other Gaussian cases use tensor Gauss-Hermite quadrature (d <= 2).
double expectation(const GaussianDensity& g, const Potential& p);
double expectation(const GridDensity& g, const Potential& p);
double expectation(const ParticleEnsemble& e, const Potential& p);
double expectation(const DensityState& q, const Potential& p);

// Deterministic Gaussian sampling keyed by (seed, particle, coordinate).
ParticleEnsemble sample(const GaussianDensity& g, long n, std::uint64_t seed);

// Evaluates the Gaussian on cell centers and normalizes. Throws
// TruncationError when the clipped mass exceeds 1e-6 or a cell is wider than
// half the smallest axis standard deviation.
GridDensity grid_from_gaussian(const GaussianDensity& g,
                               std::vector<std::pair<double, double>> domain,
                               std::vector<long> cells);

// First and second moments, shared by diagnostics and tests.
Eigen::VectorXd mean_of(const ParticleEnsemble& e);
Eigen::MatrixXd covariance_of(const ParticleEnsemble& e);
Eigen::VectorXd mean_of(const GridDensity& g);
Eigen::MatrixXd covariance_of(const GridDensity& g);

// Floor used for log q on grids: max(1e-300, 1e-12 * max cell value).
double log_floor(const GridDensity& g);

}  // namespace eslab

#endif
