#ifndef ESLAB_TRANSPORT_HPP
#define ESLAB_TRANSPORT_HPP

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "eslab/density.hpp"
#include "eslab/dynamics.hpp"

namespace eslab {

// Coupling between two weighted point sets under squared-Euclidean cost.
struct TransportPlan {
  Eigen::MatrixXd source_points;  // n x d
  Eigen::MatrixXd target_points;  // m x d
  Eigen::VectorXd source_weights;
  Eigen::VectorXd target_weights;
  Eigen::MatrixXd coupling;  // n x m, nonnegative
  double cost = 0.0;         // sum coupling_ij |x_i - y_j|^2

  void validate(double marginal_tol = 1e-9) const;
};

// Closed-form W2 between Gaussians (Bures metric on covariances).
double w2_gaussian(const GaussianDensity& g0, const GaussianDensity& g1);

// W2 via the quantile (inverse-CDF) integral; accepts any one-dimensional
// state (grid, particles, Gaussian).
double w2_1d(const DensityState& q0, const DensityState& q1, long quantile_nodes = 8192);

// Exact optimal transport by successive shortest paths; supports <= 512
// atoms per side. Returns the W2 distance and the optimal plan.
std::pair<double, TransportPlan> w2_discrete_exact(const Eigen::MatrixXd& a_points,
                                                   const Eigen::VectorXd& a_weights,
                                                   const Eigen::MatrixXd& b_points,
                                                   const Eigen::VectorXd& b_weights);
std::pair<double, TransportPlan> w2_discrete_exact(const ParticleEnsemble& a,
                                                   const ParticleEnsemble& b);

struct SinkhornResult {
  double cost = 0.0;  // <plan, squared cost>, no entropy term
  TransportPlan plan;
  long iterations = 0;
  double marginal_violation = 0.0;
};

// Entropic plan via log-domain alternating scaling with an epsilon ladder
// warm start. Stops when the worst marginal violation is <= tol.
SinkhornResult sinkhorn(const Eigen::MatrixXd& a_points, const Eigen::VectorXd& a_weights,
                        const Eigen::MatrixXd& b_points, const Eigen::VectorXd& b_weights,
                        double epsilon, long max_iters = 200000, double tol = 1e-9,
                        int workers = 1);

enum class GeodesicRule { GaussianClosedForm, QuantileGrid, PlanDisplacement };

// Constant-speed displacement path between two states, with the sample grid
// its action is measured on.
struct GeodesicPath {
  DensityState q0;
  DensityState q1;
  GeodesicRule rule;
  std::optional<TransportPlan> plan;  // PlanDisplacement only
  std::vector<double> sample_times;   // includes 0 and 1
};

GeodesicPath make_geodesic(const DensityState& q0, const DensityState& q1, long samples = 17);

// State at interpolation time s in [0, 1]:
//   Gaussians  -> Bures geodesic (1D: N((1-s)mu0+s mu1, ((1-s)s0+s s1)^2))
//   1D grids   -> quantile interpolation Q_s = (1-s)Q0 + s Q1, rebinned
//   particles  -> displacement of the exact plan's atoms
DensityState mccann_interpolate(const DensityState& q0, const DensityState& q1, double s);
ParticleEnsemble mccann_interpolate(const TransportPlan& plan, double s);

// Normalized action int_0^1 sigma_s ds of a recorded run (= horizon times the
// physical sigma integral); needs at least 3 snapshots.
double path_action(const TrajectoryRecord& traj);

// Action of a geodesic, measured on its sample grid. Closed-form rules
// reproduce W2^2 at rounding accuracy; the grid quantile rule measures the
// rebinned path with finite-difference quantile velocities.
double path_action(const GeodesicPath& path);

// Best available backend for a pair of states, in precision order
// gaussian > quantile (1D) > exact discrete > sinkhorn. Returns the distance
// and the backend name.
std::pair<double, std::string> w2_auto(const DensityState& q0, const DensityState& q1);

// W2-optimal n-point equal-weight quantization of a 1D state (slice
// barycenters of the quantile function). Gaussian or grid input.
ParticleEnsemble quantize_1d(const DensityState& q, long n);

}  // namespace eslab

#endif
