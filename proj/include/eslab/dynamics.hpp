#ifndef ESLAB_DYNAMICS_HPP
#define ESLAB_DYNAMICS_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "eslab/density.hpp"
#include "eslab/potential.hpp"

namespace eslab {

// Time discretization of one run. Physical time tau runs over [0, horizon];
// snapshots are indexed by normalized time s = tau / horizon in [0, 1].
struct Schedule {
  double horizon = 1.0;
  long steps = 1;
  long record_every = 1;

  double dt() const { return horizon / static_cast<double>(steps); }
  void validate() const;
};

// Probability-flow field v = -grad(Phi + T log q) sampled on grid cells.
struct VelocityField {
  std::vector<std::pair<double, double>> domain;
  std::vector<long> cells;
  Eigen::MatrixXd values;  // cell_count x d

  long cell_count() const { return values.rows(); }
  int dim() const { return static_cast<int>(values.cols()); }
};

// Recorded run: states plus the physical entropy-production rate at each
// snapshot. sigma is empty for particle runs (no field estimate is defined).
struct TrajectoryRecord {
  std::vector<double> s;  // normalized times, s_0 = 0, s_last = 1
  std::vector<DensityState> snapshots;
  std::vector<double> sigma;  // physical rate at each s_k, or empty
  Schedule schedule;
  double temperature = 0.0;
  Potential potential = Potential::quadratic(1, 1.0);
  std::uint64_t seed = 0;
  long negative_clamps = 0;  // grid cells clamped from tiny negatives

  void validate() const;
};

// Flux discretizations for the grid solver. Upwind is first-order; the
// exponential-fit (Scharfetter-Gummel) flux reproduces discrete Gibbs
// stationary states exactly and is second-order in space.
enum class FluxScheme { Upwind, ExponentialFit };

// Largest stable explicit step: 0.4 * min(dx^2 / (2 d T), dx / max |grad Phi|),
// with the gradient maximized over cell faces.
double cfl_time_step(const GridDensity& q, const Potential& p, double temperature);

// One Euler-Maruyama step theta -= grad Phi dt - sqrt(2 T dt) xi. Draws are
// keyed by (seed, step_index, particle), so worker count never matters.
ParticleEnsemble langevin_step(const ParticleEnsemble& e, const Potential& p, double temperature,
                               double dt, std::uint64_t seed, long step_index, int workers = 1);

TrajectoryRecord simulate_langevin(const ParticleEnsemble& e0, const Potential& p,
                                   double temperature, const Schedule& sched, std::uint64_t seed,
                                   int workers = 1);

// One conservative finite-volume step with no-flux boundaries. Throws
// StabilityError when dt exceeds the CFL bound and BlowUpError/InputError on
// invalid states; cells in (-1e-8, 0) are clamped, counted via clamp_count.
GridDensity fp_step(const GridDensity& q, const Potential& p, double temperature, double dt,
                    FluxScheme scheme = FluxScheme::Upwind, long* clamp_count = nullptr,
                    long step_index = 0);

TrajectoryRecord simulate_fp(const GridDensity& q0, const Potential& p, double temperature,
                             const Schedule& sched, FluxScheme scheme = FluxScheme::Upwind);

// Central differences for grad log q in the interior, second-order one-sided
// at boundaries; cells below the density floor carry zero velocity.
VelocityField velocity_field(const GridDensity& q, const Potential& p, double temperature);

// Closed-form Gaussian trajectory under an isotropic quadratic potential:
//   mu(tau) = mu0 e^{-k tau},  Sigma(tau) = Sigma0 e^{-2k tau} + (T/k)(1 - e^{-2k tau}) I
// with the analytic sigma rate attached at each snapshot.
TrajectoryRecord ou_closed_form_trajectory(const GaussianDensity& q0, const Potential& quadratic,
                                           double temperature, const Schedule& sched);

// Analytic entropy-production rate of a Gaussian state under a quadratic
// potential: k^2 |mu|^2 + tr((T Sigma^{-1} - k I)^2 Sigma).
double gaussian_sigma_rate(const GaussianDensity& g, const Potential& quadratic, double temperature);

// OU moment maps, shared by oracles and scenario builders.
Eigen::VectorXd ou_mean(const Eigen::VectorXd& mu0, double stiffness, double tau);
Eigen::MatrixXd ou_covariance(const Eigen::MatrixXd& cov0, double stiffness, double temperature,
                              double tau);

}  // namespace eslab

#endif
