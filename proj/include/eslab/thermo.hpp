#ifndef ESLAB_THERMO_HPP
#define ESLAB_THERMO_HPP

#include <utility>
#include <vector>

#include "eslab/density.hpp"
#include "eslab/dynamics.hpp"
#include "eslab/potential.hpp"

namespace eslab {

// Free energy F = E_q[Phi] - T H[q] with its components, evaluated at one
// snapshot. Components are carried so downstream checks never re-estimate.
struct ThermoReport {
  double free_energy = 0.0;
  double entropy = 0.0;
  double mean_objective = 0.0;
  double temperature = 0.0;
  double at_s = 0.0;
};

// Accumulated dissipation of one run. sigma_series pairs are (s_k, physical
// rate); sigma_integral is the physical time integral over [0, horizon].
struct DissipationLedger {
  std::vector<std::pair<double, double>> sigma_series;
  double sigma_integral = 0.0;
  double free_energy_drop = 0.0;
  double residual = 0.0;  // |free_energy_drop - sigma_integral|
  double horizon = 1.0;
};

ThermoReport free_energy(const DensityState& q, const Potential& p, double temperature,
                         double at_s = 0.0);

// Midpoint quadrature of q |v|^2 over the grid; nonnegative by construction.
double entropy_production_rate(const GridDensity& q, const VelocityField& v);

// Trapezoidal integral of the recorded sigma series against physical time,
// plus the endpoint free-energy drop. Requires a sigma series (grid or
// closed-form trajectories); particle runs are not supported.
DissipationLedger accumulate_sigma(const TrajectoryRecord& traj);

// Algebraic split of F[q0] - F[q1] into (E_{q0}[Phi] - E_{q1}[Phi],
// T (H[q1] - H[q0])); the two entries sum to the free-energy difference.
std::pair<double, double> decompose_free_energy(const DensityState& q0, const DensityState& q1,
                                                const Potential& p, double temperature);

}  // namespace eslab

#endif
