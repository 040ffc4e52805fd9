#include "eslab/thermo.hpp"

#include <cmath>

#include "eslab/common.hpp"

namespace eslab {

ThermoReport free_energy(const DensityState& q, const Potential& p, double temperature,
                         double at_s) {
  if (temperature < 0.0) throw InputError("free_energy: temperature must be >= 0");
  ThermoReport r;
  r.mean_objective = expectation(q, p);
  r.entropy = temperature == 0.0 ? 0.0 : entropy(q);
  r.temperature = temperature;
  r.at_s = at_s;
  r.free_energy = r.mean_objective - temperature * r.entropy;
  return r;
}

double entropy_production_rate(const GridDensity& q, const VelocityField& v) {
  if (q.cells != v.cells || q.domain != v.domain) {
    throw InputError("entropy_production_rate: grid and velocity field do not match");
  }
  NeumaierSum acc;
  for (long i = 0; i < q.values.size(); ++i) {
    if (q.values[i] == 0.0) continue;
    acc.add(q.values[i] * v.values.row(i).squaredNorm());
  }
  const double rate = acc.value() * q.cell_volume;
  return rate < 0.0 ? 0.0 : rate;
}

DissipationLedger accumulate_sigma(const TrajectoryRecord& traj) {
  traj.validate();
  if (traj.sigma.empty()) {
    throw UnsupportedError(
        "accumulate_sigma: trajectory carries no sigma series (particle runs "
        "do not define a velocity-field estimate)");
  }

  DissipationLedger ledger;
  ledger.horizon = traj.schedule.horizon;
  ledger.sigma_series.reserve(traj.s.size());
  for (std::size_t k = 0; k < traj.s.size(); ++k) {
    ledger.sigma_series.emplace_back(traj.s[k], traj.sigma[k]);
  }

  // Trapezoid against physical time tau = s * horizon.
  NeumaierSum integral;
  for (std::size_t k = 1; k < traj.s.size(); ++k) {
    const double dtau = (traj.s[k] - traj.s[k - 1]) * traj.schedule.horizon;
    integral.add(0.5 * dtau * (traj.sigma[k] + traj.sigma[k - 1]));
  }
  ledger.sigma_integral = integral.value();

  const ThermoReport first =
      free_energy(traj.snapshots.front(), traj.potential, traj.temperature, traj.s.front());
  const ThermoReport last =
      free_energy(traj.snapshots.back(), traj.potential, traj.temperature, traj.s.back());
  ledger.free_energy_drop = first.free_energy - last.free_energy;
  ledger.residual = std::abs(ledger.free_energy_drop - ledger.sigma_integral);
  return ledger;
}

std::pair<double, double> decompose_free_energy(const DensityState& q0, const DensityState& q1,
                                                const Potential& p, double temperature) {
  if (temperature < 0.0) throw InputError("decompose_free_energy: temperature must be >= 0");
  const double objective_change = expectation(q0, p) - expectation(q1, p);
  const double entropy_term =
      temperature == 0.0 ? 0.0 : temperature * (entropy(q1) - entropy(q0));
  return {objective_change, entropy_term};
}

}  // namespace eslab
