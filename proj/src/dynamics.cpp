#include "eslab/dynamics.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>

#include "eslab/common.hpp"
#include "eslab/rng.hpp"
#include "eslab/thermo.hpp"

namespace eslab {

namespace {

// Bernoulli function x / (e^x - 1) of the exponential-fit flux.
double bernoulli_fn(double x) {
  if (std::abs(x) < 1e-8) return 1.0 - 0.5 * x + x * x / 12.0;
  if (x > 500.0) return 0.0;
  if (x < -500.0) return -x;
  return x / std::expm1(x);
}

bool should_record(long step, long steps, long record_every) {
  return step == 0 || step == steps || (step % record_every) == 0;
}

// Face drift a = -dPhi/dx_axis evaluated at interior faces; boundary faces
// carry no flux and are never read.
struct FaceDrift {
  // 1D: ax[i] is the face between cells i-1 and i, i in [1, n-1].
  // 2D: ax[iy * (nx + 1) + ix], ay[iy * nx + ix] with the same convention.
  std::vector<double> ax;
  std::vector<double> ay;
  double max_norm = 0.0;
};

FaceDrift face_drift(const GridDensity& g, const Potential& p) {
  FaceDrift fd;
  const int d = g.dim();
  if (d == 1) {
    const long n = g.cells[0];
    fd.ax.assign(static_cast<std::size_t>(n + 1), 0.0);
    Eigen::VectorXd x(1);
    for (long i = 1; i < n; ++i) {
      x[0] = g.domain[0].first + static_cast<double>(i) * g.cell_width(0);
      const double a = -p.gradient(x)[0];
      fd.ax[static_cast<std::size_t>(i)] = a;
      fd.max_norm = std::max(fd.max_norm, std::abs(a));
    }
    return fd;
  }
  const long nx = g.cells[0];
  const long ny = g.cells[1];
  fd.ax.assign(static_cast<std::size_t>((nx + 1) * ny), 0.0);
  fd.ay.assign(static_cast<std::size_t>(nx * (ny + 1)), 0.0);
  Eigen::VectorXd x(2);
  for (long iy = 0; iy < ny; ++iy) {
    x[1] = g.center(1, iy);
    for (long ix = 1; ix < nx; ++ix) {
      x[0] = g.domain[0].first + static_cast<double>(ix) * g.cell_width(0);
      const Eigen::VectorXd grad = p.gradient(x);
      fd.ax[static_cast<std::size_t>(iy * (nx + 1) + ix)] = -grad[0];
      fd.max_norm = std::max(fd.max_norm, grad.norm());
    }
  }
  for (long iy = 1; iy < ny; ++iy) {
    x[1] = g.domain[1].first + static_cast<double>(iy) * g.cell_width(1);
    for (long ix = 0; ix < nx; ++ix) {
      x[0] = g.center(0, ix);
      const Eigen::VectorXd grad = p.gradient(x);
      fd.ay[static_cast<std::size_t>(iy * nx + ix)] = -grad[1];
      fd.max_norm = std::max(fd.max_norm, grad.norm());
    }
  }
  return fd;
}

double face_flux(double a, double q_left, double q_right, double dx, double temperature,
                 FluxScheme scheme) {
  if (scheme == FluxScheme::ExponentialFit && temperature > 0.0) {
    const double w = a * dx / temperature;
    return (temperature / dx) * (bernoulli_fn(-w) * q_left - bernoulli_fn(w) * q_right);
  }
  const double advect = a >= 0.0 ? a * q_left : a * q_right;
  return advect - temperature * (q_right - q_left) / dx;
}

// Applies the per-cell negative policy after an explicit update.
void enforce_positivity(Eigen::VectorXd& values, long step_index, long* clamp_count) {
  for (long i = 0; i < values.size(); ++i) {
    double& v = values[i];
    if (v >= 0.0) continue;
    if (v <= -1e-8) {
      throw BlowUpError("fp_step: cell " + std::to_string(i) + " went to " + fmt_double(v) +
                            " at step " + std::to_string(step_index) +
                            "; the explicit scheme was driven outside its stability region",
                        step_index);
    }
    if (v < -1e-14 && clamp_count != nullptr) ++(*clamp_count);
    v = 0.0;
  }
}

GridDensity fp_step_impl(const GridDensity& q, const FaceDrift& fd, double temperature, double dt,
                         FluxScheme scheme, long* clamp_count, long step_index) {
  GridDensity out = q;
  const int d = q.dim();
  if (d == 1) {
    const long n = q.cells[0];
    const double dx = q.cell_width(0);
    double flux_left = 0.0;  // no-flux boundary
    for (long i = 0; i < n; ++i) {
      const double flux_right =
          (i + 1 < n)
              ? face_flux(fd.ax[static_cast<std::size_t>(i + 1)], q.values[i], q.values[i + 1], dx,
                          temperature, scheme)
              : 0.0;
      out.values[i] = q.values[i] - dt * (flux_right - flux_left) / dx;
      flux_left = flux_right;
    }
  } else {
    const long nx = q.cells[0];
    const long ny = q.cells[1];
    const double dx = q.cell_width(0);
    const double dy = q.cell_width(1);
    for (long iy = 0; iy < ny; ++iy) {
      for (long ix = 0; ix < nx; ++ix) {
        const long flat = iy * nx + ix;
        const double fx_left =
            ix > 0 ? face_flux(fd.ax[static_cast<std::size_t>(iy * (nx + 1) + ix)],
                               q.values[flat - 1], q.values[flat], dx, temperature, scheme)
                   : 0.0;
        const double fx_right =
            ix + 1 < nx ? face_flux(fd.ax[static_cast<std::size_t>(iy * (nx + 1) + ix + 1)],
                                    q.values[flat], q.values[flat + 1], dx, temperature, scheme)
                        : 0.0;
        const double fy_down =
            iy > 0 ? face_flux(fd.ay[static_cast<std::size_t>(iy * nx + ix)], q.values[flat - nx],
                               q.values[flat], dy, temperature, scheme)
                   : 0.0;
        const double fy_up =
            iy + 1 < ny ? face_flux(fd.ay[static_cast<std::size_t>((iy + 1) * nx + ix)],
                                    q.values[flat], q.values[flat + nx], dy, temperature, scheme)
                        : 0.0;
        out.values[flat] =
            q.values[flat] - dt * ((fx_right - fx_left) / dx + (fy_up - fy_down) / dy);
      }
    }
  }
  enforce_positivity(out.values, step_index, clamp_count);
  return out;
}

double cfl_from_drift(const GridDensity& q, double max_drift, double temperature) {
  const int d = q.dim();
  double min_dx = std::numeric_limits<double>::infinity();
  for (int a = 0; a < d; ++a) min_dx = std::min(min_dx, q.cell_width(a));
  double bound = std::numeric_limits<double>::infinity();
  if (temperature > 0.0) bound = min_dx * min_dx / (2.0 * d * temperature);
  if (max_drift > 0.0) bound = std::min(bound, min_dx / max_drift);
  if (!std::isfinite(bound)) {
    // Zero drift and zero diffusion: any step is stable, pick something sane.
    bound = 1.0 / 0.4;
  }
  return 0.4 * bound;
}

}  // namespace

void Schedule::validate() const {
  if (!(horizon > 0.0)) throw InputError("Schedule: horizon must be > 0");
  if (steps < 1) throw InputError("Schedule: steps must be >= 1");
  if (record_every < 1) throw InputError("Schedule: record_every must be >= 1");
}

void TrajectoryRecord::validate() const {
  if (s.size() != snapshots.size()) throw InputError("TrajectoryRecord: time/snapshot mismatch");
  if (s.size() < 2) throw InputError("TrajectoryRecord: needs at least two snapshots");
  if (std::abs(s.front()) > 1e-12 || std::abs(s.back() - 1.0) > 1e-12) {
    throw InputError("TrajectoryRecord: snapshots must span s = 0 to s = 1");
  }
  for (std::size_t k = 1; k < s.size(); ++k) {
    if (!(s[k] > s[k - 1])) throw InputError("TrajectoryRecord: times must increase strictly");
  }
  if (!sigma.empty()) {
    if (sigma.size() != s.size()) throw InputError("TrajectoryRecord: sigma series length mismatch");
    for (double v : sigma) {
      if (!(v >= 0.0)) throw InputError("TrajectoryRecord: sigma must be nonnegative");
    }
  }
}

double cfl_time_step(const GridDensity& q, const Potential& p, double temperature) {
  q.validate();
  if (q.dim() != p.dim()) throw InputError("cfl_time_step: dimension mismatch");
  if (temperature < 0.0) throw InputError("cfl_time_step: temperature must be >= 0");
  // Drift maxima over faces and domain corners; the corners dominate for
  // confining potentials.
  double max_drift = face_drift(q, p).max_norm;
  const int d = q.dim();
  for (int corner = 0; corner < (1 << d); ++corner) {
    Eigen::VectorXd x(d);
    for (int a = 0; a < d; ++a) {
      x[a] = (corner >> a) & 1 ? q.domain[a].second : q.domain[a].first;
    }
    max_drift = std::max(max_drift, p.gradient(x).norm());
  }
  return cfl_from_drift(q, max_drift, temperature);
}

ParticleEnsemble langevin_step(const ParticleEnsemble& e, const Potential& p, double temperature,
                               double dt, std::uint64_t seed, long step_index, int workers) {
  e.validate();
  if (e.dim() != p.dim()) throw InputError("langevin_step: dimension mismatch");
  if (!(dt > 0.0)) throw InputError("langevin_step: dt must be > 0");
  if (temperature < 0.0) throw InputError("langevin_step: temperature must be >= 0");

  ParticleEnsemble out = e;
  const int d = e.dim();
  const double noise = std::sqrt(2.0 * temperature * dt);
  std::atomic<long> bad{-1};
  parallel_for_chunks(e.count(), workers, [&](std::int64_t lo, std::int64_t hi) {
    Eigen::VectorXd theta(d);
    Eigen::VectorXd grad(d);
    for (std::int64_t i = lo; i < hi; ++i) {
      theta = e.positions.row(i);
      p.gradient_into(theta, grad);
      theta -= dt * grad;
      if (noise > 0.0) {
        for (int j = 0; j < d; j += 2) {
          const NormalPair z =
              normal_pair(seed, RngStream::Langevin, static_cast<std::uint64_t>(step_index),
                          static_cast<std::uint64_t>(i) * 32 + static_cast<std::uint64_t>(j / 2));
          theta[j] += noise * z.z0;
          if (j + 1 < d) theta[j + 1] += noise * z.z1;
        }
      }
      if (!theta.allFinite()) bad.store(i);
      out.positions.row(i) = theta.transpose();
    }
  });
  if (bad.load() >= 0) {
    throw BlowUpError("langevin_step: particle " + std::to_string(bad.load()) +
                          " became non-finite at step " + std::to_string(step_index),
                      step_index);
  }
  return out;
}

TrajectoryRecord simulate_langevin(const ParticleEnsemble& e0, const Potential& p,
                                   double temperature, const Schedule& sched, std::uint64_t seed,
                                   int workers) {
  e0.validate();
  sched.validate();
  if (e0.dim() != p.dim()) throw InputError("simulate_langevin: dimension mismatch");

  TrajectoryRecord traj;
  traj.schedule = sched;
  traj.temperature = temperature;
  traj.potential = p;
  traj.seed = seed;

  ParticleEnsemble state = e0;
  state.seed_provenance = seed;
  const double dt = sched.dt();
  for (long step = 0; step <= sched.steps; ++step) {
    if (should_record(step, sched.steps, sched.record_every)) {
      traj.s.push_back(static_cast<double>(step) / static_cast<double>(sched.steps));
      traj.snapshots.emplace_back(state);
    }
    if (step < sched.steps) {
      state = langevin_step(state, p, temperature, dt, seed, step, workers);
    }
  }
  traj.validate();
  return traj;
}

GridDensity fp_step(const GridDensity& q, const Potential& p, double temperature, double dt,
                    FluxScheme scheme, long* clamp_count, long step_index) {
  q.validate();
  if (q.dim() != p.dim()) throw InputError("fp_step: dimension mismatch");
  if (!(dt > 0.0)) throw InputError("fp_step: dt must be > 0");
  if (temperature < 0.0) throw InputError("fp_step: temperature must be >= 0");
  const FaceDrift fd = face_drift(q, p);
  const double limit = cfl_from_drift(q, fd.max_norm, temperature);
  if (dt > limit * (1.0 + 1e-12)) {
    throw StabilityError("fp_step: dt " + fmt_double(dt) + " violates the CFL bound " +
                             fmt_double(limit) + "; use dt <= " + fmt_double(limit),
                         limit);
  }
  return fp_step_impl(q, fd, temperature, dt, scheme, clamp_count, step_index);
}

TrajectoryRecord simulate_fp(const GridDensity& q0, const Potential& p, double temperature,
                             const Schedule& sched, FluxScheme scheme) {
  q0.validate();
  sched.validate();
  if (q0.dim() != p.dim()) throw InputError("simulate_fp: dimension mismatch");
  if (temperature < 0.0) throw InputError("simulate_fp: temperature must be >= 0");

  const FaceDrift fd = face_drift(q0, p);
  double max_drift = fd.max_norm;
  const int d = q0.dim();
  for (int corner = 0; corner < (1 << d); ++corner) {
    Eigen::VectorXd x(d);
    for (int a = 0; a < d; ++a) {
      x[a] = (corner >> a) & 1 ? q0.domain[a].second : q0.domain[a].first;
    }
    max_drift = std::max(max_drift, p.gradient(x).norm());
  }
  const double limit = cfl_from_drift(q0, max_drift, temperature);
  const double dt = sched.dt();
  if (dt > limit * (1.0 + 1e-12)) {
    const long suggested = static_cast<long>(std::ceil(sched.horizon / limit));
    throw StabilityError("simulate_fp: dt " + fmt_double(dt) + " violates the CFL bound " +
                             fmt_double(limit) + "; use at least " + std::to_string(suggested) +
                             " steps",
                         limit);
  }

  TrajectoryRecord traj;
  traj.schedule = sched;
  traj.temperature = temperature;
  traj.potential = p;

  GridDensity state = q0;
  for (long step = 0; step <= sched.steps; ++step) {
    if (should_record(step, sched.steps, sched.record_every)) {
      traj.s.push_back(static_cast<double>(step) / static_cast<double>(sched.steps));
      traj.sigma.push_back(entropy_production_rate(state, velocity_field(state, p, temperature)));
      traj.snapshots.emplace_back(state);
    }
    if (step < sched.steps) {
      state = fp_step_impl(state, fd, temperature, dt, scheme, &traj.negative_clamps, step);
    }
  }
  traj.validate();
  return traj;
}

VelocityField velocity_field(const GridDensity& q, const Potential& p, double temperature) {
  q.validate();
  if (q.dim() != p.dim()) throw InputError("velocity_field: dimension mismatch");
  const int d = q.dim();
  const long n = q.cell_count();
  const double floor = log_floor(q);

  VelocityField field;
  field.domain = q.domain;
  field.cells = q.cells;
  field.values.resize(n, d);

  Eigen::VectorXd logq(n);
  std::vector<char> resolved(static_cast<std::size_t>(n));
  for (long i = 0; i < n; ++i) {
    resolved[static_cast<std::size_t>(i)] = q.values[i] >= floor;
    logq[i] = std::log(std::max(q.values[i], floor));
  }

  // grad log q along one axis; second-order everywhere. A gradient is only
  // trusted when every stencil cell sits above the floor; near the support
  // edge the clamped logs carry no information and the cell moves no mass.
  const auto log_grad = [&](long flat, int axis, long index, long count, long stride,
                            bool& trusted) {
    const double dx = q.cell_width(axis);
    const auto ok = [&](long offset) { return resolved[static_cast<std::size_t>(flat + offset)]; };
    if (index > 0 && index + 1 < count) {
      trusted = trusted && ok(-stride) && ok(stride);
      return (logq[flat + stride] - logq[flat - stride]) / (2.0 * dx);
    }
    if (index == 0) {
      trusted = trusted && ok(stride) && ok(2 * stride);
      return (-3.0 * logq[flat] + 4.0 * logq[flat + stride] - logq[flat + 2 * stride]) / (2.0 * dx);
    }
    trusted = trusted && ok(-stride) && ok(-2 * stride);
    return (3.0 * logq[flat] - 4.0 * logq[flat - stride] + logq[flat - 2 * stride]) / (2.0 * dx);
  };

  for (long i = 0; i < n; ++i) {
    if (!resolved[static_cast<std::size_t>(i)]) {
      field.values.row(i).setZero();
      continue;
    }
    const Eigen::VectorXd grad_phi = p.gradient(q.cell_center(i));
    if (temperature == 0.0) {
      field.values.row(i) = -grad_phi.transpose();
      continue;
    }
    bool trusted = true;
    if (d == 1) {
      const double grad = log_grad(i, 0, i, q.cells[0], 1, trusted);
      field.values(i, 0) = trusted ? -grad_phi[0] - temperature * grad : 0.0;
    } else {
      const long nx = q.cells[0];
      const long ix = i % nx;
      const long iy = i / nx;
      const double gx = log_grad(i, 0, ix, nx, 1, trusted);
      const double gy = log_grad(i, 1, iy, q.cells[1], nx, trusted);
      if (trusted) {
        field.values(i, 0) = -grad_phi[0] - temperature * gx;
        field.values(i, 1) = -grad_phi[1] - temperature * gy;
      } else {
        field.values.row(i).setZero();
      }
    }
  }
  return field;
}

double gaussian_sigma_rate(const GaussianDensity& g, const Potential& quadratic,
                           double temperature) {
  g.validate();
  if (quadratic.kind() != PotentialKind::Quadratic) {
    throw UnsupportedError("gaussian_sigma_rate: closed form requires a quadratic potential");
  }
  if (g.dim() != quadratic.dim()) throw InputError("gaussian_sigma_rate: dimension mismatch");
  const double k = quadratic.stiffness();
  const int d = g.dim();
  const Eigen::MatrixXd inv = g.covariance.llt().solve(Eigen::MatrixXd::Identity(d, d));
  return k * k * g.mean.squaredNorm() + temperature * temperature * inv.trace() -
         2.0 * d * k * temperature + k * k * g.covariance.trace();
}

Eigen::VectorXd ou_mean(const Eigen::VectorXd& mu0, double stiffness, double tau) {
  return mu0 * std::exp(-stiffness * tau);
}

Eigen::MatrixXd ou_covariance(const Eigen::MatrixXd& cov0, double stiffness, double temperature,
                              double tau) {
  const double decay = std::exp(-2.0 * stiffness * tau);
  const long d = cov0.rows();
  return cov0 * decay +
         (temperature / stiffness) * (1.0 - decay) * Eigen::MatrixXd::Identity(d, d);
}

TrajectoryRecord ou_closed_form_trajectory(const GaussianDensity& q0, const Potential& quadratic,
                                           double temperature, const Schedule& sched) {
  q0.validate();
  sched.validate();
  if (quadratic.kind() != PotentialKind::Quadratic) {
    throw UnsupportedError("ou_closed_form_trajectory: requires a quadratic potential");
  }
  if (q0.dim() != quadratic.dim()) {
    throw InputError("ou_closed_form_trajectory: dimension mismatch");
  }
  const double k = quadratic.stiffness();

  TrajectoryRecord traj;
  traj.schedule = sched;
  traj.temperature = temperature;
  traj.potential = quadratic;
  for (long step = 0; step <= sched.steps; ++step) {
    if (!should_record(step, sched.steps, sched.record_every)) continue;
    const double s = static_cast<double>(step) / static_cast<double>(sched.steps);
    const double tau = s * sched.horizon;
    GaussianDensity g;
    g.mean = ou_mean(q0.mean, k, tau);
    g.covariance = ou_covariance(q0.covariance, k, temperature, tau);
    traj.s.push_back(s);
    traj.sigma.push_back(gaussian_sigma_rate(g, quadratic, temperature));
    traj.snapshots.emplace_back(std::move(g));
  }
  traj.validate();
  return traj;
}

}  // namespace eslab
