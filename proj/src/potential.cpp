#include "eslab/potential.hpp"

#include <cmath>

#include "eslab/common.hpp"

namespace eslab {

Potential Potential::quadratic(int dim, double stiffness) {
  if (dim < 1) throw InputError("Potential: dim must be >= 1");
  if (!(stiffness > 0.0)) throw InputError("Quadratic: stiffness k must be > 0");
  Potential p(PotentialKind::Quadratic, dim);
  p.scalar_param_ = stiffness;
  return p;
}

Potential Potential::double_well(int dim, double well_location) {
  if (dim < 1) throw InputError("Potential: dim must be >= 1");
  if (!(well_location > 0.0)) throw InputError("DoubleWell: a must be > 0");
  Potential p(PotentialKind::DoubleWell, dim);
  p.scalar_param_ = well_location;
  return p;
}

Potential Potential::gaussian_mixture_well(int dim, double kappa, std::vector<GaussianBump> bumps) {
  if (dim < 1) throw InputError("Potential: dim must be >= 1");
  if (!(kappa > 0.0)) throw InputError("GaussianMixtureWell: kappa must be > 0");
  for (const auto& b : bumps) {
    if (!(b.weight > 0.0)) throw InputError("GaussianMixtureWell: bump weight must be > 0");
    if (!(b.rho > 0.0)) throw InputError("GaussianMixtureWell: bump rho must be > 0");
    if (b.center.size() != dim) throw InputError("GaussianMixtureWell: bump center dimension mismatch");
  }
  Potential p(PotentialKind::GaussianMixtureWell, dim);
  p.scalar_param_ = kappa;
  p.bumps_ = std::move(bumps);
  return p;
}

void Potential::check_dim(const Eigen::VectorXd& theta) const {
  if (theta.size() != dim_) {
    throw InputError("Potential: point has dimension " + std::to_string(theta.size()) +
                     ", expected " + std::to_string(dim_));
  }
}

double Potential::value(const Eigen::VectorXd& theta) const {
  check_dim(theta);
  switch (kind_) {
    case PotentialKind::Quadratic:
      return 0.5 * scalar_param_ * theta.squaredNorm();
    case PotentialKind::DoubleWell: {
      double v = 0.0;
      for (int i = 0; i < dim_; ++i) {
        const double r = theta[i] * theta[i] - scalar_param_;
        v += 0.25 * r * r;
      }
      return v;
    }
    case PotentialKind::GaussianMixtureWell: {
      double v = 0.5 * scalar_param_ * theta.squaredNorm();
      for (const auto& b : bumps_) {
        const double d2 = (theta - b.center).squaredNorm();
        v -= b.weight * std::exp(-d2 / (2.0 * b.rho * b.rho));
      }
      return v;
    }
  }
  throw InputError("Potential: unknown kind");
}

Eigen::VectorXd Potential::gradient(const Eigen::VectorXd& theta) const {
  Eigen::VectorXd g(dim_);
  gradient_into(theta, g);
  return g;
}

void Potential::gradient_into(const Eigen::VectorXd& theta, Eigen::VectorXd& out) const {
  check_dim(theta);
  switch (kind_) {
    case PotentialKind::Quadratic:
      out = scalar_param_ * theta;
      return;
    case PotentialKind::DoubleWell:
      for (int i = 0; i < dim_; ++i) {
        out[i] = theta[i] * (theta[i] * theta[i] - scalar_param_);
      }
      return;
    case PotentialKind::GaussianMixtureWell: {
      out = scalar_param_ * theta;
      for (const auto& b : bumps_) {
        const double rho2 = b.rho * b.rho;
        double d2 = 0.0;
        for (int i = 0; i < dim_; ++i) {
          const double diff = theta[i] - b.center[i];
          d2 += diff * diff;
        }
        const double factor = b.weight * std::exp(-d2 / (2.0 * rho2)) / rho2;
        for (int i = 0; i < dim_; ++i) {
          out[i] += factor * (theta[i] - b.center[i]);
        }
      }
      return;
    }
  }
  throw InputError("Potential: unknown kind");
}

double Potential::lower_bound() const {
  switch (kind_) {
    case PotentialKind::Quadratic:
    case PotentialKind::DoubleWell:
      return 0.0;
    case PotentialKind::GaussianMixtureWell: {
      // Quadratic envelope is nonnegative, each bump removes at most w_j.
      double drop = 0.0;
      for (const auto& b : bumps_) drop += b.weight;
      return -drop;
    }
  }
  return 0.0;
}

std::string Potential::kind_name() const {
  switch (kind_) {
    case PotentialKind::Quadratic:
      return "quadratic";
    case PotentialKind::DoubleWell:
      return "double_well";
    case PotentialKind::GaussianMixtureWell:
      return "gaussian_mixture_well";
  }
  return "unknown";
}

double Potential::stiffness() const {
  if (kind_ != PotentialKind::Quadratic) throw InputError("Potential: not quadratic");
  return scalar_param_;
}

double Potential::well_location() const {
  if (kind_ != PotentialKind::DoubleWell) throw InputError("Potential: not a double well");
  return scalar_param_;
}

double Potential::kappa() const {
  if (kind_ != PotentialKind::GaussianMixtureWell) throw InputError("Potential: not a mixture well");
  return scalar_param_;
}

const std::vector<GaussianBump>& Potential::bumps() const {
  if (kind_ != PotentialKind::GaussianMixtureWell) throw InputError("Potential: not a mixture well");
  return bumps_;
}

double gradient_check(const Potential& p, const std::vector<Eigen::VectorXd>& probes, double h) {
  if (!(h > 0.0)) throw InputError("gradient_check: h must be > 0");
  double worst = 0.0;
  for (const auto& theta : probes) {
    const Eigen::VectorXd analytic = p.gradient(theta);
    Eigen::VectorXd numeric(theta.size());
    Eigen::VectorXd probe = theta;
    for (int i = 0; i < theta.size(); ++i) {
      probe[i] = theta[i] + h;
      const double up = p.value(probe);
      probe[i] = theta[i] - h;
      const double down = p.value(probe);
      probe[i] = theta[i];
      numeric[i] = (up - down) / (2.0 * h);
    }
    const double err = (analytic - numeric).norm() / (1.0 + analytic.norm());
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace eslab
