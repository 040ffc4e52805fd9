#ifndef ESLAB_POTENTIAL_HPP
#define ESLAB_POTENTIAL_HPP

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace eslab {

enum class PotentialKind { Quadratic, DoubleWell, GaussianMixtureWell };

struct GaussianBump {
  double weight;           // w > 0
  Eigen::VectorXd center;  // c, dimension d
  double rho;              // width > 0
};

// Confining objective landscape with analytic value and gradient.
//   Quadratic:            (k/2) |theta|^2
//   DoubleWell:           sum_i (theta_i^2 - a)^2 / 4
//   GaussianMixtureWell:  (kappa/2) |theta|^2 - sum_j w_j exp(-|theta-c_j|^2 / (2 rho_j^2))
// Immutable after construction; evaluation is pure and thread-safe.
class Potential {
public:
  static Potential quadratic(int dim, double stiffness);
  static Potential double_well(int dim, double well_location);
  static Potential gaussian_mixture_well(int dim, double kappa, std::vector<GaussianBump> bumps);

  double value(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& theta) const;
  // Allocation-free form for hot loops; out must have size dim().
  void gradient_into(const Eigen::VectorXd& theta, Eigen::VectorXd& out) const;

  // Guaranteed lower bound on value(); not necessarily attained.
  double lower_bound() const;

  int dim() const { return dim_; }
  PotentialKind kind() const { return kind_; }
  std::string kind_name() const;

  // Kind-specific parameters (throws InputError when queried for another kind).
  double stiffness() const;
  double well_location() const;
  double kappa() const;
  const std::vector<GaussianBump>& bumps() const;

private:
  Potential(PotentialKind kind, int dim) : kind_(kind), dim_(dim) {}
  void check_dim(const Eigen::VectorXd& theta) const;

  PotentialKind kind_;
  int dim_;
  double scalar_param_ = 0.0;  // k, a, or kappa
  std::vector<GaussianBump> bumps_;
};

// Max over probes of |analytic - central difference| / (1 + |analytic|),
// with the central difference taken at step h per coordinate.
double gradient_check(const Potential& p, const std::vector<Eigen::VectorXd>& probes, double h);

}  // namespace eslab

#endif
