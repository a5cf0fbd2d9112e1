#pragma once

#include <Eigen/Core>
#include <optional>

namespace pftopo {

struct FractureConstants {
  double psi_c = 0.0;
  double l_f = 0.0;
  double zeta = 1.0;
  double eta_f = 0.0;
};

double crack_density(double d, const Eigen::Vector3d& grad_d, double l_f);

// Exactly one of sigma_c or G_c must be given.
double critical_psi(std::optional<double> sigma_c, std::optional<double> G_c, double young,
                    double l_f);

// zeta * <(psi_plus + psi_p)/psi_c - 1>
double driving_force(double psi_plus, double psi_p, const FractureConstants& c);
// Derivative of driving_force with respect to psi_plus + psi_p.
double driving_force_slope(double psi_plus, double psi_p, const FractureConstants& c);

double update_history(double history_n, double d_tilde);

}  // namespace pftopo
