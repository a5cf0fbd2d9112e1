#include "pftopo/phasefield.hpp"

#include <algorithm>
#include <cmath>

#include "pftopo/errors.hpp"

namespace pftopo {

double crack_density(double d, const Eigen::Vector3d& grad_d, double l_f) {
  if (!(l_f > 0.0)) throw InvalidArgument("crack_density: l_f must be > 0");
  return 0.5 * (d * d / l_f + l_f * grad_d.squaredNorm());
}

double critical_psi(std::optional<double> sigma_c, std::optional<double> G_c, double young,
                    double l_f) {
  if (sigma_c.has_value() == G_c.has_value())
    throw InvalidArgument("critical_psi: give exactly one of sigma_c or G_c");
  if (sigma_c) {
    if (!(young > 0.0)) throw InvalidArgument("critical_psi: Young's modulus must be > 0");
    return (*sigma_c) * (*sigma_c) / (2.0 * young);
  }
  if (!(l_f > 0.0)) throw InvalidArgument("critical_psi: l_f must be > 0");
  return 3.0 * (*G_c) / (8.0 * l_f * std::sqrt(2.0));
}

double driving_force(double psi_plus, double psi_p, const FractureConstants& c) {
  if (!(c.psi_c > 0.0)) throw InvalidArgument("driving_force: psi_c must be > 0");
  return c.zeta * std::max(0.0, (psi_plus + psi_p) / c.psi_c - 1.0);
}

double driving_force_slope(double psi_plus, double psi_p, const FractureConstants& c) {
  if (!(c.psi_c > 0.0)) throw InvalidArgument("driving_force: psi_c must be > 0");
  return (psi_plus + psi_p) / c.psi_c - 1.0 > 0.0 ? c.zeta / c.psi_c : 0.0;
}

double update_history(double history_n, double d_tilde) { return std::max(history_n, d_tilde); }

}  // namespace pftopo
