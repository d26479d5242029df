#pragma once

#include <iosfwd>

#include "qgeom/dirac.hpp"

namespace qgeom {

struct RayState {
  double tau = 0.0;
  Point x;             // x^mu
  Eigen::Vector4d k;   // k_mu = p_mu - q A_mu
  CVector psi;         // unit spinor in ker D
  double intensity = 1.0;
};

/// H = 1/2 g^{mu nu} (p_mu - q A_mu)(p_nu - q A_nu) for canonical momentum p.
double hamiltonian(const SpacetimeModel& model, const Point& x, const Eigen::Vector4d& p);

/// F_{mu nu} = d_mu A_nu - d_nu A_mu
RMatrix field_strength(const SpacetimeModel& model, const Point& x);

/// On-shell, future-directed initial state with spatial k_i, psi the first kernel frame vector.
RayState initial_ray(const SpacetimeModel& model, const Point& x, const Eigen::Vector3d& k);

struct RayOptions {
  double tau_end = 10.0;
  double dt = 1e-3;
  bool no_name = true;  // include the (i/4) q F P sigma source in the spinor transport
};

struct TrajectoryPoint {
  RayState state;
  double h_drift = 0.0;          // |H(tau) - H(0)|
  double norm_drift = 0.0;       // |h(psi, psi) - 1| of the last step before re-projection
  double kernel_residual = 0.0;  // |P psi - psi| of the last step before re-projection
};

struct Trajectory {
  RayOptions options;
  bool has_spinor = false;
  std::vector<TrajectoryPoint> points;

  double max_h_drift() const;
  double max_abs_kz() const;
  double max_shell_residual(const SpacetimeModel& model) const;
  double max_norm_drift() const;
  double max_kernel_residual() const;
  double total_norm_drift() const;
  double total_kernel_residual() const;
};

/// Classical RK4 for Hamilton's equations in (x^mu, p_mu).
Trajectory integrate_ray(const SpacetimeModel& model, const RayState& initial,
                         const RayOptions& options);

/// Re-integrates the ray of `trajectory` together with
/// dpsi/dtau = -k^mu Omega_mu psi + (i/4) q F_{mu nu} P sigma^{mu nu} psi
///             - (q / 2m) F_{mu nu} k^nu gamma^mu psi,
/// projecting into ker D and renormalizing after every step. The last term is the
/// (k.grad P) psi component, zero on geodesics.
Trajectory transport_spinor(const SpacetimeModel& model, const Trajectory& trajectory,
                            const CVector& psi0);

using ScalarFieldFn = std::function<double(const Point&)>;
using CovectorFieldFn = std::function<Eigen::Vector4d(const Point&)>;

/// |d_mu (I k^mu) + Gamma^mu_{mu rho} I k^rho| at `point`.
double intensity_transport_residual(const SpacetimeModel& model, const ScalarFieldFn& intensity,
                                    const CovectorFieldFn& k, const Point& point, double step,
                                    FdScheme scheme = FdScheme::central4);

/// tau, x^mu, k_mu, Re/Im psi, then h_drift, norm_drift, kernel_residual.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);

}  // namespace qgeom
