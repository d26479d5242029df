#include "qgeom/rays.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

namespace qgeom {

namespace {

struct Phase {
  Point x;
  Eigen::Vector4d p;  // canonical momentum
  CVector psi;
};

struct Rates {
  Eigen::Vector4d dx;
  Eigen::Vector4d dp;
  CVector dpsi;
};

void require_inside(const SpacetimeModel& model, const Point& x) {
  if (!x.allFinite()) throw Error(ErrorKind::StepRejected, "non-finite ray state");
  if (!model.chart.contains(x)) throw Error(ErrorKind::LeftDomain, "ray left the chart domain");
}

/// Row mu holds d_mu A_nu.
RMatrix potential_gradient(const SpacetimeModel& model, const Point& x) {
  const FieldFn a = [&model](const Point& y) {
    return CMatrix(model.potential(y).cast<cplx>().transpose());
  };
  RMatrix d(4, 4);
  for (int mu = 0; mu < 4; ++mu)
    d.row(mu) = fd_partial(model.chart, a, x, mu, model.step, model.scheme).real();
  return d;
}

Rates rates(const SpacetimeModel& model, const Phase& s, bool spinor, bool no_name) {
  require_inside(model, s.x);
  const RMatrix ginv = inverse_metric(model, s.x);
  const Eigen::Vector4d k = s.p - model.q * model.potential(s.x);
  const Eigen::Vector4d ku = ginv * k;
  const std::vector<RMatrix> dg = metric_derivatives(model, s.x);
  const RMatrix dA = potential_gradient(model, s.x);
  Rates r;
  r.dx = ku;
  for (int mu = 0; mu < 4; ++mu)
    r.dp[mu] = 0.5 * ku.dot(dg[static_cast<size_t>(mu)] * ku) + model.q * dA.row(mu).dot(ku);
  if (!spinor) return r;

  const SpinConnection sc = spin_connection(model, s.x);
  CMatrix conn = CMatrix::Zero(4, 4);
  for (int mu = 0; mu < 4; ++mu) conn += ku[mu] * sc.spinor[static_cast<size_t>(mu)];
  r.dpsi = -conn * s.psi;
  if (no_name && model.q != 0.0) {
    const RMatrix F = dA - dA.transpose();
    const Gammas g = curved_gammas(model, s.x);
    CMatrix slash = CMatrix::Zero(4, 4);
    for (int mu = 0; mu < 4; ++mu) slash += k[mu] * g[static_cast<size_t>(mu)];
    const CMatrix P = (model.m * CMatrix::Identity(4, 4) - slash) / (2.0 * model.m);
    const std::vector<CMatrix> sigma = sigma_matrices(g);
    CMatrix fs = CMatrix::Zero(4, 4);
    for (int mu = 0; mu < 4; ++mu)
      for (int nu = 0; nu < 4; ++nu)
        if (F(mu, nu) != 0.0) fs += F(mu, nu) * sigma[static_cast<size_t>(mu * 4 + nu)];
    r.dpsi += (0.25 * kI * model.q) * (P * (fs * s.psi));
  }
  if (model.q != 0.0) {
    // complement P' k.grad psi = (k.grad P) psi, with k.grad k_mu = q F_{mu nu} k^nu
    const RMatrix F = dA - dA.transpose();
    const Eigen::Vector4d force = model.q * (F * ku);
    const Gammas g = curved_gammas(model, s.x);
    CMatrix dslash = CMatrix::Zero(4, 4);
    for (int mu = 0; mu < 4; ++mu) dslash += force[mu] * g[static_cast<size_t>(mu)];
    r.dpsi -= dslash * s.psi / (2.0 * model.m);
  }
  return r;
}

Phase advance(const Phase& s, const Rates& r, double h, bool spinor) {
  Phase out{s.x + h * r.dx, s.p + h * r.dp, s.psi};
  if (spinor) out.psi = s.psi + h * r.dpsi;
  return out;
}

Trajectory integrate(const SpacetimeModel& model, const RayState& initial,
                     const RayOptions& options, bool spinor) {
  if (!(options.dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "dt must be positive");
  if (!(options.tau_end >= 0.0)) throw Error(ErrorKind::InvalidArgument, "tau_end must be >= 0");
  const PhasePoint pp{initial.x, initial.k.tail(3), initial.k[0]};
  const double shell = shell_residual(model, pp);
  if (!(std::abs(shell) <= 1e-10))
    throw Error(ErrorKind::OffShell, "initial ray is off shell: " + std::to_string(shell));

  Trajectory traj;
  traj.options = options;
  traj.has_spinor = spinor;
  Phase s{initial.x, initial.k + model.q * model.potential(initial.x), initial.psi};
  const double h0 = hamiltonian(model, s.x, s.p);
  traj.points.push_back(TrajectoryPoint{initial, 0.0, 0.0, 0.0});
  traj.points.back().state.tau = 0.0;

  const auto steps = static_cast<long>(std::llround(options.tau_end / options.dt));
  const double dt = options.dt;
  for (long n = 1; n <= steps; ++n) {
    Rates k1, k2, k3, k4;
    try {
      k1 = rates(model, s, spinor, options.no_name);
      k2 = rates(model, advance(s, k1, dt / 2, spinor), spinor, options.no_name);
      k3 = rates(model, advance(s, k2, dt / 2, spinor), spinor, options.no_name);
      k4 = rates(model, advance(s, k3, dt, spinor), spinor, options.no_name);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::OutOfDomain)
        throw Error(ErrorKind::LeftDomain, std::string("ray reached the chart edge: ") + e.what());
      if (e.kind() == ErrorKind::NonFinite)
        throw Error(ErrorKind::StepRejected, std::string("non-finite rate: ") + e.what());
      throw;
    }
    Phase next{s.x + dt / 6 * (k1.dx + 2 * k2.dx + 2 * k3.dx + k4.dx),
               s.p + dt / 6 * (k1.dp + 2 * k2.dp + 2 * k3.dp + k4.dp), s.psi};
    require_inside(model, next.x);
    if (!next.p.allFinite()) throw Error(ErrorKind::StepRejected, "non-finite momentum");

    TrajectoryPoint tp;
    tp.state.tau = static_cast<double>(n) * dt;
    tp.state.x = next.x;
    tp.state.k = next.p - model.q * model.potential(next.x);
    tp.state.intensity = initial.intensity;
    tp.h_drift = std::abs(hamiltonian(model, next.x, next.p) - h0);
    if (spinor) {
      CVector psi = s.psi + dt / 6 * (k1.dpsi + 2 * k2.dpsi + 2 * k3.dpsi + k4.dpsi);
      if (!psi.allFinite()) throw Error(ErrorKind::StepRejected, "non-finite spinor");
      const CMatrix& beta = dirac_beta();
      const Gammas g = curved_gammas(model, next.x);
      CMatrix slash = CMatrix::Zero(4, 4);
      for (int mu = 0; mu < 4; ++mu) slash += tp.state.k[mu] * g[static_cast<size_t>(mu)];
      const CMatrix P = (model.m * CMatrix::Identity(4, 4) - slash) / (2.0 * model.m);
      tp.norm_drift = std::abs((psi.adjoint() * beta * psi)(0, 0).real() - 1.0);
      const CVector projected = P * psi;
      tp.kernel_residual = max_abs(projected - psi);
      if (projected.norm() < 1e-6)
        throw Error(ErrorKind::KernelCollapse, "spinor left the positive-energy kernel");
      const double n2 = std::abs((projected.adjoint() * beta * projected)(0, 0).real());
      psi = projected / std::sqrt(n2);
      next.psi = psi;
      tp.state.psi = psi;
    }
    traj.points.push_back(tp);
    s = next;
  }
  return traj;
}

}  // namespace

double hamiltonian(const SpacetimeModel& model, const Point& x, const Eigen::Vector4d& p) {
  model.chart.require_contains(x);
  const Eigen::Vector4d k = p - model.q * model.potential(x);
  return 0.5 * k.dot(inverse_metric(model, x) * k);
}

RMatrix field_strength(const SpacetimeModel& model, const Point& x) {
  const RMatrix d = potential_gradient(model, x);
  return d - d.transpose();
}

RayState initial_ray(const SpacetimeModel& model, const Point& x, const Eigen::Vector3d& k) {
  const PhasePoint pp = on_shell(model, x, k);
  RayState s;
  s.x = x;
  s.k = pp.lower();
  s.psi = kernel_frame(model, pp).col(0);
  return s;
}

Trajectory integrate_ray(const SpacetimeModel& model, const RayState& initial,
                         const RayOptions& options) {
  return integrate(model, initial, options, false);
}

Trajectory transport_spinor(const SpacetimeModel& model, const Trajectory& trajectory,
                            const CVector& psi0) {
  if (trajectory.points.empty()) throw Error(ErrorKind::InvalidArgument, "empty trajectory");
  RayState init = trajectory.points.front().state;
  const PhasePoint pp{init.x, init.k.tail(3), init.k[0]};
  const DiracProjectors d = dirac_projectors(model, pp);
  if (max_abs(d.D * psi0) > 1e-10)
    throw Error(ErrorKind::FrameNotInKernel, "initial spinor is not in ker D");
  const double n2 = (psi0.adjoint() * dirac_beta() * psi0)(0, 0).real();
  if (!(std::abs(n2 - 1.0) <= 1e-10))
    throw Error(ErrorKind::InvalidArgument, "initial spinor must satisfy h(psi, psi) = 1");
  init.psi = psi0;
  return integrate(model, init, trajectory.options, true);
}

double Trajectory::max_h_drift() const {
  double r = 0.0;
  for (const auto& p : points) r = std::max(r, p.h_drift);
  return r;
}

double Trajectory::max_abs_kz() const {
  double r = 0.0;
  for (const auto& p : points) r = std::max(r, std::abs(p.state.k[3]));
  return r;
}

double Trajectory::max_shell_residual(const SpacetimeModel& model) const {
  double r = 0.0;
  for (const auto& p : points) {
    const Eigen::Vector4d k = p.state.k;
    r = std::max(r, std::abs(k.dot(inverse_metric(model, p.state.x) * k) + model.m * model.m));
  }
  return r;
}

double Trajectory::max_norm_drift() const {
  double r = 0.0;
  for (const auto& p : points) r = std::max(r, p.norm_drift);
  return r;
}

double Trajectory::max_kernel_residual() const {
  double r = 0.0;
  for (const auto& p : points) r = std::max(r, p.kernel_residual);
  return r;
}

double Trajectory::total_norm_drift() const {
  double r = 0.0;
  for (const auto& p : points) r += p.norm_drift;
  return r;
}

double Trajectory::total_kernel_residual() const {
  double r = 0.0;
  for (const auto& p : points) r += p.kernel_residual;
  return r;
}

double intensity_transport_residual(const SpacetimeModel& model, const ScalarFieldFn& intensity,
                                    const CovectorFieldFn& k, const Point& point, double step,
                                    FdScheme scheme) {
  const FieldFn flux = [&](const Point& y) {
    const Eigen::Vector4d ku = inverse_metric(model, y) * k(y);
    return CMatrix((intensity(y) * ku).cast<cplx>());
  };
  double div = 0.0;
  for (int mu = 0; mu < 4; ++mu)
    div += fd_partial(model.chart, flux, point, mu, step, scheme)(mu, 0).real();
  const BaseConnection G = christoffels(model, point);
  const Eigen::Vector4d ku = inverse_metric(model, point) * k(point);
  const double I = intensity(point);
  for (int mu = 0; mu < 4; ++mu)
    for (int r = 0; r < 4; ++r) div += G[static_cast<size_t>(mu)](mu, r) * I * ku[r];
  return std::abs(div);
}

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory) {
  out << "tau,x0,x1,x2,x3,k0,k1,k2,k3";
  for (int i = 0; i < 4; ++i) out << ",re_psi" << i;
  for (int i = 0; i < 4; ++i) out << ",im_psi" << i;
  out << ",h_drift,norm_drift,kernel_residual\n";
  out << std::setprecision(17);
  for (const auto& p : trajectory.points) {
    out << p.state.tau;
    for (int i = 0; i < 4; ++i) out << ',' << p.state.x[i];
    for (int i = 0; i < 4; ++i) out << ',' << p.state.k[i];
    for (int i = 0; i < 4; ++i) out << ',' << (p.state.psi.size() == 4 ? p.state.psi[i].real() : 0.0);
    for (int i = 0; i < 4; ++i) out << ',' << (p.state.psi.size() == 4 ? p.state.psi[i].imag() : 0.0);
    out << ',' << p.h_drift << ',' << p.norm_drift << ',' << p.kernel_residual << '\n';
  }
}

}  // namespace qgeom
