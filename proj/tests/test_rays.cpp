#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <sstream>

#include "qgeom/rays.hpp"

using namespace qgeom;

namespace {

Point spacetime(double t, double x, double y, double z) {
  Point p(4);
  p << t, x, y, z;
  return p;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::InvalidArgument;
}

double h_overlap(const CVector& a, const CVector& b) {
  return std::abs((a.adjoint() * dirac_beta() * b)(0, 0));
}

Trajectory run(const SpacetimeModel& model, const RayState& r0, double tau_end, double dt,
               bool no_name = true) {
  RayOptions o;
  o.tau_end = tau_end;
  o.dt = dt;
  o.no_name = no_name;
  return integrate_ray(model, r0, o);
}

}  // namespace

TEST_CASE("hamiltonian values") {
  const SpacetimeModel mink = minkowski_model(1.3);
  Eigen::Vector4d rest(-1.3, 0, 0, 0);
  CHECK(hamiltonian(mink, spacetime(0, 0, 0, 0), rest) == doctest::Approx(-0.5 * 1.3 * 1.3));

  const SpacetimeModel hyp = hyperbolic_model(1.5, HyperbolicChart::half_plane, 0.7);
  for (double x : {0.3, 1.0, 4.0}) {
    const double p1 = 0.4, p2 = -0.9, p3 = 0.2;
    const double lam = 1.5 / x;
    const double energy = std::sqrt(0.49 + (p1 * p1 + p2 * p2) / (lam * lam) + p3 * p3);
    const Eigen::Vector4d p(-energy, p1, p2, p3);
    CHECK(std::abs(hamiltonian(hyp, spacetime(0, x, 0.5, 0), p) + 0.5 * 0.49) <= 1e-12);
    // quadratic in p when A = 0
    const double h = hamiltonian(hyp, spacetime(0, x, 0.5, 0), p);
    CHECK(std::abs(hamiltonian(hyp, spacetime(0, x, 0.5, 0), 1.7 * p) - 1.7 * 1.7 * h) <= 1e-12);
  }
  CHECK(kind_of([&] { hamiltonian(hyp, spacetime(0, -1, 0, 0), rest); }) ==
        ErrorKind::OutOfDomain);
}

TEST_CASE("free motion in flat spacetime is a straight line") {
  const SpacetimeModel mink = minkowski_model(1.0);
  const RayState r0 = initial_ray(mink, spacetime(0, 1, -2, 0.5), Eigen::Vector3d(0.4, -0.3, 0.8));
  const Trajectory t = run(mink, r0, 5.0, 1e-2);
  const Eigen::Vector4d ku = inverse_metric(mink, r0.x) * r0.k;
  double err = 0.0;
  for (const auto& p : t.points) {
    err = std::max(err, (p.state.x - (r0.x + p.state.tau * ku)).cwiseAbs().maxCoeff());
    err = std::max(err, (p.state.k - r0.k).cwiseAbs().maxCoeff());
  }
  CHECK(err <= 1e-12);
  CHECK(t.max_h_drift() <= 1e-12);
  CHECK(t.points.size() == 501);
}

TEST_CASE("hyperbolic rays conserve H and k_z") {
  const SpacetimeModel hyp = hyperbolic_model(1.0, HyperbolicChart::half_plane);
  const RayState r0 = initial_ray(hyp, spacetime(0, 1, 0, 0), Eigen::Vector3d(0.3, 0.2, 0));
  const Trajectory t = run(hyp, r0, 10.0, 1e-3);
  CHECK(t.max_h_drift() <= 1e-10);
  CHECK(t.max_abs_kz() == 0.0);

  // shell residual is twice the H residual
  double h_dev = 0.0;
  for (const auto& p : t.points) {
    const Eigen::Vector4d ku = inverse_metric(hyp, p.state.x) * p.state.k;
    h_dev = std::max(h_dev, std::abs(0.5 * p.state.k.dot(ku) + 0.5));
  }
  CHECK(std::abs(t.max_shell_residual(hyp) - 2.0 * h_dev) <= 1e-12);

  // fourth-order drift
  const double coarse = run(hyp, r0, 10.0, 0.05).max_h_drift();
  const double fine = run(hyp, r0, 10.0, 0.025).max_h_drift();
  CHECK(coarse / fine == doctest::Approx(16.0).epsilon(0.3));

  SUBCASE("with a field in the plane") {
    const SpacetimeModel hq =
        hyperbolic_model(1.0, HyperbolicChart::half_plane, 1.0, 0.5, FieldConfig{0.2, 1.0});
    const RayState q0 = initial_ray(hq, spacetime(0, 1, 0, 0), Eigen::Vector3d(0.3, 0.2, 0));
    const Trajectory tq = run(hq, q0, 10.0, 1e-3);
    CHECK(tq.max_abs_kz() == 0.0);
    CHECK(tq.max_h_drift() <= 1e-10);
    const double c = run(hq, q0, 5.0, 0.05).max_h_drift();
    const double f = run(hq, q0, 5.0, 0.025).max_h_drift();
    CHECK(c / f == doctest::Approx(16.0).epsilon(0.3));
  }
}

TEST_CASE("Lorentz force in flat spacetime") {
  // uniform B along z: circular motion with angular frequency qB / m per unit proper time
  const double q = 1.0, B = 2.0;
  const SpacetimeModel mink = minkowski_model(1.0, q, FieldConfig{0.0, B});
  const RayState r0 = initial_ray(mink, spacetime(0, 0, 0, 0), Eigen::Vector3d(0.5, 0, 0));
  const double period = 2.0 * M_PI / (q * B);
  const Trajectory t = run(mink, r0, period, period / 2000);
  const auto& last = t.points.back().state;
  CHECK((last.x.segment(1, 3) - r0.x.segment(1, 3)).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK((last.k.tail(3) - r0.k.tail(3)).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(last.x[0] == doctest::Approx(period * -r0.k[0]));
}

TEST_CASE("ray errors") {
  const SpacetimeModel hyp = hyperbolic_model(1.0, HyperbolicChart::half_plane);
  RayState r0 = initial_ray(hyp, spacetime(0, 0.5, 0, 0), Eigen::Vector3d(-3.0, 0, 0));
  CHECK(kind_of([&] { run(hyp, r0, 50.0, 1e-2); }) == ErrorKind::LeftDomain);
  RayState off = r0;
  off.k[0] *= 1.01;
  CHECK(kind_of([&] { run(hyp, off, 1.0, 1e-2); }) == ErrorKind::OffShell);
  CHECK(kind_of([&] { run(hyp, r0, 1.0, 0.0); }) == ErrorKind::InvalidArgument);

  SpacetimeModel bad = minkowski_model(1.0, 1.0);
  bad.potential = [](const Point& x) {
    return Eigen::Vector4d(0, 0, x[1] > 0.5 ? std::nan("") : 0.0, 0);
  };
  const RayState b0 = initial_ray(bad, spacetime(0, 0, 0, 0), Eigen::Vector3d(1.0, 0, 0));
  CHECK(kind_of([&] { run(bad, b0, 2.0, 1e-2); }) == ErrorKind::StepRejected);

  const Trajectory t = run(hyp, initial_ray(hyp, spacetime(0, 1, 0, 0), {0.1, 0, 0}), 0.1, 1e-2);
  CVector outside = kernel_perp_frame(hyp, on_shell(hyp, spacetime(0, 1, 0, 0), {0.1, 0, 0})).col(0);
  CHECK(kind_of([&] { transport_spinor(hyp, t, outside); }) == ErrorKind::FrameNotInKernel);
  CHECK(kind_of([&] { transport_spinor(hyp, t, 2.0 * t.points.front().state.psi); }) ==
        ErrorKind::InvalidArgument);
}

TEST_CASE("spinor transport") {
  SUBCASE("rest ray in flat spacetime keeps psi") {
    const SpacetimeModel mink = minkowski_model(1.0);
    const RayState r0 = initial_ray(mink, spacetime(0, 0, 0, 0), Eigen::Vector3d(0, 0, 0));
    const Trajectory t = transport_spinor(mink, run(mink, r0, 5.0, 1e-2), r0.psi);
    double err = 0.0;
    for (const auto& p : t.points) err = std::max(err, max_abs(p.state.psi - r0.psi));
    CHECK(err <= 1e-12);
  }

  SUBCASE("hyperbolic drifts converge at integrator order") {
    const SpacetimeModel hyp = hyperbolic_model(1.0, HyperbolicChart::half_plane);
    const RayState r0 = initial_ray(hyp, spacetime(0, 1, 0, 0), Eigen::Vector3d(0.3, 0.2, 0));
    const Trajectory c = transport_spinor(hyp, run(hyp, r0, 10.0, 0.05), r0.psi);
    const Trajectory f = transport_spinor(hyp, run(hyp, r0, 10.0, 0.025), r0.psi);
    // per-step h(psi, psi) error is O(dt^5)
    CHECK(c.max_norm_drift() / f.max_norm_drift() == doctest::Approx(32.0).epsilon(0.3));
    CHECK(std::log2(c.max_kernel_residual() / f.max_kernel_residual()) >= 0.8 * 4);
    for (const auto& p : f.points) {
      const PhasePoint pp{p.state.x, p.state.k.tail(3), p.state.k[0]};
      const DiracProjectors d = dirac_projectors(hyp, pp);
      CHECK(max_abs(d.P * p.state.psi - p.state.psi) <= 1e-9);
      CHECK(std::abs(h_overlap(p.state.psi, p.state.psi) - 1.0) <= 1e-12);
    }
  }

  SUBCASE("field on: kernel preserved and no-name term rotates psi") {
    const SpacetimeModel hq =
        hyperbolic_model(1.0, HyperbolicChart::half_plane, 1.0, 0.5, FieldConfig{0.2, 1.0});
    const Point x0 = spacetime(0, 1, 0, 0);
    const RayState r0 = initial_ray(hq, x0, Eigen::Vector3d(0.3, 0.2, 0));
    const CMatrix s = kernel_frame(hq, on_shell(hq, x0, Eigen::Vector3d(0.3, 0.2, 0)));
    const CVector psi0 = (s.col(0) + s.col(1)) / std::sqrt(2.0);
    const Trajectory c = transport_spinor(hq, run(hq, r0, 5.0, 0.05), psi0);
    const Trajectory f = transport_spinor(hq, run(hq, r0, 5.0, 0.025), psi0);
    CHECK(std::log2(c.max_kernel_residual() / f.max_kernel_residual()) >= 0.8 * 4);
    CHECK(std::log2(c.max_norm_drift() / f.max_norm_drift()) >= 0.8 * 4);

    const Trajectory without = transport_spinor(hq, run(hq, r0, 5.0, 0.025, false), psi0);
    const double gap =
        1.0 - h_overlap(f.points.back().state.psi, without.points.back().state.psi);
    CHECK(gap > 1e-6);
  }
}

TEST_CASE("intensity transport residual") {
  const SpacetimeModel mink = minkowski_model(1.0);
  const Point x = spacetime(0.3, -0.2, 0.7, 0.1);
  const double kx = 0.6, energy = std::sqrt(1.0 + kx * kx);
  const CovectorFieldFn k = [&](const Point&) { return Eigen::Vector4d(-energy, kx, 0, 0); };
  CHECK(intensity_transport_residual(mink, [](const Point&) { return 2.0; }, k, x, 1e-3) <=
        1e-13);
  // constant along k^mu = (E, k_x, 0, 0)
  const ScalarFieldFn along = [&](const Point& y) {
    return std::exp(-std::pow(y[1] - kx / energy * y[0], 2)) * (1.0 + 0.3 * y[2]);
  };
  CHECK(intensity_transport_residual(mink, along, k, x, 1e-3) <= 1e-9);
  const ScalarFieldFn growing = [](const Point& y) { return std::exp(0.5 * y[1]); };
  CHECK(intensity_transport_residual(mink, growing, k, x, 1e-3) > 1e-3);

  // hyperbolic: I k^mu with k^mu = (E, 0, 0, 0) at rest is divergence free for static I
  const SpacetimeModel hyp = hyperbolic_model(1.0, HyperbolicChart::half_plane);
  const CovectorFieldFn rest = [](const Point&) { return Eigen::Vector4d(-1, 0, 0, 0); };
  CHECK(intensity_transport_residual(hyp, [](const Point& y) { return y[1] * y[2]; }, rest,
                                     spacetime(0, 1.2, 0.4, 0), 1e-3) <= 1e-12);
}

TEST_CASE("trajectory csv") {
  const SpacetimeModel hyp = hyperbolic_model(1.0, HyperbolicChart::half_plane);
  const RayState r0 = initial_ray(hyp, spacetime(0, 1, 0, 0), Eigen::Vector3d(0.3, 0.2, 0));
  const Trajectory t = transport_spinor(hyp, run(hyp, r0, 0.05, 0.01), r0.psi);
  std::ostringstream os;
  write_trajectory_csv(os, t);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  CHECK(line ==
        "tau,x0,x1,x2,x3,k0,k1,k2,k3,re_psi0,re_psi1,re_psi2,re_psi3,im_psi0,im_psi1,"
        "im_psi2,im_psi3,h_drift,norm_drift,kernel_residual");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    CHECK(std::count(line.begin(), line.end(), ',') == 19);
  }
  CHECK(rows == 6);
}
