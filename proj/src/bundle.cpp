#include "qgeom/bundle.hpp"

#include <cmath>

namespace qgeom {

BundleSpec::BundleSpec(Chart chart, int rank, FieldFn h, ConnectionFn omega)
    : chart_(std::move(chart)), rank_(rank), h_(std::move(h)), omega_(std::move(omega)) {
  if (rank_ < 1) throw Error(ErrorKind::InvalidArgument, "bundle rank must be >= 1");
}

CMatrix BundleSpec::h(const Point& x) const {
  chart_.require_contains(x);
  CMatrix m = h_(x);
  if (m.rows() != rank_ || m.cols() != rank_)
    throw Error(ErrorKind::InvalidArgument, "fiber metric has wrong shape");
  if (!m.allFinite()) throw Error(ErrorKind::NonFinite, "fiber metric is not finite");
  // relative to the largest singular value
  Eigen::JacobiSVD<CMatrix> svd(m);
  const auto& s = svd.singularValues();
  if (s(s.size() - 1) <= 1e-12 * std::max(1.0, s(0)))
    throw Error(ErrorKind::SingularMetric, "fiber metric is not invertible");
  return m;
}

CMatrix BundleSpec::omega(const Point& x, int mu) const {
  chart_.require_contains(x);
  CMatrix m = omega_(x, mu);
  if (m.rows() != rank_ || m.cols() != rank_)
    throw Error(ErrorKind::InvalidArgument, "connection coefficients have wrong shape");
  if (!m.allFinite()) throw Error(ErrorKind::NonFinite, "connection is not finite");
  return m;
}

CMatrix BundleSpec::omega_lowered(const Point& x, int mu) const { return h(x) * omega(x, mu); }

cplx BundleSpec::pair(const Point& x, const CVector& a, const CVector& b) const {
  return (a.adjoint() * h(x) * b)(0, 0);
}

double check_compatibility(const BundleSpec& spec, const Point& point, double step,
                           FdScheme scheme) {
  const FieldFn h = [&](const Point& p) { return spec.h(p); };
  double res = 0.0;
  for (int mu = 0; mu < spec.dim(); ++mu) {
    CMatrix dh = fd_partial(spec.chart(), h, point, mu, step, scheme);
    CMatrix low = spec.omega_lowered(point, mu);
    res = std::max(res, max_abs(dh - (low.adjoint() + low)));
  }
  return res;
}

CurvatureSlice curvature(const BundleSpec& spec, const Point& point, int mu, int nu, double step,
                         FdScheme scheme) {
  auto omega_along = [&](int axis) {
    return FieldFn([&spec, axis](const Point& p) { return spec.omega(p, axis); });
  };
  CMatrix d_mu_nu = fd_partial(spec.chart(), omega_along(nu), point, mu, step, scheme);
  CMatrix d_nu_mu = fd_partial(spec.chart(), omega_along(mu), point, nu, step, scheme);
  CMatrix w_mu = spec.omega(point, mu);
  CMatrix w_nu = spec.omega(point, nu);
  return {point, mu, nu, (d_mu_nu - d_nu_mu) + (w_mu * w_nu - w_nu * w_mu)};
}

PairTensor curvature_all(const BundleSpec& spec, const Point& point, double step,
                         FdScheme scheme) {
  const int n = spec.dim();
  const int r = spec.rank();
  std::vector<CMatrix> w(n);
  // d[mu][nu] = d_mu omega_nu
  std::vector<std::vector<CMatrix>> d(n, std::vector<CMatrix>(n));
  for (int nu = 0; nu < n; ++nu) w[nu] = spec.omega(point, nu);
  for (int mu = 0; mu < n; ++mu) {
    const FieldFn all = [&spec, n, r](const Point& p) {
      CMatrix stacked(r * n, r);
      for (int nu = 0; nu < n; ++nu) stacked.middleRows(r * nu, r) = spec.omega(p, nu);
      return stacked;
    };
    CMatrix dd = fd_partial(spec.chart(), all, point, mu, step, scheme);
    for (int nu = 0; nu < n; ++nu) d[mu][nu] = dd.middleRows(r * nu, r);
  }
  PairTensor out(n, r, r);
  for (int mu = 0; mu < n; ++mu)
    for (int nu = 0; nu < n; ++nu) {
      if (mu == nu) continue;
      out(mu, nu) = (d[mu][nu] - d[nu][mu]) + (w[mu] * w[nu] - w[nu] * w[mu]);
    }
  return out;
}

double curvature_skew_residual(const BundleSpec& spec, const CurvatureSlice& slice) {
  CMatrix h = spec.h(slice.point);
  return max_abs(h * slice.omega_matrix + slice.omega_matrix.adjoint() * h);
}

CVector covariant_derivative(const BundleSpec& spec, const FieldFn& section, const Point& point,
                             int mu, double step, FdScheme scheme) {
  CMatrix ds = fd_partial(spec.chart(), section, point, mu, step, scheme);
  CMatrix s = section(point);
  if (s.rows() != spec.rank() || s.cols() != 1)
    throw Error(ErrorKind::InvalidArgument, "section must be an n x 1 field");
  return ds + spec.omega(point, mu) * s;
}

}  // namespace qgeom
