#pragma once

#include <functional>

#include "qgeom/chart.hpp"

namespace qgeom {

/// Connection coefficients omega^i_{j mu}(x) as an n x n matrix for each axis mu.
using ConnectionFn = std::function<CMatrix(const Point&, int)>;

/// Hermitian vector bundle over a single chart, presented in one global frame:
/// fiber pseudo-metric h(x) and connection coefficients omega_mu(x) acting as
/// nabla_mu s = d_mu s + omega_mu s.
class BundleSpec {
 public:
  BundleSpec(Chart chart, int rank, FieldFn h, ConnectionFn omega);

  const Chart& chart() const { return chart_; }
  int rank() const { return rank_; }
  int dim() const { return chart_.dim(); }

  /// h(x); throws SingularMetric when |det h| is numerically zero.
  CMatrix h(const Point& x) const;
  CMatrix omega(const Point& x, int mu) const;
  /// omega_{ij mu} = h_ik omega^k_{j mu}
  CMatrix omega_lowered(const Point& x, int mu) const;

  /// Fiber pairing h(a, b) = a^dagger h b.
  cplx pair(const Point& x, const CVector& a, const CVector& b) const;

 private:
  Chart chart_;
  int rank_;
  FieldFn h_;
  ConnectionFn omega_;
};

struct CurvatureSlice {
  Point point;
  int mu = 0;
  int nu = 0;
  CMatrix omega_matrix;  // Omega^i_{j mu nu}
};

/// max over mu of |d_mu h - (omega_low^dagger + omega_low)|.
double check_compatibility(const BundleSpec& spec, const Point& point, double step,
                           FdScheme scheme = FdScheme::central4);

CurvatureSlice curvature(const BundleSpec& spec, const Point& point, int mu, int nu, double step,
                         FdScheme scheme = FdScheme::central4);

/// All coordinate curvature slices at a point.
PairTensor curvature_all(const BundleSpec& spec, const Point& point, double step,
                         FdScheme scheme = FdScheme::central4);

/// Residual |h Omega + Omega^dagger h| of a curvature slice.
double curvature_skew_residual(const BundleSpec& spec, const CurvatureSlice& slice);

CVector covariant_derivative(const BundleSpec& spec, const FieldFn& section, const Point& point,
                             int mu, double step, FdScheme scheme = FdScheme::central4);

}  // namespace qgeom
