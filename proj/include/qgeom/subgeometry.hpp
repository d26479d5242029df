#pragma once

#include <functional>
#include <optional>

#include "qgeom/bundle.hpp"

namespace qgeom {

/// h-compatible idempotent field of constant rank m, splitting E into
/// image P (parallel block, indices A, B) and kernel P (perp block, indices I, J).
class ProjectorField {
 public:
  ProjectorField(BundleSpec spec, FieldFn p, int rank);

  const BundleSpec& bundle() const { return spec_; }
  const Chart& chart() const { return spec_.chart(); }
  int n() const { return spec_.rank(); }
  int rank() const { return m_; }
  int corank() const { return spec_.rank() - m_; }

  CMatrix P(const Point& x) const;
  /// nabla_mu P = d_mu P + [omega_mu, P]
  CMatrix nabla_P(const Point& x, int mu, double step, FdScheme scheme) const;

 private:
  BundleSpec spec_;
  FieldFn p_;
  int m_;
};

struct ProjectorResiduals {
  double idempotency = 0.0;  // |P^2 - P|
  double h_compat = 0.0;     // |hP - P^dagger h|
  double trace = 0.0;        // |tr P - m|
};

ProjectorResiduals projector_residuals(const ProjectorField& pf, const Point& x);

struct AdaptedFrame {
  Point point;
  CMatrix parallel;  // n x m, columns s_A
  CMatrix perp;      // n x (n - m), columns s_I
  CMatrix h_par;     // h_AB
  CMatrix h_perp;    // h_IJ
  CMatrix coframe;   // n x n; rows sigma^A then sigma^I
  Eigen::VectorXd sign_par;
  Eigen::VectorXd sign_perp;

  CMatrix coframe_par() const { return coframe.topRows(parallel.cols()); }
  CMatrix coframe_perp() const { return coframe.bottomRows(perp.cols()); }
};

struct FrameResiduals {
  double parallel_fixed = 0.0;   // |P s_A - s_A|
  double perp_annihilated = 0.0; // |P s_I|
  double cross_orthogonal = 0.0; // |h(s_A, s_I)|
  double duality = 0.0;          // |coframe [s_A | s_I] - I|
};

/// Pointwise adapted frame: column-pivoted selection of image P and image (I - P)
/// followed by modified Gram-Schmidt in the (possibly indefinite) pairing h,
/// normalizing every column to |h(s, s)| = 1.
AdaptedFrame adapted_frame(const ProjectorField& pf, const Point& x, double rank_tol = 1e-8);

FrameResiduals frame_residuals(const ProjectorField& pf, const AdaptedFrame& frame);

/// Modified Gram-Schmidt with the pairing `h`. Columns come out with h(s, s) = +-1;
/// the signs are written to `signs`. Throws `kind` when |h(v, v)| < null_tol.
CMatrix h_gram_schmidt(const CMatrix& vectors, const CMatrix& h, Eigen::VectorXd& signs,
                       double null_tol = 1e-10, ErrorKind kind = ErrorKind::NullVector);

/// A smooth choice of adapted frame near a point; derivative-based quantities
/// (Berry connection, Codazzi terms) are taken in this gauge.
class FrameField {
 public:
  using BlockFn = std::function<CMatrix(const Point&)>;

  /// Frames at nearby points are P(y) s_ref and (I - P(y)) s_ref, h-orthonormalized,
  /// with s_ref the adapted frame at `center`.
  static FrameField aligned(const ProjectorField& pf, const Point& center);

  /// User-supplied smooth frame blocks, e.g. an analytic gauge.
  static FrameField custom(const ProjectorField& pf, BlockFn parallel, BlockFn perp);

  const ProjectorField& projector() const { return pf_; }
  AdaptedFrame at(const Point& y) const;

 private:
  FrameField(ProjectorField pf, BlockFn parallel, BlockFn perp);

  ProjectorField pf_;
  BlockFn parallel_;
  BlockFn perp_;
};

/// Christoffel-like coefficients of a base connection: element rho is the N x N
/// matrix Gamma^rho_{mu nu}.
using BaseConnection = std::vector<RMatrix>;

BaseConnection zero_base_connection(int dim);

struct ShapeComponents {
  OneForm up;      // S^I_{A mu}, (n-m) x m
  OneForm dagger;  // S^A_{I mu}, m x (n-m)
  OneForm second;  // S_{IA mu} = h_IJ S^J_{A mu}
};

ShapeComponents shape_operator(const ProjectorField& pf, const AdaptedFrame& frame, double step,
                               FdScheme scheme = FdScheme::central4);

/// max over mu of |h(s_I, S s_A) - h(S^dagger s_I, s_A)|
double adjointness_residual(const ProjectorField& pf, const AdaptedFrame& frame, double step,
                            FdScheme scheme = FdScheme::central4);

/// A_{AB mu} = i h(s_A, nabla_mu s_B), one m x m matrix per axis.
OneForm berry_connection(const FrameField& ff, const Point& x, double step,
                         FdScheme scheme = FdScheme::central4);

struct QuantumMetric {
  PairTensor G;     // G_{AB mu nu}
  CMatrix base;     // G_{mu nu} = h^{AB} G_{AB mu nu}
};

QuantumMetric quantum_metric(const ProjectorField& pf, const AdaptedFrame& frame, double step,
                             FdScheme scheme = FdScheme::central4);

struct BerryCurvature {
  PairTensor derivative_route;  // d A - d A - i h^{-1}[A, A]
  PairTensor gauss_route;       // i (Omega_AB + h_IJ {...})
};

BerryCurvature berry_curvature(const FrameField& ff, const Point& x, double step,
                               FdScheme scheme = FdScheme::central4);

struct QgtReport {
  PairTensor Q;
  PairTensor G;
  PairTensor F;            // derivative route
  PairTensor omega_par;    // Omega_{AB mu nu}
  double symmetric_residual = 0.0;      // |Q_(mu nu) - G|
  double antisymmetric_residual = 0.0;  // |Q_[mu nu] - (Omega_par - Omega)/2|
  double hermiticity_residual = 0.0;    // |Q_{AB mu nu} - conj Q_{BA nu mu}|
  double berry_only_gap = 0.0;          // |Q_[mu nu] + (i/2) F|
  double alt_transport_residual = 0.0;  // vs h[nabla s, (I-P) nabla s]
  double alt_projector_residual = 0.0;  // vs h[s, nabla P nabla P s]
};

QgtReport qgt(const FrameField& ff, const Point& x, double step,
              FdScheme scheme = FdScheme::central4);

struct GaussResiduals {
  double parallel = 0.0;
  double perp = 0.0;
};

GaussResiduals gauss_residuals(const FrameField& ff, const Point& x, double step,
                               FdScheme scheme = FdScheme::central4);

struct CodazziResiduals {
  double parallel = 0.0;
  double perp = 0.0;
  /// max difference of the residual tensors computed with two base connections
  double independence = 0.0;
};

CodazziResiduals codazzi_residuals(const FrameField& ff, const Point& x, double step,
                                   const BaseConnection& base, const BaseConnection& alt_base,
                                   FdScheme scheme = FdScheme::central4);

/// Residual pair at step h and h/2 with the measured order log2(r_h / r_{h/2}).
struct Convergence {
  double at_step = 0.0;
  double at_half_step = 0.0;
  double order = 0.0;
};

Convergence measure_convergence(const std::function<double(double)>& residual, double step);

/// Everything at one point, sharing the finite-difference work.
struct SubGeometryPoint {
  AdaptedFrame frame;
  OneForm A;             // Berry connection
  ShapeComponents S;
  PairTensor G;
  PairTensor Q;
  PairTensor F;          // derivative route
  PairTensor F_gauss;    // Gauss route
  PairTensor omega_par;  // Omega_AB
  PairTensor omega_perp; // Omega_IJ
};

SubGeometryPoint evaluate_point(const FrameField& ff, const Point& x, double step,
                                FdScheme scheme = FdScheme::central4);

}  // namespace qgeom
