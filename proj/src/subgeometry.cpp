#include "qgeom/subgeometry.hpp"

#include <cmath>
#include <limits>

namespace qgeom {

ProjectorField::ProjectorField(BundleSpec spec, FieldFn p, int rank)
    : spec_(std::move(spec)), p_(std::move(p)), m_(rank) {
  if (m_ < 1 || m_ >= spec_.rank())
    throw Error(ErrorKind::InvalidArgument, "projector rank must satisfy 1 <= m < n");
}

CMatrix ProjectorField::P(const Point& x) const {
  spec_.chart().require_contains(x);
  CMatrix p = p_(x);
  if (p.rows() != n() || p.cols() != n())
    throw Error(ErrorKind::InvalidArgument, "projector has wrong shape");
  if (!p.allFinite()) throw Error(ErrorKind::NonFinite, "projector is not finite");
  return p;
}

CMatrix ProjectorField::nabla_P(const Point& x, int mu, double step, FdScheme scheme) const {
  const FieldFn f = [this](const Point& y) { return P(y); };
  CMatrix dp = fd_partial(chart(), f, x, mu, step, scheme);
  CMatrix w = spec_.omega(x, mu);
  CMatrix p = P(x);
  return dp + (w * p - p * w);
}

ProjectorResiduals projector_residuals(const ProjectorField& pf, const Point& x) {
  CMatrix p = pf.P(x);
  CMatrix h = pf.bundle().h(x);
  ProjectorResiduals r;
  r.idempotency = max_abs(p * p - p);
  r.h_compat = max_abs(h * p - p.adjoint() * h);
  r.trace = std::abs(p.trace() - cplx(pf.rank(), 0.0));
  return r;
}

CMatrix h_gram_schmidt(const CMatrix& vectors, const CMatrix& h, Eigen::VectorXd& signs,
                       double null_tol, ErrorKind kind) {
  const Eigen::Index k = vectors.cols();
  CMatrix out(vectors.rows(), k);
  signs.resize(k);
  for (Eigen::Index c = 0; c < k; ++c) {
    CVector v = vectors.col(c);
    for (Eigen::Index j = 0; j < c; ++j) {
      const cplx proj = (out.col(j).adjoint() * h * v)(0, 0);
      v -= signs[j] * proj * out.col(j);
    }
    const double norm = (v.adjoint() * h * v)(0, 0).real();
    if (std::abs(norm) < null_tol)
      throw Error(kind, "vector with |h(v, v)| = " + std::to_string(std::abs(norm)) +
                            " met during h-orthonormalization");
    signs[c] = norm > 0.0 ? 1.0 : -1.0;
    out.col(c) = v / std::sqrt(std::abs(norm));
  }
  return out;
}

namespace {

/// Euclidean column-pivoted orthonormal basis of the column space of `m`, taking
/// the largest remaining column each round (lowest index on ties).
CMatrix pivoted_basis(const CMatrix& m, int k) {
  CMatrix rem = m;
  CMatrix out(m.rows(), k);
  for (int j = 0; j < k; ++j) {
    Eigen::Index best = 0;
    double best_norm = -1.0;
    for (Eigen::Index c = 0; c < rem.cols(); ++c) {
      const double nrm = rem.col(c).norm();
      if (nrm > best_norm) {
        best_norm = nrm;
        best = c;
      }
    }
    CVector q = rem.col(best) / best_norm;
    out.col(j) = q;
    for (Eigen::Index c = 0; c < rem.cols(); ++c) rem.col(c) -= q * (q.adjoint() * rem.col(c));
  }
  return out;
}

int numerical_rank(const CMatrix& m, double tol) {
  Eigen::JacobiSVD<CMatrix> svd(m);
  int r = 0;
  for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
    if (svd.singularValues()[i] > tol) ++r;
  return r;
}

AdaptedFrame assemble_frame(const Point& x, const CMatrix& h, CMatrix par, CMatrix perp) {
  AdaptedFrame f;
  f.point = x;
  f.parallel = std::move(par);
  f.perp = std::move(perp);
  f.h_par = f.parallel.adjoint() * h * f.parallel;
  f.h_perp = f.perp.adjoint() * h * f.perp;
  CMatrix full(h.rows(), h.cols());
  full << f.parallel, f.perp;
  Eigen::FullPivLU<CMatrix> lu(full);
  if (!lu.isInvertible()) throw Error(ErrorKind::RankMismatch, "adapted frame is not a basis");
  f.coframe = lu.inverse();
  f.sign_par.resize(f.parallel.cols());
  f.sign_perp.resize(f.perp.cols());
  for (Eigen::Index i = 0; i < f.parallel.cols(); ++i)
    f.sign_par[i] = f.h_par(i, i).real() >= 0 ? 1.0 : -1.0;
  for (Eigen::Index i = 0; i < f.perp.cols(); ++i)
    f.sign_perp[i] = f.h_perp(i, i).real() >= 0 ? 1.0 : -1.0;
  return f;
}

}  // namespace

AdaptedFrame adapted_frame(const ProjectorField& pf, const Point& x, double rank_tol) {
  const CMatrix p = pf.P(x);
  const CMatrix q = CMatrix::Identity(pf.n(), pf.n()) - p;
  if (numerical_rank(p, rank_tol) != pf.rank() || numerical_rank(q, rank_tol) != pf.corank())
    throw Error(ErrorKind::RankMismatch, "numerical rank of P differs from " +
                                             std::to_string(pf.rank()));
  const CMatrix h = pf.bundle().h(x);
  Eigen::VectorXd sp, sq;
  CMatrix par = h_gram_schmidt(pivoted_basis(p, pf.rank()), h, sp);
  CMatrix perp = h_gram_schmidt(pivoted_basis(q, pf.corank()), h, sq);
  return assemble_frame(x, h, std::move(par), std::move(perp));
}

FrameResiduals frame_residuals(const ProjectorField& pf, const AdaptedFrame& f) {
  const CMatrix p = pf.P(f.point);
  const CMatrix h = pf.bundle().h(f.point);
  CMatrix full(pf.n(), pf.n());
  full << f.parallel, f.perp;
  FrameResiduals r;
  r.parallel_fixed = max_abs(p * f.parallel - f.parallel);
  r.perp_annihilated = max_abs(p * f.perp);
  r.cross_orthogonal = max_abs(f.parallel.adjoint() * h * f.perp);
  r.duality = max_abs(f.coframe * full - CMatrix::Identity(pf.n(), pf.n()));
  return r;
}

FrameField::FrameField(ProjectorField pf, BlockFn parallel, BlockFn perp)
    : pf_(std::move(pf)), parallel_(std::move(parallel)), perp_(std::move(perp)) {}

FrameField FrameField::aligned(const ProjectorField& pf, const Point& center) {
  const AdaptedFrame ref = adapted_frame(pf, center);
  // |h(v, v)| stays near 1 across a stencil; anything far below signals a gauge jump
  constexpr double kAlignTol = 0.25;
  auto align = [pf](const CMatrix& ref_block, const Eigen::VectorXd& ref_signs, bool parallel) {
    return [pf, ref_block, ref_signs, parallel](const Point& y) {
      CMatrix p = pf.P(y);
      if (!parallel) p = CMatrix::Identity(pf.n(), pf.n()) - p;
      Eigen::VectorXd signs;
      CMatrix s = h_gram_schmidt(p * ref_block, pf.bundle().h(y), signs, kAlignTol,
                                 ErrorKind::FrameDiscontinuity);
      if ((signs - ref_signs).cwiseAbs().maxCoeff() > 0.0)
        throw Error(ErrorKind::FrameDiscontinuity, "frame signature changed across stencil");
      return s;
    };
  };
  return FrameField(pf, align(ref.parallel, ref.sign_par, true),
                    align(ref.perp, ref.sign_perp, false));
}

FrameField FrameField::custom(const ProjectorField& pf, BlockFn parallel, BlockFn perp) {
  return FrameField(pf, std::move(parallel), std::move(perp));
}

AdaptedFrame FrameField::at(const Point& y) const {
  CMatrix par = parallel_(y);
  CMatrix perp = perp_(y);
  if (par.rows() != pf_.n() || par.cols() != pf_.rank() || perp.rows() != pf_.n() ||
      perp.cols() != pf_.corank())
    throw Error(ErrorKind::InvalidArgument, "frame blocks have wrong shape");
  return assemble_frame(y, pf_.bundle().h(y), std::move(par), std::move(perp));
}

BaseConnection zero_base_connection(int dim) {
  return BaseConnection(static_cast<size_t>(dim), RMatrix::Zero(dim, dim));
}

namespace {

struct Local {
  AdaptedFrame frame;
  CMatrix h;
  CMatrix P;
  OneForm nabla_P;
  OneForm nabla_par;   // nabla_mu s_A
  OneForm nabla_perp;  // nabla_mu s_I
};

OneForm nabla_P_all(const ProjectorField& pf, const Point& x, double step, FdScheme scheme) {
  OneForm out(static_cast<size_t>(pf.chart().dim()));
  for (int mu = 0; mu < pf.chart().dim(); ++mu) out[mu] = pf.nabla_P(x, mu, step, scheme);
  return out;
}

Local local_data(const FrameField& ff, const Point& x, double step, FdScheme scheme,
                 bool frame_derivatives, bool projector_derivatives = true) {
  const ProjectorField& pf = ff.projector();
  Local l;
  l.frame = ff.at(x);
  l.h = pf.bundle().h(x);
  l.P = pf.P(x);
  if (projector_derivatives) l.nabla_P = nabla_P_all(pf, x, step, scheme);
  if (frame_derivatives) {
    const int n = pf.n();
    const int m = pf.rank();
    const FieldFn full = [&ff, n](const Point& y) {
      AdaptedFrame f = ff.at(y);
      CMatrix s(n, n);
      s << f.parallel, f.perp;
      return s;
    };
    CMatrix s(n, n);
    s << l.frame.parallel, l.frame.perp;
    for (int mu = 0; mu < pf.chart().dim(); ++mu) {
      CMatrix ds = fd_partial(pf.chart(), full, x, mu, step, scheme);
      CMatrix nabla = ds + pf.bundle().omega(x, mu) * s;
      l.nabla_par.push_back(nabla.leftCols(m));
      l.nabla_perp.push_back(nabla.rightCols(n - m));
    }
  }
  return l;
}

ShapeComponents shape_from(const AdaptedFrame& f, const OneForm& nabla_P) {
  ShapeComponents s;
  const CMatrix cp = f.coframe_perp();
  const CMatrix ca = f.coframe_par();
  for (const CMatrix& dp : nabla_P) {
    s.up.push_back(cp * dp * f.parallel);
    s.dagger.push_back(ca * dp * f.perp);
    s.second.push_back(f.h_perp * s.up.back());
  }
  return s;
}

/// Block-diagonal per axis: (i h(s_A, nabla s_B)) and (i h(s_I, nabla s_J)).
CMatrix stacked_connections(const Local& l) {
  const Eigen::Index n = l.h.rows();
  const Eigen::Index m = l.frame.parallel.cols();
  const size_t dim = l.nabla_par.size();
  CMatrix out = CMatrix::Zero(n, n * static_cast<Eigen::Index>(dim));
  for (size_t mu = 0; mu < dim; ++mu) {
    const Eigen::Index c = n * static_cast<Eigen::Index>(mu);
    out.block(0, c, m, m) = kI * (l.frame.parallel.adjoint() * l.h * l.nabla_par[mu]);
    out.block(m, c + m, n - m, n - m) = kI * (l.frame.perp.adjoint() * l.h * l.nabla_perp[mu]);
  }
  return out;
}

/// Frame components of nabla_mu P; the off-diagonal blocks are S^A_I and S^I_A.
CMatrix stacked_shapes(const AdaptedFrame& f, const OneForm& nabla_P) {
  const Eigen::Index n = f.coframe.rows();
  CMatrix full(n, n);
  full << f.parallel, f.perp;
  CMatrix out(n, n * static_cast<Eigen::Index>(nabla_P.size()));
  for (size_t mu = 0; mu < nabla_P.size(); ++mu)
    out.middleCols(n * static_cast<Eigen::Index>(mu), n) = f.coframe * nabla_P[mu] * full;
  return out;
}

/// d[mu] = d_mu of a stacked per-axis field, evaluated by FD along mu.
std::vector<CMatrix> stacked_derivatives(const Chart& chart, const FieldFn& f, const Point& x,
                                         double step, FdScheme scheme) {
  std::vector<CMatrix> d;
  for (int mu = 0; mu < chart.dim(); ++mu) d.push_back(fd_partial(chart, f, x, mu, step, scheme));
  return d;
}

PairTensor q_tensor(const ShapeComponents& s, const CMatrix& h_perp) {
  const int dim = static_cast<int>(s.up.size());
  const Eigen::Index m = s.up.empty() ? 0 : s.up[0].cols();
  PairTensor q(dim, m, m);
  for (int mu = 0; mu < dim; ++mu)
    for (int nu = 0; nu < dim; ++nu) q(mu, nu) = s.up[mu].adjoint() * h_perp * s.up[nu];
  return q;
}

PairTensor g_tensor(const ShapeComponents& s, const CMatrix& h_perp) {
  const int dim = static_cast<int>(s.up.size());
  const Eigen::Index m = s.up.empty() ? 0 : s.up[0].cols();
  PairTensor g(dim, m, m);
  for (int mu = 0; mu < dim; ++mu)
    for (int nu = 0; nu < dim; ++nu)
      g(mu, nu) = 0.5 * (s.up[mu].adjoint() * h_perp * s.up[nu] +
                         s.up[nu].adjoint() * h_perp * s.up[mu]);
  return g;
}

/// Curvature of a block connection in "Berry" normalization:
/// dA_nu/dmu - dA_mu/dnu - i (A_mu h^{-1} A_nu - A_nu h^{-1} A_mu).
PairTensor berry_type_curvature(const std::vector<CMatrix>& dstack, const CMatrix& stack,
                                Eigen::Index offset, Eigen::Index size, const CMatrix& h_block) {
  const int dim = static_cast<int>(dstack.size());
  const Eigen::Index n = stack.rows();
  const CMatrix hinv = h_block.inverse();
  auto block = [&](const CMatrix& s, int nu) { return s.block(offset, n * nu + offset, size, size); };
  PairTensor f(dim, size, size);
  for (int mu = 0; mu < dim; ++mu)
    for (int nu = 0; nu < dim; ++nu) {
      if (mu == nu) continue;
      const CMatrix a_mu = block(stack, mu);
      const CMatrix a_nu = block(stack, nu);
      f(mu, nu) = (block(dstack[mu], nu) - block(dstack[nu], mu)) -
                  kI * (a_mu * hinv * a_nu - a_nu * hinv * a_mu);
    }
  return f;
}

struct Projected {
  PairTensor par;    // Omega_AB
  PairTensor perp;   // Omega_IJ
  PairTensor mixed_up;      // Omega^I_A
  PairTensor mixed_dagger;  // Omega^A_I
};

Projected project_curvature(const PairTensor& omega, const Local& l) {
  const int dim = omega.dim();
  const AdaptedFrame& f = l.frame;
  const Eigen::Index m = f.parallel.cols();
  const Eigen::Index k = f.perp.cols();
  Projected p{PairTensor(dim, m, m), PairTensor(dim, k, k), PairTensor(dim, k, m),
              PairTensor(dim, m, k)};
  const CMatrix cp = f.coframe_perp();
  const CMatrix ca = f.coframe_par();
  for (int mu = 0; mu < dim; ++mu)
    for (int nu = 0; nu < dim; ++nu) {
      const CMatrix& w = omega(mu, nu);
      p.par(mu, nu) = f.parallel.adjoint() * l.h * w * f.parallel;
      p.perp(mu, nu) = f.perp.adjoint() * l.h * w * f.perp;
      p.mixed_up(mu, nu) = cp * w * f.parallel;
      p.mixed_dagger(mu, nu) = ca * w * f.perp;
    }
  return p;
}

struct Derived {
  Local local;
  ShapeComponents S;
  CMatrix conn_stack;
  std::vector<CMatrix> d_conn;
  PairTensor omega;
  Projected proj;
};

Derived derive(const FrameField& ff, const Point& x, double step, FdScheme scheme) {
  const ProjectorField& pf = ff.projector();
  Derived d;
  d.local = local_data(ff, x, step, scheme, true);
  d.S = shape_from(d.local.frame, d.local.nabla_P);
  d.conn_stack = stacked_connections(d.local);
  const FieldFn conn = [&ff, step, scheme](const Point& y) {
    return stacked_connections(local_data(ff, y, step, scheme, true, false));
  };
  d.d_conn = stacked_derivatives(pf.chart(), conn, x, step, scheme);
  d.omega = curvature_all(pf.bundle(), x, step, scheme);
  d.proj = project_curvature(d.omega, d.local);
  return d;
}

PairTensor gauss_parallel_route(const Derived& d, const PairTensor& q) {
  PairTensor out(q.dim(), q(0, 0).rows(), q(0, 0).cols());
  for (int mu = 0; mu < q.dim(); ++mu)
    for (int nu = 0; nu < q.dim(); ++nu)
      out(mu, nu) = kI * (d.proj.par(mu, nu) + q(mu, nu) - q(nu, mu));
  return out;
}

PairTensor gauss_perp_route(const Derived& d) {
  const int dim = d.proj.perp.dim();
  const CMatrix& hp = d.local.frame.h_par;
  const Eigen::Index k = d.local.frame.perp.cols();
  PairTensor out(dim, k, k);
  for (int mu = 0; mu < dim; ++mu)
    for (int nu = 0; nu < dim; ++nu) {
      const CMatrix& a = d.S.dagger[mu];
      const CMatrix& b = d.S.dagger[nu];
      out(mu, nu) = d.proj.perp(mu, nu) + (a.adjoint() * hp * b - b.adjoint() * hp * a);
    }
  return out;
}

void require_torsion_free(const BaseConnection& g, int dim) {
  if (static_cast<int>(g.size()) != dim)
    throw Error(ErrorKind::InvalidArgument, "base connection has wrong dimension");
  for (const RMatrix& c : g) {
    if (c.rows() != dim || c.cols() != dim)
      throw Error(ErrorKind::InvalidArgument, "base connection has wrong dimension");
    if (max_abs(c - c.transpose()) > 1e-12)
      throw Error(ErrorKind::TorsionfulConnection, "base connection is not symmetric");
  }
}

}  // namespace

ShapeComponents shape_operator(const ProjectorField& pf, const AdaptedFrame& frame, double step,
                               FdScheme scheme) {
  return shape_from(frame, nabla_P_all(pf, frame.point, step, scheme));
}

double adjointness_residual(const ProjectorField& pf, const AdaptedFrame& f, double step,
                            FdScheme scheme) {
  const CMatrix h = pf.bundle().h(f.point);
  double r = 0.0;
  for (const CMatrix& dp : nabla_P_all(pf, f.point, step, scheme)) {
    const CMatrix lhs = f.perp.adjoint() * h * (dp * f.parallel);
    const CMatrix rhs = (dp * f.perp).adjoint() * h * f.parallel;
    r = std::max(r, max_abs(lhs - rhs));
  }
  return r;
}

OneForm berry_connection(const FrameField& ff, const Point& x, double step, FdScheme scheme) {
  const Local l = local_data(ff, x, step, scheme, true);
  OneForm a;
  for (const CMatrix& nab : l.nabla_par) a.push_back(kI * (l.frame.parallel.adjoint() * l.h * nab));
  return a;
}

QuantumMetric quantum_metric(const ProjectorField& pf, const AdaptedFrame& frame, double step,
                             FdScheme scheme) {
  const ShapeComponents s = shape_operator(pf, frame, step, scheme);
  QuantumMetric qm;
  qm.G = g_tensor(s, frame.h_perp);
  const int dim = pf.chart().dim();
  const CMatrix hinv = frame.h_par.inverse();
  qm.base = CMatrix::Zero(dim, dim);
  for (int mu = 0; mu < dim; ++mu)
    for (int nu = 0; nu < dim; ++nu) qm.base(mu, nu) = (hinv.transpose() * qm.G(mu, nu)).trace();
  return qm;
}

BerryCurvature berry_curvature(const FrameField& ff, const Point& x, double step,
                               FdScheme scheme) {
  const Derived d = derive(ff, x, step, scheme);
  const Eigen::Index m = ff.projector().rank();
  BerryCurvature bc;
  bc.derivative_route = berry_type_curvature(d.d_conn, d.conn_stack, 0, m, d.local.frame.h_par);
  bc.gauss_route = gauss_parallel_route(d, q_tensor(d.S, d.local.frame.h_perp));
  return bc;
}

QgtReport qgt(const FrameField& ff, const Point& x, double step, FdScheme scheme) {
  const Derived d = derive(ff, x, step, scheme);
  const Eigen::Index m = ff.projector().rank();
  const int dim = ff.projector().chart().dim();
  const AdaptedFrame& f = d.local.frame;
  QgtReport r;
  r.Q = q_tensor(d.S, f.h_perp);
  r.G = g_tensor(d.S, f.h_perp);
  r.F = berry_type_curvature(d.d_conn, d.conn_stack, 0, m, f.h_par);
  r.omega_par = d.proj.par;
  const CMatrix comp = CMatrix::Identity(ff.projector().n(), ff.projector().n()) - d.local.P;
  for (int mu = 0; mu < dim; ++mu)
    for (int nu = 0; nu < dim; ++nu) {
      const CMatrix& q = r.Q(mu, nu);
      const CMatrix sym = 0.5 * (q + r.Q(nu, mu));
      const CMatrix anti = 0.5 * (q - r.Q(nu, mu));
      const CMatrix omega_par_route = -kI * r.F(mu, nu);
      r.symmetric_residual = std::max(r.symmetric_residual, max_abs(sym - r.G(mu, nu)));
      r.antisymmetric_residual =
          std::max(r.antisymmetric_residual,
                   max_abs(anti - 0.5 * (omega_par_route - d.proj.par(mu, nu))));
      r.hermiticity_residual =
          std::max(r.hermiticity_residual, max_abs(q - r.Q(nu, mu).adjoint()));
      r.berry_only_gap = std::max(r.berry_only_gap, max_abs(anti + 0.5 * kI * r.F(mu, nu)));
      const CMatrix alt1 = d.local.nabla_par[mu].adjoint() * d.local.h * comp * d.local.nabla_par[nu];
      const CMatrix alt2 =
          f.parallel.adjoint() * d.local.h * d.local.nabla_P[mu] * d.local.nabla_P[nu] * f.parallel;
      r.alt_transport_residual = std::max(r.alt_transport_residual, max_abs(alt1 - q));
      r.alt_projector_residual = std::max(r.alt_projector_residual, max_abs(alt2 - q));
    }
  return r;
}

GaussResiduals gauss_residuals(const FrameField& ff, const Point& x, double step,
                               FdScheme scheme) {
  const Derived d = derive(ff, x, step, scheme);
  const Eigen::Index m = ff.projector().rank();
  const Eigen::Index k = ff.projector().corank();
  const AdaptedFrame& f = d.local.frame;
  const PairTensor f_par = berry_type_curvature(d.d_conn, d.conn_stack, 0, m, f.h_par);
  const PairTensor f_par_gauss = gauss_parallel_route(d, q_tensor(d.S, f.h_perp));
  const PairTensor f_perp = berry_type_curvature(d.d_conn, d.conn_stack, m, k, f.h_perp);
  const PairTensor omega_perp = gauss_perp_route(d);
  GaussResiduals r;
  r.parallel = max_diff(f_par, f_par_gauss);
  for (int mu = 0; mu < f_perp.dim(); ++mu)
    for (int nu = 0; nu < f_perp.dim(); ++nu)
      r.perp = std::max(r.perp, max_abs(-kI * f_perp(mu, nu) - omega_perp(mu, nu)));
  return r;
}

CodazziResiduals codazzi_residuals(const FrameField& ff, const Point& x, double step,
                                   const BaseConnection& base, const BaseConnection& alt_base,
                                   FdScheme scheme) {
  const ProjectorField& pf = ff.projector();
  const int dim = pf.chart().dim();
  require_torsion_free(base, dim);
  require_torsion_free(alt_base, dim);
  const Eigen::Index n = pf.n();
  const Eigen::Index m = pf.rank();
  const Eigen::Index k = pf.corank();

  const Local l = local_data(ff, x, step, scheme, true);
  const ShapeComponents s = shape_from(l.frame, l.nabla_P);
  const FieldFn shapes = [&ff, step, scheme](const Point& y) {
    AdaptedFrame f = ff.at(y);
    return stacked_shapes(f, nabla_P_all(ff.projector(), y, step, scheme));
  };
  const std::vector<CMatrix> ds = stacked_derivatives(pf.chart(), shapes, x, step, scheme);
  const PairTensor omega = curvature_all(pf.bundle(), x, step, scheme);
  const Projected proj = project_curvature(omega, l);

  OneForm w_par, w_perp;  // mixed-index projected connection coefficients
  for (int mu = 0; mu < dim; ++mu) {
    w_par.push_back(l.frame.coframe_par() * l.nabla_par[mu]);
    w_perp.push_back(l.frame.coframe_perp() * l.nabla_perp[mu]);
  }
  auto d_up = [&](int mu, int nu) -> CMatrix { return ds[mu].block(m, n * nu, k, m); };
  auto d_dag = [&](int mu, int nu) -> CMatrix { return ds[mu].block(0, n * nu + m, m, k); };

  auto residuals = [&](const BaseConnection& g) {
    std::pair<PairTensor, PairTensor> r{PairTensor(dim, k, m), PairTensor(dim, m, k)};
    auto D_up = [&](int mu, int nu) {
      CMatrix v = d_up(mu, nu) + w_perp[mu] * s.up[nu] - s.up[nu] * w_par[mu];
      for (int rho = 0; rho < dim; ++rho) v -= g[rho](mu, nu) * s.up[rho];
      return v;
    };
    auto D_dag = [&](int mu, int nu) {
      CMatrix v = d_dag(mu, nu) + w_par[mu] * s.dagger[nu] - s.dagger[nu] * w_perp[mu];
      for (int rho = 0; rho < dim; ++rho) v -= g[rho](mu, nu) * s.dagger[rho];
      return v;
    };
    for (int mu = 0; mu < dim; ++mu)
      for (int nu = 0; nu < dim; ++nu) {
        r.first(mu, nu) = (D_up(mu, nu) - D_up(nu, mu)) - proj.mixed_up(mu, nu);
        r.second(mu, nu) = (D_dag(mu, nu) - D_dag(nu, mu)) + proj.mixed_dagger(mu, nu);
      }
    return r;
  };
  const auto r1 = residuals(base);
  const auto r2 = residuals(alt_base);
  CodazziResiduals out;
  out.parallel = r1.first.max_abs();
  out.perp = r1.second.max_abs();
  out.independence = std::max(max_diff(r1.first, r2.first), max_diff(r1.second, r2.second));
  return out;
}

Convergence measure_convergence(const std::function<double(double)>& residual, double step) {
  Convergence c;
  c.at_step = residual(step);
  c.at_half_step = residual(0.5 * step);
  c.order = (c.at_step > 0.0 && c.at_half_step > 0.0)
                ? std::log2(c.at_step / c.at_half_step)
                : std::numeric_limits<double>::quiet_NaN();
  return c;
}

SubGeometryPoint evaluate_point(const FrameField& ff, const Point& x, double step,
                                FdScheme scheme) {
  const Derived d = derive(ff, x, step, scheme);
  const Eigen::Index m = ff.projector().rank();
  const int dim = ff.projector().chart().dim();
  SubGeometryPoint p;
  p.frame = d.local.frame;
  for (int mu = 0; mu < dim; ++mu)
    p.A.push_back(d.conn_stack.block(0, ff.projector().n() * mu, m, m));
  p.S = d.S;
  p.Q = q_tensor(d.S, p.frame.h_perp);
  p.G = g_tensor(d.S, p.frame.h_perp);
  p.F = berry_type_curvature(d.d_conn, d.conn_stack, 0, m, p.frame.h_par);
  p.F_gauss = gauss_parallel_route(d, p.Q);
  p.omega_par = d.proj.par;
  p.omega_perp = d.proj.perp;
  return p;
}

}  // namespace qgeom
