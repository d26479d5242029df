#include "qgeom/dirac.hpp"

#include <cmath>
#include <limits>

namespace qgeom {

namespace {

RMatrix fd_real(const SpacetimeModel& model, const RealFieldFn& f, const Point& x, int mu) {
  const FieldFn wrapped = [&f](const Point& y) { return CMatrix(f(y).cast<cplx>()); };
  return fd_partial(model.chart, wrapped, x, mu, model.step, model.scheme).real();
}

std::vector<RMatrix> fd_all(const SpacetimeModel& model, const RealFieldFn& f, const Point& x) {
  std::vector<RMatrix> out;
  for (int mu = 0; mu < 4; ++mu) out.push_back(fd_real(model, f, x, mu));
  return out;
}

/// Gamma stacked as a 16 x 4 block column: rows rho * 4 + mu.
RMatrix stack(const BaseConnection& g) {
  RMatrix s(16, 4);
  for (int r = 0; r < 4; ++r) s.middleRows(r * 4, 4) = g[static_cast<size_t>(r)];
  return s;
}

double eta_diag(int a) { return a == 0 ? -1.0 : 1.0; }

CMatrix pauli(int i) {
  CMatrix s(2, 2);
  if (i == 0) s << 0, 1, 1, 0;
  if (i == 1) s << 0, -kI, kI, 0;
  if (i == 2) s << 1, 0, 0, -1;
  return s;
}

RMatrix diag4(double a, double b, double c, double d) {
  RMatrix m = RMatrix::Zero(4, 4);
  m(0, 0) = a;
  m(1, 1) = b;
  m(2, 2) = c;
  m(3, 3) = d;
  return m;
}

SpacetimeModel conformal_model(std::string name, Chart chart, ConformalBlock block, double m,
                               double q, FieldConfig em) {
  auto lambda = block.lambda;
  auto grad = block.grad_log_lambda;
  SpacetimeModel model{
      std::move(name),
      std::move(chart),
      [lambda](const Point& x) {
        const double l = lambda(x);
        return diag4(-1.0, l * l, l * l, 1.0);
      },
      [lambda](const Point& x) {
        const double l = lambda(x);
        return diag4(1.0, 1.0 / l, 1.0 / l, 1.0);
      },
      field_potential(em),
      q,
      m,
      [lambda, grad](const Point& x) {
        const double l = lambda(x);
        const Eigen::Vector2d gl = grad(x);
        std::vector<RMatrix> d(4, RMatrix::Zero(4, 4));
        for (int k = 0; k < 2; ++k) d[static_cast<size_t>(k + 1)] = diag4(0, 1, 1, 0) * (2.0 * l * l * gl[k]);
        return d;
      },
      [lambda, grad](const Point& x) {
        const double l = lambda(x);
        const Eigen::Vector2d gl = grad(x);
        std::vector<RMatrix> d(4, RMatrix::Zero(4, 4));
        for (int k = 0; k < 2; ++k) d[static_cast<size_t>(k + 1)] = diag4(0, 1, 1, 0) * (-gl[k] / l);
        return d;
      },
      false,
      block,
  };
  if (!(m > 0.0)) throw Error(ErrorKind::DomainError, "mass must be positive");
  return model;
}

}  // namespace

const Gammas& flat_gammas() {
  static const Gammas g = [] {
    Gammas out;
    out[0] = CMatrix::Zero(4, 4);
    out[0].diagonal() << 1, 1, -1, -1;
    for (int i = 0; i < 3; ++i) {
      CMatrix gi = CMatrix::Zero(4, 4);
      gi.topRightCorner(2, 2) = pauli(i);
      gi.bottomLeftCorner(2, 2) = -pauli(i);
      out[static_cast<size_t>(i + 1)] = gi;
    }
    return out;
  }();
  return g;
}

const CMatrix& dirac_beta() { return flat_gammas()[0]; }

const RMatrix& minkowski_eta() {
  static const RMatrix eta = diag4(-1, 1, 1, 1);
  return eta;
}

PotentialFn field_potential(const FieldConfig& em) {
  return [em](const Point& x) {
    return Eigen::Vector4d(-em.E * x[1], -0.5 * em.B * x[2], 0.5 * em.B * x[1], 0.0);
  };
}

SpacetimeModel minkowski_model(double m, double q, FieldConfig em) {
  Chart chart({"t", "x", "y", "z"}, {{-50, 50}, {-50, 50}, {-50, 50}, {-50, 50}},
              {5e-4, 5e-4, 5e-4, 5e-4});
  ConformalBlock flat{0.0, [](const Point&) { return 1.0; },
                      [](const Point&) { return Eigen::Vector2d(0.0, 0.0); }};
  return conformal_model("minkowski", chart, flat, m, q, em);
}

SpacetimeModel hyperbolic_model(double a, HyperbolicChart variant, double m, double q,
                                FieldConfig em) {
  if (!(a > 0.0)) throw Error(ErrorKind::DomainError, "curvature scale a must be positive");
  if (variant == HyperbolicChart::half_plane) {
    Chart chart({"t", "x", "y", "z"}, {{-50, 50}, {0.02, 20}, {-20, 20}, {-50, 50}},
                {5e-4, 5e-4, 5e-4, 5e-4});
    ConformalBlock block{a, [a](const Point& x) { return a / x[1]; },
                         [](const Point& x) { return Eigen::Vector2d(-1.0 / x[1], 0.0); }};
    return conformal_model("hyperbolic-half-plane", chart, block, m, q, em);
  }
  Chart chart = Chart({"t", "x", "y", "z"}, {{-50, 50}, {-1, 1}, {-1, 1}, {-50, 50}},
                      {5e-4, 5e-4, 5e-4, 5e-4})
                    .restricted([](const Point& x) { return x[1] * x[1] + x[2] * x[2] < 0.98; },
                                "disk x^2 + y^2 < 0.98");
  ConformalBlock block{
      a, [a](const Point& x) { return 2.0 * a / (1.0 - x[1] * x[1] - x[2] * x[2]); },
      [](const Point& x) {
        const double w = 1.0 - x[1] * x[1] - x[2] * x[2];
        return Eigen::Vector2d(2.0 * x[1] / w, 2.0 * x[2] / w);
      }};
  return conformal_model("hyperbolic-disk", chart, block, m, q, em);
}

RMatrix inverse_metric(const SpacetimeModel& model, const Point& x) {
  const RMatrix g = model.metric(x);
  Eigen::FullPivLU<RMatrix> lu(g);
  if (!lu.isInvertible()) throw Error(ErrorKind::SingularMetric, "spacetime metric is singular");
  return lu.inverse();
}

std::vector<RMatrix> metric_derivatives(const SpacetimeModel& model, const Point& x) {
  if (model.metric_derivative && !model.force_fd) return model.metric_derivative(x);
  return fd_all(model, model.metric, x);
}

std::vector<RMatrix> tetrad_derivatives(const SpacetimeModel& model, const Point& x) {
  if (model.tetrad_derivative && !model.force_fd) return model.tetrad_derivative(x);
  return fd_all(model, model.tetrad, x);
}

BaseConnection christoffels(const SpacetimeModel& model, const Point& x) {
  model.chart.require_contains(x);
  const RMatrix ginv = inverse_metric(model, x);
  const std::vector<RMatrix> dg = metric_derivatives(model, x);
  // first kind: Gamma_{s mu nu}
  BaseConnection first(4, RMatrix::Zero(4, 4));
  for (int s = 0; s < 4; ++s)
    for (int mu = 0; mu < 4; ++mu)
      for (int nu = 0; nu < 4; ++nu)
        first[static_cast<size_t>(s)](mu, nu) =
            0.5 * (dg[static_cast<size_t>(mu)](s, nu) + dg[static_cast<size_t>(nu)](s, mu) -
                   dg[static_cast<size_t>(s)](mu, nu));
  BaseConnection out(4, RMatrix::Zero(4, 4));
  for (int r = 0; r < 4; ++r)
    for (int s = 0; s < 4; ++s) out[static_cast<size_t>(r)] += ginv(r, s) * first[static_cast<size_t>(s)];
  return out;
}

Riemann riemann(const SpacetimeModel& model, const Point& x) {
  const BaseConnection G = christoffels(model, x);
  const RealFieldFn stacked = [&model](const Point& y) { return stack(christoffels(model, y)); };
  const std::vector<RMatrix> dG = fd_all(model, stacked, x);
  // dG[mu](rho * 4 + a, b) = d_mu Gamma^rho_{a b}
  Riemann R;
  for (int r = 0; r < 4; ++r)
    for (int s = 0; s < 4; ++s)
      for (int mu = 0; mu < 4; ++mu)
        for (int nu = 0; nu < 4; ++nu) {
          double v = dG[static_cast<size_t>(mu)](r * 4 + nu, s) -
                     dG[static_cast<size_t>(nu)](r * 4 + mu, s);
          for (int l = 0; l < 4; ++l)
            v += G[static_cast<size_t>(r)](mu, l) * G[static_cast<size_t>(l)](nu, s) -
                 G[static_cast<size_t>(r)](nu, l) * G[static_cast<size_t>(l)](mu, s);
          R.up(r, s, mu, nu) = v;
        }
  const RMatrix g = model.metric(x);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int mu = 0; mu < 4; ++mu)
        for (int nu = 0; nu < 4; ++nu) {
          double v = 0.0;
          for (int r = 0; r < 4; ++r) v += g(a, r) * R.up(r, b, mu, nu);
          R.low(a, b, mu, nu) = v;
        }
  return R;
}

double scalar_curvature(const SpacetimeModel& model, const Point& x) {
  const Riemann R = riemann(model, x);
  const RMatrix ginv = inverse_metric(model, x);
  double scal = 0.0;
  for (int s = 0; s < 4; ++s)
    for (int n = 0; n < 4; ++n) {
      double ricci = 0.0;
      for (int r = 0; r < 4; ++r) ricci += R.up(r, s, r, n);
      scal += ginv(s, n) * ricci;
    }
  return scal;
}

SpinConnection spin_connection(const SpacetimeModel& model, const Point& x) {
  const RMatrix& eta = minkowski_eta();
  const RMatrix E = model.tetrad(x);
  const RMatrix Eup = eta * E;               // e^{b nu}
  const RMatrix Elow = Eup * model.metric(x);  // (e^a)_nu
  const std::vector<RMatrix> dE = tetrad_derivatives(model, x);
  const BaseConnection G = christoffels(model, x);
  const Gammas& gam = flat_gammas();

  SpinConnection sc;
  for (int mu = 0; mu < 4; ++mu) {
    RMatrix Gmu(4, 4);  // Gmu(nu, l) = Gamma^nu_{mu l}
    for (int nu = 0; nu < 4; ++nu) Gmu.row(nu) = G[static_cast<size_t>(nu)].row(mu);
    const RMatrix nabla = eta * dE[static_cast<size_t>(mu)] + Eup * Gmu.transpose();
    const RMatrix raw = Elow * nabla.transpose();
    sc.antisymmetry = std::max(sc.antisymmetry, max_abs(raw + raw.transpose()));
    const RMatrix w = 0.5 * (raw - raw.transpose());
    CMatrix spinor = CMatrix::Zero(4, 4);
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b)
        if (w(a, b) != 0.0)
          spinor += (-0.25 * w(a, b) * eta_diag(a) * eta_diag(b)) *
                    (gam[static_cast<size_t>(a)] * gam[static_cast<size_t>(b)]);
    sc.omega.push_back(w);
    sc.spinor.push_back(spinor);
  }
  return sc;
}

std::vector<CMatrix> sigma_matrices(const Gammas& g) {
  std::vector<CMatrix> out(16);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      out[static_cast<size_t>(a * 4 + b)] =
          0.5 * kI * (g[static_cast<size_t>(a)] * g[static_cast<size_t>(b)] -
                      g[static_cast<size_t>(b)] * g[static_cast<size_t>(a)]);
  return out;
}

Gammas curved_gammas(const SpacetimeModel& model, const Point& x) {
  const RMatrix E = model.tetrad(x);
  const Gammas& gam = flat_gammas();
  Gammas out;
  for (int mu = 0; mu < 4; ++mu) {
    CMatrix g = CMatrix::Zero(4, 4);
    for (int a = 0; a < 4; ++a) g += E(a, mu) * gam[static_cast<size_t>(a)];
    out[static_cast<size_t>(mu)] = g;
  }
  return out;
}

BundleSpec spinor_bundle(const SpacetimeModel& model) {
  return BundleSpec(
      model.chart, 4, [](const Point&) { return dirac_beta(); },
      [model](const Point& x, int mu) {
        return spin_connection(model, x).spinor[static_cast<size_t>(mu)];
      });
}

CMatrix riemann_spinor_curvature(const SpacetimeModel& model, const Point& x, int mu, int nu) {
  const Riemann R = riemann(model, x);
  const Gammas g = curved_gammas(model, x);
  CMatrix out = CMatrix::Zero(4, 4);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      out += (-0.25 * R.low(a, b, mu, nu)) * (g[static_cast<size_t>(a)] * g[static_cast<size_t>(b)]);
  return out;
}

PhasePoint on_shell(const SpacetimeModel& model, const Point& x, const Eigen::Vector3d& p) {
  if (!(model.m > 0.0)) throw Error(ErrorKind::DomainError, "mass must be positive");
  const RMatrix ginv = inverse_metric(model, x);
  const double a = ginv(0, 0);
  double b = 0.0, c = model.m * model.m;
  for (int i = 0; i < 3; ++i) {
    b += 2.0 * ginv(0, i + 1) * p[i];
    for (int j = 0; j < 3; ++j) c += ginv(i + 1, j + 1) * p[i] * p[j];
  }
  const double disc = b * b - 4.0 * a * c;
  if (!(disc > 0.0) || a == 0.0)
    throw Error(ErrorKind::DomainError, "no future-directed mass-shell solution");
  return PhasePoint{x, p, (-b + std::sqrt(disc)) / (2.0 * a)};
}

PhasePoint phase_point(const SpacetimeModel& model, const Point& y) {
  if (y.size() != 7) throw Error(ErrorKind::InvalidArgument, "phase chart points have 7 components");
  return on_shell(model, y.head(4), y.tail(3));
}

Point chart_point(const PhasePoint& pp) {
  Point y(7);
  y << pp.x, pp.p;
  return y;
}

Eigen::Vector4d raise(const SpacetimeModel& model, const Point& x, const Eigen::Vector4d& p) {
  return inverse_metric(model, x) * p;
}

double shell_residual(const SpacetimeModel& model, const PhasePoint& pp) {
  const Eigen::Vector4d p = pp.lower();
  return p.dot(inverse_metric(model, pp.x) * p) + model.m * model.m;
}

DiracProjectors dirac_projectors(const SpacetimeModel& model, const PhasePoint& pp) {
  const double r = shell_residual(model, pp);
  if (!(std::abs(r) <= 1e-10))
    throw Error(ErrorKind::OffShell, "mass-shell residual " + std::to_string(r));
  const Gammas g = curved_gammas(model, pp.x);
  const Eigen::Vector4d p = pp.lower();
  CMatrix slash = CMatrix::Zero(4, 4);
  for (int mu = 0; mu < 4; ++mu) slash += p[mu] * g[static_cast<size_t>(mu)];
  const CMatrix I = CMatrix::Identity(4, 4);
  const double m = model.m;
  return DiracProjectors{(m * I - slash) / (2.0 * m), (m * I + slash) / (2.0 * m), -(m * I + slash)};
}

Chart phase_chart(const SpacetimeModel& model, double p_extent, double step) {
  std::vector<std::string> names = model.chart.coord_names();
  std::vector<Interval> dom = model.chart.domain();
  for (const char* n : {"p1", "p2", "p3"}) {
    names.emplace_back(n);
    dom.push_back({-p_extent, p_extent});
  }
  std::vector<double> steps(7, step);
  const Chart base = model.chart;
  return Chart(names, dom, steps)
      .restricted([base](const Point& y) { return base.contains(y.head(4)); }, "spacetime domain");
}

RMatrix pi_form(const SpacetimeModel& model, const PhasePoint& pp) {
  const Eigen::Vector4d pl = pp.lower();
  const Eigen::Vector4d pu = raise(model, pp.x, pl);
  const BaseConnection G = christoffels(model, pp.x);
  RMatrix pi = RMatrix::Zero(4, 7);
  for (int l = 0; l < 4; ++l) {
    // d p_0 / d x^l = Gamma^mu_{l s} p^s p_mu / p^0
    double dp0 = 0.0;
    for (int mu = 0; mu < 4; ++mu)
      for (int s = 0; s < 4; ++s) dp0 += G[static_cast<size_t>(mu)](l, s) * pu[s] * pl[mu];
    dp0 /= pu[0];
    for (int a = 0; a < 4; ++a) {
      double v = a == 0 ? dp0 : 0.0;
      for (int r = 0; r < 4; ++r) v -= pl[r] * G[static_cast<size_t>(r)](a, l);
      pi(a, l) = v;
    }
  }
  for (int i = 0; i < 3; ++i) {
    pi(i + 1, 4 + i) = 1.0;
    pi(0, 4 + i) = -pu[i + 1] / pu[0];
  }
  return pi;
}

double pi_constraint_residual(const SpacetimeModel& model, const PhasePoint& pp,
                              const RMatrix& pi) {
  const Eigen::Vector4d pu = raise(model, pp.x, pp.lower());
  return max_abs(pu.transpose() * pi);
}

CMatrix kernel_frame(const SpacetimeModel& model, const PhasePoint& pp) {
  const CMatrix P = dirac_projectors(model, pp).P;
  Eigen::VectorXd signs;
  return h_gram_schmidt(P.leftCols(2), dirac_beta(), signs);
}

CMatrix kernel_perp_frame(const SpacetimeModel& model, const PhasePoint& pp) {
  const CMatrix P = dirac_projectors(model, pp).P;
  Eigen::VectorXd signs;
  return h_gram_schmidt((CMatrix::Identity(4, 4) - P).rightCols(2), dirac_beta(), signs);
}

AnalyticQgt analytic_qgt(const SpacetimeModel& model, const PhasePoint& pp, const CMatrix& s) {
  const DiracProjectors proj = dirac_projectors(model, pp);
  if (max_abs(proj.D * s) > 1e-10)
    throw Error(ErrorKind::FrameNotInKernel, "frame is not annihilated by the Dirac symbol");
  const CMatrix& beta = dirac_beta();
  const double m = model.m;
  const RMatrix pi = pi_form(model, pp);
  const Gammas g = curved_gammas(model, pp.x);
  const RMatrix ginv = inverse_metric(model, pp.x);
  const Riemann R = riemann(model, pp.x);
  const CMatrix h_ab = s.adjoint() * beta * s;
  const Eigen::Index k = s.cols();

  std::vector<CMatrix> u(7);  // Pi_alpha(e_k) gamma^alpha s
  for (int c = 0; c < 7; ++c) {
    CMatrix v = CMatrix::Zero(4, k);
    for (int a = 0; a < 4; ++a) v += pi(a, c) * (g[static_cast<size_t>(a)] * s);
    u[static_cast<size_t>(c)] = v;
  }
  // varsigma^{alpha beta}_{AB} = <s_A | sigma^{alpha beta} s_B>
  const std::vector<CMatrix> sig = sigma_matrices(g);
  std::vector<CMatrix> sigma(16);
  for (size_t i = 0; i < 16; ++i) sigma[i] = s.adjoint() * beta * sig[i] * s;

  AnalyticQgt out{PairTensor(7, k, k), PairTensor(7, k, k), PairTensor(7, k, k),
                  PairTensor(7, k, k)};
  for (int c = 0; c < 7; ++c)
    for (int d = 0; d < 7; ++d) {
      out.Q(c, d) = u[static_cast<size_t>(c)].adjoint() * beta * u[static_cast<size_t>(d)] /
                    (4.0 * m * m);
      const double gpp = pi.col(c).dot(ginv * pi.col(d));
      out.G(c, d) = -gpp / (4.0 * m * m) * h_ab;
      CMatrix f = CMatrix::Zero(k, k);
      CMatrix om = CMatrix::Zero(k, k);
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) {
          const CMatrix& sg = sigma[static_cast<size_t>(a * 4 + b)];
          double w = 2.0 * pi(a, c) * pi(b, d) / (m * m);
          if (c < 4 && d < 4) w -= R.low(a, b, c, d);
          f += 0.25 * w * sg;
        }
      if (c < 4 && d < 4) {
        const CMatrix curv = riemann_spinor_curvature(model, pp.x, c, d);
        om = s.adjoint() * beta * curv * s;
      }
      out.F(c, d) = f;
      out.omega_par(c, d) = om;
    }
  return out;
}

ProjectorField dirac_projector_field(const SpacetimeModel& model, const Chart& chart) {
  BundleSpec spec(
      chart, 4, [](const Point&) { return dirac_beta(); },
      [model](const Point& y, int mu) {
        if (mu >= 4) return CMatrix(CMatrix::Zero(4, 4));
        return spin_connection(model, y.head(4)).spinor[static_cast<size_t>(mu)];
      });
  return ProjectorField(
      spec, [model](const Point& y) { return dirac_projectors(model, phase_point(model, y)).P; },
      2);
}

FrameField dirac_frame_field(const SpacetimeModel& model, const ProjectorField& pf) {
  return FrameField::custom(
      pf, [model](const Point& y) { return kernel_frame(model, phase_point(model, y)); },
      [model](const Point& y) { return kernel_perp_frame(model, phase_point(model, y)); });
}

AnalyticResiduals compare_with_analytic(const SpacetimeModel& model, const PhasePoint& pp,
                                        double step, FdScheme scheme) {
  const double extent = std::max(4.0, 2.0 * pp.p.cwiseAbs().maxCoeff() + 1.0);
  const Chart chart = phase_chart(model, extent, std::min(step, 0.1));
  const ProjectorField pf = dirac_projector_field(model, chart);
  const FrameField ff = dirac_frame_field(model, pf);
  const Point y = chart_point(pp);
  const SubGeometryPoint num = evaluate_point(ff, y, step, scheme);
  const AnalyticQgt ana = analytic_qgt(model, pp, num.frame.parallel);
  return AnalyticResiduals{max_diff(num.Q, ana.Q), max_diff(num.G, ana.G), max_diff(num.F, ana.F)};
}

NumericComparison numeric_vs_analytic(const SpacetimeModel& model, const PhasePoint& pp,
                                      double step, FdScheme scheme) {
  NumericComparison c;
  c.at_step = compare_with_analytic(model, pp, step, scheme);
  c.at_half_step = compare_with_analytic(model, pp, step / 2.0, scheme);
  const double r1 = c.at_step.max(), r2 = c.at_half_step.max();
  c.order = (r1 > 0.0 && r2 > 0.0) ? std::log2(r1 / r2) : std::numeric_limits<double>::quiet_NaN();
  return c;
}

RMatrix hyperbolic_quantum_metric(const SpacetimeModel& model, const PhasePoint& pp) {
  if (!model.conformal)
    throw Error(ErrorKind::InvalidArgument, "model has no conformally flat spatial plane");
  if (pp.p[2] != 0.0) throw Error(ErrorKind::OffPlane, "closed form requires p_3 = 0");
  const double m = model.m;
  const double l = model.conformal->lambda(pp.x);
  const Eigen::Vector2d gl = model.conformal->grad_log_lambda(pp.x);
  const Eigen::Vector2d pl(pp.p[0], pp.p[1]);
  const Eigen::Vector2d pu = pl / (l * l);
  const double pkpk = pl.dot(pu);
  const double E = std::sqrt(m * m + pkpk);
  RMatrix C = RMatrix::Zero(7, 7);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      C(4 + i, 4 + j) = pu[i] * pu[j] / (E * E) - (i == j ? 1.0 / (l * l) : 0.0);
      C(1 + i, 1 + j) = (pkpk / E) * (pkpk / E) * gl[i] * gl[j];
      const double cross = -(pkpk / (E * E)) * pu[i] * gl[j];
      C(4 + i, 1 + j) += cross;
      C(1 + j, 4 + i) += cross;
    }
  return C / (4.0 * m * m);
}

}  // namespace qgeom
