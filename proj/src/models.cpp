#include "qgeom/models.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <random>

#include <unsupported/Eigen/MatrixFunctions>

namespace qgeom {

CVector bloch_state(double theta, double phi) {
  CVector v(2);
  v << std::cos(theta / 2), std::polar(1.0, phi) * std::sin(theta / 2);
  return v;
}

ProjectorField bloch_projector(double step) {
  const double pi = std::numbers::pi;
  Chart chart({"theta", "phi"}, {{0.05, pi - 0.05}, {-pi, pi}}, {step, step});
  BundleSpec spec(
      chart, 2, [](const Point&) { return CMatrix::Identity(2, 2); },
      [](const Point&, int) { return CMatrix::Zero(2, 2); });
  return ProjectorField(
      spec,
      [](const Point& x) {
        CVector s = bloch_state(x[0], x[1]);
        return CMatrix(s * s.adjoint());
      },
      1);
}

FrameField bloch_state_frame(const ProjectorField& pf) {
  return FrameField::custom(
      pf, [](const Point& x) { return CMatrix(bloch_state(x[0], x[1])); },
      [](const Point& x) {
        CMatrix v(2, 1);
        v << -std::polar(1.0, -x[1]) * std::sin(x[0] / 2), std::cos(x[0] / 2);
        return v;
      });
}

namespace {

struct RandomData {
  int n, m, dim;
  CMatrix eta;
  CMatrix p0;
  CMatrix k0;
  std::vector<CMatrix> k;      // projector rotation generators
  std::vector<CMatrix> c;      // constant connection part
  std::vector<std::vector<CMatrix>> d;  // linear connection part d[mu][nu]
  CMatrix t0;
  std::vector<CMatrix> b;      // frame change T(x) = t0 + sum x_mu b_mu

  CMatrix frame_change(const Point& x) const {
    CMatrix t = t0;
    for (int mu = 0; mu < dim; ++mu) t += x[mu] * b[mu];
    return t;
  }
};

}  // namespace

ProjectorField random_projector_model(std::uint64_t seed, const RandomModelOptions& o) {
  if (o.negative < 0 || o.negative >= o.n)
    throw Error(ErrorKind::InvalidArgument, "random model needs 0 <= negative < n");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto gaussian = [&](int r, int c) {
    CMatrix g(r, c);
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) g(i, j) = cplx(normal(rng), normal(rng));
    return g;
  };
  auto data = std::make_shared<RandomData>();
  data->n = o.n;
  data->m = o.m;
  data->dim = o.dim;
  data->eta = CMatrix::Identity(o.n, o.n);
  // negative directions sit at the end so both projector blocks stay non-degenerate
  for (int i = o.n - o.negative; i < o.n; ++i) data->eta(i, i) = -1.0;
  data->p0 = CMatrix::Zero(o.n, o.n);
  for (int i = 0; i < o.m; ++i) data->p0(i, i) = 1.0;
  // eta-antihermitian: eta * (antihermitian)
  auto eta_anti = [&](double s) {
    CMatrix a = gaussian(o.n, o.n);
    return CMatrix(data->eta * (s * 0.5 * (a - a.adjoint())));
  };
  // projector rotations mixing the two eta-signature classes are eta-boosts; keep them mild
  data->k0 = eta_anti(o.scale);
  for (int mu = 0; mu < o.dim; ++mu) data->k.push_back(eta_anti(2.0 * o.scale));
  for (int mu = 0; mu < o.dim; ++mu) {
    data->c.push_back(eta_anti(o.scale));
    std::vector<CMatrix> row;
    for (int nu = 0; nu < o.dim; ++nu) row.push_back(eta_anti(o.scale));
    data->d.push_back(row);
  }
  data->t0 = CMatrix::Identity(o.n, o.n) + 0.3 * o.scale * gaussian(o.n, o.n);
  for (int mu = 0; mu < o.dim; ++mu) data->b.push_back(0.3 * o.scale * gaussian(o.n, o.n));

  std::vector<std::string> names;
  std::vector<Interval> dom;
  for (int mu = 0; mu < o.dim; ++mu) {
    names.push_back("x" + std::to_string(mu + 1));
    dom.push_back({-0.5, 0.5});
  }
  Chart chart(names, dom, std::vector<double>(o.dim, o.step));

  BundleSpec spec(
      chart, o.n,
      [data](const Point& x) {
        const CMatrix tinv = data->frame_change(x).inverse();
        return CMatrix(tinv.adjoint() * data->eta * tinv);
      },
      [data](const Point& x, int mu) {
        const CMatrix t = data->frame_change(x);
        const CMatrix tinv = t.inverse();
        CMatrix w = data->c[mu];
        for (int nu = 0; nu < data->dim; ++nu) w += x[nu] * data->d[mu][nu];
        return CMatrix(t * w * tinv - data->b[mu] * tinv);
      });
  return ProjectorField(
      spec,
      [data](const Point& x) {
        CMatrix gen = data->k0;
        for (int mu = 0; mu < data->dim; ++mu) gen += x[mu] * data->k[mu];
        const CMatrix u = gen.exp();
        const CMatrix uinv = data->eta * u.adjoint() * data->eta;
        const CMatrix t = data->frame_change(x);
        return CMatrix(t * u * data->p0 * uinv * t.inverse());
      },
      o.m);
}

}  // namespace qgeom
