#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "qgeom/bundle.hpp"
#include "qgeom/models.hpp"

using namespace qgeom;

namespace {

Chart plane() { return Chart({"x1", "x2"}, {{-1.0, 1.0}, {-1.0, 1.0}}, {1e-3, 1e-3}); }

BundleSpec constant_bundle(const CMatrix& omega) {
  const auto n = omega.rows();
  return BundleSpec(
      plane(), static_cast<int>(n), [n](const Point&) { return CMatrix::Identity(n, n); },
      [omega](const Point&, int) { return omega; });
}

Point origin_ish() {
  Point p(2);
  p << 0.2, -0.3;
  return p;
}

}  // namespace

TEST_CASE("compatibility of flat and anti-Hermitian connections") {
  CHECK(check_compatibility(constant_bundle(CMatrix::Zero(3, 3)), origin_ish(), 1e-3) <= 1e-13);
  CMatrix a(2, 2);
  a << cplx(0, 1), cplx(2, -1), cplx(-2, -1), cplx(0, -3);
  CHECK(check_compatibility(constant_bundle(a), origin_ish(), 1e-3) <= 1e-13);
}

TEST_CASE("incompatible Hermitian connection gives twice its max-norm") {
  CMatrix w(2, 2);
  w << 0.5, cplx(0.25, 0.75), cplx(0.25, -0.75), -1.5;
  // residual = max |w^dagger + w| = 2 max|w| for Hermitian w
  CHECK(check_compatibility(constant_bundle(w), origin_ish(), 1e-3) ==
        doctest::Approx(2.0 * max_abs(w)).epsilon(1e-12));
}

TEST_CASE("curvature of a flat connection vanishes") {
  auto s = curvature(constant_bundle(CMatrix::Zero(2, 2)), origin_ish(), 0, 1, 1e-3);
  CHECK(max_abs(s.omega_matrix) == 0.0);
}

TEST_CASE("Abelian curl") {
  // omega = i A with A = (-x2, 0): Omega_12 = i (d1 A2 - d2 A1) = i
  BundleSpec spec(
      plane(), 1, [](const Point&) { return CMatrix::Identity(1, 1); },
      [](const Point& x, int mu) {
        CMatrix m(1, 1);
        m(0, 0) = mu == 0 ? cplx(0, -x[1]) : cplx(0, 0);
        return m;
      });
  auto s = curvature(spec, origin_ish(), 0, 1, 1e-3);
  CHECK(std::abs(s.omega_matrix(0, 0) - kI) <= 1e-8);
}

TEST_CASE("curvature antisymmetry and h-skewness on random compatible bundles") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    RandomModelOptions o;
    o.n = 3;
    o.dim = 3;
    o.negative = static_cast<int>(seed % 2);
    const ProjectorField pf = random_projector_model(seed, o);
    const BundleSpec& spec = pf.bundle();
    Point x(3);
    x << 0.1, -0.2, 0.05;
    CHECK(check_compatibility(spec, x, 1e-2) <= 1e-8);
    const PairTensor all = curvature_all(spec, x, 1e-2);
    for (int mu = 0; mu < 3; ++mu)
      for (int nu = 0; nu < 3; ++nu) {
        CHECK(max_abs(all(mu, nu) + all(nu, mu)) <= 1e-12);
        auto slice = curvature(spec, x, mu, nu, 1e-2);
        CHECK(max_abs(slice.omega_matrix - all(mu, nu)) <= 1e-12);
        auto rev = curvature(spec, x, nu, mu, 1e-2);
        CHECK(max_abs(slice.omega_matrix + rev.omega_matrix) <= 1e-12);
      }
    // skewness is an FD identity: it must shrink at the scheme order
    auto skew = [&](double h) {
      return curvature_skew_residual(spec, curvature(spec, x, 0, 1, h));
    };
    const double r1 = skew(4e-2), r2 = skew(2e-2);
    CHECK(r2 <= 1e-6);
    CHECK(std::log2(r1 / r2) == doctest::Approx(4.0).epsilon(0.2));
  }
}

TEST_CASE("compatibility residual converges at the scheme order") {
  RandomModelOptions o;
  o.negative = 1;
  const ProjectorField pf = random_projector_model(7, o);
  Point x(2);
  x << 0.1, 0.2;
  const double r1 = check_compatibility(pf.bundle(), x, 8e-2);
  const double r2 = check_compatibility(pf.bundle(), x, 4e-2);
  CHECK(std::log2(r1 / r2) == doctest::Approx(4.0).epsilon(0.2));
}

TEST_CASE("covariant derivative") {
  const BundleSpec flat = constant_bundle(CMatrix::Zero(3, 3));
  SUBCASE("constant section") {
    const FieldFn s = [](const Point&) { return CMatrix::Ones(3, 1); };
    CHECK(max_abs(covariant_derivative(flat, s, origin_ish(), 0, 1e-3)) <= 1e-13);
  }
  SUBCASE("bare partial") {
    const FieldFn s = [](const Point& x) {
      CMatrix v = CMatrix::Zero(3, 1);
      v(0, 0) = x[0];
      return v;
    };
    CVector e1 = CVector::Zero(3);
    e1[0] = 1.0;
    CHECK(max_abs(covariant_derivative(flat, s, origin_ish(), 0, 1e-3) - e1) <= 1e-10);
  }
  SUBCASE("Leibniz rule") {
    const ProjectorField pf = random_projector_model(3);
    const BundleSpec& spec = pf.bundle();
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    CMatrix s0(3, 1);
    for (int i = 0; i < 3; ++i) s0(i, 0) = cplx(g(rng), g(rng));
    const FieldFn s = [s0](const Point& x) { return CMatrix(s0 * (1.0 + x[1] * x[1])); };
    const FieldFn fs = [s0](const Point& x) {
      return CMatrix(std::sin(x[0]) * s0 * (1.0 + x[1] * x[1]));
    };
    Point x = origin_ish();
    for (int mu = 0; mu < 2; ++mu) {
      const double df = mu == 0 ? std::cos(x[0]) : 0.0;
      CVector lhs = covariant_derivative(spec, fs, x, mu, 1e-3);
      CVector rhs = std::sin(x[0]) * covariant_derivative(spec, s, x, mu, 1e-3) +
                    df * CVector(s(x).col(0));
      CHECK(max_abs(lhs - rhs) <= 1e-9);
    }
  }
}

TEST_CASE("singular fiber metric is rejected") {
  BundleSpec spec(
      plane(), 2, [](const Point&) { return CMatrix::Zero(2, 2); },
      [](const Point&, int) { return CMatrix::Zero(2, 2); });
  try {
    (void)check_compatibility(spec, origin_ish(), 1e-3);
    FAIL("expected SingularMetric");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingularMetric);
  }
}
