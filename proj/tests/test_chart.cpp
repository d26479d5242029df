#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "qgeom/chart.hpp"

using namespace qgeom;

namespace {

Chart line(double lo = 0.0, double hi = 1.0, double step = 1e-3) {
  return Chart({"x"}, {{lo, hi}}, {step});
}

Point pt(std::initializer_list<double> v) {
  Point p(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) p[i++] = d;
  return p;
}

}  // namespace

TEST_CASE("chart validation") {
  CHECK_THROWS_AS(Chart({"x"}, {{1.0, 1.0}}, {0.1}), Error);
  CHECK_THROWS_AS(Chart({"x"}, {{0.0, 1.0}}, {0.3}), Error);
  CHECK_THROWS_AS(Chart({"x"}, {{0.0, 1.0}}, {0.0}), Error);
  CHECK_NOTHROW(Chart({"x"}, {{0.0, 1.0}}, {0.2}));
}

TEST_CASE("derivative of a constant field vanishes") {
  CMatrix c(2, 2);
  c << cplx(1, 2), 3, cplx(0, -1), 4;
  MatrixField f(line(), [c](const Point&) { return c; }, 2, 2);
  for (FdScheme s : {FdScheme::central2, FdScheme::central4})
    CHECK(max_abs(fd_partial(f, pt({0.4}), 0, 1e-3, s)) <= 1e-13);
}

TEST_CASE("linear field is differentiated exactly") {
  MatrixField f(line(), [](const Point& x) { return CMatrix(x[0] * CMatrix::Identity(3, 3)); }, 3,
                3);
  CMatrix d = fd_partial(f, pt({0.3}), 0, 1e-3, FdScheme::central2);
  CHECK(max_abs(d - CMatrix::Identity(3, 3)) <= 1e-10);
}

TEST_CASE("polynomial exactness of each scheme") {
  Chart c = line(-2.0, 2.0, 0.1);
  auto poly = [](int degree) {
    return FieldFn([degree](const Point& x) {
      CMatrix m(1, 1);
      m(0, 0) = std::pow(x[0], degree) + 0.5 * x[0];
      return m;
    });
  };
  auto exact = [](int degree, double x) { return degree * std::pow(x, degree - 1) + 0.5; };
  const Point p = pt({0.7});
  for (int deg = 1; deg <= 2; ++deg) {
    const double d = fd_partial(c, poly(deg), p, 0, 0.1, FdScheme::central2)(0, 0).real();
    CHECK(std::abs(d - exact(deg, 0.7)) <= 1e-10 * std::abs(exact(deg, 0.7)));
  }
  for (int deg = 1; deg <= 4; ++deg) {
    const double d = fd_partial(c, poly(deg), p, 0, 0.1, FdScheme::central4)(0, 0).real();
    CHECK(std::abs(d - exact(deg, 0.7)) <= 1e-10 * std::abs(exact(deg, 0.7)));
  }
}

TEST_CASE("measured convergence order matches the scheme") {
  MatrixField f(line(0.0, 1.0, 0.01),
                [](const Point& x) { return CMatrix(std::sin(x[0]) * CMatrix::Identity(2, 2)); }, 2,
                2);
  const Point p = pt({0.5});
  auto err = [&](double h, FdScheme s) {
    return max_abs(fd_partial(f, p, 0, h, s) - std::cos(0.5) * CMatrix::Identity(2, 2));
  };
  const double ratio2 = err(1e-2, FdScheme::central2) / err(5e-3, FdScheme::central2);
  CHECK(ratio2 == doctest::Approx(4.0).epsilon(0.2));
  const double order4 = std::log2(err(4e-2, FdScheme::central4) / err(2e-2, FdScheme::central4));
  CHECK(order4 == doctest::Approx(4.0).epsilon(0.2));
}

TEST_CASE("stencil leaving the domain is reported") {
  MatrixField f(line(), [](const Point&) { return CMatrix::Identity(1, 1); }, 1, 1);
  try {
    (void)fd_partial(f, pt({0.0005}), 0, 1e-3, FdScheme::central2);
    FAIL("expected OutOfDomain");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::OutOfDomain);
  }
}

TEST_CASE("non-finite stencil values are reported") {
  MatrixField f(line(), [](const Point& x) {
    CMatrix m(1, 1);
    m(0, 0) = x[0] > 0.5 ? std::nan("") : 1.0;
    return m;
  }, 1, 1);
  try {
    (void)fd_partial(f, pt({0.5}), 0, 1e-3, FdScheme::central4);
    FAIL("expected NonFinite");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NonFinite);
  }
}

TEST_CASE("grid points") {
  SUBCASE("uniform 1-D lattice") {
    auto g = grid_points(Chart({"x"}, {{0.0, 1.0}}, {0.1}), {3}, 0.0);
    REQUIRE(g.size() == 3);
    CHECK(g[0][0] == 0.0);
    CHECK(g[1][0] == 0.5);
    CHECK(g[2][0] == 1.0);
  }
  SUBCASE("row-major with margin") {
    Chart c({"x", "y"}, {{0.0, 1.0}, {0.0, 1.0}}, {0.1, 0.1});
    auto g = grid_points(c, {2, 2}, 0.25);
    REQUIRE(g.size() == 4);
    CHECK(g[0] == pt({0.25, 0.25}));
    CHECK(g[1] == pt({0.25, 0.75}));
    CHECK(g[2] == pt({0.75, 0.25}));
    CHECK(g[3] == pt({0.75, 0.75}));
  }
  SUBCASE("single point is the midpoint") {
    auto g = grid_points(Chart({"x"}, {{0.0, 1.0}}, {0.1}), {1}, 0.0);
    REQUIRE(g.size() == 1);
    CHECK(g[0][0] == 0.5);
  }
  SUBCASE("degenerate margin") {
    try {
      (void)grid_points(Chart({"x"}, {{0.0, 1.0}}, {0.1}), {3}, 0.5);
      FAIL("expected DegenerateDomain");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::DegenerateDomain);
    }
  }
  SUBCASE("deterministic") {
    Chart c({"x", "y", "z"}, {{0, 1}, {-1, 1}, {2, 3}}, {0.1, 0.1, 0.1});
    CHECK(grid_points(c, {3, 2, 4}, 0.1) == grid_points(c, {3, 2, 4}, 0.1));
  }
}
