#pragma once

#include <functional>
#include <string>
#include <vector>

#include "qgeom/types.hpp"

namespace qgeom {

struct Interval {
  double lower = 0.0;
  double upper = 0.0;

  double width() const { return upper - lower; }
  bool contains(double v) const { return v >= lower && v <= upper; }
};

/// A single coordinate chart with a box-shaped domain.
class Chart {
 public:
  Chart(std::vector<std::string> coord_names, std::vector<Interval> domain,
        std::vector<double> default_step);

  int dim() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& coord_names() const { return names_; }
  const std::vector<Interval>& domain() const { return domain_; }
  const std::vector<double>& default_step() const { return step_; }

  bool contains(const Point& p) const;

  /// Further restricts the box to points where `region` holds.
  Chart restricted(std::function<bool(const Point&)> region, std::string description) const;

  /// Throws OutOfDomain unless `p` lies inside the domain.
  void require_contains(const Point& p) const;

 private:
  std::vector<std::string> names_;
  std::vector<Interval> domain_;
  std::vector<double> step_;
  std::function<bool(const Point&)> region_;
  std::string region_text_;
};

enum class FdScheme { central2, central4 };

int scheme_order(FdScheme s);
/// Number of steps the stencil reaches on each side.
int scheme_radius(FdScheme s);
FdScheme parse_scheme(const std::string& name);
std::string to_string(FdScheme s);

using FieldFn = std::function<CMatrix(const Point&)>;

/// A matrix-valued field on a chart, given as a pure evaluation map.
class MatrixField {
 public:
  MatrixField(Chart chart, FieldFn eval, Eigen::Index rows, Eigen::Index cols);

  const Chart& chart() const { return chart_; }
  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }

  /// Evaluates with domain and finiteness checks.
  CMatrix operator()(const Point& p) const;

 private:
  Chart chart_;
  FieldFn eval_;
  Eigen::Index rows_;
  Eigen::Index cols_;
};

/// Finite-difference partial derivative along axis `mu` of an arbitrary map,
/// checking every stencil node against `chart`.
CMatrix fd_partial(const Chart& chart, const FieldFn& f, const Point& point, int mu,
                   double step, FdScheme scheme);

CMatrix fd_partial(const MatrixField& field, const Point& point, int mu, double step,
                   FdScheme scheme);

/// Row-major lattice over the domain shrunk by `margin` on every side. A count of
/// one places the single point at the midpoint.
std::vector<Point> grid_points(const Chart& chart, const std::vector<int>& counts,
                               double margin);

}  // namespace qgeom
