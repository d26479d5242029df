#include "qgeom/chart.hpp"

#include <cmath>
#include <sstream>

namespace qgeom {

Chart::Chart(std::vector<std::string> coord_names, std::vector<Interval> domain,
             std::vector<double> default_step)
    : names_(std::move(coord_names)), domain_(std::move(domain)), step_(std::move(default_step)) {
  if (names_.empty()) throw Error(ErrorKind::InvalidArgument, "chart dimension must be >= 1");
  if (domain_.size() != names_.size() || step_.size() != names_.size())
    throw Error(ErrorKind::InvalidArgument, "chart axis data have inconsistent lengths");
  for (size_t i = 0; i < names_.size(); ++i) {
    if (!(domain_[i].lower < domain_[i].upper))
      throw Error(ErrorKind::DegenerateDomain, "axis " + names_[i] + " has an empty interval");
    if (!(step_[i] > 0.0) || !(step_[i] < domain_[i].width() / 4.0))
      throw Error(ErrorKind::InvalidArgument,
                  "default step on axis " + names_[i] + " must lie in (0, width/4)");
  }
}

bool Chart::contains(const Point& p) const {
  if (p.size() != dim()) return false;
  for (int i = 0; i < dim(); ++i)
    if (!domain_[i].contains(p[i])) return false;
  return !region_ || region_(p);
}

Chart Chart::restricted(std::function<bool(const Point&)> region, std::string description) const {
  Chart c = *this;
  c.region_ = std::move(region);
  c.region_text_ = std::move(description);
  return c;
}

void Chart::require_contains(const Point& p) const {
  if (p.size() != dim())
    throw Error(ErrorKind::InvalidArgument, "point has wrong dimension for chart");
  for (int i = 0; i < dim(); ++i) {
    if (!domain_[i].contains(p[i])) {
      std::ostringstream os;
      os << "coordinate " << names_[i] << " = " << p[i] << " outside [" << domain_[i].lower
         << ", " << domain_[i].upper << "]";
      throw Error(ErrorKind::OutOfDomain, os.str());
    }
  }
  if (region_ && !region_(p)) throw Error(ErrorKind::OutOfDomain, "point outside " + region_text_);
}

int scheme_order(FdScheme s) { return s == FdScheme::central2 ? 2 : 4; }
int scheme_radius(FdScheme s) { return s == FdScheme::central2 ? 1 : 2; }

FdScheme parse_scheme(const std::string& name) {
  if (name == "central2") return FdScheme::central2;
  if (name == "central4") return FdScheme::central4;
  throw Error(ErrorKind::InvalidArgument, "unknown finite-difference scheme '" + name + "'");
}

std::string to_string(FdScheme s) { return s == FdScheme::central2 ? "central2" : "central4"; }

MatrixField::MatrixField(Chart chart, FieldFn eval, Eigen::Index rows, Eigen::Index cols)
    : chart_(std::move(chart)), eval_(std::move(eval)), rows_(rows), cols_(cols) {}

CMatrix MatrixField::operator()(const Point& p) const {
  chart_.require_contains(p);
  CMatrix m = eval_(p);
  if (m.rows() != rows_ || m.cols() != cols_)
    throw Error(ErrorKind::InvalidArgument, "field returned a matrix of unexpected shape");
  if (!m.allFinite()) throw Error(ErrorKind::NonFinite, "field is not finite at point");
  return m;
}

namespace {

CMatrix eval_node(const Chart& chart, const FieldFn& f, const Point& p) {
  chart.require_contains(p);
  CMatrix m = f(p);
  if (!m.allFinite()) throw Error(ErrorKind::NonFinite, "field is not finite at a stencil node");
  return m;
}

}  // namespace

CMatrix fd_partial(const Chart& chart, const FieldFn& f, const Point& point, int mu, double step,
                   FdScheme scheme) {
  if (!(step > 0.0)) throw Error(ErrorKind::InvalidArgument, "finite-difference step must be > 0");
  if (mu < 0 || mu >= chart.dim()) throw Error(ErrorKind::InvalidArgument, "axis out of range");
  auto node = [&](int k) {
    Point q = point;
    q[mu] += k * step;
    return eval_node(chart, f, q);
  };
  if (scheme == FdScheme::central2) {
    return (node(1) - node(-1)) / (2.0 * step);
  }
  return (8.0 * (node(1) - node(-1)) - (node(2) - node(-2))) / (12.0 * step);
}

CMatrix fd_partial(const MatrixField& field, const Point& point, int mu, double step,
                   FdScheme scheme) {
  return fd_partial(field.chart(), [&](const Point& p) { return field(p); }, point, mu, step,
                    scheme);
}

std::vector<Point> grid_points(const Chart& chart, const std::vector<int>& counts, double margin) {
  const int n = chart.dim();
  if (static_cast<int>(counts.size()) != n)
    throw Error(ErrorKind::InvalidArgument, "grid counts must match the chart dimension");
  if (margin < 0.0) throw Error(ErrorKind::InvalidArgument, "grid margin must be >= 0");
  std::vector<Interval> box(n);
  for (int i = 0; i < n; ++i) {
    if (counts[i] < 1) throw Error(ErrorKind::InvalidArgument, "grid counts must be >= 1");
    box[i] = {chart.domain()[i].lower + margin, chart.domain()[i].upper - margin};
    if (!(box[i].lower < box[i].upper))
      throw Error(ErrorKind::DegenerateDomain, "margin leaves no room on axis " +
                                                   chart.coord_names()[i]);
  }
  auto coord = [&](int axis, int k) {
    if (counts[axis] == 1) return 0.5 * (box[axis].lower + box[axis].upper);
    return box[axis].lower + box[axis].width() * k / (counts[axis] - 1);
  };
  size_t total = 1;
  for (int c : counts) total *= static_cast<size_t>(c);
  std::vector<Point> out;
  out.reserve(total);
  std::vector<int> idx(n, 0);
  for (size_t flat = 0; flat < total; ++flat) {
    Point p(n);
    for (int i = 0; i < n; ++i) p[i] = coord(i, idx[i]);
    out.push_back(std::move(p));
    // last axis varies fastest
    for (int i = n - 1; i >= 0; --i) {
      if (++idx[i] < counts[i]) break;
      idx[i] = 0;
    }
  }
  return out;
}

}  // namespace qgeom
