#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace qgeom {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using Point = Eigen::VectorXd;

inline constexpr cplx kI{0.0, 1.0};

enum class ErrorKind {
  OutOfDomain,
  NonFinite,
  DegenerateDomain,
  SingularMetric,
  RankMismatch,
  NullVector,
  FrameDiscontinuity,
  TorsionfulConnection,
  OffShell,
  FrameNotInKernel,
  OffPlane,
  DomainError,
  LeftDomain,
  StepRejected,
  KernelCollapse,
  InvalidArgument,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Largest absolute entry; 0 for empty matrices.
template <typename Derived>
double max_abs(const Eigen::MatrixBase<Derived>& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// Square grid of matrices indexed by a pair of chart axes (mu, nu).
class PairTensor {
 public:
  PairTensor() = default;
  PairTensor(int dim, Eigen::Index rows, Eigen::Index cols)
      : dim_(dim), data_(static_cast<size_t>(dim) * dim, CMatrix::Zero(rows, cols)) {}

  int dim() const { return dim_; }
  CMatrix& operator()(int mu, int nu) { return data_[static_cast<size_t>(mu * dim_ + nu)]; }
  const CMatrix& operator()(int mu, int nu) const {
    return data_[static_cast<size_t>(mu * dim_ + nu)];
  }

  double max_abs() const {
    double r = 0.0;
    for (const auto& m : data_) r = std::max(r, qgeom::max_abs(m));
    return r;
  }

 private:
  int dim_ = 0;
  std::vector<CMatrix> data_;
};

/// Entrywise max-norm of a - b over all (mu, nu).
double max_diff(const PairTensor& a, const PairTensor& b);

/// One-form valued matrices: element mu is the coefficient of dx^mu.
using OneForm = std::vector<CMatrix>;

double max_diff(const OneForm& a, const OneForm& b);

}  // namespace qgeom
