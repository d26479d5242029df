#include "qgeom/types.hpp"

namespace qgeom {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::OutOfDomain: return "OutOfDomain";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::DegenerateDomain: return "DegenerateDomain";
    case ErrorKind::SingularMetric: return "SingularMetric";
    case ErrorKind::RankMismatch: return "RankMismatch";
    case ErrorKind::NullVector: return "NullVector";
    case ErrorKind::FrameDiscontinuity: return "FrameDiscontinuity";
    case ErrorKind::TorsionfulConnection: return "TorsionfulConnection";
    case ErrorKind::OffShell: return "OffShell";
    case ErrorKind::FrameNotInKernel: return "FrameNotInKernel";
    case ErrorKind::OffPlane: return "OffPlane";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::LeftDomain: return "LeftDomain";
    case ErrorKind::StepRejected: return "StepRejected";
    case ErrorKind::KernelCollapse: return "KernelCollapse";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

double max_diff(const PairTensor& a, const PairTensor& b) {
  if (a.dim() != b.dim()) throw Error(ErrorKind::InvalidArgument, "tensor dimension mismatch");
  double r = 0.0;
  for (int mu = 0; mu < a.dim(); ++mu)
    for (int nu = 0; nu < a.dim(); ++nu) r = std::max(r, max_abs(a(mu, nu) - b(mu, nu)));
  return r;
}

double max_diff(const OneForm& a, const OneForm& b) {
  if (a.size() != b.size()) throw Error(ErrorKind::InvalidArgument, "one-form size mismatch");
  double r = 0.0;
  for (size_t i = 0; i < a.size(); ++i) r = std::max(r, max_abs(a[i] - b[i]));
  return r;
}

}  // namespace qgeom
