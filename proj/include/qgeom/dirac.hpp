#pragma once

#include <array>
#include <optional>
#include <string>

#include "qgeom/subgeometry.hpp"

namespace qgeom {

using Gammas = std::array<CMatrix, 4>;

/// Flat gamma matrices gamma^a in the Dirac representation,
/// gamma^a gamma^b + gamma^b gamma^a = -2 eta^{ab}, eta = diag(-1, 1, 1, 1).
const Gammas& flat_gammas();
/// Dirac pairing matrix beta = gamma^0, h(Phi, Psi) = Phi^dagger beta Psi.
const CMatrix& dirac_beta();
const RMatrix& minkowski_eta();

using RealFieldFn = std::function<RMatrix(const Point&)>;
/// Element lambda is d_lambda of a 4 x 4 field.
using RealDerivativeFn = std::function<std::vector<RMatrix>(const Point&)>;
using PotentialFn = std::function<Eigen::Vector4d(const Point&)>;

/// Spatial block lambda(x, y)^2 (dx^2 + dy^2) of a static spacetime.
struct ConformalBlock {
  double a = 1.0;
  std::function<double(const Point&)> lambda;
  std::function<Eigen::Vector2d(const Point&)> grad_log_lambda;  // (d_x ln lambda, d_y ln lambda)
};

/// Potential A = -E x dt + (B/2)(-y dx + x dy).
struct FieldConfig {
  double E = 0.0;
  double B = 0.0;
};

PotentialFn field_potential(const FieldConfig& em);

struct SpacetimeModel {
  std::string name;
  Chart chart;             // (t, x, y, z)
  RealFieldFn metric;      // g_{mu nu}
  RealFieldFn tetrad;      // row a holds e_a^mu
  PotentialFn potential;   // A_mu
  double q = 0.0;
  double m = 1.0;
  RealDerivativeFn metric_derivative;  // optional analytic override
  RealDerivativeFn tetrad_derivative;  // optional analytic override
  bool force_fd = false;               // ignore the overrides
  std::optional<ConformalBlock> conformal;
  double step = 5e-4;  // spacetime finite-difference step
  FdScheme scheme = FdScheme::central4;
};

SpacetimeModel minkowski_model(double m = 1.0, double q = 0.0, FieldConfig em = {});

enum class HyperbolicChart { half_plane, disk };

/// g = -dt^2 + lambda^2 (dx^2 + dy^2) + dz^2 with lambda = a/x or 2a/(1 - x^2 - y^2).
SpacetimeModel hyperbolic_model(double a, HyperbolicChart variant, double m = 1.0,
                                double q = 0.0, FieldConfig em = {});

RMatrix inverse_metric(const SpacetimeModel& model, const Point& x);
std::vector<RMatrix> metric_derivatives(const SpacetimeModel& model, const Point& x);
std::vector<RMatrix> tetrad_derivatives(const SpacetimeModel& model, const Point& x);

/// Levi-Civita coefficients; element rho is Gamma^rho_{mu nu}.
BaseConnection christoffels(const SpacetimeModel& model, const Point& x);

/// R^rho_{sigma mu nu} = d_mu Gamma^rho_{nu sigma} - d_nu Gamma^rho_{mu sigma}
///                       + Gamma^rho_{mu l} Gamma^l_{nu sigma} - Gamma^rho_{nu l} Gamma^l_{mu sigma}
class Riemann {
 public:
  Riemann() : data_(256, 0.0), lowered_(256, 0.0) {}
  double& up(int r, int s, int m, int n) { return data_[idx(r, s, m, n)]; }
  double up(int r, int s, int m, int n) const { return data_[idx(r, s, m, n)]; }
  /// R_{alpha beta mu nu} = g_{alpha rho} R^rho_{beta mu nu}
  double& low(int a, int b, int m, int n) { return lowered_[idx(a, b, m, n)]; }
  double low(int a, int b, int m, int n) const { return lowered_[idx(a, b, m, n)]; }

 private:
  static size_t idx(int a, int b, int c, int d) {
    return static_cast<size_t>(((a * 4 + b) * 4 + c) * 4 + d);
  }
  std::vector<double> data_;
  std::vector<double> lowered_;
};

Riemann riemann(const SpacetimeModel& model, const Point& x);
double scalar_curvature(const SpacetimeModel& model, const Point& x);

struct SpinConnection {
  std::vector<RMatrix> omega;   // omega^{ab}_mu, antisymmetrized, one 4 x 4 per mu
  std::vector<CMatrix> spinor;  // -1/4 omega^{ab}_mu gamma_a gamma_b
  double antisymmetry = 0.0;    // max |omega^{ab} + omega^{ba}| before antisymmetrizing
};

SpinConnection spin_connection(const SpacetimeModel& model, const Point& x);

/// gamma^mu = e_a^mu gamma^a
Gammas curved_gammas(const SpacetimeModel& model, const Point& x);

/// sigma^{mu nu} = (i/2)[gamma^mu, gamma^nu], element mu * 4 + nu.
std::vector<CMatrix> sigma_matrices(const Gammas& g);

/// Spinor bundle over the spacetime chart: h = beta, omega_mu = spinor connection.
BundleSpec spinor_bundle(const SpacetimeModel& model);

/// -1/4 R_{alpha beta mu nu} gamma^alpha gamma^beta
CMatrix riemann_spinor_curvature(const SpacetimeModel& model, const Point& x, int mu, int nu);

struct PhasePoint {
  Point x;             // (t, x, y, z)
  Eigen::Vector3d p;   // p_1, p_2, p_3
  double p0 = 0.0;     // derived from the mass shell

  Eigen::Vector4d lower() const { return {p0, p[0], p[1], p[2]}; }
};

/// Future-directed solution of g^{mu nu} p_mu p_nu = -m^2 for p_0.
PhasePoint on_shell(const SpacetimeModel& model, const Point& x, const Eigen::Vector3d& p);
/// Phase point from a 7-component chart point (t, x, y, z, p_1, p_2, p_3).
PhasePoint phase_point(const SpacetimeModel& model, const Point& chart_point);
Point chart_point(const PhasePoint& pp);

double shell_residual(const SpacetimeModel& model, const PhasePoint& pp);
Eigen::Vector4d raise(const SpacetimeModel& model, const Point& x, const Eigen::Vector4d& p);

struct DiracProjectors {
  CMatrix P;
  CMatrix P_prime;
  CMatrix D;  // -(m + p_mu gamma^mu) = 0 P - 2m P'
};

DiracProjectors dirac_projectors(const SpacetimeModel& model, const PhasePoint& pp);

/// 7-D chart (t, x, y, z, p_1, p_2, p_3) on the mass shell.
Chart phase_chart(const SpacetimeModel& model, double p_extent = 4.0, double step = 0.02);

/// Pi_alpha(e_k) for alpha = 0..3 and the 7 chart directions e_k.
RMatrix pi_form(const SpacetimeModel& model, const PhasePoint& pp);

/// max over chart directions of |p^alpha Pi_alpha|
double pi_constraint_residual(const SpacetimeModel& model, const PhasePoint& pp,
                              const RMatrix& pi);

/// Positive-energy kernel basis: P e_1, P e_2 orthonormalized with beta.
CMatrix kernel_frame(const SpacetimeModel& model, const PhasePoint& pp);
/// Complementary basis: (I - P) e_3, (I - P) e_4 orthonormalized with beta.
CMatrix kernel_perp_frame(const SpacetimeModel& model, const PhasePoint& pp);

struct AnalyticQgt {
  PairTensor Q;
  PairTensor G;
  PairTensor F;
  PairTensor omega_par;  // spinor curvature projected to the frame
};

/// Closed-form tensors on the phase chart relative to the frame `s` (4 x 2).
AnalyticQgt analytic_qgt(const SpacetimeModel& model, const PhasePoint& pp, const CMatrix& s);

/// Spinor bundle pulled back to the phase chart (dp components of the connection
/// vanish) with the projector P(x, p).
ProjectorField dirac_projector_field(const SpacetimeModel& model, const Chart& chart);
FrameField dirac_frame_field(const SpacetimeModel& model, const ProjectorField& pf);

struct AnalyticResiduals {
  double Q = 0.0;
  double G = 0.0;
  double F = 0.0;
  double max() const { return std::max({Q, G, F}); }
};

struct NumericComparison {
  AnalyticResiduals at_step;
  AnalyticResiduals at_half_step;
  double order = 0.0;
};

AnalyticResiduals compare_with_analytic(const SpacetimeModel& model, const PhasePoint& pp,
                                        double step, FdScheme scheme = FdScheme::central4);

NumericComparison numeric_vs_analytic(const SpacetimeModel& model, const PhasePoint& pp,
                                      double step, FdScheme scheme = FdScheme::central4);

/// Coefficients C_{kl} on the phase chart with G_AB = h_AB C_{kl}, from the
/// closed form for a conformally flat spatial plane with p_3 = 0.
RMatrix hyperbolic_quantum_metric(const SpacetimeModel& model, const PhasePoint& pp);

}  // namespace qgeom
