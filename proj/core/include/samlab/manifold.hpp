#pragma once

// The gradient-flow limit map Phi(x) = lim_{tau -> inf} of dX/dtau = -grad L(X),
// geometry of the minimizer manifold at its image, and the two limiting
// Riemannian flows
//   dX/dtau = -1/2 * P_tangent(X) * grad S(X),  S in {lambda_1(hess L), Tr(hess L)}.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "samlab/densela.hpp"
#include "samlab/losses.hpp"

namespace samlab {

/// Gradient flow did not reach the tolerance within budget, i.e. the start
/// point is numerically outside the attraction set.
class NonConvergentError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// lambda_1 is not differentiable because the top eigenvalue is (nearly) repeated.
class EigengapError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

struct PhiOptions {
  /// Stop once |grad L| <= tol.
  double tol = 1e-10;
  /// Attempted RK4 steps, accepted or rejected.
  std::size_t max_steps = 10'000'000;
  double initial_dt = 1e-2;
  double max_dt = 1.0;
  /// Step-doubling error bound per step, scaled by (1 + |x|).
  double local_tol = 1e-12;
  double rank_tol = kDefaultRankTol;
  bool keep_loss_history = false;
};

struct ManifoldPoint {
  Vector p;
  double residual_grad_norm = 0.0;
  bool converged = false;
  EigenDecomposition spectrum;
  /// Numerical rank of hess L(p), the codimension of the manifold.
  std::size_t rank = 0;
  /// Zero-based eigen indices spanning the normal space.
  std::vector<std::size_t> normal_indices;
  /// I - sum over normal indices of v_i v_i^T.
  SymMatrix tangent_projector;
  std::size_t steps = 0;
  /// Loss after each accepted step (only with keep_loss_history).
  std::vector<double> loss_history;

  double lambda(std::size_t i) const { return spectrum.values.at(i); }
};

/// Spectrum, rank and tangent projector of hess L at p, without flowing.
ManifoldPoint analyze_point(const LossModel& loss, const Vector& p, double rank_tol = kDefaultRankTol);

/// Integrates gradient flow with classical RK4 (step doubling, halving on
/// error or loss increase) until |grad L| <= tol. Throws NonConvergentError
/// when the budget runs out.
ManifoldPoint phi(const LossModel& loss, const Vector& x, const PhiOptions& opts = {});

/// |(Phi(x + h d) - Phi(x - h d)) / 2h| for a unit direction d.
double phi_directional_derivative(const LossModel& loss, const Vector& x, const Vector& direction, double h,
                                  const PhiOptions& opts = {});

/// Finite-difference |dPhi(x) g| with g = grad L / |grad L|; zero in exact arithmetic.
double phi_annihilation_residual(const LossModel& loss, const Vector& x, double h, const PhiOptions& opts = {});

/// Relative eigengap threshold: lambda_1 - lambda_2 must exceed this times lambda_1.
inline constexpr double kDefaultGapTol = 1e-6;

/// grad lambda_1(hess L)(p) = d^2(grad L)(p)[v1, v1].
Vector grad_lambda1(const LossModel& loss, const Vector& p, double gap_tol = kDefaultGapTol);

/// Central differences of x -> Tr(hess L(x)) with the third-derivative step.
Vector grad_trace(const LossModel& loss, const Vector& p);

enum class FlowKind { kLambda1, kTrace };

std::string to_string(FlowKind k);
FlowKind parse_flow_kind(const std::string& name);

/// Value of the flow's potential S at p (lambda_1 or trace of hess L).
double flow_potential(const LossModel& loss, const Vector& p, FlowKind kind);

struct FlowSample {
  double tau = 0.0;
  Vector x;
  double potential = 0.0;
  bool reprojected = false;
};

struct FlowSolution {
  FlowKind kind = FlowKind::kLambda1;
  double dt = 0.0;
  std::size_t reproject_every = 0;
  std::vector<FlowSample> samples;
  bool completed = false;
  std::string abort_reason;

  /// Piecewise-linear interpolation; clamps outside the recorded range.
  Vector at(double tau) const;
  double final_tau() const { return samples.empty() ? 0.0 : samples.back().tau; }
};

struct FlowOptions {
  double horizon = 1.0;
  double dt = 1e-3;
  std::size_t reproject_every = 10;
  double gap_tol = kDefaultGapTol;
  PhiOptions phi;
};

/// Explicit Euler on dX/dtau = -1/2 P_tangent(X) grad S(X) from X(0) = Phi(x_init),
/// re-applying Phi every reproject_every steps. Aborts (completed = false)
/// on eigengap loss or a failed reprojection, keeping the samples so far.
FlowSolution riemannian_flow(const LossModel& loss, const Vector& x_init, FlowKind kind, const FlowOptions& opts = {});

}  // namespace samlab
