#pragma once

// Direct minimization of the sharpness-regularized loss L + R^type_rho over a
// box, and the grid oracle for the limiting regularizer on the manifold patch.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "samlab/losses.hpp"
#include "samlab/manifold.hpp"
#include "samlab/sharpness.hpp"

namespace samlab {

struct Box {
  Vector lo;
  Vector hi;

  std::size_t dim() const { return lo.size(); }
  bool contains(const Vector& x) const;
  Vector center() const;
  /// Throws std::invalid_argument unless lo < hi componentwise and both are finite.
  void validate(std::size_t dim) const;
};

/// Objective and gradient; returns +inf where the objective is undefined.
using ValueGradFn = std::function<double(const Vector& x, Vector& grad)>;

struct BfgsOptions {
  std::size_t max_iterations = 3000;
  std::size_t max_line_search = 60;
  double armijo = 1e-4;
  double wolfe = 0.9;
  double grad_tol = 1e-14;
};

struct BfgsResult {
  Vector x;
  double value = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  /// "gradient", "line_search", "iterations" or "not_descent".
  std::string stop_reason;
};

/// BFGS with a bisection weak-Wolfe line search, which keeps making progress
/// on objectives with kinks (the inverse Hessian estimate blows up across them).
BfgsResult nonsmooth_bfgs(const ValueGradFn& fg, Vector x0, const BfgsOptions& opts = {});

struct RegularizedObjective {
  SharpnessType type = SharpnessType::kMax;
  double rho = 0.01;
  /// Average the per-component sharpness instead of taking the sharpness of L.
  bool stochastic = false;
};

/// Value and gradient of L + R^type_rho. The worst-direction term uses Danskin's
/// gradient with a warm-started ascent; the average-direction term uses the
/// +-e_i cross-polytope, which matches the uniform sphere average for
/// polynomials of degree <= 3 in the perturbation.
ValueGradFn regularized_objective(LossPtr loss, const RegularizedObjective& obj);

struct ExplicitBiasOptions {
  std::size_t n_starts = 16;
  std::uint64_t seed = 0;
  BfgsOptions bfgs;
  PhiOptions phi;
};

struct ExplicitBiasStart {
  Vector x0;
  std::optional<BfgsResult> result;
  /// Why the start was skipped or rejected; empty on success.
  std::string note;
};

struct ExplicitBiasResult {
  std::vector<ExplicitBiasStart> starts;
  /// Best accepted local minimizer and its image under Phi.
  Vector best_x;
  double best_value = 0.0;
  ManifoldPoint best_phi;
  /// Limiting regularizer of the chosen type at best_phi.p.
  double regularizer = 0.0;
};

/// Multistart minimization from uniform points in the box. Starts where the
/// ascent loss is undefined are skipped; results leaving the box are rejected.
/// Throws std::runtime_error when no start succeeds.
ExplicitBiasResult minimize_regularized(LossPtr loss, const RegularizedObjective& obj, const Box& box,
                                        const ExplicitBiasOptions& opts = {});

/// S^type at a manifold point; the stochastic variant is Tr/2 for every type.
double limiting_value(const LossModel& loss, const Vector& p, const RegularizedObjective& obj);

struct GridMinimum {
  double value = 0.0;
  Vector point;
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
};

/// Minimum of the limiting regularizer over a resolution x resolution grid on
/// two box axes (other coordinates at the box center), each grid point mapped
/// through Phi. Points whose flow fails are skipped.
GridMinimum manifold_grid_min(const LossModel& loss, const RegularizedObjective& obj, const Box& box,
                              std::size_t axis0, std::size_t axis1, std::size_t resolution,
                              const PhiOptions& phi_opts = {});

}  // namespace samlab
