#pragma once

// Sharpness functionals at radius rho:
//   worst    R^Max(x) = max_{|v| <= 1} L(x + rho v) - L(x)
//   ascent   R^Asc(x) = L(x + rho grad L / |grad L|) - L(x)   (undefined at grad L = 0)
//   average  R^Avg(x) = E_{g ~ N(0, I)} L(x + rho g / |g|) - L(x)
// and their rho -> 0 limits on the minimizer manifold.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "samlab/losses.hpp"
#include "samlab/manifold.hpp"

namespace samlab {

struct WorstSharpnessOptions {
  std::size_t n_random = 8;
  std::size_t iterations = 200;
  double initial_step = 0.1;
  std::uint64_t seed = 0;
  /// Additional starting directions (normalized before use), e.g. a warm start.
  std::vector<Vector> extra_inits;
};

struct WorstSharpness {
  /// Best value found; a lower bound on the true maximum.
  double value = 0.0;
  Vector direction;
  std::size_t evaluations = 0;
};

/// Multistart Riemannian ascent on the unit sphere from +-v1(hess L),
/// +-grad L / |grad L| (when defined) and n_random Gaussian directions.
WorstSharpness worst_sharpness(const LossModel& loss, const Vector& x, double rho,
                               const WorstSharpnessOptions& opts = {});

/// nullopt encodes the undefined (+infinity) value at a zero gradient.
std::optional<double> ascent_sharpness(const LossModel& loss, const Vector& x, double rho);

struct AverageSharpness {
  double mean = 0.0;
  /// Sample standard deviation over sqrt(n); infinite for n == 1.
  double standard_error = 0.0;
  std::size_t samples = 0;
  std::uint64_t seed = 0;
};

inline constexpr std::size_t kDefaultAvgSamples = 100'000;
/// Samples per shard; shard s draws from CounterRng(derive_seed(seed, s)).
inline constexpr std::size_t kAvgShardSize = 4096;

/// Monte-Carlo estimate over uniformly random unit directions. Sharding is
/// fixed by kAvgShardSize and shards are reduced in index order, so the result
/// does not depend on `threads`.
AverageSharpness avg_sharpness(const LossModel& loss, const Vector& x, double rho,
                               std::size_t n_samples = kDefaultAvgSamples, std::uint64_t seed = 0,
                               unsigned threads = 1);

struct SharpnessReport {
  double rho = 0.0;
  WorstSharpness worst;
  std::optional<double> ascent;
  AverageSharpness average;
};

SharpnessReport sharpness_report(const LossModel& loss, const Vector& x, double rho,
                                 const WorstSharpnessOptions& worst_opts = {},
                                 std::size_t avg_samples = kDefaultAvgSamples);

struct LimitingRegularizers {
  double s_max = 0.0;  // lambda_1 / 2
  double s_asc = 0.0;  // lambda_M / 2
  double s_avg = 0.0;  // Tr / (2 D)
  /// mean_k lambda_1(hess L_k) / 2, for losses with components.
  std::optional<double> s_stochastic;
  /// Tr(hess L) / 2.
  double half_trace = 0.0;
  std::size_t rank = 0;
  double grad_norm = 0.0;
  /// Non-empty when p looks off the manifold.
  std::string warning;
};

enum class SharpnessType { kMax, kAsc, kAvg };

std::string to_string(SharpnessType t);
SharpnessType parse_sharpness_type(const std::string& name);
double select(const LimitingRegularizers& s, SharpnessType t);

/// Closed-form limiting regularizers at a (near-)manifold point. Throws
/// std::domain_error when the Hessian has numerical rank 0.
LimitingRegularizers limiting_regularizers(const LossModel& loss, const Vector& p, double rank_tol = kDefaultRankTol);

/// Angle in [0, pi/2] between grad L(x) and the top eigenvector of hess L(Phi(x)).
double alignment_angle(const LossModel& loss, const Vector& x, const PhiOptions& opts = {});
/// Same with a precomputed Phi(x).
double alignment_angle(const LossModel& loss, const Vector& x, const ManifoldPoint& phi_x);

/// R_j(x) = sqrt(sum_{i >= j, i < M} lambda_i^2 <v_i, x - Phi(x)>^2) - eta rho lambda_j^2
/// using the spectrum at Phi(x); j is a zero-based eigen index below the rank M.
double phase_residual(const LossModel& loss, const Vector& x, double eta, double rho, std::size_t j,
                      const PhiOptions& opts = {});
/// All R_j, j = 0..M-1, sharing one Phi evaluation.
std::vector<double> phase_residuals(const Vector& x, const ManifoldPoint& phi_x, double eta, double rho);

}  // namespace samlab
