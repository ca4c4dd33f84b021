#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "samlab/losses.hpp"
#include "samlab/rng.hpp"

namespace samlab {

struct OptimizerConfig {
  double eta = 0.02;
  double rho = 0.01;
  /// Unit vector used in place of grad/|grad| when the gradient vanishes.
  /// Empty means e_1.
  Vector fallback_dir;
  std::uint64_t seed = 0;

  /// Checks finiteness, eta > 0, rho >= 0, |fallback_dir| = 1.
  void validate(std::size_t dim) const;
  Vector fallback(std::size_t dim) const;
};

/// |g| <= 1e-14 (1 + |x|) counts as a zero gradient.
bool is_zero_gradient(const Vector& g, const Vector& x);

/// g / |g|, or the configured fallback direction for a zero gradient.
Vector ascent_direction(const Vector& g, const Vector& x, const OptimizerConfig& cfg);

Vector gd_step(const LossModel& loss, const Vector& x, const OptimizerConfig& cfg);

/// x - eta * grad L(x + rho * grad L(x) / |grad L(x)|)
Vector sam_step(const LossModel& loss, const Vector& x, const OptimizerConfig& cfg);

struct OneSamResult {
  Vector x;
  std::size_t component = 0;
};

/// Samples k uniformly from the components and takes a SAM step on L_k.
OneSamResult one_sam_step(const LossModel& loss, const Vector& x, const OptimizerConfig& cfg, CounterRng& rng);
/// SAM step on the given component.
Vector one_sam_step_on(const LossModel& loss, const Vector& x, const OptimizerConfig& cfg, std::size_t k);

/// L(x + rho grad L / |grad L|); nullopt where the gradient vanishes.
std::optional<double> ascent_loss(const LossModel& loss, const Vector& x, double rho);

/// Exact gradient of the ascent-direction loss by the chain rule,
///   (I + rho J_g)^T grad L(x + rho g),  J_g = (I - g g^T) H / |grad L|.
/// Throws std::domain_error when |grad L| < 1e-14.
Vector ascent_loss_grad(const LossModel& loss, const Vector& x, double rho);

/// x - eta * grad L^Asc(x).
Vector asc_gd_step(const LossModel& loss, const Vector& x, const OptimizerConfig& cfg);

// ---------------------------------------------------------------------------

enum class Algorithm { kGd, kSam, kOneSam, kAscGd };

std::string to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& name);

class Stepper {
 public:
  virtual ~Stepper() = default;
  virtual Vector step(const Vector& x) = 0;
  /// Component used by the most recent step, for stochastic steppers.
  virtual std::optional<std::size_t> last_component() const { return std::nullopt; }
  virtual Algorithm algorithm() const = 0;
};

std::unique_ptr<Stepper> make_stepper(Algorithm algorithm, LossPtr loss, const OptimizerConfig& cfg);

struct RecordedStep {
  std::size_t t = 0;
  Vector x;
  double loss = 0.0;
  double grad_norm = 0.0;
  std::optional<std::size_t> component;
  std::vector<double> diagnostics;
};

struct StepFailure {
  std::size_t step = 0;
  std::string message;
};

struct Trajectory {
  std::size_t record_every = 1;
  std::vector<std::string> diagnostic_names;
  std::vector<RecordedStep> steps;
  std::optional<StepFailure> failure;

  bool ok() const { return !failure.has_value(); }
  const RecordedStep& last() const { return steps.back(); }
};

/// Per-record extra columns computed from the iterate.
struct Diagnostics {
  std::vector<std::string> names;
  std::function<std::vector<double>(const Vector& x)> compute;
};

/// Applies the stepper n_steps times from x0, recording step 0, every
/// record_every-th step and the final step. A failing step stops the run and
/// is reported in Trajectory::failure; the recorded prefix is kept.
Trajectory run(const LossModel& loss, Stepper& stepper, const Vector& x0, std::size_t n_steps,
               std::size_t record_every, const Diagnostics& diagnostics = {});

/// Same as run() but calls visit(t, x) after every step instead of recording,
/// for statistics that need every iterate.
void run_visit(Stepper& stepper, const Vector& x0, std::size_t n_steps,
               const std::function<void(std::size_t, const Vector&)>& visit);

}  // namespace samlab
