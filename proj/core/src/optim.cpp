#include "samlab/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace samlab {

void OptimizerConfig::validate(std::size_t dim) const {
  if (!std::isfinite(eta) || eta <= 0.0) throw std::invalid_argument("optimizer: eta must be finite and > 0");
  if (!std::isfinite(rho) || rho < 0.0) throw std::invalid_argument("optimizer: rho must be finite and >= 0");
  if (fallback_dir.size() != 0) {
    if (fallback_dir.size() != dim) throw std::invalid_argument("optimizer: fallback_dir has wrong dimension");
    if (std::abs(fallback_dir.norm() - 1.0) > 1e-12) throw std::invalid_argument("optimizer: fallback_dir must have unit norm");
  }
}

Vector OptimizerConfig::fallback(std::size_t dim) const {
  return fallback_dir.size() == 0 ? Vector::unit(dim, 0) : fallback_dir;
}

bool is_zero_gradient(const Vector& g, const Vector& x) { return g.norm() <= 1e-14 * (1.0 + x.norm()); }

Vector ascent_direction(const Vector& g, const Vector& x, const OptimizerConfig& cfg) {
  if (is_zero_gradient(g, x)) return cfg.fallback(x.size());
  return g / g.norm();
}

namespace {

Vector checked(Vector next, const LossModel& loss) {
  if (!next.all_finite()) throw NumericalError(loss.name() + ": non-finite iterate " + to_string(next));
  return next;
}

Vector sam_update(const LossModel& loss, const Vector& x, const OptimizerConfig& cfg) {
  const Vector g = loss.grad(x);
  Vector probe = x;
  probe.axpy(cfg.rho, ascent_direction(g, x, cfg));
  Vector next = x;
  next.axpy(-cfg.eta, loss.grad(probe));
  return checked(std::move(next), loss);
}

}  // namespace

Vector gd_step(const LossModel& loss, const Vector& x, const OptimizerConfig& cfg) {
  Vector next = x;
  next.axpy(-cfg.eta, loss.grad(x));
  return checked(std::move(next), loss);
}

Vector sam_step(const LossModel& loss, const Vector& x, const OptimizerConfig& cfg) { return sam_update(loss, x, cfg); }

Vector one_sam_step_on(const LossModel& loss, const Vector& x, const OptimizerConfig& cfg, std::size_t k) {
  if (loss.component_count() == 1) {
    if (k != 0) throw std::out_of_range("one_sam_step_on: component index out of range");
    return sam_update(loss, x, cfg);
  }
  return sam_update(*loss.component(k), x, cfg);
}

OneSamResult one_sam_step(const LossModel& loss, const Vector& x, const OptimizerConfig& cfg, CounterRng& rng) {
  const std::size_t k = static_cast<std::size_t>(rng.index(loss.component_count()));
  return {one_sam_step_on(loss, x, cfg, k), k};
}

std::optional<double> ascent_loss(const LossModel& loss, const Vector& x, double rho) {
  const Vector g = loss.grad(x);
  if (is_zero_gradient(g, x)) return std::nullopt;
  return loss.value(x + rho * (g / g.norm()));
}

Vector ascent_loss_grad(const LossModel& loss, const Vector& x, double rho) {
  const Vector grad = loss.grad(x);
  const double n = grad.norm();
  if (!(n >= 1e-14)) throw std::domain_error("ascent-direction loss is undefined at a zero gradient");
  const Vector g = grad / n;
  const Vector w = loss.grad(x + rho * g);
  // J_g^T w = H (I - g g^T) w / |grad L|
  Vector tangential = w;
  tangential.axpy(-g.dot(w), g);
  Vector out = w;
  out.axpy(rho / n, hessian(loss, x) * tangential);
  return out;
}

Vector asc_gd_step(const LossModel& loss, const Vector& x, const OptimizerConfig& cfg) {
  Vector next = x;
  next.axpy(-cfg.eta, ascent_loss_grad(loss, x, cfg.rho));
  return checked(std::move(next), loss);
}

// ---------------------------------------------------------------------------

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::kGd:
      return "gd";
    case Algorithm::kSam:
      return "sam";
    case Algorithm::kOneSam:
      return "one_sam";
    case Algorithm::kAscGd:
      return "asc_gd";
  }
  return "?";
}

Algorithm parse_algorithm(const std::string& name) {
  if (name == "gd") return Algorithm::kGd;
  if (name == "sam") return Algorithm::kSam;
  if (name == "one_sam" || name == "1sam" || name == "one-sam") return Algorithm::kOneSam;
  if (name == "asc_gd" || name == "asc-gd") return Algorithm::kAscGd;
  throw std::invalid_argument("unknown algorithm '" + name + "' (expected gd, sam, one_sam, asc_gd)");
}

namespace {

class DeterministicStepper final : public Stepper {
 public:
  DeterministicStepper(Algorithm a, LossPtr loss, OptimizerConfig cfg)
      : algorithm_(a), loss_(std::move(loss)), cfg_(std::move(cfg)) {}

  Vector step(const Vector& x) override {
    switch (algorithm_) {
      case Algorithm::kGd:
        return gd_step(*loss_, x, cfg_);
      case Algorithm::kSam:
        return sam_step(*loss_, x, cfg_);
      case Algorithm::kAscGd:
        return asc_gd_step(*loss_, x, cfg_);
      default:
        throw std::logic_error("DeterministicStepper: unsupported algorithm");
    }
  }
  Algorithm algorithm() const override { return algorithm_; }

 private:
  Algorithm algorithm_;
  LossPtr loss_;
  OptimizerConfig cfg_;
};

class OneSamStepper final : public Stepper {
 public:
  OneSamStepper(LossPtr loss, OptimizerConfig cfg) : loss_(std::move(loss)), cfg_(std::move(cfg)), rng_(cfg_.seed) {
    for (std::size_t k = 0; k < loss_->component_count(); ++k) components_.push_back(loss_->component(k));
  }

  Vector step(const Vector& x) override {
    last_ = static_cast<std::size_t>(rng_.index(components_.size()));
    return sam_update(*components_[*last_], x, cfg_);
  }
  std::optional<std::size_t> last_component() const override { return last_; }
  Algorithm algorithm() const override { return Algorithm::kOneSam; }

 private:
  LossPtr loss_;
  OptimizerConfig cfg_;
  CounterRng rng_;
  std::vector<LossPtr> components_;
  std::optional<std::size_t> last_;
};

}  // namespace

std::unique_ptr<Stepper> make_stepper(Algorithm algorithm, LossPtr loss, const OptimizerConfig& cfg) {
  cfg.validate(loss->dimension());
  if (algorithm == Algorithm::kOneSam) return std::make_unique<OneSamStepper>(std::move(loss), cfg);
  return std::make_unique<DeterministicStepper>(algorithm, std::move(loss), cfg);
}

Trajectory run(const LossModel& loss, Stepper& stepper, const Vector& x0, std::size_t n_steps,
               std::size_t record_every, const Diagnostics& diagnostics) {
  if (record_every == 0) throw std::invalid_argument("run: record_every must be >= 1");
  if (x0.size() != loss.dimension()) throw std::invalid_argument("run: x0 has wrong dimension");
  Trajectory traj;
  traj.record_every = record_every;
  traj.diagnostic_names = diagnostics.names;

  auto record = [&](std::size_t t, const Vector& x, std::optional<std::size_t> k) {
    RecordedStep r;
    r.t = t;
    r.x = x;
    r.loss = loss.value(x);
    r.grad_norm = loss.grad(x).norm();
    r.component = k;
    if (diagnostics.compute) r.diagnostics = diagnostics.compute(x);
    traj.steps.push_back(std::move(r));
  };

  Vector x = x0;
  try {
    record(0, x, std::nullopt);
    for (std::size_t t = 1; t <= n_steps; ++t) {
      try {
        x = stepper.step(x);
      } catch (const std::exception& e) {
        traj.failure = StepFailure{t, e.what()};
        return traj;
      }
      if (t % record_every == 0 || t == n_steps) record(t, x, stepper.last_component());
    }
  } catch (const std::exception& e) {
    // Diagnostics failures are reported the same way as step failures.
    traj.failure = StepFailure{traj.steps.empty() ? 0 : traj.steps.back().t, e.what()};
  }
  return traj;
}

void run_visit(Stepper& stepper, const Vector& x0, std::size_t n_steps,
               const std::function<void(std::size_t, const Vector&)>& visit) {
  Vector x = x0;
  for (std::size_t t = 1; t <= n_steps; ++t) {
    x = stepper.step(x);
    visit(t, x);
  }
}

}  // namespace samlab
