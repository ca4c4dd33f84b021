#include "samlab/manifold.hpp"

#include <algorithm>
#include <cmath>

namespace samlab {

ManifoldPoint analyze_point(const LossModel& loss, const Vector& p, double rank_tol) {
  ManifoldPoint mp;
  mp.p = p;
  mp.residual_grad_norm = loss.grad(p).norm();
  mp.spectrum = eig_sym(hessian(loss, p));
  mp.spectrum.rank_tol = rank_tol;
  mp.rank = numerical_rank(mp.spectrum, rank_tol);
  const auto& vals = mp.spectrum.values;
  const double top = vals.empty() ? 0.0 : std::max(std::abs(vals.front()), std::abs(vals.back()));
  for (std::size_t i = 0; i < vals.size(); ++i)
    if (std::abs(vals[i]) > rank_tol * top) mp.normal_indices.push_back(i);
  mp.tangent_projector = SymMatrix::identity(p.size()) - spectral_projector(mp.spectrum, mp.normal_indices);
  return mp;
}

namespace {

Vector rk4(const LossModel& loss, const Vector& x, double dt, const Vector& k1) {
  const Vector k2 = -loss.grad(x + (0.5 * dt) * k1);
  const Vector k3 = -loss.grad(x + (0.5 * dt) * k2);
  const Vector k4 = -loss.grad(x + dt * k3);
  Vector out = x;
  out.axpy(dt / 6.0, k1);
  out.axpy(dt / 3.0, k2);
  out.axpy(dt / 3.0, k3);
  out.axpy(dt / 6.0, k4);
  return out;
}

}  // namespace

ManifoldPoint phi(const LossModel& loss, const Vector& x0, const PhiOptions& opts) {
  if (x0.size() != loss.dimension()) throw std::invalid_argument("phi: dimension mismatch");
  Vector x = x0;
  ValueAndGrad cur = evaluate(loss, x);
  double dt = opts.initial_dt;
  std::size_t attempts = 0;
  std::vector<double> history;
  if (opts.keep_loss_history) history.push_back(cur.value);

  while (cur.grad.norm() > opts.tol) {
    if (attempts >= opts.max_steps) {
      throw NonConvergentError("phi: gradient flow from " + to_string(x0) + " did not converge within " +
                               std::to_string(opts.max_steps) + " steps (|grad L| = " +
                               std::to_string(cur.grad.norm()) + ")");
    }
    if (dt < 1e-14) throw NonConvergentError("phi: step size underflow from " + to_string(x0));
    ++attempts;

    const Vector k1 = -cur.grad;
    const Vector full = rk4(loss, x, dt, k1);
    const Vector half = rk4(loss, x, 0.5 * dt, k1);
    const Vector two_half = rk4(loss, half, 0.5 * dt, -loss.grad(half));
    const double err = (two_half - full).norm();
    Vector next = two_half + (two_half - full) / 15.0;

    const double bound = opts.local_tol * (1.0 + x.norm());
    if (!next.all_finite() || !(err <= bound)) {
      dt *= 0.5;
      continue;
    }
    const double next_loss = loss.value(next);
    if (!(next_loss <= cur.value + 1e-12 * std::abs(cur.value))) {
      dt *= 0.5;
      continue;
    }
    x = std::move(next);
    cur = evaluate(loss, x);
    if (opts.keep_loss_history) history.push_back(cur.value);
    if (err < bound / 32.0) dt = std::min(2.0 * dt, opts.max_dt);
  }

  ManifoldPoint mp = analyze_point(loss, x, opts.rank_tol);
  mp.converged = true;
  mp.steps = attempts;
  mp.loss_history = std::move(history);
  return mp;
}

double phi_directional_derivative(const LossModel& loss, const Vector& x, const Vector& direction, double h,
                                  const PhiOptions& opts) {
  const Vector plus = phi(loss, x + h * direction, opts).p;
  const Vector minus = phi(loss, x - h * direction, opts).p;
  return ((plus - minus) / (2.0 * h)).norm();
}

double phi_annihilation_residual(const LossModel& loss, const Vector& x, double h, const PhiOptions& opts) {
  const Vector g = loss.grad(x);
  const double n = g.norm();
  if (!(n > 0.0)) throw std::domain_error("phi_annihilation_residual: zero gradient");
  return phi_directional_derivative(loss, x, g / n, h, opts);
}

Vector grad_lambda1(const LossModel& loss, const Vector& p, double gap_tol) {
  const EigenDecomposition e = eig_sym(hessian(loss, p));
  if (e.dim() >= 2) {
    const double gap = e.values[0] - e.values[1];
    if (!(gap > gap_tol * std::abs(e.values[0]))) {
      throw EigengapError("grad_lambda1: eigengap " + std::to_string(gap) + " too small at " + to_string(p));
    }
  }
  return third_directional(loss, p, e.vectors[0]);
}

Vector grad_trace(const LossModel& loss, const Vector& p) {
  const double h = third_fd_step(p);
  Vector g(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    Vector xp = p;
    Vector xm = p;
    xp[i] += h;
    xm[i] -= h;
    g[i] = (hessian(loss, xp).trace() - hessian(loss, xm).trace()) / (2.0 * h);
  }
  return g;
}

std::string to_string(FlowKind k) { return k == FlowKind::kLambda1 ? "lambda1" : "trace"; }

FlowKind parse_flow_kind(const std::string& name) {
  if (name == "lambda1") return FlowKind::kLambda1;
  if (name == "trace") return FlowKind::kTrace;
  throw std::invalid_argument("unknown flow kind '" + name + "' (expected lambda1 or trace)");
}

double flow_potential(const LossModel& loss, const Vector& p, FlowKind kind) {
  const SymMatrix h = hessian(loss, p);
  return kind == FlowKind::kTrace ? h.trace() : eig_sym(h).values.front();
}

Vector FlowSolution::at(double tau) const {
  if (samples.empty()) throw std::logic_error("FlowSolution::at: empty solution");
  if (tau <= samples.front().tau) return samples.front().x;
  if (tau >= samples.back().tau) return samples.back().x;
  const auto it = std::lower_bound(samples.begin(), samples.end(), tau,
                                   [](const FlowSample& s, double t) { return s.tau < t; });
  const FlowSample& hi = *it;
  const FlowSample& lo = *(it - 1);
  const double w = (tau - lo.tau) / (hi.tau - lo.tau);
  return (1.0 - w) * lo.x + w * hi.x;
}

FlowSolution riemannian_flow(const LossModel& loss, const Vector& x_init, FlowKind kind, const FlowOptions& opts) {
  if (!(opts.dt > 0.0) || !(opts.horizon >= 0.0) || opts.reproject_every == 0) {
    throw std::invalid_argument("riemannian_flow: need dt > 0, horizon >= 0, reproject_every >= 1");
  }
  FlowSolution sol;
  sol.kind = kind;
  sol.dt = opts.dt;
  sol.reproject_every = opts.reproject_every;

  Vector x = phi(loss, x_init, opts.phi).p;
  sol.samples.push_back({0.0, x, flow_potential(loss, x, kind), true});

  const auto n_steps = static_cast<std::size_t>(std::llround(opts.horizon / opts.dt));
  for (std::size_t step = 1; step <= n_steps; ++step) {
    try {
      const ManifoldPoint geo = analyze_point(loss, x, opts.phi.rank_tol);
      const Vector field = kind == FlowKind::kLambda1 ? grad_lambda1(loss, x, opts.gap_tol) : grad_trace(loss, x);
      x.axpy(-0.5 * opts.dt, geo.tangent_projector * field);
      bool reprojected = false;
      if (step % opts.reproject_every == 0 || step == n_steps) {
        x = phi(loss, x, opts.phi).p;
        reprojected = true;
      }
      sol.samples.push_back({static_cast<double>(step) * opts.dt, x, flow_potential(loss, x, kind), reprojected});
    } catch (const std::exception& e) {
      sol.abort_reason = "tau = " + std::to_string(static_cast<double>(step - 1) * opts.dt) + ": " + e.what();
      return sol;
    }
  }
  sol.completed = true;
  return sol;
}

}  // namespace samlab
