#include "samlab/explicit_bias.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

#include "samlab/optim.hpp"
#include "samlab/rng.hpp"

namespace samlab {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Dense inverse-Hessian estimate, row-major n x n.
struct InverseHessian {
  std::size_t n;
  std::vector<double> h;

  explicit InverseHessian(std::size_t dim) : n(dim), h(dim * dim, 0.0) {
    for (std::size_t i = 0; i < n; ++i) h[i * n + i] = 1.0;
  }
  Vector apply(const Vector& v) const {
    Vector out(n);
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) s += h[i * n + j] * v[j];
      out[i] = s;
    }
    return out;
  }
  void scale(double c) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) h[i * n + j] = i == j ? c : 0.0;
  }
  // H <- (I - r s y^T) H (I - r y s^T) + r s s^T
  void update(const Vector& s, const Vector& y, double sy) {
    const Vector hy = apply(y);
    const double r = 1.0 / sy;
    const double c = (1.0 + y.dot(hy) * r) * r;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) h[i * n + j] += c * s[i] * s[j] - r * (hy[i] * s[j] + s[i] * hy[j]);
  }
};

double type_value_grad(const LossModel& loss, const Vector& x, SharpnessType type, double rho, Vector& warm,
                       Vector& grad) {
  const std::size_t dim = x.size();
  switch (type) {
    case SharpnessType::kMax: {
      WorstSharpnessOptions o;
      o.n_random = 0;
      o.iterations = 400;
      if (!warm.empty()) o.extra_inits.push_back(warm);
      const WorstSharpness w = worst_sharpness(loss, x, rho, o);
      warm = w.direction;
      grad = loss.grad(x + rho * w.direction);
      return loss.value(x) + w.value;
    }
    case SharpnessType::kAsc: {
      const auto a = ascent_loss(loss, x, rho);
      if (!a) {
        grad = Vector(dim);
        return kInf;
      }
      grad = ascent_loss_grad(loss, x, rho);
      return *a;
    }
    case SharpnessType::kAvg: {
      double v = 0.0;
      grad = Vector(dim);
      for (std::size_t i = 0; i < dim; ++i) {
        for (double s : {-1.0, 1.0}) {
          Vector y = x;
          y[i] += s * rho;
          v += loss.value(y);
          grad += loss.grad(y);
        }
      }
      const double k = 2.0 * static_cast<double>(dim);
      grad *= 1.0 / k;
      return v / k;
    }
  }
  return kInf;
}

}  // namespace

bool Box::contains(const Vector& x) const {
  if (x.size() != lo.size()) return false;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (!(x[i] >= lo[i] && x[i] <= hi[i])) return false;
  return true;
}

Vector Box::center() const { return 0.5 * (lo + hi); }

void Box::validate(std::size_t d) const {
  if (lo.size() != d || hi.size() != d)
    throw std::invalid_argument("box: expected " + std::to_string(d) + " bounds per side");
  for (std::size_t i = 0; i < d; ++i) {
    if (!std::isfinite(lo[i]) || !std::isfinite(hi[i]) || !(lo[i] < hi[i]))
      throw std::invalid_argument("box: need finite lo < hi on axis " + std::to_string(i));
  }
}

BfgsResult nonsmooth_bfgs(const ValueGradFn& fg, Vector x, const BfgsOptions& opts) {
  const std::size_t n = x.size();
  BfgsResult res;
  Vector g(n);
  double f = fg(x, g);
  res.evaluations = 1;
  if (!std::isfinite(f)) throw std::invalid_argument("nonsmooth_bfgs: objective undefined at the start point");

  InverseHessian hinv(n);
  bool scaled = false;
  res.stop_reason = "iterations";
  for (; res.iterations < opts.max_iterations; ++res.iterations) {
    if (g.norm() <= opts.grad_tol) {
      res.stop_reason = "gradient";
      break;
    }
    const Vector d = -1.0 * hinv.apply(g);
    const double gd = g.dot(d);
    if (!(gd < 0.0)) {
      res.stop_reason = "not_descent";
      break;
    }
    // weak Wolfe by doubling / bisection
    double a = 0.0;
    double b = kInf;
    double t = 1.0;
    Vector xn;
    Vector gn(n);
    double fn = 0.0;
    bool found = false;
    for (std::size_t ls = 0; ls < opts.max_line_search; ++ls) {
      xn = x + t * d;
      fn = fg(xn, gn);
      ++res.evaluations;
      if (!(fn <= f + opts.armijo * t * gd)) {
        b = t;
      } else if (!(gn.dot(d) >= opts.wolfe * gd)) {
        a = t;
      } else {
        found = true;
        break;
      }
      t = std::isinf(b) ? 2.0 * t : 0.5 * (a + b);
    }
    if (!found) {
      res.stop_reason = "line_search";
      break;
    }
    const Vector s = xn - x;
    const Vector y = gn - g;
    const double sy = s.dot(y);
    x = std::move(xn);
    f = fn;
    g = std::move(gn);
    if (sy > 0.0) {
      if (!scaled) {
        hinv.scale(sy / y.dot(y));
        scaled = true;
      }
      hinv.update(s, y, sy);
    }
  }
  res.x = std::move(x);
  res.value = f;
  return res;
}

ValueGradFn regularized_objective(LossPtr loss, const RegularizedObjective& obj) {
  if (!(obj.rho > 0.0)) throw std::invalid_argument("regularized_objective: rho must be > 0");
  std::vector<LossPtr> parts;
  if (obj.stochastic) {
    for (std::size_t k = 0; k < loss->component_count(); ++k) parts.push_back(loss->component(k));
  } else {
    parts.push_back(loss);
  }
  auto warm = std::make_shared<std::vector<Vector>>(parts.size());
  return [parts, warm, obj](const Vector& x, Vector& grad) {
    grad = Vector(x.size());
    double total = 0.0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      Vector gk;
      const double v = type_value_grad(*parts[k], x, obj.type, obj.rho, (*warm)[k], gk);
      if (!std::isfinite(v)) {
        grad = Vector(x.size());
        return kInf;
      }
      total += v;
      grad += gk;
    }
    const double m = static_cast<double>(parts.size());
    grad *= 1.0 / m;
    return total / m;
  };
}

double limiting_value(const LossModel& loss, const Vector& p, const RegularizedObjective& obj) {
  const LimitingRegularizers s = limiting_regularizers(loss, p);
  if (obj.stochastic) return s.s_stochastic.value_or(s.s_max);
  return select(s, obj.type);
}

ExplicitBiasResult minimize_regularized(LossPtr loss, const RegularizedObjective& obj, const Box& box,
                                        const ExplicitBiasOptions& opts) {
  const std::size_t dim = loss->dimension();
  box.validate(dim);
  if (opts.n_starts == 0) throw std::invalid_argument("minimize_regularized: n_starts must be >= 1");

  ExplicitBiasResult out;
  bool have = false;
  for (std::size_t i = 0; i < opts.n_starts; ++i) {
    ExplicitBiasStart st;
    CounterRng rng(derive_seed(opts.seed, i));
    st.x0 = Vector(dim);
    for (std::size_t j = 0; j < dim; ++j) st.x0[j] = box.lo[j] + (box.hi[j] - box.lo[j]) * rng.uniform();

    // fresh warm-start state per start keeps starts independent
    const ValueGradFn fg = regularized_objective(loss, obj);
    Vector g0;
    if (!std::isfinite(fg(st.x0, g0))) {
      st.note = "skipped: objective undefined at start";
      out.starts.push_back(std::move(st));
      continue;
    }
    try {
      BfgsResult r = nonsmooth_bfgs(fg, st.x0, opts.bfgs);
      if (!box.contains(r.x)) {
        st.note = "rejected: left the box at " + to_string(r.x);
      } else if (!have || r.value < out.best_value) {
        out.best_x = r.x;
        out.best_value = r.value;
        have = true;
      }
      st.result = std::move(r);
    } catch (const std::exception& e) {
      st.note = std::string("failed: ") + e.what();
    }
    out.starts.push_back(std::move(st));
  }
  if (!have) throw std::runtime_error("minimize_regularized: every start failed or left the box");

  out.best_phi = phi(*loss, out.best_x, opts.phi);
  out.regularizer = limiting_value(*loss, out.best_phi.p, obj);
  return out;
}

GridMinimum manifold_grid_min(const LossModel& loss, const RegularizedObjective& obj, const Box& box,
                              std::size_t axis0, std::size_t axis1, std::size_t resolution,
                              const PhiOptions& phi_opts) {
  box.validate(loss.dimension());
  if (axis0 >= box.dim() || axis1 >= box.dim() || axis0 == axis1)
    throw std::invalid_argument("manifold_grid_min: need two distinct axes inside the box");
  if (resolution < 2) throw std::invalid_argument("manifold_grid_min: resolution must be >= 2");

  GridMinimum best;
  best.value = kInf;
  const Vector c = box.center();
  const double r1 = static_cast<double>(resolution - 1);
  for (std::size_t i = 0; i < resolution; ++i) {
    for (std::size_t j = 0; j < resolution; ++j) {
      Vector x = c;
      x[axis0] = box.lo[axis0] + (box.hi[axis0] - box.lo[axis0]) * static_cast<double>(i) / r1;
      x[axis1] = box.lo[axis1] + (box.hi[axis1] - box.lo[axis1]) * static_cast<double>(j) / r1;
      try {
        const ManifoldPoint mp = phi(loss, x, phi_opts);
        const double v = limiting_value(loss, mp.p, obj);
        ++best.evaluated;
        if (v < best.value) {
          best.value = v;
          best.point = mp.p;
        }
      } catch (const std::exception&) {
        ++best.skipped;
      }
    }
  }
  if (best.evaluated == 0) throw std::runtime_error("manifold_grid_min: no grid point could be mapped to the manifold");
  return best;
}

}  // namespace samlab
