#include "samlab/sharpness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

#include "samlab/optim.hpp"
#include "samlab/rng.hpp"

namespace samlab {

namespace {

Vector random_unit(CounterRng& rng, std::size_t dim) {
  Vector g(dim);
  double n = 0.0;
  do {
    for (std::size_t i = 0; i < dim; ++i) g[i] = rng.normal();
    n = g.norm();
  } while (n == 0.0);
  return g / n;
}

// Ascent of f(v) = L(x + rho v) on the unit sphere with step halving.
struct SphereAscent {
  const LossModel& loss;
  const Vector& x;
  double rho;
  double base;
  WorstSharpness* best;

  double eval(const Vector& v) {
    const double r = loss.value(x + rho * v) - base;
    ++best->evaluations;
    if (r > best->value) {
      best->value = r;
      best->direction = v;
    }
    return r;
  }

  void run(Vector v, std::size_t iterations, double initial_step) {
    double f = eval(v);
    double step = initial_step;
    for (std::size_t it = 0; it < iterations && step > 1e-13; ++it) {
      const Vector g = rho * loss.grad(x + rho * v);
      Vector tangent = g;
      tangent.axpy(-v.dot(g), v);
      const double tn = tangent.norm();
      if (!(tn > 1e-300)) break;
      Vector cand = v;
      cand.axpy(step / tn, tangent);
      cand = cand / cand.norm();
      const double fc = eval(cand);
      if (fc > f) {
        v = std::move(cand);
        f = fc;
        step = std::min(initial_step, 1.25 * step);
      } else {
        step *= 0.5;
      }
    }
  }
};

}  // namespace

WorstSharpness worst_sharpness(const LossModel& loss, const Vector& x, double rho, const WorstSharpnessOptions& opts) {
  if (!(rho >= 0.0)) throw std::invalid_argument("worst_sharpness: rho must be >= 0");
  const std::size_t dim = loss.dimension();
  WorstSharpness best;
  best.value = -std::numeric_limits<double>::infinity();
  SphereAscent ascent{loss, x, rho, loss.value(x), &best};

  std::vector<Vector> inits;
  const EigenDecomposition e = eig_sym(hessian(loss, x));
  inits.push_back(e.vectors.front());
  inits.push_back(-e.vectors.front());
  const Vector g = loss.grad(x);
  if (!is_zero_gradient(g, x)) {
    const Vector gh = g / g.norm();
    inits.push_back(gh);
    inits.push_back(-gh);
  }
  for (const auto& v : opts.extra_inits) {
    if (v.size() == dim && v.norm() > 0.0) inits.push_back(v / v.norm());
  }
  for (std::size_t i = 0; i < opts.n_random; ++i) {
    CounterRng rng(derive_seed(opts.seed, i));
    inits.push_back(random_unit(rng, dim));
  }
  for (auto& v : inits) ascent.run(std::move(v), opts.iterations, opts.initial_step);
  return best;
}

std::optional<double> ascent_sharpness(const LossModel& loss, const Vector& x, double rho) {
  const auto asc = ascent_loss(loss, x, rho);
  if (!asc) return std::nullopt;
  return *asc - loss.value(x);
}

AverageSharpness avg_sharpness(const LossModel& loss, const Vector& x, double rho, std::size_t n_samples,
                               std::uint64_t seed, unsigned threads) {
  if (n_samples == 0) throw std::invalid_argument("avg_sharpness: n_samples must be >= 1");
  const std::size_t dim = loss.dimension();
  const double base = loss.value(x);
  const std::size_t n_shards = (n_samples + kAvgShardSize - 1) / kAvgShardSize;

  struct Shard {
    std::size_t n = 0;
    double mean = 0.0;
    double m2 = 0.0;
  };
  std::vector<Shard> shards(n_shards);
  auto work = [&](std::size_t s) {
    CounterRng rng(derive_seed(seed, s));
    const std::size_t count = std::min(kAvgShardSize, n_samples - s * kAvgShardSize);
    Shard acc;
    for (std::size_t i = 0; i < count; ++i) {
      const double d = loss.value(x + rho * random_unit(rng, dim)) - base;
      ++acc.n;
      const double delta = d - acc.mean;
      acc.mean += delta / static_cast<double>(acc.n);
      acc.m2 += delta * (d - acc.mean);
    }
    shards[s] = acc;
  };

  threads = std::max(1U, std::min<unsigned>(threads, static_cast<unsigned>(n_shards)));
  if (threads == 1) {
    for (std::size_t s = 0; s < n_shards; ++s) work(s);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        for (std::size_t s = t; s < n_shards; s += threads) work(s);
      });
    }
    for (auto& th : pool) th.join();
  }

  // Chan et al. pairwise combination, in shard order.
  Shard total;
  for (const Shard& s : shards) {
    if (s.n == 0) continue;
    const double n = static_cast<double>(total.n + s.n);
    const double delta = s.mean - total.mean;
    total.m2 += s.m2 + delta * delta * static_cast<double>(total.n) * static_cast<double>(s.n) / n;
    total.mean += delta * static_cast<double>(s.n) / n;
    total.n += s.n;
  }

  AverageSharpness out;
  out.mean = total.mean;
  out.samples = total.n;
  out.seed = seed;
  out.standard_error = total.n > 1 ? std::sqrt(total.m2 / static_cast<double>(total.n - 1) / static_cast<double>(total.n))
                            : std::numeric_limits<double>::infinity();
  return out;
}

SharpnessReport sharpness_report(const LossModel& loss, const Vector& x, double rho,
                                 const WorstSharpnessOptions& worst_opts, std::size_t avg_samples) {
  SharpnessReport r;
  r.rho = rho;
  r.worst = worst_sharpness(loss, x, rho, worst_opts);
  r.ascent = ascent_sharpness(loss, x, rho);
  r.average = avg_sharpness(loss, x, rho, avg_samples, worst_opts.seed);
  return r;
}

std::string to_string(SharpnessType t) {
  switch (t) {
    case SharpnessType::kMax:
      return "max";
    case SharpnessType::kAsc:
      return "asc";
    case SharpnessType::kAvg:
      return "avg";
  }
  return "?";
}

SharpnessType parse_sharpness_type(const std::string& name) {
  if (name == "max") return SharpnessType::kMax;
  if (name == "asc") return SharpnessType::kAsc;
  if (name == "avg") return SharpnessType::kAvg;
  throw std::invalid_argument("unknown sharpness type '" + name + "' (expected max, asc, avg)");
}

double select(const LimitingRegularizers& s, SharpnessType t) {
  switch (t) {
    case SharpnessType::kMax:
      return s.s_max;
    case SharpnessType::kAsc:
      return s.s_asc;
    case SharpnessType::kAvg:
      return s.s_avg;
  }
  return 0.0;
}

LimitingRegularizers limiting_regularizers(const LossModel& loss, const Vector& p, double rank_tol) {
  const SymMatrix h = hessian(loss, p);
  const EigenDecomposition e = eig_sym(h);
  LimitingRegularizers r;
  r.rank = numerical_rank(e, rank_tol);
  if (r.rank == 0) throw std::domain_error("limiting_regularizers: Hessian has no nonzero eigenvalue at " + to_string(p));
  const double top = std::max(std::abs(e.values.front()), std::abs(e.values.back()));
  double smallest = std::numeric_limits<double>::infinity();
  for (double l : e.values)
    if (std::abs(l) > rank_tol * top) smallest = std::min(smallest, l);
  r.s_max = e.values.front() / 2.0;
  r.s_asc = smallest / 2.0;
  r.s_avg = h.trace() / (2.0 * static_cast<double>(p.size()));
  r.half_trace = h.trace() / 2.0;
  r.grad_norm = loss.grad(p).norm();
  if (loss.component_count() > 1) {
    double sum = 0.0;
    for (std::size_t k = 0; k < loss.component_count(); ++k)
      sum += eig_sym(hessian(*loss.component(k), p)).values.front() / 2.0;
    r.s_stochastic = sum / static_cast<double>(loss.component_count());
  }
  if (r.grad_norm > 1e-6 * (1.0 + e.values.front())) {
    r.warning = "point is not on the minimizer manifold (|grad L| = " + std::to_string(r.grad_norm) + ")";
  }
  return r;
}

double alignment_angle(const LossModel& loss, const Vector& x, const ManifoldPoint& phi_x) {
  const Vector g = loss.grad(x);
  const double n = g.norm();
  if (!(n > 0.0)) throw std::domain_error("alignment_angle: zero gradient at " + to_string(x));
  const double c = std::min(1.0, std::abs(g.dot(phi_x.spectrum.vectors.front())) / n);
  return std::acos(c);
}

double alignment_angle(const LossModel& loss, const Vector& x, const PhiOptions& opts) {
  if (!(loss.grad(x).norm() > 0.0)) throw std::domain_error("alignment_angle: zero gradient at " + to_string(x));
  return alignment_angle(loss, x, phi(loss, x, opts));
}

std::vector<double> phase_residuals(const Vector& x, const ManifoldPoint& phi_x, double eta, double rho) {
  const Vector d = x - phi_x.p;
  const std::size_t m = phi_x.rank;
  std::vector<double> out(m);
  double tail = 0.0;
  for (std::size_t j = m; j-- > 0;) {
    const double l = phi_x.spectrum.values[j];
    const double proj = phi_x.spectrum.vectors[j].dot(d);
    tail += l * l * proj * proj;
    out[j] = std::sqrt(tail) - eta * rho * l * l;
  }
  return out;
}

double phase_residual(const LossModel& loss, const Vector& x, double eta, double rho, std::size_t j,
                      const PhiOptions& opts) {
  const ManifoldPoint mp = phi(loss, x, opts);
  if (j >= mp.rank) throw std::out_of_range("phase_residual: index beyond the Hessian rank");
  return phase_residuals(x, mp, eta, rho)[j];
}

}  // namespace samlab
