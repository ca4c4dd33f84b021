#include "samlab/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "samlab/harness.hpp"
#include "samlab/manifold.hpp"
#include "samlab/rng.hpp"

namespace samlab {

namespace {

std::string g(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

// pass iff every asserted claim listed passes; detail lists measured vs tolerance
bool claims_pass(const RunSummary& s, const std::vector<std::string>& ids, const std::string& label, std::string& detail) {
  bool ok = true;
  for (const auto& id : ids) {
    const Claim* c = s.find(id);
    if (!detail.empty()) detail += "; ";
    if (!c) {
      detail += label + id + " missing";
      ok = false;
      continue;
    }
    detail += label + id + " " + g(c->measured) + (c->pass ? " ok" : " FAIL") + " (target " + g(c->target) + " +- " +
              g(c->tolerance) + ")";
    ok = ok && c->pass;
  }
  return ok;
}

Vector fd_grad(const LossModel& loss, const Vector& x) {
  const double h = hessian_fd_step(x);
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    Vector a = x, b = x;
    a[i] += h;
    b[i] -= h;
    out[i] = (loss.value(a) - loss.value(b)) / (2.0 * h);
  }
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

RunOutput timed(const ExperimentConfig& cfg, double& secs) {
  const auto t0 = std::chrono::steady_clock::now();
  RunOutput out = run_experiment(cfg);
  secs = seconds_since(t0);
  return out;
}

CriterionResult c1_c2(int id) {
  CriterionResult r;
  r.id = id;
  const ExperimentConfig cfg = default_config(Experiment::kQuadratic);
  double secs = 0.0;
  const RunOutput out = timed(cfg, secs);
  if (id == 1) {
    r.name = "quadratic fixed point";
    r.pass = claims_pass(out.summary, {"final_norm", "direction"}, "", r.detail);
    r.pass = r.pass && secs < 1.0;
    r.detail += "; runtime " + g(secs) + " s (< 1 s)";
  } else {
    r.name = "invariant set";
    r.pass = claims_pass(out.summary, {"invariant_set_top", "invariant_sets"}, "", r.detail);
  }
  return r;
}

CriterionResult c3() {
  CriterionResult r{3, "toy selection", true, "", 0.0};
  for (Algorithm a : {Algorithm::kSam, Algorithm::kAscGd, Algorithm::kOneSam}) {
    ExperimentConfig cfg = default_config(Experiment::kToy4D);
    cfg.algorithm = a;
    double secs = 0.0;
    const RunOutput out = timed(cfg, secs);
    const bool ok = claims_pass(out.summary, {"selection"}, to_string(a) + " ", r.detail);
    r.detail += " in " + g(secs) + " s";
    r.pass = r.pass && ok && secs <= 60.0;
  }
  return r;
}

struct FlowRuns {
  RunOutput sam;
  RunOutput one_sam;
};

const FlowRuns& flow_runs() {
  static const FlowRuns runs = [] {
    FlowRuns f;
    ExperimentConfig cfg = default_config(Experiment::kFlowCompare);
    cfg.algorithm = Algorithm::kSam;
    f.sam = run_experiment(cfg);
    cfg.algorithm = Algorithm::kOneSam;
    f.one_sam = run_experiment(cfg);
    return f;
  }();
  return runs;
}

CriterionResult c4() {
  CriterionResult r{4, "flow tracking", false, "", 0.0};
  const FlowRuns& f = flow_runs();
  const bool a = claims_pass(f.sam.summary, {"tracking"}, "sam ", r.detail);
  const bool b = claims_pass(f.one_sam.summary, {"tracking"}, "one_sam ", r.detail);
  for (const auto& [k, v] : f.one_sam.summary.notes)
    if (k == "attempts") r.detail += " (attempts " + v + ")";
  r.pass = a && b;
  return r;
}

CriterionResult c5() {
  CriterionResult r{5, "sharpness tracking", false, "", 0.0};
  r.pass = claims_pass(flow_runs().sam.summary, {"sharpness_tracking"}, "", r.detail);
  return r;
}

CriterionResult c6() {
  CriterionResult r{6, "alignment", false, "", 0.0};
  r.pass = claims_pass(flow_runs().sam.summary, {"alignment_angle", "normal_offset"}, "", r.detail);
  return r;
}

CriterionResult c7() {
  CriterionResult r{7, "taylor scaling", false, "", 0.0};
  // point 0 is the origin; point 1 = (0.5, 0.5, 0, 0) is where the worst-direction error is not identically 0
  const RunOutput out = run_experiment(default_config(Experiment::kSharpnessScan));
  r.pass = claims_pass(out.summary,
                       {"max_taylor[0]", "avg_within_stderr[0]", "avg_taylor[0]", "max_taylor[1]", "avg_within_stderr[1]",
                        "avg_taylor[1]"},
                       "", r.detail);
  return r;
}

CriterionResult c8() {
  CriterionResult r{8, "explicit bias", true, "", 0.0};
  for (SharpnessType t : {SharpnessType::kMax, SharpnessType::kAsc, SharpnessType::kAvg}) {
    ExperimentConfig cfg = default_config(Experiment::kExplicitBias);
    cfg.type = t;
    const RunOutput out = run_experiment(cfg);
    r.pass = claims_pass(out.summary, {"regularizer_vs_grid", "selected_neighborhood"}, to_string(t) + " ", r.detail) &&
             r.pass;
  }
  return r;
}

CriterionResult c9() {
  CriterionResult r{9, "rank-1 component hessians", true, "", 0.0};
  const LossPtr loss = factored_example_loss();
  const auto& data = dynamic_cast<const FactoredRegressionLoss&>(*loss).data();
  const Vector p = factored_example_point();
  double worst_rank = 0.0;
  double worst_outer = 0.0;
  for (std::size_t k = 0; k < loss->component_count(); ++k) {
    const SymMatrix h = fd_hessian(*loss->component(k), p);
    const EigenDecomposition e = eig_sym(h);
    const double l1 = e.values.front();
    const Vector df = data[k].feature.grad(p);
    SymMatrix diff = h;
    diff -= SymMatrix::outer(df, kSquaredLossCurvature);
    worst_rank = std::max(worst_rank, std::abs(e.values[1]) / l1);
    worst_outer = std::max(worst_outer, diff.frobenius_norm() / l1);
  }
  r.pass = worst_rank <= 1e-8 && worst_outer <= 1e-6;
  r.detail = "max |lambda_2|/lambda_1 " + g(worst_rank) + " (<= 1e-8); max |H_k - grad f grad f^T|/lambda_1 " +
             g(worst_outer) + " (<= 1e-6)";
  return r;
}

CriterionResult c10() {
  CriterionResult r{10, "limit map calculus", false, "", 0.0};
  const LossPtr loss = std::make_shared<Toy4DLoss>();
  CounterRng rng(20240610);
  double worst_ann = 0.0;
  double worst_proj = 0.0;
  for (int i = 0; i < 20; ++i) {
    const double x1 = rng.uniform();
    const double x2 = rng.uniform();
    const double x3 = 0.1 * (rng.uniform() - 0.5);
    const double x4 = 0.1 * (rng.uniform() - 0.5);
    worst_ann = std::max(worst_ann, phi_annihilation_residual(*loss, Vector{x1, x2, x3, x4}, 1e-4));
    const ManifoldPoint mp = phi(*loss, Vector{x1, x2, 0.0, 0.0});
    const auto prod = mp.tangent_projector.product(fd_hessian(*loss, mp.p));
    worst_proj = std::max(worst_proj, frobenius_norm(prod) / mp.lambda(0));
  }
  r.pass = worst_ann <= 1e-3 && worst_proj <= 1e-6;
  r.detail = "max |dPhi g| " + g(worst_ann) + " (<= 1e-3); max |P_tan H|/lambda_1 " + g(worst_proj) + " (<= 1e-6)";
  return r;
}

CriterionResult c11() {
  CriterionResult r{11, "kernel checks", false, "", 0.0};
  CounterRng rng(7);
  double worst_rec = 0.0;
  for (int m = 0; m < 200; ++m) {
    SymMatrix a(6);
    for (std::size_t i = 0; i < 6; ++i)
      for (std::size_t j = i; j < 6; ++j) a.set(i, j, 2.0 * rng.uniform() - 1.0);
    SymMatrix d = eig_sym(a).reconstruct();
    d -= a;
    worst_rec = std::max(worst_rec, d.frobenius_norm());
  }

  std::vector<LossPtr> losses;
  {
    SymMatrix b(5);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = i; j < 5; ++j) b.set(i, j, rng.uniform() - 0.5);
    losses.push_back(std::make_shared<QuadraticLoss>(SymMatrix(b.symmetric_product(b))));
  }
  losses.push_back(std::make_shared<Toy4DLoss>());
  losses.push_back(factored_example_loss());
  const std::size_t base = losses.size();
  for (std::size_t i = 0; i < base; ++i)
    if (losses[i]->component_count() > 1)
      for (std::size_t k = 0; k < losses[i]->component_count(); ++k) losses.push_back(losses[i]->component(k));

  double worst_g = 0.0;
  double worst_h = 0.0;
  for (const auto& loss : losses) {
    for (int s = 0; s < 20; ++s) {
      Vector x(loss->dimension());
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = 2.0 * rng.uniform() - 1.0;
      const Vector gr = loss->grad(x);
      worst_g = std::max(worst_g, (gr - fd_grad(*loss, x)).norm() / std::max(1.0, gr.norm()));
      const SymMatrix h = loss->hessian(x);
      SymMatrix d = fd_hessian(*loss, x);
      d -= h;
      worst_h = std::max(worst_h, d.frobenius_norm() / std::max(1.0, h.frobenius_norm()));
    }
  }
  r.pass = worst_rec <= 1e-10 && worst_g <= 1e-6 && worst_h <= 1e-6;
  r.detail = "eig reconstruction " + g(worst_rec) + " (<= 1e-10); grad FD " + g(worst_g) + ", hessian FD " + g(worst_h) +
             " (<= 1e-6 relative) over " + std::to_string(losses.size()) + " loss models";
  return r;
}

}  // namespace

LossPtr factored_example_loss() {
  using D = FactoredRegressionLoss::Datum;
  const Vector p = factored_example_point();
  std::vector<D> data;
  data.push_back(D{Polynomial(5, {{1.0, {1, 1, 0, 0, 0}}, {1.0, {0, 0, 2, 0, 0}}}), 0.0});
  data.push_back(D{Polynomial(5, {{2.0, {0, 1, 0, 1, 1}}, {1.0, {1, 0, 0, 0, 0}}}), 0.0});
  data.push_back(D{Polynomial(5, {{1.0, {0, 0, 1, 0, 2}}, {-1.0, {0, 0, 0, 1, 0}}, {0.5, {2, 0, 0, 0, 0}}}), 0.0});
  for (auto& d : data) d.label = d.feature.value(p);
  return std::make_shared<FactoredRegressionLoss>(std::move(data));
}

Vector factored_example_point() { return Vector{1.0, -1.0, 0.5, 2.0, 1.0}; }

std::vector<CriterionResult> run_selftest(const std::vector<int>& only,
                                          const std::function<void(const CriterionResult&)>& progress) {
  std::vector<CriterionResult> out;
  for (int id = 1; id <= 11; ++id) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    CriterionResult r;
    try {
      switch (id) {
        case 1:
        case 2:
          r = c1_c2(id);
          break;
        case 3:
          r = c3();
          break;
        case 4:
          r = c4();
          break;
        case 5:
          r = c5();
          break;
        case 6:
          r = c6();
          break;
        case 7:
          r = c7();
          break;
        case 8:
          r = c8();
          break;
        case 9:
          r = c9();
          break;
        case 10:
          r = c10();
          break;
        case 11:
          r = c11();
          break;
      }
    } catch (const std::exception& e) {
      r.id = id;
      r.pass = false;
      r.detail = std::string("error: ") + e.what();
    }
    r.seconds = seconds_since(t0);
    if (progress) progress(r);
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_result(const CriterionResult& r) {
  std::ostringstream s;
  s << "criterion " << r.id << " [" << r.name << "]: " << (r.pass ? "PASS" : "FAIL") << "  " << r.detail << "  ("
    << g(r.seconds) << " s)";
  return s.str();
}

}  // namespace samlab
