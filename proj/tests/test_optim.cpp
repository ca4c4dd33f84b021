#include <gtest/gtest.h>

#include <cmath>

#include "samlab/densela.hpp"
#include "samlab/optim.hpp"
#include "samlab/rng.hpp"
#include "samlab/selftest.hpp"

using namespace samlab;

namespace {

OptimizerConfig config(double eta, double rho) {
  OptimizerConfig c;
  c.eta = eta;
  c.rho = rho;
  return c;
}

// central differences of x -> L(x + rho grad L / |grad L|)
Vector fd_ascent_grad(const LossModel& loss, const Vector& x, double rho) {
  const double h = 1e-6;
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    Vector a = x, b = x;
    a[i] += h;
    b[i] -= h;
    out[i] = (*ascent_loss(loss, a, rho) - *ascent_loss(loss, b, rho)) / (2.0 * h);
  }
  return out;
}

}  // namespace

TEST(Rng, MatchesSplitMix64Reference) {
  // first SplitMix64 outputs for seed 0
  CounterRng rng(0);
  EXPECT_EQ(rng.next(), 0xE220A8397B1DCDAFULL);
  EXPECT_EQ(rng.next(), 0x6E789E6AA1B965F4ULL);
  EXPECT_EQ(rng.next(), 0x06C45D188009454FULL);
  CounterRng a(42), b(42);
  for (int i = 0; i < 100; ++i) {
    const auto n = a.index(7);
    EXPECT_LT(n, 7u);
    EXPECT_EQ(n, b.index(7));
  }
}

TEST(Gd, Examples) {
  const QuadraticLoss q(SymMatrix::diagonal({2.0, 1.0}));
  const Vector x = gd_step(q, Vector{1.0, 0.0}, config(0.1, 0.0));
  EXPECT_NEAR(x[0], 0.8, 1e-15);
  EXPECT_EQ(x[1], 0.0);
  EXPECT_EQ(gd_step(Toy4DLoss(), Vector{0.3, 0.2, 0.0, 0.0}, config(0.1, 0.0)), (Vector{0.3, 0.2, 0.0, 0.0}));
}

TEST(Gd, LinearContraction) {
  const LossPtr q = std::make_shared<QuadraticLoss>(SymMatrix::diagonal({2.0, 1.0, 0.5}));
  auto stepper = make_stepper(Algorithm::kGd, q, config(0.1, 0.0));
  const Vector x0{0.3, 0.4, 0.5};
  const Trajectory tr = run(*q, *stepper, x0, 200, 1);
  for (const auto& s : tr.steps) EXPECT_LE(s.x.norm(), std::pow(1.0 - 0.1 * 0.5, s.t) * x0.norm() * (1 + 1e-12));
}

TEST(Sam, QuadraticExample) {
  const QuadraticLoss q(SymMatrix::diagonal({2.0, 1.0}));
  const Vector x = sam_step(q, Vector{1.0, 0.0}, config(0.1, 0.01));
  EXPECT_NEAR(x[0], 0.798, 1e-15);
  EXPECT_EQ(x[1], 0.0);
}

TEST(Sam, ZeroRadiusIsGd) {
  CounterRng rng(31);
  for (const LossPtr& loss : {LossPtr(std::make_shared<Toy4DLoss>()), factored_example_loss()}) {
    for (int k = 0; k < 10; ++k) {
      Vector x(loss->dimension());
      for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform() - 0.5;
      EXPECT_EQ(sam_step(*loss, x, config(0.01, 0.0)), gd_step(*loss, x, config(0.01, 0.0)));
    }
  }
}

TEST(Sam, FallbackDirectionAtZeroGradient) {
  const Toy4DLoss toy;
  const Vector p{0.5, 0.5, 0.0, 0.0};
  OptimizerConfig c = config(0.01, 0.01);
  // default e1 keeps the probe on the manifold
  EXPECT_EQ(sam_step(toy, p, c), p);
  c.fallback_dir = Vector::unit(4, 2);
  const Vector x = sam_step(toy, p, c);
  EXPECT_NEAR(x[2], -0.01 * 2.0 * Toy4DLoss::f1(0.5, 0.5) * 0.01, 1e-17);
  EXPECT_EQ(x[3], 0.0);

  c.fallback_dir = Vector{1.0, 1.0, 0.0, 0.0};
  EXPECT_THROW(c.validate(4), std::invalid_argument);
}

TEST(OneSam, HandEvaluatedStep) {
  const Toy4DLoss toy;
  const Vector x = one_sam_step_on(toy, Vector{0.0, 0.0, 0.1, 0.0}, config(0.01, 0.01), 0);
  // component 16 x3^2: probe x3 = 0.11, gradient 3.52
  EXPECT_NEAR(x[2], 0.0648, 1e-15);
  EXPECT_EQ(x[0], 0.0);
  EXPECT_EQ(x[3], 0.0);
}

TEST(OneSam, SingleComponentIsSam) {
  const QuadraticLoss q(SymMatrix::diagonal({2.0, 1.0}));
  CounterRng rng(1);
  const auto r = one_sam_step(q, Vector{0.3, -0.7}, config(0.1, 0.05), rng);
  EXPECT_EQ(r.component, 0u);
  EXPECT_EQ(r.x, sam_step(q, Vector{0.3, -0.7}, config(0.1, 0.05)));
}

TEST(OneSam, InterpolatedDatumUsesFallback) {
  const LossPtr loss = factored_example_loss();
  const Vector p = factored_example_point();
  OptimizerConfig c = config(0.01, 0.01);
  const Vector x = one_sam_step_on(*loss, p, c, 1);
  const Vector want = p - 0.01 * loss->component(1)->grad(p + 0.01 * Vector::unit(5, 0));
  EXPECT_EQ(x, want);
}

TEST(OneSam, SeededSequenceIsReproducible) {
  const LossPtr toy = std::make_shared<Toy4DLoss>();
  OptimizerConfig c = config(0.005, 0.01);
  c.seed = 99;
  auto a = make_stepper(Algorithm::kOneSam, toy, c);
  auto b = make_stepper(Algorithm::kOneSam, toy, c);
  const Vector x0{0.5, 0.5, 0.2, 0.1};
  const Trajectory ta = run(*toy, *a, x0, 500, 1);
  const Trajectory tb = run(*toy, *b, x0, 500, 1);
  ASSERT_EQ(ta.steps.size(), tb.steps.size());
  std::size_t first = 0;
  for (std::size_t i = 0; i < ta.steps.size(); ++i) {
    EXPECT_EQ(ta.steps[i].component, tb.steps[i].component);
    EXPECT_EQ(ta.steps[i].x, tb.steps[i].x);
    if (ta.steps[i].component == 0) ++first;
  }
  EXPECT_GT(first, 200u);
  EXPECT_LT(first, 300u);
}

TEST(AscGd, ChainRuleMatchesFiniteDifferences) {
  const Toy4DLoss toy;
  CounterRng rng(32);
  for (int k = 0; k < 20; ++k) {
    const Vector x{rng.uniform(), rng.uniform(), 0.2 * rng.uniform() + 0.05, 0.2 * rng.uniform() - 0.1};
    const Vector g = ascent_loss_grad(toy, x, 0.01);
    EXPECT_LE((g - fd_ascent_grad(toy, x, 0.01)).norm(), 1e-5 * g.norm());
  }
  const QuadraticLoss q(SymMatrix::diagonal({2.0, 1.0}));
  for (const Vector& x : {Vector{0.1, 0.0}, Vector{0.1, 0.05}}) {
    const Vector g = ascent_loss_grad(q, x, 0.01);
    EXPECT_LE((g - fd_ascent_grad(q, x, 0.01)).norm(), 1e-5 * g.norm());
  }
}

TEST(AscGd, ZeroRadiusAndUndefined) {
  const Toy4DLoss toy;
  const Vector x{0.2, 0.3, 0.1, -0.05};
  EXPECT_EQ(asc_gd_step(toy, x, config(0.01, 0.0)), gd_step(toy, x, config(0.01, 0.0)));
  EXPECT_THROW(asc_gd_step(toy, Vector{0.2, 0.3, 0.0, 0.0}, config(0.01, 0.01)), std::domain_error);
  EXPECT_FALSE(ascent_loss(toy, Vector{0.2, 0.3, 0.0, 0.0}, 0.01).has_value());
}

TEST(Run, ZeroStepsAndRecording) {
  const LossPtr q = std::make_shared<QuadraticLoss>(SymMatrix::diagonal({2.0, 1.0}));
  auto s = make_stepper(Algorithm::kSam, q, config(0.1, 0.01));
  const Trajectory empty = run(*q, *s, Vector{1.0, 1.0}, 0, 10);
  ASSERT_EQ(empty.steps.size(), 1u);
  EXPECT_EQ(empty.steps[0].x, (Vector{1.0, 1.0}));

  const Trajectory tr = run(*q, *s, Vector{1.0, 1.0}, 25, 10);
  std::vector<std::size_t> ts;
  for (const auto& r : tr.steps) ts.push_back(r.t);
  EXPECT_EQ(ts, (std::vector<std::size_t>{0, 10, 20, 25}));
}

TEST(Run, DeterministicReruns) {
  const LossPtr toy = std::make_shared<Toy4DLoss>();
  auto a = make_stepper(Algorithm::kSam, toy, config(0.005, 0.01));
  auto b = make_stepper(Algorithm::kSam, toy, config(0.005, 0.01));
  const Trajectory ta = run(*toy, *a, Vector{0.5, 0.5, 0.2, 0.1}, 2000, 100);
  const Trajectory tb = run(*toy, *b, Vector{0.5, 0.5, 0.2, 0.1}, 2000, 100);
  for (std::size_t i = 0; i < ta.steps.size(); ++i) EXPECT_EQ(ta.steps[i].x, tb.steps[i].x);
}

TEST(Run, DivergenceKeepsPrefix) {
  const LossPtr q = std::make_shared<QuadraticLoss>(SymMatrix::diagonal({100.0}));
  auto s = make_stepper(Algorithm::kGd, q, config(0.1, 0.0));
  const Trajectory tr = run(*q, *s, Vector{1.0}, 10000, 1);
  ASSERT_FALSE(tr.ok());
  EXPECT_GT(tr.failure->step, 100u);
  EXPECT_EQ(tr.steps.size(), tr.failure->step);
}

TEST(QuadraticSam, ScaledGradientRecursion) {
  const SymMatrix a = SymMatrix::diagonal({2.0, 1.0, 0.5});
  const QuadraticLoss q(a);
  const double eta = 0.1, rho = 0.01;
  Vector x{0.3, 0.4, 0.5};
  for (int t = 0; t < 2000; ++t) {
    const Vector xt = a * x / rho;
    const Vector next = sam_step(q, x, config(eta, rho));
    const Vector want = xt - eta * (a * xt) - eta * (a * (a * xt)) / xt.norm();
    EXPECT_LE((a * next / rho - want).norm(), 1e-12 * (1.0 + want.norm()));
    x = next;
  }
}

TEST(QuadraticSam, InvariantSetsOnceInNeverOut) {
  const SymMatrix a = SymMatrix::diagonal({2.0, 1.0, 0.5});
  const QuadraticLoss q(a);
  const double eta = 0.1, rho = 0.01;
  const auto e = eig_sym(a);
  std::vector<SymMatrix> proj;
  for (std::size_t j = 0; j < 3; ++j) proj.push_back(spectral_projector(e, index_range(j, 3)));
  std::vector<bool> inside(3, false);
  Vector x{0.3, 0.4, 0.5};
  for (int t = 0; t < 10000; ++t) {
    x = sam_step(q, x, config(eta, rho));
    const Vector xt = a * x / rho;
    for (std::size_t j = 0; j < 3; ++j) {
      const bool in = (proj[j] * xt).norm() <= eta * e.values[j] * e.values[j] + 1e-12;
      if (inside[j]) EXPECT_TRUE(in) << "j=" << j << " t=" << t;
      inside[j] = inside[j] || in;
    }
  }
  EXPECT_TRUE(inside[0]);
  EXPECT_NEAR(x.norm(), eta * rho * 2.0 / (2.0 - eta * 2.0), 1e-2 * 1.1111e-3);
}
