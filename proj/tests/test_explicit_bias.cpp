#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "samlab/explicit_bias.hpp"

using namespace samlab;

namespace {

Vector fd(const ValueGradFn& f, const Vector& x) {
  const double h = 1e-6;
  Vector g(x.size()), scratch;
  for (std::size_t i = 0; i < x.size(); ++i) {
    Vector a = x, b = x;
    a[i] += h;
    b[i] -= h;
    g[i] = (f(a, scratch) - f(b, scratch)) / (2.0 * h);
  }
  return g;
}

Box toy_box() { return {Vector{-0.5, -0.5, -0.5, -0.5}, Vector{1.5, 1.5, 0.5, 0.5}}; }

}  // namespace

TEST(Bfgs, SmoothRosenbrock) {
  const ValueGradFn f = [](const Vector& x, Vector& g) {
    const double a = 1.0 - x[0], b = x[1] - x[0] * x[0];
    g = Vector{-2.0 * a - 400.0 * x[0] * b, 200.0 * b};
    return a * a + 100.0 * b * b;
  };
  const auto r = nonsmooth_bfgs(f, Vector{-1.2, 1.0});
  EXPECT_NEAR(r.x[0], 1.0, 1e-6);
  EXPECT_NEAR(r.x[1], 1.0, 1e-6);
}

TEST(Bfgs, Kinked) {
  // |x1| + 2 |x2| + (x1 - x2)^2 / 2, minimum 0 at the origin
  const ValueGradFn f = [](const Vector& x, Vector& g) {
    const double d = x[0] - x[1];
    g = Vector{(x[0] > 0 ? 1.0 : -1.0) + d, (x[1] > 0 ? 2.0 : -2.0) - d};
    return std::abs(x[0]) + 2.0 * std::abs(x[1]) + 0.5 * d * d;
  };
  const auto r = nonsmooth_bfgs(f, Vector{0.7, -0.3});
  EXPECT_LE(r.value, 1e-6);
}

TEST(Bfgs, RejectsUndefinedStart) {
  const ValueGradFn f = [](const Vector&, Vector& g) {
    g = Vector{0.0};
    return std::numeric_limits<double>::infinity();
  };
  EXPECT_THROW(nonsmooth_bfgs(f, Vector{1.0}), std::invalid_argument);
}

TEST(Regularized, QuadraticClosedForms) {
  const auto q = std::make_shared<QuadraticLoss>(SymMatrix::diagonal({2.0, 1.0, 0.5}));
  const double rho = 0.1;
  Vector g;
  const Vector x{0.2, -0.1, 0.3};
  const double l = q->value(x);

  // the cross-polytope average is exact for quadratics: rho^2 Tr / (2 D)
  const auto avg = regularized_objective(q, {SharpnessType::kAvg, rho, false});
  EXPECT_NEAR(avg(x, g), l + rho * rho * 3.5 / 6.0, 1e-15);

  const auto mx = regularized_objective(q, {SharpnessType::kMax, rho, false});
  EXPECT_NEAR(mx(Vector(3), g), 0.5 * rho * rho * 2.0, 1e-12);
  EXPECT_NEAR(mx(x, g), l + worst_sharpness(*q, x, rho).value, 1e-12);

  const auto asc = regularized_objective(q, {SharpnessType::kAsc, rho, false});
  EXPECT_NEAR(asc(x, g), q->value(x + rho * q->grad(x) / q->grad(x).norm()), 1e-15);
  EXPECT_TRUE(std::isinf(asc(Vector(3), g)));
}

TEST(Regularized, GradientsMatchFiniteDifferences) {
  const auto toy = std::make_shared<Toy4DLoss>();
  const Vector x{0.3, 0.6, 0.05, -0.04};
  for (SharpnessType t : {SharpnessType::kMax, SharpnessType::kAsc, SharpnessType::kAvg})
    for (bool stochastic : {false, true}) {
      const auto f = regularized_objective(toy, {t, 0.01, stochastic});
      Vector g;
      f(x, g);
      EXPECT_LE((g - fd(f, x)).norm(), 1e-5 * g.norm()) << to_string(t) << " stochastic=" << stochastic;
    }
}

TEST(LimitingValue, Toy) {
  const Toy4DLoss toy;
  const Vector p{0.8, 1.0 / 7.0, 0.0, 0.0};
  const double half_trace = Toy4DLoss::f1(0.8, 1.0 / 7.0) + Toy4DLoss::f2(0.8, 1.0 / 7.0);
  EXPECT_DOUBLE_EQ(limiting_value(toy, p, {SharpnessType::kAvg, 0.01, false}), half_trace / 4.0);
  EXPECT_DOUBLE_EQ(limiting_value(toy, p, {SharpnessType::kMax, 0.01, true}), half_trace);
  EXPECT_DOUBLE_EQ(limiting_value(toy, Vector(4), {SharpnessType::kMax, 0.01, false}), 8.0);
}

TEST(GridMin, ToyPatch) {
  const Toy4DLoss toy;
  const auto mx = manifold_grid_min(toy, {SharpnessType::kMax, 0.01, false}, toy_box(), 0, 1, 41);
  EXPECT_NEAR(mx.value, 8.0, 1e-12);
  EXPECT_NEAR(mx.point[0], 0.0, 1e-12);
  EXPECT_NEAR(mx.point[1], 0.0, 1e-12);
  EXPECT_EQ(mx.evaluated, 41u * 41u);

  const auto asc = manifold_grid_min(toy, {SharpnessType::kAsc, 0.01, false}, toy_box(), 0, 1, 41);
  EXPECT_NEAR(asc.value, 1.0, 1e-12);
  EXPECT_NEAR(asc.point[0], 1.0, 1e-12);
}

TEST(Minimize, MaxTypeSelectsOrigin) {
  const auto toy = std::make_shared<Toy4DLoss>();
  ExplicitBiasOptions opts;
  opts.n_starts = 4;
  const auto r = minimize_regularized(toy, {SharpnessType::kMax, 0.01, false}, toy_box(), opts);
  EXPECT_NEAR(r.best_phi.p[0], 0.0, 0.1);
  EXPECT_NEAR(r.best_phi.p[1], 0.0, 0.1);
  EXPECT_NEAR(r.regularizer, 8.0, 0.4);
  EXPECT_EQ(r.starts.size(), 4u);
}

TEST(BoxTest, Validation) {
  EXPECT_THROW((Box{Vector{0.0}, Vector{0.0}}.validate(1)), std::invalid_argument);
  EXPECT_THROW((Box{Vector{0.0}, Vector{1.0}}.validate(2)), std::invalid_argument);
  const Box b{Vector{0.0, -1.0}, Vector{1.0, 1.0}};
  EXPECT_TRUE(b.contains(Vector{0.5, 0.0}));
  EXPECT_FALSE(b.contains(Vector{1.5, 0.0}));
  EXPECT_EQ(b.center(), (Vector{0.5, 0.0}));
}
