#include <gtest/gtest.h>

#include <cmath>

#include "samlab/manifold.hpp"

using namespace samlab;

namespace {

// fixed-step classical RK4 on dX/dtau = -grad L(X)
Vector rk4_flow(const LossModel& loss, Vector x, double h, double tol) {
  for (int i = 0; i < 10'000'000 && loss.grad(x).norm() > tol; ++i) {
    const Vector k1 = -1.0 * loss.grad(x);
    const Vector k2 = -1.0 * loss.grad(x + 0.5 * h * k1);
    const Vector k3 = -1.0 * loss.grad(x + 0.5 * h * k2);
    const Vector k4 = -1.0 * loss.grad(x + h * k3);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return x;
}

double lambda1(const LossModel& loss, const Vector& p) { return eig_sym(hessian(loss, p)).values[0]; }

}  // namespace

TEST(Phi, QuadraticGoesToZero) {
  const QuadraticLoss q(SymMatrix::diagonal({2.0, 1.0, 0.5}));
  const auto mp = phi(q, Vector{0.3, -0.4, 0.5});
  EXPECT_TRUE(mp.converged);
  EXPECT_LE(mp.p.norm(), 1e-9);
  EXPECT_EQ(mp.rank, 3u);
}

TEST(Phi, ManifoldPointIsFixed) {
  const Vector p{0.25, 0.75, 0.0, 0.0};
  const auto mp = phi(Toy4DLoss(), p);
  EXPECT_EQ(mp.p, p);
  EXPECT_EQ(mp.rank, 2u);
}

TEST(Phi, MatchesFineRk4) {
  const Toy4DLoss toy;
  const Vector x{0.5, 0.5, 0.1, 0.0};
  const Vector oracle = rk4_flow(toy, x, 1e-4, 1e-12);
  PhiOptions opts;
  opts.keep_loss_history = true;
  const auto mp = phi(toy, x, opts);
  EXPECT_LE((mp.p - oracle).norm(), 1e-6);
  EXPECT_LE(mp.residual_grad_norm, opts.tol);
  ASSERT_GT(mp.loss_history.size(), 1u);
  for (std::size_t i = 1; i < mp.loss_history.size(); ++i)
    EXPECT_LE(mp.loss_history[i], mp.loss_history[i - 1] + 1e-12);
}

TEST(Phi, Idempotent) {
  const Toy4DLoss toy;
  const auto a = phi(toy, Vector{0.2, 0.9, 0.15, -0.1});
  const auto b = phi(toy, a.p);
  EXPECT_LE((b.p - a.p).norm(), 10.0 * PhiOptions{}.tol);
}

TEST(Phi, NonConvergentOutsideAttractionSet) {
  // concave direction: the flow runs away
  const QuadraticLoss q(SymMatrix::diagonal({-1.0}));
  PhiOptions opts;
  opts.max_steps = 2000;
  EXPECT_THROW(phi(q, Vector{0.1}, opts), NonConvergentError);
}

TEST(Phi, AnnihilationAndTangentDerivative) {
  const QuadraticLoss q(SymMatrix::diagonal({2.0, 1.0}));
  // Phi = 0 up to the flow tolerance, so the difference quotient is O(tol / h)
  EXPECT_LE(phi_annihilation_residual(q, Vector{0.3, 0.1}, 1e-4), 1e-6);

  const Toy4DLoss toy;
  for (const Vector& x : {Vector{0.5, 0.5, 0.02, 0.01}, Vector{0.1, 0.9, -0.03, 0.04}})
    EXPECT_LE(phi_annihilation_residual(toy, x, 1e-4), 1e-3);

  const double d = phi_directional_derivative(toy, Vector{0.5, 0.5, 0.0, 0.0}, Vector::unit(4, 0), 1e-4);
  EXPECT_NEAR(d, 1.0, 1e-6);
}

TEST(Phi, TangentProjectorAnnihilatesHessian) {
  const Toy4DLoss toy;
  for (double a : {0.0, 0.4, 1.0}) {
    const auto mp = phi(toy, Vector{a, 1.0 - a, 0.0, 0.0});
    const auto prod = mp.tangent_projector.product(hessian(toy, mp.p));
    EXPECT_LE(frobenius_norm(prod), 1e-6 * mp.lambda(0));
  }
}

TEST(GradLambda1, Toy) {
  const Toy4DLoss toy;
  for (const auto& [a, b] : {std::pair{1.0, 1.0}, std::pair{0.3, 0.6}, std::pair{0.0, 0.0}}) {
    const Vector p{a, b, 0.0, 0.0};
    const Vector g = grad_lambda1(toy, p);
    EXPECT_NEAR(g[0], 4.0 * a, 1e-6);
    EXPECT_NEAR(g[1], 24.0 * b, 1e-6);
    EXPECT_NEAR(g[2], 0.0, 1e-6);
    EXPECT_NEAR(g[3], 0.0, 1e-6);
    // finite differences of lambda_1 along the manifold
    const double h = 1e-5;
    EXPECT_NEAR(g[0], (lambda1(toy, Vector{a + h, b, 0, 0}) - lambda1(toy, Vector{a - h, b, 0, 0})) / (2 * h), 1e-5);
    EXPECT_NEAR(g[1], (lambda1(toy, Vector{a, b + h, 0, 0}) - lambda1(toy, Vector{a, b - h, 0, 0})) / (2 * h), 1e-5);
  }
}

TEST(GradLambda1, QuadraticAndDegenerate) {
  EXPECT_LE(grad_lambda1(QuadraticLoss(SymMatrix::diagonal({2.0, 1.0})), Vector{0.3, 0.2}).norm(), 1e-8);
  EXPECT_THROW(grad_lambda1(QuadraticLoss(SymMatrix::identity(2)), Vector{0.3, 0.2}), EigengapError);
}

TEST(GradTrace, Toy) {
  const Toy4DLoss toy;
  const Vector g = grad_trace(toy, Vector{0.5, 0.5, 0.0, 0.0});
  EXPECT_NEAR(g[0], -6.0, 1e-6);
  EXPECT_NEAR(g[1], 10.0, 1e-6);
  EXPECT_LE(grad_trace(toy, Vector{0.8, 1.0 / 7.0, 0.0, 0.0}).norm(), 1e-6);
  EXPECT_LE(grad_trace(QuadraticLoss(SymMatrix::diagonal({2.0, 1.0})), Vector{0.3, 0.2}).norm(), 1e-8);
}

TEST(Flow, TraceFlowEndpoint) {
  const Toy4DLoss toy;
  FlowOptions opts;
  opts.horizon = 3.0;
  const auto sol = riemannian_flow(toy, Vector{0.5, 0.5, 0.01, 0.01}, FlowKind::kTrace, opts);
  ASSERT_TRUE(sol.completed) << sol.abort_reason;
  const Vector end = sol.samples.back().x;
  EXPECT_NEAR(end[0], 0.8, 1e-3);
  EXPECT_NEAR(end[1], 1.0 / 7.0, 1e-3);
  EXPECT_LE(grad_trace(toy, end).norm(), 1e-2);
  for (std::size_t i = 1; i < sol.samples.size(); ++i)
    EXPECT_LE(sol.samples[i].potential, sol.samples[i - 1].potential + 1e-9);
}

TEST(Flow, Lambda1FlowEndpointAndManifold) {
  const Toy4DLoss toy;
  FlowOptions opts;
  opts.horizon = 6.0;
  const auto sol = riemannian_flow(toy, Vector{0.5, 0.5, 0.01, 0.01}, FlowKind::kLambda1, opts);
  ASSERT_TRUE(sol.completed) << sol.abort_reason;
  EXPECT_EQ(sol.samples.front().x, phi(toy, Vector{0.5, 0.5, 0.01, 0.01}).p);
  EXPECT_EQ(sol.samples.front().tau, 0.0);
  EXPECT_LE(sol.samples.back().x.norm(), 1e-3);
  for (std::size_t i = 1; i < sol.samples.size(); ++i) {
    EXPECT_GT(sol.samples[i].tau, sol.samples[i - 1].tau);
    EXPECT_LE(sol.samples[i].potential, sol.samples[i - 1].potential + 1e-9);
    if (sol.samples[i].reprojected) EXPECT_LE(toy.grad(sol.samples[i].x).norm(), 10.0 * opts.phi.tol);
  }
}

TEST(Flow, ZeroFieldIsConstant) {
  // manifold {x1 = 0} with constant Hessian
  const QuadraticLoss q(SymMatrix::diagonal({2.0, 0.0}));
  FlowOptions opts;
  opts.horizon = 0.5;
  for (FlowKind k : {FlowKind::kLambda1, FlowKind::kTrace}) {
    const auto sol = riemannian_flow(q, Vector{0.3, 0.7}, k, opts);
    ASSERT_TRUE(sol.completed);
    for (const auto& s : sol.samples) EXPECT_LE((s.x - Vector{0.0, 0.7}).norm(), 1e-9);
  }
}

TEST(Flow, InterpolationClamps) {
  FlowSolution sol;
  sol.samples = {{0.0, Vector{0.0}, 0.0, false}, {1.0, Vector{2.0}, 0.0, false}};
  EXPECT_EQ(sol.at(0.25)[0], 0.5);
  EXPECT_EQ(sol.at(-1.0)[0], 0.0);
  EXPECT_EQ(sol.at(5.0)[0], 2.0);
  EXPECT_THROW(riemannian_flow(Toy4DLoss(), Vector(4), FlowKind::kTrace, FlowOptions{1.0, 0.0}), std::invalid_argument);
}
