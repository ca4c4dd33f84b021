#pragma once

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "samlab/densela.hpp"

namespace samlab {

/// Raised when a loss evaluation or an optimizer update produces non-finite
/// numbers.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A twice-differentiable loss L : R^D -> R, optionally given as the mean of
/// M per-datum components L = (1/M) sum_k L_k.
///
/// Implementations override value() and grad(). hessian() defaults to central
/// differences of grad(); models with closed forms override it.
class LossModel : public std::enable_shared_from_this<LossModel> {
 public:
  virtual ~LossModel() = default;

  virtual std::size_t dimension() const = 0;
  virtual double value(const Vector& x) const = 0;
  virtual Vector grad(const Vector& x) const = 0;
  virtual SymMatrix hessian(const Vector& x) const;
  virtual std::string name() const = 0;

  /// 1 for deterministic losses.
  virtual std::size_t component_count() const { return 1; }
  /// Zero-based. For M == 1 the loss itself is returned, which requires the
  /// model to be owned by a shared_ptr.
  virtual std::shared_ptr<const LossModel> component(std::size_t k) const;

 protected:
  LossModel() = default;
  LossModel(const LossModel&) = default;
  LossModel& operator=(const LossModel&) = default;

  void check_dimension(const Vector& x) const;
};

using LossPtr = std::shared_ptr<const LossModel>;

struct ValueAndGrad {
  double value = 0.0;
  Vector grad;
};

/// value and gradient; throws NumericalError naming x on non-finite results.
ValueAndGrad evaluate(const LossModel& loss, const Vector& x);

/// Model Hessian (analytic when available), symmetrized, finiteness-checked.
SymMatrix hessian(const LossModel& loss, const Vector& x);

/// Central-difference Hessian of grad() with the step h2 below.
SymMatrix fd_hessian(const LossModel& loss, const Vector& x);

/// d^2(grad L)(x)[u, u] by central differences of the gradient with step h3.
Vector third_directional(const LossModel& loss, const Vector& x, const Vector& u);

/// eps^(1/3) (1 + |x|)
double hessian_fd_step(const Vector& x);
/// eps^(1/4) (1 + |x|)
double third_fd_step(const Vector& x);

// ---------------------------------------------------------------------------

/// L(x) = x^T A x / 2 for positive semi-definite A.
class QuadraticLoss final : public LossModel {
 public:
  explicit QuadraticLoss(SymMatrix a);

  std::size_t dimension() const override { return a_.dim(); }
  double value(const Vector& x) const override;
  Vector grad(const Vector& x) const override;
  SymMatrix hessian(const Vector& x) const override;
  std::string name() const override { return "quadratic"; }

  const SymMatrix& matrix() const { return a_; }

 private:
  SymMatrix a_;
};

/// The 4D toy L(x) = F1(x1,x2) x3^2 + F2(x1,x2) x4^2 with
///   F1 = x1^2 + 6 x2^2 + 8,   F2 = 4 (1 - x1)^2 + (1 - x2)^2 + 1.
///
/// The zero-loss manifold is {x3 = x4 = 0}; there the Hessian is
/// diag(0, 0, 2 F1, 2 F2). The stochastic split uses components 2 F1 x3^2 and
/// 2 F2 x4^2 so that their mean is L.
class Toy4DLoss final : public LossModel {
 public:
  enum class Part { kTotal, kFirst, kSecond };

  explicit Toy4DLoss(Part part = Part::kTotal) : part_(part) {}

  static double f1(double x1, double x2) { return x1 * x1 + 6.0 * x2 * x2 + 8.0; }
  static double f2(double x1, double x2) {
    return 4.0 * (1.0 - x1) * (1.0 - x1) + (1.0 - x2) * (1.0 - x2) + 1.0;
  }

  std::size_t dimension() const override { return 4; }
  double value(const Vector& x) const override;
  Vector grad(const Vector& x) const override;
  SymMatrix hessian(const Vector& x) const override;
  std::string name() const override;

  std::size_t component_count() const override { return part_ == Part::kTotal ? 2 : 1; }
  LossPtr component(std::size_t k) const override;

 private:
  // Weights on the F1 x3^2 and F2 x4^2 terms.
  double w1() const { return part_ == Part::kTotal ? 1.0 : (part_ == Part::kFirst ? 2.0 : 0.0); }
  double w2() const { return part_ == Part::kTotal ? 1.0 : (part_ == Part::kSecond ? 2.0 : 0.0); }

  Part part_;
};

/// One monomial coef * prod_i x_i^exponents[i].
struct Monomial {
  double coef = 0.0;
  std::vector<unsigned> exponents;
};

/// Polynomial feature map f : R^D -> R with analytic derivatives.
class Polynomial {
 public:
  Polynomial(std::size_t dim, std::vector<Monomial> terms);

  std::size_t dimension() const { return dim_; }
  const std::vector<Monomial>& terms() const { return terms_; }

  double value(const Vector& x) const;
  Vector grad(const Vector& x) const;
  SymMatrix hessian(const Vector& x) const;

 private:
  std::size_t dim_;
  std::vector<Monomial> terms_;
};

/// Per-datum squared loss L_k(x) = (f_k(x) - y_k)^2 / 2, L = mean_k L_k.
class FactoredRegressionLoss final : public LossModel {
 public:
  struct Datum {
    Polynomial feature;
    double label = 0.0;
  };

  explicit FactoredRegressionLoss(std::vector<Datum> data);

  std::size_t dimension() const override { return dim_; }
  double value(const Vector& x) const override;
  Vector grad(const Vector& x) const override;
  SymMatrix hessian(const Vector& x) const override;
  std::string name() const override;

  std::size_t component_count() const override { return data_.size(); }
  LossPtr component(std::size_t k) const override;

  const std::vector<Datum>& data() const { return data_; }

 private:
  std::size_t dim_;
  std::vector<Datum> data_;
};

/// Second derivative of the per-datum loss in the prediction (1 for squared loss).
inline constexpr double kSquaredLossCurvature = 1.0;

}  // namespace samlab
