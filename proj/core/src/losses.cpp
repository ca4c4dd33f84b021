#include "samlab/losses.hpp"

#include <cmath>
#include <limits>

namespace samlab {

void LossModel::check_dimension(const Vector& x) const {
  if (x.size() != dimension()) {
    throw std::invalid_argument(name() + ": expected dimension " + std::to_string(dimension()) + ", got " +
                                std::to_string(x.size()));
  }
}

SymMatrix LossModel::hessian(const Vector& x) const { return fd_hessian(*this, x); }

LossPtr LossModel::component(std::size_t k) const {
  if (k != 0) throw std::out_of_range(name() + ": component index out of range");
  return shared_from_this();
}

ValueAndGrad evaluate(const LossModel& loss, const Vector& x) {
  if (x.size() != loss.dimension()) throw std::invalid_argument("evaluate: dimension mismatch");
  ValueAndGrad out{loss.value(x), loss.grad(x)};
  if (!std::isfinite(out.value) || !out.grad.all_finite()) {
    throw NumericalError(loss.name() + ": non-finite loss or gradient at x = " + to_string(x));
  }
  return out;
}

SymMatrix hessian(const LossModel& loss, const Vector& x) {
  if (x.size() != loss.dimension()) throw std::invalid_argument("hessian: dimension mismatch");
  SymMatrix h = loss.hessian(x);
  if (!h.all_finite()) throw NumericalError(loss.name() + ": non-finite Hessian at x = " + to_string(x));
  return h;
}

double hessian_fd_step(const Vector& x) {
  return std::cbrt(std::numeric_limits<double>::epsilon()) * (1.0 + x.norm());
}

double third_fd_step(const Vector& x) {
  return std::pow(std::numeric_limits<double>::epsilon(), 0.25) * (1.0 + x.norm());
}

SymMatrix fd_hessian(const LossModel& loss, const Vector& x) {
  const std::size_t n = loss.dimension();
  const double h = hessian_fd_step(x);
  std::vector<Vector> cols;
  cols.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    Vector xp = x;
    Vector xm = x;
    xp[j] += h;
    xm[j] -= h;
    cols.push_back((loss.grad(xp) - loss.grad(xm)) / (2.0 * h));
  }
  SymMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) m.set(i, j, 0.5 * (cols[j][i] + cols[i][j]));
  }
  return m;
}

Vector third_directional(const LossModel& loss, const Vector& x, const Vector& u) {
  const double h = third_fd_step(x);
  Vector out = loss.grad(x + h * u);
  out += loss.grad(x - h * u);
  out.axpy(-2.0, loss.grad(x));
  return out / (h * h);
}

// ---------------------------------------------------------------------------

QuadraticLoss::QuadraticLoss(SymMatrix a) : a_(std::move(a)) {
  if (!a_.all_finite()) throw std::invalid_argument("QuadraticLoss: matrix has non-finite entries");
}

double QuadraticLoss::value(const Vector& x) const {
  check_dimension(x);
  return 0.5 * x.dot(a_ * x);
}

Vector QuadraticLoss::grad(const Vector& x) const {
  check_dimension(x);
  return a_ * x;
}

SymMatrix QuadraticLoss::hessian(const Vector& x) const {
  check_dimension(x);
  return a_;
}

// ---------------------------------------------------------------------------

std::string Toy4DLoss::name() const {
  switch (part_) {
    case Part::kFirst:
      return "toy4d[0]";
    case Part::kSecond:
      return "toy4d[1]";
    default:
      return "toy4d";
  }
}

double Toy4DLoss::value(const Vector& x) const {
  check_dimension(x);
  return w1() * f1(x[0], x[1]) * x[2] * x[2] + w2() * f2(x[0], x[1]) * x[3] * x[3];
}

Vector Toy4DLoss::grad(const Vector& x) const {
  check_dimension(x);
  const double x1 = x[0], x2 = x[1], x3 = x[2], x4 = x[3];
  const double a = w1(), b = w2();
  return Vector{a * 2.0 * x1 * x3 * x3 - b * 8.0 * (1.0 - x1) * x4 * x4,
                a * 12.0 * x2 * x3 * x3 - b * 2.0 * (1.0 - x2) * x4 * x4,
                a * 2.0 * f1(x1, x2) * x3,
                b * 2.0 * f2(x1, x2) * x4};
}

SymMatrix Toy4DLoss::hessian(const Vector& x) const {
  check_dimension(x);
  const double x1 = x[0], x2 = x[1], x3 = x[2], x4 = x[3];
  const double a = w1(), b = w2();
  SymMatrix h(4);
  h.set(0, 0, a * 2.0 * x3 * x3 + b * 8.0 * x4 * x4);
  h.set(1, 1, a * 12.0 * x3 * x3 + b * 2.0 * x4 * x4);
  h.set(2, 2, a * 2.0 * f1(x1, x2));
  h.set(3, 3, b * 2.0 * f2(x1, x2));
  h.set(0, 2, a * 4.0 * x1 * x3);
  h.set(1, 2, a * 24.0 * x2 * x3);
  h.set(0, 3, -b * 16.0 * (1.0 - x1) * x4);
  h.set(1, 3, -b * 4.0 * (1.0 - x2) * x4);
  return h;
}

LossPtr Toy4DLoss::component(std::size_t k) const {
  if (part_ != Part::kTotal) return LossModel::component(k);
  if (k == 0) return std::make_shared<const Toy4DLoss>(Part::kFirst);
  if (k == 1) return std::make_shared<const Toy4DLoss>(Part::kSecond);
  throw std::out_of_range("toy4d: component index out of range");
}

// ---------------------------------------------------------------------------

namespace {

double ipow(double base, unsigned e) {
  double r = 1.0;
  while (e > 0) {
    if (e & 1U) r *= base;
    base *= base;
    e >>= 1U;
  }
  return r;
}

// Product of x_i^(e_i - d_i) with d the derivative multi-index; returns the
// falling-factorial coefficient times the monomial.
double monomial_derivative(const Monomial& m, const Vector& x, std::size_t i, std::size_t j, int order) {
  double coef = m.coef;
  std::vector<unsigned> e = m.exponents;
  auto differentiate = [&](std::size_t axis) {
    if (e[axis] == 0) {
      coef = 0.0;
      return;
    }
    coef *= e[axis];
    --e[axis];
  };
  if (order >= 1) differentiate(i);
  if (order >= 2 && coef != 0.0) differentiate(j);
  if (coef == 0.0) return 0.0;
  for (std::size_t k = 0; k < e.size(); ++k) coef *= ipow(x[k], e[k]);
  return coef;
}

}  // namespace

Polynomial::Polynomial(std::size_t dim, std::vector<Monomial> terms) : dim_(dim), terms_(std::move(terms)) {
  for (const auto& t : terms_) {
    if (t.exponents.size() != dim_) throw std::invalid_argument("Polynomial: exponent vector has wrong length");
    if (!std::isfinite(t.coef)) throw std::invalid_argument("Polynomial: non-finite coefficient");
  }
}

double Polynomial::value(const Vector& x) const {
  double s = 0.0;
  for (const auto& t : terms_) s += monomial_derivative(t, x, 0, 0, 0);
  return s;
}

Vector Polynomial::grad(const Vector& x) const {
  Vector g(dim_);
  for (const auto& t : terms_)
    for (std::size_t i = 0; i < dim_; ++i) g[i] += monomial_derivative(t, x, i, 0, 1);
  return g;
}

SymMatrix Polynomial::hessian(const Vector& x) const {
  SymMatrix h(dim_);
  for (const auto& t : terms_)
    for (std::size_t i = 0; i < dim_; ++i)
      for (std::size_t j = i; j < dim_; ++j) h.add(i, j, monomial_derivative(t, x, i, j, 2));
  return h;
}

FactoredRegressionLoss::FactoredRegressionLoss(std::vector<Datum> data) : dim_(0), data_(std::move(data)) {
  if (data_.empty()) throw std::invalid_argument("FactoredRegressionLoss: needs at least one datum");
  dim_ = data_.front().feature.dimension();
  for (const auto& d : data_) {
    if (d.feature.dimension() != dim_) throw std::invalid_argument("FactoredRegressionLoss: mixed dimensions");
    if (!std::isfinite(d.label)) throw std::invalid_argument("FactoredRegressionLoss: non-finite label");
  }
}

std::string FactoredRegressionLoss::name() const {
  return "factored(M=" + std::to_string(data_.size()) + ")";
}

double FactoredRegressionLoss::value(const Vector& x) const {
  check_dimension(x);
  double s = 0.0;
  for (const auto& d : data_) {
    const double r = d.feature.value(x) - d.label;
    s += 0.5 * r * r;
  }
  return s / static_cast<double>(data_.size());
}

Vector FactoredRegressionLoss::grad(const Vector& x) const {
  check_dimension(x);
  Vector g(dim_);
  for (const auto& d : data_) g.axpy(d.feature.value(x) - d.label, d.feature.grad(x));
  return g / static_cast<double>(data_.size());
}

SymMatrix FactoredRegressionLoss::hessian(const Vector& x) const {
  check_dimension(x);
  SymMatrix h(dim_);
  for (const auto& d : data_) {
    const double r = d.feature.value(x) - d.label;
    h += SymMatrix::outer(d.feature.grad(x), kSquaredLossCurvature);
    h += r * d.feature.hessian(x);
  }
  return (1.0 / static_cast<double>(data_.size())) * h;
}

LossPtr FactoredRegressionLoss::component(std::size_t k) const {
  if (data_.size() == 1) return LossModel::component(k);
  if (k >= data_.size()) throw std::out_of_range("factored: component index out of range");
  return std::make_shared<const FactoredRegressionLoss>(std::vector<Datum>{data_[k]});
}

}  // namespace samlab
