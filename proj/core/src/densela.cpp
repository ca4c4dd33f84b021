#include "samlab/densela.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace samlab {

Vector Vector::unit(std::size_t dim, std::size_t axis) {
  if (axis >= dim) throw std::out_of_range("Vector::unit: axis out of range");
  Vector v(dim);
  v[axis] = 1.0;
  return v;
}

double Vector::dot(const Vector& other) const {
  if (other.size() != size()) throw std::invalid_argument("Vector::dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < data_.size(); ++i) s += data_[i] * other.data_[i];
  return s;
}

double Vector::squared_norm() const { return dot(*this); }

double Vector::norm() const {
  // Scaled to avoid overflow/underflow for extreme magnitudes.
  double scale = 0.0;
  for (double x : data_) scale = std::max(scale, std::abs(x));
  if (scale == 0.0 || !std::isfinite(scale)) return scale;
  double s = 0.0;
  for (double x : data_) {
    const double r = x / scale;
    s += r * r;
  }
  return scale * std::sqrt(s);
}

bool Vector::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

Vector& Vector::operator+=(const Vector& other) { return axpy(1.0, other); }
Vector& Vector::operator-=(const Vector& other) { return axpy(-1.0, other); }

Vector& Vector::operator*=(double s) {
  for (double& x : data_) x *= s;
  return *this;
}

Vector& Vector::axpy(double s, const Vector& other) {
  if (other.size() != size()) throw std::invalid_argument("Vector: dimension mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * other.data_[i];
  return *this;
}

Vector operator+(Vector a, const Vector& b) { return a += b; }
Vector operator-(Vector a, const Vector& b) { return a -= b; }
Vector operator-(Vector a) { return a *= -1.0; }
Vector operator*(double s, Vector a) { return a *= s; }
Vector operator*(Vector a, double s) { return a *= s; }
Vector operator/(Vector a, double s) { return a *= 1.0 / s; }

std::string to_string(const Vector& v) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ')';
  return os.str();
}

// ---------------------------------------------------------------------------

SymMatrix SymMatrix::identity(std::size_t dim) {
  SymMatrix m(dim);
  for (std::size_t i = 0; i < dim; ++i) m.set(i, i, 1.0);
  return m;
}

SymMatrix SymMatrix::diagonal(std::span<const double> diag) {
  SymMatrix m(diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m.set(i, i, diag[i]);
  return m;
}

SymMatrix SymMatrix::diagonal(std::initializer_list<double> diag) {
  return diagonal(std::span<const double>(diag.begin(), diag.size()));
}

SymMatrix SymMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t n = rows.size();
  SymMatrix m(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rows[i].size() != n) throw std::invalid_argument("SymMatrix::from_rows: matrix is not square");
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) m.set(i, j, 0.5 * (rows[i][j] + rows[j][i]));
  }
  return m;
}

SymMatrix SymMatrix::outer(const Vector& u, double scale) {
  SymMatrix m(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    for (std::size_t j = i; j < u.size(); ++j) m.set(i, j, scale * u[i] * u[j]);
  }
  return m;
}

void SymMatrix::set(std::size_t i, std::size_t j, double value) {
  data_[i * dim_ + j] = value;
  data_[j * dim_ + i] = value;
}

void SymMatrix::add(std::size_t i, std::size_t j, double value) {
  data_[i * dim_ + j] += value;
  if (i != j) data_[j * dim_ + i] += value;
}

Vector SymMatrix::operator*(const Vector& x) const {
  if (x.size() != dim_) throw std::invalid_argument("SymMatrix * Vector: dimension mismatch");
  Vector y(dim_);
  for (std::size_t i = 0; i < dim_; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < dim_; ++j) s += data_[i * dim_ + j] * x[j];
    y[i] = s;
  }
  return y;
}

SymMatrix& SymMatrix::operator+=(const SymMatrix& other) {
  if (other.dim_ != dim_) throw std::invalid_argument("SymMatrix: dimension mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

SymMatrix& SymMatrix::operator-=(const SymMatrix& other) {
  if (other.dim_ != dim_) throw std::invalid_argument("SymMatrix: dimension mismatch");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

SymMatrix& SymMatrix::operator*=(double s) {
  for (double& x : data_) x *= s;
  return *this;
}

double SymMatrix::trace() const {
  double t = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) t += data_[i * dim_ + i];
  return t;
}

double SymMatrix::frobenius_norm() const { return samlab::frobenius_norm(data_); }

bool SymMatrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

std::vector<double> SymMatrix::product(const SymMatrix& other) const {
  if (other.dim_ != dim_) throw std::invalid_argument("SymMatrix: dimension mismatch");
  std::vector<double> out(dim_ * dim_, 0.0);
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t k = 0; k < dim_; ++k) {
      const double a = data_[i * dim_ + k];
      for (std::size_t j = 0; j < dim_; ++j) out[i * dim_ + j] += a * other.data_[k * dim_ + j];
    }
  }
  return out;
}

SymMatrix SymMatrix::symmetric_product(const SymMatrix& other) const {
  const auto p = product(other);
  SymMatrix m(dim_);
  for (std::size_t i = 0; i < dim_; ++i) {
    for (std::size_t j = i; j < dim_; ++j) m.set(i, j, 0.5 * (p[i * dim_ + j] + p[j * dim_ + i]));
  }
  return m;
}

SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
SymMatrix operator-(SymMatrix a, const SymMatrix& b) { return a -= b; }
SymMatrix operator*(double s, SymMatrix a) { return a *= s; }

double frobenius_norm(std::span<const double> row_major) {
  double s = 0.0;
  for (double x : row_major) s += x * x;
  return std::sqrt(s);
}

// ---------------------------------------------------------------------------

SymMatrix EigenDecomposition::reconstruct() const {
  const std::size_t n = dim();
  SymMatrix m(n);
  for (std::size_t k = 0; k < n; ++k) m += SymMatrix::outer(vectors[k], values[k]);
  return m;
}

namespace {

void apply_sign_convention(Vector& v) {
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) > 1e-12) {
      if (v[i] < 0.0) v *= -1.0;
      return;
    }
  }
}

}  // namespace

EigenDecomposition eig_sym(const SymMatrix& input) {
  if (!input.all_finite()) throw std::invalid_argument("eig_sym: matrix has non-finite entries");
  const std::size_t n = input.dim();

  // Working copies, row-major.
  std::vector<double> a(n * n);
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) a[i * n + j] = input(i, j);
    v[i * n + i] = 1.0;
  }
  auto at = [&](std::size_t i, std::size_t j) -> double& { return a[i * n + j]; };

  const double scale = std::max(input.frobenius_norm(), 1e-300);
  constexpr int kMaxSweeps = 100;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += at(i, j) * at(i, j);
    if (std::sqrt(off) <= 1e-17 * scale) break;

    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = at(p, q);
        if (apq == 0.0) continue;
        const double app = at(p, p);
        const double aqq = at(q, q);
        // Rotation angle from the classical stable formulas.
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (std::size_t k = 0; k < n; ++k) {
          const double akp = at(k, p);
          const double akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = at(p, k);
          const double aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
        at(p, q) = 0.0;
        at(q, p) = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v[k * n + p];
          const double vkq = v[k * n + q];
          v[k * n + p] = c * vkp - s * vkq;
          v[k * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t l, std::size_t r) { return at(l, l) > at(r, r); });

  EigenDecomposition e;
  e.values.reserve(n);
  e.vectors.reserve(n);
  for (std::size_t idx : order) {
    e.values.push_back(at(idx, idx));
    Vector col(n);
    for (std::size_t k = 0; k < n; ++k) col[k] = v[k * n + idx];
    apply_sign_convention(col);
    e.vectors.push_back(std::move(col));
  }
  return e;
}

std::size_t numerical_rank(const EigenDecomposition& e, double rel_tol) {
  if (!(rel_tol > 0.0 && rel_tol < 1.0)) throw std::invalid_argument("numerical_rank: rel_tol must lie in (0, 1)");
  if (e.values.empty()) return 0;
  const double top = std::max(std::abs(e.values.front()), std::abs(e.values.back()));
  const double threshold = rel_tol * top;
  return static_cast<std::size_t>(
      std::count_if(e.values.begin(), e.values.end(), [&](double l) { return std::abs(l) > threshold; }));
}

SymMatrix spectral_projector(const EigenDecomposition& e, std::span<const std::size_t> indices) {
  SymMatrix p(e.dim());
  for (std::size_t idx : indices) {
    if (idx >= e.dim()) throw std::out_of_range("spectral_projector: eigen index out of range");
    p += SymMatrix::outer(e.vectors[idx]);
  }
  return p;
}

std::vector<std::size_t> index_range(std::size_t first, std::size_t last) {
  std::vector<std::size_t> out;
  for (std::size_t i = first; i < last; ++i) out.push_back(i);
  return out;
}

}  // namespace samlab
