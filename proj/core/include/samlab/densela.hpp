#pragma once

// Small dense linear algebra: vectors, symmetric matrices and a Jacobi
// eigensolver. Dimensions in this project stay below ~20, so everything is
// stored densely and copied freely.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace samlab {

class Vector {
 public:
  Vector() = default;
  explicit Vector(std::size_t dim, double fill = 0.0) : data_(dim, fill) {}
  Vector(std::initializer_list<double> values) : data_(values) {}
  explicit Vector(std::vector<double> values) : data_(std::move(values)) {}

  static Vector unit(std::size_t dim, std::size_t axis);

  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  std::span<const double> values() const { return data_; }
  std::span<double> values() { return data_; }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  double dot(const Vector& other) const;
  double norm() const;
  double squared_norm() const;
  bool all_finite() const;

  Vector& operator+=(const Vector& other);
  Vector& operator-=(const Vector& other);
  Vector& operator*=(double s);
  /// this += s * other
  Vector& axpy(double s, const Vector& other);

  bool operator==(const Vector& other) const = default;

 private:
  std::vector<double> data_;
};

Vector operator+(Vector a, const Vector& b);
Vector operator-(Vector a, const Vector& b);
Vector operator-(Vector a);
Vector operator*(double s, Vector a);
Vector operator*(Vector a, double s);
Vector operator/(Vector a, double s);

std::string to_string(const Vector& v);

/// Dense symmetric matrix. Writes through set() keep both triangles equal, so
/// symmetry is exact by construction.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t dim) : dim_(dim), data_(dim * dim, 0.0) {}

  static SymMatrix identity(std::size_t dim);
  static SymMatrix diagonal(std::span<const double> diag);
  static SymMatrix diagonal(std::initializer_list<double> diag);
  /// Builds from row-major entries, averaging the two triangles.
  static SymMatrix from_rows(const std::vector<std::vector<double>>& rows);
  /// a * u u^T
  static SymMatrix outer(const Vector& u, double scale = 1.0);

  std::size_t dim() const { return dim_; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * dim_ + j]; }
  void set(std::size_t i, std::size_t j, double value);
  void add(std::size_t i, std::size_t j, double value);

  Vector operator*(const Vector& x) const;
  SymMatrix& operator+=(const SymMatrix& other);
  SymMatrix& operator-=(const SymMatrix& other);
  SymMatrix& operator*=(double s);

  double trace() const;
  double frobenius_norm() const;
  bool all_finite() const;
  /// Computes A*B for symmetric A, B and returns the symmetric part. Used for
  /// products that are symmetric in exact arithmetic (e.g. P*P).
  SymMatrix symmetric_product(const SymMatrix& other) const;
  /// Plain (possibly non-symmetric) product as row-major entries.
  std::vector<double> product(const SymMatrix& other) const;

 private:
  std::size_t dim_ = 0;
  std::vector<double> data_;
};

SymMatrix operator+(SymMatrix a, const SymMatrix& b);
SymMatrix operator-(SymMatrix a, const SymMatrix& b);
SymMatrix operator*(double s, SymMatrix a);

/// Frobenius norm of a row-major square matrix.
double frobenius_norm(std::span<const double> row_major);

inline constexpr double kDefaultRankTol = 1e-8;

struct EigenDecomposition {
  /// Non-increasing.
  std::vector<double> values;
  /// vectors[i] pairs with values[i]. The first entry with magnitude above
  /// 1e-12 is non-negative.
  std::vector<Vector> vectors;
  double rank_tol = kDefaultRankTol;

  std::size_t dim() const { return values.size(); }
  SymMatrix reconstruct() const;
};

/// Cyclic Jacobi eigendecomposition. Throws std::invalid_argument on
/// non-finite input.
EigenDecomposition eig_sym(const SymMatrix& a);

/// Number of eigenvalues with |lambda| > rel_tol * max(|lambda_1|, |lambda_D|).
std::size_t numerical_rank(const EigenDecomposition& e, double rel_tol = kDefaultRankTol);

/// Sum of v_i v_i^T over the given zero-based indices.
SymMatrix spectral_projector(const EigenDecomposition& e, std::span<const std::size_t> indices);

/// Zero-based index range [first, last).
std::vector<std::size_t> index_range(std::size_t first, std::size_t last);

}  // namespace samlab
