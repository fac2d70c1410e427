#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

namespace lsc {

using Vec = std::vector<double>;

// Dense row-major matrix of 64-bit floats. Checked constructors reject
// non-finite entries; element writes through operator() are unchecked.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols);  // zero-filled
  Matrix(std::size_t rows, std::size_t cols, Vec data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0 || cols_ == 0; }
  bool square() const { return rows_ == cols_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  const Vec& data() const { return data_; }
  Vec& data() { return data_; }

  Matrix transpose() const;
  Matrix operator+(const Matrix& other) const;
  Matrix operator-(const Matrix& other) const;
  Matrix operator*(const Matrix& other) const;
  Matrix operator*(double scalar) const;
  Matrix& operator+=(const Matrix& other);
  Matrix& operator*=(double scalar);

  Vec apply(const Vec& x) const;            // A x
  Vec apply_transpose(const Vec& x) const;  // A^T x

  // Allocation-free variants for inner loops; `out` is resized as needed and
  // must not alias `x`.
  void apply_into(const Vec& x, Vec& out) const;
  void apply_transpose_into(const Vec& x, Vec& out) const;

  // Leading principal square block of side min(rows, cols). Radii of
  // rectangular transition maps are defined on the zero-padded square
  // embedding, whose nonzero spectrum equals this block's.
  Matrix leading_square() const;

  double max_abs() const;
  bool all_finite() const;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  Vec data_;
};

Matrix operator*(double scalar, const Matrix& m);

// Induced operator norm for p in {1, 2, inf}; pass 0 for the infinity norm.
// p=2 is the largest singular value computed as sqrt(rho(A^T A)).
double induced_norm(const Matrix& m, int p);

double frobenius_norm(const Matrix& m);

// LU with partial pivoting; square input required.
double determinant(const Matrix& m);

class RandomSource;

// A^T A for a standard Gaussian draw A; positive semidefinite by construction.
Matrix random_psd(std::size_t n, RandomSource& rng);

// Vector helpers shared by the cell and training code.
double dot(const Vec& a, const Vec& b);
Vec hadamard(const Vec& a, const Vec& b);
Vec add(const Vec& a, const Vec& b);
Vec sub(const Vec& a, const Vec& b);
Vec scale(const Vec& a, double s);
double norm2(const Vec& a);

}  // namespace lsc
