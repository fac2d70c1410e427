#include "lsc/init.hpp"

#include <cmath>

#include "lsc/errors.hpp"

namespace lsc {

namespace {

Matrix gaussian_draw(std::size_t rows, std::size_t cols, RandomSource& rng, double std) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rng.normal(0.0, std);
  return m;
}

Matrix uniform_draw(std::size_t rows, std::size_t cols, RandomSource& rng, double limit) {
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j) m(i, j) = rng.uniform(-limit, limit);
  return m;
}

// Thin Householder QR; returns Q (rows x cols, rows >= cols) with the
// R-diagonal sign correction so the distribution is Haar.
Matrix qr_orthonormal(Matrix a) {
  const std::size_t m = a.rows(), n = a.cols();
  std::vector<Vec> vs;
  Vec betas;
  Vec diag_sign(n, 1.0);
  for (std::size_t k = 0; k < n; ++k) {
    Vec v(m, 0.0);
    double norm = 0.0;
    for (std::size_t i = k; i < m; ++i) {
      v[i] = a(i, k);
      norm += v[i] * v[i];
    }
    norm = std::sqrt(norm);
    if (norm == 0.0) {
      vs.push_back(Vec(m, 0.0));
      betas.push_back(0.0);
      continue;
    }
    const double alpha = (v[k] >= 0) ? -norm : norm;
    v[k] -= alpha;
    double vtv = 0.0;
    for (std::size_t i = k; i < m; ++i) vtv += v[i] * v[i];
    const double beta = vtv == 0.0 ? 0.0 : 2.0 / vtv;
    for (std::size_t j = k; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = k; i < m; ++i) s += v[i] * a(i, j);
      s *= beta;
      for (std::size_t i = k; i < m; ++i) a(i, j) -= s * v[i];
    }
    diag_sign[k] = (a(k, k) >= 0) ? 1.0 : -1.0;
    vs.push_back(std::move(v));
    betas.push_back(beta);
  }
  // Accumulate Q by applying reflectors to the leading identity columns.
  Matrix q(m, n);
  for (std::size_t j = 0; j < n; ++j) q(j, j) = 1.0;
  for (std::size_t k = n; k-- > 0;) {
    if (betas[k] == 0.0) continue;
    const Vec& v = vs[k];
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = k; i < m; ++i) s += v[i] * q(i, j);
      s *= betas[k];
      for (std::size_t i = k; i < m; ++i) q(i, j) -= s * v[i];
    }
  }
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < m; ++i) q(i, j) *= diag_sign[j];
  return q;
}

}  // namespace

Matrix init_matrix(InitScheme scheme, std::size_t rows, std::size_t cols, RandomSource& rng,
                   double gaussian_std) {
  if (rows == 0 || cols == 0) throw ConfigurationError("init_matrix: zero dimension");
  const double fan_in = static_cast<double>(cols);
  const double fan_out = static_cast<double>(rows);
  switch (scheme) {
    case InitScheme::GlorotUniform:
      return uniform_draw(rows, cols, rng, std::sqrt(6.0 / (fan_in + fan_out)));
    case InitScheme::GlorotNormal:
      return gaussian_draw(rows, cols, rng, std::sqrt(2.0 / (fan_in + fan_out)));
    case InitScheme::HeUniform:
      return uniform_draw(rows, cols, rng, std::sqrt(6.0 / fan_in));
    case InitScheme::HeNormal:
      return gaussian_draw(rows, cols, rng, std::sqrt(2.0 / fan_in));
    case InitScheme::Orthogonal: {
      if (rows != cols) throw DimensionError("init_matrix: Orthogonal requires a square shape");
      return qr_orthonormal(gaussian_draw(rows, cols, rng, 1.0));
    }
    case InitScheme::CenteredGaussian:
      if (!(gaussian_std > 0.0)) throw ConfigurationError("init_matrix: std must be positive");
      return gaussian_draw(rows, cols, rng, gaussian_std);
    case InitScheme::Zeros:
      return Matrix(rows, cols);
  }
  throw ConfigurationError("init_matrix: unknown scheme");
}

}  // namespace lsc
