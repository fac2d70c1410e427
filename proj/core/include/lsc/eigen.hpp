#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "lsc/matrix.hpp"

namespace lsc {

struct Eigenvalues {
  std::vector<std::complex<double>> values;
  std::size_t iterations = 0;  // QR sweeps spent
};

// Full dense eigenvalue solve: balance, Householder reduction to upper
// Hessenberg, Francis double-shift QR. Square input required. Throws
// NumericalError carrying the sweep count if 100*n sweeps do not converge.
Eigenvalues eigenvalues(const Matrix& a);

// Largest eigenvalue modulus.
double spectral_radius(const Matrix& a);

struct DominantPair {
  std::complex<double> value;
  std::vector<std::complex<double>> right;  // A x = lambda x
  std::vector<std::complex<double>> left;   // y^H A = lambda y^H
  // True when the top modulus is shared beyond one eigenvalue or one
  // conjugate pair (within 1e-8 relative), making d rho / d M ill-defined.
  bool degenerate = false;
};

DominantPair dominant_eigen_pair(const Matrix& a);

struct RadiusGradient {
  Matrix grad;       // d spectral_radius / d entries
  bool degenerate;   // fell back to central differences
};

// Adjoint gradient Re(conj(lambda) * conj(y_i) x_j / y^H x) / rho; central
// finite differences on the entries when the dominant eigenvalue is
// degenerate or the radius is ~0.
RadiusGradient spectral_radius_gradient(const Matrix& a);

}  // namespace lsc
