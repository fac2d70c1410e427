#pragma once

#include <cstddef>

#include "lsc/matrix.hpp"
#include "lsc/rng.hpp"

namespace lsc {

enum class InitScheme {
  GlorotUniform,
  GlorotNormal,
  HeUniform,
  HeNormal,
  Orthogonal,
  CenteredGaussian,
  Zeros,
};

// rows = fan_out, cols = fan_in. Orthogonal uses the QR of a standard
// Gaussian draw with the R-diagonal sign correction and requires a square
// shape. CenteredGaussian uses `gaussian_std` and ignores the fan sizes.
Matrix init_matrix(InitScheme scheme, std::size_t rows, std::size_t cols, RandomSource& rng,
                   double gaussian_std = 1.0);

}  // namespace lsc
