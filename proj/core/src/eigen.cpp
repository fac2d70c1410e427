#include "lsc/eigen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lsc/errors.hpp"

namespace lsc {

namespace {

using Complex = std::complex<double>;

// EISPACK-style balancing by powers of two; exact similarity in binary fp.
void balance(std::vector<double>& h, std::size_t n) {
  constexpr double radix = 2.0;
  bool done = false;
  while (!done) {
    done = true;
    for (std::size_t i = 0; i < n; ++i) {
      double c = 0.0, r = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::fabs(h[j * n + i]);
        r += std::fabs(h[i * n + j]);
      }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / radix;
      double f = 1.0;
      const double s = c + r;
      while (c < g) {
        f *= radix;
        c *= radix * radix;
      }
      g = r * radix;
      while (c >= g) {
        f /= radix;
        c /= radix * radix;
      }
      if ((c + r) / f < 0.95 * s) {
        done = false;
        const double ginv = 1.0 / f;
        for (std::size_t j = 0; j < n; ++j) h[i * n + j] *= ginv;
        for (std::size_t j = 0; j < n; ++j) h[j * n + i] *= f;
      }
    }
  }
}

// Householder similarity reduction to upper Hessenberg form.
void hessenberg(std::vector<double>& h, std::size_t n) {
  if (n < 3) return;
  std::vector<double> ort(n, 0.0);
  const std::size_t high = n - 1;
  for (std::size_t m = 1; m <= high - 1; ++m) {
    double scale = 0.0;
    for (std::size_t i = m; i <= high; ++i) scale += std::fabs(h[i * n + (m - 1)]);
    if (scale == 0.0) continue;
    double hh = 0.0;
    for (std::size_t i = high + 1; i-- > m;) {
      ort[i] = h[i * n + (m - 1)] / scale;
      hh += ort[i] * ort[i];
    }
    double g = std::sqrt(hh);
    if (ort[m] > 0) g = -g;
    hh -= ort[m] * g;
    ort[m] -= g;
    for (std::size_t j = m; j < n; ++j) {
      double f = 0.0;
      for (std::size_t i = high + 1; i-- > m;) f += ort[i] * h[i * n + j];
      f /= hh;
      for (std::size_t i = m; i <= high; ++i) h[i * n + j] -= f * ort[i];
    }
    for (std::size_t i = 0; i <= high; ++i) {
      double f = 0.0;
      for (std::size_t j = high + 1; j-- > m;) f += ort[j] * h[i * n + j];
      f /= hh;
      for (std::size_t j = m; j <= high; ++j) h[i * n + j] -= f * ort[j];
    }
    h[m * n + (m - 1)] = scale * g;
  }
  for (std::size_t i = 2; i < n; ++i)
    for (std::size_t j = 0; j + 1 < i; ++j) h[i * n + j] = 0.0;
}

// Francis double-shift QR on an upper Hessenberg matrix (EISPACK hqr).
// Returns eigenvalues; sweeps counts the QR iterations performed.
void hqr(std::vector<double>& h, std::size_t nn, std::vector<Complex>& out,
         std::size_t& sweeps, std::size_t cap) {
  const double eps = std::ldexp(1.0, -52);
  const double dbl_min = std::numeric_limits<double>::min();
  auto H = [&](std::size_t i, std::size_t j) -> double& { return h[i * nn + j]; };

  double norm = 0.0;
  for (std::size_t i = 0; i < nn; ++i)
    for (std::size_t j = (i == 0 ? 0 : i - 1); j < nn; ++j) norm += std::fabs(H(i, j));

  out.assign(nn, Complex(0.0, 0.0));
  if (norm == 0.0) return;

  long n = static_cast<long>(nn) - 1;
  double exshift = 0.0;
  double p = 0, q = 0, r = 0, s = 0, z = 0, w = 0, x = 0, y = 0;
  int iter = 0;

  while (n >= 0) {
    long l = n;
    while (l > 0) {
      s = std::fabs(H(l - 1, l - 1)) + std::fabs(H(l, l));
      if (s == 0.0) s = norm;
      // Floor the threshold at the smallest normal double: eps*s underflows
      // to zero when both diagonals are subnormal, and a strict `<` would
      // then refuse to deflate an exactly-zero subdiagonal, feeding a zero
      // divisor into the double-shift step.
      if (std::fabs(H(l, l - 1)) <= std::max(eps * s, dbl_min)) break;
      --l;
    }

    if (l == n) {
      out[n] = Complex(H(n, n) + exshift, 0.0);
      --n;
      iter = 0;
    } else if (l == n - 1) {
      w = H(n, n - 1) * H(n - 1, n);
      p = (H(n - 1, n - 1) - H(n, n)) / 2.0;
      q = p * p + w;
      z = std::sqrt(std::fabs(q));
      x = H(n, n) + exshift;
      if (q >= 0) {
        z = (p >= 0) ? (p + z) : (p - z);
        double r1 = x + z;
        double r2 = (z != 0.0) ? (x - w / z) : r1;
        out[n - 1] = Complex(r1, 0.0);
        out[n] = Complex(r2, 0.0);
      } else {
        out[n - 1] = Complex(x + p, z);
        out[n] = Complex(x + p, -z);
      }
      n -= 2;
      iter = 0;
    } else {
      x = H(n, n);
      y = H(n - 1, n - 1);
      w = H(n, n - 1) * H(n - 1, n);
      if (iter > 0 && iter % 10 == 0) {  // ad-hoc shift whenever progress stalls
        exshift += x;
        for (long i = 0; i <= n; ++i) H(i, i) -= x;
        s = std::fabs(H(n, n - 1)) + std::fabs(H(n - 1, n - 2));
        x = y = 0.75 * s;
        w = -0.4375 * s * s;
      }
      ++iter;
      if (++sweeps > cap) throw NumericalError("eigenvalues: QR did not converge", sweeps);

      long m = n - 2;
      while (m >= l) {
        z = H(m, m);
        r = x - z;
        s = y - z;
        p = (r * s - w) / H(m + 1, m) + H(m, m + 1);
        q = H(m + 1, m + 1) - z - r - s;
        r = H(m + 2, m + 1);
        s = std::fabs(p) + std::fabs(q) + std::fabs(r);
        if (s != 0.0) {
          p /= s;
          q /= s;
          r /= s;
        }
        if (m == l) break;
        const double u = std::fabs(H(m, m - 1)) * (std::fabs(q) + std::fabs(r));
        const double v =
            std::fabs(p) * (std::fabs(H(m - 1, m - 1)) + std::fabs(z) + std::fabs(H(m + 1, m + 1)));
        if (u < eps * v) break;
        --m;
      }
      for (long i = m + 2; i <= n; ++i) {
        H(i, i - 2) = 0.0;
        if (i > m + 2) H(i, i - 3) = 0.0;
      }

      for (long k = m; k <= n - 1; ++k) {
        const bool notlast = (k != n - 1);
        if (k != m) {
          p = H(k, k - 1);
          q = H(k + 1, k - 1);
          r = notlast ? H(k + 2, k - 1) : 0.0;
          x = std::fabs(p) + std::fabs(q) + std::fabs(r);
          if (x == 0.0) continue;
          p /= x;
          q /= x;
          r /= x;
        }
        s = std::sqrt(p * p + q * q + r * r);
        if (p < 0) s = -s;
        if (s == 0.0) continue;
        if (k != m)
          H(k, k - 1) = -s * x;
        else if (l != m)
          H(k, k - 1) = -H(k, k - 1);
        p += s;
        x = p / s;
        y = q / s;
        z = r / s;
        q /= p;
        r /= p;
        for (long j = k; j <= n; ++j) {
          double pp = H(k, j) + q * H(k + 1, j);
          if (notlast) {
            pp += r * H(k + 2, j);
            H(k + 2, j) -= pp * z;
          }
          H(k, j) -= pp * x;
          H(k + 1, j) -= pp * y;
        }
        const long mmin = std::min<long>(n, k + 3);
        for (long i = l; i <= mmin; ++i) {
          double pp = x * H(i, k) + y * H(i, k + 1);
          if (notlast) {
            pp += z * H(i, k + 2);
            H(i, k + 2) -= pp * r;
          }
          H(i, k) -= pp;
          H(i, k + 1) -= pp * q;
        }
      }
    }
  }
}

// Complex LU solve for inverse iteration; tiny pivots are floored, never
// raised, because near-singularity at an eigenvalue shift is the point.
struct ComplexLu {
  std::size_t n;
  std::vector<Complex> lu;
  std::vector<std::size_t> piv;

  ComplexLu(const Matrix& a, Complex shift) : n(a.rows()), lu(n * n), piv(n) {
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) lu[i * n + j] = Complex(a(i, j), 0.0) - (i == j ? shift : Complex(0.0));
    double scale = 0.0;
    for (const auto& v : lu) scale = std::max(scale, std::abs(v));
    const double tiny = std::max(scale, 1.0) * 1e-290;
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t pivot = k;
      double best = std::abs(lu[k * n + k]);
      for (std::size_t i = k + 1; i < n; ++i) {
        const double cand = std::abs(lu[i * n + k]);
        if (cand > best) {
          best = cand;
          pivot = i;
        }
      }
      piv[k] = pivot;
      if (pivot != k)
        for (std::size_t j = 0; j < n; ++j) std::swap(lu[k * n + j], lu[pivot * n + j]);
      if (std::abs(lu[k * n + k]) < tiny) lu[k * n + k] = Complex(tiny, 0.0);
      for (std::size_t i = k + 1; i < n; ++i) {
        lu[i * n + k] /= lu[k * n + k];
        const Complex f = lu[i * n + k];
        for (std::size_t j = k + 1; j < n; ++j) lu[i * n + j] -= f * lu[k * n + j];
      }
    }
  }

  std::vector<Complex> solve(std::vector<Complex> b) const {
    for (std::size_t k = 0; k < n; ++k) {
      if (piv[k] != k) std::swap(b[k], b[piv[k]]);
      for (std::size_t i = k + 1; i < n; ++i) b[i] -= lu[i * n + k] * b[k];
    }
    for (std::size_t i = n; i-- > 0;) {
      for (std::size_t j = i + 1; j < n; ++j) b[i] -= lu[i * n + j] * b[j];
      b[i] /= lu[i * n + i];
    }
    return b;
  }
};

std::vector<Complex> inverse_iteration(const Matrix& a, Complex shift) {
  const std::size_t n = a.rows();
  ComplexLu lu(a, shift);
  std::vector<Complex> v(n);
  std::uint64_t state = 0x8f1bbcdcbfa53e0bULL;  // fixed start vector
  for (std::size_t i = 0; i < n; ++i) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t zz = state;
    zz = (zz ^ (zz >> 30)) * 0xbf58476d1ce4e5b9ULL;
    zz = (zz ^ (zz >> 27)) * 0x94d049bb133111ebULL;
    zz ^= zz >> 31;
    v[i] = Complex(1.0 + static_cast<double>(zz >> 40) * 0x1.0p-24,
                   static_cast<double>((zz << 24) >> 40) * 0x1.0p-24);
  }
  for (int it = 0; it < 4; ++it) {
    v = lu.solve(std::move(v));
    double nrm = 0.0;
    for (const auto& c : v) nrm += std::norm(c);
    nrm = std::sqrt(nrm);
    if (nrm == 0.0) break;
    for (auto& c : v) c /= nrm;
  }
  // Deterministic phase: largest component made real positive.
  std::size_t arg = 0;
  double best = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (std::abs(v[i]) > best) {
      best = std::abs(v[i]);
      arg = i;
    }
  if (best > 0.0) {
    const Complex phase = std::abs(v[arg]) / v[arg];
    for (auto& c : v) c *= phase;
  }
  return v;
}

}  // namespace

Eigenvalues eigenvalues(const Matrix& a) {
  if (!a.square()) throw DimensionError("eigenvalues: square matrix required");
  const std::size_t n = a.rows();
  if (n == 0) throw DimensionError("eigenvalues: empty matrix");
  if (!a.all_finite()) throw DomainError("eigenvalues: non-finite entry");
  Eigenvalues result;
  if (n == 1) {
    result.values = {Complex(a(0, 0), 0.0)};
    return result;
  }
  std::vector<double> h = a.data();
  // Prescale to O(1) by an exact power of two: eig(cA) = c eig(A), and
  // extreme magnitudes (saturated-activation Jacobians underflow toward
  // 1e-300) otherwise starve the shift polynomial of precision.
  double top = 0.0;
  for (double v : h) top = std::max(top, std::fabs(v));
  int exponent = 0;
  if (top > 0.0) {
    std::frexp(top, &exponent);
    if (exponent != 0) {
      for (double& v : h) v = std::ldexp(v, -exponent);
    }
  }
  balance(h, n);
  hessenberg(h, n);
  hqr(h, n, result.values, result.iterations, 100 * n);
  if (exponent != 0) {
    for (auto& v : result.values) {
      v = Complex(std::ldexp(v.real(), exponent), std::ldexp(v.imag(), exponent));
    }
  }
  return result;
}

double spectral_radius(const Matrix& a) {
  const Eigenvalues eig = eigenvalues(a);
  double best = 0.0;
  for (const auto& v : eig.values) best = std::max(best, std::abs(v));
  return best;
}

DominantPair dominant_eigen_pair(const Matrix& a) {
  const Eigenvalues eig = eigenvalues(a);
  const std::size_t n = a.rows();
  DominantPair out;
  double top = 0.0;
  std::size_t top_idx = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double m = std::abs(eig.values[i]);
    if (m > top || (m == top && eig.values[i].imag() > eig.values[top_idx].imag())) {
      top = m;
      top_idx = i;
    }
  }
  const double tol = 1e-8 * std::max(1.0, top);
  std::vector<Complex> at_top;
  for (const auto& v : eig.values)
    if (top - std::abs(v) <= tol) at_top.push_back(v);
  if (at_top.size() == 1) {
    out.degenerate = false;
  } else if (at_top.size() == 2) {
    const Complex c0 = at_top[0], c1 = at_top[1];
    const bool conj_pair = std::abs(c0 - std::conj(c1)) <= tol && std::fabs(c0.imag()) > tol;
    out.degenerate = !conj_pair;
  } else {
    out.degenerate = true;
  }
  Complex lambda = eig.values[top_idx];
  if (lambda.imag() < 0) lambda = std::conj(lambda);  // canonical branch
  out.value = lambda;
  if (!out.degenerate && top > 0.0) {
    out.right = inverse_iteration(a, lambda);
    out.left = inverse_iteration(a.transpose(), std::conj(lambda));
    for (auto& c : out.left) c = std::conj(c);
  }
  return out;
}

RadiusGradient spectral_radius_gradient(const Matrix& a) {
  if (!a.square()) throw DimensionError("spectral_radius_gradient: square matrix required");
  const std::size_t n = a.rows();
  const DominantPair pair = dominant_eigen_pair(a);
  const double rho = std::abs(pair.value);
  const bool fallback = pair.degenerate || rho <= 1e-12;
  RadiusGradient out{Matrix(n, n), fallback};
  if (!fallback) {
    Complex yx(0.0, 0.0);
    for (std::size_t i = 0; i < n; ++i) yx += std::conj(pair.left[i]) * pair.right[i];
    if (std::abs(yx) > 1e-14) {
      const Complex factor = std::conj(pair.value) / (rho * yx);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
          out.grad(i, j) = (factor * std::conj(pair.left[i]) * pair.right[j]).real();
      return out;
    }
    out.degenerate = true;  // y^H x ~ 0: defective; fall through to differences
  }
  const double step = 1e-4 * std::max(1.0, a.max_abs());
  Matrix work = a;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double keep = work(i, j);
      work(i, j) = keep + step;
      const double up = spectral_radius(work);
      work(i, j) = keep - step;
      const double down = spectral_radius(work);
      work(i, j) = keep;
      out.grad(i, j) = (up - down) / (2.0 * step);
    }
  }
  return out;
}

}  // namespace lsc
