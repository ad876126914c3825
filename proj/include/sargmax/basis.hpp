#pragma once

// One-dimensional basis kernels centred at zero. `scale` is the grid spacing c
// for the uniform and triangular kernels and the standard deviation for the
// Gaussian kernel.

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sargmax {

enum class Basis { kUniform, kTriangular, kGaussian };

const char* basis_name(Basis basis);
Basis parse_basis(const char* name);

template <class Scalar>
Scalar basis_pdf_1d(Basis basis, Scalar offset, Scalar scale) {
  using std::abs;
  using std::exp;
  switch (basis) {
    case Basis::kUniform:
      return abs(offset) <= scale / 2 ? Scalar(1) / scale : Scalar(0);
    case Basis::kTriangular:
      if (offset >= -scale && offset < Scalar(0))
        return offset / (scale * scale) + Scalar(1) / scale;
      if (offset >= Scalar(0) && offset < scale)
        return -offset / (scale * scale) + Scalar(1) / scale;
      return Scalar(0);
    case Basis::kGaussian: {
      const Scalar z = offset / scale;
      return exp(-z * z / 2) /
             (scale * std::sqrt(2 * std::numbers::pi_v<Scalar>));
    }
  }
  return Scalar(0);
}

template <class Scalar>
Scalar basis_cdf_1d(Basis basis, Scalar offset, Scalar scale) {
  using std::erfc;
  switch (basis) {
    case Basis::kUniform: {
      const Scalar t = offset / scale + Scalar(0.5);
      return t <= 0 ? Scalar(0) : (t >= 1 ? Scalar(1) : t);
    }
    case Basis::kTriangular: {
      const Scalar t = offset / scale;
      if (t <= -1) return Scalar(0);
      if (t < 0) return (1 + t) * (1 + t) / 2;
      if (t < 1) return 1 - (1 - t) * (1 - t) / 2;
      return Scalar(1);
    }
    case Basis::kGaussian:
      return erfc(-offset / (scale * std::numbers::sqrt2_v<Scalar>)) / 2;
  }
  return Scalar(0);
}

// Standard normal quantile: Acklam's rational approximation followed by one
// Halley step against erfc, good to roughly full double precision.
template <class Scalar>
Scalar normal_quantile(Scalar p) {
  if (!(p > 0 && p < 1)) throw std::domain_error("normal_quantile: p not in (0,1)");
  // 1 - p is exact for p >= 1/2; the lower tail keeps the residual accurate.
  if (p > Scalar(0.5)) return -normal_quantile(1 - p);
  constexpr Scalar a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                          -2.759285104469687e+02, 1.383577518672690e+02,
                          -3.066479806614716e+01, 2.506628277459239e+00};
  constexpr Scalar b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                          -1.556989798598866e+02, 6.680131188771972e+01,
                          -1.328068155288572e+01};
  constexpr Scalar c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                          -2.400758277161838e+00, -2.549732539343734e+00,
                          4.374664141464968e+00,  2.938163982698783e+00};
  constexpr Scalar d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                          2.445134137142996e+00, 3.754408661907416e+00};
  constexpr Scalar p_low = 0.02425;

  Scalar x;
  if (p < p_low) {
    const Scalar q = std::sqrt(-2 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
  } else {
    const Scalar q = p - Scalar(0.5);
    const Scalar r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  }
  const Scalar e =
      std::erfc(-x / std::numbers::sqrt2_v<Scalar>) / 2 - p;
  const Scalar u = e * std::sqrt(2 * std::numbers::pi_v<Scalar>) * std::exp(x * x / 2);
  return x - u / (1 + x * u / 2);
}

// Inverse CDF of the kernel; u must lie in (0,1). Returns the offset from the
// kernel centre.
template <class Scalar>
Scalar basis_quantile_1d(Basis basis, Scalar u, Scalar scale) {
  if (!(u > 0 && u < 1)) {
    throw std::domain_error("basis_quantile_1d: u must lie in (0,1)");
  }
  switch (basis) {
    case Basis::kUniform:
      return scale * (u - Scalar(0.5));
    case Basis::kTriangular:
      return u < Scalar(0.5) ? scale * (std::sqrt(2 * u) - 1)
                             : scale * (1 - std::sqrt(2 * (1 - u)));
    case Basis::kGaussian:
      // Exact median keeps u = 0.5 at the centre.
      return u == Scalar(0.5) ? Scalar(0) : scale * normal_quantile(u);
  }
  return Scalar(0);
}

template <class Scalar>
Scalar basis_variance_1d(Basis basis, Scalar scale) {
  switch (basis) {
    case Basis::kUniform: return scale * scale / 12;
    case Basis::kTriangular: return scale * scale / 6;
    case Basis::kGaussian: return scale * scale;
  }
  return Scalar(0);
}

}  // namespace sargmax
