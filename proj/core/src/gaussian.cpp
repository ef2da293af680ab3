#include "abrac/gaussian.hpp"

#include <cmath>
#include <numbers>

namespace abrac {

PdfCdf standard_normal_pdf_cdf(double z) {
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  const double inv_sqrt_2 = 1.0 / std::numbers::sqrt2;
  PdfCdf out;
  out.pdf = std::exp(-0.5 * z * z) * inv_sqrt_2pi;
  out.cdf = 0.5 * std::erfc(-z * inv_sqrt_2);
  return out;
}

}  // namespace abrac
