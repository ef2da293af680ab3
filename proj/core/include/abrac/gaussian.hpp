#pragma once

namespace abrac {

struct PdfCdf {
  double pdf;
  double cdf;
};

/// Standard normal density and distribution function. The cdf goes through
/// erfc, accurate to about 1e-12 absolute over |z| <= 8.
PdfCdf standard_normal_pdf_cdf(double z);

}  // namespace abrac
