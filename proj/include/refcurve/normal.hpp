#pragma once

namespace refcurve {

/// Standard normal CDF, absolute error < 1e-15.
double normal_cdf(double z);

/// Standard normal density.
double normal_pdf(double z);

/// Standard normal inverse CDF (Wichura's AS 241, PPND16), absolute
/// error < 1e-15 over (0,1). Throws std::domain_error outside (0,1).
double normal_quantile(double prob);

}  // namespace refcurve
