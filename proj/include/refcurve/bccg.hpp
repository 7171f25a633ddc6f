#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace refcurve {

/// Box-Cox Cole & Green (LMS) parameters at one covariate point.
/// mu is the median of the distribution for every nu; sigma is the
/// coefficient-of-variation scale; nu the Box-Cox skewness power.
struct BccgParams {
  double mu = 1.0;
  double sigma = 0.1;
  double nu = 1.0;
};

/// Requested centile lies outside the distribution's support. Raised instead
/// of clamping so that LLN audits never see silently truncated centiles.
class OutOfSupportError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Below |nu| <= kNuEps the logarithmic (nu = 0) branch is used; the two
// branches agree to ~1e-7 relative error at the threshold.
inline constexpr double kNuEps = 1e-7;

/// z-score of y under p: ((y/mu)^nu - 1)/(nu*sigma), log branch at nu ~ 0.
double bccg_zscore(double y, const BccgParams& p);

/// Inverse of bccg_zscore composed with the normal quantile: the centile
/// curve value at probability prob. Throws OutOfSupportError when the
/// centile falls outside the support.
double bccg_quantile(double prob, const BccgParams& p);

/// P(Y <= y) = Phi(z(y)). The exact-BCCG truncation constant
/// Phi(1/(sigma*|nu|)) is omitted throughout, following LMS practice; for
/// sigma <= ~0.25 the omitted mass is negligible.
double bccg_cdf(double y, const BccgParams& p);

/// Log density of the (untruncated) LMS form.
double bccg_logpdf(double y, const BccgParams& p);

struct SampleStats {
  std::int64_t redraws = 0;  // out-of-support draws that were re-drawn
};

/// n inverse-CDF draws, deterministic given seed. Out-of-support uniforms
/// are re-drawn and counted; a warning is emitted to stderr when they
/// exceed 0.1% of n.
std::vector<double> bccg_sample(const BccgParams& p, std::size_t n,
                                std::uint64_t seed,
                                SampleStats* stats = nullptr);

/// First derivatives of bccg_logpdf with respect to mu, sigma, nu.
struct BccgScores {
  double dmu = 0.0;
  double dsigma = 0.0;
  double dnu = 0.0;
};

BccgScores bccg_scores(double y, const BccgParams& p);

/// Throws std::domain_error unless mu > 0, sigma > 0 and all fields finite.
void validate_params(const BccgParams& p);

}  // namespace refcurve
