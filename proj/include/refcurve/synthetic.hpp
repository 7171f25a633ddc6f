#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "refcurve/bccg.hpp"
#include "refcurve/dataset.hpp"

namespace refcurve {

/// Piecewise-cubic curve through control points (Catmull-Rom slopes,
/// clamped constant outside the control range). Control x must be strictly
/// increasing.
class CubicCurve {
 public:
  CubicCurve() = default;
  CubicCurve(std::vector<double> xs, std::vector<double> ys);
  double operator()(double x) const;
  bool empty() const { return xs_.empty(); }

  const std::vector<double>& xs() const { return xs_; }
  const std::vector<double>& ys() const { return ys_; }

 private:
  std::vector<double> xs_, ys_;
  std::vector<double> slopes_;
};

/// Age-indexed BCCG truth for one response.
struct ResponseTruth {
  CubicCurve mu;
  CubicCurve sigma;
  CubicCurve nu;

  BccgParams at(double age) const {
    return BccgParams{mu(age), sigma(age), nu(age)};
  }
};

/// A generating world: covariate distributions plus per-response BCCG
/// truths. When `ratio` is set, the ratio and fvc are the directly sampled
/// variables and fev1 = ratio * fvc; otherwise fev1 and fvc are sampled
/// independently.
struct TruthScenario {
  std::string name;
  double age_min = 3.0;
  double age_max = 92.9;
  double height_noise_sd = 4.5;
  double male_height_offset = 6.0;
  std::uint64_t default_seed = 1;

  std::optional<ResponseTruth> fev1;
  std::optional<ResponseTruth> fvc;
  std::optional<ResponseTruth> ratio;

  /// Median height as a smooth function of age (cm), before sex offset.
  double height_curve(double age) const;

  bool has_truth(Response r) const;
  const ResponseTruth& truth(Response r) const;

  /// Checks mu > 0, sigma > 0 on a dense age grid.
  void validate() const;
};

/// Per-subject generating-truth record, kept beside the data for oracle
/// use and never shown to the fitters.
struct TruthRecord {
  long id = 0;
  Response response = Response::fev1;
  BccgParams params;
  double z = 0.0;
  bool below_05 = false;
  bool below_025 = false;
};

struct SyntheticDataset {
  Dataset data;
  std::vector<TruthRecord> truth;  // one record per subject per direct response
};

/// Deterministic given scenario.default_seed (or the seed override).
SyntheticDataset generate(const TruthScenario& scenario, std::size_t n);
SyntheticDataset generate(const TruthScenario& scenario, std::size_t n,
                          std::uint64_t seed);

/// skew-lung, symmetric-homoscedastic, ratio-like.
std::vector<TruthScenario> builtin_scenarios();
TruthScenario scenario_by_name(const std::string& name);

void write_truth_csv(const std::vector<TruthRecord>& truth,
                     const std::string& path);

}  // namespace refcurve
