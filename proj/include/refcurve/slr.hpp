#pragma once

#include <Eigen/Dense>
#include <limits>
#include <string>
#include <vector>

#include "refcurve/dataset.hpp"

namespace refcurve {

/// Covariates of one prediction point. weight may be NaN when unused.
struct Covariates {
  double age = 0.0;
  double height = 0.0;
  double weight = std::numeric_limits<double>::quiet_NaN();

  static Covariates from(const Observation& o) {
    return {o.age_years, o.height_cm, o.weight_kg};
  }
};

double covariate_value(const Covariates& c, const std::string& name);

struct SlrConfig {
  std::vector<std::string> covariates = {"age", "height"};
  bool allow_breakpoint = true;
  int grid_size = 200;
};

/// Segmented linear mean in age plus linear covariates, with separate
/// constant residual SDs below and above the breakpoint. The variance
/// pieces are tied to the mean-model breakpoint psi.
struct FittedSlrModel {
  std::vector<std::string> covariates;  // design columns after the intercept
  Eigen::VectorXd coefficients;         // intercept, covariates..., hinge slope
  bool simple_linear = true;
  double psi = std::numeric_limits<double>::quiet_NaN();
  double sd_low = 0.0;
  double sd_high = 0.0;
  long n_low = 0;
  long n_high = 0;
  long n = 0;
  double rss = 0.0;
  bool fallback_warning = false;  // breakpoint requested but a segment was too thin
  double age_min = 0.0;
  double age_max = 0.0;

  double sd_at_age(double age) const {
    if (simple_linear || age <= psi) return sd_low;
    return sd_high;
  }
};

/// Grid search (grid_size candidate breakpoints over the [5th, 95th] age
/// percentiles) plus one golden-section refinement of the winning cell to
/// 0.01 years. Falls back to a simple linear model, with a warning flag,
/// when either segment would hold fewer than 10 observations.
FittedSlrModel fit_slr(const Dataset& data, Response response,
                       const SlrConfig& cfg);

double slr_predict(const FittedSlrModel& model, const Covariates& c);
double slr_zscore(double y, const FittedSlrModel& model, const Covariates& c);
double slr_lln(const FittedSlrModel& model, const Covariates& c, double level);

}  // namespace refcurve
