#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "refcurve/bccg.hpp"
#include "refcurve/dataset.hpp"
#include "refcurve/slr.hpp"
#include "refcurve/splines.hpp"

namespace refcurve {

enum class Link { log_link, identity };

const char* to_string(Link link);
Link link_from_string(const std::string& s);

/// One linear predictor column: a product of covariate transforms, written
/// e.g. "age", "log_height" or "age*height". The bare "1" is accepted and
/// ignored (the intercept is always present).
struct LinearTerm {
  struct Factor {
    std::string covariate;  // age | height | weight
    bool log = false;
  };
  std::string spec;
  std::vector<Factor> factors;
};

LinearTerm parse_term(const std::string& spec);
double eval_term(const LinearTerm& term, const Covariates& c);

/// P-spline smooth in age with complexity fixed by target effective
/// degrees of freedom (comparable across datasets, unlike lambda).
struct SmoothTermSpec {
  std::string covariate = "age";
  double target_edf = 8.0;
  int degree = 3;
  int n_interior_knots = 20;
  int penalty_order = 2;
};

struct ParamFormula {
  Link link = Link::log_link;
  std::vector<std::string> linear_terms;
  std::optional<SmoothTermSpec> smooth;
};

struct ConvergenceControl {
  int max_outer = 50;
  double deviance_tol = 1e-4;
  int step_halvings_max = 10;
};

struct GamlssSpec {
  ParamFormula mu{Link::log_link, {}, SmoothTermSpec{"age", 8.0}};
  ParamFormula sigma{Link::log_link, {}, SmoothTermSpec{"age", 4.0}};
  ParamFormula nu{Link::identity, {}, std::nullopt};
  ConvergenceControl convergence;
  std::optional<double> nu_fixed;
};

struct FittedSmoothTerm {
  SplineBasisSpec basis;
  Eigen::VectorXd coefficients;  // full basis coefficients (sum-to-zero built in)
  double lambda = 0.0;
  double edf = 0.0;

  /// Smooth value at age; outside the basis domain the curve continues
  /// linearly at the boundary slope and *extrapolated is set.
  double eval(double age, bool* extrapolated = nullptr) const;
};

struct FittedParamPredictor {
  Link link = Link::identity;
  double intercept = 0.0;
  std::vector<LinearTerm> terms;
  Eigen::VectorXd coefficients;  // one per term
  std::optional<FittedSmoothTerm> smooth;
  bool fixed = false;  // frozen at its starting value, contributes no edf

  double edf() const;
  double eta(const Covariates& c, bool* extrapolated = nullptr) const;
  double value(const Covariates& c, bool* extrapolated = nullptr) const;
};

struct FittedGamlssModel {
  Response response = Response::fev1;
  FittedParamPredictor mu, sigma, nu;
  double global_deviance = 0.0;
  double total_edf = 0.0;
  long n = 0;
  bool converged = false;
  std::vector<double> trace;  // deviance after each outer cycle
};

/// RS-type fit: cyclic penalized IRLS over the mu, sigma, nu predictors
/// with quasi-Newton squared-score weights, backfitting between linear and
/// smooth parts, and step-halving whenever the global deviance would rise.
/// Deterministic given data and spec; non-convergence is flagged on the
/// result, not thrown.
FittedGamlssModel fit_gamlss(const Dataset& data, Response response,
                             const GamlssSpec& spec);

BccgParams predict_params(const FittedGamlssModel& model, const Covariates& c,
                          bool* extrapolated = nullptr);

/// One z-score per observation, order preserved.
std::vector<double> zscores(const FittedGamlssModel& model, const Dataset& data);

/// Centile curve at the given level along a covariate grid.
std::vector<double> lln_curve(const FittedGamlssModel& model,
                              const std::vector<Covariates>& grid, double level);

struct InformationCriteria {
  double global_deviance = 0.0;
  double aic = 0.0;
  double bic = 0.0;
};

InformationCriteria information_criteria(const FittedGamlssModel& model);

}  // namespace refcurve
