#include "refcurve/slr.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "refcurve/normal.hpp"

namespace refcurve {

double covariate_value(const Covariates& c, const std::string& name) {
  if (name == "age") return c.age;
  if (name == "height") return c.height;
  if (name == "weight") {
    if (std::isnan(c.weight)) {
      throw std::invalid_argument("covariate 'weight' missing for this row");
    }
    return c.weight;
  }
  throw std::invalid_argument("unknown covariate: " + name);
}

namespace {

Eigen::MatrixXd base_design(const Dataset& data, const SlrConfig& cfg) {
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  Eigen::MatrixXd X(n, 1 + static_cast<Eigen::Index>(cfg.covariates.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    const Covariates c = Covariates::from(data[static_cast<std::size_t>(i)]);
    for (std::size_t j = 0; j < cfg.covariates.size(); ++j) {
      X(i, 1 + static_cast<Eigen::Index>(j)) = covariate_value(c, cfg.covariates[j]);
    }
  }
  return X;
}

struct Ols {
  Eigen::VectorXd beta;
  double rss = 0.0;
};

Ols solve_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  const Eigen::MatrixXd XtX = X.transpose() * X;
  const Eigen::VectorXd Xty = X.transpose() * y;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(XtX);
  Eigen::VectorXd beta = ldlt.solve(Xty);
  if (ldlt.info() != Eigen::Success || !beta.allFinite() ||
      (XtX * beta - Xty).norm() > 1e-6 * (Xty.norm() + 1.0)) {
    throw std::runtime_error("fit_slr: singular design");
  }
  Ols out;
  out.rss = (y - X * beta).squaredNorm();
  out.beta = std::move(beta);
  return out;
}

double rss_at_psi(Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& ages, double psi) {
  const Eigen::Index hinge = X.cols() - 1;
  X.col(hinge) = (ages.array() - psi).cwiseMax(0.0);
  return solve_ols(X, y).rss;
}

double age_percentile(std::vector<double> ages, double p) {
  std::sort(ages.begin(), ages.end());
  const double pos = p * (static_cast<double>(ages.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, ages.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return ages[lo] * (1.0 - frac) + ages[hi] * frac;
}

}  // namespace

FittedSlrModel fit_slr(const Dataset& data, Response response,
                       const SlrConfig& cfg) {
  if (data.size() < 30) {
    throw std::invalid_argument("fit_slr: need at least 30 observations");
  }
  if (cfg.grid_size < 2) {
    throw std::invalid_argument("fit_slr: grid_size must be >= 2");
  }

  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  Eigen::VectorXd y(n), ages(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    y[i] = data[static_cast<std::size_t>(i)].response(response);
    ages[i] = data[static_cast<std::size_t>(i)].age_years;
  }
  if (!y.allFinite()) {
    throw std::invalid_argument("fit_slr: non-finite response values");
  }

  FittedSlrModel model;
  model.covariates = cfg.covariates;
  model.n = static_cast<long>(n);
  model.age_min = ages.minCoeff();
  model.age_max = ages.maxCoeff();

  const Eigen::MatrixXd X0 = base_design(data, cfg);

  bool segmented = cfg.allow_breakpoint;
  double best_psi = std::numeric_limits<double>::quiet_NaN();
  if (segmented &&
      std::find(cfg.covariates.begin(), cfg.covariates.end(), "age") ==
          cfg.covariates.end()) {
    throw std::invalid_argument(
        "fit_slr: breakpoint search requires 'age' among the covariates");
  }

  if (segmented) {
    std::vector<double> age_vec(ages.data(), ages.data() + n);
    const double lo = age_percentile(age_vec, 0.05);
    const double hi = age_percentile(age_vec, 0.95);

    Eigen::MatrixXd X(n, X0.cols() + 1);
    X.leftCols(X0.cols()) = X0;

    int best_j = 0;
    double best_rss = std::numeric_limits<double>::infinity();
    const double step = (hi - lo) / static_cast<double>(cfg.grid_size - 1);
    for (int j = 0; j < cfg.grid_size; ++j) {
      const double psi = lo + step * j;
      const double rss = rss_at_psi(X, y, ages, psi);
      if (rss < best_rss) {
        best_rss = rss;
        best_j = j;
      }
    }

    // Golden-section pass over the winning cell and its neighbours.
    double a = lo + step * std::max(0, best_j - 1);
    double b = lo + step * std::min(cfg.grid_size - 1, best_j + 1);
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double c1 = b - gr * (b - a);
    double c2 = a + gr * (b - a);
    double f1 = rss_at_psi(X, y, ages, c1);
    double f2 = rss_at_psi(X, y, ages, c2);
    while (b - a > 0.01) {
      if (f1 <= f2) {
        b = c2;
        c2 = c1;
        f2 = f1;
        c1 = b - gr * (b - a);
        f1 = rss_at_psi(X, y, ages, c1);
      } else {
        a = c1;
        c1 = c2;
        f1 = f2;
        c2 = a + gr * (b - a);
        f2 = rss_at_psi(X, y, ages, c2);
      }
    }
    double psi = 0.5 * (a + b);
    if (rss_at_psi(X, y, ages, psi) > best_rss) {
      psi = lo + step * best_j;  // refinement must never lose to the grid
    }

    const long n_low = (ages.array() <= psi).count();
    const long n_high = static_cast<long>(n) - n_low;
    if (n_low < 10 || n_high < 10) {
      segmented = false;
      model.fallback_warning = true;
    } else {
      best_psi = psi;
    }
  }

  if (segmented) {
    Eigen::MatrixXd X(n, X0.cols() + 1);
    X.leftCols(X0.cols()) = X0;
    X.col(X0.cols()) = (ages.array() - best_psi).cwiseMax(0.0);
    const Ols ols = solve_ols(X, y);
    model.simple_linear = false;
    model.psi = best_psi;
    model.coefficients = ols.beta;
    model.rss = ols.rss;

    const Eigen::VectorXd resid = y - X * ols.beta;
    const Eigen::Index p = X.cols();
    double ss_low = 0.0, ss_high = 0.0;
    long n_low = 0, n_high = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (ages[i] <= best_psi) {
        ss_low += resid[i] * resid[i];
        ++n_low;
      } else {
        ss_high += resid[i] * resid[i];
        ++n_high;
      }
    }
    // Hinge column is identically zero below psi, so that segment carries
    // one parameter fewer.
    const double dof_low = std::max<double>(1, n_low - (p - 1));
    const double dof_high = std::max<double>(1, n_high - p);
    model.sd_low = std::sqrt(ss_low / dof_low);
    model.sd_high = std::sqrt(ss_high / dof_high);
    model.n_low = n_low;
    model.n_high = n_high;
  } else {
    const Ols ols = solve_ols(X0, y);
    model.simple_linear = true;
    model.coefficients = ols.beta;
    model.rss = ols.rss;
    const double dof = std::max<double>(1, n - X0.cols());
    model.sd_low = model.sd_high = std::sqrt(ols.rss / dof);
    model.n_low = static_cast<long>(n);
    model.n_high = 0;
  }

  if (!(model.sd_low > 0.0) || !(model.sd_high > 0.0)) {
    throw std::runtime_error("fit_slr: degenerate residual SD");
  }
  return model;
}

double slr_predict(const FittedSlrModel& model, const Covariates& c) {
  double eta = model.coefficients[0];
  for (std::size_t j = 0; j < model.covariates.size(); ++j) {
    eta += model.coefficients[static_cast<Eigen::Index>(j) + 1] *
           covariate_value(c, model.covariates[j]);
  }
  if (!model.simple_linear) {
    const double hinge = std::max(0.0, c.age - model.psi);
    eta += model.coefficients[model.coefficients.size() - 1] * hinge;
  }
  return eta;
}

double slr_zscore(double y, const FittedSlrModel& model, const Covariates& c) {
  return (y - slr_predict(model, c)) / model.sd_at_age(c.age);
}

double slr_lln(const FittedSlrModel& model, const Covariates& c, double level) {
  return slr_predict(model, c) + normal_quantile(level) * model.sd_at_age(c.age);
}

}  // namespace refcurve
