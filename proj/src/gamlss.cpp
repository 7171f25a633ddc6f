#include "refcurve/gamlss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "refcurve/normal.hpp"

namespace refcurve {

const char* to_string(Link link) {
  return link == Link::log_link ? "log" : "identity";
}

Link link_from_string(const std::string& s) {
  if (s == "log") return Link::log_link;
  if (s == "identity") return Link::identity;
  throw std::invalid_argument("unknown link: " + s);
}

LinearTerm parse_term(const std::string& spec) {
  LinearTerm term;
  term.spec = spec;
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    const std::size_t next = spec.find('*', pos);
    std::string tok = spec.substr(pos, next == std::string::npos ? next : next - pos);
    if (tok == "1" && spec == "1") {
      return term;  // bare intercept token: no factors
    }
    LinearTerm::Factor f;
    if (tok.rfind("log_", 0) == 0) {
      f.log = true;
      tok = tok.substr(4);
    }
    if (tok != "age" && tok != "height" && tok != "weight") {
      throw std::invalid_argument("bad term '" + spec +
                                  "': covariates are age, height, weight, "
                                  "optionally log_-prefixed, joined by '*'");
    }
    f.covariate = tok;
    term.factors.push_back(std::move(f));
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  if (term.factors.empty()) {
    throw std::invalid_argument("empty linear term");
  }
  return term;
}

double eval_term(const LinearTerm& term, const Covariates& c) {
  double v = 1.0;
  for (const auto& f : term.factors) {
    double x = covariate_value(c, f.covariate);
    if (f.log) {
      if (!(x > 0.0)) {
        throw std::domain_error("log transform of non-positive covariate " +
                                f.covariate);
      }
      x = std::log(x);
    }
    v *= x;
  }
  return v;
}

namespace {

constexpr double kEtaClamp = 35.0;

double apply_inverse_link(Link link, double eta) {
  if (link == Link::log_link) {
    return std::exp(std::clamp(eta, -kEtaClamp, kEtaClamp));
  }
  return eta;
}

// d(param)/d(eta)
double link_derivative(Link link, double param) {
  return link == Link::log_link ? param : 1.0;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t m = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + m, v.end());
  double hi = v[m];
  if (v.size() % 2 == 0) {
    std::nth_element(v.begin(), v.begin() + m - 1, v.begin() + m);
    return 0.5 * (hi + v[m - 1]);
  }
  return hi;
}

// -2 log-likelihood; +inf when any point is invalid.
double global_deviance(const Eigen::VectorXd& y, const Eigen::VectorXd& mu,
                       const Eigen::VectorXd& sigma, const Eigen::VectorXd& nu) {
  double dev = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!(mu[i] > 0.0) || !(sigma[i] > 0.0) || !std::isfinite(nu[i])) {
      return std::numeric_limits<double>::infinity();
    }
    const double ratio = y[i] / mu[i];
    const double z = std::fabs(nu[i]) > kNuEps
                         ? (std::pow(ratio, nu[i]) - 1.0) / (nu[i] * sigma[i])
                         : std::log(ratio) / sigma[i];
    const double ll = (nu[i] - 1.0) * std::log(y[i]) - nu[i] * std::log(mu[i]) -
                      std::log(sigma[i]) - 0.91893853320467274178 -
                      0.5 * z * z;
    if (!std::isfinite(ll)) {
      return std::numeric_limits<double>::infinity();
    }
    dev -= 2.0 * ll;
  }
  return dev;
}

enum ParamIndex { kMu = 0, kSigma = 1, kNu = 2 };

struct ParamWork {
  ParamFormula formula;
  std::vector<LinearTerm> terms;
  bool fixed = false;

  Eigen::MatrixXd X;  // n x (1 + terms)

  bool has_smooth = false;
  SplineBasisSpec basis;
  Eigen::MatrixXd Bc;  // centered basis, n x (K-1)
  Eigen::MatrixXd Q;   // K x (K-1) sum-to-zero transform
  Eigen::MatrixXd Pc;  // penalty in centered coordinates
  double target_edf = 0.0;

  Eigen::VectorXd beta;  // intercept + term coefficients
  Eigen::VectorXd ac;    // centered smooth coefficients
  double lambda = 0.0;
  double edf_smooth = 0.0;

  Eigen::VectorXd eta() const {
    Eigen::VectorXd e = X * beta;
    if (has_smooth) e += Bc * ac;
    return e;
  }
};

Eigen::VectorXd solve_spd(const Eigen::MatrixXd& M, const Eigen::VectorXd& rhs,
                          const char* what) {
  Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
  Eigen::VectorXd x = ldlt.solve(rhs);
  if (ldlt.info() != Eigen::Success || !x.allFinite() ||
      (M * x - rhs).norm() > 1e-7 * (rhs.norm() + M.norm() * x.norm() + 1.0)) {
    Eigen::MatrixXd Mr = M;
    Mr.diagonal().array() += 1e-10 * M.trace() + 1e-12;
    Eigen::LDLT<Eigen::MatrixXd> retry(Mr);
    x = retry.solve(rhs);
    if (retry.info() != Eigen::Success || !x.allFinite()) {
      throw std::runtime_error(std::string("fit_gamlss: singular system in ") +
                               what);
    }
  }
  return x;
}

// lambda giving the target edf for fixed cross-product A and penalty P.
double lambda_for_target(const Eigen::MatrixXd& A, const Eigen::MatrixXd& P,
                         double target) {
  const int K = static_cast<int>(A.cols());
  if (target >= static_cast<double>(K) - 1e-9) return 0.0;
  auto edf_at = [&](double lambda) {
    Eigen::MatrixXd M = A + lambda * P;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
    if (ldlt.info() != Eigen::Success) {
      M.diagonal().array() += 1e-10 * M.trace() + 1e-12;
      ldlt.compute(M);
    }
    return ldlt.solve(A).trace();
  };
  double lo = -14.0, hi = 14.0;
  if (edf_at(std::pow(10.0, hi)) > target + 0.01) {
    throw std::domain_error("fit_gamlss: smooth target_edf unattainable");
  }
  double lambda = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    lambda = std::pow(10.0, mid);
    const double edf = edf_at(lambda);
    if (std::fabs(edf - target) < 0.01) break;
    (edf > target ? lo : hi) = mid;
  }
  return lambda;
}

struct UpdateResult {
  Eigen::VectorXd beta;
  Eigen::VectorXd ac;
  double lambda = 0.0;
  double edf_smooth = 0.0;
};

// One penalized weighted least-squares update of a single predictor, with
// backfitting between the linear and smooth parts.
UpdateResult propose_update(const ParamWork& p, const Eigen::VectorXd& w,
                            const Eigen::VectorXd& e) {
  UpdateResult out;
  const Eigen::MatrixXd Xw = w.asDiagonal() * p.X;
  const Eigen::MatrixXd XtWX = p.X.transpose() * Xw;
  const Eigen::VectorXd XtWe = Xw.transpose() * e;

  if (!p.has_smooth) {
    out.beta = solve_spd(XtWX, XtWe, "linear part");
    return out;
  }

  const Eigen::MatrixXd Bw = w.asDiagonal() * p.Bc;
  const Eigen::MatrixXd BtWB = p.Bc.transpose() * Bw;
  const Eigen::VectorXd BtWe = Bw.transpose() * e;
  const Eigen::MatrixXd XtWB = Xw.transpose() * p.Bc;

  out.lambda = lambda_for_target(BtWB, p.Pc, p.target_edf);

  Eigen::MatrixXd Mb = BtWB + out.lambda * p.Pc;
  Eigen::LDLT<Eigen::MatrixXd> ldlt_b(Mb);
  if (ldlt_b.info() != Eigen::Success) {
    Mb.diagonal().array() += 1e-10 * Mb.trace() + 1e-12;
    ldlt_b.compute(Mb);
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt_x(XtWX);
  if (ldlt_x.info() != Eigen::Success) {
    throw std::runtime_error("fit_gamlss: singular linear design");
  }

  Eigen::VectorXd ac = p.ac;
  Eigen::VectorXd beta = p.beta;
  for (int it = 0; it < 100; ++it) {
    beta = ldlt_x.solve(XtWe - XtWB * ac);
    const Eigen::VectorXd ac_new = ldlt_b.solve(BtWe - XtWB.transpose() * beta);
    const double change = (ac_new - ac).lpNorm<Eigen::Infinity>();
    ac = ac_new;
    if (change < 1e-6 * (1.0 + ac.lpNorm<Eigen::Infinity>())) break;
  }
  if (!beta.allFinite() || !ac.allFinite()) {
    throw std::runtime_error("fit_gamlss: backfit diverged");
  }
  out.beta = beta;
  out.ac = ac;
  out.edf_smooth = ldlt_b.solve(BtWB).trace();
  return out;
}

}  // namespace

double FittedSmoothTerm::eval(double age, bool* extrapolated) const {
  double x = age;
  if (age < basis.x_min || age > basis.x_max) {
    if (extrapolated != nullptr) *extrapolated = true;
    const double b = std::clamp(age, basis.x_min, basis.x_max);
    const double value = bspline_basis_row(b, basis).dot(coefficients);
    const double slope = bspline_derivative_row(b, basis).dot(coefficients);
    return value + slope * (age - b);
  }
  return bspline_basis_row(x, basis).dot(coefficients);
}

double FittedParamPredictor::edf() const {
  if (fixed) return 0.0;
  return 1.0 + static_cast<double>(terms.size()) + (smooth ? smooth->edf : 0.0);
}

double FittedParamPredictor::eta(const Covariates& c, bool* extrapolated) const {
  double e = intercept;
  for (std::size_t j = 0; j < terms.size(); ++j) {
    e += coefficients[static_cast<Eigen::Index>(j)] * eval_term(terms[j], c);
  }
  if (smooth) e += smooth->eval(c.age, extrapolated);
  return e;
}

double FittedParamPredictor::value(const Covariates& c, bool* extrapolated) const {
  return apply_inverse_link(link, eta(c, extrapolated));
}

FittedGamlssModel fit_gamlss(const Dataset& data, Response response,
                             const GamlssSpec& spec) {
  const Eigen::Index n = static_cast<Eigen::Index>(data.size());
  if (n < 50) {
    throw std::invalid_argument("fit_gamlss: need at least 50 observations");
  }
  if (spec.mu.link != Link::log_link || spec.sigma.link != Link::log_link) {
    throw std::invalid_argument(
        "fit_gamlss: mu and sigma require the log link");
  }
  if (!(spec.convergence.deviance_tol > 0.0) || spec.convergence.max_outer < 1) {
    throw std::invalid_argument("fit_gamlss: bad convergence control");
  }

  Eigen::VectorXd y(n);
  std::vector<Covariates> covs(data.size());
  double age_min = std::numeric_limits<double>::infinity();
  double age_max = -age_min;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Observation& o = data[static_cast<std::size_t>(i)];
    y[i] = o.response(response);
    if (!(y[i] > 0.0) || !std::isfinite(y[i])) {
      throw std::invalid_argument("fit_gamlss: responses must be positive");
    }
    if (!std::isfinite(o.age_years) || !std::isfinite(o.height_cm)) {
      throw std::invalid_argument("fit_gamlss: non-finite covariates");
    }
    covs[static_cast<std::size_t>(i)] = Covariates::from(o);
    age_min = std::min(age_min, o.age_years);
    age_max = std::max(age_max, o.age_years);
  }
  if (y.maxCoeff() - y.minCoeff() < 1e-12 * std::fabs(y.maxCoeff())) {
    throw std::invalid_argument("fit_gamlss: response is constant");
  }

  const ParamFormula* formulas[3] = {&spec.mu, &spec.sigma, &spec.nu};
  ParamWork work[3];
  for (int k = 0; k < 3; ++k) {
    ParamWork& p = work[k];
    p.formula = *formulas[k];
    for (const auto& t : p.formula.linear_terms) {
      LinearTerm term = parse_term(t);
      if (!term.factors.empty()) p.terms.push_back(std::move(term));
    }
    p.X.resize(n, 1 + static_cast<Eigen::Index>(p.terms.size()));
    for (Eigen::Index i = 0; i < n; ++i) {
      p.X(i, 0) = 1.0;
      for (std::size_t j = 0; j < p.terms.size(); ++j) {
        p.X(i, 1 + static_cast<Eigen::Index>(j)) =
            eval_term(p.terms[j], covs[static_cast<std::size_t>(i)]);
      }
    }
    p.beta = Eigen::VectorXd::Zero(p.X.cols());

    if (p.formula.smooth) {
      const SmoothTermSpec& st = *p.formula.smooth;
      if (st.covariate != "age") {
        throw std::invalid_argument("fit_gamlss: smooth terms support age only");
      }
      const double pad = 0.01 * (age_max - age_min);
      p.basis.degree = st.degree;
      p.basis.n_interior_knots = st.n_interior_knots;
      p.basis.penalty_order = st.penalty_order;
      p.basis.x_min = age_min - pad;
      p.basis.x_max = age_max + pad;
      validate_spec(p.basis);
      const int K = p.basis.n_basis();
      if (!(st.target_edf > st.penalty_order - 1 + 0.05) ||
          st.target_edf > static_cast<double>(K - 1)) {
        throw std::invalid_argument(
            "fit_gamlss: smooth target_edf outside the attainable range");
      }

      Eigen::VectorXd ages(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        ages[i] = covs[static_cast<std::size_t>(i)].age;
      }
      const Eigen::MatrixXd B = bspline_basis(ages, p.basis);

      // Sum-to-zero reparameterization keeps the intercept identifiable:
      // columns of Q span the null space of the basis column sums.
      const Eigen::RowVectorXd colsum = B.colwise().sum();
      Eigen::HouseholderQR<Eigen::MatrixXd> qr(colsum.transpose());
      const Eigen::MatrixXd Qfull =
          qr.householderQ() * Eigen::MatrixXd::Identity(K, K);
      p.Q = Qfull.rightCols(K - 1);
      p.Bc = B * p.Q;
      p.Pc = p.Q.transpose() * difference_penalty(st.penalty_order, K) * p.Q;
      p.has_smooth = true;
      p.target_edf = st.target_edf;
      p.ac = Eigen::VectorXd::Zero(K - 1);
    }
  }

  // Starting values: mu at the response median, sigma from the MAD of
  // log(y), nu at 0.5 unless frozen.
  {
    std::vector<double> ylog(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      ylog[i] = std::log(y[static_cast<Eigen::Index>(i)]);
    }
    const double med_log = median_of(ylog);
    std::vector<double> dev_log(ylog.size());
    for (std::size_t i = 0; i < ylog.size(); ++i) {
      dev_log[i] = std::fabs(ylog[i] - med_log);
    }
    const double sigma0 = std::max(1.4826 * median_of(dev_log), 1e-3);
    work[kMu].beta[0] = med_log;  // log link
    work[kSigma].beta[0] = std::log(sigma0);
    const double nu0 = spec.nu_fixed.value_or(0.5);
    work[kNu].beta[0] =
        spec.nu.link == Link::log_link ? std::log(std::max(nu0, 1e-3)) : nu0;
    work[kNu].fixed = spec.nu_fixed.has_value();
  }

  Eigen::VectorXd etas[3];
  Eigen::VectorXd params[3];
  auto refresh_param = [&](int k) {
    etas[k] = work[k].eta();
    params[k].resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      params[k][i] = apply_inverse_link(work[k].formula.link, etas[k][i]);
    }
  };
  for (int k = 0; k < 3; ++k) refresh_param(k);

  double dev = global_deviance(y, params[kMu], params[kSigma], params[kNu]);
  if (!std::isfinite(dev)) {
    throw std::runtime_error("fit_gamlss: invalid deviance at starting values");
  }

  FittedGamlssModel model;
  model.response = response;
  model.n = static_cast<long>(n);

  bool converged = false;
  for (int outer = 0; outer < spec.convergence.max_outer; ++outer) {
    const double dev_cycle_start = dev;

    for (int k = 0; k < 3; ++k) {
      ParamWork& p = work[k];
      if (p.fixed) continue;

      // Quasi-Newton squared-score weights with a floor, and the usual
      // working response eta + u/w.
      Eigen::VectorXd u(n), w(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const BccgParams pt{params[kMu][i], params[kSigma][i], params[kNu][i]};
        const BccgScores sc = bccg_scores(y[i], pt);
        const double dparam = k == kMu ? sc.dmu : (k == kSigma ? sc.dsigma : sc.dnu);
        u[i] = dparam * link_derivative(p.formula.link, params[k][i]);
        w[i] = u[i] * u[i];
      }
      std::vector<double> wv(w.data(), w.data() + n);
      const double w_floor = std::max(1e-6 * median_of(wv), 1e-12);
      Eigen::VectorXd e(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        w[i] = std::max(w[i], w_floor);
        e[i] = etas[k][i] + u[i] / w[i];
      }

      UpdateResult upd;
      try {
        upd = propose_update(p, w, e);
      } catch (const std::exception&) {
        continue;  // skip this parameter for the cycle; others may recover
      }

      const Eigen::VectorXd beta_old = p.beta;
      const Eigen::VectorXd ac_old = p.ac;
      double step = 1.0;
      bool accepted = false;
      for (int h = 0; h <= spec.convergence.step_halvings_max; ++h) {
        p.beta = beta_old + step * (upd.beta - beta_old);
        if (p.has_smooth) p.ac = ac_old + step * (upd.ac - ac_old);
        refresh_param(k);
        const double dev_new =
            global_deviance(y, params[kMu], params[kSigma], params[kNu]);
        if (dev_new <= dev + 1e-10 * (1.0 + std::fabs(dev))) {
          dev = dev_new;
          accepted = true;
          break;
        }
        step *= 0.5;
      }
      if (!accepted) {
        p.beta = beta_old;
        p.ac = ac_old;
        refresh_param(k);
      } else if (p.has_smooth) {
        p.lambda = upd.lambda;
        p.edf_smooth = upd.edf_smooth;
      }
    }

    model.trace.push_back(dev);
    if (std::fabs(dev_cycle_start - dev) < spec.convergence.deviance_tol) {
      converged = true;
      break;
    }
  }

  model.converged = converged;
  model.global_deviance = dev;

  FittedParamPredictor* preds[3] = {&model.mu, &model.sigma, &model.nu};
  for (int k = 0; k < 3; ++k) {
    FittedParamPredictor& fp = *preds[k];
    ParamWork& p = work[k];
    fp.link = p.formula.link;
    fp.terms = p.terms;
    fp.intercept = p.beta[0];
    fp.coefficients = p.beta.tail(p.beta.size() - 1);
    fp.fixed = p.fixed;
    if (p.has_smooth) {
      FittedSmoothTerm st;
      st.basis = p.basis;
      st.coefficients = p.Q * p.ac;
      st.lambda = p.lambda;
      st.edf = p.edf_smooth;
      fp.smooth = std::move(st);
    }
    model.total_edf += fp.edf();
  }
  return model;
}

BccgParams predict_params(const FittedGamlssModel& model, const Covariates& c,
                          bool* extrapolated) {
  if (extrapolated != nullptr) *extrapolated = false;
  BccgParams p;
  p.mu = model.mu.value(c, extrapolated);
  p.sigma = model.sigma.value(c, extrapolated);
  p.nu = model.nu.value(c, extrapolated);
  return p;
}

std::vector<double> zscores(const FittedGamlssModel& model, const Dataset& data) {
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& o : data) {
    const BccgParams p = predict_params(model, Covariates::from(o));
    out.push_back(bccg_zscore(o.response(model.response), p));
  }
  return out;
}

std::vector<double> lln_curve(const FittedGamlssModel& model,
                              const std::vector<Covariates>& grid, double level) {
  std::vector<double> out;
  out.reserve(grid.size());
  for (const auto& c : grid) {
    out.push_back(bccg_quantile(level, predict_params(model, c)));
  }
  return out;
}

InformationCriteria information_criteria(const FittedGamlssModel& model) {
  InformationCriteria ic;
  ic.global_deviance = model.global_deviance;
  ic.aic = model.global_deviance + 2.0 * model.total_edf;
  ic.bic = model.global_deviance +
           std::log(static_cast<double>(model.n)) * model.total_edf;
  return ic;
}

}  // namespace refcurve
