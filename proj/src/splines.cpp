#include "refcurve/splines.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace refcurve {

void validate_spec(const SplineBasisSpec& spec) {
  if (spec.degree < 0) {
    throw std::domain_error("spline: degree must be >= 0");
  }
  if (spec.penalty_order < 1 || spec.n_interior_knots < spec.penalty_order) {
    throw std::domain_error(
        "spline: need n_interior_knots >= penalty_order >= 1");
  }
  if (!(spec.x_min < spec.x_max)) {
    throw std::domain_error("spline: empty domain");
  }
}

Eigen::VectorXd spline_knots(const SplineBasisSpec& spec) {
  validate_spec(spec);
  const int n_knots = spec.n_interior_knots + 2 * spec.degree + 2;
  const double h =
      (spec.x_max - spec.x_min) / static_cast<double>(spec.n_interior_knots + 1);
  Eigen::VectorXd t(n_knots);
  for (int j = 0; j < n_knots; ++j) {
    t[j] = spec.x_min + h * static_cast<double>(j - spec.degree);
  }
  return t;
}

namespace {

int find_span(double x, const Eigen::VectorXd& t, const SplineBasisSpec& spec) {
  // number of basis functions K; valid spans are degree .. K-1
  const int K = spec.n_basis();
  const double h = t[1] - t[0];
  int span = spec.degree + static_cast<int>((x - spec.x_min) / h);
  if (span > K - 1) span = K - 1;  // x == x_max lands in the last span
  if (span < spec.degree) span = spec.degree;
  return span;
}

// The NURBS Book A2.2: values of the degree+1 basis functions that are
// nonzero on the span containing x.
void basis_funs(int span, double x, int degree, const Eigen::VectorXd& t,
                double* N) {
  N[0] = 1.0;
  double left[16];
  double right[16];
  for (int j = 1; j <= degree; ++j) {
    left[j] = x - t[span + 1 - j];
    right[j] = t[span + j] - x;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double temp = N[r] / (right[r + 1] + left[j - r]);
      N[r] = saved + right[r + 1] * temp;
      saved = left[j - r] * temp;
    }
    N[j] = saved;
  }
}

void check_in_domain(double x, const SplineBasisSpec& spec) {
  if (!(x >= spec.x_min && x <= spec.x_max)) {
    throw std::domain_error("bspline_basis: x = " + std::to_string(x) +
                            " outside [" + std::to_string(spec.x_min) + ", " +
                            std::to_string(spec.x_max) + "]");
  }
}

}  // namespace

Eigen::RowVectorXd bspline_basis_row(double x, const SplineBasisSpec& spec) {
  validate_spec(spec);
  check_in_domain(x, spec);
  if (spec.degree > 15) {
    throw std::domain_error("bspline_basis: degree > 15 not supported");
  }
  const Eigen::VectorXd t = spline_knots(spec);
  const int span = find_span(x, t, spec);
  double N[16];
  basis_funs(span, x, spec.degree, t, N);
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(spec.n_basis());
  for (int r = 0; r <= spec.degree; ++r) {
    row[span - spec.degree + r] = N[r];
  }
  return row;
}

Eigen::MatrixXd bspline_basis(const Eigen::VectorXd& x,
                              const SplineBasisSpec& spec) {
  validate_spec(spec);
  if (spec.degree > 15) {
    throw std::domain_error("bspline_basis: degree > 15 not supported");
  }
  const Eigen::VectorXd t = spline_knots(spec);
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(x.size(), spec.n_basis());
  double N[16];
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    check_in_domain(x[i], spec);
    const int span = find_span(x[i], t, spec);
    basis_funs(span, x[i], spec.degree, t, N);
    for (int r = 0; r <= spec.degree; ++r) {
      B(i, span - spec.degree + r) = N[r];
    }
  }
  return B;
}

Eigen::RowVectorXd bspline_derivative_row(double x,
                                          const SplineBasisSpec& spec) {
  validate_spec(spec);
  check_in_domain(x, spec);
  if (spec.degree == 0) {
    return Eigen::RowVectorXd::Zero(spec.n_basis());
  }
  // B'_{i,p} = p/(t_{i+p}-t_i) B_{i,p-1} - p/(t_{i+p+1}-t_{i+1}) B_{i+1,p-1}
  const Eigen::VectorXd t = spline_knots(spec);
  const int span = find_span(x, t, spec);
  double N[16];
  basis_funs(span, x, spec.degree - 1, t, N);  // functions span-p+1 .. span
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(spec.n_basis());
  const int p = spec.degree;
  for (int r = 0; r < p; ++r) {
    const int i = span - p + 1 + r;  // index of the (p-1)-degree function
    const double val = N[r];
    row[i] += val * static_cast<double>(p) / (t[i + p] - t[i]);
    row[i - 1] -= val * static_cast<double>(p) / (t[i + p] - t[i]);
  }
  return row;
}

Eigen::MatrixXd difference_penalty(int order, int K) {
  if (order < 1 || order >= K) {
    throw std::domain_error("difference_penalty: need 1 <= order < K");
  }
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(K - order, K);
  // row coefficients of the order-th forward difference
  std::vector<double> c(order + 1);
  for (int j = 0; j <= order; ++j) {
    double binom = 1.0;
    for (int m = 0; m < j; ++m) {
      binom = binom * static_cast<double>(order - m) / static_cast<double>(m + 1);
    }
    c[j] = ((order - j) % 2 == 0 ? 1.0 : -1.0) * binom;
  }
  for (int r = 0; r < K - order; ++r) {
    for (int j = 0; j <= order; ++j) {
      D(r, r + j) = c[j];
    }
  }
  return D.transpose() * D;
}

namespace {

struct PenalizedSystem {
  Eigen::MatrixXd A;  // B'WB
  Eigen::VectorXd rhs;
};

PenalizedSystem cross_products(const Eigen::MatrixXd& B,
                               const Eigen::VectorXd& y,
                               const Eigen::VectorXd& w) {
  if (B.rows() != y.size() || B.rows() != w.size()) {
    throw std::invalid_argument("fit_penalized_wls: dimension mismatch");
  }
  if ((w.array() <= 0.0).any()) {
    throw std::invalid_argument("fit_penalized_wls: weights must be positive");
  }
  PenalizedSystem sys;
  const Eigen::MatrixXd Bw = w.asDiagonal() * B;
  sys.A = B.transpose() * Bw;
  sys.rhs = Bw.transpose() * y;
  return sys;
}

bool solve_ok(const Eigen::LDLT<Eigen::MatrixXd>& ldlt,
              const Eigen::MatrixXd& M, const Eigen::VectorXd& rhs,
              Eigen::VectorXd* out) {
  if (ldlt.info() != Eigen::Success) return false;
  Eigen::VectorXd a = ldlt.solve(rhs);
  if (!a.allFinite()) return false;
  const double resid = (M * a - rhs).norm();
  const double scale = rhs.norm() + M.norm() * a.norm();
  if (resid > 1e-8 * (scale + 1.0)) return false;
  *out = std::move(a);
  return true;
}

}  // namespace

SmoothFit fit_penalized_wls(const Eigen::MatrixXd& B, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& w, double lambda,
                            const Eigen::MatrixXd& P) {
  if (lambda < 0.0 || P.rows() != B.cols() || P.cols() != B.cols()) {
    throw std::invalid_argument("fit_penalized_wls: bad penalty or lambda");
  }
  const PenalizedSystem sys = cross_products(B, y, w);
  Eigen::MatrixXd M = sys.A + lambda * P;

  Eigen::VectorXd a;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
  if (!solve_ok(ldlt, M, sys.rhs, &a)) {
    M.diagonal().array() += 1e-10 * M.trace();
    ldlt.compute(M);
    if (!solve_ok(ldlt, M, sys.rhs, &a)) {
      throw std::runtime_error(
          "fit_penalized_wls: singular system after ridge fallback");
    }
  }

  SmoothFit fit;
  fit.coefficients = a;
  fit.lambda = lambda;
  fit.edf = ldlt.solve(sys.A).trace();
  return fit;
}

double edf_for_lambda(const Eigen::MatrixXd& B, const Eigen::VectorXd& w,
                      const Eigen::MatrixXd& P, double lambda) {
  const Eigen::MatrixXd Bw = w.asDiagonal() * B;
  const Eigen::MatrixXd A = B.transpose() * Bw;
  Eigen::MatrixXd M = A + lambda * P;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
  if (ldlt.info() != Eigen::Success) {
    M.diagonal().array() += 1e-10 * M.trace();
    ldlt.compute(M);
  }
  return ldlt.solve(A).trace();
}

double lambda_for_edf(const Eigen::MatrixXd& B, const Eigen::VectorXd& w,
                      const Eigen::MatrixXd& P, double target_edf) {
  const int K = static_cast<int>(B.cols());
  const int null_dim = K - static_cast<int>(Eigen::FullPivLU<Eigen::MatrixXd>(P).rank());
  if (target_edf >= static_cast<double>(K) - 1e-9) {
    if (target_edf > static_cast<double>(K) + 1e-9) {
      throw std::domain_error("lambda_for_edf: target above basis size");
    }
    return 0.0;
  }
  if (target_edf <= static_cast<double>(null_dim)) {
    throw std::domain_error("lambda_for_edf: target at or below penalty null space");
  }

  double lo = -14.0, hi = 14.0;  // log10(lambda)
  const double edf_hi_lambda = edf_for_lambda(B, w, P, std::pow(10.0, hi));
  if (edf_hi_lambda > target_edf + 0.01) {
    throw std::domain_error("lambda_for_edf: target unattainable in bracket");
  }
  double lambda = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    lambda = std::pow(10.0, mid);
    const double edf = edf_for_lambda(B, w, P, lambda);
    if (std::fabs(edf - target_edf) < 0.01) {
      return lambda;
    }
    if (edf > target_edf) {
      lo = mid;  // need more penalty
    } else {
      hi = mid;
    }
  }
  throw std::runtime_error("lambda_for_edf: bisection failed to converge");
}

}  // namespace refcurve
