#pragma once

#include <Eigen/Dense>

namespace refcurve {

/// Equally spaced B-spline basis on [x_min, x_max]. Interior knots are
/// uniform and the knot grid continues at the same spacing beyond the
/// boundaries (Eilers-Marx convention), so coefficient vectors that are
/// linear in index reproduce exactly linear functions of x everywhere on
/// the domain. Basis size K = n_interior_knots + degree + 1.
struct SplineBasisSpec {
  int degree = 3;
  int n_interior_knots = 20;
  double x_min = 0.0;
  double x_max = 1.0;
  int penalty_order = 2;

  int n_basis() const { return n_interior_knots + degree + 1; }
};

void validate_spec(const SplineBasisSpec& spec);

/// Full knot vector (size n_interior_knots + 2*degree + 2).
Eigen::VectorXd spline_knots(const SplineBasisSpec& spec);

/// Basis matrix, one row per evaluation point. Rows sum to 1. Points
/// outside [x_min, x_max] raise std::domain_error; extrapolation is the
/// caller's business.
Eigen::MatrixXd bspline_basis(const Eigen::VectorXd& x,
                              const SplineBasisSpec& spec);

Eigen::RowVectorXd bspline_basis_row(double x, const SplineBasisSpec& spec);

/// First-derivative basis row d/dx at x (used for boundary-slope
/// extrapolation).
Eigen::RowVectorXd bspline_derivative_row(double x,
                                          const SplineBasisSpec& spec);

/// P = D'D for the order-th difference operator D on K coefficients.
/// Positive semidefinite with null-space dimension = order.
Eigen::MatrixXd difference_penalty(int order, int K);

struct SmoothFit {
  Eigen::VectorXd coefficients;
  double lambda = 0.0;
  double edf = 0.0;
  SplineBasisSpec basis;  // filled by callers that fitted an actual spline
};

/// Solves (B'WB + lambda*P) a = B'Wy and reports
/// edf = tr[(B'WB + lambda*P)^{-1} B'WB]. A near-singular system is
/// ridge-perturbed once by 1e-10 * trace before giving up.
SmoothFit fit_penalized_wls(const Eigen::MatrixXd& B, const Eigen::VectorXd& y,
                            const Eigen::VectorXd& w, double lambda,
                            const Eigen::MatrixXd& P);

/// edf for a given lambda with fixed design and weights.
double edf_for_lambda(const Eigen::MatrixXd& B, const Eigen::VectorXd& w,
                      const Eigen::MatrixXd& P, double lambda);

/// Bisection on log10(lambda) until |edf(lambda) - target_edf| < 0.01.
/// target_edf = K returns exactly 0. Targets at or below the penalty
/// null-space dimension are unattainable and raise std::domain_error.
double lambda_for_edf(const Eigen::MatrixXd& B, const Eigen::VectorXd& w,
                      const Eigen::MatrixXd& P, double target_edf);

}  // namespace refcurve
