#pragma once

#include <functional>

#include <Eigen/Core>

// Damped Gauss-Newton (Levenberg-Marquardt) on a residual vector.
namespace cavitas::lsq {

/// Fills r (pre-sized) for parameters x. Non-finite entries mark x as inadmissible.
using ResidualFn = std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& r)>;

/// Fills jac (pre-sized residuals x parameters) at x.
using JacobianFn = std::function<void(const Eigen::VectorXd& x, Eigen::MatrixXd& jac)>;

struct Options {
  int max_iter = 500;
  double rel_cost_tol = 1e-10;
  double grad_tol = 1e-8;
  double initial_lambda = 1e-3;
  double lambda_up = 10.0;
  double lambda_down = 10.0;
  double fd_step = 1e-7;  // relative forward-difference step
  JacobianFn jacobian;    // analytic Jacobian; forward differences when empty
};

struct Result {
  Eigen::VectorXd x;
  Eigen::VectorXd residuals;
  Eigen::MatrixXd jacobian;
  double cost = 0.0;  // 0.5 * |r|^2
  double gradient_norm = 0.0;
  int n_iter = 0;
  bool converged = false;
};

Eigen::MatrixXd numeric_jacobian(const ResidualFn& f, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& r0, double rel_step);

/// Throws NonFiniteModel if the residual at x0 is not finite.
Result levenberg_marquardt(const ResidualFn& f, const Eigen::VectorXd& x0, Eigen::Index n_residuals,
                           const Options& opts = {});

struct Covariance {
  Eigen::MatrixXd matrix;
  double rcond = 0.0;  // smallest / largest singular value of J
};

/// scale * (J^T J)^-1 via SVD. Throws DegenerateFit when rcond < min_rcond.
Covariance covariance(const Eigen::MatrixXd& jacobian, double scale, double min_rcond = 1e-12);

}  // namespace cavitas::lsq
