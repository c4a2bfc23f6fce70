#include "cavitas/least_squares.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/SVD>

#include "cavitas/errors.hpp"

namespace cavitas::lsq {

namespace {

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

}  // namespace

Eigen::MatrixXd numeric_jacobian(const ResidualFn& f, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& r0, double rel_step) {
  Eigen::MatrixXd jac(r0.size(), x.size());
  Eigen::VectorXd xp = x;
  Eigen::VectorXd rp(r0.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    const double h = rel_step * std::max(1.0, std::abs(x[j]));
    xp[j] = x[j] + h;
    f(xp, rp);
    if (!all_finite(rp)) {
      // step back instead
      xp[j] = x[j] - h;
      f(xp, rp);
      jac.col(j) = (r0 - rp) / h;
    } else {
      jac.col(j) = (rp - r0) / h;
    }
    xp[j] = x[j];
  }
  return jac;
}

Result levenberg_marquardt(const ResidualFn& f, const Eigen::VectorXd& x0, Eigen::Index n_residuals,
                           const Options& opts) {
  Result res;
  res.x = x0;
  res.residuals.resize(n_residuals);
  f(res.x, res.residuals);
  if (!all_finite(res.residuals)) {
    std::ostringstream msg;
    msg << "model is not finite at the initial parameters [" << x0.transpose() << "]";
    throw NonFiniteModel(msg.str());
  }
  res.cost = 0.5 * res.residuals.squaredNorm();

  auto jacobian_at = [&](const Eigen::VectorXd& x, const Eigen::VectorXd& r) {
    if (!opts.jacobian) return numeric_jacobian(f, x, r, opts.fd_step);
    Eigen::MatrixXd jac(r.size(), x.size());
    opts.jacobian(x, jac);
    return jac;
  };
  double lambda = opts.initial_lambda;
  Eigen::VectorXd trial_r(n_residuals);
  res.jacobian = jacobian_at(res.x, res.residuals);

  for (res.n_iter = 0; res.n_iter < opts.max_iter; ++res.n_iter) {
    const Eigen::MatrixXd jtj = res.jacobian.transpose() * res.jacobian;
    const Eigen::VectorXd grad = res.jacobian.transpose() * res.residuals;
    res.gradient_norm = grad.lpNorm<Eigen::Infinity>();
    if (res.gradient_norm < opts.grad_tol) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd diag = jtj.diagonal().cwiseMax(1e-12);
    bool accepted = false;
    while (!accepted) {
      Eigen::MatrixXd damped = jtj;
      damped.diagonal() += lambda * diag;
      const Eigen::VectorXd step = damped.ldlt().solve(-grad);
      const Eigen::VectorXd trial = res.x + step;
      f(trial, trial_r);
      const double trial_cost = 0.5 * trial_r.squaredNorm();
      if (step.allFinite() && all_finite(trial_r) && trial_cost < res.cost) {
        const double drop = res.cost - trial_cost;
        res.x = trial;
        res.residuals = trial_r;
        const double old_cost = res.cost;
        res.cost = trial_cost;
        lambda = std::max(lambda / opts.lambda_down, 1e-15);
        accepted = true;
        if (drop < opts.rel_cost_tol * old_cost) {
          res.converged = true;
        }
      } else {
        lambda *= opts.lambda_up;
        if (lambda > 1e16) {
          // No descent direction left at floating-point resolution.
          res.converged = true;
          break;
        }
      }
    }
    res.jacobian = jacobian_at(res.x, res.residuals);
    if (res.converged) {
      ++res.n_iter;
      break;
    }
  }
  res.gradient_norm = (res.jacobian.transpose() * res.residuals).lpNorm<Eigen::Infinity>();
  return res;
}

Covariance covariance(const Eigen::MatrixXd& jacobian, double scale, double min_rcond) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jacobian, Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  Covariance out;
  if (s.size() == 0) return out;
  out.rcond = s[0] > 0.0 ? s[s.size() - 1] / s[0] : 0.0;
  if (!(out.rcond >= min_rcond)) {
    throw DegenerateFit("Jacobian is rank deficient (rcond " + std::to_string(out.rcond) + ")");
  }
  const Eigen::MatrixXd& v = svd.matrixV();
  const Eigen::VectorXd inv_s2 = s.cwiseProduct(s).cwiseInverse();
  out.matrix = scale * v * inv_s2.asDiagonal() * v.transpose();
  return out;
}

}  // namespace cavitas::lsq
