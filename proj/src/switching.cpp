#include "geoldp/switching.hpp"

#include <cmath>

#include "geoldp/errors.hpp"

namespace geoldp {

Eigen::VectorXd invariant_measure(const Eigen::MatrixXd& Q) {
  validate_generator(Q);
  const int n = static_cast<int>(Q.rows());
  if (!is_irreducible(Q)) {
    throw NoUniqueInvariantError("generator is reducible, invariant measure is not unique");
  }
  Eigen::MatrixXd A(n + 1, n);
  A.topRows(n) = Q.transpose();
  A.bottomRows(1).setOnes();
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + 1);
  rhs[n] = 1.0;
  Eigen::VectorXd pi = A.colPivHouseholderQr().solve(rhs);
  for (int i = 0; i < n; ++i) {
    if (!(pi[i] > 0.0)) {
      throw NoUniqueInvariantError("augmented solve produced a nonpositive component");
    }
  }
  return pi;
}

TangentVector averaged_drift(const DriftField& b, const RateMatrixField& rates, const Point& x) {
  Eigen::VectorXd pi = invariant_measure(rates(x));
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(x.man.dim);
  for (int i = 0; i < rates.n_states; ++i) acc += pi[i] * b(x, i);
  return TangentVector(x, acc);
}

namespace {

// J(u) = sum_z pi_z sum_{j != z} q_zj (e^{u_j - u_z} - 1); convex in u.
double dv_objective(const Eigen::MatrixXd& Q, const Eigen::VectorXd& pi,
                    const Eigen::VectorXd& u) {
  const int n = static_cast<int>(Q.rows());
  double J = 0.0;
  for (int z = 0; z < n; ++z) {
    if (pi[z] == 0.0) continue;
    for (int j = 0; j < n; ++j) {
      if (j == z) continue;
      J += pi[z] * Q(z, j) * (std::exp(u[j] - u[z]) - 1.0);
    }
  }
  return J;
}

void dv_grad_hess(const Eigen::MatrixXd& Q, const Eigen::VectorXd& pi, const Eigen::VectorXd& u,
                  Eigen::VectorXd& grad, Eigen::MatrixXd& hess) {
  const int n = static_cast<int>(Q.rows());
  grad.setZero(n);
  hess.setZero(n, n);
  for (int z = 0; z < n; ++z) {
    if (pi[z] == 0.0) continue;
    for (int j = 0; j < n; ++j) {
      if (j == z) continue;
      double w = pi[z] * Q(z, j) * std::exp(u[j] - u[z]);
      grad[j] += w;
      grad[z] -= w;
      hess(j, j) += w;
      hess(z, z) += w;
      hess(j, z) -= w;
      hess(z, j) -= w;
    }
  }
}

}  // namespace

DonskerVaradhanResult donsker_varadhan(const Eigen::MatrixXd& Q, const Eigen::VectorXd& pi) {
  validate_generator(Q);
  const int n = static_cast<int>(Q.rows());
  if (pi.size() != n) throw ContractViolationError("donsker_varadhan: pi has wrong size");
  double mass = 0.0;
  for (int i = 0; i < n; ++i) {
    if (pi[i] < -1e-12) throw ContractViolationError("donsker_varadhan: pi has negative mass");
    mass += pi[i];
  }
  if (std::abs(mass - 1.0) > 1e-9) {
    throw ContractViolationError("donsker_varadhan: pi does not sum to 1");
  }

  const double kTol = 1e-10;
  const double kCap = 45.0;  // e^{+-45} stays well inside double range
  const int kMaxIters = 200;
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd grad(n);
  Eigen::MatrixXd hess(n, n);
  double J = dv_objective(Q, pi, u);
  int iter = 0;
  for (; iter < kMaxIters; ++iter) {
    dv_grad_hess(Q, pi, u, grad, hess);
    // gauge: state 0 stays pinned at u_0 = 0
    Eigen::VectorXd g = grad.tail(n - 1 > 0 ? n - 1 : 0);
    if (n == 1 || g.lpNorm<Eigen::Infinity>() <= kTol) break;
    Eigen::MatrixXd H = hess.bottomRightCorner(n - 1, n - 1);
    H.diagonal().array() += 1e-14 + 1e-12 * H.diagonal().cwiseAbs().maxCoeff();
    Eigen::VectorXd step = H.ldlt().solve(-g);
    if (!step.allFinite() || step.dot(g) >= 0.0) step = -g;  // damped fallback
    double t = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 60; ++ls) {
      Eigen::VectorXd cand = u;
      for (int k = 1; k < n; ++k) {
        cand[k] = std::clamp(u[k] + t * step[k - 1], -kCap, kCap);
      }
      double Jc = dv_objective(Q, pi, cand);
      if (Jc < J - 1e-18) {
        u = cand;
        J = Jc;
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) break;  // at the numerical floor (or cap-bound minimum)
  }
  dv_grad_hess(Q, pi, u, grad, hess);
  bool at_cap = false;
  for (int k = 1; k < n; ++k) at_cap = at_cap || std::abs(u[k]) >= kCap - 1e-9;
  if (n > 1 && grad.tail(n - 1).lpNorm<Eigen::Infinity>() > 1e-6 && !at_cap) {
    throw NumericalFailureError("donsker_varadhan",
                                "Newton did not reach the gradient tolerance");
  }
  DonskerVaradhanResult res;
  res.value = -J;
  if (res.value < 0.0 && res.value > -1e-12) res.value = 0.0;  // roundoff at the optimum
  res.log_g = u;
  res.iterations = iter;
  return res;
}

}  // namespace geoldp
