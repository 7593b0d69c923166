#include "geoldp/hamiltonian.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>

#include "geoldp/switching.hpp"

namespace geoldp {

double tilt_value(const Model& model, const Point& x, const CotangentVector& p, int i) {
  return model.drift(x, i).dot(p.comps) + 0.5 * p.comps.squaredNorm();
}

Eigen::MatrixXd tilted_generator(const Model& model, const Point& x, const CotangentVector& p) {
  Eigen::MatrixXd Q = model.rates(x);
  for (int i = 0; i < model.n_states(); ++i) Q(i, i) += tilt_value(model, x, p, i);
  return Q;
}

namespace {

// Slow power iteration implies a small spectral gap; only then is the dense
// degeneracy check worth its cost.
constexpr int kSlowIters = 20000;
constexpr int kMaxIters = 100000;

void degeneracy_check(const Eigen::MatrixXd& A, double lambda) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(A, /*computeEigenvectors=*/false);
  double scale = std::max(1.0, std::abs(lambda));
  int near = 0;
  for (int k = 0; k < es.eigenvalues().size(); ++k) {
    if (std::abs(es.eigenvalues()[k].real() - lambda) <= 1e-12 * scale) ++near;
  }
  if (near > 1) {
    throw NumericalFailureError("principal_eigen",
                                "principal eigenvalue is tied within 1e-12");
  }
}

}  // namespace

EigenResult principal_eigen(const Eigen::MatrixXd& M) {
  const int n = static_cast<int>(M.rows());
  if (M.cols() != n || n < 1) throw ContractViolationError("principal_eigen: square matrix");
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && M(i, j) < 0.0) {
        throw ContractViolationError("principal_eigen: negative off-diagonal entry");
      }
    }
  }

  EigenResult res;
  if (n == 1) {
    res.eigenvalue = M(0, 0);
    res.right = Eigen::VectorXd::Ones(1);
    res.left = Eigen::VectorXd::Ones(1);
    res.iterations = 0;
    return res;
  }

  const double c = 1.0 + M.diagonal().cwiseAbs().maxCoeff();
  Eigen::MatrixXd A = M;
  A.diagonal().array() += c;  // entrywise nonnegative with positive diagonal
  const double scaleA = std::max(1.0, A.cwiseAbs().maxCoeff());
  const double tol = 1e-12 * scaleA;

  Eigen::VectorXd r = Eigen::VectorXd::Constant(n, 1.0 / std::sqrt(double(n)));
  Eigen::VectorXd l = r;
  double lambda = c;
  int it = 0;
  bool converged = false;
  for (; it < kMaxIters; ++it) {
    Eigen::VectorXd Ar = A * r;
    Eigen::VectorXd Al = A.transpose() * l;
    double nr = Ar.norm(), nl = Al.norm();
    if (!(nr > 0.0) || !(nl > 0.0)) {
      throw NumericalFailureError("principal_eigen", "iterate collapsed to zero");
    }
    r = Ar / nr;
    l = Al / nl;
    double lr = l.dot(r);
    if (lr <= 1e-300) {
      throw NumericalFailureError("principal_eigen", "left/right vectors became orthogonal");
    }
    lambda = l.dot(A * r) / lr;
    double res_r = (A * r - lambda * r).lpNorm<Eigen::Infinity>();
    double res_l = (A.transpose() * l - lambda * l).lpNorm<Eigen::Infinity>();
    if (res_r <= tol && res_l <= tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    degeneracy_check(A, lambda);
    throw NumericalFailureError("principal_eigen", "power iteration hit the iteration cap");
  }
  if (it >= kSlowIters) degeneracy_check(A, lambda);

  // normalize: right max entry 1, left to <l, r> = 1
  double rmax = r.maxCoeff();
  if (rmax <= 0.0) {
    throw NumericalFailureError("principal_eigen", "right vector lost positivity");
  }
  r /= rmax;
  l /= l.dot(r);
  res.eigenvalue = lambda - c;
  res.right = r;
  res.left = l;
  res.iterations = it + 1;
  return res;
}

EigenResult hamiltonian_eigen(const Model& model, const Point& x, const CotangentVector& p) {
  return principal_eigen(tilted_generator(model, x, p));
}

double hamiltonian(const Model& model, const Point& x, const CotangentVector& p) {
  return hamiltonian_eigen(model, x, p).eigenvalue;
}

double hamiltonian_variational(const Model& model, const Point& x, const CotangentVector& p) {
  const int n = model.n_states();
  Eigen::MatrixXd Q = model.rates(x);
  Eigen::VectorXd B(n);
  for (int i = 0; i < n; ++i) B[i] = tilt_value(model, x, p, i);
  if (n == 1) return B[0];

  // exponentiated-gradient ascent on F(pi) = <B, pi> - I(x, pi); the
  // envelope theorem gives dI/dpi_z from the inner minimizer alone
  Eigen::VectorXd pi = Eigen::VectorXd::Constant(n, 1.0 / n);
  auto F_and_grad = [&](const Eigen::VectorXd& m, Eigen::VectorXd& grad) {
    DonskerVaradhanResult dv = donsker_varadhan(Q, m);
    const Eigen::VectorXd& u = dv.log_g;
    for (int z = 0; z < n; ++z) {
      double rq = 0.0;
      for (int j = 0; j < n; ++j) {
        if (j != z) rq += Q(z, j) * (std::exp(u[j] - u[z]) - 1.0);
      }
      grad[z] = B[z] + rq;  // d/dpi_z of <B,pi> - I = B_z + (R g)/g at z
    }
    return B.dot(m) - dv.value;
  };

  Eigen::VectorXd grad(n), gnew(n);
  double F = F_and_grad(pi, grad);
  double eta = 0.5;
  for (int iter = 0; iter < 2000; ++iter) {
    double gbar = grad.dot(pi);
    double opt = 0.0;
    for (int z = 0; z < n; ++z) {
      // KKT: on the support the gradient is flat; off it, no ascent direction
      opt = std::max(opt, pi[z] > 1e-14 ? std::abs(grad[z] - gbar) : std::max(0.0, grad[z] - gbar));
    }
    if (opt <= 1e-10) break;
    bool moved = false;
    for (int ls = 0; ls < 50; ++ls) {
      Eigen::VectorXd cand = pi;
      double zmax = (eta * (grad.array() - gbar)).maxCoeff();
      for (int z = 0; z < n; ++z) {
        cand[z] = pi[z] * std::exp(eta * (grad[z] - gbar) - zmax);
      }
      cand /= cand.sum();
      double Fc = F_and_grad(cand, gnew);
      if (Fc > F + 1e-16) {
        pi = cand;
        F = Fc;
        grad = gnew;
        eta *= 1.3;
        moved = true;
        break;
      }
      eta *= 0.5;
    }
    if (!moved) break;
  }
  return F;
}

TangentVector grad_p_hamiltonian(const Model& model, const Point& x, const CotangentVector& p) {
  EigenResult eig = hamiltonian_eigen(model, x, p);
  const int n = model.n_states();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(x.man.dim);
  double wsum = 0.0;
  for (int i = 0; i < n; ++i) {
    double w = eig.left[i] * eig.right[i];
    wsum += w;
    g += w * (model.drift(x, i) + p.comps);  // grad_p B_i, sharp of p included
  }
  return TangentVector(x, g / wsum);
}

LagrangianResult legendre(const Model& model, const Point& x, const TangentVector& v) {
  const int d = x.man.dim;
  const double box = v.norm() + model.drift.bound + 1.0;
  auto clip = [&](Eigen::VectorXd q) {
    double nq = q.norm();
    if (nq > box) q *= box / nq;
    return q;
  };
  auto psi = [&](const Eigen::VectorXd& q) {
    return q.dot(v.comps) - hamiltonian(model, x, CotangentVector(x, q));
  };
  auto grad_psi = [&](const Eigen::VectorXd& q) {
    Eigen::VectorXd gH = grad_p_hamiltonian(model, x, CotangentVector(x, q)).comps;
    return (v.comps - gH).eval();
  };

  Eigen::VectorXd q = clip(v.comps);  // p = flat(v), identity on components
  double val = psi(q);
  const double tol = 1e-11 * (1.0 + v.norm());
  const double hfd = 1e-5;
  LagrangianResult out;
  int iter = 0;
  for (; iter < 100; ++iter) {
    Eigen::VectorXd g = grad_psi(q);
    if (g.lpNorm<Eigen::Infinity>() <= tol) {
      out.converged = true;
      break;
    }
    // FD Hessian of H (psi curvature is its negative); d <= 3 keeps it cheap
    Eigen::MatrixXd Hm(d, d);
    for (int k = 0; k < d; ++k) {
      Eigen::VectorXd qp = q + hfd * Eigen::VectorXd::Unit(d, k);
      Eigen::VectorXd qm = q - hfd * Eigen::VectorXd::Unit(d, k);
      Hm.col(k) = (grad_psi(qm) - grad_psi(qp)) / (2.0 * hfd);
    }
    Hm = 0.5 * (Hm + Hm.transpose());
    Eigen::VectorXd step = Hm.ldlt().solve(g);
    if (!step.allFinite() || step.dot(g) <= 0.0) step = g;  // trust the ascent direction
    double t = 1.0;
    bool improved = false;
    for (int ls = 0; ls < 60; ++ls) {
      Eigen::VectorXd cand = clip(q + t * step);
      double cv = psi(cand);
      if (cv > val + 1e-18) {
        q = cand;
        val = cv;
        improved = true;
        break;
      }
      t *= 0.5;
    }
    if (!improved) {
      out.converged = g.lpNorm<Eigen::Infinity>() <= 1e-7 * (1.0 + v.norm());
      break;
    }
  }
  if (iter == 100) out.converged = grad_psi(q).lpNorm<Eigen::Infinity>() <= tol;
  // L(x, v) >= 0: the zero covector is always an admissible candidate.
  if (val < 0.0) {
    Eigen::VectorXd q0 = Eigen::VectorXd::Zero(d);
    double val0 = psi(q0);
    if (val0 > val) {
      q = q0;
      val = val0;
    }
  }
  if (!q.allFinite() || !std::isfinite(val)) {
    throw NumericalFailureError("legendre", "iterates diverged");
  }
  out.value = val;
  out.p_star = CotangentVector(x, q);
  out.iterations = iter;
  return out;
}

std::vector<std::pair<double, double>> lagrangian_growth(const Model& model,
                                                         const std::vector<Point>& K_sample,
                                                         const std::vector<double>& s_grid) {
  if (K_sample.empty() || s_grid.empty()) {
    throw ContractViolationError("lagrangian_growth: empty sample or grid");
  }
  if (s_grid.front() <= 0.0) {
    throw ContractViolationError("lagrangian_growth: s grid must be positive increasing");
  }
  for (size_t i = 1; i < s_grid.size(); ++i) {
    if (s_grid[i] <= s_grid[i - 1]) {
      throw ContractViolationError("lagrangian_growth: s grid must be positive increasing");
    }
  }
  const int d = model.man.dim;
  // direction set per dimension count
  std::vector<Eigen::VectorXd> dirs;
  if (d == 1) {
    dirs.push_back(Eigen::VectorXd::Constant(1, 1.0));
    dirs.push_back(Eigen::VectorXd::Constant(1, -1.0));
  } else if (d == 2) {
    for (int k = 0; k < 16; ++k) {
      double a = 2.0 * M_PI * k / 16.0;
      Eigen::VectorXd u(2);
      u << std::cos(a), std::sin(a);
      dirs.push_back(u);
    }
  } else {
    for (int k = 0; k < 32; ++k) {  // Fibonacci directions
      double z = 1.0 - (2.0 * k + 1.0) / 32.0;
      double rad = std::sqrt(std::max(0.0, 1.0 - z * z));
      double a = 2.39996322972865332 * k;
      Eigen::VectorXd u(3);
      u << rad * std::cos(a), rad * std::sin(a), z;
      dirs.push_back(u);
    }
  }
  // shared magnitude set: every s plus a log ladder above it, nested so the
  // per-s infima are monotone by construction
  std::vector<double> mags(s_grid);
  double top = s_grid.back() * 4.0 + 2.0 * model.drift.bound + 2.0;
  for (double m = s_grid.front(); m < top; m *= 1.18) mags.push_back(m);
  std::sort(mags.begin(), mags.end());

  std::vector<std::pair<double, double>> table;
  std::vector<double> ratio(mags.size(), std::numeric_limits<double>::infinity());
  for (size_t mi = 0; mi < mags.size(); ++mi) {
    for (const Point& xp : K_sample) {
      for (const auto& dir : dirs) {
        double L = legendre(model, xp, TangentVector(xp, mags[mi] * dir)).value;
        ratio[mi] = std::min(ratio[mi], L / mags[mi]);
      }
    }
  }
  for (double s : s_grid) {
    double inf = std::numeric_limits<double>::infinity();
    for (size_t mi = 0; mi < mags.size(); ++mi) {
      if (mags[mi] >= s * (1.0 - 1e-12)) inf = std::min(inf, ratio[mi]);
    }
    table.emplace_back(s, s * inf);
  }
  return table;
}

}  // namespace geoldp
