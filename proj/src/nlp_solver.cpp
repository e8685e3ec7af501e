#include "asvempc/nlp_solver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <stdexcept>
#include <vector>

namespace asvempc {

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::infeasible_step: return "infeasible_step";
  }
  return "unknown";
}

Eigen::VectorXd gradient_fd(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& point, double step) {
  if (!(step > 0)) throw std::invalid_argument("gradient_fd: step must be positive");
  Eigen::VectorXd g(point.size());
  Eigen::VectorXd x = point;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    const double h = step * (1.0 + std::abs(point[i]));
    x[i] = point[i] + h;
    const double fp = f(x);
    x[i] = point[i] - h;
    const double fm = f(x);
    x[i] = point[i];
    if (!std::isfinite(fp) || !std::isfinite(fm))
      throw std::runtime_error("gradient_fd: non-finite evaluation");
    g[i] = (fp - fm) / (2 * h);
  }
  return g;
}

Eigen::MatrixXd jacobian_fd(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& point, double step) {
  if (!(step > 0)) throw std::invalid_argument("jacobian_fd: step must be positive");
  Eigen::VectorXd x = point;
  Eigen::MatrixXd J;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    const double h = step * (1.0 + std::abs(point[i]));
    x[i] = point[i] + h;
    const Eigen::VectorXd fp = f(x);
    x[i] = point[i] - h;
    const Eigen::VectorXd fm = f(x);
    x[i] = point[i];
    if (!fp.allFinite() || !fm.allFinite())
      throw std::runtime_error("jacobian_fd: non-finite evaluation");
    if (J.size() == 0) J.resize(fp.size(), point.size());
    J.col(i) = (fp - fm) / (2 * h);
  }
  return J;
}

Eigen::VectorXd warm_start_shift(const Eigen::VectorXd& previous, const HorizonLayout& layout) {
  if (layout.horizon < 1 || previous.size() != layout.dim())
    throw std::invalid_argument("warm_start_shift: layout mismatch");
  if (layout.has_terminal_times && !(layout.dt > 0))
    throw std::invalid_argument("warm_start_shift: dt must be positive");
  Eigen::VectorXd z = previous;
  const int H = layout.horizon;
  for (int k = 0; k + 1 < H; ++k) {
    z[2 * k] = previous[2 * (k + 1)];
    z[2 * k + 1] = previous[2 * (k + 1) + 1];
  }
  // last thrust pair stays duplicated from the copy
  if (layout.has_terminal_times) {
    z[2 * H] = previous[2 * H];
    z[2 * H + 1] = std::max(0.0, previous[2 * H + 1] - layout.dt);
  }
  return z;
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

struct QpResult {
  VectorXd p;
  VectorXd lambda;
};

// min 1/2 p'Bp + g'p  s.t.  A p = b,  lo <= p <= hi.
// Active-set iteration on the box: solve the equality-KKT system on the free
// variables, fix the most violated bound, release wrong-sign multipliers.
QpResult solve_box_eq_qp(const MatrixXd& B, const VectorXd& g, const MatrixXd& A,
                         const VectorXd& b, const VectorXd& lo, const VectorXd& hi) {
  const int n = static_cast<int>(g.size());
  const int m = static_cast<int>(A.rows());
  enum class BS { free_var, at_lower, at_upper };
  std::vector<BS> st(n, BS::free_var);
  VectorXd p = VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) p[i] = std::clamp(0.0, lo[i], hi[i]);
  VectorXd lambda = VectorXd::Zero(m);
  const double mu_tol = 1e-10 * (1 + g.lpNorm<Eigen::Infinity>());
  const int max_passes = 3 * n + 10;
  const int release_cap = 2 * n;
  int releases = 0;

  for (int pass = 0; pass < max_passes; ++pass) {
    std::vector<int> F;
    F.reserve(n);
    for (int i = 0; i < n; ++i)
      if (st[i] == BS::free_var) F.push_back(i);
    const int nf = static_cast<int>(F.size());

    VectorXd p_fixed = p;
    for (int i : F) p_fixed[i] = 0;
    const VectorXd r1 = -g - B * p_fixed;
    const VectorXd r2 = b - A * p_fixed;

    if (nf > 0) {
      MatrixXd K = MatrixXd::Zero(nf + m, nf + m);
      K.topLeftCorner(nf, nf) = B(F, F);
      for (int a = 0; a < nf; ++a)
        for (int r = 0; r < m; ++r) {
          K(nf + r, a) = A(r, F[a]);
          K(a, nf + r) = A(r, F[a]);
        }
      VectorXd rhs(nf + m);
      rhs.head(nf) = r1(F);
      rhs.tail(m) = r2;
      VectorXd z = Eigen::PartialPivLU<MatrixXd>(K).solve(rhs);
      const double resid = (K * z - rhs).lpNorm<Eigen::Infinity>();
      if (!z.allFinite() || resid > 1e-8 * (1 + rhs.lpNorm<Eigen::Infinity>())) {
        MatrixXd Kr = K;
        Kr.topLeftCorner(nf, nf).diagonal().array() += 1e-10;
        Kr.bottomRightCorner(m, m).diagonal().array() -= 1e-10;
        z = Eigen::FullPivLU<MatrixXd>(Kr).solve(rhs);
        if (!z.allFinite()) z.setZero();
      }
      for (int a = 0; a < nf; ++a) p[F[a]] = z[a];
      lambda = z.tail(m);
    } else if (m > 0) {
      MatrixXd AAt = A * A.transpose();
      AAt.diagonal().array() += 1e-12;
      lambda = AAt.ldlt().solve(-A * (B * p + g));
    }

    // most violated bound among the free variables
    int worst = -1;
    double worst_amt = 0;
    bool worst_low = false;
    for (int i : F) {
      const double tol = 1e-11 * (1 + std::max(std::abs(lo[i]), std::abs(hi[i])));
      if (p[i] < lo[i] - tol && lo[i] - p[i] > worst_amt) {
        worst = i;
        worst_amt = lo[i] - p[i];
        worst_low = true;
      }
      if (p[i] > hi[i] + tol && p[i] - hi[i] > worst_amt) {
        worst = i;
        worst_amt = p[i] - hi[i];
        worst_low = false;
      }
    }
    if (worst >= 0) {
      st[worst] = worst_low ? BS::at_lower : BS::at_upper;
      p[worst] = worst_low ? lo[worst] : hi[worst];
      continue;
    }

    // release the fixed variable with the worst wrong-sign multiplier
    const VectorXd grad_l = B * p + g + A.transpose() * lambda;
    int rel = -1;
    double rel_amt = mu_tol;
    for (int i = 0; i < n; ++i) {
      if (st[i] == BS::at_lower && -grad_l[i] > rel_amt) {
        rel = i;
        rel_amt = -grad_l[i];
      } else if (st[i] == BS::at_upper && grad_l[i] > rel_amt) {
        rel = i;
        rel_amt = grad_l[i];
      }
    }
    if (rel >= 0 && releases < release_cap) {
      st[rel] = BS::free_var;
      ++releases;
      continue;
    }
    break;
  }

  for (int i = 0; i < n; ++i) p[i] = std::clamp(p[i], lo[i], hi[i]);
  return {p, lambda};
}

struct EvalPoint {
  double f{kInf};
  VectorXd c;
  bool finite{false};
};

}  // namespace

SolveResult SqpSolver::solve(const NlpProblem& problem, const Eigen::VectorXd& initial,
                             const SolveOptions& options) {
  const int n = problem.dim;
  const int m = problem.eq_dim;
  if (n < 1) throw std::invalid_argument("solve: problem dimension must be positive");
  if (initial.size() != n) throw std::invalid_argument("solve: initial point has wrong size");
  if (problem.lower.size() != n || problem.upper.size() != n)
    throw std::invalid_argument("solve: bounds have wrong size");
  if ((problem.lower.array() > problem.upper.array()).any())
    throw std::invalid_argument("solve: lower bound exceeds upper bound");
  if (!problem.fused && !problem.objective)
    throw std::invalid_argument("solve: objective callback missing");
  if (!problem.fused && m > 0 && !problem.eq_constraints)
    throw std::invalid_argument("solve: equality callback missing");

  const auto eval = [&](const VectorXd& x) -> EvalPoint {
    EvalPoint e;
    if (problem.fused) {
      problem.fused(x, e.f, e.c);
    } else {
      e.f = problem.objective(x);
      e.c = m > 0 ? problem.eq_constraints(x) : VectorXd();
    }
    if (e.c.size() != m) e.c = VectorXd::Zero(m);
    e.finite = std::isfinite(e.f) && e.c.allFinite();
    return e;
  };

  std::ofstream trace;
  if (!options.trace_path.empty()) {
    trace.open(options.trace_path, std::ios::trunc);
    trace << "iteration,objective,kkt,violation,step\n" << std::setprecision(17);
  }
  const auto trace_row = [&](int it, double f, double kkt, double viol, double step) {
    if (trace.is_open()) trace << it << "," << f << "," << kkt << "," << viol << "," << step << "\n";
  };

  VectorXd x = initial.cwiseMax(problem.lower).cwiseMin(problem.upper);
  EvalPoint cur = eval(x);

  SolveResult res;
  res.solution = x;
  res.objective = cur.f;
  if (!cur.finite) {
    res.status = SolveStatus::infeasible_step;
    res.constraint_violation = kInf;
    res.kkt_residual = kInf;
    return res;
  }

  MatrixXd B = MatrixXd::Identity(n, n);
  double nu = 0;  // l1 merit penalty weight
  int stalls = 0;
  bool have_pending = false;  // deferred BFGS data from the previous step
  VectorXd pend_s, pend_gl;   // step and old Lagrangian gradient

  // derivatives at x via fused central differences; false on non-finite probes
  VectorXd g(n);
  MatrixXd A(m, n);
  const auto derivatives = [&]() -> bool {
    VectorXd xp = x;
    for (int i = 0; i < n; ++i) {
      const double h = options.fd_step * (1 + std::abs(x[i]));
      xp[i] = x[i] + h;
      const EvalPoint ep = eval(xp);
      xp[i] = x[i] - h;
      const EvalPoint em = eval(xp);
      xp[i] = x[i];
      if (!ep.finite || !em.finite) return false;
      g[i] = (ep.f - em.f) / (2 * h);
      if (m > 0) A.col(i) = (ep.c - em.c) / (2 * h);
    }
    return true;
  };

  int iter = 0;
  res.status = SolveStatus::max_iter;
  VectorXd lambda = VectorXd::Zero(m);

  while (iter < options.max_iterations) {
    ++iter;
    if (!derivatives()) {
      res.status = SolveStatus::infeasible_step;
      break;
    }

    if (have_pending) {
      // damped BFGS update with the freshly computed Lagrangian gradient
      const VectorXd gl_new = m > 0 ? VectorXd(g + A.transpose() * lambda) : g;
      VectorXd yv = gl_new - pend_gl;
      const VectorXd Bs = B * pend_s;
      const double sBs = pend_s.dot(Bs);
      double sy = pend_s.dot(yv);
      if (sBs > 1e-14) {
        if (sy < 0.2 * sBs) {
          const double theta = 0.8 * sBs / (sBs - sy);
          yv = theta * yv + (1 - theta) * Bs;
          sy = pend_s.dot(yv);
        }
        if (sy > 1e-14) {
          B += yv * yv.transpose() / sy - Bs * Bs.transpose() / sBs;
          B = ((B + B.transpose()) / 2).eval();
        } else {
          B.setIdentity();
        }
      }
      have_pending = false;
    }

    const VectorXd lo = problem.lower - x;
    const VectorXd hi = problem.upper - x;
    const VectorXd b = m > 0 ? VectorXd(-cur.c) : VectorXd();
    const QpResult qp = solve_box_eq_qp(B, g, m > 0 ? A : MatrixXd::Zero(0, n), b, lo, hi);
    lambda = qp.lambda;

    // projected KKT residual: stationarity components pointing into the box
    VectorXd grad_l = m > 0 ? VectorXd(g + A.transpose() * lambda) : g;
    for (int i = 0; i < n; ++i) {
      const double eb_lo = 1e-9 * (1 + std::abs(problem.lower[i]));
      const double eb_hi = 1e-9 * (1 + std::abs(problem.upper[i]));
      if (x[i] - problem.lower[i] <= eb_lo) grad_l[i] = std::min(grad_l[i], 0.0);
      if (problem.upper[i] - x[i] <= eb_hi) grad_l[i] = std::max(grad_l[i], 0.0);
    }
    const double kkt = grad_l.lpNorm<Eigen::Infinity>();
    const double viol = m > 0 ? cur.c.lpNorm<Eigen::Infinity>() : 0.0;
    res.kkt_residual = kkt;
    res.constraint_violation = viol;

    if (kkt <= options.kkt_tolerance && viol <= options.constraint_tolerance) {
      res.status = SolveStatus::converged;
      trace_row(iter, cur.f, kkt, viol, 0.0);
      break;
    }

    // l1 merit: phi = f + nu*|c|_1; keep nu above the multiplier scale
    const double c1norm = m > 0 ? cur.c.lpNorm<1>() : 0.0;
    if (m > 0) nu = std::max(nu, lambda.lpNorm<Eigen::Infinity>() * 1.1 + 1e-6);
    const double gtp = g.dot(qp.p);
    double descent = gtp - nu * c1norm;
    if (descent >= 0 && c1norm > 1e-14) {
      nu = std::max(nu * options.merit_penalty_growth, 2 * std::abs(gtp) / c1norm + 1e-6);
      descent = gtp - nu * c1norm;
    }

    if (descent >= 0 || qp.p.lpNorm<Eigen::Infinity>() < 1e-15) {
      // not a usable direction: restart the Hessian model once, then give up
      trace_row(iter, cur.f, kkt, viol, 0.0);
      B.setIdentity();
      if (++stalls >= 2) break;
      continue;
    }

    const double phi0 = cur.f + nu * c1norm;
    double alpha = 1.0;
    bool accepted = false;
    EvalPoint trial;
    VectorXd x_try;
    while (alpha >= options.min_step) {
      x_try = (x + alpha * qp.p).cwiseMax(problem.lower).cwiseMin(problem.upper);
      trial = eval(x_try);
      if (!trial.finite) {
        res.status = SolveStatus::infeasible_step;
        trace_row(iter, cur.f, kkt, viol, alpha);
        res.solution = x;
        res.objective = cur.f;
        res.iterations = iter;
        if (trace.is_open()) trace.flush();
        return res;
      }
      const double phi_try = trial.f + nu * (m > 0 ? trial.c.lpNorm<1>() : 0.0);
      if (phi_try <= phi0 + options.armijo_c1 * alpha * descent) {
        accepted = true;
        break;
      }
      alpha *= options.backtrack_factor;
    }
    if (!accepted) {
      trace_row(iter, cur.f, kkt, viol, 0.0);
      B.setIdentity();
      if (++stalls >= 2) break;
      continue;
    }
    stalls = 0;

    pend_s = x_try - x;
    pend_gl = m > 0 ? VectorXd(g + A.transpose() * lambda) : g;
    have_pending = pend_s.lpNorm<Eigen::Infinity>() > 1e-15;

    x = x_try;
    cur = trial;
    trace_row(iter, cur.f, kkt, viol, alpha);
  }

  res.solution = x;
  res.objective = cur.f;
  res.iterations = iter;
  res.constraint_violation = m > 0 ? cur.c.lpNorm<Eigen::Infinity>() : 0.0;
  if (trace.is_open()) trace.flush();
  return res;
}

}  // namespace asvempc
