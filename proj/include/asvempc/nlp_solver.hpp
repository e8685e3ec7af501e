#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>

namespace asvempc {

// Dense SQP solver for small smooth NLPs: box-bounded decision vector,
// optional nonlinear equality constraints, damped-BFGS Hessian model, l1
// merit line search. Derivatives come from central finite differences; when
// objective and constraints share expensive work (a dynamics rollout), supply
// `fused` so each probe point is evaluated once.

struct NlpProblem {
  int dim{0};
  int eq_dim{0};  // 0 means unconstrained beyond the box
  std::function<double(const Eigen::VectorXd&)> objective;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> eq_constraints;  // may be empty if eq_dim == 0
  std::function<void(const Eigen::VectorXd&, double&, Eigen::VectorXd&)> fused;  // optional
  Eigen::VectorXd lower, upper;  // per-coordinate bounds, sized dim
};

struct SolveOptions {
  int max_iterations{100};
  double kkt_tolerance{1e-6};
  double constraint_tolerance{1e-8};
  double fd_step{1e-6};          // scaled by (1 + |x_i|) per coordinate
  double merit_penalty_growth{10.0};
  double backtrack_factor{0.5};
  double min_step{1e-12};
  double armijo_c1{1e-4};
  std::string trace_path;        // nonempty: per-iteration CSV, truncated each solve
};

enum class SolveStatus { converged, max_iter, infeasible_step };

const char* to_string(SolveStatus s);

struct SolveResult {
  Eigen::VectorXd solution;
  double objective{0};
  SolveStatus status{SolveStatus::max_iter};
  int iterations{0};
  double kkt_residual{0};          // projected stationarity, infinity norm
  double constraint_violation{0};  // infinity norm of equality residuals
};

class SqpSolver {
 public:
  SolveResult solve(const NlpProblem& problem, const Eigen::VectorXd& initial,
                    const SolveOptions& options);
};

/// Central-difference gradient, step scaled per coordinate by (1 + |x_i|).
/// Throws on non-finite evaluations.
Eigen::VectorXd gradient_fd(const std::function<double(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& point, double step);

/// Central-difference Jacobian of a vector function, rows = outputs.
Eigen::MatrixXd jacobian_fd(const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f,
                            const Eigen::VectorXd& point, double step);

/// Decision-vector layout of the receding-horizon problems: interleaved
/// thrust pairs, optionally followed by the two terminal durations.
struct HorizonLayout {
  int horizon{0};
  double dt{0};
  bool has_terminal_times{false};
  int dim() const { return 2 * horizon + (has_terminal_times ? 2 : 0); }
};

/// Shift a previous solution one control period: thrust pairs move forward
/// with the last pair duplicated; t_d is carried over and t_s shrinks by dt
/// (floored at zero). Throws on layout/size mismatch.
Eigen::VectorXd warm_start_shift(const Eigen::VectorXd& previous, const HorizonLayout& layout);

}  // namespace asvempc
