#pragma once

#include <Eigen/Core>
#include <string>
#include <utility>
#include <vector>

#include "omnisweep/errors.hpp"

namespace omnisweep {

struct LMConfig {
  double initial_damping = 1e-3;
  double damping_increase = 10.0;
  double damping_decrease = 10.0;
  double max_damping = 1e16;
  double relative_cost_tolerance = 1e-10;
  double gradient_tolerance = 1e-8;
  // Checked on accepted steps only; a rejected step never ends the solve.
  double step_tolerance = 1e-14;
  int max_iterations = 200;
  // Huber threshold on each residual block's norm; <= 0 disables.
  double huber_threshold = 0.0;
};

class LeastSquaresProblem {
 public:
  virtual ~LeastSquaresProblem() = default;
  virtual int num_residuals() const = 0;
  virtual int num_parameters() const = 0;
  // Residuals are grouped into consecutive blocks of this size for the
  // robust loss.
  virtual int residual_block_size() const { return 1; }
  // Returns false when x is outside the admissible domain.
  virtual bool evaluate(const Eigen::VectorXd& x, Eigen::VectorXd& residuals,
                        Eigen::MatrixXd* jacobian) const = 0;
};

struct LMSummary {
  Eigen::VectorXd x;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string termination;
  // Cost after every accepted step, starting with the initial cost.
  std::vector<double> cost_history;
};

// Thrown when the damping exceeds its cap without an acceptable step.
class LMDivergence : public NumericError {
 public:
  LMDivergence(const std::string& what, Eigen::VectorXd last_accepted)
      : NumericError(what), last_accepted_(std::move(last_accepted)) {}
  const Eigen::VectorXd& last_accepted() const { return last_accepted_; }

 private:
  Eigen::VectorXd last_accepted_;
};

/// Levenberg-Marquardt with Marquardt diagonal scaling. Cost is the sum of
/// squared residuals (or Huber-weighted block norms). Throws NumericError if
/// the starting point is not admissible, LMDivergence on damping overflow.
LMSummary levenberg_marquardt(const LeastSquaresProblem& problem, Eigen::VectorXd x0, const LMConfig& config);

// Cost as levenberg_marquardt measures it.
double robust_cost(const Eigen::VectorXd& residuals, int block_size, double huber_threshold);

}  // namespace omnisweep
