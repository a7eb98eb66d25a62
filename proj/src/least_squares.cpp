#include "omnisweep/least_squares.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>

namespace omnisweep {

double robust_cost(const Eigen::VectorXd& residuals, int block_size, double huber_threshold) {
  if (huber_threshold <= 0.0) return residuals.squaredNorm();
  double cost = 0.0;
  for (Eigen::Index b = 0; b < residuals.size(); b += block_size) {
    const double norm = residuals.segment(b, block_size).norm();
    cost += norm <= huber_threshold ? norm * norm : 2.0 * huber_threshold * norm - huber_threshold * huber_threshold;
  }
  return cost;
}

namespace {

constexpr double kRoundOffFloor = 1e-20;

// Square-root IRLS weights per residual.
Eigen::VectorXd huber_weights(const Eigen::VectorXd& residuals, int block_size, double threshold) {
  Eigen::VectorXd w = Eigen::VectorXd::Ones(residuals.size());
  if (threshold <= 0.0) return w;
  for (Eigen::Index b = 0; b < residuals.size(); b += block_size) {
    const double norm = residuals.segment(b, block_size).norm();
    if (norm > threshold) w.segment(b, block_size).setConstant(std::sqrt(threshold / norm));
  }
  return w;
}

}  // namespace

LMSummary levenberg_marquardt(const LeastSquaresProblem& problem, Eigen::VectorXd x0, const LMConfig& config) {
  const int block = problem.residual_block_size();
  LMSummary summary;
  summary.x = std::move(x0);

  Eigen::VectorXd residuals(problem.num_residuals());
  Eigen::MatrixXd jacobian(problem.num_residuals(), problem.num_parameters());
  if (!problem.evaluate(summary.x, residuals, &jacobian)) {
    throw NumericError("least squares: initial parameters are not admissible");
  }
  double cost = robust_cost(residuals, block, config.huber_threshold);
  summary.initial_cost = cost;
  summary.cost_history.push_back(cost);

  auto gradient_of = [&](Eigen::MatrixXd& weighted_j, Eigen::VectorXd& weighted_r) {
    const Eigen::VectorXd w = huber_weights(residuals, block, config.huber_threshold);
    weighted_j = w.asDiagonal() * jacobian;
    weighted_r = w.cwiseProduct(residuals);
    return Eigen::VectorXd(weighted_j.transpose() * weighted_r);
  };

  Eigen::MatrixXd wj;
  Eigen::VectorXd wr;
  Eigen::VectorXd gradient = gradient_of(wj, wr);
  Eigen::MatrixXd normal = wj.transpose() * wj;

  // Decrease the undamped Gauss-Newton model promises from the current point.
  auto model_decrease = [&]() {
    Eigen::MatrixXd system = normal;
    system.diagonal() += 1e-12 * std::max(normal.diagonal().maxCoeff(), 1e-300) * Eigen::VectorXd::Ones(normal.rows());
    const Eigen::VectorXd step = system.ldlt().solve(-gradient);
    return step.allFinite() ? -gradient.dot(step) : std::numeric_limits<double>::infinity();
  };
  double promised = model_decrease();

  double damping = config.initial_damping;
  Eigen::VectorXd trial_residuals(problem.num_residuals());

  auto finish = [&](bool converged, const char* reason) {
    summary.final_cost = cost;
    summary.converged = converged;
    summary.termination = reason;
    return summary;
  };

  if (cost == 0.0) return finish(true, "zero cost");
  if (gradient.lpNorm<Eigen::Infinity>() < config.gradient_tolerance) return finish(true, "gradient tolerance");

  while (summary.iterations < config.max_iterations) {
    ++summary.iterations;
    bool accepted = false;
    while (!accepted) {
      Eigen::VectorXd diag = normal.diagonal();
      const double floor = 1e-12 * std::max(diag.maxCoeff(), 1e-300);
      diag = diag.cwiseMax(floor);
      Eigen::MatrixXd system = normal;
      system.diagonal() += damping * diag;
      const Eigen::VectorXd step = system.ldlt().solve(-gradient);

      const Eigen::VectorXd candidate = summary.x + step;
      double trial_cost = std::numeric_limits<double>::infinity();
      if (step.allFinite() && problem.evaluate(candidate, trial_residuals, nullptr)) {
        trial_cost = robust_cost(trial_residuals, block, config.huber_threshold);
      }
      if (trial_cost < cost) {
        const double relative_decrease = (cost - trial_cost) / cost;
        summary.x = candidate;
        cost = trial_cost;
        summary.cost_history.push_back(cost);
        damping = std::max(damping / config.damping_decrease, 1e-300);
        accepted = true;
        problem.evaluate(summary.x, residuals, &jacobian);
        gradient = gradient_of(wj, wr);
        normal = wj.transpose() * wj;
        promised = model_decrease();
        if (cost == 0.0) return finish(true, "zero cost");
        if (relative_decrease < config.relative_cost_tolerance) return finish(true, "relative cost tolerance");
        if (step.norm() <= config.step_tolerance * (summary.x.norm() + config.step_tolerance)) {
          return finish(true, "step tolerance");
        }
        if (gradient.lpNorm<Eigen::Infinity>() < config.gradient_tolerance) {
          return finish(true, "gradient tolerance");
        }
      } else {
        // Nothing left to gain: the rejection is round-off, not divergence.
        if (promised <= config.relative_cost_tolerance * cost) return finish(true, "relative cost tolerance");
        damping *= config.damping_increase;
        if (damping > config.max_damping) {
          // Exact-fit problems end here once the cost is pure round-off.
          if (cost <= kRoundOffFloor * summary.initial_cost) return finish(true, "cost at round-off floor");
          throw LMDivergence("least squares: damping exceeded cap without cost decrease", summary.x);
        }
      }
    }
  }
  return finish(false, "max iterations");
}

}  // namespace omnisweep
