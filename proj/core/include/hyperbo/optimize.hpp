#pragma once

#include <functional>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace hyperbo {

// Returns f(x) and writes the gradient. Non-finite values, or a thrown
// hyperbo::NumericalError, mark x as infeasible.
using GradientObjective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

// As above, with the iteration index so the objective may minibatch.
using StochasticObjective =
    std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad, int iteration)>;

enum class OptimizeStatus { gradient_converged, value_converged, max_iterations, line_search_failed, diverged };

[[nodiscard]] std::string_view to_string(OptimizeStatus s) noexcept;

struct OptimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  OptimizeStatus status = OptimizeStatus::max_iterations;
  // Objective value at every accepted iterate, starting with x0.
  std::vector<double> trace;
};

struct LbfgsOptions {
  int memory = 10;
  int max_iters = 500;
  double grad_tol = 1e-6;   // infinity norm
  double rel_value_tol = 1e-10;
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_line_search = 40;
};

[[nodiscard]] OptimizeResult lbfgs_minimize(const GradientObjective& objective, Eigen::VectorXd x0,
                                            const LbfgsOptions& options = {});

struct AdamOptions {
  int max_iters = 10000;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

[[nodiscard]] OptimizeResult adam_minimize(const StochasticObjective& objective, Eigen::VectorXd x0,
                                           const AdamOptions& options = {});

}  // namespace hyperbo
