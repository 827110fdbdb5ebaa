#pragma once

#include <functional>

#include <Eigen/Dense>

namespace gsr {

struct LbfgsOptions {
    double grad_tol = 1e-8;  // on the gradient infinity norm
    int max_iters = 2000;
    int memory = 10;
    double wolfe_c1 = 1e-4;
    double wolfe_c2 = 0.9;
    int max_line_search = 50;
};

struct LbfgsResult {
    Eigen::VectorXd x;
    double value = 0.0;
    double grad_inf_norm = 0.0;
    int iterations = 0;
    int evaluations = 0;
};

// Returns f(x) and writes the gradient into `grad` (already sized).
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

// Limited-memory BFGS with a strong Wolfe line search (bracketing + zoom with
// safeguarded cubic interpolation). Near the optimum, where f(x + a p) - f(x)
// falls below rounding of f, a step satisfying the approximate Wolfe
// conditions of Hager and Zhang is accepted instead of the Armijo test.
//
// Throws NumericalError when max_iters is exhausted (message carries the final
// gradient norm) or when the line search cannot make progress.
LbfgsResult minimize_lbfgs(const Objective& objective, Eigen::VectorXd x0,
                           const LbfgsOptions& options);

}  // namespace gsr
