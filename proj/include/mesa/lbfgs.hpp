#pragma once

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace mesa {

enum class StopReason { MaxIterations, Converged, LineSearchFailure };
const char* stop_reason_name(StopReason r);

struct LbfgsOptions {
    int max_iterations = 5000;
    int history = 20;
    /// Stop when |f_prev - f| <= loss_tol * max(1, |f_prev|).
    double loss_tol = 1e-7;
    double wolfe_c1 = 1e-4;
    double wolfe_c2 = 0.9;
    int max_line_search_evals = 30;
};

struct LbfgsSummary {
    StopReason reason = StopReason::MaxIterations;
    int iterations = 0;      // accepted steps
    double final_loss = 0.0;
    long long evaluations = 0;  // objective calls, line search included
};

/// Objective: returns f(x), fills grad (same size as x).
using LbfgsObjective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

/// Called after each accepted step with (iteration, f, x).
using LbfgsCallback = std::function<void(int, double, const Eigen::VectorXd&)>;

/// Limited-memory BFGS with a strong Wolfe line search. Accepted steps never
/// increase the objective. Deterministic for fixed inputs.
LbfgsSummary lbfgs_minimize(const LbfgsObjective& objective, Eigen::VectorXd& x,
                            const LbfgsOptions& options = {}, const LbfgsCallback& on_iteration = {});

}  // namespace mesa
