#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace aashgp::opt {

/// Objective to be maximized. Returns false when x is outside the region
/// where the objective is defined (the line search then backs off).
/// `grad` is null when only the value is needed.
using Objective = std::function<bool(const Eigen::VectorXd& x, double& value, Eigen::VectorXd* grad)>;

struct Options {
    int max_iterations = 500;
    double function_tolerance = 1e-7;  // relative change in objective
    double gradient_tolerance = 1e-10;
    double parameter_tolerance = 1e-10;
};

struct Result {
    Eigen::VectorXd x;
    double value = 0.0;
    double initial_value = 0.0;
    int iterations = 0;
    bool converged = false;
    std::string message;
    std::vector<double> trace;  // objective after each accepted iteration
};

/// L-BFGS ascent with a Wolfe line search. Throws OptimizerFailure if the
/// objective is undefined at x0.
Result maximize(const Objective& objective, const Eigen::VectorXd& x0, const Options& options = {});

}  // namespace aashgp::opt
