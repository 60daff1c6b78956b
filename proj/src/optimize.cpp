#include "aashgp/optimize.hpp"

#include <cmath>

#include <ceres/gradient_problem.h>
#include <ceres/gradient_problem_solver.h>
#include <ceres/iteration_callback.h>

#include "aashgp/error.hpp"

namespace aashgp::opt {

namespace {

class Negated final : public ceres::FirstOrderFunction {
public:
    Negated(const Objective& objective, int n) : objective_(objective), n_(n) {}

    bool Evaluate(const double* parameters, double* cost, double* gradient) const override {
        x_ = Eigen::Map<const Eigen::VectorXd>(parameters, n_);
        double value = 0.0;
        if (!objective_(x_, value, gradient ? &grad_ : nullptr) || !std::isfinite(value)) return false;
        *cost = -value;
        if (gradient) {
            if (!grad_.allFinite()) return false;
            Eigen::Map<Eigen::VectorXd>(gradient, n_) = -grad_;
        }
        return true;
    }

    int NumParameters() const override { return n_; }

private:
    const Objective& objective_;
    int n_;
    mutable Eigen::VectorXd x_;
    mutable Eigen::VectorXd grad_;
};

class Trace final : public ceres::IterationCallback {
public:
    explicit Trace(std::vector<double>& out) : out_(out) {}
    ceres::CallbackReturnType operator()(const ceres::IterationSummary& s) override {
        if (s.step_is_valid) out_.push_back(-s.cost);
        return ceres::SOLVER_CONTINUE;
    }

private:
    std::vector<double>& out_;
};

}  // namespace

Result maximize(const Objective& objective, const Eigen::VectorXd& x0, const Options& options) {
    Result r;
    r.x = x0;
    if (!objective(x0, r.initial_value, nullptr) || !std::isfinite(r.initial_value)) {
        throw OptimizerFailure("objective undefined at the starting point");
    }

    ceres::GradientProblem problem(new Negated(objective, static_cast<int>(x0.size())));
    ceres::GradientProblemSolver::Options o;
    o.line_search_direction_type = ceres::LBFGS;
    o.max_num_iterations = options.max_iterations;
    o.function_tolerance = options.function_tolerance;
    o.gradient_tolerance = options.gradient_tolerance;
    o.parameter_tolerance = options.parameter_tolerance;
    o.logging_type = ceres::SILENT;
    Trace trace(r.trace);
    o.callbacks.push_back(&trace);

    ceres::GradientProblemSolver::Summary summary;
    ceres::Solve(o, problem, r.x.data(), &summary);

    r.iterations = static_cast<int>(summary.iterations.size());
    r.message = summary.message;
    r.converged = summary.termination_type == ceres::CONVERGENCE;
    if (summary.termination_type == ceres::FAILURE || !std::isfinite(summary.final_cost)) {
        // Ceres leaves x at the last accepted point; fall back to x0 if that
        // point cannot be evaluated.
        double v = 0.0;
        if (!objective(r.x, v, nullptr) || !std::isfinite(v)) {
            r.x = x0;
            r.value = r.initial_value;
            return r;
        }
        r.value = v;
        return r;
    }
    r.value = -summary.final_cost;
    return r;
}

}  // namespace aashgp::opt
