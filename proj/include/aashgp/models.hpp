#pragma once

#include <atomic>
#include <memory>
#include <string>

#include <Eigen/Core>

namespace aashgp::models {

using Eigen::Index;
using Eigen::VectorXd;

/// Response y = M(x) and its gradient dy/dx.
struct ModelEval {
    double y = 0.0;
    VectorXd grad;
};

enum class GradientMode { Analytic, CentralDifference };

struct GradientSpec {
    GradientMode mode = GradientMode::Analytic;
    double step = 1e-5;  // relative step for CentralDifference
};

/// Computational model interface. Implementations are pure: concurrent
/// calls with distinct inputs are safe.
class Model {
public:
    virtual ~Model() = default;

    virtual std::string name() const = 0;
    virtual Index dimension() const = 0;
    virtual double value(const VectorXd& x) const = 0;

    /// Response and gradient; the gradient route follows gradient_spec().
    virtual ModelEval evaluate(const VectorXd& x) const;

    virtual bool has_analytic_gradient() const { return false; }
    const GradientSpec& gradient_spec() const { return gradient_; }
    void set_gradient_spec(const GradientSpec& spec);

protected:
    /// Only called when has_analytic_gradient() is true.
    virtual ModelEval evaluate_analytic(const VectorXd& x) const;
    void check_dimension(const VectorXd& x) const;

private:
    GradientSpec gradient_;
};

/// Central differences with per-coordinate step h_j = step * max(|x_j|, 1).
VectorXd gradient_fd(const Model& model, const VectorXd& x, double step);

/// y = prod_j (4 x_j - 2 + lambda_j) / (1 + lambda_j) on [0, 1]^D.
class ProductModel final : public Model {
public:
    explicit ProductModel(VectorXd lambdas);
    /// lambda_j = active for the first n_active coordinates, inactive after.
    static ProductModel with_effective_dimension(Index dimension, Index n_active,
                                                 double lambda_active = 1.0,
                                                 double lambda_inactive = 500.0);

    std::string name() const override { return "product"; }
    Index dimension() const override { return lambdas_.size(); }
    double value(const VectorXd& x) const override;
    bool has_analytic_gradient() const override { return true; }

    const VectorXd& lambdas() const { return lambdas_; }

protected:
    ModelEval evaluate_analytic(const VectorXd& x) const override;

private:
    VectorXd lambdas_;
};

ModelEval eval_product(const VectorXd& x, const VectorXd& lambdas);

/// y = beta0 * sqrt(D) - sum_j x_j.
class LinearModel final : public Model {
public:
    LinearModel(Index dimension, double beta0);

    std::string name() const override { return "linear"; }
    Index dimension() const override { return dimension_; }
    double value(const VectorXd& x) const override;
    bool has_analytic_gradient() const override { return true; }
    double beta0() const { return beta0_; }

protected:
    ModelEval evaluate_analytic(const VectorXd& x) const override;

private:
    Index dimension_;
    double beta0_;
};

ModelEval eval_linear(const VectorXd& x, double beta0);

/// Flips the sign of the response and gradient, turning a lower-tail
/// failure event M(x) <= -y_f into the upper-tail form -M(x) >= y_f.
class NegatedModel final : public Model {
public:
    explicit NegatedModel(std::shared_ptr<const Model> inner);

    std::string name() const override { return "negated(" + inner_->name() + ")"; }
    Index dimension() const override { return inner_->dimension(); }
    double value(const VectorXd& x) const override { return -inner_->value(x); }
    ModelEval evaluate(const VectorXd& x) const override;

private:
    std::shared_ptr<const Model> inner_;
};

/// Counts calls: `value_calls` for response-only evaluations and
/// `evaluate_calls` for response + gradient evaluations.
class CountingModel final : public Model {
public:
    explicit CountingModel(std::shared_ptr<const Model> inner);

    std::string name() const override { return inner_->name(); }
    Index dimension() const override { return inner_->dimension(); }
    double value(const VectorXd& x) const override;
    ModelEval evaluate(const VectorXd& x) const override;

    long value_calls() const { return value_calls_.load(); }
    long evaluate_calls() const { return evaluate_calls_.load(); }
    void reset();

private:
    std::shared_ptr<const Model> inner_;
    mutable std::atomic<long> value_calls_{0};
    mutable std::atomic<long> evaluate_calls_{0};
};

}  // namespace aashgp::models
