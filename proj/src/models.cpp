#include "aashgp/models.hpp"

#include <cmath>
#include <sstream>

#include "aashgp/error.hpp"

namespace aashgp::models {

ModelEval Model::evaluate(const VectorXd& x) const {
    check_dimension(x);
    if (gradient_.mode == GradientMode::Analytic) {
        if (!has_analytic_gradient()) {
            throw InvalidParameter(name() + ": no analytic gradient; use central differences");
        }
        return evaluate_analytic(x);
    }
    return ModelEval{value(x), gradient_fd(*this, x, gradient_.step)};
}

void Model::set_gradient_spec(const GradientSpec& spec) {
    if (spec.mode == GradientMode::CentralDifference && !(spec.step > 0.0)) {
        throw InvalidParameter("finite-difference step must be > 0");
    }
    gradient_ = spec;
}

ModelEval Model::evaluate_analytic(const VectorXd&) const {
    throw InvalidParameter(name() + ": no analytic gradient");
}

void Model::check_dimension(const VectorXd& x) const {
    if (x.size() != dimension()) {
        std::ostringstream msg;
        msg << name() << ": input has dimension " << x.size() << ", expected " << dimension();
        throw DimensionMismatch(msg.str());
    }
}

VectorXd gradient_fd(const Model& model, const VectorXd& x, double step) {
    if (!(step > 0.0)) throw InvalidParameter("gradient_fd: step must be > 0");
    VectorXd grad(x.size());
    VectorXd probe = x;
    for (Index j = 0; j < x.size(); ++j) {
        const double h = step * std::max(std::abs(x(j)), 1.0);
        probe(j) = x(j) + h;
        const double up = model.value(probe);
        probe(j) = x(j) - h;
        const double down = model.value(probe);
        probe(j) = x(j);
        grad(j) = (up - down) / (2.0 * h);
    }
    return grad;
}

// ---------------------------------------------------------------------------

ModelEval eval_product(const VectorXd& x, const VectorXd& lambdas) {
    if (x.size() != lambdas.size()) throw DimensionMismatch("eval_product: dimension mismatch");
    const Index d = x.size();
    VectorXd factor(d);
    for (Index j = 0; j < d; ++j) factor(j) = (4.0 * x(j) - 2.0 + lambdas(j)) / (1.0 + lambdas(j));

    // prefix/suffix products avoid dividing by a zero factor
    VectorXd prefix(d + 1), suffix(d + 1);
    prefix(0) = 1.0;
    for (Index j = 0; j < d; ++j) prefix(j + 1) = prefix(j) * factor(j);
    suffix(d) = 1.0;
    for (Index j = d; j > 0; --j) suffix(j - 1) = suffix(j) * factor(j - 1);

    ModelEval out{prefix(d), VectorXd(d)};
    for (Index k = 0; k < d; ++k) {
        out.grad(k) = 4.0 / (1.0 + lambdas(k)) * prefix(k) * suffix(k + 1);
    }
    return out;
}

ProductModel::ProductModel(VectorXd lambdas) : lambdas_(std::move(lambdas)) {
    if (lambdas_.size() < 1) throw InvalidParameter("product model needs D >= 1");
    if ((lambdas_.array() < 0.0).any() || !lambdas_.allFinite()) {
        throw InvalidParameter("product model needs finite lambda_j >= 0");
    }
}

ProductModel ProductModel::with_effective_dimension(Index dimension, Index n_active,
                                                    double lambda_active, double lambda_inactive) {
    if (n_active < 0 || n_active > dimension) {
        throw InvalidParameter("product model: n_active must lie in [0, D]");
    }
    VectorXd lambdas = VectorXd::Constant(dimension, lambda_inactive);
    lambdas.head(n_active).setConstant(lambda_active);
    return ProductModel(std::move(lambdas));
}

double ProductModel::value(const VectorXd& x) const {
    check_dimension(x);
    double y = 1.0;
    for (Index j = 0; j < x.size(); ++j) y *= (4.0 * x(j) - 2.0 + lambdas_(j)) / (1.0 + lambdas_(j));
    return y;
}

ModelEval ProductModel::evaluate_analytic(const VectorXd& x) const { return eval_product(x, lambdas_); }

// ---------------------------------------------------------------------------

ModelEval eval_linear(const VectorXd& x, double beta0) {
    const double d = static_cast<double>(x.size());
    return ModelEval{beta0 * std::sqrt(d) - x.sum(), VectorXd::Constant(x.size(), -1.0)};
}

LinearModel::LinearModel(Index dimension, double beta0) : dimension_(dimension), beta0_(beta0) {
    if (dimension_ < 1) throw InvalidParameter("linear model needs D >= 1");
    if (!std::isfinite(beta0_)) throw InvalidParameter("linear model needs finite beta0");
}

double LinearModel::value(const VectorXd& x) const {
    check_dimension(x);
    return beta0_ * std::sqrt(static_cast<double>(dimension_)) - x.sum();
}

ModelEval LinearModel::evaluate_analytic(const VectorXd& x) const { return eval_linear(x, beta0_); }

// ---------------------------------------------------------------------------

NegatedModel::NegatedModel(std::shared_ptr<const Model> inner) : inner_(std::move(inner)) {
    if (!inner_) throw InvalidParameter("NegatedModel: null inner model");
}

ModelEval NegatedModel::evaluate(const VectorXd& x) const {
    ModelEval e = inner_->evaluate(x);
    e.y = -e.y;
    e.grad = -e.grad;
    return e;
}

CountingModel::CountingModel(std::shared_ptr<const Model> inner) : inner_(std::move(inner)) {
    if (!inner_) throw InvalidParameter("CountingModel: null inner model");
}

double CountingModel::value(const VectorXd& x) const {
    ++value_calls_;
    return inner_->value(x);
}

ModelEval CountingModel::evaluate(const VectorXd& x) const {
    ++evaluate_calls_;
    return inner_->evaluate(x);
}

void CountingModel::reset() {
    value_calls_ = 0;
    evaluate_calls_ = 0;
}

}  // namespace aashgp::models
