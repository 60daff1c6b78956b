#include "aashgp/gp.hpp"

#include <cmath>
#include <numbers>

#include "aashgp/error.hpp"

namespace aashgp::gp {

namespace {

double column_std(const Eigen::Ref<const VectorXd>& v) {
    if (v.size() < 2) return 1.0;
    const double mean = v.mean();
    const double s = std::sqrt((v.array() - mean).square().sum() / static_cast<double>(v.size() - 1));
    return s > 0.0 && std::isfinite(s) ? s : 1.0;
}

Eigen::LLT<MatrixXd> factorize(const MatrixXd& a, const char* what) {
    Eigen::LLT<MatrixXd> llt(a);
    if (llt.info() != Eigen::Success || !llt.matrixLLT().diagonal().allFinite() ||
        !(llt.matrixLLT().diagonal().array() > 0.0).all()) {
        throw ConditioningError(std::string(what) + " is not positive definite");
    }
    return llt;
}

}  // namespace

Standardization Standardization::from_data(const MatrixXd& x, const VectorXd& y) {
    Standardization s;
    s.x_scale.resize(x.cols());
    for (Index j = 0; j < x.cols(); ++j) s.x_scale(j) = column_std(x.col(j));
    s.y_mean = y.size() > 0 ? y.mean() : 0.0;
    s.y_scale = column_std(y);
    return s;
}

MatrixXd Standardization::apply_x(const MatrixXd& x) const { return x * x_scale.cwiseInverse().asDiagonal(); }

VectorXd Standardization::apply_y(const VectorXd& y) const {
    return (y.array() - y_mean) / y_scale;
}

std::vector<double> start_factors(const FitOptions& options) {
    std::vector<double> f;
    const int k = std::max(options.restarts, 1);
    const double lo = std::log(options.lengthscale_factor_min);
    const double hi = std::log(options.lengthscale_factor_max);
    for (int i = 0; i < k; ++i) {
        const double t = k == 1 ? 0.5 : static_cast<double>(i) / (k - 1);
        f.push_back(std::exp(lo + t * (hi - lo)));
    }
    return f;
}

GpModel::GpModel(MatrixXd x, VectorXd y, SeArdKernel kernel, double noise_variance, double y_offset)
    : x_(std::move(x)), y_(std::move(y)), kernel_(std::move(kernel)), noise_(noise_variance),
      y_offset_(y_offset) {
    kernel_.validate();
    if (x_.rows() != y_.size()) throw DimensionMismatch("GpModel: inputs and outputs differ in length");
    if (x_.cols() != kernel_.dimension()) throw DimensionMismatch("GpModel: kernel dimension");
    if (x_.rows() < 1) throw InvalidParameter("GpModel needs at least one training point");
    if (!(noise_ >= 0.0) || !std::isfinite(noise_)) throw InvalidParameter("noise variance must be >= 0");
    MatrixXd a = kernel_.gram(x_);
    a.diagonal().array() += noise_;
    factor_ = factorize(a, "K_f + noise");
    alpha_ = factor_.solve((y_.array() - y_offset_).matrix());
}

double GpModel::log_marginal() const {
    const VectorXd yc = (y_.array() - y_offset_).matrix();
    const double logdet = 2.0 * factor_.matrixLLT().diagonal().array().log().sum();
    return -0.5 * yc.dot(alpha_) - 0.5 * logdet -
           0.5 * static_cast<double>(y_.size()) * std::log(2.0 * std::numbers::pi);
}

Prediction GpModel::predict(const VectorXd& x) const {
    VectorXd mean, var;
    predict_batch(x.transpose(), mean, &var);
    Prediction p;
    p.mean = mean(0);
    p.variance = var(0);
    p.gamma2 = var(0);
    return p;
}

void GpModel::predict_batch(const MatrixXd& x, VectorXd& mean, VectorXd* variance) const {
    if (x.cols() != x_.cols()) throw DimensionMismatch("GpModel::predict: dimension mismatch");
    const MatrixXd ks = kernel_.cross(x, x_);
    mean = (ks * alpha_).array() + y_offset_;
    if (variance) {
        const MatrixXd v = factor_.matrixL().solve(ks.transpose());
        *variance = (kernel_.signal_variance - v.colwise().squaredNorm().transpose().array()).cwiseMax(0.0);
    }
}

double gp_log_marginal(const MatrixXd& x, const VectorXd& y, const VectorXd& theta, VectorXd* grad) {
    const Index d = x.cols();
    const SeArdKernel kernel = SeArdKernel::from_log_parameters(theta.head(1 + d));
    const double noise = std::exp(theta(1 + d));
    const MatrixXd k = kernel.gram(x);
    MatrixXd a = k;
    a.diagonal().array() += noise;
    const auto llt = factorize(a, "K_f + noise");
    const VectorXd alpha = llt.solve(y);
    const double n = static_cast<double>(y.size());
    const double value = -0.5 * y.dot(alpha) - llt.matrixLLT().diagonal().array().log().sum() -
                         0.5 * n * std::log(2.0 * std::numbers::pi);
    if (grad) {
        const MatrixXd w = alpha * alpha.transpose() - llt.solve(MatrixXd::Identity(y.size(), y.size()));
        grad->resize(theta.size());
        MatrixXd g;
        for (Index p = 0; p < kernel.parameter_count(); ++p) {
            kernel.gram_derivative(x, k, p, g);
            (*grad)(p) = 0.5 * w.cwiseProduct(g).sum();
        }
        (*grad)(1 + d) = 0.5 * noise * w.trace();
    }
    return value;
}

GpModel gp_fit(const MatrixXd& x, const VectorXd& y, const FitOptions& options) {
    if (x.rows() < 2) throw InvalidParameter("gp_fit needs at least two training points");
    if (x.rows() != y.size()) throw DimensionMismatch("gp_fit: inputs and outputs differ in length");
    const Standardization st = Standardization::from_data(x, y);
    const MatrixXd xs = st.apply_x(x);
    const VectorXd ys = st.apply_y(y);
    const Index d = x.cols();
    const double limit = options.log_parameter_limit;

    opt::Objective objective = [&](const VectorXd& theta, double& value, VectorXd* grad) {
        if ((theta.array().abs() > limit).any()) return false;
        try {
            value = gp_log_marginal(xs, ys, theta, grad);
        } catch (const ConditioningError&) {
            return false;
        }
        return true;
    };

    const double med = median_pairwise_distance(xs);
    FitInfo info;
    opt::Result best;
    bool have_best = false;
    int index = 0;
    for (double factor : start_factors(options)) {
        VectorXd theta0(d + 2);
        theta0(0) = 0.0;
        theta0.segment(1, d).setConstant(std::log(factor * med));
        theta0(d + 1) = std::log(0.01);
        try {
            opt::Result r = opt::maximize(objective, theta0, options.optimizer);
            info.start_values.push_back(r.initial_value);
            info.final_values.push_back(r.value);
            if (!have_best || r.value > best.value) {
                best = std::move(r);
                info.chosen_start = index;
                have_best = true;
            }
        } catch (const OptimizerFailure&) {
        }
        ++index;
    }
    if (!have_best) throw OptimizerFailure("gp_fit: no restart produced a valid likelihood");
    info.trace = best.trace;
    info.iterations = best.iterations;
    info.converged = best.converged;

    SeArdKernel kernel = SeArdKernel::from_log_parameters(best.x.head(1 + d));
    kernel.lengthscales = kernel.lengthscales.cwiseProduct(st.x_scale);
    kernel.signal_variance *= st.y_scale * st.y_scale;
    const double noise = std::exp(best.x(d + 1)) * st.y_scale * st.y_scale;
    GpModel model(x, y, kernel, noise, st.y_mean);
    model.fit_info = std::move(info);
    return model;
}

}  // namespace aashgp::gp
