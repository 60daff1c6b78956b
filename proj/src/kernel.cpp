#include "aashgp/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "aashgp/error.hpp"

namespace aashgp::gp {

namespace {

// Inputs scaled by 1/l, stored one point per column.
MatrixXd scaled_columns(const MatrixXd& x, const VectorXd& inv_l) {
    return (x * inv_l.asDiagonal()).transpose();
}

}  // namespace

void SeArdKernel::validate() const {
    if (!(signal_variance > 0.0) || !std::isfinite(signal_variance)) {
        throw InvalidParameter("kernel signal variance must be positive and finite");
    }
    if (lengthscales.size() < 1) throw InvalidParameter("kernel needs at least one lengthscale");
    if (!(lengthscales.array() > 0.0).all() || !lengthscales.allFinite()) {
        throw InvalidParameter("kernel lengthscales must be positive and finite");
    }
}

double SeArdKernel::operator()(const Eigen::Ref<const VectorXd>& a,
                               const Eigen::Ref<const VectorXd>& b) const {
    return signal_variance * std::exp(-0.5 * ((a - b).array() / lengthscales.array()).square().sum());
}

MatrixXd SeArdKernel::gram(const MatrixXd& x) const {
    const Index n = x.rows();
    const MatrixXd s = scaled_columns(x, lengthscales.cwiseInverse());
    MatrixXd k(n, n);
    for (Index j = 0; j < n; ++j) {
        k(j, j) = signal_variance * (1.0 + kJitter);
        for (Index i = j + 1; i < n; ++i) {
            const double v = signal_variance * std::exp(-0.5 * (s.col(i) - s.col(j)).squaredNorm());
            k(i, j) = v;
            k(j, i) = v;
        }
    }
    return k;
}

MatrixXd SeArdKernel::cross(const MatrixXd& a, const MatrixXd& b) const {
    const VectorXd inv_l = lengthscales.cwiseInverse();
    const MatrixXd sa = scaled_columns(a, inv_l);
    const MatrixXd sb = scaled_columns(b, inv_l);
    MatrixXd k(a.rows(), b.rows());
    for (Index j = 0; j < b.rows(); ++j)
        for (Index i = 0; i < a.rows(); ++i)
            k(i, j) = signal_variance * std::exp(-0.5 * (sa.col(i) - sb.col(j)).squaredNorm());
    return k;
}

VectorXd SeArdKernel::log_parameters() const {
    VectorXd theta(parameter_count());
    theta(0) = std::log(signal_variance);
    theta.tail(dimension()) = lengthscales.array().log();
    return theta;
}

SeArdKernel SeArdKernel::from_log_parameters(const Eigen::Ref<const VectorXd>& theta) {
    SeArdKernel k;
    k.signal_variance = std::exp(theta(0));
    k.lengthscales = theta.tail(theta.size() - 1).array().exp();
    return k;
}

void SeArdKernel::gram_derivative(const MatrixXd& x, const MatrixXd& k, Index param,
                                  MatrixXd& out) const {
    if (param == 0) {
        out = k;
        return;
    }
    const Index dim = param - 1;
    const double inv_l2 = 1.0 / (lengthscales(dim) * lengthscales(dim));
    const Index n = x.rows();
    out.resize(n, n);
    for (Index j = 0; j < n; ++j) {
        out(j, j) = 0.0;
        for (Index i = j + 1; i < n; ++i) {
            const double d = x(i, dim) - x(j, dim);
            const double v = k(i, j) * d * d * inv_l2;
            out(i, j) = v;
            out(j, i) = v;
        }
    }
}

double median_pairwise_distance(const MatrixXd& x) {
    const Index n = x.rows();
    std::vector<double> d;
    d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Index j = 0; j < n; ++j)
        for (Index i = j + 1; i < n; ++i) d.push_back((x.row(i) - x.row(j)).norm());
    if (d.empty()) return 1.0;
    auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    return *mid > 0.0 ? *mid : 1.0;
}

}  // namespace aashgp::gp
