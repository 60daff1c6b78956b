#pragma once

#include <Eigen/Core>

namespace aashgp::gp {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Relative diagonal jitter: training Gram matrices are
/// signal_variance * (C + kJitter * I).
inline constexpr double kJitter = 1e-8;

/// Squared-exponential kernel with one lengthscale per input dimension:
/// k(a, b) = s2 * exp(-0.5 * sum_k ((a_k - b_k) / l_k)^2).
struct SeArdKernel {
    double signal_variance = 1.0;
    VectorXd lengthscales;

    Index dimension() const { return lengthscales.size(); }
    void validate() const;

    double operator()(const Eigen::Ref<const VectorXd>& a, const Eigen::Ref<const VectorXd>& b) const;

    /// n x n Gram matrix of the rows of x, jitter included.
    MatrixXd gram(const MatrixXd& x) const;
    /// Cross-covariance between rows of a and rows of b (no jitter).
    MatrixXd cross(const MatrixXd& a, const MatrixXd& b) const;

    /// Packing used by optimizers: [log s2, log l_1, ..., log l_d].
    Index parameter_count() const { return 1 + dimension(); }
    VectorXd log_parameters() const;
    static SeArdKernel from_log_parameters(const Eigen::Ref<const VectorXd>& theta);

    /// dK/dtheta_k for the Gram matrix `k` = gram(x), theta in log packing.
    void gram_derivative(const MatrixXd& x, const MatrixXd& k, Index param, MatrixXd& out) const;
};

/// Median Euclidean distance over distinct pairs of rows (1 if undefined).
double median_pairwise_distance(const MatrixXd& x);

}  // namespace aashgp::gp
