#pragma once

#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "aashgp/kernel.hpp"
#include "aashgp/optimize.hpp"

namespace aashgp::gp {

struct Prediction {
    double mean = 0.0;
    double variance = 0.0;
    double gamma2 = 0.0;      // latent-mean variance k** - k*^T A^-1 k*
    double noise_term = 0.0;  // expected noise variance (0 for the homoscedastic GP)
};

/// Per-column input scales and output location/scale used to condition
/// hyperparameter fits. Input shifts are irrelevant for stationary kernels.
struct Standardization {
    VectorXd x_scale;
    double y_mean = 0.0;
    double y_scale = 1.0;

    static Standardization from_data(const MatrixXd& x, const VectorXd& y);
    MatrixXd apply_x(const MatrixXd& x) const;
    VectorXd apply_y(const VectorXd& y) const;
};

struct FitOptions {
    int restarts = 5;
    double lengthscale_factor_min = 0.1;  // times the median pairwise distance
    double lengthscale_factor_max = 10.0;
    double log_parameter_limit = 30.0;    // |log-parameter| beyond this is rejected
    opt::Options optimizer;
};

/// Record of a hyperparameter fit, in the standardized data space.
struct FitInfo {
    std::vector<double> start_values;  // objective at each start's initial point
    std::vector<double> final_values;  // objective at each start's optimum
    std::vector<double> trace;         // accepted-iteration trace of the chosen start
    int chosen_start = 0;
    int iterations = 0;
    bool converged = false;
};

/// Zero-mean GP regression with homoscedastic Gaussian noise. Predictions add
/// back a constant output offset.
class GpModel {
public:
    GpModel(MatrixXd x, VectorXd y, SeArdKernel kernel, double noise_variance, double y_offset = 0.0);

    double log_marginal() const;
    Prediction predict(const VectorXd& x) const;
    void predict_batch(const MatrixXd& x, VectorXd& mean, VectorXd* variance) const;

    const MatrixXd& inputs() const { return x_; }
    const VectorXd& outputs() const { return y_; }
    const SeArdKernel& kernel() const { return kernel_; }
    double noise_variance() const { return noise_; }
    double y_offset() const { return y_offset_; }

    FitInfo fit_info;

private:
    MatrixXd x_;
    VectorXd y_;
    SeArdKernel kernel_;
    double noise_;
    double y_offset_;
    Eigen::LLT<MatrixXd> factor_;
    VectorXd alpha_;
};

/// Log marginal likelihood of centered outputs y under parameters packed as
/// [kernel log-parameters, log noise_variance], with optional gradient.
double gp_log_marginal(const MatrixXd& x, const VectorXd& y, const VectorXd& theta, VectorXd* grad);

/// Maximum-likelihood fit with multi-start L-BFGS on standardized data.
GpModel gp_fit(const MatrixXd& x, const VectorXd& y, const FitOptions& options = {});

/// Lengthscale multipliers for the multi-start, log-spaced over
/// [factor_min, factor_max].
std::vector<double> start_factors(const FitOptions& options);

}  // namespace aashgp::gp
