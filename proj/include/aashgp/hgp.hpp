#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "aashgp/gp.hpp"
#include "aashgp/parallel.hpp"

namespace aashgp::gp {

/// Parameters of the heteroscedastic GP
///   y = f(x) + eps,  eps ~ N(0, exp(g(x))),  f ~ GP(0, k_f),  g ~ GP(mu0, k_g),
/// with the variational posterior over g at the training inputs
///   m = K_g (lambda - 1/2) + mu0,  V = (K_g^-1 + diag(lambda))^-1.
struct HgpParams {
    SeArdKernel kernel_f;
    SeArdKernel kernel_g;
    double mu0 = 0.0;
    VectorXd lambda;  // variational diagonal, > 0

    void validate(Index n, Index d) const;
};

/// Optimizer packing: [log lambda (n), mu0, kernel_f log-params, kernel_g log-params].
VectorXd pack(const HgpParams& p);
HgpParams unpack(const VectorXd& v, Index n, Index d);

/// Terms of the marginalized variational lower bound
///   F = log N(y | 0, K_f + R) - tr(V)/4 - KL(N(m, V) || N(mu0, K_g)),
/// R = diag(exp(m_i - V_ii / 2)).
struct BoundTerms {
    double value = 0.0;
    double log_likelihood = 0.0;
    double trace_term = 0.0;  // tr(V) / 4
    double kl = 0.0;
    VectorXd gradient;        // with respect to pack(); empty unless requested
};

/// Bound for centered outputs y. Throws ConditioningError if a required
/// factorization fails.
BoundTerms hgp_bound(const MatrixXd& x, const VectorXd& y, const HgpParams& p, bool with_gradient);

/// KL(N(m, V) || N(mu0 * 1, K)) by direct dense evaluation.
double gaussian_kl(const VectorXd& m, const MatrixXd& v, double mu0, const MatrixXd& k);

class HgpModel {
public:
    HgpModel(MatrixXd x, VectorXd y, HgpParams params, double y_offset = 0.0);

    /// Bound evaluated on (x, y - y_offset).
    double bound() const;
    Prediction predict(const VectorXd& x) const;
    /// Rows of x are prediction points. `variance` may be null; `mean` and
    /// `variance` are resized. Serial and parallel paths give identical bits.
    void predict_batch(const MatrixXd& x, VectorXd& mean, VectorXd* variance,
                       Exec exec = Exec::Parallel) const;

    const MatrixXd& inputs() const { return x_; }
    const VectorXd& outputs() const { return y_; }
    const HgpParams& params() const { return params_; }
    double y_offset() const { return y_offset_; }
    const VectorXd& m() const { return m_; }
    const MatrixXd& v() const { return v_; }
    const VectorXd& r() const { return r_; }

    FitInfo fit_info;

private:
    void predict_chunk(const MatrixXd& x, Index begin, Index count, VectorXd& mean,
                       VectorXd* variance) const;

    MatrixXd x_;
    VectorXd y_;
    HgpParams params_;
    double y_offset_;
    VectorXd b_;             // lambda - 1/2
    VectorXd sqrt_lambda_;
    Eigen::LLT<MatrixXd> factor_a_;  // K_f + R
    Eigen::LLT<MatrixXd> factor_b_;  // I + L^1/2 K_g L^1/2
    VectorXd alpha_;         // (K_f + R)^-1 (y - offset)
    VectorXd m_;
    MatrixXd v_;
    VectorXd r_;
};

struct HgpFitOptions : FitOptions {
    double initial_noise_fraction = 0.01;  // exp(mu0) relative to var(y)
};

/// Maximizes the bound over (lambda, mu0, theta_f, theta_g) on standardized
/// data. With `warm` (parameters of an earlier model in the original data
/// units) a single start is run from it, lambda padded with 1/2 for any
/// extra points; otherwise a multi-start over lengthscales.
HgpModel hgp_fit(const MatrixXd& x, const VectorXd& y, const HgpFitOptions& options = {},
                 const HgpParams* warm = nullptr);

}  // namespace aashgp::gp
