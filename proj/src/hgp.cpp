#include "aashgp/hgp.hpp"

#include <cmath>
#include <numbers>

#include "aashgp/error.hpp"

namespace aashgp::gp {

namespace {

constexpr Index kPredictChunk = 2048;

Eigen::LLT<MatrixXd> factorize(const MatrixXd& a, const char* what) {
    Eigen::LLT<MatrixXd> llt(a);
    if (llt.info() != Eigen::Success || !llt.matrixLLT().diagonal().allFinite() ||
        !(llt.matrixLLT().diagonal().array() > 0.0).all()) {
        throw ConditioningError(std::string(what) + " is not positive definite");
    }
    return llt;
}

// Everything derived from (x, params) that the bound, its gradient and the
// fitted model need.
struct State {
    MatrixXd kf, kg;
    VectorXd lambda, b, sqrt_lambda;
    Eigen::LLT<MatrixXd> lb;  // B = I + L^1/2 K_g L^1/2
    MatrixXd binv;
    MatrixXd s;               // (K_g + L^-1)^-1
    MatrixXd ks;              // K_g S
    MatrixXd v;
    VectorXd m, r;
    Eigen::LLT<MatrixXd> la;  // K_f + R
    VectorXd alpha;
};

State compute_state(const MatrixXd& x, const VectorXd& y, const HgpParams& p) {
    const Index n = x.rows();
    State st;
    st.kf = p.kernel_f.gram(x);
    st.kg = p.kernel_g.gram(x);
    st.lambda = p.lambda;
    st.b = (p.lambda.array() - 0.5).matrix();
    st.sqrt_lambda = p.lambda.cwiseSqrt();

    MatrixXd bmat = st.sqrt_lambda.asDiagonal() * st.kg * st.sqrt_lambda.asDiagonal();
    bmat.diagonal().array() += 1.0;
    st.lb = factorize(bmat, "I + L^1/2 K_g L^1/2");
    st.binv = st.lb.solve(MatrixXd::Identity(n, n));
    st.s = st.sqrt_lambda.asDiagonal() * st.binv * st.sqrt_lambda.asDiagonal();
    st.ks = st.kg * st.s;
    st.v = st.kg - st.ks * st.kg;
    st.v = 0.5 * (st.v + st.v.transpose()).eval();

    st.m = (st.kg * st.b).array() + p.mu0;
    st.r = (st.m - 0.5 * st.v.diagonal()).array().exp();
    if (!st.r.allFinite()) throw ConditioningError("noise variances overflow");
    MatrixXd a = st.kf;
    a.diagonal() += st.r;
    st.la = factorize(a, "K_f + R");
    st.alpha = st.la.solve(y);
    return st;
}

}  // namespace

void HgpParams::validate(Index n, Index d) const {
    kernel_f.validate();
    kernel_g.validate();
    if (kernel_f.dimension() != d || kernel_g.dimension() != d) {
        throw DimensionMismatch("hGP kernel dimension does not match the inputs");
    }
    if (lambda.size() != n) throw DimensionMismatch("hGP variational diagonal has wrong length");
    if (!(lambda.array() > 0.0).all() || !lambda.allFinite()) {
        throw InvalidParameter("hGP variational diagonal must be positive and finite");
    }
    if (!std::isfinite(mu0)) throw InvalidParameter("hGP mu0 must be finite");
}

VectorXd pack(const HgpParams& p) {
    const Index n = p.lambda.size();
    const Index nf = p.kernel_f.parameter_count();
    const Index ng = p.kernel_g.parameter_count();
    VectorXd v(n + 1 + nf + ng);
    v.head(n) = p.lambda.array().log();
    v(n) = p.mu0;
    v.segment(n + 1, nf) = p.kernel_f.log_parameters();
    v.tail(ng) = p.kernel_g.log_parameters();
    return v;
}

HgpParams unpack(const VectorXd& v, Index n, Index d) {
    if (v.size() != n + 3 + 2 * d) throw DimensionMismatch("hGP parameter vector has wrong length");
    HgpParams p;
    p.lambda = v.head(n).array().exp();
    p.mu0 = v(n);
    p.kernel_f = SeArdKernel::from_log_parameters(v.segment(n + 1, d + 1));
    p.kernel_g = SeArdKernel::from_log_parameters(v.tail(d + 1));
    return p;
}

BoundTerms hgp_bound(const MatrixXd& x, const VectorXd& y, const HgpParams& p, bool with_gradient) {
    const Index n = x.rows();
    const Index d = x.cols();
    if (y.size() != n) throw DimensionMismatch("hgp_bound: inputs and outputs differ in length");
    p.validate(n, d);
    const State st = compute_state(x, y, p);
    const double nd = static_cast<double>(n);

    BoundTerms t;
    t.log_likelihood = -0.5 * y.dot(st.alpha) - st.la.matrixLLT().diagonal().array().log().sum() -
                       0.5 * nd * std::log(2.0 * std::numbers::pi);
    t.trace_term = 0.25 * st.v.trace();
    const VectorXd kg_b = st.kg * st.b;
    t.kl = 0.5 * (st.binv.trace() + st.b.dot(kg_b) - nd +
                  2.0 * st.lb.matrixLLT().diagonal().array().log().sum());
    t.value = t.log_likelihood - t.trace_term - t.kl;
    if (!with_gradient) return t;

    // dL1/dR_i = q_i; the chain rule through R_i = exp(m_i - V_ii/2) gives
    // dL1/dm_i = a_i and dL1/dV_ii = -a_i / 2.
    const MatrixXd ainv = st.la.solve(MatrixXd::Identity(n, n));
    const VectorXd q = 0.5 * (st.alpha.array().square() - ainv.diagonal().array());
    const VectorXd a = q.cwiseProduct(st.r);

    t.gradient.resize(n + 3 + 2 * d);
    const MatrixXd v2 = st.v.array().square();
    const MatrixXd vs = st.v * st.s;
    const VectorXd vsk_diag = vs.cwiseProduct(st.kg).rowwise().sum();
    const VectorXd dlambda = st.kg * a + 0.5 * (v2 * a) + 0.25 * v2.colwise().sum().transpose() -
                             0.5 * vsk_diag - kg_b;
    t.gradient.head(n) = dlambda.cwiseProduct(st.lambda);
    t.gradient(n) = a.sum();

    const MatrixXd wf = st.alpha * st.alpha.transpose() - ainv;
    MatrixXd g;
    for (Index k = 0; k <= d; ++k) {
        p.kernel_f.gram_derivative(x, st.kf, k, g);
        t.gradient(n + 1 + k) = 0.5 * wf.cwiseProduct(g).sum();
    }

    // dF = tr(Y dK_g) with P = I - K_g S and S = diag(lambda) P.
    MatrixXd pm = -st.ks;
    pm.diagonal().array() += 1.0;
    const VectorXd w = 0.5 * a.array() + 0.25;
    MatrixXd y_mat = a * st.b.transpose() - pm.transpose() * w.asDiagonal() * pm +
                     0.5 * pm.transpose() * st.s - 0.5 * st.s - 0.5 * st.b * st.b.transpose();
    y_mat = 0.5 * (y_mat + y_mat.transpose()).eval();
    for (Index k = 0; k <= d; ++k) {
        p.kernel_g.gram_derivative(x, st.kg, k, g);
        t.gradient(n + 2 + d + k) = y_mat.cwiseProduct(g).sum();
    }
    return t;
}

double gaussian_kl(const VectorXd& m, const MatrixXd& v, double mu0, const MatrixXd& k) {
    const Index n = m.size();
    const auto lk = factorize(k, "prior covariance");
    const auto lv = factorize(v, "posterior covariance");
    const VectorXd dm = (m.array() - mu0).matrix();
    const double logdet_k = 2.0 * lk.matrixLLT().diagonal().array().log().sum();
    const double logdet_v = 2.0 * lv.matrixLLT().diagonal().array().log().sum();
    return 0.5 * (lk.solve(v).trace() + dm.dot(lk.solve(dm)) - static_cast<double>(n) + logdet_k -
                  logdet_v);
}

HgpModel::HgpModel(MatrixXd x, VectorXd y, HgpParams params, double y_offset)
    : x_(std::move(x)), y_(std::move(y)), params_(std::move(params)), y_offset_(y_offset) {
    if (x_.rows() != y_.size()) throw DimensionMismatch("HgpModel: inputs and outputs differ in length");
    if (x_.rows() < 1) throw InvalidParameter("HgpModel needs at least one training point");
    params_.validate(x_.rows(), x_.cols());
    State st = compute_state(x_, (y_.array() - y_offset_).matrix(), params_);
    b_ = std::move(st.b);
    sqrt_lambda_ = std::move(st.sqrt_lambda);
    factor_a_ = std::move(st.la);
    factor_b_ = std::move(st.lb);
    alpha_ = std::move(st.alpha);
    m_ = std::move(st.m);
    v_ = std::move(st.v);
    r_ = std::move(st.r);
}

double HgpModel::bound() const {
    return hgp_bound(x_, (y_.array() - y_offset_).matrix(), params_, false).value;
}

Prediction HgpModel::predict(const VectorXd& x) const {
    if (x.size() != x_.cols()) throw DimensionMismatch("HgpModel::predict: dimension mismatch");
    const VectorXd kf = params_.kernel_f.cross(x.transpose(), x_).transpose();
    const VectorXd kg = params_.kernel_g.cross(x.transpose(), x_).transpose();
    Prediction p;
    p.mean = kf.dot(alpha_) + y_offset_;
    const VectorXd vf = factor_a_.matrixL().solve(kf);
    p.gamma2 = std::max(params_.kernel_f.signal_variance - vf.squaredNorm(), 0.0);
    const double chi = kg.dot(b_) + params_.mu0;
    const VectorXd wg = factor_b_.matrixL().solve(sqrt_lambda_.cwiseProduct(kg));
    const double eta2 = std::max(params_.kernel_g.signal_variance - wg.squaredNorm(), 0.0);
    p.noise_term = std::exp(chi + 0.5 * eta2);
    p.variance = p.noise_term + p.gamma2;
    return p;
}

void HgpModel::predict_chunk(const MatrixXd& x, Index begin, Index count, VectorXd& mean,
                             VectorXd* variance) const {
    const MatrixXd xc = x.middleRows(begin, count);
    const MatrixXd kf = params_.kernel_f.cross(xc, x_);
    mean.segment(begin, count) = (kf * alpha_).array() + y_offset_;
    if (!variance) return;
    const MatrixXd vf = factor_a_.matrixL().solve(kf.transpose());
    const VectorXd gamma2 =
        (params_.kernel_f.signal_variance - vf.colwise().squaredNorm().transpose().array()).cwiseMax(0.0);
    const MatrixXd kg = params_.kernel_g.cross(xc, x_);
    const VectorXd chi = (kg * b_).array() + params_.mu0;
    const MatrixXd wg = factor_b_.matrixL().solve(sqrt_lambda_.asDiagonal() * kg.transpose());
    const VectorXd eta2 =
        (params_.kernel_g.signal_variance - wg.colwise().squaredNorm().transpose().array()).cwiseMax(0.0);
    variance->segment(begin, count) = (chi + 0.5 * eta2).array().exp() + gamma2.array();
}

void HgpModel::predict_batch(const MatrixXd& x, VectorXd& mean, VectorXd* variance, Exec exec) const {
    if (x.cols() != x_.cols()) throw DimensionMismatch("HgpModel::predict: dimension mismatch");
    const Index n = x.rows();
    mean.resize(n);
    if (variance) variance->resize(n);
    const Index chunks = (n + kPredictChunk - 1) / kPredictChunk;
    if (exec == Exec::Serial) {
        for (Index c = 0; c < chunks; ++c) {
            const Index begin = c * kPredictChunk;
            predict_chunk(x, begin, std::min(kPredictChunk, n - begin), mean, variance);
        }
        return;
    }
#pragma omp parallel for schedule(dynamic, 1)
    for (Index c = 0; c < chunks; ++c) {
        const Index begin = c * kPredictChunk;
        predict_chunk(x, begin, std::min(kPredictChunk, n - begin), mean, variance);
    }
}

// ---------------------------------------------------------------------------

namespace {

HgpParams to_standardized(const HgpParams& raw, const Standardization& st, Index n) {
    HgpParams p = raw;
    p.kernel_f.lengthscales = raw.kernel_f.lengthscales.cwiseQuotient(st.x_scale);
    p.kernel_g.lengthscales = raw.kernel_g.lengthscales.cwiseQuotient(st.x_scale);
    p.kernel_f.signal_variance = raw.kernel_f.signal_variance / (st.y_scale * st.y_scale);
    p.mu0 = raw.mu0 - 2.0 * std::log(st.y_scale);
    const Index keep = std::min(n, raw.lambda.size());
    p.lambda = VectorXd::Constant(n, 0.5);
    p.lambda.head(keep) = raw.lambda.head(keep);
    return p;
}

HgpParams to_raw(const HgpParams& std_params, const Standardization& st) {
    HgpParams p = std_params;
    p.kernel_f.lengthscales = std_params.kernel_f.lengthscales.cwiseProduct(st.x_scale);
    p.kernel_g.lengthscales = std_params.kernel_g.lengthscales.cwiseProduct(st.x_scale);
    p.kernel_f.signal_variance = std_params.kernel_f.signal_variance * st.y_scale * st.y_scale;
    p.mu0 = std_params.mu0 + 2.0 * std::log(st.y_scale);
    return p;
}

}  // namespace

HgpModel hgp_fit(const MatrixXd& x, const VectorXd& y, const HgpFitOptions& options,
                 const HgpParams* warm) {
    const Index n = x.rows();
    const Index d = x.cols();
    if (n < 3) throw InvalidParameter("hgp_fit needs at least three training points");
    if (y.size() != n) throw DimensionMismatch("hgp_fit: inputs and outputs differ in length");
    const Standardization st = Standardization::from_data(x, y);
    const MatrixXd xs = st.apply_x(x);
    const VectorXd ys = st.apply_y(y);
    const double limit = options.log_parameter_limit;

    opt::Objective objective = [&](const VectorXd& v, double& value, VectorXd* grad) {
        if ((v.array().abs() > limit).any()) return false;
        try {
            BoundTerms t = hgp_bound(xs, ys, unpack(v, n, d), grad != nullptr);
            value = t.value;
            if (grad) *grad = std::move(t.gradient);
        } catch (const Error&) {
            return false;
        }
        return true;
    };

    std::vector<VectorXd> starts;
    if (warm && warm->kernel_f.dimension() == d && warm->kernel_g.dimension() == d) {
        starts.push_back(pack(to_standardized(*warm, st, n)));
    } else {
        const double med = median_pairwise_distance(xs);
        for (double factor : start_factors(options)) {
            HgpParams p;
            p.kernel_f.signal_variance = 1.0;
            p.kernel_f.lengthscales = VectorXd::Constant(d, factor * med);
            p.kernel_g = p.kernel_f;
            p.mu0 = std::log(options.initial_noise_fraction);
            p.lambda = VectorXd::Constant(n, 0.5);
            starts.push_back(pack(p));
        }
    }

    FitInfo info;
    opt::Result best;
    bool have_best = false;
    for (std::size_t i = 0; i < starts.size(); ++i) {
        try {
            opt::Result r = opt::maximize(objective, starts[i], options.optimizer);
            info.start_values.push_back(r.initial_value);
            info.final_values.push_back(r.value);
            if (!have_best || r.value > best.value) {
                best = std::move(r);
                info.chosen_start = static_cast<int>(i);
                have_best = true;
            }
        } catch (const OptimizerFailure&) {
        }
    }
    if (!have_best) {
        if (warm) return hgp_fit(x, y, options, nullptr);
        throw OptimizerFailure("hgp_fit: no restart produced a finite bound");
    }
    info.trace = best.trace;
    info.iterations = best.iterations;
    info.converged = best.converged;

    HgpModel model(x, y, to_raw(unpack(best.x, n, d), st), st.y_mean);
    model.fit_info = std::move(info);
    return model;
}

}  // namespace aashgp::gp
