#include "aashgp/baselines.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "aashgp/error.hpp"

namespace aashgp::baselines {

namespace {

// Counts failures in one block. Returns the row of the first failed model
// evaluation (or -1) and its message.
Index count_block(const models::Model& model, const rv::RandomVectorSpec& spec, double y_f, Index n,
                  const rng::StreamKey& key, Index block, Eigen::MatrixXd& work, Index& failures,
                  std::string& error) {
    rv::sample_block(spec, n, key, block, work);
    failures = 0;
    for (Index i = 0; i < work.rows(); ++i) {
        try {
            if (model.value(work.row(i).transpose()) >= y_f) ++failures;
        } catch (const std::exception& e) {
            error = e.what();
            return block * rv::kBlockRows + i;
        }
    }
    return -1;
}

}  // namespace

McsResult mcs(const models::Model& model, const rv::RandomVectorSpec& spec, double y_f, Index n,
              std::uint64_t seed, Exec exec) {
    if (n < 1) throw InvalidParameter("mcs: sample size must be >= 1");
    spec.validate();
    if (spec.dimension() != model.dimension()) throw DimensionMismatch("mcs: model and spec dimensions differ");
    const rng::StreamKey key{seed, rng::Purpose::Mcs, 0};
    const Index blocks = (n + rv::kBlockRows - 1) / rv::kBlockRows;
    std::vector<Index> counts(static_cast<std::size_t>(blocks), 0);
    std::vector<Index> bad(static_cast<std::size_t>(blocks), -1);
    std::vector<std::string> messages(static_cast<std::size_t>(blocks));

    if (exec == Exec::Serial) {
        Eigen::MatrixXd work;
        for (Index b = 0; b < blocks; ++b) {
            const auto k = static_cast<std::size_t>(b);
            bad[k] = count_block(model, spec, y_f, n, key, b, work, counts[k], messages[k]);
            if (bad[k] >= 0) break;
        }
    } else {
#pragma omp parallel
        {
            Eigen::MatrixXd work;
#pragma omp for schedule(dynamic, 1)
            for (Index b = 0; b < blocks; ++b) {
                const auto k = static_cast<std::size_t>(b);
                bad[k] = count_block(model, spec, y_f, n, key, b, work, counts[k], messages[k]);
            }
        }
    }

    McsResult r;
    r.n = n;
    r.seed = seed;
    for (Index b = 0; b < blocks; ++b) {
        const auto k = static_cast<std::size_t>(b);
        if (bad[k] >= 0) {
            throw SolverError("mcs: model evaluation failed at sample " + std::to_string(bad[k]) + ": " +
                              messages[k]);
        }
        r.failures += counts[k];
    }
    r.pf = static_cast<double>(r.failures) / static_cast<double>(n);
    r.cov = r.pf > 0.0 ? std::sqrt((1.0 - r.pf) / (r.pf * static_cast<double>(n)))
                       : std::numeric_limits<double>::infinity();
    return r;
}

FormResult form_hlrf(const models::Model& model, const rv::RandomVectorSpec& spec, double y_f,
                     const FormOptions& options) {
    spec.validate();
    const Index d = spec.dimension();
    if (d != model.dimension()) throw DimensionMismatch("form: model and spec dimensions differ");
    if (options.max_iterations < 1) throw InvalidParameter("form: max_iterations must be >= 1");
    if (!(options.tolerance > 0.0)) throw InvalidParameter("form: tolerance must be > 0");

    VectorXd u = options.start.size() == 0 ? VectorXd::Zero(d) : options.start;
    if (u.size() != d) throw DimensionMismatch("form: start point has wrong dimension");

    FormResult r;
    // g and its standard-space gradient at u
    auto limit_state = [&](const VectorXd& at, double& g, VectorXd& grad) {
        const models::ModelEval e = model.evaluate(rv::from_standard(spec, at));
        ++r.evaluations;
        g = y_f - e.y;
        grad = -rv::from_standard_jacobian(spec, at).cwiseProduct(e.grad);
    };

    double g = 0.0;
    VectorXd grad;
    limit_state(u, g, grad);
    // the sign of beta follows g at the origin of the standard space
    double g0 = g;
    if (options.start.size() != 0) {
        g0 = y_f - model.value(rv::from_standard(spec, VectorXd::Zero(d)));
        ++r.evaluations;
    }

    for (int it = 0; it < options.max_iterations; ++it) {
        const double gg = grad.squaredNorm();
        if (!(gg > 0.0) || !std::isfinite(gg)) break;
        const VectorXd next = (grad.dot(u) - g) / gg * grad;
        const VectorXd dir = next - u;

        VectorXd trial = next;
        double g_trial = 0.0;
        VectorXd grad_trial;
        limit_state(trial, g_trial, grad_trial);
        double step = 1.0;
        if (options.line_search) {
            // merit 0.5 |u|^2 + c |g|; dir is a descent direction once c > |u| / |grad g|
            const double gnorm = std::sqrt(gg);
            const double c = 2.0 * std::max(u.norm(), next.norm()) / gnorm + 1.0 / gnorm;
            const double sign = g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
            const double m0 = 0.5 * u.squaredNorm() + c * std::abs(g);
            const double slope = (u + c * sign * grad).dot(dir);
            while (0.5 * trial.squaredNorm() + c * std::abs(g_trial) > m0 + 1e-4 * step * slope && step > 1e-8) {
                step *= 0.5;
                trial = u + step * dir;
                limit_state(trial, g_trial, grad_trial);
            }
        }
        const double moved = (trial - u).norm();
        u = std::move(trial);
        g = g_trial;
        grad = std::move(grad_trial);
        r.iterations = it + 1;
        if (moved <= options.tolerance) {
            r.converged = true;
            break;
        }
    }
    r.u_star = u;
    r.x_star = rv::from_standard(spec, u);
    r.g_at_design = g;
    r.beta = (g0 < 0.0 ? -1.0 : 1.0) * u.norm();
    r.pf = rv::normal_cdf(-r.beta);
    return r;
}

}  // namespace aashgp::baselines
