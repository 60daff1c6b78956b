#include "aashgp/learner.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>

namespace aashgp::learner {

namespace {

constexpr Index kPreviewRows = 2000;

double stddev(const VectorXd& v) {
    if (v.size() < 2) return 0.0;
    return std::sqrt((v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1));
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double sigma(double variance) { return std::max(std::sqrt(std::max(variance, 0.0)), kSigmaFloor); }

// Evaluates the model at every row of x; rethrows the first failure (lowest row).
std::vector<models::ModelEval> evaluate_rows(const models::Model& model, const MatrixXd& x, Exec exec) {
    const Index n = x.rows();
    std::vector<models::ModelEval> out(static_cast<std::size_t>(n));
    std::vector<std::string> errors(static_cast<std::size_t>(n));
    auto one = [&](Index i) {
        try {
            out[static_cast<std::size_t>(i)] = model.evaluate(x.row(i).transpose());
        } catch (const std::exception& e) {
            errors[static_cast<std::size_t>(i)] = std::string(e.what()) + " ";
        }
    };
    if (exec == Exec::Serial) {
        for (Index i = 0; i < n; ++i) one(i);
    } else {
#pragma omp parallel for schedule(dynamic, 1)
        for (Index i = 0; i < n; ++i) one(i);
    }
    for (Index i = 0; i < n; ++i) {
        if (!errors[static_cast<std::size_t>(i)].empty()) {
            throw SolverError("model evaluation failed at design point " + std::to_string(i) + ": " +
                              errors[static_cast<std::size_t>(i)]);
        }
    }
    return out;
}

}  // namespace

void TrainingSet::append(const VectorXd& xi, const models::ModelEval& e) {
    const Index n = size();
    const Index d = xi.size();
    if (n == 0) {
        x.resize(0, d);
        grad.resize(0, d);
    }
    if (e.grad.size() != d || x.cols() != d) throw DimensionMismatch("TrainingSet: dimension mismatch");
    x.conservativeResize(n + 1, Eigen::NoChange);
    grad.conservativeResize(n + 1, Eigen::NoChange);
    y.conservativeResize(n + 1);
    x.row(n) = xi.transpose();
    grad.row(n) = e.grad.transpose();
    y(n) = e.y;
}

Index LearnerConfig::effective_d_max(Index dimension) const {
    return d_max > 0 ? d_max : std::min<Index>(dimension, 10);
}

void LearnerConfig::validate(Index dimension) const {
    if (n0 < 3) throw ConfigError("learner.n0 must be >= 3");
    if (pool_size < 1) throw ConfigError("learner.N must be >= 1");
    if (working_pool_size < 1) throw ConfigError("learner.working_pool_size must be >= 1");
    if (n0 * 100 > pool_size) throw ConfigError("learner: n0 must not exceed N/100");
    if (!(eps_c > 0.0)) throw ConfigError("learner.eps_c must be > 0");
    if (!(eps1_tol > 0.0) || !(eps2_tol > 0.0)) throw ConfigError("learner: tolerances must be > 0");
    if (eps_d && !(*eps_d > 0.0)) throw ConfigError("learner.eps_d must be > 0");
    if (!(eps_d_fraction > 0.0)) throw ConfigError("learner.eps_d_fraction must be > 0");
    if (d_max < 0 || d_max > dimension) throw ConfigError("learner.d_max must lie in [1, D]");
    if (max_iterations < 0) throw ConfigError("learner.max_iterations must be >= 0");
}

std::vector<Index> critical_set(const VectorXd& mean, const VectorXd& variance, double y_f, double eps_c) {
    if (mean.size() != variance.size()) throw DimensionMismatch("critical_set: size mismatch");
    std::vector<Index> out;
    for (Index k = 0; k < mean.size(); ++k) {
        if (std::abs(y_f - mean(k)) / sigma(variance(k)) <= eps_c) out.push_back(k);
    }
    return out;
}

Selection select_next(const std::vector<Index>& critical, const MatrixXd& candidates,
                      const MatrixXd& training, const VectorXd& mean, const VectorXd& variance,
                      double y_f, Exec exec) {
    if (candidates.rows() == 0) throw ConfigError("select_next: empty candidate pool");
    if (training.rows() == 0) throw InvalidParameter("select_next: empty training set");
    if (candidates.cols() != training.cols()) throw DimensionMismatch("select_next: feature dimensions differ");

    Selection s;
    if (critical.empty()) {
        s.fallback = true;
        double best = std::numeric_limits<double>::infinity();
        for (Index k = 0; k < candidates.rows(); ++k) {
            const double u = std::abs(y_f - mean(k)) / sigma(variance(k));
            if (u < best) {
                best = u;
                s.index = k;
            }
        }
        s.min_distance = (training.rowwise() - candidates.row(s.index)).rowwise().norm().minCoeff();
        return s;
    }

    const Index nc = static_cast<Index>(critical.size());
    VectorXd min_d2(nc);
    auto nearest = [&](Index c) {
        const auto p = candidates.row(critical[static_cast<std::size_t>(c)]);
        double best = std::numeric_limits<double>::infinity();
        for (Index i = 0; i < training.rows(); ++i) best = std::min(best, (training.row(i) - p).squaredNorm());
        min_d2(c) = best;
    };
    if (exec == Exec::Serial) {
        for (Index c = 0; c < nc; ++c) nearest(c);
    } else {
#pragma omp parallel for schedule(static)
        for (Index c = 0; c < nc; ++c) nearest(c);
    }
    Index best = 0;
    for (Index c = 1; c < nc; ++c) {
        if (min_d2(c) > min_d2(best)) best = c;
    }
    s.index = critical[static_cast<std::size_t>(best)];
    s.min_distance = std::sqrt(min_d2(best));
    return s;
}

double estimate_pf(const MatrixXd& features, const gp::HgpModel& model, double y_f, Exec exec) {
    if (features.rows() < 1) throw InvalidParameter("estimate_pf: empty pool");
    VectorXd mean;
    model.predict_batch(features, mean, nullptr, exec);
    return static_cast<double>((mean.array() >= y_f).count()) / static_cast<double>(mean.size());
}

double estimate_pf(const rv::SamplePool& pool, const MatrixXd& w_r, const gp::HgpModel& model, double y_f,
                   Exec exec) {
    const Index blocks = pool.block_count();
    std::vector<Index> counts(static_cast<std::size_t>(blocks), 0);
    auto one = [&](Index b, MatrixXd& work) {
        VectorXd mean;
        model.predict_batch(subspace::project(w_r, pool.block(b, work)), mean, nullptr, Exec::Serial);
        counts[static_cast<std::size_t>(b)] = (mean.array() >= y_f).count();
    };
    if (exec == Exec::Serial) {
        MatrixXd work;
        for (Index b = 0; b < blocks; ++b) one(b, work);
    } else {
#pragma omp parallel
        {
            MatrixXd work;
#pragma omp for schedule(dynamic, 1)
            for (Index b = 0; b < blocks; ++b) one(b, work);
        }
    }
    Index total = 0;
    for (Index c : counts) total += c;
    return static_cast<double>(total) / static_cast<double>(pool.size());
}

ConvergenceStatus check_convergence(const std::vector<double>& history, double eps1_tol, double eps2_tol) {
    ConvergenceStatus s;
    const std::size_t n = history.size();
    auto eps1_at = [&](std::size_t m) {
        const double cur = history[m];
        if (cur == 0.0) return std::numeric_limits<double>::infinity();
        return std::abs((cur - history[m - 1]) / cur);
    };
    if (n < 2) return s;
    s.eps1 = eps1_at(n - 1);
    if (n < 3) return s;
    const double prev = eps1_at(n - 2);
    s.eps2 = std::isinf(prev) || std::isinf(s.eps1) ? std::numeric_limits<double>::infinity()
                                                    : std::abs(prev - s.eps1);
    s.converged = history[n - 1] != 0.0 && s.eps1 <= eps1_tol && s.eps2 <= eps2_tol;
    return s;
}

const char* to_string(Status s) {
    switch (s) {
        case Status::Converged: return "converged";
        case Status::BudgetExhausted: return "max_iterations";
        case Status::Completed: return "completed";
        case Status::Failed: return "failed";
    }
    return "failed";
}

int exit_code(Status s) {
    switch (s) {
        case Status::Converged:
        case Status::Completed: return 0;
        case Status::BudgetExhausted: return 2;
        case Status::Failed: return 1;
    }
    return 1;
}

double generalized_beta(double pf) {
    if (pf <= 0.0) return std::numeric_limits<double>::infinity();
    if (pf >= 1.0) return -std::numeric_limits<double>::infinity();
    return -rv::normal_quantile(pf);
}

RunRecord run(const models::Model& model, const rv::RandomVectorSpec& spec, double y_f,
              const LearnerConfig& config, const IterationCallback& on_iteration) {
    spec.validate();
    const Index dim = spec.dimension();
    if (model.dimension() != dim) throw DimensionMismatch("run: model and spec dimensions differ");
    if (!std::isfinite(y_f)) throw ConfigError("run: threshold must be finite");
    config.validate(dim);
    const Index d_max = config.effective_d_max(dim);

    RunRecord rec;
    try {
        // Step 1: initial design and the fixed surrogate MCS pool.
        const MatrixXd x0 = rv::sample(spec, config.n0, {config.seed, rng::Purpose::InitialDoe, 0}, config.exec);
        const auto evals = evaluate_rows(model, x0, config.exec);
        for (Index i = 0; i < x0.rows(); ++i) rec.training.append(x0.row(i).transpose(), evals[static_cast<std::size_t>(i)]);
        rec.n_s = rec.n_g = rec.training.size();
        const rv::SamplePool pool(spec, config.pool_size, {config.seed, rng::Purpose::SurrogateMcs, 0},
                                  config.pool_cache_bytes);

        std::map<Index, gp::HgpParams> warm;
        std::vector<double> history;
        for (int it = 0;; ++it) {
            const auto t0 = std::chrono::steady_clock::now();
            IterationRecord ir;
            ir.iteration = it;

            // Step 2: subspace, dimension selection and surrogate.
            subspace::SubspaceProjection proj =
                subspace::eigendecompose(subspace::estimate_c(rec.training.grad, config.exec));
            const double eps_t = config.eps_d ? *config.eps_d : config.eps_d_fraction * stddev(rec.training.y);
            ir.eps_d_threshold = eps_t;
            subspace::HgpFitter fitter = [&](Index d, const MatrixXd& f, const VectorXd& y) {
                const auto w = warm.find(d);
                const gp::HgpParams* start = config.warm_start && w != warm.end() ? &w->second : nullptr;
                gp::HgpModel m = gp::hgp_fit(f, y, config.fit, start);
                warm.insert_or_assign(d, m.params());
                return m;
            };
            subspace::DimensionSelection sel =
                subspace::select_dimension(rec.training.x, rec.training.y, std::move(proj),
                                           eps_t > 0.0 ? eps_t : std::numeric_limits<double>::min(), d_max, fitter);
            rec.projection = sel.projection;
            rec.training.features = sel.features;
            rec.model = std::move(sel.model);
            const gp::HgpModel& hgp = *rec.model;
            const MatrixXd w_r = rec.projection.retained();
            ir.d_r = rec.projection.d_r;
            ir.d_converged = sel.converged;
            ir.trials = sel.trials;
            ir.eigenvalues = rec.projection.eigenvalues;
            ir.spectral_gap = rec.projection.spectral_gap();
            ir.bound = hgp.bound();

            // Step 3: surrogate MCS.
            const double pf = estimate_pf(pool, w_r, hgp, y_f, config.exec);
            history.push_back(pf);
            rec.pf = pf;
            rec.beta_g = generalized_beta(pf);

            // Step 4: convergence.
            const ConvergenceStatus cs = check_convergence(history, config.eps1_tol, config.eps2_tol);
            ir.pf = pf;
            ir.eps1 = cs.eps1;
            ir.eps2 = cs.eps2;
            ir.n_s = rec.n_s;

            bool stop = false;
            if (config.mode == Mode::GlobalDoe) {
                rec.status = Status::Completed;
                stop = true;
            } else if (cs.converged) {
                rec.status = Status::Converged;
                stop = true;
            } else if (it >= config.max_iterations) {
                rec.status = Status::BudgetExhausted;
                stop = true;
            }
            if (stop) {
                ir.seconds = seconds_since(t0);
                rec.iterations.push_back(ir);
                if (on_iteration) on_iteration(ir);
                break;
            }

            // Step 5: acquisition from a fresh candidate pool.
            const MatrixXd cand_x = rv::sample(spec, config.working_pool_size,
                                               {config.seed, rng::Purpose::CandidatePool,
                                                static_cast<std::uint64_t>(it)},
                                               config.exec);
            const MatrixXd cand_f = subspace::project(w_r, cand_x);
            VectorXd mean, var;
            hgp.predict_batch(cand_f, mean, &var, config.exec);
            const std::vector<Index> crit = critical_set(mean, var, y_f, config.eps_c);
            const Selection s = select_next(crit, cand_f, rec.training.features, mean, var, y_f, config.exec);
            ir.critical_size = static_cast<Index>(crit.size());
            ir.selected_index = s.index;
            ir.fallback = s.fallback;

            const VectorXd x_new = cand_x.row(s.index).transpose();
            models::ModelEval e;
            try {
                e = model.evaluate(x_new);
            } catch (const std::exception& ex) {
                throw SolverError(std::string("model evaluation failed at iteration ") + std::to_string(it) +
                                  ": " + ex.what());
            }
            rec.training.append(x_new, e);
            rec.n_s = rec.n_g = rec.training.size();
            ir.seconds = seconds_since(t0);
            rec.iterations.push_back(ir);
            if (on_iteration) on_iteration(ir);
        }
        rec.message = to_string(rec.status);

        MatrixXd work;
        const auto head = pool.block(0, work);
        const Index rows = std::min(kPreviewRows, head.rows());
        rec.preview_features = subspace::project(rec.projection.retained(), head.topRows(rows));
        rec.model->predict_batch(rec.preview_features, rec.preview_mean, nullptr, config.exec);
    } catch (const RunAborted&) {
        throw;
    } catch (const std::exception& e) {
        rec.status = Status::Failed;
        rec.message = e.what();
        throw RunAborted(e.what(), std::move(rec));
    }
    return rec;
}

}  // namespace aashgp::learner
