#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "aashgp/error.hpp"
#include "aashgp/learner.hpp"
#include "aashgp/models.hpp"
#include "oracle_values.hpp"

using namespace aashgp;
using namespace aashgp::learner;

namespace {

// Exhaustive double loop: for every critical candidate, the distance to
// every training point; keep the first candidate with the largest minimum.
Index brute_force_maxmin(const std::vector<Index>& critical, const MatrixXd& cand, const MatrixXd& train) {
    Index best = -1;
    double best_d = -1.0;
    for (Index k : critical) {
        double m = std::numeric_limits<double>::infinity();
        for (Index i = 0; i < train.rows(); ++i) {
            double s = 0.0;
            for (Index j = 0; j < cand.cols(); ++j) s += (cand(k, j) - train(i, j)) * (cand(k, j) - train(i, j));
            m = std::min(m, s);
        }
        if (m > best_d) {
            best_d = m;
            best = k;
        }
    }
    return best;
}

gp::HgpModel simple_model(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-2, 2);
    const Index n = 12;
    MatrixXd x(n, 1);
    VectorXd y(n);
    for (Index i = 0; i < n; ++i) {
        x(i, 0) = u(rng);
        y(i) = x(i, 0) + 0.1 * std::sin(5 * x(i, 0));
    }
    gp::HgpParams p;
    p.kernel_f = gp::SeArdKernel{1.0, VectorXd::Constant(1, 0.7)};
    p.kernel_g = gp::SeArdKernel{0.5, VectorXd::Constant(1, 1.0)};
    p.mu0 = -4.0;
    p.lambda = VectorXd::Constant(n, 0.5);
    return gp::HgpModel(x, y, p);
}

LearnerConfig small_config(std::uint64_t seed) {
    LearnerConfig c;
    c.n0 = 20;
    c.pool_size = 20000;
    c.working_pool_size = 2000;
    c.max_iterations = 15;
    c.seed = seed;
    c.fit.restarts = 2;
    return c;
}

}  // namespace

TEST_CASE("critical set") {
    SUBCASE("direct enumeration on a 1-D synthetic case") {
        const VectorXd psi = VectorXd::LinSpaced(401, -4.0, 4.0);
        const VectorXd var = VectorXd::Ones(401);
        const auto crit = critical_set(psi, var, 0.0, 2.0);
        std::vector<Index> expected;
        for (Index k = 0; k < psi.size(); ++k)
            if (std::abs(psi(k)) <= 2.0) expected.push_back(k);
        CHECK(crit == expected);
    }
    SUBCASE("limits of the cutoff") {
        VectorXd mean(4), var(4);
        mean << 0.5, 1.0, 1.5, 1.0;
        var << 1.0, 2.0, 0.0, 0.0;
        const auto all = critical_set(mean, var, 1.0, std::numeric_limits<double>::infinity());
        CHECK(all.size() == 4);
        const auto exact = critical_set(mean, var, 1.0, 0.0);
        CHECK(exact == std::vector<Index>{1, 3});
    }
    SUBCASE("random instances against enumeration") {
        std::mt19937_64 rng(3);
        std::normal_distribution<double> n01;
        for (int t = 0; t < 200; ++t) {
            VectorXd mean(50), var(50);
            for (Index k = 0; k < 50; ++k) {
                mean(k) = n01(rng);
                var(k) = std::exp(n01(rng));
            }
            const double yf = 0.3 * n01(rng);
            const double eps = 0.5 + std::abs(n01(rng));
            std::vector<Index> expected;
            for (Index k = 0; k < 50; ++k)
                if (std::abs(yf - mean(k)) / std::sqrt(var(k)) <= eps) expected.push_back(k);
            CHECK(critical_set(mean, var, yf, eps) == expected);
        }
    }
}

TEST_CASE("max-min selection") {
    SUBCASE("simple 1-D case") {
        MatrixXd cand(2, 1), train(1, 1);
        cand << 0.5, 1.0;
        train << 0.0;
        const Selection s = select_next({0, 1}, cand, train, VectorXd::Zero(2), VectorXd::Ones(2), 0.0);
        CHECK(s.index == 1);
        CHECK(s.min_distance == doctest::Approx(1.0));
        CHECK_FALSE(s.fallback);
    }
    SUBCASE("single candidate") {
        MatrixXd cand(1, 2), train(3, 2);
        cand << 0.1, 0.2;
        train.setRandom();
        CHECK(select_next({0}, cand, train, VectorXd::Zero(1), VectorXd::Ones(1), 0.0).index == 0);
    }
    SUBCASE("ties go to the lowest index") {
        MatrixXd cand(3, 1), train(1, 1);
        cand << 1.0, -1.0, 0.5;
        train << 0.0;
        CHECK(select_next({2, 0, 1}, cand, train, VectorXd::Zero(3), VectorXd::Ones(3), 0.0).index == 0);
    }
    SUBCASE("200 random instances against the double loop") {
        std::mt19937_64 rng(11);
        std::uniform_real_distribution<double> u(-1, 1);
        std::uniform_int_distribution<int> dim(1, 4);
        for (int t = 0; t < 200; ++t) {
            const Index d = dim(rng);
            const Index nc = 20 + t % 30, nt = 1 + t % 15;
            MatrixXd cand(nc, d), train(nt, d);
            for (Index i = 0; i < nc; ++i)
                for (Index j = 0; j < d; ++j) cand(i, j) = u(rng);
            for (Index i = 0; i < nt; ++i)
                for (Index j = 0; j < d; ++j) train(i, j) = u(rng);
            std::vector<Index> crit;
            for (Index k = 0; k < nc; ++k)
                if (u(rng) > -0.5) crit.push_back(k);
            if (crit.empty()) crit.push_back(0);
            const VectorXd mean = VectorXd::Zero(nc), var = VectorXd::Ones(nc);
            const Index expected = brute_force_maxmin(crit, cand, train);
            CHECK(select_next(crit, cand, train, mean, var, 0.0, Exec::Parallel).index == expected);
            CHECK(select_next(crit, cand, train, mean, var, 0.0, Exec::Serial).index == expected);
        }
    }
    SUBCASE("empty critical set falls back to the smallest U") {
        MatrixXd cand(3, 1), train(1, 1);
        cand << 0.0, 1.0, 2.0;
        train << 5.0;
        VectorXd mean(3), var(3);
        mean << 10.0, 4.0, -3.0;
        var << 1.0, 1.0, 4.0;
        const Selection s = select_next({}, cand, train, mean, var, 0.0);
        CHECK(s.fallback);
        CHECK(s.index == 2);  // |0 - (-3)| / 2 = 1.5 is the smallest
    }
    CHECK_THROWS_AS(select_next({}, MatrixXd(0, 1), MatrixXd::Zero(1, 1), VectorXd(), VectorXd(), 0.0), ConfigError);
}

TEST_CASE("surrogate failure-probability estimate") {
    const gp::HgpModel model = simple_model(4);
    const MatrixXd pool = MatrixXd::Random(30000, 1) * 3.0;
    VectorXd mean;
    model.predict_batch(pool, mean, nullptr, Exec::Serial);

    SUBCASE("indicator-count oracle") {
        for (double yf : {-2.0, -0.5, 0.0, 0.7, 1.9, 10.0}) {
            Index count = 0;
            for (Index k = 0; k < mean.size(); ++k) count += mean(k) >= yf ? 1 : 0;
            const double expected = static_cast<double>(count) / mean.size();
            CHECK(estimate_pf(pool, model, yf, Exec::Parallel) == expected);
            CHECK(estimate_pf(pool, model, yf, Exec::Serial) == expected);
        }
        CHECK(estimate_pf(pool, model, mean.maxCoeff() + 1.0) == 0.0);
    }
    SUBCASE("exactly half above the threshold") {
        std::vector<double> sorted(mean.data(), mean.data() + mean.size());
        std::sort(sorted.begin(), sorted.end());
        const double yf = 0.5 * (sorted[14999] + sorted[15000]);
        CHECK(estimate_pf(pool, model, yf) == 0.5);
    }
    SUBCASE("invariant under permuting the pool") {
        Eigen::PermutationMatrix<Eigen::Dynamic> perm(pool.rows());
        perm.setIdentity();
        std::mt19937_64 rng(1);
        std::shuffle(perm.indices().data(), perm.indices().data() + pool.rows(), rng);
        const MatrixXd shuffled = perm * pool;
        CHECK(estimate_pf(shuffled, model, 0.3) == estimate_pf(pool, model, 0.3));
    }
    SUBCASE("streamed pool matches the materialized pool") {
        const auto spec = rv::RandomVectorSpec::iid(rv::MarginalSpec::gaussian(0, 1.5), 3);
        const rng::StreamKey key{5, rng::Purpose::SurrogateMcs, 0};
        const rv::SamplePool cached(spec, 25000, key);
        const rv::SamplePool streamed(spec, 25000, key, 0);
        MatrixXd w = MatrixXd::Zero(3, 1);
        w(1, 0) = 1.0;
        const MatrixXd full = rv::sample(spec, 25000, key);
        const double direct = estimate_pf(full.col(1), model, 0.4);
        CHECK(estimate_pf(cached, w, model, 0.4, Exec::Parallel) == direct);
        CHECK(estimate_pf(streamed, w, model, 0.4, Exec::Serial) == direct);
    }
}

TEST_CASE("convergence check") {
    SUBCASE("hand arithmetic") {
        const auto s = check_convergence({1.0e-3, 1.1e-3}, 1e-3, 1e-3);
        CHECK(s.eps1 == doctest::Approx(0.1 / 1.1).epsilon(1e-12));
        CHECK(s.eps1 == doctest::Approx(0.0909090909).epsilon(1e-9));
        CHECK_FALSE(s.converged);
        CHECK(std::isnan(s.eps2));
    }
    SUBCASE("constant history converges") {
        const auto s = check_convergence({2e-3, 2e-3, 2e-3}, 1e-3, 1e-3);
        CHECK(s.eps1 == 0.0);
        CHECK(s.eps2 == 0.0);
        CHECK(s.converged);
    }
    SUBCASE("zero estimate is guarded") {
        const auto s = check_convergence({1e-3, 0.0}, 1e-3, 1e-3);
        CHECK(std::isinf(s.eps1));
        CHECK_FALSE(s.converged);
        const auto z = check_convergence({0.0, 0.0, 0.0}, 1e-3, 1e-3);
        CHECK_FALSE(z.converged);
        CHECK(std::isinf(z.eps1));
    }
    SUBCASE("needs three entries") {
        CHECK_FALSE(check_convergence({1e-3, 1e-3}, 1e-3, 1e-3).converged);
        CHECK_FALSE(check_convergence({1e-3}, 1e-3, 1e-3).converged);
    }
    SUBCASE("second criterion") {
        const auto s = check_convergence({1.0e-3, 1.5e-3, 1.5005e-3}, 1e-3, 1e-4);
        CHECK(s.eps1 == doctest::Approx(0.0005 / 1.5005).epsilon(1e-9));
        CHECK(s.eps2 == doctest::Approx(0.5 / 1.5 - 0.0005 / 1.5005).epsilon(1e-9));
        CHECK_FALSE(s.converged);
    }
}

TEST_CASE("generalized reliability index") {
    CHECK(generalized_beta(5.77e-3) == doctest::Approx(2.5259070772999032561).epsilon(1e-12));
    CHECK(generalized_beta(oracle::kPhiMinus3) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(std::isinf(generalized_beta(0.0)));
    CHECK(generalized_beta(1.0) < 0.0);
}

TEST_CASE("learner configuration validation") {
    LearnerConfig c;
    c.n0 = 50;
    c.pool_size = 4999;
    CHECK_THROWS_WITH_AS(c.validate(10), doctest::Contains("N/100"), ConfigError);
    c.pool_size = 5000;
    CHECK_NOTHROW(c.validate(10));
    c.eps_c = 0.0;
    CHECK_THROWS_AS(c.validate(10), ConfigError);
    c = LearnerConfig{};
    c.d_max = 11;
    CHECK_THROWS_AS(c.validate(10), ConfigError);
    CHECK(LearnerConfig{}.effective_d_max(30) == 10);
    CHECK(LearnerConfig{}.effective_d_max(3) == 3);
    CHECK(exit_code(Status::Converged) == 0);
    CHECK(exit_code(Status::BudgetExhausted) == 2);
    CHECK(exit_code(Status::Failed) == 1);
}

TEST_CASE("learning loop bookkeeping") {
    // failure is the lower tail of the linear model
    auto inner = std::make_shared<models::NegatedModel>(std::make_shared<models::LinearModel>(10, 2.0));
    const auto spec = rv::RandomVectorSpec::iid(rv::MarginalSpec::gaussian(0, 1), 10);
    models::CountingModel counter(inner);

    SUBCASE("adaptive run on the linear model") {
        LearnerConfig c = small_config(3);
        c.d_max = 1;
        std::vector<IterationRecord> seen;
        const RunRecord rec = run(counter, spec, 0.0, c, [&](const IterationRecord& r) { seen.push_back(r); });
        CHECK(rec.n_s == counter.evaluate_calls());
        CHECK(counter.value_calls() == 0);
        CHECK(rec.n_g == rec.n_s);
        CHECK(rec.n_s == c.n0 + static_cast<Index>(rec.iterations.size()) - 1);
        CHECK(seen.size() == rec.iterations.size());
        CHECK(rec.training.size() == rec.n_s);
        CHECK(rec.projection.d_r == 1);
        // pf = Phi(-2) = 0.02275, pool of 2e4
        CHECK(rec.pf == doctest::Approx(0.02275).epsilon(0.15));
        CHECK(rec.beta_g == doctest::Approx(generalized_beta(rec.pf)));
        for (std::size_t k = 0; k + 1 < rec.iterations.size(); ++k) {
            const auto& it = rec.iterations[k];
            CHECK(it.selected_index >= 0);
            CHECK(it.selected_index < c.working_pool_size);
        }
        CHECK((rec.status == Status::Converged || rec.status == Status::BudgetExhausted));

        SUBCASE("deterministic given the seed") {
            counter.reset();
            const RunRecord again = run(counter, spec, 0.0, c);
            CHECK(again.pf == rec.pf);
            CHECK(again.n_s == rec.n_s);
            CHECK((again.training.x.array() == rec.training.x.array()).all());
        }
    }
    SUBCASE("global design mode fits once and stops") {
        LearnerConfig c = small_config(4);
        c.mode = Mode::GlobalDoe;
        c.n0 = 60;
        c.pool_size = 6000;
        const RunRecord rec = run(counter, spec, 0.0, c);
        CHECK(rec.iterations.size() == 1);
        CHECK(rec.n_s == 60);
        CHECK(counter.evaluate_calls() == 60);
        CHECK(rec.status == Status::Completed);
    }
    SUBCASE("zero iterations gives the initial-design estimate") {
        LearnerConfig c = small_config(4);
        c.max_iterations = 0;
        const RunRecord rec = run(counter, spec, 0.0, c);
        CHECK(rec.iterations.size() == 1);
        CHECK(rec.n_s == c.n0);
        CHECK(rec.status == Status::BudgetExhausted);
    }
    SUBCASE("dimension mismatch") {
        const auto small = rv::RandomVectorSpec::iid(rv::MarginalSpec::gaussian(0, 1), 9);
        CHECK_THROWS_AS(run(counter, small, 0.0, small_config(1)), DimensionMismatch);
    }
}

namespace {

// Fails once the response exceeds a bound, to exercise the abort path.
class Fragile final : public models::Model {
public:
    std::string name() const override { return "fragile"; }
    Index dimension() const override { return 2; }
    double value(const VectorXd& x) const override {
        if (std::abs(x(0)) > 0.3) throw SolverError("fragile: out of range");
        return x.sum();
    }
    bool has_analytic_gradient() const override { return true; }

protected:
    models::ModelEval evaluate_analytic(const VectorXd& x) const override {
        return {value(x), VectorXd::Ones(2)};
    }
};

}  // namespace

TEST_CASE("stage failure aborts with a partial record") {
    const Fragile model;
    const auto spec = rv::RandomVectorSpec::iid(rv::MarginalSpec::gaussian(0, 1), 2);
    LearnerConfig c = small_config(1);
    c.n0 = 5;
    c.pool_size = 500;
    try {
        run(model, spec, 0.0, c);
        FAIL("expected RunAborted");
    } catch (const RunAborted& e) {
        CHECK(e.record.status == Status::Failed);
        CHECK(std::string(e.what()).find("fragile") != std::string::npos);
    }
}
