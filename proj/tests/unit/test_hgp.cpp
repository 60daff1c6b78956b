#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>

#include "aashgp/error.hpp"
#include "aashgp/hgp.hpp"

using namespace aashgp;
using namespace aashgp::gp;

namespace {

struct Toy {
    MatrixXd x;
    VectorXd y;
    HgpParams p;
};

Toy random_toy(Index n, Index d, std::uint64_t seed, double g_variance = 0.8) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    Toy t;
    t.x.resize(n, d);
    t.y.resize(n);
    for (Index i = 0; i < n; ++i) {
        for (Index j = 0; j < d; ++j) t.x(i, j) = u(rng);
        t.y(i) = std::sin(2.0 * t.x(i, 0)) + 0.3 * u(rng);
    }
    t.p.kernel_f = SeArdKernel{0.7 + 0.5 * std::abs(u(rng)), VectorXd::Constant(d, 0.6 + 0.3 * std::abs(u(rng)))};
    t.p.kernel_g = SeArdKernel{g_variance, VectorXd::Constant(d, 0.8 + 0.3 * std::abs(u(rng)))};
    t.p.mu0 = -2.0 + 0.5 * u(rng);
    t.p.lambda.resize(n);
    for (Index i = 0; i < n; ++i) t.p.lambda(i) = 0.2 + std::abs(u(rng));
    return t;
}

double log_normal_density(const VectorXd& y, const MatrixXd& cov) {
    const Eigen::LLT<MatrixXd> llt(cov);
    const VectorXd z = llt.matrixL().solve(y);
    return -0.5 * z.squaredNorm() - llt.matrixLLT().diagonal().array().log().sum() -
           0.5 * y.size() * std::log(2.0 * std::numbers::pi);
}

}  // namespace

TEST_CASE("pack and unpack are inverse") {
    const Toy t = random_toy(7, 3, 1);
    const VectorXd v = pack(t.p);
    CHECK(v.size() == 7 + 1 + 4 + 4);
    const HgpParams q = unpack(v, 7, 3);
    CHECK((q.lambda - t.p.lambda).norm() <= 1e-14);
    CHECK(q.mu0 == t.p.mu0);
    CHECK(q.kernel_g.lengthscales.isApprox(t.p.kernel_g.lengthscales, 1e-14));
    CHECK_THROWS_AS(unpack(v, 6, 3), DimensionMismatch);
}

TEST_CASE("bound gradient matches central differences") {
    for (std::uint64_t s = 0; s < 4; ++s) {
        const Index n = 5 + 5 * static_cast<Index>(s);  // up to 20
        const Toy t = random_toy(n, 2, 100 + s);
        const BoundTerms terms = hgp_bound(t.x, t.y, t.p, true);
        const VectorXd v = pack(t.p);
        REQUIRE(terms.gradient.size() == v.size());
        for (Index k = 0; k < v.size(); ++k) {
            const double h = 1e-5;
            VectorXd up = v, dn = v;
            up(k) += h;
            dn(k) -= h;
            const double fd = (hgp_bound(t.x, t.y, unpack(up, n, 2), false).value -
                               hgp_bound(t.x, t.y, unpack(dn, n, 2), false).value) /
                              (2 * h);
            CHECK(std::abs(fd - terms.gradient(k)) <= 1e-4 * std::max(std::abs(fd), 1e-3));
        }
    }
}

TEST_CASE("bound terms decompose") {
    const Toy t = random_toy(9, 2, 5);
    const BoundTerms b = hgp_bound(t.x, t.y, t.p, false);
    CHECK(b.value == doctest::Approx(b.log_likelihood - b.trace_term - b.kl).epsilon(1e-14));

    const HgpModel model(t.x, t.y, t.p);
    // direct evaluation from m, V, R
    MatrixXd a = t.p.kernel_f.gram(t.x);
    a.diagonal() += model.r();
    CHECK(b.log_likelihood == doctest::Approx(log_normal_density(t.y, a)).epsilon(1e-12));
    CHECK(b.trace_term == doctest::Approx(model.v().trace() / 4).epsilon(1e-12));
    for (Index i = 0; i < 9; ++i) {
        CHECK(model.r()(i) == doctest::Approx(std::exp(model.m()(i) - model.v()(i, i) / 2)).epsilon(1e-14));
    }
    // m and V from their defining formulas
    const MatrixXd kg = t.p.kernel_g.gram(t.x);
    const VectorXd m = kg * (t.p.lambda.array() - 0.5).matrix() + VectorXd::Constant(9, t.p.mu0);
    MatrixXd vinv = kg.inverse();
    vinv.diagonal() += t.p.lambda;
    CHECK((model.m() - m).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((model.v() - vinv.inverse()).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("KL term") {
    const Toy t = random_toy(8, 2, 9);
    const MatrixXd kg = t.p.kernel_g.gram(t.x);
    SUBCASE("zero when the variational posterior equals the prior") {
        CHECK(std::abs(gaussian_kl(VectorXd::Constant(8, t.p.mu0), kg, t.p.mu0, kg)) <= 1e-10);
    }
    SUBCASE("stable evaluation matches the dense formula") {
        for (std::uint64_t s = 0; s < 5; ++s) {
            const Toy r = random_toy(8, 2, 300 + s);
            const HgpModel model(r.x, r.y, r.p);
            const double dense = gaussian_kl(model.m(), model.v(), r.p.mu0, r.p.kernel_g.gram(r.x));
            CHECK(hgp_bound(r.x, r.y, r.p, false).kl == doctest::Approx(dense).epsilon(1e-8));
            CHECK(dense >= 0.0);
        }
    }
}

TEST_CASE("bound does not exceed the exact marginal likelihood") {
    // log p(y) = log E_g[N(y | 0, K_f + diag(exp g))], g ~ N(mu0, K_g), by Monte Carlo.
    std::mt19937_64 rng(31);
    std::normal_distribution<double> n01;
    for (Index n = 1; n <= 4; ++n) {
        for (std::uint64_t s = 0; s < 3; ++s) {
            const Toy t = random_toy(n, 1, 40 * n + s, 0.5);
            const double bound = hgp_bound(t.x, t.y, t.p, false).value;
            const MatrixXd kf = t.p.kernel_f.gram(t.x);
            const MatrixXd lg = Eigen::LLT<MatrixXd>(t.p.kernel_g.gram(t.x)).matrixL();
            const int draws = 200000;
            std::vector<double> logw(draws);
            VectorXd z(n);
            for (int k = 0; k < draws; ++k) {
                for (Index i = 0; i < n; ++i) z(i) = n01(rng);
                const VectorXd g = (lg * z).array() + t.p.mu0;
                MatrixXd a = kf;
                a.diagonal() += g.array().exp().matrix();
                logw[k] = log_normal_density(t.y, a);
            }
            const double top = *std::max_element(logw.begin(), logw.end());
            double sum = 0.0, sum2 = 0.0;
            for (double lw : logw) {
                const double w = std::exp(lw - top);
                sum += w;
                sum2 += w * w;
            }
            const double mean = sum / draws;
            const double se = std::sqrt(std::max(sum2 / draws - mean * mean, 0.0) / draws);
            CHECK(bound <= top + std::log(mean + 3.0 * se));
        }
    }
}

TEST_CASE("homoscedastic limit matches the plain GP") {
    const Toy base = random_toy(10, 2, 12);
    HgpParams p = base.p;
    p.kernel_g.signal_variance = 1e-12;
    p.lambda.setConstant(0.5);
    const HgpModel h(base.x, base.y, p);
    const double noise = std::exp(p.mu0);
    CHECK((h.r().array() / noise - 1.0).abs().maxCoeff() <= 1e-9);

    const GpModel g(base.x, base.y, p.kernel_f, noise);
    CHECK(hgp_bound(base.x, base.y, p, false).log_likelihood == doctest::Approx(g.log_marginal()).epsilon(1e-8));
    for (int k = 0; k < 5; ++k) {
        const VectorXd q = VectorXd::Random(2);
        const Prediction ph = h.predict(q);
        const Prediction pg = g.predict(q);
        CHECK(std::abs(ph.mean - pg.mean) <= 1e-6);
        CHECK(std::abs(ph.gamma2 - pg.variance) <= 1e-6);
        CHECK(ph.noise_term == doctest::Approx(noise).epsilon(1e-6));
    }
}

TEST_CASE("prediction structure") {
    const Toy t = random_toy(15, 2, 13);
    const HgpModel model(t.x, t.y, t.p, 0.4);
    MatrixXd q = MatrixXd::Random(5000, 2) * 3.0;
    VectorXd mean, var;
    model.predict_batch(q, mean, &var, Exec::Parallel);
    VectorXd mean_s, var_s;
    model.predict_batch(q, mean_s, &var_s, Exec::Serial);
    CHECK((mean.array() == mean_s.array()).all());
    CHECK((var.array() == var_s.array()).all());
    CHECK(var.minCoeff() > 0.0);
    for (Index i = 0; i < 50; ++i) {
        const Prediction p = model.predict(q.row(i).transpose());
        CHECK(p.mean == doctest::Approx(mean(i)).epsilon(1e-12));
        CHECK(p.variance == doctest::Approx(var(i)).epsilon(1e-12));
        CHECK(p.gamma2 >= 0.0);
        CHECK(p.variance >= p.gamma2);
        CHECK(p.noise_term > 0.0);
    }
    VectorXd mean_only;
    model.predict_batch(q, mean_only, nullptr);
    CHECK((mean_only.array() == mean.array()).all());

    SUBCASE("invariant under reordering the training points") {
        Eigen::PermutationMatrix<Eigen::Dynamic> perm(15);
        perm.setIdentity();
        std::mt19937_64 rng(2);
        std::shuffle(perm.indices().data(), perm.indices().data() + 15, rng);
        HgpParams pp = t.p;
        pp.lambda = perm * t.p.lambda;
        const HgpModel other(perm * t.x, perm * t.y, pp, 0.4);
        VectorXd m2, v2;
        other.predict_batch(q.topRows(200), m2, &v2);
        CHECK((m2 - mean.head(200)).cwiseAbs().maxCoeff() <= 1e-8);
        CHECK((v2 - var.head(200)).cwiseAbs().maxCoeff() <= 1e-8);
        CHECK(other.bound() == doctest::Approx(model.bound()).epsilon(1e-10));
    }
}

TEST_CASE("hgp_fit on generative data") {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0, 1);
    std::normal_distribution<double> n01;
    const Index n = 100;
    MatrixXd x(n, 1);
    for (Index i = 0; i < n; ++i) x(i, 0) = u(rng);

    SUBCASE("constant noise gives a flat noise profile") {
        VectorXd y(n);
        for (Index i = 0; i < n; ++i) y(i) = std::sin(6.0 * x(i, 0)) + 0.1 * n01(rng);
        const HgpModel m = hgp_fit(x, y);
        CHECK(m.r().maxCoeff() / m.r().minCoeff() <= 3.0);
    }
    SUBCASE("noise rising across the range is detected") {
        VectorXd y(n);
        for (Index i = 0; i < n; ++i) {
            y(i) = std::sin(6.0 * x(i, 0)) + (x(i, 0) < 0.5 ? 0.05 : 0.5) * n01(rng);
        }
        const HgpModel m = hgp_fit(x, y);
        double left = 0, right = 0;
        int nl = 0, nr = 0;
        for (Index i = 0; i < n; ++i) {
            if (x(i, 0) < 0.5) {
                left += m.r()(i);
                ++nl;
            } else {
                right += m.r()(i);
                ++nr;
            }
        }
        CHECK(right / nr > left / nl);

        const FitInfo& info = m.fit_info;
        REQUIRE(info.final_values.size() == 5);
        for (std::size_t k = 0; k < info.final_values.size(); ++k) CHECK(info.final_values[k] >= info.start_values[k]);
        for (std::size_t k = 1; k < info.trace.size(); ++k) CHECK(info.trace[k] >= info.trace[k - 1] - 1e-12);

        // calibration at low-noise training points
        for (Index i = 0; i < n; ++i) {
            if (x(i, 0) >= 0.4) continue;
            const Prediction p = m.predict(x.row(i).transpose());
            CHECK(std::abs(p.mean - y(i)) <= 3.0 * std::sqrt(p.variance));
        }

        SUBCASE("warm start from the previous fit after adding a point") {
            MatrixXd x2(n + 1, 1);
            x2 << x, MatrixXd::Constant(1, 1, 0.25);
            VectorXd y2(n + 1);
            y2 << y, std::sin(1.5);
            const HgpParams warm = m.params();
            const HgpModel refit = hgp_fit(x2, y2, {}, &warm);
            REQUIRE(refit.fit_info.start_values.size() == 1);
            CHECK(refit.fit_info.final_values[0] >= refit.fit_info.start_values[0]);
            CHECK(refit.params().lambda.size() == n + 1);
        }
    }
    SUBCASE("noiseless smooth data is reproduced in sample") {
        const Index n2 = 50;
        MatrixXd x2(n2, 2);
        VectorXd y2(n2);
        for (Index i = 0; i < n2; ++i) {
            x2(i, 0) = u(rng);
            x2(i, 1) = u(rng);
            y2(i) = std::sin(3.0 * x2(i, 0)) + std::cos(2.0 * x2(i, 1));
        }
        const HgpModel m = hgp_fit(x2, y2);
        VectorXd mean;
        m.predict_batch(x2, mean, nullptr);
        const double rmse = std::sqrt((mean - y2).squaredNorm() / n2);
        const double sd = std::sqrt((y2.array() - y2.mean()).square().mean());
        CHECK(rmse <= 1e-3 * sd);
    }
    CHECK_THROWS_AS(hgp_fit(x.topRows(2), VectorXd::Zero(2)), InvalidParameter);
}

TEST_CASE("parameter validation") {
    Toy t = random_toy(4, 2, 3);
    t.p.lambda(1) = 0.0;
    CHECK_THROWS_AS(HgpModel(t.x, t.y, t.p), InvalidParameter);
    t.p.lambda = VectorXd::Constant(3, 0.5);
    CHECK_THROWS_AS(HgpModel(t.x, t.y, t.p), DimensionMismatch);
}
