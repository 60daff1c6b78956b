#include <doctest.h>

#include <cmath>

#include "aashgp/baselines.hpp"
#include "aashgp/error.hpp"
#include "aashgp/models.hpp"
#include "oracle_values.hpp"

using namespace aashgp;
using namespace aashgp::baselines;
using aashgp::models::LinearModel;

namespace {

// y = x_1 in one dimension (beta0 = 0 and a sign flip of the linear model).
std::shared_ptr<const models::Model> identity_model() {
    return std::make_shared<models::NegatedModel>(std::make_shared<LinearModel>(1, 0.0));
}

class Throwing final : public models::Model {
public:
    std::string name() const override { return "throwing"; }
    Index dimension() const override { return 1; }
    double value(const VectorXd& x) const override {
        if (x(0) > 2.5) throw SolverError("too large");
        return x(0);
    }
};

}  // namespace

TEST_CASE("mcs: symmetric event") {
    const auto spec = rv::RandomVectorSpec::iid(rv::MarginalSpec::gaussian(0, 1), 1);
    const McsResult r = mcs(*identity_model(), spec, 0.0, 100000, 8);
    CHECK(std::abs(r.pf - 0.5) <= 3.0 * r.cov * r.pf);
    CHECK(r.n == 100000);
    CHECK(r.failures == static_cast<Index>(r.pf * r.n));
    CHECK(r.cov == doctest::Approx(std::sqrt((1 - r.pf) / (r.pf * r.n))));
}

TEST_CASE("mcs: linear benchmark against the exact probability") {
    // failure is the lower tail y <= 0, i.e. -y >= 0
    const models::NegatedModel model(std::make_shared<LinearModel>(100, 3.0));
    const auto spec = rv::RandomVectorSpec::iid(rv::MarginalSpec::gaussian(0, 1), 100);
    const McsResult r = mcs(model, spec, 0.0, 1000000, 1);
    const double pf = oracle::kPhiMinus3;
    CHECK(std::abs(r.pf - pf) <= 3.0 * std::sqrt(pf * (1 - pf) / 1e6));
}

TEST_CASE("mcs: serial and parallel agree, seeds reproduce") {
    const auto spec = rv::RandomVectorSpec::iid(rv::MarginalSpec::gaussian(0, 1), 1);
    const McsResult a = mcs(*identity_model(), spec, 1.0, 54321, 3, Exec::Parallel);
    const McsResult b = mcs(*identity_model(), spec, 1.0, 54321, 3, Exec::Serial);
    const McsResult c = mcs(*identity_model(), spec, 1.0, 54321, 3, Exec::Parallel);
    CHECK(a.failures == b.failures);
    CHECK(a.failures == c.failures);
    CHECK(mcs(*identity_model(), spec, 1.0, 54321, 4).failures != a.failures);
}

TEST_CASE("mcs: disjoint seeds agree within six combined standard errors") {
    const auto spec = rv::RandomVectorSpec::iid(rv::MarginalSpec::gaussian(0, 1), 1);
    int agree = 0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const McsResult a = mcs(*identity_model(), spec, 1.5, 20000, 1000 + 2 * s);
        const McsResult b = mcs(*identity_model(), spec, 1.5, 20000, 1001 + 2 * s);
        const double se = std::sqrt(a.pf * (1 - a.pf) / a.n + b.pf * (1 - b.pf) / b.n);
        if (std::abs(a.pf - b.pf) < 6.0 * se) ++agree;
    }
    CHECK(agree >= 99);
}

TEST_CASE("mcs: errors") {
    const auto spec = rv::RandomVectorSpec::iid(rv::MarginalSpec::gaussian(0, 1), 1);
    CHECK_THROWS_AS(mcs(*identity_model(), spec, 0.0, 0, 1), InvalidParameter);
    CHECK_THROWS_WITH_AS(mcs(Throwing{}, spec, 0.0, 30000, 1), doctest::Contains("at sample"), SolverError);
    CHECK_THROWS_AS(mcs(Throwing{}, spec, 0.0, 30000, 1, Exec::Serial), SolverError);
}

TEST_CASE("form: linear Gaussian limit state is exact") {
    const models::NegatedModel model(std::make_shared<LinearModel>(100, 3.0));
    const auto spec = rv::RandomVectorSpec::iid(rv::MarginalSpec::gaussian(0, 1), 100);
    const FormResult r = form_hlrf(model, spec, 0.0);
    CHECK(r.converged);
    CHECK(std::abs(r.beta - 3.0) <= 1e-6);
    CHECK(std::abs(r.pf / oracle::kPhiMinus3 - 1.0) <= 1e-9);
    CHECK(r.iterations <= 2);
    CHECK(std::abs(r.u_star.norm() - r.beta) <= 1e-8);
    CHECK(std::abs(r.g_at_design) <= 1e-6 * 30.0);
}

TEST_CASE("form: nonlinear design point against an independent optimizer") {
    // Lower-tail product event of the 30-dimensional benchmark. The gradient
    // vanishes at the origin and full HL-RF steps cycle here, so start off the
    // diagonal and damp the steps.
    auto product = std::make_shared<models::ProductModel>(models::ProductModel::with_effective_dimension(30, 4));
    const models::NegatedModel model(product);
    const auto spec = rv::RandomVectorSpec::iid(rv::MarginalSpec::uniform(0, 1), 30);
    FormOptions opts;
    opts.start = VectorXd::Zero(30);
    opts.start.head(4) << -1.5, 1.0, 1.0, 1.0;
    opts.max_iterations = 200;
    opts.line_search = true;
    const FormResult r = form_hlrf(model, spec, 0.65, opts);
    REQUIRE(r.converged);
    CHECK(r.beta == doctest::Approx(oracle::kProductFormBeta30).epsilon(1e-6));
    CHECK(std::abs(r.u_star.norm() - r.beta) <= 1e-8);
    CHECK(std::abs(r.g_at_design) <= 1e-6);

    // u* anti-parallel to the gradient of g at u*
    const VectorXd x = rv::from_standard(spec, r.u_star);
    const VectorXd grad_g = -rv::from_standard_jacobian(spec, r.u_star).cwiseProduct(model.evaluate(x).grad);
    const double cosine = -grad_g.dot(r.u_star) / (grad_g.norm() * r.u_star.norm());
    CHECK(std::acos(std::min(cosine, 1.0)) <= 1e-4);
}

TEST_CASE("form: non-convergence is flagged, not thrown") {
    auto product = std::make_shared<models::ProductModel>(models::ProductModel::with_effective_dimension(30, 4));
    const models::NegatedModel model(product);
    const auto spec = rv::RandomVectorSpec::iid(rv::MarginalSpec::uniform(0, 1), 30);
    FormOptions opts;
    opts.max_iterations = 20;
    const FormResult r = form_hlrf(model, spec, 0.65, opts);
    CHECK_FALSE(r.converged);
    CHECK(r.iterations == 20);
}
