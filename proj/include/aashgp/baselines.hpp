#pragma once

#include <cstdint>

#include <Eigen/Core>

#include "aashgp/models.hpp"
#include "aashgp/parallel.hpp"
#include "aashgp/rv.hpp"

namespace aashgp::baselines {

using Eigen::Index;
using Eigen::VectorXd;

struct McsResult {
    double pf = 0.0;
    Index n = 0;
    Index failures = 0;
    double cov = 0.0;  // sqrt((1 - pf) / (pf n)); +inf when pf = 0
    std::uint64_t seed = 0;
};

/// Crude Monte Carlo estimate of P[M(X) >= y_f]. Samples come from the Mcs
/// stream in blocks of rv::kBlockRows, so the estimate does not depend on
/// the thread count.
McsResult mcs(const models::Model& model, const rv::RandomVectorSpec& spec, double y_f, Index n,
              std::uint64_t seed, Exec exec = Exec::Parallel);

struct FormOptions {
    int max_iterations = 100;
    double tolerance = 1e-6;  // on ||u_{k+1} - u_k||
    VectorXd start;           // empty: origin of the standard space
    bool line_search = false; // Armijo step control on a merit function (iHL-RF)
};

struct FormResult {
    double beta = 0.0;
    double pf = 0.0;
    VectorXd u_star;
    VectorXd x_star;
    int iterations = 0;
    long evaluations = 0;  // model value + gradient evaluations
    bool converged = false;
    double g_at_design = 0.0;
};

/// HL-RF iteration on g(u) = y_f - M(x(u)) in independent standard normal
/// space. beta = ||u*|| carries the sign of g at the origin. Plain HL-RF
/// takes full steps and can cycle on strongly nonlinear limit states;
/// `line_search` damps the steps.
FormResult form_hlrf(const models::Model& model, const rv::RandomVectorSpec& spec, double y_f,
                     const FormOptions& options = {});

}  // namespace aashgp::baselines
