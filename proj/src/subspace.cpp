#include "aashgp/subspace.hpp"

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

#include "aashgp/error.hpp"

namespace aashgp::subspace {

namespace {

constexpr Index kRowChunk = 256;

}  // namespace

MatrixXd estimate_c(const MatrixXd& gradients, Exec exec) {
    const Index n = gradients.rows();
    const Index d = gradients.cols();
    if (n < 1) throw InvalidParameter("estimate_c needs at least one gradient");
    if (!gradients.allFinite()) throw InvalidParameter("estimate_c: non-finite gradient entries");

    MatrixXd c = MatrixXd::Zero(d, d);
    if (exec == Exec::Serial) {
        for (Index i = 0; i < n; ++i) c.noalias() += gradients.row(i).transpose() * gradients.row(i);
    } else {
        // Fixed chunking, partials summed in chunk order: the result does not
        // depend on the thread count.
        const Index chunks = (n + kRowChunk - 1) / kRowChunk;
        std::vector<MatrixXd> partial(static_cast<std::size_t>(chunks));
#pragma omp parallel for schedule(dynamic, 1)
        for (Index k = 0; k < chunks; ++k) {
            const Index begin = k * kRowChunk;
            const auto block = gradients.middleRows(begin, std::min(kRowChunk, n - begin));
            partial[static_cast<std::size_t>(k)] = block.transpose() * block;
        }
        for (const auto& p : partial) c += p;
    }
    c /= static_cast<double>(n);
    return 0.5 * (c + c.transpose());
}

double SubspaceProjection::spectral_gap() const {
    if (d_r < 1 || d_r >= dimension()) return std::numeric_limits<double>::infinity();
    const double next = eigenvalues(d_r);
    if (!(next > 0.0)) return std::numeric_limits<double>::infinity();
    return eigenvalues(d_r - 1) / next;
}

SubspaceProjection eigendecompose(const MatrixXd& c) {
    if (c.rows() != c.cols() || c.rows() < 1) throw InvalidParameter("eigendecompose: C must be square");
    const double scale = c.norm();
    if ((c - c.transpose()).norm() > 1e-8 * std::max(scale, 1e-300)) {
        throw InvalidParameter("eigendecompose: C is not symmetric");
    }
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (c + c.transpose()));
    if (es.info() != Eigen::Success) throw SolverError("eigendecompose: eigensolver failed");

    const Index d = c.rows();
    SubspaceProjection p;
    p.eigenvalues = es.eigenvalues().reverse();
    p.eigenvectors = es.eigenvectors().rowwise().reverse();
    for (Index j = 0; j < d; ++j) {
        auto w = p.eigenvectors.col(j);
        const double peak = w.cwiseAbs().maxCoeff();
        Index pick = 0;
        while (std::abs(w(pick)) < peak * (1.0 - 1e-12)) ++pick;
        if (w(pick) < 0.0) w = -w;
    }
    return p;
}

MatrixXd project(const MatrixXd& w_r, const MatrixXd& x) {
    if (x.cols() != w_r.rows()) {
        throw DimensionMismatch("project: input dimension " + std::to_string(x.cols()) +
                                " does not match projection " + std::to_string(w_r.rows()));
    }
    return x * w_r;
}

double in_sample_rmse(const gp::HgpModel& model, const MatrixXd& features, const VectorXd& y) {
    VectorXd mean;
    model.predict_batch(features, mean, nullptr, Exec::Serial);
    return std::sqrt((y - mean).squaredNorm() / static_cast<double>(y.size()));
}

DimensionSelection select_dimension(const MatrixXd& x, const VectorXd& y, SubspaceProjection projection,
                                    double eps_threshold, Index d_max, const HgpFitter& fitter) {
    if (x.rows() < 2) throw InvalidParameter("select_dimension needs at least two training points");
    if (!(eps_threshold > 0.0)) throw InvalidParameter("select_dimension: threshold must be > 0");
    if (d_max < 1 || d_max > projection.dimension()) {
        throw InvalidParameter("select_dimension: d_max must lie in [1, D]");
    }
    DimensionSelection sel;
    for (Index d = 1; d <= d_max; ++d) {
        projection.d_r = d;
        MatrixXd features = project(projection.retained(), x);
        gp::HgpModel model = [&] {
            try {
                return fitter(d, features, y);
            } catch (const Error& e) {
                throw OptimizerFailure("surrogate fit failed at d_r = " + std::to_string(d) + ": " + e.what());
            }
        }();
        const double eps = in_sample_rmse(model, features, y);
        sel.trials.push_back({d, eps});
        sel.model.emplace(std::move(model));
        sel.features = std::move(features);
        if (eps <= eps_threshold) {
            sel.converged = true;
            break;
        }
    }
    sel.projection = std::move(projection);
    return sel;
}

}  // namespace aashgp::subspace
