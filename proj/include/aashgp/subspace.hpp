#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "aashgp/hgp.hpp"
#include "aashgp/parallel.hpp"

namespace aashgp::subspace {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// C = (1/n) sum_i g_i g_i^T for gradients stored as rows.
MatrixXd estimate_c(const MatrixXd& gradients, Exec exec = Exec::Parallel);

struct SubspaceProjection {
    VectorXd eigenvalues;   // descending
    MatrixXd eigenvectors;  // columns, largest-magnitude entry positive
    Index d_r = 0;

    Index dimension() const { return eigenvalues.size(); }
    /// First d_r eigenvectors.
    MatrixXd retained() const { return eigenvectors.leftCols(d_r); }
    /// lambda_{d_r} / lambda_{d_r + 1}; +inf when the denominator is not
    /// positive or d_r = D.
    double spectral_gap() const;
};

/// Symmetric eigendecomposition with descending eigenvalues and a
/// deterministic sign per eigenvector. d_r is left at 0.
SubspaceProjection eigendecompose(const MatrixXd& c);

/// Rows of the result are W_r^T x_i.
MatrixXd project(const MatrixXd& w_r, const MatrixXd& x);

/// Fits a surrogate on (features, y) for trial dimension d_r.
using HgpFitter = std::function<gp::HgpModel(Index d_r, const MatrixXd& features, const VectorXd& y)>;

struct DimensionTrial {
    Index d_r = 0;
    double eps_d = 0.0;
};

struct DimensionSelection {
    SubspaceProjection projection;  // d_r set to the selected dimension
    bool converged = false;         // false when d_max was reached without meeting the threshold
    std::optional<gp::HgpModel> model;
    MatrixXd features;              // training features under the selected projection
    std::vector<DimensionTrial> trials;
};

/// In-sample root-mean-square error of the predictive mean.
double in_sample_rmse(const gp::HgpModel& model, const MatrixXd& features, const VectorXd& y);

/// Increases d_r from 1 until the in-sample RMSE of a surrogate fitted in
/// the d_r-dimensional subspace is at most eps_threshold, stopping at d_max.
DimensionSelection select_dimension(const MatrixXd& x, const VectorXd& y, SubspaceProjection projection,
                                    double eps_threshold, Index d_max, const HgpFitter& fitter);

}  // namespace aashgp::subspace
