#pragma once

#include <array>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include <Eigen/Core>

#include "aashgp/models.hpp"

namespace aashgp::models {

/// Pin-jointed linear-elastic space truss. All quantities share one
/// consistent unit system (the bundled 25-bar data uses in, lbf, psi).
struct TrussGeometry {
    struct Element {
        int node_i = 0;  // zero-based
        int node_j = 0;
    };
    /// Load variable k contributes sign * P_k to one nodal force component.
    struct LoadComponent {
        int node = 0;
        int direction = 0;  // 0 = x, 1 = y, 2 = z
        double sign = 1.0;
    };
    struct Monitor {
        int node = 0;
        int direction = 0;
    };

    Eigen::MatrixX3d nodes;                      // coordinates, one row per node
    std::vector<Element> elements;
    std::vector<std::array<bool, 3>> fixed;      // per node, per direction
    std::vector<LoadComponent> loads;            // one per load variable
    std::vector<Monitor> monitors;

    Index node_count() const { return nodes.rows(); }
    Index element_count() const { return static_cast<Index>(elements.size()); }
    Index load_count() const { return static_cast<Index>(loads.size()); }
    /// Input layout: [P_1..P_L, E_1..E_n, A_1..A_n].
    Index input_dimension() const { return load_count() + 2 * element_count(); }
    double element_length(Index e) const;

    void validate() const;
};

/// Parses the plain-text geometry format documented in data/truss25.txt.
TrussGeometry parse_truss_geometry(std::istream& in);
TrussGeometry load_truss_geometry(const std::filesystem::path& path);

/// Global stiffness matrix over all 3*nodes degrees of freedom (supports
/// not applied).
Eigen::MatrixXd assemble_stiffness(const TrussGeometry& geom, const Eigen::VectorXd& youngs,
                                   const Eigen::VectorXd& areas);

/// Nodal displacements (node_count x 3) for the packed input vector.
Eigen::MatrixX3d truss_displacements(const TrussGeometry& geom, const Eigen::VectorXd& x);

/// Peak |u| over the monitored components, optionally with the adjoint
/// gradient with respect to the packed inputs.
ModelEval truss_eval(const Eigen::VectorXd& x, const TrussGeometry& geom, bool with_gradient);

class TrussModel final : public Model {
public:
    /// Defaults to central differences with step 1e-5.
    explicit TrussModel(TrussGeometry geometry);

    std::string name() const override { return "truss25"; }
    Index dimension() const override { return geometry_.input_dimension(); }
    double value(const VectorXd& x) const override;
    bool has_analytic_gradient() const override { return true; }
    const TrussGeometry& geometry() const { return geometry_; }

protected:
    ModelEval evaluate_analytic(const VectorXd& x) const override;

private:
    TrussGeometry geometry_;
};

}  // namespace aashgp::models
