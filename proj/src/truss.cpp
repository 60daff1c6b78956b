#include "aashgp/truss.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include <Eigen/Cholesky>

#include "aashgp/error.hpp"

namespace aashgp::models {

namespace {

int parse_direction(const std::string& token, int line) {
    if (token == "x") return 0;
    if (token == "y") return 1;
    if (token == "z") return 2;
    throw ConfigError("truss geometry line " + std::to_string(line) + ": bad direction '" + token +
                      "'");
}

class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    // Next non-empty, non-comment line; false at end of input.
    bool next(std::istringstream& out) {
        std::string raw;
        while (std::getline(in_, raw)) {
            ++line_;
            if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
            if (raw.find_first_not_of(" \t\r") == std::string::npos) continue;
            out.clear();
            out.str(raw);
            return true;
        }
        return false;
    }

    int line() const { return line_; }

    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError("truss geometry line " + std::to_string(line_) + ": " + what);
    }

private:
    std::istream& in_;
    int line_ = 0;
};

struct Solution {
    Eigen::MatrixX3d u;
    Eigen::LLT<Eigen::MatrixXd> factor;
    std::vector<Index> free_dofs;
    std::vector<Index> dof_to_free;  // -1 for supported dofs
};

Solution solve(const TrussGeometry& geom, const Eigen::VectorXd& x) {
    if (x.size() != geom.input_dimension()) {
        throw DimensionMismatch("truss: input has dimension " + std::to_string(x.size()) +
                                ", expected " + std::to_string(geom.input_dimension()));
    }
    const Index nl = geom.load_count();
    const Index ne = geom.element_count();
    const Eigen::VectorXd youngs = x.segment(nl, ne);
    const Eigen::VectorXd areas = x.segment(nl + ne, ne);
    if (!(youngs.array() > 0.0).all() || !(areas.array() > 0.0).all()) {
        throw InvalidParameter("truss: elastic moduli and areas must be positive");
    }
    const Eigen::MatrixXd k_full = assemble_stiffness(geom, youngs, areas);

    Solution s;
    const Index ndof = 3 * geom.node_count();
    s.dof_to_free.assign(static_cast<std::size_t>(ndof), -1);
    for (Index n = 0; n < geom.node_count(); ++n) {
        for (int d = 0; d < 3; ++d) {
            if (!geom.fixed[static_cast<std::size_t>(n)][static_cast<std::size_t>(d)]) {
                s.dof_to_free[static_cast<std::size_t>(3 * n + d)] =
                    static_cast<Index>(s.free_dofs.size());
                s.free_dofs.push_back(3 * n + d);
            }
        }
    }
    const Index nf = static_cast<Index>(s.free_dofs.size());
    Eigen::MatrixXd k(nf, nf);
    for (Index a = 0; a < nf; ++a)
        for (Index b = 0; b < nf; ++b)
            k(a, b) = k_full(s.free_dofs[static_cast<std::size_t>(a)],
                             s.free_dofs[static_cast<std::size_t>(b)]);

    Eigen::VectorXd f = Eigen::VectorXd::Zero(nf);
    for (Index l = 0; l < nl; ++l) {
        const auto& lc = geom.loads[static_cast<std::size_t>(l)];
        const Index free = s.dof_to_free[static_cast<std::size_t>(3 * lc.node + lc.direction)];
        if (free >= 0) f(free) += lc.sign * x(l);
    }

    s.factor.compute(k);
    const Eigen::VectorXd diag = Eigen::MatrixXd(s.factor.matrixL()).diagonal();
    if (s.factor.info() != Eigen::Success || !diag.allFinite() ||
        diag.minCoeff() * diag.minCoeff() <= 1e-12 * k.diagonal().maxCoeff()) {
        throw SolverError("truss: stiffness matrix is singular (mechanism)");
    }
    const Eigen::VectorXd uf = s.factor.solve(f);
    s.u = Eigen::MatrixX3d::Zero(geom.node_count(), 3);
    for (Index a = 0; a < nf; ++a) {
        const Index dof = s.free_dofs[static_cast<std::size_t>(a)];
        s.u(dof / 3, dof % 3) = uf(a);
    }
    return s;
}

}  // namespace

double TrussGeometry::element_length(Index e) const {
    const auto& el = elements[static_cast<std::size_t>(e)];
    return (nodes.row(el.node_j) - nodes.row(el.node_i)).norm();
}

void TrussGeometry::validate() const {
    const Index nn = node_count();
    if (nn < 2) throw ConfigError("truss geometry needs at least two nodes");
    if (elements.empty()) throw ConfigError("truss geometry needs at least one element");
    if (static_cast<Index>(fixed.size()) != nn) throw ConfigError("truss support table size");
    auto check_node = [nn](int n, const char* what) {
        if (n < 0 || n >= nn) throw ConfigError(std::string("truss ") + what + " references unknown node");
    };
    for (Index e = 0; e < element_count(); ++e) {
        const auto& el = elements[static_cast<std::size_t>(e)];
        check_node(el.node_i, "element");
        check_node(el.node_j, "element");
        if (!(element_length(e) > 0.0)) throw ConfigError("truss element has zero length");
    }
    for (const auto& l : loads) check_node(l.node, "load");
    for (const auto& m : monitors) check_node(m.node, "monitor");
    if (loads.empty()) throw ConfigError("truss geometry needs at least one load variable");
    if (monitors.empty()) throw ConfigError("truss geometry needs at least one monitored component");
}

TrussGeometry parse_truss_geometry(std::istream& in) {
    TrussGeometry g;
    LineReader reader(in);
    std::istringstream line;
    bool have_nodes = false;
    while (reader.next(line)) {
        std::string section;
        long count = -1;
        line >> section >> count;
        if (count < 0) reader.fail("expected '<section> <count>'");
        if (section == "units") continue;
        if (section == "nodes") {
            g.nodes.resize(count, 3);
            g.fixed.assign(static_cast<std::size_t>(count), {false, false, false});
            for (long i = 0; i < count; ++i) {
                if (!reader.next(line)) reader.fail("unexpected end of node table");
                long id;
                double x, y, z;
                if (!(line >> id >> x >> y >> z) || id != i + 1) reader.fail("bad node row");
                g.nodes.row(i) << x, y, z;
            }
            have_nodes = true;
        } else if (section == "elements") {
            for (long i = 0; i < count; ++i) {
                if (!reader.next(line)) reader.fail("unexpected end of element table");
                long id;
                int a, b;
                if (!(line >> id >> a >> b) || id != i + 1) reader.fail("bad element row");
                g.elements.push_back({a - 1, b - 1});
            }
        } else if (section == "supports") {
            if (!have_nodes) reader.fail("supports must follow nodes");
            for (long i = 0; i < count; ++i) {
                if (!reader.next(line)) reader.fail("unexpected end of support table");
                int node, fx, fy, fz;
                if (!(line >> node >> fx >> fy >> fz) || node < 1 || node > g.node_count()) {
                    reader.fail("bad support row");
                }
                g.fixed[static_cast<std::size_t>(node - 1)] = {fx != 0, fy != 0, fz != 0};
            }
        } else if (section == "loads") {
            for (long i = 0; i < count; ++i) {
                if (!reader.next(line)) reader.fail("unexpected end of load table");
                long id;
                int node;
                std::string dir;
                double sign;
                if (!(line >> id >> node >> dir >> sign) || id != i + 1) reader.fail("bad load row");
                g.loads.push_back({node - 1, parse_direction(dir, reader.line()), sign});
            }
        } else if (section == "monitor") {
            for (long i = 0; i < count; ++i) {
                if (!reader.next(line)) reader.fail("unexpected end of monitor table");
                int node;
                std::string dir;
                if (!(line >> node >> dir)) reader.fail("bad monitor row");
                g.monitors.push_back({node - 1, parse_direction(dir, reader.line())});
            }
        } else {
            reader.fail("unknown section '" + section + "'");
        }
    }
    g.validate();
    return g;
}

TrussGeometry load_truss_geometry(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open truss geometry file " + path.string());
    return parse_truss_geometry(in);
}

Eigen::MatrixXd assemble_stiffness(const TrussGeometry& geom, const Eigen::VectorXd& youngs,
                                   const Eigen::VectorXd& areas) {
    const Index ndof = 3 * geom.node_count();
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(ndof, ndof);
    for (Index e = 0; e < geom.element_count(); ++e) {
        const auto& el = geom.elements[static_cast<std::size_t>(e)];
        const Eigen::Vector3d d = geom.nodes.row(el.node_j) - geom.nodes.row(el.node_i);
        const double length = d.norm();
        const Eigen::Vector3d c = d / length;
        const Eigen::Matrix3d ke = youngs(e) * areas(e) / length * (c * c.transpose());
        const Index i = 3 * el.node_i;
        const Index j = 3 * el.node_j;
        k.block<3, 3>(i, i) += ke;
        k.block<3, 3>(j, j) += ke;
        k.block<3, 3>(i, j) -= ke;
        k.block<3, 3>(j, i) -= ke;
    }
    return k;
}

Eigen::MatrixX3d truss_displacements(const TrussGeometry& geom, const Eigen::VectorXd& x) {
    return solve(geom, x).u;
}

ModelEval truss_eval(const Eigen::VectorXd& x, const TrussGeometry& geom, bool with_gradient) {
    Solution s = solve(geom, x);
    std::size_t best = 0;
    double peak = -1.0;
    for (std::size_t m = 0; m < geom.monitors.size(); ++m) {
        const double v = std::abs(s.u(geom.monitors[m].node, geom.monitors[m].direction));
        if (v > peak) {
            peak = v;
            best = m;
        }
    }
    ModelEval out{peak, Eigen::VectorXd()};
    if (!with_gradient) return out;

    // Adjoint: y = sign * u_c, du_c/dtheta = -v^T (dK/dtheta) u with K v = e_c.
    const auto& mon = geom.monitors[best];
    const double sign = s.u(mon.node, mon.direction) >= 0.0 ? 1.0 : -1.0;
    const Index nf = static_cast<Index>(s.free_dofs.size());
    const Index c = s.dof_to_free[static_cast<std::size_t>(3 * mon.node + mon.direction)];
    out.grad = Eigen::VectorXd::Zero(x.size());
    if (c < 0) return out;  // monitored a supported dof
    Eigen::VectorXd e_c = Eigen::VectorXd::Zero(nf);
    e_c(c) = 1.0;
    const Eigen::VectorXd vf = s.factor.solve(e_c);
    Eigen::MatrixX3d v = Eigen::MatrixX3d::Zero(geom.node_count(), 3);
    for (Index a = 0; a < nf; ++a) {
        const Index dof = s.free_dofs[static_cast<std::size_t>(a)];
        v(dof / 3, dof % 3) = vf(a);
    }

    const Index nl = geom.load_count();
    const Index ne = geom.element_count();
    for (Index l = 0; l < nl; ++l) {
        const auto& lc = geom.loads[static_cast<std::size_t>(l)];
        out.grad(l) = sign * lc.sign * v(lc.node, lc.direction);
    }
    for (Index e = 0; e < ne; ++e) {
        const auto& el = geom.elements[static_cast<std::size_t>(e)];
        const Eigen::Vector3d d = geom.nodes.row(el.node_j) - geom.nodes.row(el.node_i);
        const double length = d.norm();
        const Eigen::Vector3d cdir = d / length;
        const double du = cdir.dot((s.u.row(el.node_j) - s.u.row(el.node_i)).transpose());
        const double dv = cdir.dot((v.row(el.node_j) - v.row(el.node_i)).transpose());
        const double youngs = x(nl + e);
        const double area = x(nl + ne + e);
        out.grad(nl + e) = -sign * area / length * dv * du;
        out.grad(nl + ne + e) = -sign * youngs / length * dv * du;
    }
    return out;
}

TrussModel::TrussModel(TrussGeometry geometry) : geometry_(std::move(geometry)) {
    geometry_.validate();
    set_gradient_spec({GradientMode::CentralDifference, 1e-5});
}

double TrussModel::value(const VectorXd& x) const { return truss_eval(x, geometry_, false).y; }

ModelEval TrussModel::evaluate_analytic(const VectorXd& x) const {
    return truss_eval(x, geometry_, true);
}

}  // namespace aashgp::models
