#include "ionx/nodal.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include <Eigen/SparseCholesky>

namespace ionx {

std::string LineId::to_string() const {
    switch (kind) {
        case Kind::Row: return "row:" + std::to_string(row);
        case Kind::Col: return "col:" + std::to_string(col);
        case Kind::LoopPlus:
            return "cl+:" + std::to_string(row) + "," + std::to_string(col);
        case Kind::LoopMinus:
            return "cl-:" + std::to_string(row) + "," + std::to_string(col);
    }
    return "?";
}

std::string NodeRef::to_string() const {
    switch (kind) {
        case Kind::RowRail: return "row:" + std::to_string(row);
        case Kind::ColRail: return "col:" + std::to_string(col);
        case Kind::RowSeg:
            return "rseg:" + std::to_string(row) + "," + std::to_string(col);
        case Kind::ColSeg:
            return "cseg:" + std::to_string(row) + "," + std::to_string(col);
        case Kind::LoopPlus:
            return "cl+:" + std::to_string(row) + "," + std::to_string(col);
        case Kind::LoopMinus:
            return "cl-:" + std::to_string(row) + "," + std::to_string(col);
    }
    return "?";
}

BiasConfig& BiasConfig::drive(LineId line, double volts) {
    if (!std::isfinite(volts))
        throw_usage("BIAS_VALUE", "bias voltage must be finite on " + line.to_string());
    if (lines_.contains(line))
        throw_usage("DUPLICATE_LINE", "line " + line.to_string() + " specified twice");
    lines_.emplace(line, volts);
    return *this;
}

BiasConfig& BiasConfig::let_float(LineId line) {
    if (lines_.contains(line))
        throw_usage("DUPLICATE_LINE", "line " + line.to_string() + " specified twice");
    lines_.emplace(line, std::nullopt);
    return *this;
}

bool BiasConfig::is_driven(LineId line) const {
    const auto it = lines_.find(line);
    return it != lines_.end() && it->second.has_value();
}

std::optional<double> BiasConfig::voltage(LineId line) const {
    const auto it = lines_.find(line);
    return it == lines_.end() ? std::nullopt : it->second;
}

int BiasConfig::driven_count() const {
    int n = 0;
    for (const auto& [line, v] : lines_)
        if (v.has_value()) ++n;
    return n;
}

namespace {

constexpr double kResidualLimit = 1e-9;

struct CandidateBranch {
    Branch::Kind kind;
    int a;
    int b;
    double g;
    int row;
    int col;
};

}  // namespace

bool NodalSystem::write_loops_isolated() const {
    for (int outer = 0; outer < full_stamp.outerSize(); ++outer) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(full_stamp, outer); it;
             ++it) {
            if (it.row() == it.col()) continue;
            const NodeRef& a = nodes[static_cast<std::size_t>(it.row())];
            const NodeRef& b = nodes[static_cast<std::size_t>(it.col())];
            const bool a_loop =
                a.kind == NodeRef::Kind::LoopPlus || a.kind == NodeRef::Kind::LoopMinus;
            const bool b_loop =
                b.kind == NodeRef::Kind::LoopPlus || b.kind == NodeRef::Kind::LoopMinus;
            if (a_loop != b_loop) return false;  // loop coupled to the read network
            if (a_loop && (a.row != b.row || a.col != b.col))
                return false;  // two different cells' loops coupled
        }
    }
    return true;
}

NodalSystem build_nodal_system(const CrossbarArray& array, const BiasConfig& bias) {
    const int m = array.rows();
    const int n = array.cols();
    const bool proposed =
        array.topology().kind == TopologyKind::ProposedIsolatedLoop;
    const bool wires = array.wire_resistance() > 0.0;
    const DeviceParams& params = array.params();

    // Validate the bias against the topology before touching the graph.
    for (const auto& [line, v] : bias.lines()) {
        const bool loop_line =
            line.kind == LineId::Kind::LoopPlus || line.kind == LineId::Kind::LoopMinus;
        if (loop_line && !proposed)
            throw_usage("UNKNOWN_LINE", "line " + line.to_string() +
                                            " does not exist on the shared-rail topology");
        const bool row_ok = line.row >= 0 && line.row < m;
        const bool col_ok = line.col >= 0 && line.col < n;
        const bool in_range = (line.kind == LineId::Kind::Row && row_ok) ||
                              (line.kind == LineId::Kind::Col && col_ok) ||
                              (loop_line && row_ok && col_ok);
        if (!in_range)
            throw_usage("UNKNOWN_LINE",
                        "line " + line.to_string() + " outside a " + std::to_string(m) +
                            "x" + std::to_string(n) + " array");
    }
    if (bias.driven_count() == 0)
        throw_usage("NO_REFERENCE_POTENTIAL",
                    "no line is driven; the potentials are unconstrained");

    // Candidate node enumeration (deterministic order).
    std::vector<NodeRef> candidates;
    const auto add_node = [&](NodeRef::Kind kind, int i, int j) {
        candidates.push_back(NodeRef{kind, i, j});
        return static_cast<int>(candidates.size()) - 1;
    };
    std::vector<int> row_rail(m), col_rail(n);
    for (int i = 0; i < m; ++i) row_rail[i] = add_node(NodeRef::Kind::RowRail, i, 0);
    for (int j = 0; j < n; ++j) col_rail[j] = add_node(NodeRef::Kind::ColRail, 0, j);
    std::vector<int> row_seg, col_seg, loop_p, loop_m;
    const auto at = [n](int i, int j) { return static_cast<std::size_t>(i) * n + j; };
    if (wires) {
        row_seg.resize(at(m - 1, n - 1) + 1);
        col_seg.resize(row_seg.size());
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                row_seg[at(i, j)] = add_node(NodeRef::Kind::RowSeg, i, j);
                col_seg[at(i, j)] = add_node(NodeRef::Kind::ColSeg, i, j);
            }
    }
    if (proposed) {
        loop_p.resize(at(m - 1, n - 1) + 1);
        loop_m.resize(loop_p.size());
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                loop_p[at(i, j)] = add_node(NodeRef::Kind::LoopPlus, i, j);
                loop_m[at(i, j)] = add_node(NodeRef::Kind::LoopMinus, i, j);
            }
    }
    const auto row_tap = [&](int i, int j) { return wires ? row_seg[at(i, j)] : row_rail[i]; };
    const auto col_tap = [&](int i, int j) { return wires ? col_seg[at(i, j)] : col_rail[j]; };

    // Candidate branches.
    std::vector<CandidateBranch> cbranches;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            cbranches.push_back({Branch::Kind::ReadCell, row_tap(i, j), col_tap(i, j),
                                 conductance(array.cell(i, j), params), i, j});
    if (wires) {
        const double g_w = 1.0 / array.wire_resistance();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j) {
                const int from = (j == 0) ? row_rail[i] : row_seg[at(i, j - 1)];
                cbranches.push_back({Branch::Kind::RowWire, from, row_seg[at(i, j)], g_w, i, j});
            }
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < m; ++i) {
                const int from = (i == 0) ? col_rail[j] : col_seg[at(i - 1, j)];
                cbranches.push_back({Branch::Kind::ColWire, from, col_seg[at(i, j)], g_w, i, j});
            }
    }
    if (proposed) {
        // The programming path is the linear electrolytic conductance of the
        // write loop; programming_current(params, 1 V) is exactly that in S.
        const double g_loop = programming_current(params, 1.0);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < n; ++j)
                cbranches.push_back(
                    {Branch::Kind::WriteLoop, loop_p[at(i, j)], loop_m[at(i, j)], g_loop, i, j});
    }

    // Driven voltages per candidate node.
    std::vector<double> driven(candidates.size(),
                               std::numeric_limits<double>::quiet_NaN());
    for (const auto& [line, v] : bias.lines()) {
        if (!v.has_value()) continue;  // explicit floating: same as absent
        int node = -1;
        switch (line.kind) {
            case LineId::Kind::Row: node = row_rail[line.row]; break;
            case LineId::Kind::Col: node = col_rail[line.col]; break;
            case LineId::Kind::LoopPlus: node = loop_p[at(line.row, line.col)]; break;
            case LineId::Kind::LoopMinus: node = loop_m[at(line.row, line.col)]; break;
        }
        driven[node] = *v;
    }

    // Reachability from driven nodes over positive conductances. Anything not
    // reached carries exactly zero current and stays out of the system.
    std::vector<std::vector<std::pair<int, double>>> adjacency(candidates.size());
    for (const CandidateBranch& b : cbranches) {
        adjacency[b.a].emplace_back(b.b, b.g);
        adjacency[b.b].emplace_back(b.a, b.g);
    }
    std::vector<char> active(candidates.size(), 0);
    std::deque<int> frontier;
    for (std::size_t k = 0; k < candidates.size(); ++k)
        if (!std::isnan(driven[k])) {
            active[k] = 1;
            frontier.push_back(static_cast<int>(k));
        }
    while (!frontier.empty()) {
        const int k = frontier.front();
        frontier.pop_front();
        for (const auto& [other, g] : adjacency[k])
            if (g > 0.0 && !active[other]) {
                active[other] = 1;
                frontier.push_back(other);
            }
    }

    NodalSystem sys;
    sys.topology_kind = array.topology().kind;
    sys.rows = m;
    sys.cols = n;

    std::vector<int> final_index(candidates.size(), -1);
    for (std::size_t k = 0; k < candidates.size(); ++k)
        if (active[k]) {
            final_index[k] = static_cast<int>(sys.nodes.size());
            sys.nodes.push_back(candidates[k]);
        }
    sys.free_index.assign(sys.nodes.size(), -1);
    sys.driven_voltage.assign(sys.nodes.size(),
                              std::numeric_limits<double>::quiet_NaN());
    for (std::size_t k = 0; k < candidates.size(); ++k) {
        if (final_index[k] < 0) continue;
        if (std::isnan(driven[k]))
            sys.free_index[final_index[k]] = sys.free_count++;
        else
            sys.driven_voltage[final_index[k]] = driven[k];
    }

    std::vector<Eigen::Triplet<double>> full_trip, red_trip;
    sys.rhs = Eigen::VectorXd::Zero(sys.free_count);
    for (const CandidateBranch& cb : cbranches) {
        const int a = final_index[cb.a];
        const int b = final_index[cb.b];
        if (a < 0 || b < 0) {
            if (cb.kind == Branch::Kind::ReadCell)
                sys.inactive_cells.push_back(CellIndex{cb.row, cb.col});
            continue;
        }
        sys.branches.push_back(Branch{cb.kind, a, b, cb.g, cb.row, cb.col});
        if (cb.g == 0.0) continue;
        full_trip.emplace_back(a, a, cb.g);
        full_trip.emplace_back(b, b, cb.g);
        full_trip.emplace_back(a, b, -cb.g);
        full_trip.emplace_back(b, a, -cb.g);
        const int fa = sys.free_index[a];
        const int fb = sys.free_index[b];
        if (fa >= 0 && fb >= 0) {
            red_trip.emplace_back(fa, fa, cb.g);
            red_trip.emplace_back(fb, fb, cb.g);
            red_trip.emplace_back(fa, fb, -cb.g);
            red_trip.emplace_back(fb, fa, -cb.g);
        } else if (fa >= 0) {
            red_trip.emplace_back(fa, fa, cb.g);
            sys.rhs(fa) += cb.g * sys.driven_voltage[b];
        } else if (fb >= 0) {
            red_trip.emplace_back(fb, fb, cb.g);
            sys.rhs(fb) += cb.g * sys.driven_voltage[a];
        }
    }
    sys.full_stamp.resize(static_cast<int>(sys.nodes.size()),
                          static_cast<int>(sys.nodes.size()));
    sys.full_stamp.setFromTriplets(full_trip.begin(), full_trip.end());
    sys.conductance.resize(sys.free_count, sys.free_count);
    sys.conductance.setFromTriplets(red_trip.begin(), red_trip.end());
    return sys;
}

SolveResult solve(const NodalSystem& sys) {
    SolveResult res;
    Eigen::VectorXd x;
    if (sys.free_count > 0) {
        for (int f = 0; f < sys.free_count; ++f)
            if (sys.conductance.coeff(f, f) == 0.0)
                throw_runtime("SINGULAR_SYSTEM",
                              "free node with no conductance survived pruning");
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(sys.conductance);
        if (ldlt.info() != Eigen::Success)
            throw_runtime("SINGULAR_SYSTEM", "sparse factorization failed");
        x = ldlt.solve(sys.rhs);
        if (ldlt.info() != Eigen::Success)
            throw_runtime("SINGULAR_SYSTEM", "sparse back-substitution failed");

        const Eigen::VectorXd defect = sys.conductance * x - sys.rhs;
        double a_max = 0.0;
        for (int outer = 0; outer < sys.conductance.outerSize(); ++outer)
            for (Eigen::SparseMatrix<double>::InnerIterator it(sys.conductance, outer);
                 it; ++it)
                a_max = std::max(a_max, std::fabs(it.value()));
        const double scale = std::max({sys.rhs.size() ? sys.rhs.cwiseAbs().maxCoeff() : 0.0,
                                       a_max * (x.size() ? x.cwiseAbs().maxCoeff() : 0.0),
                                       1e-300});
        res.residual = (defect.size() ? defect.cwiseAbs().maxCoeff() : 0.0) / scale;
        if (!(res.residual <= kResidualLimit))
            throw_runtime("RESIDUAL", "linear solve residual " +
                                          format_double(res.residual) +
                                          " above the 1e-9 limit");
    }

    res.node_voltages.resize(static_cast<Eigen::Index>(sys.nodes.size()));
    for (std::size_t k = 0; k < sys.nodes.size(); ++k) {
        const int f = sys.free_index[k];
        res.node_voltages[static_cast<Eigen::Index>(k)] =
            f >= 0 ? x[f] : sys.driven_voltage[k];
    }

    res.cell_voltages = Eigen::MatrixXd::Zero(sys.rows, sys.cols);
    res.cell_currents = Eigen::MatrixXd::Zero(sys.rows, sys.cols);
    res.loop_voltages = Eigen::MatrixXd::Zero(sys.rows, sys.cols);
    res.loop_currents = Eigen::MatrixXd::Zero(sys.rows, sys.cols);
    for (const Branch& b : sys.branches) {
        const double dv = res.node_voltages[b.node_a] - res.node_voltages[b.node_b];
        if (b.kind == Branch::Kind::ReadCell) {
            res.cell_voltages(b.row, b.col) = dv;
            res.cell_currents(b.row, b.col) = b.g * dv;
        } else if (b.kind == Branch::Kind::WriteLoop) {
            res.loop_voltages(b.row, b.col) = dv;
            res.loop_currents(b.row, b.col) = b.g * dv;
        }
    }
    return res;
}

double line_current(const NodalSystem& sys, const SolveResult& res, LineId line) {
    NodeRef want;
    switch (line.kind) {
        case LineId::Kind::Row: want = {NodeRef::Kind::RowRail, line.row, 0}; break;
        case LineId::Kind::Col: want = {NodeRef::Kind::ColRail, 0, line.col}; break;
        case LineId::Kind::LoopPlus:
            want = {NodeRef::Kind::LoopPlus, line.row, line.col};
            break;
        case LineId::Kind::LoopMinus:
            want = {NodeRef::Kind::LoopMinus, line.row, line.col};
            break;
    }
    int node = -1;
    for (std::size_t k = 0; k < sys.nodes.size(); ++k)
        if (sys.nodes[k].kind == want.kind && sys.nodes[k].row == want.row &&
            sys.nodes[k].col == want.col) {
            node = static_cast<int>(k);
            break;
        }
    if (node < 0) return 0.0;  // pruned: the line touches nothing conducting

    double into = 0.0;
    for (const Branch& b : sys.branches) {
        if (b.node_a == node)
            into += b.g * (res.node_voltages[b.node_b] - res.node_voltages[b.node_a]);
        else if (b.node_b == node)
            into += b.g * (res.node_voltages[b.node_a] - res.node_voltages[b.node_b]);
    }
    return into;
}

double max_kcl_violation(const NodalSystem& sys, const SolveResult& res) {
    std::vector<double> net(sys.nodes.size(), 0.0);
    for (const Branch& b : sys.branches) {
        const double i = b.g * (res.node_voltages[b.node_a] - res.node_voltages[b.node_b]);
        net[b.node_a] -= i;
        net[b.node_b] += i;
    }
    double worst = 0.0;
    for (std::size_t k = 0; k < sys.nodes.size(); ++k)
        if (sys.free_index[k] >= 0) worst = std::max(worst, std::fabs(net[k]));
    return worst;
}

Eigen::VectorXd read_mac(const CrossbarArray& array, const Eigen::VectorXd& v_rows,
                         ReadMode mode) {
    if (v_rows.size() != array.rows())
        throw_usage("SHAPE_MISMATCH", "read vector length " +
                                          std::to_string(v_rows.size()) +
                                          " does not match " +
                                          std::to_string(array.rows()) + " rows");
    for (Eigen::Index i = 0; i < v_rows.size(); ++i)
        if (!std::isfinite(v_rows[i]))
            throw_usage("BIAS_VALUE", "read voltages must be finite");

    if (mode == ReadMode::Ideal) {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(array.cols());
        for (int j = 0; j < array.cols(); ++j) {
            double acc = 0.0;
            for (int i = 0; i < array.rows(); ++i)
                acc += conductance(array.cell(i, j), array.params()) * v_rows[i];
            out[j] = acc;
        }
        return out;
    }

    BiasConfig bias;
    for (int i = 0; i < array.rows(); ++i) bias.drive(LineId::row_rail(i), v_rows[i]);
    for (int j = 0; j < array.cols(); ++j) bias.drive(LineId::col_rail(j), 0.0);
    const NodalSystem sys = build_nodal_system(array, bias);
    const SolveResult res = solve(sys);
    Eigen::VectorXd out(array.cols());
    for (int j = 0; j < array.cols(); ++j)
        out[j] = line_current(sys, res, LineId::col_rail(j));
    return out;
}

void write_matrix_market(const Eigen::SparseMatrix<double>& m, std::ostream& out) {
    std::size_t nnz_lower = 0;
    for (int outer = 0; outer < m.outerSize(); ++outer)
        for (Eigen::SparseMatrix<double>::InnerIterator it(m, outer); it; ++it)
            if (it.row() >= it.col()) ++nnz_lower;
    out << "%%MatrixMarket matrix coordinate real symmetric\n";
    out << m.rows() << " " << m.cols() << " " << nnz_lower << "\n";
    for (int outer = 0; outer < m.outerSize(); ++outer)
        for (Eigen::SparseMatrix<double>::InnerIterator it(m, outer); it; ++it)
            if (it.row() >= it.col())
                out << (it.row() + 1) << " " << (it.col() + 1) << " "
                    << format_double(it.value()) << "\n";
}

}  // namespace ionx
