#pragma once

// Nodal analysis of a crossbar under a bias configuration: conductance
// stamping, Dirichlet folding of driven lines, sparse SPD solve, and branch
// current recovery. Floating lines are free unknowns; components with no path
// of positive conductance to any driven line carry exactly zero current and
// are pruned from the system (they are reported, not guessed at).

#include <compare>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "ionx/array.hpp"

namespace ionx {

struct LineId {
    enum class Kind { Row, Col, LoopPlus, LoopMinus };
    Kind kind = Kind::Row;
    int row = 0;  // Row, LoopPlus, LoopMinus
    int col = 0;  // Col, LoopPlus, LoopMinus

    static LineId row_rail(int i) { return {Kind::Row, i, 0}; }
    static LineId col_rail(int j) { return {Kind::Col, 0, j}; }
    static LineId loop_plus(int i, int j) { return {Kind::LoopPlus, i, j}; }
    static LineId loop_minus(int i, int j) { return {Kind::LoopMinus, i, j}; }

    auto operator<=>(const LineId&) const = default;

    std::string to_string() const;  // "row:0", "col:1", "cl+:0,1", "cl-:0,1"
};

/// Voltage constraints on array lines. Lines never mentioned are floating;
/// let_float records that explicitly. Each line may appear at most once.
class BiasConfig {
public:
    BiasConfig& drive(LineId line, double volts);
    BiasConfig& let_float(LineId line);

    bool is_driven(LineId line) const;
    std::optional<double> voltage(LineId line) const;
    int driven_count() const;
    const std::map<LineId, std::optional<double>>& lines() const { return lines_; }

private:
    std::map<LineId, std::optional<double>> lines_;
};

struct NodeRef {
    enum class Kind { RowRail, ColRail, RowSeg, ColSeg, LoopPlus, LoopMinus };
    Kind kind = Kind::RowRail;
    int row = 0;
    int col = 0;

    std::string to_string() const;
};

struct Branch {
    enum class Kind { ReadCell, WriteLoop, RowWire, ColWire };
    Kind kind = Kind::ReadCell;
    int node_a = 0;  // index into NodalSystem::nodes
    int node_b = 0;
    double g = 0.0;  // S
    int row = 0;     // owning cell or wire position
    int col = 0;
};

struct NodalSystem {
    std::vector<NodeRef> nodes;          // active nodes only
    std::vector<int> free_index;         // node -> row in `conductance`, -1 if driven
    std::vector<double> driven_voltage;  // node -> bias, NaN for free nodes
    std::vector<Branch> branches;        // active branches only

    Eigen::SparseMatrix<double> conductance;  // free x free, symmetric positive definite
    Eigen::VectorXd rhs;                      // folded Dirichlet injections, A
    Eigen::SparseMatrix<double> full_stamp;   // all active nodes, pre-elimination

    std::vector<CellIndex> inactive_cells;  // pruned: structurally zero current

    TopologyKind topology_kind = TopologyKind::ConventionalSharedRail;
    int rows = 0;
    int cols = 0;
    int free_count = 0;

    /// True when no stamped branch couples one cell's programming loop to any
    /// rail or to another cell's loop: the structural no-sneak-path property.
    bool write_loops_isolated() const;
};

/// Stamps the array under `bias`. Throws NO_REFERENCE_POTENTIAL when nothing
/// is driven and UNKNOWN_LINE for lines outside the topology.
NodalSystem build_nodal_system(const CrossbarArray& array, const BiasConfig& bias);

struct SolveResult {
    Eigen::VectorXd node_voltages;  // per active node; driven nodes hold their bias, V
    Eigen::MatrixXd cell_voltages;  // read-branch voltage per cell (0 if inactive), V
    Eigen::MatrixXd cell_currents;  // read-branch current per cell, A
    Eigen::MatrixXd loop_voltages;  // programming-loop voltage per cell, V
    Eigen::MatrixXd loop_currents;  // programming-loop current per cell, A
    double residual = 0.0;          // relative residual of the linear solve
};

/// Sparse LDLT solve; enforces residual <= 1e-9.
SolveResult solve(const NodalSystem& system);

/// Net current flowing from the network into the terminal of `line`, A.
double line_current(const NodalSystem& system, const SolveResult& result, LineId line);

/// Largest absolute KCL violation over free nodes, A.
double max_kcl_violation(const NodalSystem& system, const SolveResult& result);

enum class ReadMode {
    Ideal,      // I_j = sum_i G_ij V_i, no rail effects
    FullNodal,  // columns at virtual ground through the stamped network
};

/// Column currents for row voltages `v_rows` with every column held at 0 V.
Eigen::VectorXd read_mac(const CrossbarArray& array, const Eigen::VectorXd& v_rows,
                         ReadMode mode);

/// Coordinate-format symmetric MatrixMarket export (lower triangle, 1-based).
void write_matrix_market(const Eigen::SparseMatrix<double>& m, std::ostream& out);

}  // namespace ionx
