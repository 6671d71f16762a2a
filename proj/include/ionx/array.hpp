#pragma once

// Crossbar containers for the two array topologies under comparison. Cells are
// plain DeviceState values; all electrical behaviour lives in the nodal layer.

#include <compare>
#include <set>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ionx/device.hpp"

namespace ionx {

enum class TopologyKind {
    // Two-terminal cells; programming shares the row/column read rails, so a
    // write couples into every other cell through the array graph.
    ConventionalSharedRail,
    // Four-terminal cells; each cell owns a dedicated programming loop that
    // shares no node with the read rails or with any other loop.
    ProposedIsolatedLoop,
};

struct Topology {
    TopologyKind kind = TopologyKind::ConventionalSharedRail;
    int rows = 1;
    int cols = 1;

    void validate() const;
};

struct CellIndex {
    int row = 0;
    int col = 0;
    auto operator<=>(const CellIndex&) const = default;
};

class CrossbarArray {
public:
    CrossbarArray(Topology topology, DeviceParams params, double wire_resistance = 0.0);

    const Topology& topology() const { return topology_; }
    const DeviceParams& params() const { return params_; }
    int rows() const { return topology_.rows; }
    int cols() const { return topology_.cols; }

    /// Per-segment rail resistance used by FullNodal reads, ohm; 0 keeps the
    /// rails ideal.
    double wire_resistance() const { return wire_resistance_; }
    void set_wire_resistance(double r);

    DeviceState& cell(int row, int col);
    const DeviceState& cell(int row, int col) const;

    Eigen::MatrixXd conductance_matrix() const;  // S
    Eigen::MatrixXd charge_matrix() const;       // C
    void set_charge(int row, int col, double q);
    void set_charges(const Eigen::MatrixXd& q);

    /// Self-contained snapshot (topology, params, every cell's q and t).
    nlohmann::json to_json() const;
    static CrossbarArray from_json(const nlohmann::json& j);

private:
    void check_index(int row, int col) const;

    Topology topology_;
    DeviceParams params_;
    double wire_resistance_ = 0.0;
    std::vector<DeviceState> cells_;  // row-major
};

/// Charge deltas between two congruent arrays, with target cells zeroed so the
/// statistics cover only cells nobody intended to touch.
struct Disturbance {
    Eigen::MatrixXd dq;  // q_after - q_before, C; exactly 0 at target cells
    std::set<CellIndex> targets;

    double max_abs() const;
    double l1() const;
};

Disturbance write_disturbance(const CrossbarArray& before, const CrossbarArray& after,
                              const std::set<CellIndex>& targets);

}  // namespace ionx
