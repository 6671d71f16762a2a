#include "ionx/array.hpp"

#include <cmath>
#include <string>

#include "ionx/serialize.hpp"

namespace ionx {

void Topology::validate() const {
    if (rows < 1 || cols < 1)
        throw_usage("TOPOLOGY_SHAPE", "array needs at least one row and one column");
    if (rows > 4096 || cols > 4096)
        throw_usage("TOPOLOGY_SHAPE", "array dimension above the 4096 limit");
}

CrossbarArray::CrossbarArray(Topology topology, DeviceParams params,
                             double wire_resistance)
    : topology_(topology), params_(std::move(params)) {
    topology_.validate();
    params_.validate();
    set_wire_resistance(wire_resistance);
    cells_.resize(static_cast<std::size_t>(topology_.rows) * topology_.cols);
}

void CrossbarArray::set_wire_resistance(double r) {
    if (!(r >= 0.0) || !std::isfinite(r))
        throw_usage("PARAM_RANGE", "wire resistance must be finite and >= 0");
    wire_resistance_ = r;
}

void CrossbarArray::check_index(int row, int col) const {
    if (row < 0 || row >= topology_.rows || col < 0 || col >= topology_.cols)
        throw_usage("CELL_INDEX", "cell (" + std::to_string(row) + ", " +
                                      std::to_string(col) + ") outside a " +
                                      std::to_string(topology_.rows) + "x" +
                                      std::to_string(topology_.cols) + " array");
}

DeviceState& CrossbarArray::cell(int row, int col) {
    check_index(row, col);
    return cells_[static_cast<std::size_t>(row) * topology_.cols + col];
}

const DeviceState& CrossbarArray::cell(int row, int col) const {
    check_index(row, col);
    return cells_[static_cast<std::size_t>(row) * topology_.cols + col];
}

Eigen::MatrixXd CrossbarArray::conductance_matrix() const {
    Eigen::MatrixXd g(rows(), cols());
    for (int i = 0; i < rows(); ++i)
        for (int j = 0; j < cols(); ++j) g(i, j) = conductance(cell(i, j), params_);
    return g;
}

Eigen::MatrixXd CrossbarArray::charge_matrix() const {
    Eigen::MatrixXd q(rows(), cols());
    for (int i = 0; i < rows(); ++i)
        for (int j = 0; j < cols(); ++j) q(i, j) = cell(i, j).q;
    return q;
}

void CrossbarArray::set_charge(int row, int col, double q) {
    check_index(row, col);
    if (!(q >= 0.0 && q <= params_.material.q_max))
        throw_usage("CHARGE_RANGE", "charge outside [0, q_max]");
    cell(row, col).q = q;
}

void CrossbarArray::set_charges(const Eigen::MatrixXd& q) {
    if (q.rows() != rows() || q.cols() != cols())
        throw_usage("SHAPE_MISMATCH", "charge matrix shape does not match the array");
    for (int i = 0; i < rows(); ++i)
        for (int j = 0; j < cols(); ++j) set_charge(i, j, q(i, j));
}

nlohmann::json CrossbarArray::to_json() const {
    nlohmann::json cells = nlohmann::json::array();
    for (const DeviceState& s : cells_)
        cells.push_back(nlohmann::json{{"q_C", s.q}, {"t_s", s.t}});
    return nlohmann::json{
        {"schema_version", 1},
        {"topology", topology_to_json(topology_)},
        {"wire_resistance_ohm", wire_resistance_},
        {"params", params_to_json(params_)},
        {"cells", std::move(cells)},
    };
}

CrossbarArray CrossbarArray::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw_usage("CONFIG_SCHEMA", "expected a snapshot object", "");
    reject_unknown_keys(
        j, {"schema_version", "topology", "wire_resistance_ohm", "params", "cells"}, "");
    for (const char* key : {"schema_version", "topology", "params", "cells"})
        if (!j.contains(key))
            throw_usage("CONFIG_SCHEMA", std::string("snapshot missing /") + key,
                        std::string("/") + key);
    if (j.at("schema_version") != 1)
        throw_usage("CONFIG_SCHEMA", "unsupported snapshot schema_version",
                    "/schema_version");

    const Topology topo = topology_from_json(j.at("topology"), Topology{}, "/topology");
    // Snapshots are self-contained: every parameter must be present.
    const DeviceParams params =
        params_from_json(j.at("params"), DeviceParams{}, "/params", true);
    const double wire_r = json_number(j, "wire_resistance_ohm", 0.0, "");

    CrossbarArray array(topo, params, wire_r);
    const auto& cells = j.at("cells");
    if (!cells.is_array() ||
        cells.size() != static_cast<std::size_t>(topo.rows) * topo.cols)
        throw_usage("CONFIG_SCHEMA", "snapshot /cells must list rows*cols entries",
                    "/cells");
    for (int i = 0; i < topo.rows; ++i)
        for (int jj = 0; jj < topo.cols; ++jj) {
            const auto& c = cells.at(static_cast<std::size_t>(i) * topo.cols + jj);
            const std::string at =
                "/cells/" + std::to_string(static_cast<std::size_t>(i) * topo.cols + jj);
            reject_unknown_keys(c, {"q_C", "t_s"}, at);
            array.set_charge(i, jj, json_number(c, "q_C", 0.0, at));
            array.cell(i, jj).t = json_number(c, "t_s", 0.0, at);
        }
    return array;
}

double Disturbance::max_abs() const {
    return dq.size() == 0 ? 0.0 : dq.cwiseAbs().maxCoeff();
}

double Disturbance::l1() const { return dq.cwiseAbs().sum(); }

Disturbance write_disturbance(const CrossbarArray& before, const CrossbarArray& after,
                              const std::set<CellIndex>& targets) {
    if (before.rows() != after.rows() || before.cols() != after.cols())
        throw_usage("SHAPE_MISMATCH", "disturbance needs congruent arrays");
    Disturbance d;
    d.targets = targets;
    d.dq = after.charge_matrix() - before.charge_matrix();
    for (const CellIndex& c : targets) {
        if (c.row < 0 || c.row >= before.rows() || c.col < 0 || c.col >= before.cols())
            throw_usage("CELL_INDEX", "target cell outside the array");
        d.dq(c.row, c.col) = 0.0;
    }
    return d;
}

}  // namespace ionx
