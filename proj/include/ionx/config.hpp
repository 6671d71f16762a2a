#pragma once

// Strict JSON run configuration plus experiment dispatch. Precedence is
// command-line overrides > config file > defaults, resolved field by field.
// Unknown keys and malformed values raise CONFIG_SCHEMA carrying a JSON
// pointer; a missing file raises the distinct CONFIG_MISSING_FILE.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ionx/nodal.hpp"
#include "ionx/write.hpp"

namespace ionx {

struct RunConfig {
    std::string experiment = "s1";
    std::string preset = "paper-calibrated";
    DeviceParams params;
    Topology topology{TopologyKind::ConventionalSharedRail, 4, 4};
    WritePolicy policy;
    double read_voltage = 0.2;     // V
    double wire_resistance = 0.0;  // ohm per rail segment
    std::uint64_t seed = 0;
    std::filesystem::path output_dir;
    nlohmann::json options;   // resolved experiment options
    nlohmann::json snapshot;  // full resolved config; reruns it bit for bit
};

/// Known preset names -> parameters. Throws PRESET_UNKNOWN otherwise.
DeviceParams params_for_preset(const std::string& name);

RunConfig parse_config(const std::optional<std::filesystem::path>& file,
                       const nlohmann::json& overrides);

struct DispatchResult {
    std::vector<std::filesystem::path> files;
    nlohmann::json summary;
};

/// Runs config.experiment and writes trace CSV + JSON sidecar files into
/// config.output_dir. Returns every path written plus a summary.
DispatchResult dispatch(const RunConfig& config);

/// Plans and executes a write into a fresh array; targets come from a JSON
/// file when given, otherwise from the seeded generator. Writes the report
/// JSON and per-phase disturbance CSV, plus an optional state snapshot.
DispatchResult run_write_command(
    const RunConfig& config, const std::optional<std::filesystem::path>& targets_file,
    const std::optional<std::filesystem::path>& save_state);

/// Reads a stored array snapshot through read_mac. `inputs` overrides the
/// uniform read voltage; export_matrix dumps the stamped conductance matrix
/// in MatrixMarket form.
DispatchResult run_read_command(
    const RunConfig& config, const std::filesystem::path& state_file, ReadMode mode,
    const std::optional<std::vector<double>>& inputs,
    const std::optional<std::filesystem::path>& export_matrix);

/// Seeded random write followed by an ideal and a full-nodal read.
DispatchResult run_array_command(
    const RunConfig& config, const std::optional<std::filesystem::path>& save_state);

}  // namespace ionx
