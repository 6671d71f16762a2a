#pragma once

// JSON (de)serialization shared by array snapshots and the config layer.
// Readers are strict: unknown keys raise CONFIG_SCHEMA with a JSON pointer to
// the offending key.

#include <string>
#include <vector>

#include <json.hpp>

#include "ionx/device.hpp"

namespace ionx {

struct Topology;
enum class TopologyKind;

nlohmann::json params_to_json(const DeviceParams& params);

/// Applies the keys present in `j` over `base`. With require_all, every
/// parameter key must be present (self-contained snapshots); otherwise the
/// object is a partial override. `pointer` prefixes error locations.
DeviceParams params_from_json(const nlohmann::json& j, const DeviceParams& base,
                              const std::string& pointer, bool require_all);

nlohmann::json topology_to_json(const Topology& topology);
Topology topology_from_json(const nlohmann::json& j, const Topology& base,
                            const std::string& pointer);

std::string topology_kind_name(TopologyKind kind);
TopologyKind topology_kind_from_name(const std::string& name, const std::string& pointer);

/// Rejects keys of `j` not found in `allowed`, pointing at the first offender.
void reject_unknown_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                         const std::string& pointer);
void reject_unknown_keys(const nlohmann::json& j,
                         std::initializer_list<const char*> allowed,
                         const std::string& pointer);

/// Fetches a finite number at key, or `fallback` when absent.
double json_number(const nlohmann::json& j, const char* key, double fallback,
                   const std::string& pointer);

}  // namespace ionx
