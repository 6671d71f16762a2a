#include "ionx/config.hpp"

#include <cstdlib>
#include <fstream>

#include "ionx/serialize.hpp"

namespace ionx {
namespace {

void validate_root(const nlohmann::json& j) {
    if (!j.is_object())
        throw_usage("CONFIG_SCHEMA", "the config root must be an object", "");
    reject_unknown_keys(j,
                        {"schema_version", "preset", "params", "topology", "policy",
                         "read_voltage_V", "wire_resistance_ohm", "seed", "output_dir",
                         "experiment"},
                        "");
    if (j.contains("schema_version") && j.at("schema_version") != 1)
        throw_usage("CONFIG_SCHEMA", "unsupported schema_version (this tool reads 1)",
                    "/schema_version");
}

std::string take_string(const nlohmann::json& j, const char* key,
                        const std::string& fallback, const std::string& pointer) {
    if (!j.contains(key)) return fallback;
    const std::string at = pointer + "/" + key;
    if (!j.at(key).is_string())
        throw_usage("CONFIG_SCHEMA", "expected a string at " + at, at);
    return j.at(key).get<std::string>();
}

WritePolicyKind policy_kind_from_name(const std::string& name,
                                      const std::string& pointer) {
    if (name == "sequential-cellwise") return WritePolicyKind::SequentialCellwise;
    if (name == "row-parallel") return WritePolicyKind::RowParallel;
    if (name == "full-parallel") return WritePolicyKind::FullParallel;
    if (name == "half-select-v2") return WritePolicyKind::HalfSelectV2;
    throw_usage("CONFIG_SCHEMA",
                "unknown policy '" + name +
                    "' (want sequential-cellwise|row-parallel|full-parallel|half-select-v2)",
                pointer);
}

std::string policy_kind_name(WritePolicyKind kind) {
    switch (kind) {
        case WritePolicyKind::SequentialCellwise: return "sequential-cellwise";
        case WritePolicyKind::RowParallel: return "row-parallel";
        case WritePolicyKind::FullParallel: return "full-parallel";
        case WritePolicyKind::HalfSelectV2: return "half-select-v2";
    }
    return "?";
}

WritePolicy policy_from_json(const nlohmann::json& j, const WritePolicy& base,
                             const std::string& pointer) {
    if (!j.is_object())
        throw_usage("CONFIG_SCHEMA", "expected an object at " + pointer, pointer);
    reject_unknown_keys(j, {"kind", "pulse_voltage_V", "pulse_dt_s"}, pointer);
    WritePolicy p = base;
    if (j.contains("kind"))
        p.kind = policy_kind_from_name(
            take_string(j, "kind", "", pointer), pointer + "/kind");
    p.pulse_voltage = json_number(j, "pulse_voltage_V", p.pulse_voltage, pointer);
    p.pulse_dt = json_number(j, "pulse_dt_s", p.pulse_dt, pointer);
    try {
        p.validate();
    } catch (const Error& e) {
        throw_usage("CONFIG_SCHEMA", std::string(e.what()) + " (at " + pointer + ")",
                    pointer);
    }
    return p;
}

std::uint64_t take_seed(const nlohmann::json& j, std::uint64_t fallback) {
    if (!j.contains("seed")) return fallback;
    const auto& v = j.at("seed");
    if (!v.is_number_integer() && !v.is_number_unsigned())
        throw_usage("CONFIG_SCHEMA", "expected a non-negative integer at /seed",
                    "/seed");
    if (v.is_number_integer() && v.get<long long>() < 0)
        throw_usage("CONFIG_SCHEMA", "expected a non-negative integer at /seed",
                    "/seed");
    return v.get<std::uint64_t>();
}

struct ExperimentSchema {
    const char* name;
    nlohmann::json defaults;
};

const std::vector<ExperimentSchema>& experiment_schemas() {
    static const std::vector<ExperimentSchema> schemas = {
        {"s1",
         {{"v_p_V", 3.6}, {"pulse_s", 30.0}, {"stop_rel_dR", 1e-3}, {"max_cycles", 100000}}},
        {"s2", {{"v_p_V", 3.6}}},
        {"retention",
         {{"v_p_V", 3.6}, {"program_s", 300.0}, {"window_s", 172800.0}, {"samples", 240}}},
        {"iv",
         {{"amplitude_V", 0.2},
          {"cycles", 2},
          {"points_per_leg", 25},
          {"q_fractions", nlohmann::json::array({0.2, 0.5, 0.8})}}},
        {"sneak", {{"sizes", nlohmann::json::array({2, 4, 8})}}},
        {"complexity", {{"sizes", nlohmann::json::array({2, 4, 8, 16})}}},
    };
    return schemas;
}

const ExperimentSchema& schema_for(const std::string& name, const std::string& pointer) {
    for (const ExperimentSchema& s : experiment_schemas())
        if (name == s.name) return s;
    std::string known;
    for (const ExperimentSchema& s : experiment_schemas()) {
        if (!known.empty()) known += "|";
        known += s.name;
    }
    throw_usage("UNKNOWN_EXPERIMENT",
                "unknown experiment '" + name + "' (want " + known + ")", pointer);
}

// Field-wise overlay of the known option keys for one experiment.
void apply_experiment_options(nlohmann::json& options, const nlohmann::json& j,
                              const std::string& pointer) {
    std::vector<std::string> allowed = {"name"};
    for (const auto& [key, value] : options.items()) allowed.push_back(key);
    reject_unknown_keys(j, allowed, pointer);
    for (const auto& [key, value] : j.items()) {
        if (key == "name") continue;
        const std::string at = pointer + "/" + key;
        const nlohmann::json& current = options.at(key);
        if (current.is_number() && !value.is_number())
            throw_usage("CONFIG_SCHEMA", "expected a number at " + at, at);
        if (current.is_array() && !value.is_array())
            throw_usage("CONFIG_SCHEMA", "expected an array at " + at, at);
        options[key] = value;
    }
}

}  // namespace

DeviceParams params_for_preset(const std::string& name) {
    if (name == "paper-calibrated") return paper_calibrated();
    throw_usage("PRESET_UNKNOWN",
                "unknown preset '" + name + "' (known: paper-calibrated)", "/preset");
}

RunConfig parse_config(const std::optional<std::filesystem::path>& file,
                       const nlohmann::json& overrides) {
    nlohmann::json file_j = nlohmann::json::object();
    if (file) {
        std::ifstream in(*file);
        if (!in)
            throw_usage("CONFIG_MISSING_FILE", "cannot open config " + file->string());
        try {
            in >> file_j;
        } catch (const nlohmann::json::parse_error& e) {
            throw_usage("CONFIG_PARSE",
                        "config " + file->string() + " is not valid JSON: " + e.what());
        }
    }
    validate_root(file_j);
    validate_root(overrides);

    RunConfig cfg;
    cfg.preset = take_string(overrides, "preset",
                             take_string(file_j, "preset", "paper-calibrated", ""), "");
    cfg.params = params_for_preset(cfg.preset);
    if (file_j.contains("params"))
        cfg.params = params_from_json(file_j.at("params"), cfg.params, "/params", false);
    if (overrides.contains("params"))
        cfg.params =
            params_from_json(overrides.at("params"), cfg.params, "/params", false);

    if (file_j.contains("topology"))
        cfg.topology = topology_from_json(file_j.at("topology"), cfg.topology, "/topology");
    if (overrides.contains("topology"))
        cfg.topology =
            topology_from_json(overrides.at("topology"), cfg.topology, "/topology");

    if (file_j.contains("policy"))
        cfg.policy = policy_from_json(file_j.at("policy"), cfg.policy, "/policy");
    if (overrides.contains("policy"))
        cfg.policy = policy_from_json(overrides.at("policy"), cfg.policy, "/policy");

    cfg.read_voltage = json_number(
        overrides, "read_voltage_V", json_number(file_j, "read_voltage_V", 0.2, ""), "");
    if (!(cfg.read_voltage > 0.0))
        throw_usage("CONFIG_SCHEMA", "read_voltage_V must be > 0", "/read_voltage_V");
    cfg.wire_resistance =
        json_number(overrides, "wire_resistance_ohm",
                    json_number(file_j, "wire_resistance_ohm", 0.0, ""), "");
    if (!(cfg.wire_resistance >= 0.0))
        throw_usage("CONFIG_SCHEMA", "wire_resistance_ohm must be >= 0",
                    "/wire_resistance_ohm");
    cfg.seed = take_seed(overrides, take_seed(file_j, 0));

    const char* env_dir = std::getenv("IONX_OUT_DIR");
    std::string out_dir = env_dir ? env_dir : "out";
    out_dir = take_string(overrides, "output_dir",
                          take_string(file_j, "output_dir", out_dir, ""), "");
    cfg.output_dir = out_dir;

    // Experiment block: defaults for the chosen name, then file, then override.
    std::string name = "s1";
    if (file_j.contains("experiment"))
        name = take_string(file_j.at("experiment"), "name", name, "/experiment");
    if (overrides.contains("experiment"))
        name = take_string(overrides.at("experiment"), "name", name, "/experiment");
    cfg.experiment = name;
    cfg.options = schema_for(name, "/experiment/name").defaults;
    if (file_j.contains("experiment"))
        apply_experiment_options(cfg.options, file_j.at("experiment"), "/experiment");
    if (overrides.contains("experiment"))
        apply_experiment_options(cfg.options, overrides.at("experiment"), "/experiment");

    nlohmann::json experiment_j = cfg.options;
    experiment_j["name"] = cfg.experiment;
    cfg.snapshot = nlohmann::json{
        {"schema_version", 1},
        {"preset", cfg.preset},
        {"params", params_to_json(cfg.params)},
        {"topology", topology_to_json(cfg.topology)},
        {"policy",
         {{"kind", policy_kind_name(cfg.policy.kind)},
          {"pulse_voltage_V", cfg.policy.pulse_voltage},
          {"pulse_dt_s", cfg.policy.pulse_dt}}},
        {"read_voltage_V", cfg.read_voltage},
        {"wire_resistance_ohm", cfg.wire_resistance},
        {"seed", cfg.seed},
        {"output_dir", out_dir},
        {"experiment", std::move(experiment_j)},
    };
    return cfg;
}

}  // namespace ionx
