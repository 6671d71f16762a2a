#include "ionx/serialize.hpp"

#include "ionx/array.hpp"

namespace ionx {
namespace {

void require_finite_number(const nlohmann::json& v, const std::string& pointer) {
    if (!v.is_number())
        throw_usage("CONFIG_SCHEMA", "expected a number at " + pointer, pointer);
    const double d = v.get<double>();
    if (!std::isfinite(d))
        throw_usage("CONFIG_SCHEMA", "expected a finite number at " + pointer, pointer);
}

double take(const nlohmann::json& j, const char* key, double fallback,
            const std::string& pointer, bool require, int* taken) {
    if (!j.contains(key)) {
        if (require)
            throw_usage("CONFIG_SCHEMA", "missing required key " + pointer + "/" + key,
                        pointer + "/" + key);
        return fallback;
    }
    require_finite_number(j.at(key), pointer + "/" + key);
    ++*taken;
    return j.at(key).get<double>();
}

}  // namespace

nlohmann::json params_to_json(const DeviceParams& p) {
    return nlohmann::json{
        {"d_m", p.geometry.d},
        {"l_x_m", p.geometry.l_x},
        {"l_y_m", p.geometry.l_y},
        {"l_z_m", p.geometry.l_z},
        {"c0_per_m3", p.material.c0},
        {"mu_ion_m2_per_V_s", p.material.mu_ion},
        {"mu_e_m2_per_V_s", p.material.mu_e},
        {"g0_S", p.material.g0},
        {"q_max_C", p.material.q_max},
        {"tau_retention_s", p.material.tau_retention},
        {"write_threshold_V", p.write_threshold},
    };
}

DeviceParams params_from_json(const nlohmann::json& j, const DeviceParams& base,
                              const std::string& pointer, bool require_all) {
    if (!j.is_object())
        throw_usage("CONFIG_SCHEMA", "expected an object at " + pointer, pointer);
    // Unit-suffixed keys catch unit mistakes at the config boundary; values are
    // strict SI inside.
    reject_unknown_keys(j,
                        {"d_m", "l_x_m", "l_y_m", "l_z_m", "c0_per_m3",
                         "mu_ion_m2_per_V_s", "mu_e_m2_per_V_s", "g0_S", "q_max_C",
                         "tau_retention_s", "write_threshold_V"},
                        pointer);

    DeviceParams p = base;
    int taken = 0;
    p.geometry.d = take(j, "d_m", p.geometry.d, pointer, require_all, &taken);
    p.geometry.l_x = take(j, "l_x_m", p.geometry.l_x, pointer, require_all, &taken);
    p.geometry.l_y = take(j, "l_y_m", p.geometry.l_y, pointer, require_all, &taken);
    p.geometry.l_z = take(j, "l_z_m", p.geometry.l_z, pointer, require_all, &taken);
    p.material.c0 = take(j, "c0_per_m3", p.material.c0, pointer, require_all, &taken);
    p.material.mu_ion =
        take(j, "mu_ion_m2_per_V_s", p.material.mu_ion, pointer, require_all, &taken);
    p.material.mu_e =
        take(j, "mu_e_m2_per_V_s", p.material.mu_e, pointer, require_all, &taken);
    p.material.g0 = take(j, "g0_S", p.material.g0, pointer, require_all, &taken);
    p.material.q_max = take(j, "q_max_C", p.material.q_max, pointer, require_all, &taken);
    p.material.tau_retention =
        take(j, "tau_retention_s", p.material.tau_retention, pointer, require_all, &taken);
    p.write_threshold =
        take(j, "write_threshold_V", p.write_threshold, pointer, require_all, &taken);

    try {
        p.validate();
    } catch (const Error& e) {
        // Surface validation failures as config errors located at the block.
        throw_usage("CONFIG_SCHEMA", std::string(e.what()) + " (at " + pointer + ")",
                    pointer);
    }
    return p;
}

std::string topology_kind_name(TopologyKind kind) {
    return kind == TopologyKind::ConventionalSharedRail ? "conventional" : "proposed";
}

TopologyKind topology_kind_from_name(const std::string& name,
                                     const std::string& pointer) {
    if (name == "conventional") return TopologyKind::ConventionalSharedRail;
    if (name == "proposed") return TopologyKind::ProposedIsolatedLoop;
    throw_usage("CONFIG_SCHEMA",
                "unknown topology kind '" + name + "' (want conventional|proposed)",
                pointer);
}

nlohmann::json topology_to_json(const Topology& t) {
    return nlohmann::json{
        {"kind", topology_kind_name(t.kind)}, {"rows", t.rows}, {"cols", t.cols}};
}

Topology topology_from_json(const nlohmann::json& j, const Topology& base,
                            const std::string& pointer) {
    if (!j.is_object())
        throw_usage("CONFIG_SCHEMA", "expected an object at " + pointer, pointer);
    reject_unknown_keys(j, {"kind", "rows", "cols"}, pointer);
    Topology t = base;
    if (j.contains("kind")) {
        if (!j.at("kind").is_string())
            throw_usage("CONFIG_SCHEMA", "expected a string at " + pointer + "/kind",
                        pointer + "/kind");
        t.kind = topology_kind_from_name(j.at("kind").get<std::string>(),
                                         pointer + "/kind");
    }
    for (const char* key : {"rows", "cols"}) {
        if (!j.contains(key)) continue;
        const std::string at = pointer + "/" + key;
        if (!j.at(key).is_number_integer())
            throw_usage("CONFIG_SCHEMA", "expected an integer at " + at, at);
        const auto v = j.at(key).get<long long>();
        if (v < 1 || v > 4096)
            throw_usage("CONFIG_SCHEMA", "array dimension out of range at " + at, at);
        (key[0] == 'r' ? t.rows : t.cols) = static_cast<int>(v);
    }
    return t;
}

void reject_unknown_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                         const std::string& pointer) {
    for (const auto& [key, value] : j.items()) {
        bool known = false;
        for (const std::string& a : allowed)
            if (key == a) {
                known = true;
                break;
            }
        if (!known)
            throw_usage("CONFIG_SCHEMA", "unknown key " + pointer + "/" + key,
                        pointer + "/" + key);
    }
}

void reject_unknown_keys(const nlohmann::json& j,
                         std::initializer_list<const char*> allowed,
                         const std::string& pointer) {
    reject_unknown_keys(j, std::vector<std::string>(allowed.begin(), allowed.end()),
                        pointer);
}

double json_number(const nlohmann::json& j, const char* key, double fallback,
                   const std::string& pointer) {
    if (!j.contains(key)) return fallback;
    require_finite_number(j.at(key), pointer + "/" + key);
    return j.at(key).get<double>();
}

}  // namespace ionx
