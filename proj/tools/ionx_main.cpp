// Command-line front end. Flags build a JSON override document that merges
// over the config file through parse_config, so every run is reproducible
// from the snapshot echoed into the outputs. Exit codes: 0 success, 1 runtime
// failure, 2 usage or config error.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ionx/config.hpp"
#include "ionx/experiments.hpp"
#include "ionx/serialize.hpp"

namespace {

struct CliState {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    std::string preset;
    bool have_seed = false;

    std::string protocol;
    std::vector<std::string> opts;

    std::string targets_path;
    std::string save_state_path;
    std::string policy_name;
    int rows = 0;
    int cols = 0;
    std::string topology_name;
    double pulse_voltage = 0.0;
    double pulse_dt = 0.0;
    bool have_pulse_voltage = false;
    bool have_pulse_dt = false;

    std::string state_path;
    std::string mode_name = "nodal";
    std::vector<double> inputs;
    std::string export_matrix_path;
    double read_voltage = 0.0;
    bool have_read_voltage = false;

    std::vector<int> sizes;

    std::string trace_path;
    std::string sidecar_path;
    double max_q_fraction = 0.1;
};

nlohmann::json parse_opt_value(const std::string& text, const std::string& key) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error&) {
        ionx::throw_usage("CLI_USAGE",
                          "--opt " + key + " needs a JSON value (number or array), got '" +
                              text + "'");
    }
}

// Flags shared by every run that resolves a full config.
nlohmann::json build_overrides(const CliState& s) {
    nlohmann::json o = nlohmann::json::object();
    if (!s.out_dir.empty()) o["output_dir"] = s.out_dir;
    if (s.have_seed) o["seed"] = s.seed;
    if (!s.preset.empty()) o["preset"] = s.preset;
    if (!s.policy_name.empty()) o["policy"]["kind"] = s.policy_name;
    if (s.have_pulse_voltage) o["policy"]["pulse_voltage_V"] = s.pulse_voltage;
    if (s.have_pulse_dt) o["policy"]["pulse_dt_s"] = s.pulse_dt;
    if (!s.topology_name.empty()) o["topology"]["kind"] = s.topology_name;
    if (s.rows > 0) o["topology"]["rows"] = s.rows;
    if (s.cols > 0) o["topology"]["cols"] = s.cols;
    if (s.have_read_voltage) o["read_voltage_V"] = s.read_voltage;
    return o;
}

ionx::RunConfig resolve_config(const CliState& s, nlohmann::json overrides) {
    std::optional<std::filesystem::path> file;
    if (!s.config_path.empty()) file = s.config_path;
    return ionx::parse_config(file, overrides);
}

void apply_experiment_flags(nlohmann::json& overrides, const std::string& name,
                            const CliState& s) {
    overrides["experiment"]["name"] = name;
    for (const std::string& kv : s.opts) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos || eq == 0)
            ionx::throw_usage("CLI_USAGE", "--opt wants key=value, got '" + kv + "'");
        const std::string key = kv.substr(0, eq);
        overrides["experiment"][key] = parse_opt_value(kv.substr(eq + 1), key);
    }
    if (!s.sizes.empty()) {
        nlohmann::json arr = nlohmann::json::array();
        for (int v : s.sizes) arr.push_back(v);
        overrides["experiment"]["sizes"] = std::move(arr);
    }
}

std::optional<std::filesystem::path> opt_path(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return std::filesystem::path(s);
}

int run_fit(const CliState& s) {
    const ionx::Trace trace = ionx::read_trace_csv(s.trace_path);
    ionx::DeviceParams params;
    if (!s.sidecar_path.empty()) {
        std::ifstream in(s.sidecar_path);
        if (!in)
            ionx::throw_usage("CONFIG_MISSING_FILE",
                              "cannot open sidecar " + s.sidecar_path);
        nlohmann::json side;
        try {
            in >> side;
        } catch (const nlohmann::json::parse_error& e) {
            ionx::throw_usage("CONFIG_PARSE", "sidecar " + s.sidecar_path +
                                                  " is not valid JSON: " + e.what());
        }
        if (!side.contains("metadata") || !side["metadata"].contains("config") ||
            !side["metadata"]["config"].contains("params"))
            ionx::throw_usage("CONFIG_SCHEMA",
                              "sidecar carries no /metadata/config/params",
                              "/metadata/config/params");
        params = ionx::params_from_json(side["metadata"]["config"]["params"],
                                        ionx::DeviceParams{},
                                        "/metadata/config/params", true);
    } else {
        params = ionx::params_for_preset(s.preset.empty() ? "paper-calibrated"
                                                          : s.preset);
    }
    const ionx::FitResult fit = ionx::fit_k_model(trace, params, s.max_q_fraction);
    const nlohmann::json out = {
        {"k_ohm_C", fit.k},
        {"intercept_ohm", fit.intercept},
        {"r_squared", fit.r_squared},
        {"samples", fit.residuals.size()},
        {"degenerate", fit.degenerate},
        {"max_q_fraction", s.max_q_fraction},
    };
    std::cout << out.dump(2) << "\n";
    return 0;
}

void print_result(const ionx::DispatchResult& result) {
    nlohmann::json out = result.summary;
    nlohmann::json files = nlohmann::json::array();
    for (const auto& f : result.files) files.push_back(f.string());
    out["files"] = std::move(files);
    std::cout << out.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CliState s;
    CLI::App app{"Ion-intercalation memristor and crossbar array simulator"};
    app.require_subcommand(1);

    std::string footer = "Experiments (simulate device --protocol / sweep):\n";
    for (const auto& e : ionx::experiment_registry())
        footer += "  " + std::string(e.name) + "  " + e.summary + "\n";
    app.footer(footer);

    app.add_option("--config", s.config_path, "JSON config file");
    app.add_option("--out", s.out_dir, "output directory (default env IONX_OUT_DIR or ./out)");
    auto* seed_opt = app.add_option("--seed", s.seed, "RNG seed for generated targets");
    app.add_option("--preset", s.preset, "parameter preset name");

    auto add_array_flags = [&s](CLI::App* cmd) {
        cmd->add_option("--topology", s.topology_name, "conventional|proposed");
        cmd->add_option("--rows", s.rows, "array rows");
        cmd->add_option("--cols", s.cols, "array columns");
        cmd->add_option("--policy", s.policy_name,
                        "sequential-cellwise|row-parallel|full-parallel|half-select-v2");
        auto* pv = cmd->add_option("--pulse-voltage", s.pulse_voltage,
                                   "programming pulse magnitude, V");
        auto* pd = cmd->add_option("--pulse-dt", s.pulse_dt,
                                   "per-phase pulse duration cap, s");
        pv->each([&s](const std::string&) { s.have_pulse_voltage = true; });
        pd->each([&s](const std::string&) { s.have_pulse_dt = true; });
    };

    auto* simulate = app.add_subcommand("simulate", "run a device protocol or an array demo");
    simulate->require_subcommand(1);
    simulate->fallthrough();
    auto* sim_device = simulate->add_subcommand("device", "single-device protocol");
    sim_device->fallthrough();
    sim_device->add_option("--protocol", s.protocol, "s1|s2|retention|iv")
        ->required()
        ->check(CLI::IsMember({"s1", "s2", "retention", "iv"}));
    sim_device->add_option("--opt", s.opts,
                           "experiment option override, key=JSON-value (repeatable)");
    auto* sim_array = simulate->add_subcommand(
        "array", "seeded random write plus ideal and nodal reads");
    sim_array->fallthrough();
    add_array_flags(sim_array);
    sim_array->add_option("--save-state", s.save_state_path,
                          "write the final array snapshot to this path");

    auto* write_cmd = app.add_subcommand("write", "program an array to target conductances");
    write_cmd->fallthrough();
    add_array_flags(write_cmd);
    write_cmd->add_option("--targets", s.targets_path,
                          "JSON target conductance matrix (default: seeded random)");
    write_cmd->add_option("--save-state", s.save_state_path,
                          "write the final array snapshot to this path");

    auto* read_cmd = app.add_subcommand("read", "multiply-accumulate read of a stored array");
    read_cmd->fallthrough();
    read_cmd->add_option("--state", s.state_path, "array snapshot JSON")->required();
    read_cmd->add_option("--mode", s.mode_name, "ideal|nodal (default nodal)")
        ->check(CLI::IsMember({"ideal", "nodal"}));
    read_cmd->add_option("--inputs", s.inputs, "per-row input voltages, comma separated")
        ->delimiter(',');
    read_cmd
        ->add_option("--read-voltage", s.read_voltage,
                     "uniform row voltage when --inputs is absent, V")
        ->each([&s](const std::string&) { s.have_read_voltage = true; });
    read_cmd->add_option("--export-matrix", s.export_matrix_path,
                         "dump the stamped conductance matrix (MatrixMarket)");

    auto* sweep = app.add_subcommand("sweep", "size sweeps over array topologies");
    sweep->fallthrough();
    sweep->require_subcommand(1);
    auto* sweep_complexity = sweep->add_subcommand(
        "complexity", "write phase counts and pulse time per policy and size");
    sweep_complexity->fallthrough();
    sweep_complexity->add_option("--sizes", s.sizes, "square array sizes, comma separated")
        ->delimiter(',');
    auto* sweep_sneak = sweep->add_subcommand(
        "sneak", "write disturbance, shared-rail vs isolated-loop");
    sweep_sneak->fallthrough();
    sweep_sneak->add_option("--sizes", s.sizes, "square array sizes, comma separated")
        ->delimiter(',');
    add_array_flags(sweep_sneak);

    auto* fit_cmd = app.add_subcommand("fit", "fit the 1/q memristance model to a trace");
    fit_cmd->fallthrough();
    fit_cmd->add_option("--trace", s.trace_path, "trace CSV with q_C and R_ohm columns")
        ->required();
    fit_cmd->add_option("--sidecar", s.sidecar_path,
                        "trace sidecar JSON; its stored params replace the preset");
    fit_cmd->add_option("--max-q-fraction", s.max_q_fraction,
                        "use samples with q below this fraction of capacity");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        const nlohmann::json err = {
            {"error", {{"code", "CLI_USAGE"}, {"message", e.what()}, {"pointer", ""}}}};
        std::cerr << err.dump() << "\n";
        return 2;
    }
    s.have_seed = seed_opt->count() > 0;

    try {
        if (fit_cmd->parsed()) return run_fit(s);

        nlohmann::json overrides = build_overrides(s);
        if (sim_device->parsed()) {
            apply_experiment_flags(overrides, s.protocol, s);
            print_result(ionx::dispatch(resolve_config(s, overrides)));
        } else if (sim_array->parsed()) {
            print_result(ionx::run_array_command(resolve_config(s, overrides),
                                                 opt_path(s.save_state_path)));
        } else if (write_cmd->parsed()) {
            print_result(ionx::run_write_command(resolve_config(s, overrides),
                                                 opt_path(s.targets_path),
                                                 opt_path(s.save_state_path)));
        } else if (read_cmd->parsed()) {
            const ionx::ReadMode mode = s.mode_name == "ideal"
                                            ? ionx::ReadMode::Ideal
                                            : ionx::ReadMode::FullNodal;
            std::optional<std::vector<double>> inputs;
            if (!s.inputs.empty()) inputs = s.inputs;
            print_result(ionx::run_read_command(resolve_config(s, overrides),
                                                s.state_path, mode, inputs,
                                                opt_path(s.export_matrix_path)));
        } else if (sweep_complexity->parsed()) {
            apply_experiment_flags(overrides, "complexity", s);
            print_result(ionx::dispatch(resolve_config(s, overrides)));
        } else if (sweep_sneak->parsed()) {
            apply_experiment_flags(overrides, "sneak", s);
            print_result(ionx::dispatch(resolve_config(s, overrides)));
        }
        return 0;
    } catch (const ionx::Error& e) {
        const nlohmann::json err = {{"error",
                                     {{"code", e.code()},
                                      {"message", e.what()},
                                      {"pointer", e.pointer()}}}};
        std::cerr << err.dump() << "\n";
        return e.kind() == ionx::ErrorKind::Usage ? 2 : 1;
    } catch (const std::exception& e) {
        const nlohmann::json err = {
            {"error", {{"code", "INTERNAL"}, {"message", e.what()}, {"pointer", ""}}}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
}
