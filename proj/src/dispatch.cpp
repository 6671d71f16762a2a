#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "ionx/config.hpp"
#include "ionx/experiments.hpp"
#include "ionx/serialize.hpp"
#include "ionx/trace.hpp"

namespace ionx {
namespace {

std::string timestamp_utc() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[72];
    std::snprintf(buf, sizeof(buf), "%04d%02d%02dT%02d%02d%02dZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

double opt_number(const nlohmann::json& options, const char* key) {
    const auto& v = options.at(key);
    if (!v.is_number())
        throw_usage("CONFIG_SCHEMA", std::string("expected a number at /experiment/") + key,
                    std::string("/experiment/") + key);
    return v.get<double>();
}

int opt_int(const nlohmann::json& options, const char* key) {
    const auto& v = options.at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned())
        throw_usage("CONFIG_SCHEMA",
                    std::string("expected an integer at /experiment/") + key,
                    std::string("/experiment/") + key);
    return v.get<int>();
}

std::vector<double> opt_number_list(const nlohmann::json& options, const char* key) {
    const auto& v = options.at(key);
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number())
            throw_usage("CONFIG_SCHEMA",
                        std::string("expected numbers at /experiment/") + key,
                        std::string("/experiment/") + key);
        out.push_back(e.get<double>());
    }
    return out;
}

std::vector<int> opt_int_list(const nlohmann::json& options, const char* key) {
    const auto& v = options.at(key);
    std::vector<int> out;
    for (const auto& e : v) {
        if (!e.is_number_integer() && !e.is_number_unsigned())
            throw_usage("CONFIG_SCHEMA",
                        std::string("expected integers at /experiment/") + key,
                        std::string("/experiment/") + key);
        out.push_back(e.get<int>());
    }
    return out;
}

// Trace metadata must be enough to rerun the experiment bit for bit; the
// resolved config snapshot is exactly that. The wall-clock stamp lives only
// here and in the filename, never in the CSV body.
void finalize_metadata(Trace& trace, const RunConfig& cfg, const std::string& stamp) {
    trace.metadata()["config"] = cfg.snapshot;
    trace.metadata()["generated_at"] = stamp;
}

DispatchResult write_one(const Trace& trace, const RunConfig& cfg,
                         const std::string& stem) {
    DispatchResult out;
    const TraceFiles files = write_trace_files(trace, cfg.output_dir, stem);
    out.files = {files.csv, files.sidecar};
    out.summary = nlohmann::json{{"experiment", cfg.experiment},
                                 {"rows", trace.row_count()},
                                 {"csv", files.csv.string()},
                                 {"sidecar", files.sidecar.string()}};
    return out;
}

Eigen::MatrixXd targets_from_file(const std::filesystem::path& path,
                                  const DeviceParams& params) {
    std::ifstream in(path);
    if (!in)
        throw_usage("CONFIG_MISSING_FILE", "cannot open targets " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw_usage("CONFIG_PARSE",
                    "targets " + path.string() + " is not valid JSON: " + e.what());
    }
    const nlohmann::json* rows = &j;
    if (j.is_object()) {
        reject_unknown_keys(j, {"targets_G_S"}, "");
        if (!j.contains("targets_G_S"))
            throw_usage("CONFIG_SCHEMA", "targets file needs /targets_G_S",
                        "/targets_G_S");
        rows = &j.at("targets_G_S");
    }
    if (!rows->is_array() || rows->empty() || !rows->front().is_array())
        throw_usage("CONFIG_SCHEMA", "targets must be a 2D array of conductances",
                    "/targets_G_S");
    const auto m = rows->size();
    const auto n = rows->front().size();
    Eigen::MatrixXd g(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        const auto& row = rows->at(i);
        if (!row.is_array() || row.size() != n)
            throw_usage("CONFIG_SCHEMA", "targets rows must have equal length",
                        "/targets_G_S/" + std::to_string(i));
        for (std::size_t k = 0; k < n; ++k) {
            if (!row.at(k).is_number())
                throw_usage("CONFIG_SCHEMA", "targets must be numbers",
                            "/targets_G_S/" + std::to_string(i) + "/" +
                                std::to_string(k));
            g(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
                row.at(k).get<double>();
        }
    }
    static_cast<void>(params);
    return g;
}

Eigen::MatrixXd seeded_targets(const RunConfig& cfg) {
    std::uint64_t rng = cfg.seed;
    const double g_min = cfg.params.min_conductance();
    const double span = cfg.params.max_conductance() - g_min;
    Eigen::MatrixXd g(cfg.topology.rows, cfg.topology.cols);
    for (int i = 0; i < cfg.topology.rows; ++i)
        for (int j = 0; j < cfg.topology.cols; ++j)
            g(i, j) = g_min + span * (0.05 + 0.9 * uniform01(rng));
    return g;
}

}  // namespace

DispatchResult dispatch(const RunConfig& cfg) {
    const std::string stamp = timestamp_utc();
    const std::string suffix = stamp + "-s" + std::to_string(cfg.seed);
    const nlohmann::json& opt = cfg.options;

    if (cfg.experiment == "s1") {
        Trace tr = run_s1_protocol(cfg.params, opt_number(opt, "v_p_V"),
                                   opt_number(opt, "pulse_s"),
                                   opt_number(opt, "stop_rel_dR"),
                                   opt_int(opt, "max_cycles"));
        finalize_metadata(tr, cfg, stamp);
        return write_one(tr, cfg, "s1-" + suffix);
    }
    if (cfg.experiment == "s2") {
        Trace tr = run_s2_protocol(cfg.params, opt_number(opt, "v_p_V"));
        finalize_metadata(tr, cfg, stamp);
        return write_one(tr, cfg, "s2-" + suffix);
    }
    if (cfg.experiment == "retention") {
        Trace tr = run_retention(cfg.params, opt_number(opt, "v_p_V"),
                                 opt_number(opt, "program_s"),
                                 opt_number(opt, "window_s"), opt_int(opt, "samples"));
        finalize_metadata(tr, cfg, stamp);
        return write_one(tr, cfg, "retention-" + suffix);
    }
    if (cfg.experiment == "iv") {
        Trace tr = run_iv_sweep(cfg.params, opt_number(opt, "amplitude_V"),
                                opt_int(opt, "cycles"), opt_int(opt, "points_per_leg"),
                                opt_number_list(opt, "q_fractions"));
        finalize_metadata(tr, cfg, stamp);
        return write_one(tr, cfg, "iv-" + suffix);
    }
    if (cfg.experiment == "sneak") {
        DispatchResult out;
        out.summary = nlohmann::json{{"experiment", "sneak"},
                                     {"runs", nlohmann::json::array()}};
        for (const int m : opt_int_list(opt, "sizes")) {
            Trace tr = run_sneak_demo(m, cfg.seed, cfg.params, cfg.policy.pulse_voltage,
                                      cfg.policy.pulse_dt);
            finalize_metadata(tr, cfg, stamp);
            const DispatchResult one =
                write_one(tr, cfg, "sneak-m" + std::to_string(m) + "-" + suffix);
            out.files.insert(out.files.end(), one.files.begin(), one.files.end());
            nlohmann::json run = one.summary;
            run["size"] = m;
            run["conventional"] = tr.metadata()["conventional"];
            run["proposed"] = tr.metadata()["proposed"];
            out.summary["runs"].push_back(std::move(run));
        }
        return out;
    }
    if (cfg.experiment == "complexity") {
        Trace tr = run_complexity_sweep(opt_int_list(opt, "sizes"), cfg.seed,
                                        cfg.params, cfg.policy.pulse_voltage);
        finalize_metadata(tr, cfg, stamp);
        DispatchResult out = write_one(tr, cfg, "complexity-" + suffix);
        out.summary["phase_counts"] = tr.metadata()["phase_counts"];
        return out;
    }
    throw_usage("UNKNOWN_EXPERIMENT", "unknown experiment '" + cfg.experiment + "'",
                "/experiment/name");
}

DispatchResult run_write_command(
    const RunConfig& cfg, const std::optional<std::filesystem::path>& targets_file,
    const std::optional<std::filesystem::path>& save_state) {
    const std::string stamp = timestamp_utc();
    const std::string stem = "write-" + stamp + "-s" + std::to_string(cfg.seed);

    CrossbarArray array(cfg.topology, cfg.params, cfg.wire_resistance);
    const Eigen::MatrixXd targets = targets_file
                                        ? targets_from_file(*targets_file, cfg.params)
                                        : seeded_targets(cfg);
    if (targets.rows() != array.rows() || targets.cols() != array.cols())
        throw_usage("SHAPE_MISMATCH", "targets shape does not match the topology");

    const WritePlan plan = plan_writes(targets, cfg.policy, cfg.params);
    const WriteReport report = execute_plan(array, plan, cfg.policy);

    std::error_code ec;
    std::filesystem::create_directories(cfg.output_dir, ec);
    if (ec)
        throw_runtime("IO", "cannot create output directory " + cfg.output_dir.string());

    DispatchResult out;
    nlohmann::json report_j = report.to_json();
    report_j["config"] = cfg.snapshot;
    report_j["generated_at"] = stamp;
    const std::filesystem::path json_path = cfg.output_dir / (stem + ".json");
    write_file_atomic(json_path, report_j.dump(2) + "\n");
    out.files.push_back(json_path);

    std::ostringstream csv;
    write_disturbance_csv(report, csv);
    const std::filesystem::path csv_path = cfg.output_dir / (stem + ".csv");
    write_file_atomic(csv_path, csv.str());
    out.files.push_back(csv_path);

    if (save_state) {
        write_file_atomic(*save_state, array.to_json().dump(2) + "\n");
        out.files.push_back(*save_state);
    }

    out.summary = nlohmann::json{{"command", "write"},
                                 {"phases_planned", report.phases_planned},
                                 {"phases_executed", report.phases_executed},
                                 {"total_pulse_time_s", report.total_pulse_time},
                                 {"target_error_max_rel", report.target_error_max_rel},
                                 {"disturbance_l1_C", report.disturbance_l1_total},
                                 {"report", json_path.string()}};
    return out;
}

DispatchResult run_read_command(
    const RunConfig& cfg, const std::filesystem::path& state_file, ReadMode mode,
    const std::optional<std::vector<double>>& inputs,
    const std::optional<std::filesystem::path>& export_matrix) {
    const std::string stamp = timestamp_utc();

    std::ifstream in(state_file);
    if (!in)
        throw_usage("CONFIG_MISSING_FILE", "cannot open state " + state_file.string());
    nlohmann::json state_j;
    try {
        in >> state_j;
    } catch (const nlohmann::json::parse_error& e) {
        throw_usage("CONFIG_PARSE",
                    "state " + state_file.string() + " is not valid JSON: " + e.what());
    }
    CrossbarArray array = CrossbarArray::from_json(state_j);

    Eigen::VectorXd v(array.rows());
    if (inputs) {
        if (static_cast<int>(inputs->size()) != array.rows())
            throw_usage("SHAPE_MISMATCH", "need one input voltage per row");
        for (int i = 0; i < array.rows(); ++i) v[i] = (*inputs)[i];
    } else {
        v.setConstant(cfg.read_voltage);
    }
    const Eigen::VectorXd currents = read_mac(array, v, mode);

    Trace tr("read");
    tr.add_column("col");
    tr.add_column("I_A");
    for (int j = 0; j < array.cols(); ++j)
        tr.append_row({static_cast<double>(j), currents[j]});
    tr.metadata() = nlohmann::json{
        {"experiment", "read"},
        {"state_file", state_file.string()},
        {"mode", mode == ReadMode::Ideal ? "ideal" : "nodal"},
        {"inputs_V", std::vector<double>(v.data(), v.data() + v.size())},
    };
    tr.metadata()["config"] = cfg.snapshot;
    tr.metadata()["generated_at"] = stamp;

    DispatchResult out =
        write_one(tr, cfg, "read-" + stamp + "-s" + std::to_string(cfg.seed));
    out.summary["experiment"] = "read";
    if (export_matrix) {
        BiasConfig bias;
        for (int i = 0; i < array.rows(); ++i) bias.drive(LineId::row_rail(i), v[i]);
        for (int j = 0; j < array.cols(); ++j) bias.drive(LineId::col_rail(j), 0.0);
        const NodalSystem sys = build_nodal_system(array, bias);
        std::ostringstream mm;
        write_matrix_market(sys.full_stamp, mm);
        write_file_atomic(*export_matrix, mm.str());
        out.files.push_back(*export_matrix);
    }
    std::vector<double> currents_v(currents.data(), currents.data() + currents.size());
    out.summary["currents_A"] = currents_v;
    return out;
}

DispatchResult run_array_command(
    const RunConfig& cfg, const std::optional<std::filesystem::path>& save_state) {
    const std::string stamp = timestamp_utc();
    const std::string stem = "array-" + stamp + "-s" + std::to_string(cfg.seed);

    CrossbarArray array(cfg.topology, cfg.params, cfg.wire_resistance);
    const Eigen::MatrixXd targets = seeded_targets(cfg);
    const WritePlan plan = plan_writes(targets, cfg.policy, cfg.params);
    const WriteReport report = execute_plan(array, plan, cfg.policy);

    Eigen::VectorXd v(array.rows());
    v.setConstant(cfg.read_voltage);
    const Eigen::VectorXd ideal = read_mac(array, v, ReadMode::Ideal);
    const Eigen::VectorXd nodal = read_mac(array, v, ReadMode::FullNodal);

    Trace tr("array");
    tr.add_column("col");
    tr.add_column("I_ideal_A");
    tr.add_column("I_nodal_A");
    for (int j = 0; j < array.cols(); ++j)
        tr.append_row({static_cast<double>(j), ideal[j], nodal[j]});
    tr.metadata() = nlohmann::json{{"experiment", "array"},
                                   {"write_report", report.to_json()}};
    tr.metadata()["config"] = cfg.snapshot;
    tr.metadata()["generated_at"] = stamp;

    DispatchResult out = write_one(tr, cfg, stem);
    out.summary["experiment"] = "array";
    if (save_state) {
        write_file_atomic(*save_state, array.to_json().dump(2) + "\n");
        out.files.push_back(*save_state);
    }
    out.summary["phases_executed"] = report.phases_executed;
    out.summary["target_error_max_rel"] = report.target_error_max_rel;
    out.summary["disturbance_l1_C"] = report.disturbance_l1_total;
    return out;
}

}  // namespace ionx
