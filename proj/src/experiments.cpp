#include "ionx/experiments.hpp"

#include <cmath>
#include <string>

#include "ionx/serialize.hpp"

namespace ionx {

double uniform01(std::uint64_t& state) {
    // splitmix64 step; (z >> 11) * 2^-53 gives a uniform double in [0, 1).
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return static_cast<double>(z >> 11) * 0x1.0p-53;
}

namespace {

void require(bool ok, const char* what) {
    if (!ok) throw_usage("PARAM_RANGE", what);
}

nlohmann::json base_metadata(const char* experiment, const DeviceParams& params) {
    return nlohmann::json{{"experiment", experiment},
                          {"params", params_to_json(params)}};
}

}  // namespace

Trace run_s1_protocol(const DeviceParams& params, double v_p, double pulse_s,
                      double stop_rel_dr, int max_cycles) {
    params.validate();
    require(v_p > 0.0, "s1 requires v_p > 0");
    require(pulse_s > 0.0, "s1 requires pulse_s > 0");
    require(stop_rel_dr > 0.0, "s1 requires stop_rel_dr > 0");
    require(max_cycles >= 1, "s1 requires max_cycles >= 1");

    Trace tr("s1");
    tr.add_column("cycle");
    tr.add_column("cumulative_t_s");
    tr.add_column("q_C");
    tr.add_column("R_ohm");
    tr.set_time_column("cumulative_t_s");

    DeviceState s;
    double r_prev = resistance(s, params);
    tr.append_row({0.0, 0.0, s.q, r_prev});
    bool converged = false;
    for (int cycle = 1; cycle <= max_cycles; ++cycle) {
        s = program_step(s, params, v_p, pulse_s);
        const double r = resistance(s, params);
        tr.append_row({static_cast<double>(cycle), s.t, s.q, r});
        if (std::fabs(r - r_prev) / r_prev < stop_rel_dr) {
            converged = true;
            break;
        }
        r_prev = r;
    }

    tr.metadata() = base_metadata("s1", params);
    tr.metadata()["options"] = {{"v_p_V", v_p},
                                {"pulse_s", pulse_s},
                                {"stop_rel_dR", stop_rel_dr},
                                {"max_cycles", max_cycles}};
    tr.metadata()["converged"] = converged;
    return tr;
}

Trace run_s2_protocol(const DeviceParams& params, double v_p) {
    params.validate();
    require(v_p > 0.0, "s2 requires v_p > 0");

    // The zero-bias hold must keep the state put, so the protocol runs with
    // retention disabled regardless of the preset.
    DeviceParams p = params;
    p.material.tau_retention = 0.0;

    Trace tr("s2");
    tr.add_column("t_s");
    tr.add_column("segment");
    tr.add_column("v_p_V");
    tr.add_column("q_C");
    tr.add_column("R_ohm");
    tr.set_time_column("t_s");

    struct Segment {
        int id;
        double v;
        int seconds;
    };
    const Segment segments[] = {
        {0, v_p, 60},    // program toward the low-resistance state
        {1, 0.0, 300},   // zero-bias hold: non-volatility check
        {2, v_p, 240},   // continue programming into saturation
        {3, -v_p, 60},   // reverse polarity: conductance must fall
    };

    DeviceState s;
    tr.append_row({0.0, 0.0, 0.0, s.q, resistance(s, params)});
    for (const Segment& seg : segments) {
        for (int k = 0; k < seg.seconds; ++k) {
            s = seg.v == 0.0 ? relax_step(s, p, 1.0) : program_step(s, p, seg.v, 1.0);
            tr.append_row({s.t, static_cast<double>(seg.id), seg.v, s.q,
                           resistance(s, params)});
        }
    }

    tr.metadata() = base_metadata("s2", params);
    tr.metadata()["options"] = {{"v_p_V", v_p}};
    tr.metadata()["note"] = "tau_retention forced to 0 for the hold segment";
    return tr;
}

Trace run_retention(const DeviceParams& params, double v_p, double program_s,
                    double window_s, int samples) {
    params.validate();
    require(v_p > 0.0, "retention requires v_p > 0");
    require(program_s > 0.0, "retention requires program_s > 0");
    require(window_s > 1.0, "retention requires window_s > 1");
    require(samples >= 2, "retention requires samples >= 2");

    Trace tr("retention");
    tr.add_column("t_s");
    tr.add_column("q_C");
    tr.add_column("R_ohm");
    tr.set_time_column("t_s");

    DeviceState s = program_step(DeviceState{}, params, v_p, program_s);
    tr.append_row({0.0, s.q, resistance(s, params)});

    // Logarithmic grid from 1 s to the window end.
    const double log_end = std::log(window_s);
    double prev = 0.0;
    for (int k = 0; k < samples; ++k) {
        const double t =
            std::exp(log_end * static_cast<double>(k) / (samples - 1));
        s = relax_step(s, params, t - prev);
        tr.append_row({t, s.q, resistance(s, params)});
        prev = t;
    }

    tr.metadata() = base_metadata("retention", params);
    tr.metadata()["options"] = {{"v_p_V", v_p},
                                {"program_s", program_s},
                                {"window_s", window_s},
                                {"samples", samples}};
    return tr;
}

Trace run_iv_sweep(const DeviceParams& params, double amplitude, int cycles,
                   int points_per_leg, const std::vector<double>& q_fractions) {
    params.validate();
    require(amplitude > 0.0, "iv requires amplitude > 0");
    require(cycles >= 1, "iv requires cycles >= 1");
    require(points_per_leg >= 2, "iv requires points_per_leg >= 2");
    require(!q_fractions.empty(), "iv requires at least one charge level");
    for (const double f : q_fractions)
        require(f >= 0.0 && f <= 1.0, "iv charge fractions must lie in [0, 1]");

    Trace tr("iv");
    tr.add_column("level");
    tr.add_column("q_C");
    tr.add_column("cycle");
    tr.add_column("leg");
    tr.add_column("V_V");
    tr.add_column("I_A");

    const int p = points_per_leg;
    for (std::size_t level = 0; level < q_fractions.size(); ++level) {
        // The sweep reads a frozen state; no trajectory ever touches q.
        const double q = q_fractions[level] * params.material.q_max;
        const double g = params.conductance_at(q);
        const auto sample = [&](int cycle, int leg, int k) {
            const double v = amplitude * static_cast<double>(k) / p;
            tr.append_row({static_cast<double>(level), q, static_cast<double>(cycle),
                           static_cast<double>(leg), v, g * v});
        };
        for (int cycle = 0; cycle < cycles; ++cycle) {
            for (int k = 0; k <= p; ++k) sample(cycle, 0, k);          // 0 -> +A
            for (int k = p - 1; k >= -p; --k) sample(cycle, 1, k);     // +A -> -A
            for (int k = -p + 1; k <= 0; ++k) sample(cycle, 2, k);     // -A -> 0
        }
    }

    tr.metadata() = base_metadata("iv", params);
    tr.metadata()["options"] = {{"amplitude_V", amplitude},
                                {"cycles", cycles},
                                {"points_per_leg", points_per_leg},
                                {"q_fractions", q_fractions}};
    return tr;
}

namespace {

Eigen::MatrixXd random_targets(int m, std::uint64_t& rng, const DeviceParams& params) {
    const double g_min = params.min_conductance();
    const double span = params.max_conductance() - g_min;
    Eigen::MatrixXd g(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            g(i, j) = g_min + span * (0.05 + 0.9 * uniform01(rng));
    return g;
}

nlohmann::json report_summary(const WriteReport& rep) {
    return nlohmann::json{{"phases_planned", rep.phases_planned},
                          {"phases_executed", rep.phases_executed},
                          {"total_pulse_time_s", rep.total_pulse_time},
                          {"target_error_max_rel", rep.target_error_max_rel},
                          {"disturbance_l1_C", rep.disturbance_l1_total},
                          {"disturbance_max_C", rep.disturbance_max}};
}

}  // namespace

Trace run_sneak_demo(int size, std::uint64_t seed, const DeviceParams& params,
                     double pulse_voltage, double pulse_dt) {
    params.validate();
    require(size >= 1, "sneak demo requires size >= 1");

    std::uint64_t rng = seed;
    const Eigen::MatrixXd targets = random_targets(size, rng, params);

    Trace tr("sneak");
    tr.add_column("topology_id");
    tr.add_column("phase");
    tr.add_column("duration_s");
    tr.add_column("cells_pulsed");
    tr.add_column("dq_l1_C");
    tr.add_column("dq_max_C");
    tr.add_column("max_sneak_A");

    const auto run_one = [&](TopologyKind kind, WritePolicyKind policy_kind,
                             double topology_id) {
        const WritePolicy policy{policy_kind, pulse_voltage, pulse_dt};
        CrossbarArray array(Topology{kind, size, size}, params);
        const WritePlan plan = plan_writes(targets, policy, params);
        const WriteReport rep = execute_plan(array, plan, policy);
        for (const PhaseStats& st : rep.phases)
            tr.append_row({topology_id, static_cast<double>(st.index), st.duration,
                           static_cast<double>(st.cells_pulsed), st.disturbance_l1,
                           st.disturbance_max, st.max_sneak_current});
        return report_summary(rep);
    };

    const nlohmann::json conventional = run_one(
        TopologyKind::ConventionalSharedRail, WritePolicyKind::HalfSelectV2, 0.0);
    const nlohmann::json proposed = run_one(TopologyKind::ProposedIsolatedLoop,
                                            WritePolicyKind::FullParallel, 1.0);

    tr.metadata() = base_metadata("sneak", params);
    tr.metadata()["options"] = {{"size", size},
                                {"seed", seed},
                                {"pulse_voltage_V", pulse_voltage},
                                {"pulse_dt_s", pulse_dt}};
    tr.metadata()["topologies"] = {{"0", "conventional/half-select-v2"},
                                   {"1", "proposed/full-parallel"}};
    tr.metadata()["conventional"] = conventional;
    tr.metadata()["proposed"] = proposed;
    return tr;
}

Trace run_complexity_sweep(const std::vector<int>& sizes, std::uint64_t seed,
                           const DeviceParams& params, double pulse_voltage) {
    params.validate();
    require(!sizes.empty(), "complexity sweep requires at least one size");
    for (const int m : sizes) require(m >= 1, "complexity sweep sizes must be >= 1");

    Trace tr("complexity");
    tr.add_column("m");
    tr.add_column("policy_id");
    tr.add_column("phase_count");
    tr.add_column("total_pulse_time_s");

    static constexpr WritePolicyKind kPolicies[] = {
        WritePolicyKind::SequentialCellwise, WritePolicyKind::RowParallel,
        WritePolicyKind::FullParallel, WritePolicyKind::HalfSelectV2};
    static constexpr const char* kPolicyNames[] = {"sequential-cellwise", "row-parallel",
                                                   "full-parallel", "half-select-v2"};

    std::uint64_t rng = seed;
    nlohmann::json counts = nlohmann::json::object();
    for (const int m : sizes) {
        const Eigen::MatrixXd targets = random_targets(m, rng, params);
        nlohmann::json per_policy = nlohmann::json::object();
        for (int pid = 0; pid < 4; ++pid) {
            const WritePolicy policy{kPolicies[pid], pulse_voltage, 1e9};
            const WritePlan plan = plan_writes(targets, policy, params);
            // Schedule-level pulse time: each phase runs as long as its
            // widest pulse, with every cell starting from the pristine state.
            double total = 0.0;
            for (const WritePhase& phase : plan.phases) {
                double widest = 0.0;
                for (const PlannedPulse& p : phase.pulses)
                    widest = std::max(
                        widest, pulse_width_for_target(
                                    0.0, params.charge_for_conductance(p.target_g),
                                    params, pulse_voltage));
                total += widest;
            }
            tr.append_row({static_cast<double>(m), static_cast<double>(pid),
                           static_cast<double>(plan.phases.size()), total});
            per_policy[kPolicyNames[pid]] = plan.phases.size();
        }
        counts[std::to_string(m)] = std::move(per_policy);
    }

    tr.metadata() = base_metadata("complexity", params);
    tr.metadata()["options"] = {{"sizes", sizes},
                                {"seed", seed},
                                {"pulse_voltage_V", pulse_voltage}};
    tr.metadata()["policy_ids"] = {{"0", kPolicyNames[0]},
                                   {"1", kPolicyNames[1]},
                                   {"2", kPolicyNames[2]},
                                   {"3", kPolicyNames[3]}};
    tr.metadata()["phase_counts"] = std::move(counts);
    return tr;
}

const std::vector<ExperimentInfo>& experiment_registry() {
    static const std::vector<ExperimentInfo> registry = {
        {"s1", "pulsed potentiation until the resistance plateaus"},
        {"s2", "program/hold/saturate/reverse staircase at 1 Hz"},
        {"retention", "zero-bias relaxation across a 48 h window"},
        {"iv", "small-signal read sweeps at frozen charge levels"},
        {"sneak", "per-phase write disturbance, shared-rail vs isolated-loop"},
        {"complexity", "write phase counts and pulse time across array sizes"},
    };
    return registry;
}

}  // namespace ionx
