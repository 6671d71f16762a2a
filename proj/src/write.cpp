#include "ionx/write.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>

#include "ionx/nodal.hpp"

namespace ionx {

void WritePolicy::validate() const {
    if (!(pulse_voltage > 0.0))
        throw_usage("PARAM_RANGE", "policy.pulse_voltage must be > 0");
    if (!(pulse_dt > 0.0)) throw_usage("PARAM_RANGE", "policy.pulse_dt must be > 0");
}

WritePlan plan_writes(const Eigen::MatrixXd& target_g, const WritePolicy& policy,
                      const DeviceParams& params) {
    policy.validate();
    params.validate();
    const int m = static_cast<int>(target_g.rows());
    const int n = static_cast<int>(target_g.cols());
    if (m < 1 || n < 1)
        throw_usage("TOPOLOGY_SHAPE", "target matrix needs at least one cell");

    const double g_min = params.min_conductance();
    const double g_max = params.max_conductance();
    const double slack = 1e-9 * (g_max - g_min);
    std::string offenders;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            const double g = target_g(i, j);
            if (std::isfinite(g) && g >= g_min - slack && g <= g_max + slack) continue;
            if (!offenders.empty()) offenders += ", ";
            offenders += "(" + std::to_string(i) + "," + std::to_string(j) +
                         ")=" + format_double(g);
        }
    if (!offenders.empty())
        throw_usage("UNREACHABLE_TARGET",
                    "targets outside the reachable conductance range [" +
                        format_double(g_min) + ", " + format_double(g_max) +
                        "] S: " + offenders);

    WritePlan plan;
    plan.policy = policy.kind;
    plan.rows = m;
    plan.cols = n;
    switch (policy.kind) {
        case WritePolicyKind::SequentialCellwise:
        case WritePolicyKind::HalfSelectV2:
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    plan.phases.push_back(
                        WritePhase{{PlannedPulse{{i, j}, target_g(i, j)}}});
            break;
        case WritePolicyKind::RowParallel:
            for (int i = 0; i < m; ++i) {
                WritePhase phase;
                for (int j = 0; j < n; ++j)
                    phase.pulses.push_back(PlannedPulse{{i, j}, target_g(i, j)});
                plan.phases.push_back(std::move(phase));
            }
            break;
        case WritePolicyKind::FullParallel: {
            WritePhase phase;
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j)
                    phase.pulses.push_back(PlannedPulse{{i, j}, target_g(i, j)});
            plan.phases.push_back(std::move(phase));
            break;
        }
    }
    return plan;
}

double pulse_width_for_target(double current_q, double target_q,
                              const DeviceParams& params, double v_p) {
    const double q_max = params.material.q_max;
    if (!(current_q >= 0.0 && current_q <= q_max))
        throw_usage("CHARGE_RANGE", "current charge outside [0, q_max]");
    if (!(target_q >= 0.0 && target_q <= q_max))
        throw_usage("CHARGE_RANGE", "target charge outside [0, q_max]");
    if (target_q == current_q) return 0.0;
    if (params.write_threshold > 0.0 && std::fabs(v_p) < params.write_threshold)
        throw_usage("PULSE_THRESHOLD",
                    "pulse voltage below the write threshold programs nothing");
    const double i_p = programming_current(params, v_p);
    if (target_q > current_q) {
        if (!(i_p > 0.0))
            throw_usage("PULSE_POLARITY", "raising the charge requires v_p > 0");
        if (target_q == q_max)
            throw_usage("PULSE_UNBOUNDED", "q_max is reached only asymptotically");
        return (q_max / i_p) * std::log((q_max - current_q) / (q_max - target_q));
    }
    if (!(i_p < 0.0))
        throw_usage("PULSE_POLARITY", "lowering the charge requires v_p < 0");
    if (target_q == 0.0)
        throw_usage("PULSE_UNBOUNDED", "full extraction is asymptotic");
    return (q_max / -i_p) * std::log(current_q / target_q);
}

namespace {

struct ResolvedPulse {
    CellIndex cell;
    double sign = 1.0;  // programming polarity
    double width = 0.0;  // s, > 0
};

BiasConfig sequential_bias(const CellIndex& cell, double sv) {
    BiasConfig bias;
    bias.drive(LineId::row_rail(cell.row), sv);
    bias.drive(LineId::col_rail(cell.col), 0.0);
    return bias;
}

BiasConfig halfselect_bias(int m, int n, const CellIndex& cell, double sv) {
    BiasConfig bias;
    for (int i = 0; i < m; ++i)
        bias.drive(LineId::row_rail(i), i == cell.row ? sv : 0.5 * sv);
    for (int j = 0; j < n; ++j)
        bias.drive(LineId::col_rail(j), j == cell.col ? 0.0 : 0.5 * sv);
    return bias;
}

// The shared row rail carries +V; each active column is grounded for
// deposition or lifted to 2V for extraction, so every active cell sees
// exactly +/-V while it is being pulsed.
BiasConfig rowparallel_bias(int row, const std::vector<const ResolvedPulse*>& active,
                            double v) {
    BiasConfig bias;
    bias.drive(LineId::row_rail(row), v);
    for (const ResolvedPulse* r : active)
        bias.drive(LineId::col_rail(r->cell.col), r->sign > 0.0 ? 0.0 : 2.0 * v);
    return bias;
}

// Advances every cell of a shared-rail array under a fixed bias for `dur`
// seconds, refreshing the nodal solution between charge steps. Returns the
// largest |current| observed through cells outside `pulsed`.
double integrate_shared_rail(CrossbarArray& array, const BiasConfig& bias, double dur,
                             const std::set<CellIndex>& pulsed, double v_mag) {
    if (!(dur > 0.0)) return 0.0;
    const DeviceParams& params = array.params();
    double max_sneak = 0.0;

    const auto scan_sneak = [&](const SolveResult& res) {
        for (int i = 0; i < array.rows(); ++i)
            for (int j = 0; j < array.cols(); ++j)
                if (!pulsed.contains(CellIndex{i, j}))
                    max_sneak = std::max(max_sneak, std::fabs(res.cell_currents(i, j)));
    };

    NodalSystem sys = build_nodal_system(array, bias);
    if (sys.free_count == 0) {
        // Every line is driven, so no node voltage depends on cell state; a
        // single solve is exact for the whole interval.
        const SolveResult res = solve(sys);
        scan_sneak(res);
        for (int i = 0; i < array.rows(); ++i)
            for (int j = 0; j < array.cols(); ++j)
                array.cell(i, j) =
                    program_step(array.cell(i, j), params, res.cell_voltages(i, j), dur);
        return max_sneak;
    }

    // Floating lines couple the voltages to the evolving charges; refresh the
    // solution often enough that no cell moves more than 1e-3 q_max between
    // refreshes at the nominal pulse rate.
    const double rate = std::fabs(programming_current(params, v_mag));
    const double h_target = 1e-3 * params.material.q_max / rate;
    const double steps = std::ceil(dur / h_target);
    if (!(steps <= 5e7))
        throw_runtime("PULSE_TOO_LONG", "phase needs " + format_double(steps) +
                                            " network refreshes; split the write");
    const auto n = std::max<std::int64_t>(1, static_cast<std::int64_t>(steps));
    const double h = dur / static_cast<double>(n);
    for (std::int64_t k = 0; k < n; ++k) {
        sys = build_nodal_system(array, bias);
        const SolveResult res = solve(sys);
        scan_sneak(res);
        for (int i = 0; i < array.rows(); ++i)
            for (int j = 0; j < array.cols(); ++j)
                array.cell(i, j) =
                    program_step(array.cell(i, j), params, res.cell_voltages(i, j), h);
    }
    return max_sneak;
}

}  // namespace

WriteReport execute_plan(CrossbarArray& array, const WritePlan& plan,
                         const WritePolicy& policy) {
    policy.validate();
    if (plan.policy != policy.kind)
        throw_usage("PLAN_POLICY_MISMATCH",
                    "the plan was built for a different write policy");
    if (plan.rows != array.rows() || plan.cols != array.cols())
        throw_usage("SHAPE_MISMATCH", "plan shape does not match the array");
    const bool proposed =
        array.topology().kind == TopologyKind::ProposedIsolatedLoop;
    if (policy.kind == WritePolicyKind::FullParallel && !proposed)
        throw_usage("POLICY_TOPOLOGY_MISMATCH",
                    "FullParallel programming needs the isolated-loop topology");
    if (policy.kind == WritePolicyKind::HalfSelectV2 && proposed)
        throw_usage("POLICY_TOPOLOGY_MISMATCH",
                    "HalfSelectV2 applies to the shared-rail topology");

    std::set<CellIndex> seen;
    for (const WritePhase& phase : plan.phases)
        for (const PlannedPulse& p : phase.pulses) {
            if (p.cell.row < 0 || p.cell.row >= plan.rows || p.cell.col < 0 ||
                p.cell.col >= plan.cols)
                throw_usage("CELL_INDEX", "planned cell outside the array");
            if (!seen.insert(p.cell).second)
                throw_usage("PLAN_INVALID", "cell (" + std::to_string(p.cell.row) +
                                                "," + std::to_string(p.cell.col) +
                                                ") appears in more than one phase");
        }

    const DeviceParams& params = array.params();
    const double v = policy.pulse_voltage;
    WriteReport rep;
    rep.phases_planned = static_cast<int>(plan.phases.size());

    for (std::size_t phase_idx = 0; phase_idx < plan.phases.size(); ++phase_idx) {
        const WritePhase& phase = plan.phases[phase_idx];
        std::vector<ResolvedPulse> resolved;
        std::set<CellIndex> pulsed;
        for (const PlannedPulse& p : phase.pulses) {
            const double q_t = params.charge_for_conductance(p.target_g);
            const double q_c = array.cell(p.cell.row, p.cell.col).q;
            if (q_t == q_c) continue;
            const double sign = q_t > q_c ? 1.0 : -1.0;
            const double w = std::min(
                pulse_width_for_target(q_c, q_t, params, sign * v), policy.pulse_dt);
            resolved.push_back(ResolvedPulse{p.cell, sign, w});
            pulsed.insert(p.cell);
        }

        PhaseStats st;
        st.index = static_cast<int>(phase_idx);
        st.cells_pulsed = static_cast<int>(resolved.size());
        if (!resolved.empty()) {
            const Eigen::MatrixXd q_before = array.charge_matrix();
            const double t0 = array.cell(0, 0).t;
            double duration = 0.0;
            for (const ResolvedPulse& r : resolved)
                duration = std::max(duration, r.width);

            if (proposed) {
                BiasConfig bias;
                for (const ResolvedPulse& r : resolved) {
                    bias.drive(LineId::loop_plus(r.cell.row, r.cell.col), r.sign * v);
                    bias.drive(LineId::loop_minus(r.cell.row, r.cell.col), 0.0);
                }
                const NodalSystem sys = build_nodal_system(array, bias);
                const SolveResult res = solve(sys);
                // Non-pulsed loops and the whole read network are structurally
                // disconnected from the drive; the scan records what the solve
                // actually produced rather than asserting zero.
                for (int i = 0; i < array.rows(); ++i)
                    for (int j = 0; j < array.cols(); ++j)
                        if (!pulsed.contains(CellIndex{i, j}))
                            st.max_sneak_current = std::max(
                                st.max_sneak_current,
                                std::max(std::fabs(res.cell_currents(i, j)),
                                         std::fabs(res.loop_currents(i, j))));
                for (const ResolvedPulse& r : resolved) {
                    DeviceState& cell = array.cell(r.cell.row, r.cell.col);
                    cell = program_step(cell, params,
                                        res.loop_voltages(r.cell.row, r.cell.col),
                                        r.width);
                }
            } else {
                switch (policy.kind) {
                    case WritePolicyKind::SequentialCellwise:
                        st.max_sneak_current = integrate_shared_rail(
                            array, sequential_bias(resolved[0].cell, resolved[0].sign * v),
                            duration, pulsed, v);
                        break;
                    case WritePolicyKind::HalfSelectV2:
                        st.max_sneak_current = integrate_shared_rail(
                            array,
                            halfselect_bias(array.rows(), array.cols(), resolved[0].cell,
                                            resolved[0].sign * v),
                            duration, pulsed, v);
                        break;
                    case WritePolicyKind::RowParallel: {
                        // Columns release as their cells finish; between release
                        // events the bias is constant.
                        std::set<double> events;
                        for (const ResolvedPulse& r : resolved) events.insert(r.width);
                        double t_done = 0.0;
                        for (const double w : events) {
                            std::vector<const ResolvedPulse*> active;
                            for (const ResolvedPulse& r : resolved)
                                if (r.width > t_done) active.push_back(&r);
                            if (w > t_done && !active.empty())
                                st.max_sneak_current = std::max(
                                    st.max_sneak_current,
                                    integrate_shared_rail(
                                        array,
                                        rowparallel_bias(resolved[0].cell.row, active, v),
                                        w - t_done, pulsed, v));
                            t_done = w;
                        }
                        break;
                    }
                    case WritePolicyKind::FullParallel:
                        break;  // unreachable: rejected above
                }
            }

            // Uniform wall clock: every cell ends the phase at the same time.
            for (int i = 0; i < array.rows(); ++i)
                for (int j = 0; j < array.cols(); ++j) array.cell(i, j).t = t0 + duration;

            st.duration = duration;
            rep.total_pulse_time += duration;
            ++rep.phases_executed;

            const Eigen::MatrixXd dq = array.charge_matrix() - q_before;
            for (int i = 0; i < array.rows(); ++i)
                for (int j = 0; j < array.cols(); ++j) {
                    if (pulsed.contains(CellIndex{i, j})) continue;
                    const double delta = dq(i, j);
                    rep.disturbances.push_back(
                        CellDelta{static_cast<int>(phase_idx), CellIndex{i, j}, delta,
                                  conductance(array.cell(i, j), params)});
                    st.disturbance_l1 += std::fabs(delta);
                    st.disturbance_max = std::max(st.disturbance_max, std::fabs(delta));
                }
            rep.disturbance_l1_total += st.disturbance_l1;
            rep.disturbance_max = std::max(rep.disturbance_max, st.disturbance_max);
        }
        rep.phases.push_back(st);
    }

    rep.achieved_g = array.conductance_matrix();
    for (const WritePhase& phase : plan.phases)
        for (const PlannedPulse& p : phase.pulses) {
            const double got = rep.achieved_g(p.cell.row, p.cell.col);
            const double denom = std::max(p.target_g, 1e-300);
            rep.target_error_max_rel =
                std::max(rep.target_error_max_rel, std::fabs(got - p.target_g) / denom);
        }
    return rep;
}

nlohmann::json WriteReport::to_json() const {
    nlohmann::json phases_j = nlohmann::json::array();
    for (const PhaseStats& st : phases)
        phases_j.push_back(nlohmann::json{
            {"index", st.index},
            {"duration_s", st.duration},
            {"cells_pulsed", st.cells_pulsed},
            {"disturbance_l1_C", st.disturbance_l1},
            {"disturbance_max_C", st.disturbance_max},
            {"max_sneak_A", st.max_sneak_current},
        });
    nlohmann::json achieved = nlohmann::json::array();
    for (Eigen::Index i = 0; i < achieved_g.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index j = 0; j < achieved_g.cols(); ++j)
            row.push_back(achieved_g(i, j));
        achieved.push_back(std::move(row));
    }
    return nlohmann::json{
        {"phases_planned", phases_planned},
        {"phases_executed", phases_executed},
        {"total_pulse_time_s", total_pulse_time},
        {"target_error_max_rel", target_error_max_rel},
        {"disturbance_l1_C", disturbance_l1_total},
        {"disturbance_max_C", disturbance_max},
        {"achieved_G_S", std::move(achieved)},
        {"phases", std::move(phases_j)},
    };
}

void write_disturbance_csv(const WriteReport& report, std::ostream& out) {
    out << "phase,cell_row,cell_col,dq_C,G_S\n";
    for (const CellDelta& d : report.disturbances)
        out << d.phase << "," << d.cell.row << "," << d.cell.col << ","
            << format_double(d.dq) << "," << format_double(d.g_after) << "\n";
}

}  // namespace ionx
