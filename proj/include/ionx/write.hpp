#pragma once

// Write scheduling and execution. A plan groups target conductances into
// phases according to a policy; execution biases the array phase by phase and
// integrates every cell through the nodal solution, so shared-rail sneak
// programming emerges from the device model rather than being injected.

#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "ionx/array.hpp"

namespace ionx {

enum class WritePolicyKind {
    SequentialCellwise,  // one cell per phase, rows*cols phases
    RowParallel,         // one row per phase, rows phases
    FullParallel,        // single phase; isolated-loop topology only
    HalfSelectV2,        // one cell per phase with V/2 guard rails; shared-rail only
};

struct WritePolicy {
    WritePolicyKind kind = WritePolicyKind::SequentialCellwise;
    double pulse_voltage = 3.6;  // programming pulse magnitude, V
    double pulse_dt = 600.0;     // per-phase pulse duration cap, s

    void validate() const;
};

struct PlannedPulse {
    CellIndex cell;
    double target_g = 0.0;  // S; polarity and width are resolved at execution
};

struct WritePhase {
    std::vector<PlannedPulse> pulses;
};

struct WritePlan {
    WritePolicyKind policy = WritePolicyKind::SequentialCellwise;
    int rows = 0;
    int cols = 0;
    std::vector<WritePhase> phases;
};

/// Groups the target matrix into phases. Every cell appears in exactly one
/// phase. Throws UNREACHABLE_TARGET listing every cell whose conductance lies
/// outside [G(0), G(q_max)].
WritePlan plan_writes(const Eigen::MatrixXd& target_g, const WritePolicy& policy,
                      const DeviceParams& params);

/// Analytic pulse width moving q from current_q to target_q under v_p, from
/// the closed-form saturating charge law. Returns 0 when the charges already
/// match; throws PULSE_POLARITY when the sign of v_p cannot move the charge
/// toward the target and PULSE_UNBOUNDED for asymptotic endpoints (q_max, 0).
double pulse_width_for_target(double current_q, double target_q,
                              const DeviceParams& params, double v_p);

struct PhaseStats {
    int index = 0;
    double duration = 0.0;           // s
    int cells_pulsed = 0;
    double disturbance_l1 = 0.0;     // C, cells not pulsed in this phase
    double disturbance_max = 0.0;    // C
    double max_sneak_current = 0.0;  // A, through cells not pulsed in this phase
};

/// One non-pulsed cell's outcome for one phase (the disturbance CSV rows).
struct CellDelta {
    int phase = 0;
    CellIndex cell;
    double dq = 0.0;       // C
    double g_after = 0.0;  // S
};

struct WriteReport {
    int phases_planned = 0;
    int phases_executed = 0;  // phases that carried at least one nonzero pulse
    double total_pulse_time = 0.0;  // s
    Eigen::MatrixXd achieved_g;
    double target_error_max_rel = 0.0;
    double disturbance_l1_total = 0.0;
    double disturbance_max = 0.0;
    std::vector<PhaseStats> phases;
    std::vector<CellDelta> disturbances;

    nlohmann::json to_json() const;
};

/// Runs the plan against the array in place. Validates policy/plan/topology
/// compatibility: FullParallel needs the isolated-loop topology, HalfSelectV2
/// the shared-rail one.
WriteReport execute_plan(CrossbarArray& array, const WritePlan& plan,
                         const WritePolicy& policy);

/// Per-phase disturbance rows: phase, cell_row, cell_col, dq_C, G_S.
void write_disturbance_csv(const WriteReport& report, std::ostream& out);

}  // namespace ionx
