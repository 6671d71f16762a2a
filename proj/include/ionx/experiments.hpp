#pragma once

// Deterministic experiment protocols over the device and array layers. Each
// run returns a Trace whose metadata snapshot is sufficient to reproduce the
// run bit for bit.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "ionx/trace.hpp"
#include "ionx/write.hpp"

namespace ionx {

/// Pulsed potentiation until the resistance plateaus: fixed-width programming
/// pulses, resistance sampled once per cycle, stopping when the cycle-over-
/// cycle relative resistance change falls below stop_rel_dr.
/// Columns: cycle, cumulative_t_s, q_C, R_ohm.
Trace run_s1_protocol(const DeviceParams& params, double v_p = 3.6,
                      double pulse_s = 30.0, double stop_rel_dr = 1e-3,
                      int max_cycles = 100000);

/// Program/hold/saturate/reverse sequence sampled at 1 Hz: 60 s programming,
/// 300 s zero-bias hold (retention disabled, so the state must stay put),
/// 240 s programming to saturation, 60 s reverse bias.
/// Columns: t_s, segment, v_p_V, q_C, R_ohm.
Trace run_s2_protocol(const DeviceParams& params, double v_p = 3.6);

/// Programs the device for program_s seconds, then relaxes it across
/// window_s of zero bias on a logarithmic sampling grid.
/// Columns: t_s, q_C, R_ohm.
Trace run_retention(const DeviceParams& params, double v_p = 3.6,
                    double program_s = 300.0, double window_s = 172800.0,
                    int samples = 240);

/// Small-signal triangular read sweeps at frozen charge levels. Reading never
/// mutates the state, so forward and reverse branches coincide sample by
/// sample. Columns: level, q_C, cycle, leg, V_V, I_A.
Trace run_iv_sweep(const DeviceParams& params, double amplitude = 0.2,
                   int cycles = 2, int points_per_leg = 25,
                   const std::vector<double>& q_fractions = {0.2, 0.5, 0.8});

/// Writes one seeded random target pattern into both topologies (shared-rail
/// under HalfSelectV2, isolated-loop under FullParallel) and reports each
/// phase's disturbance. Columns: topology_id, phase, duration_s,
/// cells_pulsed, dq_l1_C, dq_max_C, max_sneak_A.
Trace run_sneak_demo(int size, std::uint64_t seed, const DeviceParams& params,
                     double pulse_voltage = 3.6, double pulse_dt = 600.0);

/// Schedule-level cost of every policy for seeded random targets at each
/// array size: phase counts and summed pulse widths, no coupled execution.
/// Columns: m, policy_id, phase_count, total_pulse_time_s.
Trace run_complexity_sweep(const std::vector<int>& sizes, std::uint64_t seed,
                           const DeviceParams& params, double pulse_voltage = 3.6);

struct FitResult {
    double k = 0.0;          // fitted 1/q coefficient, ohm C
    double intercept = 0.0;  // ohm
    double r_squared = 0.0;
    Eigen::VectorXd residuals;  // ohm, per usable sample
    bool degenerate = false;    // the 1/q term explains nothing
};

/// Least-squares fit of R_corrected = k/q + b, where R_corrected removes the
/// baseline conductance: R_corrected = 1/(1/R - g0). Throws FIT_SAMPLES with
/// fewer than 3 usable samples.
FitResult fit_k_model(const std::vector<double>& q, const std::vector<double>& r,
                      double g0);

/// Fit over a trace's q_C/R_ohm columns, restricted to the unsaturated
/// segment 0 < q < max_q_fraction * q_max.
FitResult fit_k_model(const Trace& trace, const DeviceParams& params,
                      double max_q_fraction = 0.1);

struct ExperimentInfo {
    const char* name;
    const char* summary;
};

/// Stable registry of runnable experiments, in dispatch order.
const std::vector<ExperimentInfo>& experiment_registry();

/// Deterministic uniform double in [0, 1) from a seeded 64-bit stream;
/// bit-identical across platforms, unlike std::uniform_real_distribution.
double uniform01(std::uint64_t& state);

}  // namespace ionx
