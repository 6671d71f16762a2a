#pragma once

// Single-device compact model: ionic programming current, charge integration
// with intercalation-site saturation, charge-dependent readout conductance,
// zero-bias retention relaxation, and the ideal flux/charge relation for the
// constant-current operating point. All quantities are strict SI.

#include "ionx/common.hpp"

namespace ionx {

struct DeviceGeometry {
    double d = 0.0;    // cathode-to-anode electrolyte gap, m
    double l_x = 0.0;  // readout electrode spacing, m
    double l_y = 0.0;  // channel layer thickness, m
    double l_z = 0.0;  // readout electrode height, m

    /// Cross section the programming current flows through, m^2.
    double cross_section_area() const { return l_x * l_z; }

    void validate() const;
};

struct MaterialParams {
    double c0 = 0.0;             // mobile ion concentration in the electrolyte, 1/m^3
    double mu_ion = 0.0;         // ionic mobility, m^2/(V s)
    double mu_e = 0.0;           // effective electronic mobility in the channel, m^2/(V s)
    double g0 = 0.0;             // baseline channel conductance, S
    double q_max = 0.0;          // intercalation-site capacity, C
    double tau_retention = 0.0;  // zero-bias relaxation constant, s; 0 disables relaxation

    void validate() const;
};

struct DeviceParams {
    DeviceGeometry geometry;
    MaterialParams material;

    // Two-terminal baseline devices may gate programming below a voltage
    // magnitude; 0 keeps the device threshold-less.
    double write_threshold = 0.0;  // V

    void validate() const;

    double conductance_at(double q) const;  // g0 + mu_e q / (l_x l_y), S
    double resistance_at(double q) const;   // ohm
    double min_conductance() const { return conductance_at(0.0); }
    double max_conductance() const { return conductance_at(material.q_max); }

    /// Inverse of conductance_at. Throws CONDUCTANCE_RANGE when g lies outside
    /// [G(0), G(q_max)] (beyond a tiny round-off slack).
    double charge_for_conductance(double g) const;
};

/// Intercalated charge plus elapsed time; q is the single source of truth for
/// the cell's conductance.
struct DeviceState {
    double q = 0.0;  // C, 0 <= q <= q_max
    double t = 0.0;  // s
};

/// Parameters calibrated against the reference device: 1 Mohm pristine
/// (high-resistance) state, 550 kohm fully intercalated (low-resistance)
/// state, 3.6 V programming pulses, and a 48 h relaxation window that ends
/// within 5% of the pristine resistance.
DeviceParams paper_calibrated();

/// Field-driven ionic programming current e c0 mu_ion (v_p / d) A.
/// Sign follows v_p; exactly 0 at v_p = 0.
double programming_current(const DeviceParams& params, double v_p);

/// Advances the charge ODE under a constant programming voltage for dt
/// seconds. Intercalation slows as sites fill, extraction as they empty:
///   dq/dt = I_p (1 - q/q_max)   for v_p > 0,
///   dq/dt = I_p (q/q_max)       for v_p < 0.
/// Uses explicit RK4 sub-steps bounded so |dq| per sub-step stays below
/// 1e-3 q_max; |v_p| below the device write threshold leaves q untouched.
/// Rejects dt <= 0.
DeviceState program_step(const DeviceState& state, const DeviceParams& params,
                         double v_p, double dt);

/// Zero-bias relaxation dq/dt = -q / tau_retention; identity on q when the
/// device has tau_retention = 0. Rejects dt <= 0.
DeviceState relax_step(const DeviceState& state, const DeviceParams& params, double dt);

double conductance(const DeviceState& state, const DeviceParams& params);  // S
double resistance(const DeviceState& state, const DeviceParams& params);   // ohm

/// Constant-read-current flux model. k has units of V s (weber): the flux
/// accumulated while the charge moves one e-fold.
struct FluxModel {
    double k = 0.0;       // l_x l_y i_read / (mu_e i_prog), V s
    double offset = 0.0;  // additive flux offset, V s; cancels in differences

    /// Requires i_read > 0 and i_prog > 0 so that k > 0.
    static FluxModel from_currents(const DeviceParams& params, double i_read,
                                   double i_prog);
};

/// Ideal memristance k/q, ohm. Throws DOMAIN on q <= 0 ("ideal memristance
/// undefined at zero charge"); the finite-baseline path is conductance().
double memristance(double q, const FluxModel& model);

/// d/dt of the ideal memristance under a constant programming current,
/// i.e. along q = i_prog t: -k / (i_prog t^2). Requires t > 0.
double memristance_rate(double t, const FluxModel& model, double i_prog);

/// Flux difference phi(q2) - phi(q1) = k ln(q2/q1); the offset cancels.
/// Requires q1, q2 > 0.
double flux(double q1, double q2, const FluxModel& model);

}  // namespace ionx
