#include "ionx/device.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>

namespace ionx {
namespace {

// Per-sub-step charge motion cap, as a fraction of q_max. The charge laws are
// linear in q, so RK4 at this cap carries a relative defect around 1e-12 per
// time constant, far inside the 1e-6 budget the protocols rely on.
constexpr double kChargeStepFraction = 1e-3;

// Hard ceiling so absurd (dt, v_p) combinations fail instead of spinning.
constexpr std::int64_t kMaxSubsteps = 50'000'000;

std::int64_t substep_count(double dt, double rate_bound, double q_max) {
    if (rate_bound <= 0.0) return 1;
    const double n = std::ceil(dt * rate_bound / (kChargeStepFraction * q_max));
    if (!(n <= static_cast<double>(kMaxSubsteps)))
        throw_runtime("PULSE_TOO_LONG",
                      "time step needs " + std::to_string(n) +
                          " charge sub-steps; split the pulse");
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(n));
}

// One classical RK4 step for dq/dt = f(q).
template <typename F>
double rk4_step(double q, double h, F&& f) {
    const double k1 = f(q);
    const double k2 = f(q + 0.5 * h * k1);
    const double k3 = f(q + 0.5 * h * k2);
    const double k4 = f(q + h * k3);
    return q + (h / 6.0) * (k1 + 2.0 * (k2 + k3) + k4);
}

void require_positive(double v, const char* field) {
    if (!(v > 0.0))
        throw_usage("PARAM_RANGE", std::string(field) + " must be > 0");
}

void require_non_negative(double v, const char* field) {
    if (!(v >= 0.0))
        throw_usage("PARAM_RANGE", std::string(field) + " must be >= 0");
}

}  // namespace

void DeviceGeometry::validate() const {
    require_positive(d, "geometry.d");
    require_positive(l_x, "geometry.l_x");
    require_positive(l_y, "geometry.l_y");
    require_positive(l_z, "geometry.l_z");
}

void MaterialParams::validate() const {
    require_positive(c0, "material.c0");
    require_positive(mu_ion, "material.mu_ion");
    require_positive(mu_e, "material.mu_e");
    require_non_negative(g0, "material.g0");
    require_positive(q_max, "material.q_max");
    require_non_negative(tau_retention, "material.tau_retention");
}

void DeviceParams::validate() const {
    geometry.validate();
    material.validate();
    require_non_negative(write_threshold, "write_threshold");
}

double DeviceParams::conductance_at(double q) const {
    return material.g0 + material.mu_e * q / (geometry.l_x * geometry.l_y);
}

double DeviceParams::resistance_at(double q) const { return 1.0 / conductance_at(q); }

double DeviceParams::charge_for_conductance(double g) const {
    const double g_min = min_conductance();
    const double g_max = max_conductance();
    const double slack = 1e-9 * (g_max - g_min);
    if (!(g >= g_min - slack && g <= g_max + slack))
        throw_usage("CONDUCTANCE_RANGE",
                    "conductance " + std::to_string(g) + " S outside the reachable [" +
                        std::to_string(g_min) + ", " + std::to_string(g_max) + "] S");
    const double q = (g - material.g0) * geometry.l_x * geometry.l_y / material.mu_e;
    return std::clamp(q, 0.0, material.q_max);
}

DeviceParams paper_calibrated() {
    DeviceParams p;
    p.geometry.d = 1.0e-5;
    p.geometry.l_x = 1.0e-4;
    p.geometry.l_y = 1.0e-6;
    p.geometry.l_z = 1.0e-4;

    MaterialParams& m = p.material;
    m.c0 = 2.0e26;  // ~0.33 mol/L electrolyte
    m.mu_ion = 1.0e-13;
    m.mu_e = 1.0e-10;
    m.g0 = 1.0e-6;  // pristine channel reads 1 Mohm
    // Capacity pinned so the fully intercalated channel reads 550 kohm.
    m.q_max = (1.0 / 550.0e3 - m.g0) * p.geometry.l_x * p.geometry.l_y / m.mu_e;
    // Relaxation leaves 1/20 of the charge after the 48 h window, putting the
    // relaxed resistance within 5% of the pristine value.
    m.tau_retention = 172800.0 / std::log(20.0);

    p.write_threshold = 0.0;
    p.validate();
    return p;
}

double programming_current(const DeviceParams& params, double v_p) {
    if (v_p == 0.0) return 0.0;
    const DeviceGeometry& g = params.geometry;
    return kElementaryCharge * params.material.c0 * params.material.mu_ion *
           (v_p / g.d) * g.cross_section_area();
}

DeviceState program_step(const DeviceState& state, const DeviceParams& params,
                         double v_p, double dt) {
    if (!(dt > 0.0)) throw_usage("TIME_STEP", "program_step requires dt > 0");
    DeviceState out = state;
    out.t += dt;
    if (params.write_threshold > 0.0 && std::fabs(v_p) < params.write_threshold)
        return out;
    const double i_p = programming_current(params, v_p);
    if (i_p == 0.0) return out;

    const double q_max = params.material.q_max;
    const std::int64_t n = substep_count(dt, std::fabs(i_p), q_max);
    const double h = dt / static_cast<double>(n);
    double q = state.q;
    if (i_p > 0.0) {
        const auto fill = [&](double qq) { return i_p * (1.0 - qq / q_max); };
        for (std::int64_t k = 0; k < n; ++k) q = rk4_step(q, h, fill);
    } else {
        const auto drain = [&](double qq) { return i_p * (qq / q_max); };
        for (std::int64_t k = 0; k < n; ++k) q = rk4_step(q, h, drain);
    }
    out.q = std::clamp(q, 0.0, q_max);
    return out;
}

DeviceState relax_step(const DeviceState& state, const DeviceParams& params, double dt) {
    if (!(dt > 0.0)) throw_usage("TIME_STEP", "relax_step requires dt > 0");
    DeviceState out = state;
    out.t += dt;
    const double tau = params.material.tau_retention;
    if (tau <= 0.0 || state.q == 0.0) return out;

    const double q_max = params.material.q_max;
    const std::int64_t n = substep_count(dt, q_max / tau, q_max);
    const double h = dt / static_cast<double>(n);
    double q = state.q;
    const auto decay = [&](double qq) { return -qq / tau; };
    for (std::int64_t k = 0; k < n; ++k) q = rk4_step(q, h, decay);
    out.q = std::clamp(q, 0.0, q_max);
    return out;
}

double conductance(const DeviceState& state, const DeviceParams& params) {
    return params.conductance_at(state.q);
}

double resistance(const DeviceState& state, const DeviceParams& params) {
    return params.resistance_at(state.q);
}

FluxModel FluxModel::from_currents(const DeviceParams& params, double i_read,
                                   double i_prog) {
    if (!(i_read > 0.0)) throw_usage("DOMAIN", "flux model requires i_read > 0");
    if (!(i_prog > 0.0)) throw_usage("DOMAIN", "flux model requires i_prog > 0");
    FluxModel m;
    m.k = params.geometry.l_x * params.geometry.l_y * i_read /
          (params.material.mu_e * i_prog);
    return m;
}

double memristance(double q, const FluxModel& model) {
    if (!(q > 0.0))
        throw_usage("DOMAIN", "ideal memristance undefined at zero charge");
    return model.k / q;
}

double memristance_rate(double t, const FluxModel& model, double i_prog) {
    if (!(t > 0.0)) throw_usage("DOMAIN", "memristance_rate requires t > 0");
    if (!(i_prog > 0.0)) throw_usage("DOMAIN", "memristance_rate requires i_prog > 0");
    return -model.k / (i_prog * t * t);
}

double flux(double q1, double q2, const FluxModel& model) {
    if (!(q1 > 0.0 && q2 > 0.0))
        throw_usage("DOMAIN", "flux differences need charges > 0");
    return model.k * std::log(q2 / q1);
}

}  // namespace ionx
