#include <algorithm>
#include <cmath>

#include "ionx/experiments.hpp"

namespace ionx {

FitResult fit_k_model(const std::vector<double>& q, const std::vector<double>& r,
                      double g0) {
    if (q.size() != r.size())
        throw_usage("SHAPE_MISMATCH", "fit needs matching q and R vectors");
    if (!(g0 >= 0.0)) throw_usage("PARAM_RANGE", "fit requires g0 >= 0");

    // Usable samples: positive charge and a resistance whose baseline-corrected
    // conductance is still positive. The corrected model is linear in 1/q:
    //   1/(1/R - g0) = k/q + b.
    std::vector<double> x, y;
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (!(q[i] > 0.0) || !(r[i] > 0.0)) continue;
        const double g_ion = 1.0 / r[i] - g0;
        if (!(g_ion > 0.0)) continue;
        x.push_back(1.0 / q[i]);
        y.push_back(1.0 / g_ion);
    }
    if (x.size() < 3)
        throw_usage("FIT_SAMPLES", "fit needs at least 3 usable samples, got " +
                                       std::to_string(x.size()));

    const auto n = static_cast<double>(x.size());
    double mean_x = 0.0, mean_y = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mean_x += x[i];
        mean_y += y[i];
    }
    mean_x /= n;
    mean_y /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mean_x) * (x[i] - mean_x);
        sxy += (x[i] - mean_x) * (y[i] - mean_y);
        syy += (y[i] - mean_y) * (y[i] - mean_y);
    }

    FitResult fit;
    if (sxx > 0.0) {
        fit.k = sxy / sxx;
        fit.intercept = mean_y - fit.k * mean_x;
    } else {
        // All samples share one charge; a 1/q slope is unidentifiable.
        fit.k = 0.0;
        fit.intercept = mean_y;
        fit.degenerate = true;
    }

    fit.residuals.resize(static_cast<Eigen::Index>(x.size()));
    double ss_res = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double res = y[i] - (fit.k * x[i] + fit.intercept);
        fit.residuals[static_cast<Eigen::Index>(i)] = res;
        ss_res += res * res;
    }

    if (syy > 0.0) {
        fit.r_squared = 1.0 - ss_res / syy;
        if (fit.r_squared < 0.0) fit.r_squared = 0.0;
        if (fit.r_squared > 1.0) fit.r_squared = 1.0;
    } else {
        // Constant corrected resistance: nothing for the 1/q term to explain.
        fit.r_squared = 0.0;
        fit.degenerate = true;
    }
    // A slope that moves the prediction by less than round-off across the
    // whole sampled range is noise, not a memristive signature.
    const double spread_x =
        *std::max_element(x.begin(), x.end()) - *std::min_element(x.begin(), x.end());
    if (std::fabs(fit.k) * spread_x <= 1e-9 * std::fabs(mean_y)) fit.degenerate = true;
    return fit;
}

FitResult fit_k_model(const Trace& trace, const DeviceParams& params,
                      double max_q_fraction) {
    params.validate();
    if (!(max_q_fraction > 0.0 && max_q_fraction <= 1.0))
        throw_usage("PARAM_RANGE", "max_q_fraction must lie in (0, 1]");
    const std::vector<double>& q_col = trace.column("q_C");
    const std::vector<double>& r_col = trace.column("R_ohm");

    const double q_cut = max_q_fraction * params.material.q_max;
    std::vector<double> q, r;
    for (std::size_t i = 0; i < q_col.size(); ++i)
        if (q_col[i] > 0.0 && q_col[i] < q_cut) {
            q.push_back(q_col[i]);
            r.push_back(r_col[i]);
        }
    return fit_k_model(q, r, params.material.g0);
}

}  // namespace ionx
