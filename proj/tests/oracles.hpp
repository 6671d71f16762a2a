#pragma once

// Test-side reference implementations, written independently of the library
// so the suites compare two derivations rather than one function with itself:
// adaptive quadrature, a dense multiply, hand solutions of the 2x2 shared-rail
// network, and the charge-transport time integrals.

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>

#include <Eigen/Dense>

namespace oracle {

// Deterministic LCG, distinct from the library's stream.
inline double urand(std::uint64_t& s) {
    s = s * 6364136223846793005ULL + 1442695040888963407ULL;
    return static_cast<double>(s >> 11) * 0x1.0p-53;
}

namespace detail {
inline double simpson(double fa, double fm, double fb, double h) {
    return (h / 6.0) * (fa + 4.0 * fm + fb);
}

inline double adaptive(const std::function<double(double)>& f, double a, double b,
                       double fa, double fm, double fb, double whole, double tol,
                       int depth) {
    const double m = 0.5 * (a + b);
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = simpson(fa, flm, fm, m - a);
    const double right = simpson(fm, frm, fb, b - m);
    const double err = left + right - whole;
    if (depth <= 0) throw std::runtime_error("quadrature recursion exhausted");
    if (std::fabs(err) <= 15.0 * tol) return left + right + err / 15.0;
    return adaptive(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
           adaptive(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}
}  // namespace detail

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double tol = 1e-13) {
    if (a == b) return 0.0;
    const double fa = f(a);
    const double fb = f(b);
    const double fm = f(0.5 * (a + b));
    const double whole = detail::simpson(fa, fm, fb, b - a);
    return detail::adaptive(f, a, b, fa, fm, fb, whole,
                            tol * std::max(1.0, std::fabs(whole)), 60);
}

// I_j = sum_i G(i, j) v_i, written as explicit loops.
inline Eigen::VectorXd dense_mac(const Eigen::MatrixXd& g, const Eigen::VectorXd& v) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(g.cols());
    for (Eigen::Index j = 0; j < g.cols(); ++j)
        for (Eigen::Index i = 0; i < g.rows(); ++i) out[j] += g(i, j) * v[i];
    return out;
}

// 2x2 shared-rail array, row 0 driven at v, column 0 at 0, the other two rails
// floating. The only sneak route is the series chain (0,1)-(1,1)-(1,0).
inline double series_sneak_current(double v, double r01, double r11, double r10) {
    return v / (r01 + r11 + r10);
}

// Free potentials of the same network by Cramer's rule on the two KCL
// equations:  (g01+g11) v_c1 - g11 v_r1 = g01 v
//             -g11 v_c1 + (g10+g11) v_r1 = 0
struct TwoByTwoSolution {
    double v_row1 = 0.0;
    double v_col1 = 0.0;
};

inline TwoByTwoSolution solve_2x2(double v, double g01, double g11, double g10) {
    const double a11 = g01 + g11;
    const double a12 = -g11;
    const double a22 = g10 + g11;
    const double det = a11 * a22 - a12 * a12;
    TwoByTwoSolution s;
    s.v_col1 = (g01 * v) * a22 / det;
    s.v_row1 = -(a12 * (g01 * v)) / det;
    return s;
}

// Time for the site-saturating fill dq/dt = i_p (1 - q/q_max) to carry the
// charge from q0 up to q1, by quadrature of dt = dq / (i_p (1 - q/q_max)).
inline double fill_time_quadrature(double q0, double q1, double i_p, double q_max) {
    return integrate([&](double q) { return 1.0 / (i_p * (1.0 - q / q_max)); }, q0, q1);
}

// Extraction dq/dt = -|i_p| q/q_max from q0 down to q1 (q1 < q0).
inline double drain_time_quadrature(double q0, double q1, double i_p_mag,
                                    double q_max) {
    return integrate([&](double q) { return q_max / (i_p_mag * q); }, q1, q0);
}

inline double centered_diff(const std::function<double(double)>& f, double x,
                            double h) {
    return (f(x + h) - f(x - h)) / (2.0 * h);
}

}  // namespace oracle
