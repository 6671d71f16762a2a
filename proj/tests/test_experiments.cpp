#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "ionx/experiments.hpp"
#include "oracles.hpp"

using namespace ionx;

namespace {

template <typename F>
std::string error_code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    return "<no error>";
}

std::filesystem::path scratch_dir(const char* leaf) {
    const auto dir = std::filesystem::temp_directory_path() / "ionx-exp-tests" / leaf;
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("potentiation run hits both resistance anchors") {
    const DeviceParams p = paper_calibrated();
    const Trace tr = run_s1_protocol(p);

    CHECK(tr.column_names() ==
          std::vector<std::string>{"cycle", "cumulative_t_s", "q_C", "R_ohm"});
    const std::vector<double>& r = tr.column("R_ohm");
    REQUIRE(r.size() >= 3);
    CHECK(r.front() == doctest::Approx(1.0e6).epsilon(1e-12));
    CHECK(r.back() == doctest::Approx(550.0e3).epsilon(0.02));
    for (std::size_t i = 1; i < r.size(); ++i) CHECK(r[i] < r[i - 1]);
    CHECK(tr.metadata().at("converged") == true);

    // Charge follows the saturating fill law cycle by cycle.
    const std::vector<double>& q = tr.column("q_C");
    const std::vector<double>& t = tr.column("cumulative_t_s");
    const double i_p = programming_current(p, 3.6);
    for (std::size_t i = 0; i < q.size(); i += 7) {
        const double want =
            p.material.q_max * (1.0 - std::exp(-i_p * t[i] / p.material.q_max));
        CHECK(q[i] == doctest::Approx(want).epsilon(1e-6));
    }
}

TEST_CASE("unsaturated potentiation samples recover the transport constant") {
    const DeviceParams p = paper_calibrated();
    // lx*ly/mu_e for the calibrated geometry; the slope the fit must recover.
    const double a = p.geometry.l_x * p.geometry.l_y / p.material.mu_e;
    CHECK(a == 1.0);

    const Trace tr = run_s1_protocol(p, 3.6, 0.5);
    const std::vector<double>& q = tr.column("q_C");
    const std::vector<double>& r = tr.column("R_ohm");

    int unsaturated = 0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        if (!(q[i] > 0.0) || q[i] >= 0.1 * p.material.q_max) continue;
        ++unsaturated;
        const double r_corrected = 1.0 / (1.0 / r[i] - p.material.g0);
        CHECK(r_corrected * q[i] == doctest::Approx(a).epsilon(0.01));
    }
    CHECK(unsaturated >= 5);

    const FitResult fit = fit_k_model(tr, p, 0.1);
    CHECK_FALSE(fit.degenerate);
    CHECK(fit.k == doctest::Approx(a).epsilon(0.01));
    CHECK(fit.r_squared >= 0.99);
    CHECK(std::fabs(fit.intercept) < 0.05 * a / (0.1 * p.material.q_max));
}

TEST_CASE("fit edge cases") {
    SUBCASE("constant corrected resistance is degenerate") {
        const std::vector<double> q = {1e-7, 2e-7, 3e-7, 4e-7};
        const std::vector<double> r(4, 5e5);
        const FitResult fit = fit_k_model(q, r, 0.0);
        CHECK(fit.degenerate);
        CHECK(fit.r_squared == 0.0);
    }
    SUBCASE("fewer than three usable samples") {
        CHECK(error_code_of([] {
                  fit_k_model(std::vector<double>{1e-7, 2e-7},
                              std::vector<double>{1e6, 5e5}, 0.0);
              }) == "FIT_SAMPLES");
        // Samples killed by the baseline correction do not count either.
        CHECK(error_code_of([] {
                  fit_k_model(std::vector<double>{1e-7, 2e-7, 3e-7},
                              std::vector<double>{1e6, 5e5, 2e5}, 1e-5);
              }) == "FIT_SAMPLES");
    }
    SUBCASE("mismatched vectors") {
        CHECK(error_code_of([] {
                  fit_k_model(std::vector<double>{1e-7},
                              std::vector<double>{1e6, 5e5}, 0.0);
              }) == "SHAPE_MISMATCH");
    }
    SUBCASE("exact synthetic samples recover slope and intercept") {
        std::vector<double> q, r;
        std::uint64_t s = 77;
        const double k_true = 2.5, b_true = 100.0;
        for (int i = 0; i < 30; ++i) {
            const double qq = 1e-8 + 9e-7 * oracle::urand(s);
            q.push_back(qq);
            r.push_back(k_true / qq + b_true);  // g0 = 0 keeps R uncorrected
        }
        const FitResult fit = fit_k_model(q, r, 0.0);
        CHECK(fit.k == doctest::Approx(k_true).epsilon(1e-9));
        CHECK(fit.intercept == doctest::Approx(b_true).epsilon(1e-6));
        CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(fit.residuals.cwiseAbs().maxCoeff() < 1e-3);
    }
}

TEST_CASE("program/hold/saturate/reverse sequence") {
    const DeviceParams p = paper_calibrated();
    const Trace tr = run_s2_protocol(p);

    const std::vector<double>& t = tr.column("t_s");
    const std::vector<double>& seg = tr.column("segment");
    const std::vector<double>& q = tr.column("q_C");
    const std::vector<double>& r = tr.column("R_ohm");
    REQUIRE(t.size() == 661);
    CHECK(t.front() == 0.0);
    CHECK(t.back() == 660.0);

    const auto segment_at = [&](double when) {
        for (std::size_t i = 0; i < t.size(); ++i)
            if (t[i] == when) return seg[i];
        FAIL("missing sample at t=", when);
        return -1.0;
    };
    CHECK(segment_at(60.0) == 0.0);
    CHECK(segment_at(61.0) == 1.0);
    CHECK(segment_at(360.0) == 1.0);
    CHECK(segment_at(361.0) == 2.0);
    CHECK(segment_at(600.0) == 2.0);
    CHECK(segment_at(601.0) == 3.0);

    // Hold segment: zero bias with retention disabled keeps the charge put.
    double q_hold = -1.0, r_600 = 0.0, r_660 = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (seg[i] == 1.0) {
            if (q_hold < 0.0) q_hold = q[i];
            CHECK(std::fabs(q[i] - q_hold) <= 1e-12 * q_hold);
        }
        if (t[i] == 600.0) r_600 = r[i];
        if (t[i] == 660.0) r_660 = r[i];
    }
    CHECK(q_hold > 0.0);
    CHECK(r_660 > r_600);

    // The saturation segment ends near the low-resistance plateau.
    CHECK(r_600 == doctest::Approx(550e3).epsilon(0.02));
}

TEST_CASE("retention relaxation") {
    const DeviceParams p = paper_calibrated();

    SUBCASE("48 hour window climbs back near the high-resistance state") {
        const Trace tr = run_retention(p);
        const std::vector<double>& t = tr.column("t_s");
        const std::vector<double>& r = tr.column("R_ohm");
        REQUIRE(r.size() > 10);
        for (std::size_t i = 1; i < r.size(); ++i) CHECK(r[i] >= r[i - 1]);
        CHECK(std::fabs(r.back() - 1.0e6) / 1.0e6 < 0.05);
        CHECK(t.front() == 0.0);
        CHECK(t.back() == doctest::Approx(172800.0).epsilon(1e-12));

        // The decay follows q0 * exp(-t / tau) on the sampling grid.
        const std::vector<double>& q = tr.column("q_C");
        const double q0 = q.front();
        for (std::size_t i = 0; i < q.size(); i += 17) {
            const double want = q0 * std::exp(-t[i] / p.material.tau_retention);
            CHECK(q[i] == doctest::Approx(want).epsilon(1e-9));
        }
    }
    SUBCASE("zero time constant freezes the state") {
        DeviceParams frozen = p;
        frozen.material.tau_retention = 0.0;
        const Trace tr = run_retention(frozen);
        const std::vector<double>& r = tr.column("R_ohm");
        for (std::size_t i = 1; i < r.size(); ++i)
            CHECK(std::fabs(r[i] - r.front()) <= 1e-12 * r.front());
    }
}

TEST_CASE("read sweeps are conservative and ohmic") {
    const DeviceParams p = paper_calibrated();
    const Trace tr = run_iv_sweep(p);

    const std::vector<double>& level = tr.column("level");
    const std::vector<double>& q = tr.column("q_C");
    const std::vector<double>& leg = tr.column("leg");
    const std::vector<double>& v = tr.column("V_V");
    const std::vector<double>& cur = tr.column("I_A");

    // Forward and retrace branches coincide bit for bit at equal voltage.
    for (std::size_t a = 0; a < v.size(); ++a)
        for (std::size_t b = a + 1; b < v.size(); ++b)
            if (level[a] == level[b] && v[a] == v[b]) CHECK(cur[a] == cur[b]);

    // Every sample sits on I = G(q) V within round-off.
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double g = p.conductance_at(q[i]);
        CHECK(std::fabs(cur[i] - g * v[i]) <= 1e-9 * std::fabs(g * v[i]) + 1e-30);
    }

    // Higher charge levels read as strictly higher slopes.
    double g_prev = 0.0;
    for (const double f : {0.2, 0.5, 0.8}) {
        const double g = p.conductance_at(f * p.material.q_max);
        CHECK(g > g_prev);
        g_prev = g;
    }
    CHECK(leg.size() == v.size());
}

TEST_CASE("shared rails disturb while isolated loops stay exact") {
    const DeviceParams p = paper_calibrated();
    double prev_l1 = -1.0;
    for (const int m : {2, 4, 8}) {
        const Trace tr = run_sneak_demo(m, 99, p);
        const std::vector<double>& topo = tr.column("topology_id");
        const std::vector<double>& l1 = tr.column("dq_l1_C");
        const std::vector<double>& sneak = tr.column("max_sneak_A");

        double conventional_l1 = 0.0, conventional_sneak = 0.0;
        for (std::size_t i = 0; i < topo.size(); ++i) {
            if (topo[i] == 1.0) {
                CHECK(l1[i] == 0.0);
                CHECK(sneak[i] == 0.0);
            } else {
                conventional_l1 += l1[i];
                conventional_sneak = std::max(conventional_sneak, sneak[i]);
            }
        }
        // The threshold-free calibrated device leaks on every shared-rail phase.
        CHECK(conventional_l1 > 0.0);
        CHECK(conventional_sneak > 0.0);
        CHECK(conventional_l1 > prev_l1);
        prev_l1 = conventional_l1;

        CHECK(tr.metadata().at("proposed").at("disturbance_l1_C") == 0.0);
        CHECK(tr.metadata().at("conventional").at("disturbance_l1_C").get<double>() >
              0.0);
    }
}

TEST_CASE("schedule cost laws per policy") {
    const DeviceParams p = paper_calibrated();
    const std::vector<int> sizes = {1, 2, 4, 8, 16};
    const Trace tr = run_complexity_sweep(sizes, 7, p);

    const std::vector<double>& m = tr.column("m");
    const std::vector<double>& policy = tr.column("policy_id");
    const std::vector<double>& phases = tr.column("phase_count");
    const std::vector<double>& total = tr.column("total_pulse_time_s");
    REQUIRE(m.size() == sizes.size() * 4);

    for (std::size_t i = 0; i < m.size(); ++i) {
        const int mm = static_cast<int>(m[i]);
        const int id = static_cast<int>(policy[i]);
        const double want = id == 0 || id == 3 ? double(mm) * mm
                            : id == 1          ? double(mm)
                                               : 1.0;
        CHECK(phases[i] == want);
        CHECK(total[i] > 0.0);
    }

    // Parallel schedules never take longer than sequential ones.
    for (const int size : sizes) {
        double t_seq = 0.0, t_full = 0.0;
        for (std::size_t i = 0; i < m.size(); ++i) {
            if (static_cast<int>(m[i]) != size) continue;
            if (policy[i] == 0.0) t_seq = total[i];
            if (policy[i] == 2.0) t_full = total[i];
        }
        CHECK(t_full <= t_seq + 1e-12);
    }
}

TEST_CASE("seeded uniform stream is deterministic and bounded") {
    std::uint64_t a = 12345, b = 12345, c = 54321;
    bool all_equal = true;
    bool any_differs = false;
    for (int i = 0; i < 1000; ++i) {
        const double ua = uniform01(a);
        const double ub = uniform01(b);
        const double uc = uniform01(c);
        CHECK(ua >= 0.0);
        CHECK(ua < 1.0);
        all_equal = all_equal && (ua == ub);
        any_differs = any_differs || (ua != uc);
    }
    CHECK(all_equal);
    CHECK(any_differs);
}

TEST_CASE("trace integrity rules") {
    SUBCASE("duplicate column names are rejected") {
        Trace tr("t");
        tr.add_column("a");
        CHECK(error_code_of([&] { tr.add_column("a"); }) == "TRACE_COLUMN");
    }
    SUBCASE("time axis must increase strictly") {
        Trace tr("t");
        tr.add_column("t_s");
        tr.add_column("x");
        tr.set_time_column("t_s");
        tr.append_row({0.0, 1.0});
        tr.append_row({1.0, 2.0});
        CHECK(error_code_of([&] { tr.append_row({1.0, 3.0}); }) == "TRACE_TIME");
    }
    SUBCASE("row arity must match the header") {
        Trace tr("t");
        tr.add_column("a");
        tr.add_column("b");
        CHECK(error_code_of([&] { tr.append_row({1.0}); }) == "TRACE_SHAPE");
    }
    SUBCASE("unknown column lookups fail by name") {
        Trace tr("t");
        tr.add_column("a");
        CHECK(error_code_of([&] { tr.column("missing"); }) == "UNKNOWN_COLUMN");
    }
}

TEST_CASE("trace files round-trip through CSV and sidecar") {
    Trace tr("roundtrip");
    tr.add_column("t_s");
    tr.add_column("value_A");
    tr.set_time_column("t_s");
    std::uint64_t s = 3;
    double t = 0.0;
    for (int i = 0; i < 50; ++i) {
        t += 0.25 + oracle::urand(s);
        tr.append_row({t, std::ldexp(oracle::urand(s) - 0.5, -17)});
    }
    tr.metadata()["note"] = "roundtrip fixture";

    const auto dir = scratch_dir("roundtrip");
    const TraceFiles files = write_trace_files(tr, dir, "fixture");
    CHECK(files.csv.filename() == "fixture.csv");
    CHECK(files.sidecar.filename() == "fixture.json");

    const Trace back = read_trace_csv(files.csv);
    REQUIRE(back.column_names() == tr.column_names());
    REQUIRE(back.row_count() == tr.row_count());
    for (const std::string& col : tr.column_names()) {
        const auto& want = tr.column(col);
        const auto& got = back.column(col);
        for (std::size_t i = 0; i < want.size(); ++i) CHECK(got[i] == want[i]);
    }

    std::ifstream side(files.sidecar);
    REQUIRE(side.good());
    const nlohmann::json meta = nlohmann::json::parse(side);
    CHECK(meta.at("trace") == "roundtrip");
    CHECK(meta.at("rows") == 50);
    CHECK(meta.at("metadata").at("note") == "roundtrip fixture");

    // Same content serializes to an identical byte stream.
    CHECK(tr.csv_body() == read_trace_csv(files.csv).csv_body());
    std::filesystem::remove_all(dir);
}
