#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <set>
#include <sstream>

#include "ionx/write.hpp"
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

Eigen::MatrixXd random_targets(const DeviceParams& p, int m, int n,
                               std::uint64_t seed) {
    const double g_min = p.min_conductance();
    const double span = p.max_conductance() - g_min;
    Eigen::MatrixXd g(m, n);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
            g(i, j) = g_min + span * (0.05 + 0.9 * oracle::urand(seed));
    return g;
}

}  // namespace

TEST_CASE("plans group cells according to the policy") {
    const DeviceParams p = paper_calibrated();
    const Eigen::MatrixXd targets = random_targets(p, 4, 4, 2);
    WritePolicy pol;

    pol.kind = WritePolicyKind::SequentialCellwise;
    CHECK(plan_writes(targets, pol, p).phases.size() == 16);
    pol.kind = WritePolicyKind::RowParallel;
    CHECK(plan_writes(targets, pol, p).phases.size() == 4);
    pol.kind = WritePolicyKind::FullParallel;
    CHECK(plan_writes(targets, pol, p).phases.size() == 1);
    pol.kind = WritePolicyKind::HalfSelectV2;
    CHECK(plan_writes(targets, pol, p).phases.size() == 16);

    // Degenerate 1x1 arrays collapse every policy to a single phase.
    const Eigen::MatrixXd one = random_targets(p, 1, 1, 3);
    for (const auto kind :
         {WritePolicyKind::SequentialCellwise, WritePolicyKind::RowParallel,
          WritePolicyKind::FullParallel, WritePolicyKind::HalfSelectV2}) {
        pol.kind = kind;
        CHECK(plan_writes(one, pol, p).phases.size() == 1);
    }

    // Every cell appears exactly once regardless of grouping.
    pol.kind = WritePolicyKind::RowParallel;
    const WritePlan plan = plan_writes(targets, pol, p);
    std::set<CellIndex> seen;
    for (const WritePhase& ph : plan.phases)
        for (const PlannedPulse& pulse : ph.pulses)
            CHECK(seen.insert(pulse.cell).second);
    CHECK(seen.size() == 16);
}

TEST_CASE("unreachable targets are listed") {
    const DeviceParams p = paper_calibrated();
    Eigen::MatrixXd targets = random_targets(p, 2, 2, 4);
    targets(0, 1) = 2.0 * p.max_conductance();
    targets(1, 0) = -1.0;
    WritePolicy pol;
    try {
        plan_writes(targets, pol, p);
        FAIL("expected UNREACHABLE_TARGET");
    } catch (const Error& e) {
        CHECK(e.code() == "UNREACHABLE_TARGET");
        CHECK(std::string(e.what()).find("(0,1)") != std::string::npos);
        CHECK(std::string(e.what()).find("(1,0)") != std::string::npos);
    }
}

TEST_CASE("pulse width inversion") {
    const DeviceParams p = paper_calibrated();
    const double q_max = p.material.q_max;
    const double i_p = programming_current(p, 3.6);

    SUBCASE("no-op and landmark widths") {
        CHECK(pulse_width_for_target(0.3 * q_max, 0.3 * q_max, p, 3.6) == 0.0);
        // Reaching 1 - 1/e of capacity from empty takes exactly q_max / I_p.
        const double t = pulse_width_for_target(
            0.0, q_max * (1.0 - std::exp(-1.0)), p, 3.6);
        CHECK(t == doctest::Approx(q_max / i_p).epsilon(1e-12));
    }
    SUBCASE("width equals the transport-time quadrature") {
        std::uint64_t s = 31;
        for (int k = 0; k < 40; ++k) {
            const double a = q_max * (0.05 + 0.9 * oracle::urand(s));
            const double b = q_max * (0.05 + 0.9 * oracle::urand(s));
            if (a == b) continue;
            if (b > a) {
                const double want = oracle::fill_time_quadrature(a, b, i_p, q_max);
                CHECK(pulse_width_for_target(a, b, p, 3.6) ==
                      doctest::Approx(want).epsilon(1e-9));
            } else {
                const double want =
                    oracle::drain_time_quadrature(a, b, std::fabs(i_p), q_max);
                CHECK(pulse_width_for_target(a, b, p, -3.6) ==
                      doctest::Approx(want).epsilon(1e-9));
            }
        }
    }
    SUBCASE("polarity and asymptote errors") {
        CHECK(error_code_of([&] { pulse_width_for_target(0.2 * q_max, 0.5 * q_max, p, -3.6); }) ==
              "PULSE_POLARITY");
        CHECK(error_code_of([&] { pulse_width_for_target(0.5 * q_max, 0.2 * q_max, p, 3.6); }) ==
              "PULSE_POLARITY");
        CHECK(error_code_of([&] { pulse_width_for_target(0.0, q_max, p, 3.6); }) ==
              "PULSE_UNBOUNDED");
        CHECK(error_code_of([&] { pulse_width_for_target(0.5 * q_max, 0.0, p, -3.6); }) ==
              "PULSE_UNBOUNDED");
        CHECK(error_code_of([&] { pulse_width_for_target(2.0 * q_max, 0.0, p, -3.6); }) ==
              "CHARGE_RANGE");
    }
    SUBCASE("forward simulation round-trips the width") {
        std::uint64_t s = 8;
        for (int k = 0; k < 20; ++k) {
            const double a = q_max * (0.05 + 0.9 * oracle::urand(s));
            const double b = q_max * (0.05 + 0.9 * oracle::urand(s));
            if (a == b) continue;
            const double v = b > a ? 3.6 : -3.6;
            const double w = pulse_width_for_target(a, b, p, v);
            const DeviceState out = program_step({a, 0.0}, p, v, w);
            CHECK(std::fabs(out.q - b) <= 1e-3 * q_max);
        }
    }
}

TEST_CASE("full-parallel write on the isolated-loop topology") {
    const DeviceParams p = paper_calibrated();
    CrossbarArray array(Topology{TopologyKind::ProposedIsolatedLoop, 4, 4}, p);
    const Eigen::MatrixXd targets = random_targets(p, 4, 4, 11);
    WritePolicy pol;
    pol.kind = WritePolicyKind::FullParallel;

    const Eigen::MatrixXd q_before = array.charge_matrix();
    const WritePlan plan = plan_writes(targets, pol, p);
    const WriteReport rep = execute_plan(array, plan, pol);

    CHECK(rep.phases_planned == 1);
    CHECK(rep.phases_executed == 1);
    CHECK(rep.target_error_max_rel < 1e-9);
    CHECK(rep.disturbance_l1_total == 0.0);
    CHECK(rep.disturbance_max == 0.0);
    CHECK(rep.phases.at(0).max_sneak_current == 0.0);
    // Phase duration is the widest pulse of the batch.
    double want_duration = 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            want_duration = std::max(
                want_duration,
                pulse_width_for_target(q_before(i, j),
                                       p.charge_for_conductance(targets(i, j)), p, 3.6));
    CHECK(rep.phases.at(0).duration == doctest::Approx(want_duration).epsilon(1e-12));
}

TEST_CASE("sequential and full-parallel agree bit for bit on isolated loops") {
    const DeviceParams p = paper_calibrated();
    const Eigen::MatrixXd targets = random_targets(p, 3, 5, 19);

    CrossbarArray seq(Topology{TopologyKind::ProposedIsolatedLoop, 3, 5}, p);
    CrossbarArray par(Topology{TopologyKind::ProposedIsolatedLoop, 3, 5}, p);
    WritePolicy pol;
    pol.kind = WritePolicyKind::SequentialCellwise;
    execute_plan(seq, plan_writes(targets, pol, p), pol);
    pol.kind = WritePolicyKind::FullParallel;
    execute_plan(par, plan_writes(targets, pol, p), pol);

    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 5; ++j) CHECK(seq.cell(i, j).q == par.cell(i, j).q);
}

TEST_CASE("policy and topology pairings are enforced") {
    const DeviceParams p = paper_calibrated();
    const Eigen::MatrixXd targets = random_targets(p, 2, 2, 23);
    CrossbarArray conventional(Topology{TopologyKind::ConventionalSharedRail, 2, 2}, p);
    CrossbarArray proposed(Topology{TopologyKind::ProposedIsolatedLoop, 2, 2}, p);
    WritePolicy pol;

    pol.kind = WritePolicyKind::FullParallel;
    const WritePlan fp = plan_writes(targets, pol, p);
    CHECK(error_code_of([&] { execute_plan(conventional, fp, pol); }) ==
          "POLICY_TOPOLOGY_MISMATCH");

    pol.kind = WritePolicyKind::HalfSelectV2;
    const WritePlan hs = plan_writes(targets, pol, p);
    CHECK(error_code_of([&] { execute_plan(proposed, hs, pol); }) ==
          "POLICY_TOPOLOGY_MISMATCH");

    WritePolicy other;
    other.kind = WritePolicyKind::SequentialCellwise;
    CHECK(error_code_of([&] { execute_plan(proposed, hs, other); }) ==
          "PLAN_POLICY_MISMATCH");

    CrossbarArray small(Topology{TopologyKind::ProposedIsolatedLoop, 1, 2}, p);
    pol.kind = WritePolicyKind::FullParallel;
    CHECK(error_code_of([&] { execute_plan(small, fp, pol); }) == "SHAPE_MISMATCH");

    WritePlan dup = fp;
    dup.phases.push_back(dup.phases.front());
    CHECK(error_code_of([&] { execute_plan(proposed, dup, pol); }) == "PLAN_INVALID");
}

TEST_CASE("writing the current state is a no-op") {
    const DeviceParams p = paper_calibrated();
    CrossbarArray array(Topology{TopologyKind::ProposedIsolatedLoop, 3, 3}, p);
    // Settle on a charge_for_conductance fixpoint so targets match exactly.
    Eigen::MatrixXd q0 = random_targets(p, 3, 3, 5);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            array.set_charge(i, j, p.charge_for_conductance(q0(i, j)));
    const Eigen::MatrixXd targets = array.conductance_matrix();
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            array.set_charge(i, j, p.charge_for_conductance(targets(i, j)));
    const Eigen::MatrixXd before = array.charge_matrix();

    WritePolicy pol;
    pol.kind = WritePolicyKind::FullParallel;
    const WriteReport rep = execute_plan(array, plan_writes(targets, pol, p), pol);
    CHECK(rep.phases_executed == 0);
    CHECK(rep.total_pulse_time == 0.0);
    CHECK((array.charge_matrix() - before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("half-select guard voltage splits on the write threshold") {
    DeviceParams p = paper_calibrated();
    const Eigen::MatrixXd targets = random_targets(p, 3, 3, 29);
    WritePolicy pol;
    pol.kind = WritePolicyKind::HalfSelectV2;

    SUBCASE("threshold above V/2 keeps half-selected cells silent") {
        p.write_threshold = 0.6 * pol.pulse_voltage;
        CrossbarArray array(Topology{TopologyKind::ConventionalSharedRail, 3, 3}, p);
        const WriteReport rep = execute_plan(array, plan_writes(targets, pol, p), pol);
        CHECK(rep.disturbance_l1_total == 0.0);
        CHECK(rep.target_error_max_rel < 1e-9);
        CHECK(rep.phases_executed == 9);
    }
    SUBCASE("threshold-less device accumulates half-select disturbance") {
        p.write_threshold = 0.0;
        CrossbarArray array(Topology{TopologyKind::ConventionalSharedRail, 3, 3}, p);
        const WriteReport rep = execute_plan(array, plan_writes(targets, pol, p), pol);
        CHECK(rep.disturbance_l1_total > 0.0);
        CHECK(rep.disturbance_max > 0.0);
    }
}

TEST_CASE("sequential shared-rail write disturbs through the sneak path") {
    const DeviceParams p = paper_calibrated();
    CrossbarArray array(Topology{TopologyKind::ConventionalSharedRail, 2, 2}, p);
    // Only the last-scheduled cell moves, so the sneak disturbance of the
    // other three can never be repaired by a later phase.
    Eigen::MatrixXd targets = array.conductance_matrix();
    targets(1, 1) = 0.9 * p.max_conductance();

    WritePolicy pol;
    pol.kind = WritePolicyKind::SequentialCellwise;
    const Eigen::MatrixXd before = array.charge_matrix();
    const WriteReport rep = execute_plan(array, plan_writes(targets, pol, p), pol);

    CHECK(rep.phases_executed == 1);
    CHECK(rep.phases.at(3).max_sneak_current > 0.0);
    CHECK(rep.disturbance_l1_total > 0.0);
    // The disturbance rows cover exactly the three non-pulsed cells.
    CHECK(rep.disturbances.size() == 3);
    for (const CellDelta& d : rep.disturbances) CHECK(d.phase == 3);

    std::ostringstream csv;
    write_disturbance_csv(rep, csv);
    CHECK(csv.str().rfind("phase,cell_row,cell_col,dq_C,G_S\n", 0) == 0);
    CHECK((array.charge_matrix() - before).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("row-parallel release keeps finished columns from overshooting") {
    const DeviceParams p = paper_calibrated();
    CrossbarArray array(Topology{TopologyKind::ConventionalSharedRail, 1, 3}, p);
    Eigen::MatrixXd targets(1, 3);
    targets(0, 0) = p.conductance_at(0.2 * p.material.q_max);
    targets(0, 1) = p.conductance_at(0.5 * p.material.q_max);
    targets(0, 2) = p.conductance_at(0.8 * p.material.q_max);

    WritePolicy pol;
    pol.kind = WritePolicyKind::RowParallel;
    const WriteReport rep = execute_plan(array, plan_writes(targets, pol, p), pol);
    CHECK(rep.phases_planned == 1);
    CHECK(rep.phases_executed == 1);
    // The slowest cell sets the phase duration and lands on target.
    const double q2 = array.cell(0, 2).q;
    CHECK(std::fabs(q2 - 0.8 * p.material.q_max) <= 1e-3 * p.material.q_max);
    // Released columns float and may drift, but never above capacity.
    for (int j = 0; j < 3; ++j) {
        CHECK(array.cell(0, j).q >= 0.0);
        CHECK(array.cell(0, j).q <= p.material.q_max);
    }
}

TEST_CASE("report serialization carries the headline numbers") {
    const DeviceParams p = paper_calibrated();
    CrossbarArray array(Topology{TopologyKind::ProposedIsolatedLoop, 2, 2}, p);
    WritePolicy pol;
    pol.kind = WritePolicyKind::FullParallel;
    const WriteReport rep =
        execute_plan(array, plan_writes(random_targets(p, 2, 2, 31), pol, p), pol);
    const nlohmann::json j = rep.to_json();
    CHECK(j.at("phases_planned") == 1);
    CHECK(j.at("phases_executed") == 1);
    CHECK(j.at("achieved_G_S").size() == 2);
    CHECK(j.at("phases").size() == 1);
    CHECK(j.at("disturbance_l1_C") == 0.0);
}
