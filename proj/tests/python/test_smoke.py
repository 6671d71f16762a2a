import json
import math

import numpy as np
import pytest

import ionx


def test_module_surface():
    assert ionx.__version__ == "1.0.0"
    assert ionx.ELEMENTARY_CHARGE_C == pytest.approx(1.602176634e-19, rel=0)
    names = ionx.experiment_names()
    for name in ("s1", "s2", "retention", "iv", "sneak", "complexity"):
        assert name in names


def test_calibrated_device_anchors():
    p = ionx.paper_calibrated()
    state = ionx.DeviceState()
    assert ionx.resistance(state, p) == pytest.approx(1.0e6, rel=1e-12)
    assert p.max_conductance() == pytest.approx(1.0 / 550e3, rel=1e-12)
    assert p.geometry.cross_section_area() == pytest.approx(1e-8, rel=1e-12)
    i_p = ionx.programming_current(p, 3.6)
    assert i_p == pytest.approx(1.15356717648e-08, rel=1e-12)


def test_programming_follows_the_closed_form():
    p = ionx.paper_calibrated()
    i_p = ionx.programming_current(p, 3.6)
    q_max = p.material.q_max
    state = ionx.program_step(ionx.DeviceState(), p, 3.6, 25.0)
    expected = q_max * (1.0 - math.exp(-i_p * 25.0 / q_max))
    assert state.q == pytest.approx(expected, rel=1e-6)
    assert state.t == 25.0


def test_full_parallel_write_is_disturbance_free():
    p = ionx.paper_calibrated()
    topo = ionx.Topology(ionx.TopologyKind.PROPOSED_ISOLATED_LOOP, 4, 4)
    array = ionx.CrossbarArray(topo, p, 0.0)

    g_min, g_max = p.min_conductance(), p.max_conductance()
    fractions = np.linspace(0.1, 0.9, 16).reshape(4, 4)
    targets = g_min + (g_max - g_min) * fractions

    policy = ionx.WritePolicy(ionx.WritePolicyKind.FULL_PARALLEL, 3.6, 600.0)
    plan = ionx.plan_writes(targets, policy, p)
    assert plan.phase_count == 1
    report = ionx.execute_plan(array, plan, policy)
    assert report.disturbance_l1_total == 0.0
    assert report.target_error_max_rel < 1e-9
    np.testing.assert_allclose(report.achieved_g, targets, rtol=1e-9)


def test_read_mac_matches_numpy():
    p = ionx.paper_calibrated()
    topo = ionx.Topology(ionx.TopologyKind.CONVENTIONAL_SHARED_RAIL, 5, 3)
    array = ionx.CrossbarArray(topo, p, 0.0)
    rng = np.random.default_rng(11)
    q = p.material.q_max * rng.uniform(0.05, 0.95, size=(5, 3))
    array.set_charges(q)

    v = rng.uniform(0.05, 0.25, size=5)
    got = ionx.read_mac(array, v, ionx.ReadMode.IDEAL)
    want = array.conductance_matrix().T @ v
    np.testing.assert_allclose(got, want, rtol=1e-12)

    nodal = ionx.read_mac(array, v, ionx.ReadMode.FULL_NODAL)
    np.testing.assert_allclose(nodal, want, rtol=1e-9)


def test_traces_expose_columns_and_metadata():
    p = ionx.paper_calibrated()
    tr = ionx.run_s2_protocol(p, 3.6)
    assert tr.name == "s2"
    assert tr.columns == ["t_s", "segment", "v_p_V", "q_C", "R_ohm"]
    assert tr.row_count() == 661
    meta = json.loads(tr.metadata_json())
    assert meta["experiment"] == "s2"
    body = tr.csv()
    assert body.startswith("t_s,segment,v_p_V,q_C,R_ohm\n")


def test_fit_recovers_a_synthetic_slope():
    q = np.linspace(1e-8, 8e-7, 40)
    r = 2.5 / q + 50.0
    fit = ionx.fit_k_model(list(q), list(r), 0.0)
    assert not fit.degenerate
    assert fit.k == pytest.approx(2.5, rel=1e-9)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)


def test_errors_surface_as_ionx_error():
    p = ionx.paper_calibrated()
    p.material.q_max = 0.0
    with pytest.raises(ionx.Error):
        p.validate()
    with pytest.raises(ionx.Error):
        ionx.program_step(ionx.DeviceState(), ionx.paper_calibrated(), 3.6, -1.0)
    with pytest.raises(ionx.Error):
        ionx.CrossbarArray.from_json("{}")


def test_snapshot_json_round_trip():
    p = ionx.paper_calibrated()
    topo = ionx.Topology(ionx.TopologyKind.PROPOSED_ISOLATED_LOOP, 2, 2)
    array = ionx.CrossbarArray(topo, p, 0.5)
    array.set_charge(0, 1, 3e-7)
    back = ionx.CrossbarArray.from_json(array.to_json())
    np.testing.assert_array_equal(back.charge_matrix(), array.charge_matrix())
    assert back.wire_resistance == 0.5
