"""DC machinery: flows, sensitivities, islanding, the full-network helper."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bandwidth_engine.dc_network import (
    BalanceError,
    FullLine,
    FullNetwork,
    IslandingError,
    TopologyState,
    compute_ptdf,
    dc_flows,
)
from bandwidth_engine.fixtures import reference_full_network, reference_zone_dict
from bandwidth_engine.grid_model import zone_from_dict


def _toy_zone_doc():
    """Two buses, one line, radial boundary at b0 (all power exits there)."""
    return {
        "base_mva": 100.0,
        "timestep_hours": 1.0,
        "curative_duration_hours": 0.25,
        "battery": {"bus": "b1", "pmin_mw": -10.0, "pmax_mw": 10.0, "capacity_mwh": 20.0},
        "buses": [{"id": "b0"}, {"id": "b1"}],
        "lines": [
            {
                "id": "l0",
                "from_bus": "b0",
                "to_bus": "b1",
                "reactance_pu": 0.05,
                "ratings_summer": {"permanent_mw": 15.0, "long_term_mw": 18.0, "immediate_mw": 25.0},
                "ratings_winter": {"permanent_mw": 15.0, "long_term_mw": 18.0, "immediate_mw": 25.0},
            }
        ],
        "outbound_lines": [
            {
                "id": "ob",
                "boundary_bus": "b0",
                "ptdf_normal": {"b0": 1.0, "b1": 1.0},
                "ptdf_contingency": {},
            }
        ],
        "contingencies": [],
    }


def test_zero_case(zone):
    topo = TopologyState.base(zone)
    flows = dc_flows(zone, topo, {b: 0.0 for b in zone.bus_ids()}, {"alpha-west": 0.0, "delta-east": 0.0})
    assert all(abs(f) < 1e-12 for f in flows.values())


def test_two_bus_conservation():
    zone = zone_from_dict(_toy_zone_doc())
    topo = TopologyState.base(zone)
    flows = dc_flows(zone, topo, {"b0": 0.0, "b1": 10.0}, {"ob": 10.0})
    # 10 MW injected at b1 must cross l0 toward b0 (oriented b0 -> b1: negative)
    assert flows["l0"] == pytest.approx(-10.0, abs=1e-9)


def test_worked_flow_value(zone, summer_day):
    row = summer_day[7]
    flows = dc_flows(zone, TopologyState.base(zone), row.injections_mw, row.ref_normal_mw)
    assert flows["gamma-delta"] == pytest.approx(78.0, abs=1e-7)  # permanent 77 + 1


def test_imbalance_rejected(zone):
    topo = TopologyState.base(zone)
    inj = {b: 0.0 for b in zone.bus_ids()}
    inj["gamma"] = 5.0
    with pytest.raises(BalanceError, match="imbalance"):
        dc_flows(zone, topo, inj, {"alpha-west": 0.0, "delta-east": 0.0})


def test_island_imbalance_names_island(zone, winter_day):
    row = winter_day[0]
    topo = TopologyState.for_contingency(zone, "gamma-delta-outage")
    refs = dict(row.ref_contingency_mw["gamma-delta-outage"])
    refs["delta-east"] += 3.0  # break only the delta island
    with pytest.raises(BalanceError, match="delta"):
        dc_flows(zone, topo, row.injections_mw, refs)


def test_effective_sensitivity_base(zone):
    ptdf = compute_ptdf(zone, TopologyState.base(zone))
    assert ptdf.factor("gamma-delta", "gamma") == pytest.approx(0.6, abs=1e-9)
    assert ptdf.factor("beta-gamma", "gamma") == pytest.approx(-0.4, abs=1e-9)
    assert ptdf.factor("alpha-beta", "gamma") == pytest.approx(-0.4, abs=1e-9)
    # outbound factors echo the recorded zone data
    assert ptdf.factor("delta-east", "gamma") == pytest.approx(0.6, abs=1e-9)


def test_effective_sensitivity_after_outage(zone):
    ptdf = compute_ptdf(zone, TopologyState.for_contingency(zone, "gamma-delta-outage"))
    # all battery power exits through alpha once gamma-delta is out
    assert abs(ptdf.factor("alpha-beta", "gamma")) == pytest.approx(1.0, abs=1e-9)
    assert abs(ptdf.factor("beta-gamma", "gamma")) == pytest.approx(1.0, abs=1e-9)


def test_slack_self_transfer_is_zero():
    full = reference_full_network()
    sens = full.injection_sensitivity("east")
    assert all(v == 0.0 for v in sens.values())


def test_ptdf_consistency_with_flow_resolve(zone, summer_day):
    """Flows predicted via the sensitivity matrix match a re-solve to 1e-6."""
    row = summer_day[7]
    rng = np.random.default_rng(3)
    topo = TopologyState.base(zone)
    base = dc_flows(zone, topo, row.injections_mw, row.ref_normal_mw)
    ptdf = compute_ptdf(zone, topo)
    for _ in range(10):
        bus = zone.bus_ids()[rng.integers(0, 4)]
        delta = float(rng.uniform(-8, 8))
        inj = dict(row.injections_mw)
        inj[bus] += delta
        refs = {
            o.id: row.ref_normal_mw[o.id] + o.ptdf_normal[bus] * delta
            for o in zone.outbound_lines
        }
        resolved = dc_flows(zone, topo, inj, refs)
        for lid in resolved:
            predicted = base[lid] + ptdf.factor(lid, bus) * delta
            assert resolved[lid] == pytest.approx(predicted, abs=1e-6)


def test_outage_ptdf_matches_full_network_difference(zone):
    """Recomputed outage sensitivities equal brute-force full-grid differences."""
    full = reference_full_network().without("gamma-delta")
    ptdf = compute_ptdf(zone, TopologyState.for_contingency(zone, "gamma-delta-outage"))
    for bus in zone.bus_ids():
        sens = full.injection_sensitivity(bus)
        for lid in ("alpha-beta", "beta-gamma"):
            assert ptdf.factor(lid, bus) == pytest.approx(sens[lid], abs=1e-8)


@settings(max_examples=30, deadline=None)
@given(
    a=st.floats(-20, 20),
    b=st.floats(-20, 20),
    scale=st.floats(0.1, 3.0),
)
def test_superposition(zone, a, b, scale):
    """dc_flows is linear in its injections."""
    topo = TopologyState.base(zone)

    def flows_for(g_inj):
        inj = {"alpha": 0.0, "beta": 0.0, "gamma": g_inj, "delta": 0.0}
        refs = {
            o.id: o.ptdf_normal["gamma"] * g_inj for o in zone.outbound_lines
        }
        return dc_flows(zone, topo, inj, refs)

    fa, fb = flows_for(a), flows_for(b)
    fab = flows_for(scale * a + b)
    for lid in fa:
        assert fab[lid] == pytest.approx(scale * fa[lid] + fb[lid], abs=1e-7)


def test_angle_reference_choice_is_unobservable(zone, summer_day):
    """Relabeling buses (which moves the per-island reference) leaves flows unchanged."""
    row = summer_day[7]
    base_flows = dc_flows(zone, TopologyState.base(zone), row.injections_mw, row.ref_normal_mw)

    rename = {"alpha": "z-alpha", "beta": "y-beta", "gamma": "x-gamma", "delta": "w-delta"}
    doc = reference_zone_dict()
    doc["battery"]["bus"] = rename["gamma"]
    for b in doc["buses"]:
        b["id"] = rename[b["id"]]
    for l in doc["lines"]:
        l["from_bus"] = rename[l["from_bus"]]
        l["to_bus"] = rename[l["to_bus"]]
    for o in doc["outbound_lines"]:
        o["boundary_bus"] = rename[o["boundary_bus"]]
        o["ptdf_normal"] = {rename[k]: v for k, v in o["ptdf_normal"].items()}
        o["ptdf_contingency"] = {
            c: {rename[k]: v for k, v in m.items()} for c, m in o["ptdf_contingency"].items()
        }
    relabeled = zone_from_dict(doc)
    flows2 = dc_flows(
        relabeled,
        TopologyState.base(relabeled),
        {rename[k]: v for k, v in row.injections_mw.items()},
        row.ref_normal_mw,
    )
    for lid in base_flows:
        assert flows2[lid] == pytest.approx(base_flows[lid], abs=1e-9)


def test_island_without_outbound_rejected_in_ptdf():
    doc = _toy_zone_doc()
    # second, disconnected pair would be rejected at load; instead drop the
    # only outbound line's sensitivity consistency to trigger the check
    doc["outbound_lines"][0]["ptdf_normal"] = {"b0": 1.0, "b1": 0.9}
    from bandwidth_engine.grid_model import ZoneValidationError

    with pytest.raises(ZoneValidationError, match="sum to"):
        zone_from_dict(doc)


def test_full_network_component_balance():
    net = FullNetwork(
        ("a", "b", "c", "d"),
        (FullLine("ab", "a", "b", 0.1), FullLine("cd", "c", "d", 0.1)),
        "a",
    )
    flows = net.flows({"b": 5.0, "c": 2.0, "d": -2.0})
    assert flows["ab"] == pytest.approx(-5.0)
    assert flows["cd"] == pytest.approx(2.0)
    with pytest.raises(BalanceError):
        net.flows({"c": 1.0})
    with pytest.raises(IslandingError):
        net.injection_sensitivity("c")
