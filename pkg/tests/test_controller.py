import pytest
from hypothesis import given, settings, strategies as st

from conftest import flow, state_with
from flowgate.controller import (
    NO_ALTERNATE_PATH,
    REROUTE,
    Controller,
    InvalidInterval,
    MonitorConfig,
    MonitorWindow,
    PortDelta,
    Strategy,
    by_severity,
    identify_bottlenecks,
    port_utilization,
    proactive_tick,
    reactive_tick,
    select_largest_flow,
)
from flowgate.dataplane import FlowCounters, step
from flowgate.scenario import parse_scenario
from flowgate.simulation import simulate
from flowgate.topology import Path, builtin_topology, load_topology


def delta(lid, pct, speed=10e6, interval=10.0, drops=0.0, switch=True):
    return PortDelta(lid, speed, pct / 100 * speed * interval / 8, drops, interval, switch)


@pytest.mark.parametrize("tx,speed,want", [
    (0, 10e6, 0.0), (0, 20e6, 0.0),
    (8.75e6, 10e6, 70.0), (8.75e6, 20e6, 35.0),
    (12.5e6, 10e6, 100.0), (12.5e6, 20e6, 50.0),
])
def test_port_utilization_grid(tx, speed, want):
    got = port_utilization(tx, speed, 10.0)
    assert got == want or abs(got - want) <= 1e-12 * want


def test_port_utilization_clamps_and_validates():
    assert port_utilization(25e6, 10e6, 10.0) == 100.0
    with pytest.raises(InvalidInterval):
        port_utilization(1, 10e6, 0)
    with pytest.raises(InvalidInterval):
        MonitorConfig(interval_s=0)
    with pytest.raises(ValueError):
        MonitorConfig(threshold_pct=0)


def test_threshold_inclusive():
    cfg = MonitorConfig()
    assert identify_bottlenecks([], cfg) == []
    assert identify_bottlenecks([delta(0, 0)], cfg) == []
    assert identify_bottlenecks([delta(3, 70.0)], cfg) == [3]
    assert identify_bottlenecks([delta(3, 69.99)], cfg) == []
    # host uplinks are not switch ports
    assert identify_bottlenecks([delta(3, 100, switch=False)], cfg) == []


@settings(max_examples=200)
@given(st.lists(st.floats(0, 100), min_size=1, max_size=10), st.floats(1, 100))
def test_bottlenecks_are_exactly_ports_over_threshold(pcts, threshold):
    ports = [delta(i, p) for i, p in enumerate(pcts)]
    bl = identify_bottlenecks(ports, MonitorConfig(threshold_pct=threshold))
    assert bl == sorted(set(bl))
    assert set(bl) == {d.link_id for d in ports if d.utilization >= threshold}


def test_severity_order():
    ports = [delta(1, 80), delta(2, 100, drops=5), delta(3, 100, drops=9), delta(4, 80)]
    assert by_severity([1, 2, 3, 4], ports) == [3, 2, 1, 4]


def test_select_largest_flow():
    path = Path(0, 1, (5,))
    other = Path(0, 1, (6,))
    c = lambda fid, b: FlowCounters(fid, 1000, b)
    assert select_largest_flow(5, [c(1, 5e6)], {1: path}) == 1
    assert select_largest_flow(5, [c(1, 5e6), c(2, 7e6)], {1: path, 2: path}) == 2
    assert select_largest_flow(5, [c(2, 5e6), c(1, 5e6)], {1: path, 2: path}) == 1
    assert select_largest_flow(5, [c(1, 9e9)], {1: other}) is None


def s1_state(pps):
    sc = parse_scenario("s1_single_flow").with_rate(pps)
    return sc, state_with(sc.topology, sc.build_flows())


def test_proactive_no_bottleneck_no_actions():
    sc, s = s1_state(1000)
    ports = [PortDelta(l.id, l.capacity_bps, 0, 0, 10, True) for l in sc.topology.links]
    assert proactive_tick(s, sc.monitor, MonitorWindow(10, ports)) == []


def test_proactive_moves_s1_flow_at_first_boundary():
    sc = parse_scenario("s1_single_flow").with_rate(2000).with_strategy("proactive")
    res = simulate(sc)
    ab = sc.topology.link_between("A", "B").id
    reroutes = [a for a in res.actions if a.kind == REROUTE]
    assert reroutes and reroutes[0].time_s == 10.0 and reroutes[0].link_id == ab
    assert ab not in reroutes[0].path.links
    assert all(a.time_s % 10 == 0 for a in res.actions)


def bridge_topology():
    return load_topology({
        "nodes": [("A", "switch"), ("B", "switch"), ("H1", "host"), ("H2", "host")],
        "links": [("A", "B", 10, 1), ("H1", "A", 100, 0), ("H2", "B", 100, 0)],
    })


def test_bridge_bottleneck_records_no_alternate():
    t = bridge_topology()
    s = state_with(t, [flow(0, t, "H1", "H2", 9)])
    ab = t.link_between("A", "B").id
    ports = [delta(ab, 90)]
    actions = proactive_tick(s, MonitorConfig(), MonitorWindow(10, ports, {0: 9e6 * 10 / 8}))
    assert [(a.kind, a.flow_id) for a in actions] == [(NO_ALTERNATE_PATH, 0)]


def test_reactive_ignores_load_on_alternate():
    t = builtin_topology("triangle")
    t = t.with_capacities({t.link_between("A", "B").id: 10e6, t.link_between("H1", "A").id: 1e9})
    # f0 overloads A->B; f1 already fills A->C
    s = state_with(t, [flow(0, t, "H1", "H2", 12), flow(1, t, "H1", "H3", 19)])
    step(s)
    ab = t.link_between("A", "B").id
    ports = [PortDelta(l.id, l.capacity_bps, 0, s.ports[l.id].drop_bytes, 0.1, t.is_switch_port(l.id))
             for l in t.links]
    actions = reactive_tick(s, MonitorConfig(), MonitorWindow(0.1, ports))
    (a,) = actions
    assert a.kind == REROUTE and a.link_id == ab and a.flow_id == 0
    assert ab not in a.path.links
    assert t.link_between("A", "C").id in a.path.links


def test_reactive_no_drops_no_actions():
    t = builtin_topology("triangle")
    s = state_with(t, [flow(0, t, "H1", "H2", 1)])
    ports = [PortDelta(l.id, l.capacity_bps, 0, 0, 0.1, True) for l in t.links]
    assert reactive_tick(s, MonitorConfig(), MonitorWindow(0.1, ports)) == []


def test_reactive_processes_in_link_id_order():
    t = builtin_topology("triangle")
    s = state_with(t, [flow(0, t, "H1", "H2", 1), flow(1, t, "H2", "H3", 1)])
    ab, bc = t.link_between("A", "B").id, t.link_between("B", "C").id
    ports = [PortDelta(l.id, l.capacity_bps, 0, 1.0 if l.id in (ab, bc) else 0.0, 0.1, True)
             for l in t.links]
    actions = reactive_tick(s, MonitorConfig(), MonitorWindow(0.1, ports))
    assert [a.link_id for a in actions] == sorted([ab, bc])
    for a in actions:
        assert a.link_id not in a.path.links


def test_none_never_installs():
    sc = parse_scenario("s2_multi_flow").with_strategy("none")
    res = simulate(sc)
    assert res.actions == [] and not res.state.tables


def test_strategies_identical_without_congestion():
    base = parse_scenario("s2_multi_flow").with_flow_count(3)
    runs = {s: simulate(base.with_strategy(s)) for s in Strategy}
    ref = runs[Strategy.NONE].report.to_dict()
    for s, r in runs.items():
        assert r.actions == []
        d = r.report.to_dict()
        d["strategy"] = ref["strategy"]
        assert d == ref


def test_proactive_reroutes_avoid_bottleneck_list(monkeypatch):
    import flowgate.controller as ctl_mod
    seen = []
    real = ctl_mod.identify_bottlenecks
    monkeypatch.setattr(ctl_mod, "identify_bottlenecks", lambda d, c: seen.append(real(d, c)) or seen[-1])
    sc = parse_scenario("s2_multi_flow").with_flow_count(5)
    ctl = Controller("proactive", sc.monitor, sc.bayes)
    s = state_with(sc.topology, sc.build_flows())
    n_reroutes = 0
    for _ in range(600):
        acts = ctl.observe(s)
        for a in acts:
            if a.kind == REROUTE:
                n_reroutes += 1
                assert not set(a.path.links) & set(seen[-1])
        ctl_mod.apply_actions(s, acts, sc.monitor)
        step(s)
    assert n_reroutes > 0


def test_controller_poll_interval_must_fit_ticks():
    with pytest.raises(InvalidInterval):
        Controller("proactive", MonitorConfig(interval_s=0.15)).poll_ticks(0.1)
    assert Controller("proactive").poll_ticks(0.1) == 100
