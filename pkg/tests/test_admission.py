from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from conftest import flow, state_with
from flowgate.admission import (
    NO_ADMISSIBLE_PATH,
    BayesParams,
    LinkEvidence,
    PreconditionViolated,
    admit_flow,
    build_evidence,
    link_available,
    literal_posterior,
    posterior_link_availability,
    rb_indicator,
    residual_bandwidth,
)
from flowgate.controller import REJECTED, MonitorConfig, MonitorWindow, PortDelta, apply_actions, proactive_tick
from flowgate.dataplane import route
from flowgate.topology import load_topology, shortest_path, virtual_overlay

PARAM_SETS = [
    BayesParams(),
    BayesParams(prior_la=0.3, lik_rb_pos_given_la1=0.8, lik_rb_pos_given_la0=0.4, pu_eps=0.05),
    BayesParams(prior_la=0.5, lik_rb_pos_given_la1=0.9, lik_rb_pos_given_la0=0.9, pu_eps=0.01),
]
PU_GRID = [round(0.05 * k, 2) for k in range(21)]


def oracle(pu, rb, p):
    """Enumerate LA in {0, 1} exactly; None when rb screening fails."""
    if not rb > 0:
        return None, False
    eps = Fraction(p.pu_eps)
    q = min(max(Fraction(pu), eps), 1 - eps)
    prior = Fraction(p.prior_la)
    lik_rb = {1: Fraction(p.lik_rb_pos_given_la1), 0: Fraction(p.lik_rb_pos_given_la0)}
    lik_pu = {1: 1 - q, 0: q}
    p_la = {1: prior, 0: 1 - prior}
    joint = {la: p_la[la] * lik_rb[la] * lik_pu[la] for la in (0, 1)}
    post = joint[1] / (joint[0] + joint[1])
    return float(post), post > Fraction(1, 2)


@pytest.mark.parametrize("p", PARAM_SETS)
def test_posterior_matches_oracle_over_grid(p):
    for pu in PU_GRID:
        for rb in (5e6, -5e6, 0.0):
            want, avail = oracle(pu, rb, p)
            ev = LinkEvidence(0, pu, rb)
            if want is None:
                with pytest.raises(PreconditionViolated):
                    posterior_link_availability(ev, p)
                continue
            assert abs(posterior_link_availability(ev, p) - want) <= 1e-12
            assert link_available(ev, p) == avail


@pytest.mark.parametrize("p", PARAM_SETS)
def test_posterior_monotone_on_grid(p):
    posts = [posterior_link_availability(LinkEvidence(0, pu, 1.0), p) for pu in PU_GRID]
    assert all(b <= a for a, b in zip(posts, posts[1:]))
    inside = [x for pu, x in zip(PU_GRID, posts) if p.pu_eps <= pu <= 1 - p.pu_eps]
    assert all(b < a for a, b in zip(inside, inside[1:]))


@settings(max_examples=300)
@given(pu=st.floats(0, 1), pu2=st.floats(0, 1),
       prior=st.floats(0.01, 0.99), l1=st.floats(0.01, 0.99), l0=st.floats(0.01, 0.99))
def test_posterior_properties(pu, pu2, prior, l1, l0):
    p = BayesParams(prior, l1, l0)
    a = posterior_link_availability(LinkEvidence(0, pu, 1.0), p)
    b = posterior_link_availability(LinkEvidence(0, pu2, 1.0), p)
    assert 0.0 <= a <= 1.0
    if pu < pu2:
        assert a >= b


@settings(max_examples=300)
@given(pu=st.floats(0, 1))
def test_symmetric_likelihoods_decide_on_half(pu):
    p = BayesParams(0.5, 0.9, 0.9)
    q = min(max(pu, p.pu_eps), 1 - p.pu_eps)
    assert link_available(LinkEvidence(0, pu, 1.0), p) == (q < 0.5)


def test_posterior_examples():
    assert posterior_link_availability(LinkEvidence(0, 0.5, 1.0)) == pytest.approx(0.6, abs=1e-12)
    assert link_available(LinkEvidence(0, 0.5, 1.0))
    assert posterior_link_availability(LinkEvidence(0, 0.8, 1.0)) == pytest.approx(0.09 / 0.33, abs=1e-12)
    assert not link_available(LinkEvidence(0, 0.8, 1.0))
    idle = posterior_link_availability(LinkEvidence(0, 0.0, 1.0))
    assert idle == pytest.approx(0.4455 / 0.4485, abs=1e-12)
    assert round(idle, 4) == 0.9933
    assert link_available(LinkEvidence(0, 0.0, 1.0))


def test_literal_posterior_is_unnormalized():
    ev = LinkEvidence(0, 0.0, 1.0)
    assert literal_posterior(ev) == pytest.approx(0.9 * 0.99 * 0.5 / 0.01)
    assert literal_posterior(ev) > 1
    with pytest.raises(PreconditionViolated):
        literal_posterior(LinkEvidence(0, 0.2, 0.0))


def test_residual_bandwidth_examples():
    assert residual_bandwidth(20e6, 0, 8e6) == 12e6 and rb_indicator(12e6) == 1
    assert residual_bandwidth(20e6, 8e6, 8e6) == 4e6 and rb_indicator(4e6) == 1
    assert residual_bandwidth(20e6, 8e6, 12e6) == 0 and rb_indicator(0) == 0


def test_param_validation():
    with pytest.raises(ValueError):
        BayesParams(prior_la=1.0)
    with pytest.raises(ValueError):
        BayesParams(pu_eps=0.5)
    with pytest.raises(ValueError):
        LinkEvidence(0, 1.5, 1.0)


def six_node(x_cap=100, y_cap=100):
    """S and D joined directly (the bottleneck) and via X and via Y."""
    return load_topology({
        "nodes": [("S", "switch"), ("X", "switch"), ("Y", "switch"), ("D", "switch"),
                  ("H1", "host"), ("H2", "host")],
        "links": [("S", "D", 10, 1), ("S", "X", 100, 1), ("X", "D", x_cap, 1),
                  ("S", "Y", 100, 1), ("Y", "D", y_cap, 1),
                  ("H1", "S", 1000, 0), ("H2", "D", 1000, 0)],
    })


def test_recursion_first_alternate_fails_rb():
    t = six_node()
    f = flow(0, t, "H1", "H2", 8)
    sd, xd, yd = (t.link_between(*p).id for p in (("S", "D"), ("X", "D"), ("Y", "D")))
    overlay = virtual_overlay(t, [sd])
    first = shortest_path(overlay, "H1", "H2")
    assert xd in first.links
    evidence = build_evidence(t, {xd: 95e6, sd: 10e6}, f.requested_bps)
    assert evidence[xd].rb_bps < 0
    d = admit_flow(first, f, evidence, BayesParams(), overlay)
    assert d.admitted
    assert yd in d.path.links and sd not in d.path.links
    assert d.impassable == frozenset({xd})
    assert [c.links for c in d.candidates] == [first.links, d.path.links]
    # screening: the rb-failed link never got a posterior
    (xd_check,) = [c for c in d.trace if c.link_id == xd]
    assert xd_check.posterior is None and not xd_check.available
    assert all(c.available for c in d.trace if c.link_id in d.path.links)


def test_all_alternates_congested_rejected_and_route_kept():
    t = six_node()
    f = flow(0, t, "H1", "H2", 8)
    s = state_with(t, [f])
    sd, xd, yd = (t.link_between(*p).id for p in (("S", "D"), ("X", "D"), ("Y", "D")))
    before = route(s, 0)
    assert sd in before.links
    # alternates under the bottleneck threshold yet too busy to admit
    load = {sd: 8e6, xd: 65e6, yd: 65e6, t.link_between("H1", "S").id: 8e6}
    ports = [PortDelta(l.id, l.capacity_bps, load.get(l.id, 0.0) * 10 / 8, 0.0, 10.0,
                       t.is_switch_port(l.id)) for l in t.links]
    window = MonitorWindow(10.0, ports, {0: 8e6 * 10 / 8})
    actions = proactive_tick(s, MonitorConfig(), window)
    assert [a.kind for a in actions] == [REJECTED]
    assert actions[0].detail == NO_ADMISSIBLE_PATH
    apply_actions(s, actions, MonitorConfig())
    assert route(s, 0) == before and not s.tables

    overlay = virtual_overlay(t, [sd])
    evidence = build_evidence(t, {xd: 90e6, yd: 90e6}, f.requested_bps)
    d = admit_flow(shortest_path(overlay, "H1", "H2"), f, evidence, BayesParams(), overlay)
    assert not d.admitted and d.reason == NO_ADMISSIBLE_PATH
    assert d.impassable == frozenset({xd, yd})
    assert len(d.candidates) == 2


def test_idle_path_admitted_first_pass():
    t = six_node()
    f = flow(0, t, "H1", "H2", 8)
    path = shortest_path(t, "H1", "H2")
    d = admit_flow(path, f, build_evidence(t, {}, f.requested_bps), BayesParams(), t)
    assert d.admitted and d.path == path and d.impassable == frozenset()
    assert len(d.candidates) == 1


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 120e6), min_size=14, max_size=14))
def test_admission_terminates_and_respects_screening(loads):
    t = six_node()
    f = flow(0, t, "H1", "H2", 8)
    evidence = build_evidence(t, dict(enumerate(loads)), f.requested_bps)
    d = admit_flow(shortest_path(t, "H1", "H2"), f, evidence, BayesParams(), t)
    assert len(d.candidates) <= len(t.links)
    for c in d.trace:
        if evidence[c.link_id].rb_bps <= 0:
            assert c.posterior is None
    if d.admitted:
        for lid in d.path.links:
            assert evidence[lid].rb_bps > 0 and link_available(evidence[lid])
        assert not set(d.path.links) & d.impassable
    # impassable list only grows: each candidate avoids every earlier failure
    seen = set()
    for cand in d.candidates:
        assert not set(cand.links) & seen
        seen |= {c.link_id for c in d.trace if c.link_id in cand.links and not c.available}
