"""Monitoring loop and rerouting strategies.

``none`` never touches the flow tables.  ``reactive`` reroutes the largest
flow off any port that dropped traffic during the last tick, without
checking the alternate path.  ``proactive`` polls port counters every
``interval_s``, flags ports at or above ``threshold_pct`` utilization and
moves the largest flow of each flagged link to an alternate path that passes
Bayesian admission.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .admission import AdmissionDecision, BayesParams, admit_flow, build_evidence
from .dataplane import (
    FlowCounters,
    PortStatsSnapshot,
    SimState,
    current_routes,
    flow_stats_snapshot,
    install_flow_entry,
    port_stats_snapshot,
)
from .topology import Path, shortest_path, virtual_overlay

log = logging.getLogger(__name__)


class InvalidInterval(ValueError):
    pass


class Strategy(str, enum.Enum):
    NONE = "none"
    REACTIVE = "reactive"
    PROACTIVE = "proactive"


@dataclass(frozen=True)
class MonitorConfig:
    interval_s: float = 10.0
    threshold_pct: float = 70.0
    hard_timeout_s: float = 30.0

    def __post_init__(self):
        if not self.interval_s > 0:
            raise InvalidInterval(f"interval_s must be positive, got {self.interval_s}")
        if not 0 < self.threshold_pct <= 100:
            raise ValueError(f"threshold_pct must lie in (0, 100], got {self.threshold_pct}")
        if not self.hard_timeout_s > 0:
            raise ValueError(f"hard_timeout_s must be positive, got {self.hard_timeout_s}")


# action kinds
REROUTE = "reroute"
NO_ALTERNATE_PATH = "NoAlternatePath"
REJECTED = "Rejected"
NO_FLOW = "NoFlow"


@dataclass(frozen=True)
class Action:
    kind: str
    time_s: float
    link_id: int
    flow_id: int | None = None
    path: Path | None = None
    detail: str = ""


@dataclass(frozen=True)
class PortDelta:
    """Counter growth of one egress port over a monitoring window."""

    link_id: int
    port_speed_bps: float
    tx_bytes: float
    drop_bytes: float
    interval_s: float
    switch_port: bool = True

    @property
    def utilization(self) -> float:
        return port_utilization(self.tx_bytes, self.port_speed_bps, self.interval_s)

    @property
    def tx_bps(self) -> float:
        return self.tx_bytes * 8 / self.interval_s


@dataclass
class MonitorWindow:
    interval_s: float
    ports: list[PortDelta]
    flow_bytes: dict[int, float] = field(default_factory=dict)


def port_utilization(tx_bytes_delta: float, port_speed_bps: float, interval_s: float) -> float:
    """Percent of the port's capacity used over the interval, clamped to [0, 100]."""
    if not interval_s > 0:
        raise InvalidInterval(f"interval_s must be positive, got {interval_s}")
    if not port_speed_bps > 0:
        raise ValueError(f"port_speed_bps must be positive, got {port_speed_bps}")
    u = (tx_bytes_delta * 8 * 100) / (port_speed_bps * interval_s)
    return min(100.0, max(0.0, u))


def port_deltas(before: Iterable[PortStatsSnapshot], after: Iterable[PortStatsSnapshot],
                interval_s: float) -> list[PortDelta]:
    old = {s.link_id: s for s in before}
    out = []
    for s in after:
        prev = old.get(s.link_id)
        tx = s.tx_bytes - (prev.tx_bytes if prev else 0.0)
        drop = s.drop_bytes - (prev.drop_bytes if prev else 0.0)
        out.append(PortDelta(s.link_id, s.port_speed_bps, max(0.0, tx), max(0.0, drop),
                             interval_s, s.switch_port))
    return out


def identify_bottlenecks(deltas: Iterable[PortDelta], cfg: MonitorConfig) -> list[int]:
    """Links whose switch egress port reached the threshold, ascending id.

    Only switch ports answer port-stats requests, so host uplinks are never
    flagged.
    """
    return sorted({d.link_id for d in deltas
                   if d.switch_port and d.utilization >= cfg.threshold_pct})


def by_severity(bottlenecks: Iterable[int], deltas: Iterable[PortDelta]) -> list[int]:
    """Most loaded first: utilization, then dropped bytes, then link id."""
    info = {d.link_id: d for d in deltas}
    return sorted(bottlenecks, key=lambda l: (-info[l].utilization, -info[l].drop_bytes, l))


def select_largest_flow(link_id: int, flow_stats: Iterable[FlowCounters],
                        routes: Mapping[int, Path]) -> int | None:
    best = None
    for c in flow_stats:
        path = routes.get(c.flow_id)
        if path is None or link_id not in path.links:
            continue
        if best is None or c.byte_count > best.byte_count or (
                c.byte_count == best.byte_count and c.flow_id < best.flow_id):
            best = c
    return None if best is None else best.flow_id


def proactive_tick(state: SimState, cfg: MonitorConfig, window: MonitorWindow,
                   params: BayesParams = BayesParams()) -> list[Action]:
    """Reroute decisions for one polling boundary.

    Every alternate path is computed on one overlay that excludes the whole
    bottleneck list.  The requested bandwidth of a moved flow is its
    measured rate over the window, and its own traffic is taken out of the
    load of the links it already uses, since moving it frees that share.
    """
    topo = state.topology
    now = state.clock_s
    bottlenecks = identify_bottlenecks(window.ports, cfg)
    if not bottlenecks:
        return []
    overlay = virtual_overlay(topo, bottlenecks)
    routes = current_routes(state)
    stats = flow_stats_snapshot(state)
    load = {d.link_id: d.tx_bps for d in window.ports}

    actions = []
    for lid in by_severity(bottlenecks, window.ports):
        fid = select_largest_flow(lid, stats, routes)
        if fid is None:
            actions.append(Action(NO_FLOW, now, lid))
            continue
        flow = state.flows[fid]
        alt = shortest_path(overlay, flow.src_host, flow.dst_host)
        if alt is None:
            actions.append(Action(NO_ALTERNATE_PATH, now, lid, fid))
            continue
        measured = window.flow_bytes.get(fid, 0.0) * 8 / window.interval_s
        current = routes[fid]
        background = dict(load)
        for l in current.links:
            background[l] = background.get(l, 0.0) - measured
        evidence = build_evidence(topo, background, measured)
        decision = admit_flow(alt, flow, evidence, params, overlay)
        if not decision.admitted:
            actions.append(Action(REJECTED, now, lid, fid, None, decision.reason))
            continue
        actions.append(Action(REROUTE, now, lid, fid, decision.path, _describe(decision)))
        # later decisions in this interval see the moved load
        for l in current.links:
            load[l] = load.get(l, 0.0) - measured
        for l in decision.path.links:
            load[l] = load.get(l, 0.0) + measured
        routes[fid] = decision.path
    return actions


def _describe(decision: AdmissionDecision) -> str:
    if not decision.impassable:
        return "admitted"
    return "admitted after excluding " + ",".join(str(l) for l in sorted(decision.impassable))


def reactive_tick(state: SimState, cfg: MonitorConfig, window: MonitorWindow) -> list[Action]:
    """Loss-triggered rerouting with no admission check."""
    now = state.clock_s
    lossy = sorted({d.link_id for d in window.ports if d.switch_port and d.drop_bytes > 0})
    if not lossy:
        return []
    routes = current_routes(state)
    stats = flow_stats_snapshot(state)
    actions = []
    for lid in lossy:
        fid = select_largest_flow(lid, stats, routes)
        if fid is None:
            actions.append(Action(NO_FLOW, now, lid))
            continue
        flow = state.flows[fid]
        # only the link that dropped is avoided; other links' state is not consulted
        alt = shortest_path(virtual_overlay(state.topology, [lid]), flow.src_host, flow.dst_host)
        if alt is None:
            actions.append(Action(NO_ALTERNATE_PATH, now, lid, fid))
            continue
        actions.append(Action(REROUTE, now, lid, fid, alt))
        routes[fid] = alt
    return actions


def apply_actions(state: SimState, actions: Iterable[Action], cfg: MonitorConfig) -> None:
    for a in actions:
        if a.kind == REROUTE:
            install_flow_entry(state, a.flow_id, a.path, cfg.hard_timeout_s)


class Controller:
    """Keeps the counter baselines between polls and dispatches to a strategy."""

    def __init__(self, strategy: Strategy | str, cfg: MonitorConfig = MonitorConfig(),
                 params: BayesParams = BayesParams()):
        self.strategy = Strategy(strategy)
        self.cfg = cfg
        self.params = params
        self._poll_ports: list[PortStatsSnapshot] | None = None
        self._poll_flows: dict[int, float] = {}
        self._tick_ports: list[PortStatsSnapshot] | None = None

    def poll_ticks(self, tick_s: float) -> int:
        n = round(self.cfg.interval_s / tick_s)
        if n < 1 or abs(n * tick_s - self.cfg.interval_s) > 1e-9:
            raise InvalidInterval("interval_s must be a whole number of ticks")
        return n

    def observe(self, state: SimState) -> list[Action]:
        """Run the strategy at the current clock; call once before every step."""
        if self.strategy is Strategy.NONE:
            return []
        ports = port_stats_snapshot(state)
        actions: list[Action] = []
        if self.strategy is Strategy.PROACTIVE:
            if state.ticks % self.poll_ticks(state.tick_s) == 0:
                flows = {c.flow_id: c.byte_count for c in state.counters.values()}
                if self._poll_ports is not None:
                    window = MonitorWindow(
                        self.cfg.interval_s,
                        port_deltas(self._poll_ports, ports, self.cfg.interval_s),
                        {fid: b - self._poll_flows.get(fid, 0.0) for fid, b in flows.items()},
                    )
                    actions = proactive_tick(state, self.cfg, window, self.params)
                self._poll_ports, self._poll_flows = ports, flows
        else:
            if self._tick_ports is not None:
                window = MonitorWindow(state.tick_s, port_deltas(self._tick_ports, ports, state.tick_s))
                actions = reactive_tick(state, self.cfg, window)
            self._tick_ports = ports
        for a in actions:
            log.debug("t=%.1f %s link=%s flow=%s %s", a.time_s, a.kind, a.link_id, a.flow_id, a.detail)
        return actions
