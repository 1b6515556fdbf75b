"""Fixed-step fluid data plane.

Each tick every active flow offers ``requested_bps * tick_s`` bits along its
current path.  A link whose offered load exceeds its capacity scales every
crossing flow by ``capacity / offered``; a flow is delivered at the smallest
scale factor on its path and its loss is charged to that link's egress port.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .topology import Path, Topology, shortest_path

FORWARD = "forward"
REVERSE = "reverse"

UTILIZATION_CAP = 0.99


class UnroutableFlow(RuntimeError):
    def __init__(self, flow_id):
        super().__init__(f"no path for flow {flow_id}")
        self.flow_id = flow_id


class PathMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Flow:
    id: int
    src_host: int
    dst_host: int
    rate_pps: float
    packet_bytes: float
    start_s: float
    end_s: float

    def __post_init__(self):
        if not self.rate_pps > 0:
            raise ValueError(f"flow {self.id}: rate_pps must be positive")
        if not self.packet_bytes > 0:
            raise ValueError(f"flow {self.id}: packet_bytes must be positive")
        if not self.start_s < self.end_s:
            raise ValueError(f"flow {self.id}: start_s must precede end_s")

    @property
    def requested_bps(self) -> float:
        return self.rate_pps * self.packet_bytes * 8

    def active_at(self, t: float) -> bool:
        return self.start_s <= t < self.end_s


@dataclass(frozen=True)
class FlowTableEntry:
    flow_id: int
    path: Path
    installed_at_s: float
    hard_timeout_s: float
    direction: str = FORWARD

    @property
    def expires_at_s(self) -> float:
        # same rounding as the clock, so 3 x 0.1 s expires on the third tick
        return round(self.installed_at_s + self.hard_timeout_s, 9)

    def active_at(self, t: float) -> bool:
        return self.installed_at_s <= t < self.expires_at_s


@dataclass
class PortCounters:
    tx_bytes: float = 0.0
    drop_bytes: float = 0.0


@dataclass
class FlowCounters:
    flow_id: int
    packet_bytes: float
    byte_count: float = 0.0
    dropped_bytes: float = 0.0
    offered_bytes: float = 0.0
    delay_weighted_sum_ms: float = 0.0

    @property
    def packets_sent(self) -> float:
        return self.offered_bytes / self.packet_bytes

    @property
    def packets_delivered(self) -> float:
        return self.byte_count / self.packet_bytes

    @property
    def packets_dropped(self) -> float:
        return self.dropped_bytes / self.packet_bytes


@dataclass(frozen=True)
class PortStatsSnapshot:
    """Cumulative counters of one egress port, as a port-stats reply would carry."""

    link_id: int
    node: int
    port_speed_bps: float
    tx_bytes: float
    drop_bytes: float
    time_s: float
    switch_port: bool


@dataclass
class TickResult:
    """What happened during the last tick; kept for invariant checks."""

    time_s: float
    flow_offered: dict[int, float] = field(default_factory=dict)
    flow_delivered: dict[int, float] = field(default_factory=dict)
    flow_dropped: dict[int, float] = field(default_factory=dict)
    link_offered_bps: dict[int, float] = field(default_factory=dict)
    link_carried_bps: dict[int, float] = field(default_factory=dict)
    unroutable: list[int] = field(default_factory=list)


@dataclass
class SimState:
    topology: Topology
    flows: dict[int, Flow]
    tick_s: float = 0.1
    q_coeff_ms: float = 1.0
    seed: int = 0
    ticks: int = 0
    tables: dict[tuple[int, str], FlowTableEntry] = field(default_factory=dict)
    ports: dict[int, PortCounters] = field(default_factory=dict)
    counters: dict[int, FlowCounters] = field(default_factory=dict)
    last_tick: TickResult | None = None
    _default_paths: dict[tuple[int, int], Path | None] = field(default_factory=dict, repr=False)

    @classmethod
    def create(cls, topology: Topology, flows=(), tick_s=0.1, q_coeff_ms=1.0, seed=0) -> "SimState":
        if not tick_s > 0:
            raise ValueError("tick_s must be positive")
        flows = {f.id: f for f in flows}
        for f in flows.values():
            for end in (f.src_host, f.dst_host):
                topology.node_id(end)
        return cls(
            topology=topology,
            flows=flows,
            tick_s=tick_s,
            q_coeff_ms=q_coeff_ms,
            seed=seed,
            ports={l.id: PortCounters() for l in topology.links},
            counters={fid: FlowCounters(fid, f.packet_bytes) for fid, f in sorted(flows.items())},
        )

    @property
    def clock_s(self) -> float:
        # rounded so that interval and timeout comparisons stay exact
        return round(self.ticks * self.tick_s, 9)

    def default_path(self, src: int, dst: int) -> Path | None:
        key = (src, dst)
        if key not in self._default_paths:
            self._default_paths[key] = shortest_path(self.topology, src, dst)
        return self._default_paths[key]

    def active_flows(self) -> list[Flow]:
        t = self.clock_s
        return [f for _, f in sorted(self.flows.items()) if f.active_at(t)]


def route(state: SimState, flow_id: int) -> Path | None:
    """Path the flow uses at the current clock: its table entry, else the default."""
    flow = state.flows[flow_id]
    entry = state.tables.get((flow_id, FORWARD))
    if entry is not None and entry.active_at(state.clock_s):
        return entry.path
    return state.default_path(flow.src_host, flow.dst_host)


def current_routes(state: SimState) -> dict[int, Path]:
    routes = {}
    for flow in state.active_flows():
        path = route(state, flow.id)
        if path is not None:
            routes[flow.id] = path
    return routes


def install_flow_entry(state: SimState, flow_id: int, path: Path, hard_timeout_s: float) -> SimState:
    """Install ``path`` for the flow in both directions; replaces any prior entry."""
    flow = state.flows[flow_id]
    if (path.src, path.dst) != (flow.src_host, flow.dst_host):
        raise PathMismatch(f"path {path.src}->{path.dst} does not serve flow {flow_id}")
    topo = state.topology
    node = path.src
    for lid in path.links:
        link = topo.link(lid)
        if link.src != node:
            raise PathMismatch(f"link {topo.link_name(lid)} does not continue the path")
        node = link.dst
    if node != path.dst:
        raise PathMismatch("path does not reach its destination")
    if not hard_timeout_s > 0:
        raise ValueError("hard_timeout_s must be positive")

    now = state.clock_s
    state.tables[(flow_id, FORWARD)] = FlowTableEntry(flow_id, path, now, hard_timeout_s, FORWARD)
    state.tables[(flow_id, REVERSE)] = FlowTableEntry(
        flow_id, topo.reverse_path(path), now, hard_timeout_s, REVERSE)
    return state


def expire_entries(state: SimState) -> list[FlowTableEntry]:
    now = state.clock_s
    expired = [e for e in state.tables.values() if now >= e.expires_at_s]
    for e in expired:
        del state.tables[(e.flow_id, e.direction)]
    return expired


def step(state: SimState, strict: bool = False) -> SimState:
    """Advance the simulation by one tick."""
    topo = state.topology
    expire_entries(state)
    now = state.clock_s
    dt = state.tick_s
    result = TickResult(now)

    routed: list[tuple[Flow, Path]] = []
    link_offered: dict[int, float] = {}
    for flow in state.active_flows():
        path = route(state, flow.id)
        if path is None:
            if strict:
                raise UnroutableFlow(flow.id)
            result.unroutable.append(flow.id)
            offered = flow.requested_bps * dt / 8
            c = state.counters[flow.id]
            c.offered_bytes += offered
            c.dropped_bytes += offered
            result.flow_offered[flow.id] = offered
            result.flow_delivered[flow.id] = 0.0
            result.flow_dropped[flow.id] = offered
            continue
        routed.append((flow, path))
        for lid in path.links:
            link_offered[lid] = link_offered.get(lid, 0.0) + flow.requested_bps

    scale = {}
    queue_ms = {}
    for lid, offered in link_offered.items():
        cap = topo.links[lid].capacity_bps
        scale[lid] = min(1.0, cap / offered)
        u = min(offered / cap, UTILIZATION_CAP)
        queue_ms[lid] = state.q_coeff_ms * u / (1.0 - u)
    result.link_offered_bps = dict(link_offered)

    carried: dict[int, float] = {}
    for flow, path in routed:
        offered = flow.requested_bps * dt / 8
        factor, worst = 1.0, None
        for lid in path.links:
            if scale[lid] < factor:
                factor, worst = scale[lid], lid
        delivered = offered * factor
        dropped = offered - delivered
        if worst is not None:
            state.ports[worst].drop_bytes += dropped
        for lid in path.links:
            state.ports[lid].tx_bytes += delivered
            carried[lid] = carried.get(lid, 0.0) + delivered * 8 / dt
        delay_ms = sum(topo.links[lid].prop_delay_ms + queue_ms[lid] for lid in path.links)

        c = state.counters[flow.id]
        c.offered_bytes += offered
        c.byte_count += delivered
        c.dropped_bytes += dropped
        c.delay_weighted_sum_ms += delay_ms * delivered
        result.flow_offered[flow.id] = offered
        result.flow_delivered[flow.id] = delivered
        result.flow_dropped[flow.id] = dropped
    result.link_carried_bps = carried

    state.last_tick = result
    state.ticks += 1
    return state


def port_stats_snapshot(state: SimState) -> list[PortStatsSnapshot]:
    topo = state.topology
    now = state.clock_s
    return [
        PortStatsSnapshot(l.id, l.src, l.capacity_bps, state.ports[l.id].tx_bytes,
                          state.ports[l.id].drop_bytes, now, topo.is_switch_port(l.id))
        for l in topo.links
    ]


def flow_stats_snapshot(state: SimState) -> list[FlowCounters]:
    return [
        FlowCounters(c.flow_id, c.packet_bytes, c.byte_count, c.dropped_bytes,
                     c.offered_bytes, c.delay_weighted_sum_ms)
        for _, c in sorted(state.counters.items())
    ]
