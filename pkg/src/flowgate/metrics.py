"""Per-flow QoS metrics and run reports."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence


class MetricsError(ValueError):
    pass


class CounterInversion(MetricsError):
    pass


class EmptyInput(MetricsError):
    pass


class NoDeliveredTraffic(MetricsError):
    pass


def packet_loss_pct(dropped: float, sent: float) -> float:
    if dropped < 0 or sent < 0:
        raise CounterInversion(f"negative counters: dropped={dropped}, sent={sent}")
    if dropped > sent:
        raise CounterInversion(f"dropped {dropped} exceeds sent {sent}")
    if sent == 0:
        return 0.0
    return 100.0 * (dropped / sent)


def average_packet_loss(losses: Sequence[float]) -> float:
    if not losses:
        raise EmptyInput("no flows to average")
    return sum(losses) / len(losses)


def average_throughput(delivered_bits: Sequence[float], total_sim_time_s: float, n: int | None = None) -> float:
    """Delivered bits per second, averaged over ``n`` flows."""
    n = len(delivered_bits) if n is None else n
    if n < 1:
        raise EmptyInput("no flows to average")
    if not total_sim_time_s > 0:
        raise MetricsError("total_sim_time_s must be positive")
    return sum(delivered_bits) / (total_sim_time_s * n)


def end_to_end_delay(delay_weighted_sum_ms: float, delivered: float) -> float:
    """Delivered-volume weighted mean of per-tick path delays."""
    if not delivered > 0:
        raise NoDeliveredTraffic("flow delivered nothing")
    return delay_weighted_sum_ms / delivered


def average_delay(delays: Sequence[float]) -> float:
    if not delays:
        raise EmptyInput("no delays to average")
    return sum(delays) / len(delays)


@dataclass
class FlowMetrics:
    flow_id: int
    src: str
    dst: str
    loss_pct: float
    throughput_bps: float
    mean_delay_ms: float | None
    delivered_bytes: float
    dropped_bytes: float
    offered_bytes: float


@dataclass
class RunReport:
    scenario: str
    strategy: str
    n_flows: int
    duration_s: float
    avg_loss_pct: float
    avg_throughput_bps: float
    avg_delay_ms: float
    flows: list[FlowMetrics] = field(default_factory=list)
    actions: list[dict] = field(default_factory=list)
    no_delivery: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["row", "flow_id", "src", "dst", "loss_pct", "throughput_bps",
                    "mean_delay_ms", "delivered_bytes", "dropped_bytes", "offered_bytes"])
        for f in self.flows:
            w.writerow(["flow", f.flow_id, f.src, f.dst, _num(f.loss_pct), _num(f.throughput_bps),
                        _num(f.mean_delay_ms), _num(f.delivered_bytes), _num(f.dropped_bytes),
                        _num(f.offered_bytes)])
        w.writerow(["summary", "", self.scenario, self.strategy, _num(self.avg_loss_pct),
                    _num(self.avg_throughput_bps), _num(self.avg_delay_ms), "", "", ""])
        return buf.getvalue()


def _num(x) -> str:
    if x is None:
        return ""
    return repr(round(float(x), 9))


def flow_metrics(counters, flow, topology, duration_s: float) -> FlowMetrics:
    loss = packet_loss_pct(counters.packets_dropped, counters.packets_sent)
    try:
        delay = end_to_end_delay(counters.delay_weighted_sum_ms, counters.byte_count)
    except NoDeliveredTraffic:
        delay = None
    return FlowMetrics(
        flow_id=flow.id,
        src=topology.nodes[flow.src_host].name,
        dst=topology.nodes[flow.dst_host].name,
        loss_pct=loss,
        throughput_bps=counters.byte_count * 8 / duration_s,
        mean_delay_ms=delay,
        delivered_bytes=counters.byte_count,
        dropped_bytes=counters.dropped_bytes,
        offered_bytes=counters.offered_bytes,
    )


def build_report(state, scenario: str, strategy: str, duration_s: float,
                 actions: Iterable = ()) -> RunReport:
    """Assemble averages over all flows of a finished run.

    Flows that delivered nothing have no delay; they are left out of the
    average delay and listed in ``no_delivery``.
    """
    topo = state.topology
    per_flow = [flow_metrics(state.counters[fid], state.flows[fid], topo, duration_s)
                for fid in sorted(state.flows)]
    n = len(per_flow)
    delays = [f.mean_delay_ms for f in per_flow if f.mean_delay_ms is not None]
    report = RunReport(
        scenario=scenario,
        strategy=strategy,
        n_flows=n,
        duration_s=duration_s,
        avg_loss_pct=average_packet_loss([f.loss_pct for f in per_flow]) if n else 0.0,
        avg_throughput_bps=(average_throughput([f.delivered_bytes * 8 for f in per_flow], duration_s, n)
                            if n else 0.0),
        avg_delay_ms=average_delay(delays) if delays else 0.0,
        flows=per_flow,
        no_delivery=[f.flow_id for f in per_flow if f.mean_delay_ms is None],
    )
    for a in actions:
        report.actions.append({
            "time_s": a.time_s,
            "kind": a.kind,
            "link": topo.link_name(a.link_id),
            "flow_id": a.flow_id,
            "path": [topo.nodes[n].name for n in topo.path_nodes(a.path)] if a.path else None,
            "detail": a.detail,
        })
    return report
