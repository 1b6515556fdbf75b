"""Bayesian flow admission onto an alternate path.

Every link of a candidate path is screened on residual bandwidth first; only
links with positive residual bandwidth get a link-availability posterior.
Links failing either test join the impassable list and the path is
recomputed around them until a path passes or none is left.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .topology import Path, Topology, shortest_path, virtual_overlay

NO_ADMISSIBLE_PATH = "NoAdmissiblePath"


class PreconditionViolated(ValueError):
    pass


@dataclass(frozen=True)
class BayesParams:
    prior_la: float = 0.5
    lik_rb_pos_given_la1: float = 0.9
    lik_rb_pos_given_la0: float = 0.6
    pu_eps: float = 0.01

    def __post_init__(self):
        for name in ("prior_la", "lik_rb_pos_given_la1", "lik_rb_pos_given_la0"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {value}")
        if not 0 < self.pu_eps < 0.5:
            raise ValueError(f"pu_eps must lie in (0, 0.5), got {self.pu_eps}")


@dataclass(frozen=True)
class LinkEvidence:
    link_id: int
    pu: float
    rb_bps: float

    def __post_init__(self):
        if not 0.0 <= self.pu <= 1.0:
            raise ValueError(f"pu must lie in [0, 1], got {self.pu}")


@dataclass(frozen=True)
class LinkCheck:
    link_id: int
    rb_bps: float
    posterior: float | None
    available: bool


@dataclass
class AdmissionDecision:
    admitted: bool
    path: Path | None = None
    reason: str = ""
    trace: list[LinkCheck] = field(default_factory=list)
    impassable: frozenset[int] = frozenset()
    candidates: list[Path] = field(default_factory=list)


def residual_bandwidth(capacity_bps: float, measured_tx_bps: float, requested_bps: float) -> float:
    """Capacity left after current traffic and the requested flow (bps)."""
    return (capacity_bps - measured_tx_bps) - requested_bps


def rb_indicator(rb_bps: float) -> int:
    return 1 if rb_bps > 0 else 0


def _clamped_pu(pu: float, p: BayesParams) -> float:
    return min(max(pu, p.pu_eps), 1.0 - p.pu_eps)


def posterior_link_availability(ev: LinkEvidence, p: BayesParams = BayesParams()) -> float:
    """P(link available | RB positive, observed utilization), normalized."""
    if ev.rb_bps <= 0:
        raise PreconditionViolated(f"link {ev.link_id}: posterior needs positive residual bandwidth")
    pu = _clamped_pu(ev.pu, p)
    n1 = p.lik_rb_pos_given_la1 * (1.0 - pu) * p.prior_la
    n0 = p.lik_rb_pos_given_la0 * pu * (1.0 - p.prior_la)
    return n1 / (n1 + n0)


def literal_posterior(ev: LinkEvidence, p: BayesParams = BayesParams()) -> float:
    """Unnormalized ratio P(RB,PU|LA)P(LA) / (P(RB)P(PU)); may exceed 1.

    Read-only comparison value, never used for decisions.
    """
    if ev.rb_bps <= 0:
        raise PreconditionViolated(f"link {ev.link_id}: posterior needs positive residual bandwidth")
    pu = _clamped_pu(ev.pu, p)
    return p.lik_rb_pos_given_la1 * (1.0 - pu) * p.prior_la / (1.0 * pu)


def link_available(ev: LinkEvidence, p: BayesParams = BayesParams()) -> bool:
    post = posterior_link_availability(ev, p)
    return post > 1.0 - post


def build_evidence(topology: Topology, load_bps: Mapping[int, float], requested_bps: float
                   ) -> dict[int, LinkEvidence]:
    """Evidence for every link from its measured load over the observation window."""
    evidence = {}
    for link in topology.links:
        load = max(0.0, load_bps.get(link.id, 0.0))
        pu = min(1.0, load / link.capacity_bps)
        rb = residual_bandwidth(link.capacity_bps, load, requested_bps)
        evidence[link.id] = LinkEvidence(link.id, pu, rb)
    return evidence


def check_link(ev: LinkEvidence, p: BayesParams) -> LinkCheck:
    if ev.rb_bps <= 0:
        return LinkCheck(ev.link_id, ev.rb_bps, None, False)
    post = posterior_link_availability(ev, p)
    return LinkCheck(ev.link_id, ev.rb_bps, post, post > 1.0 - post)


def admit_flow(alt_path: Path | None, flow, evidence: Mapping[int, LinkEvidence],
               p: BayesParams, topology: Topology, il=None) -> AdmissionDecision:
    """Admit ``flow`` on ``alt_path`` or on a recomputed path avoiding failed links.

    ``topology`` is the overlay the alternate path was computed on (bottleneck
    links already excluded), so each recomputation avoids both the
    bottleneck list and the impassable list.
    """
    il = set(il or ())
    decision = AdmissionDecision(False)
    path = alt_path
    # each round adds at least one link to il, so this terminates
    while path is not None:
        decision.candidates.append(path)
        failed = []
        for lid in path.links:
            check = check_link(evidence[lid], p)
            decision.trace.append(check)
            if not check.available:
                failed.append(lid)
        if not failed:
            decision.admitted = True
            decision.path = path
            decision.impassable = frozenset(il)
            return decision
        il.update(failed)
        path = shortest_path(virtual_overlay(topology, il), flow.src_host, flow.dst_host)
    decision.reason = NO_ADMISSIBLE_PATH
    decision.impassable = frozenset(il)
    return decision
