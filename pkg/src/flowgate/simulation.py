"""Simulation loop: controller decisions between data-plane ticks."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from .controller import Action, Controller, apply_actions
from .dataplane import SimState, step
from .metrics import RunReport, build_report
from .scenario import Scenario


@dataclass
class SimResult:
    scenario: Scenario
    state: SimState
    actions: list[Action]
    report: RunReport
    # cumulative delivered bytes per flow at every polling boundary
    timeline: list[tuple[float, dict[int, float]]] = field(default_factory=list)

    def delivered_between(self, t0: float, t1: float) -> dict[int, float]:
        marks = dict(self.timeline)
        a, b = marks[round(t0, 9)], marks[round(t1, 9)]
        return {fid: b[fid] - a[fid] for fid in b}


def simulate(scenario: Scenario, on_tick: Callable[[SimState], None] | None = None) -> SimResult:
    state = SimState.create(scenario.topology, scenario.build_flows(), scenario.tick_s,
                            scenario.q_coeff_ms, scenario.seed)
    controller = Controller(scenario.strategy, scenario.monitor, scenario.bayes)
    poll = controller.poll_ticks(scenario.tick_s)
    n_ticks = round(scenario.duration_s / scenario.tick_s)
    actions: list[Action] = []
    timeline = []
    for _ in range(n_ticks):
        if state.ticks % poll == 0:
            timeline.append((state.clock_s, {fid: c.byte_count for fid, c in state.counters.items()}))
        new = controller.observe(state)
        apply_actions(state, new, scenario.monitor)
        actions.extend(new)
        step(state)
        if on_tick is not None:
            on_tick(state)
    timeline.append((state.clock_s, {fid: c.byte_count for fid, c in state.counters.items()}))
    report = build_report(state, scenario.name, scenario.strategy.value, scenario.duration_s, actions)
    return SimResult(scenario, state, actions, report, timeline)
