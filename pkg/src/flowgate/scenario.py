"""Scenario and sweep files (sectioned ``key = value`` text).

A scenario::

    [scenario]
    name = s1_single_flow
    topology = abilene          ; built-in name or topology file
    duration_s = 60

    [capacity]
    default_mbps = 20           ; every link
    host_uplink_mbps = 20       ; host -> switch direction only
    A-B = 10                    ; one cable, both directions
    A>B = 10                    ; one direction

    [controller]
    strategy = proactive
    interval_s = 10
    threshold_pct = 70
    hard_timeout_s = 30

    [admission]
    prior_la = 0.5

    [flows]
    f1 = H1, H2, 2000, 1000, 0, 60   ; src, dst, pps, packet_bytes, start_s, end_s
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path as FsPath

from .admission import BayesParams
from .controller import MonitorConfig, Strategy
from .dataplane import Flow
from .topology import HOST, Topology, TopologyError, resolve_topology

ENV_PREFIX = "FLOWGATE_"
PACKET_RATE = "packet_rate"
FLOW_COUNT = "flow_count"


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class FlowSpec:
    name: str
    src: str
    dst: str
    rate_pps: float
    packet_bytes: float
    start_s: float
    end_s: float


@dataclass(frozen=True)
class Scenario:
    name: str
    topology: Topology
    flows: tuple[FlowSpec, ...]
    duration_s: float
    strategy: Strategy = Strategy.NONE
    monitor: MonitorConfig = MonitorConfig()
    bayes: BayesParams = BayesParams()
    tick_s: float = 0.1
    q_coeff_ms: float = 1.0
    seed: int = 0
    out_dir: str = "out"
    formats: tuple[str, ...] = ("csv", "json")
    topology_ref: str = ""

    def __post_init__(self):
        if not self.duration_s > 0:
            raise ScenarioError("duration_s must be positive")
        if not self.tick_s > 0:
            raise ScenarioError("tick_s must be positive")
        ticks = round(self.duration_s / self.tick_s)
        if abs(ticks * self.tick_s - self.duration_s) > 1e-9:
            raise ScenarioError("duration_s must be a whole number of ticks")
        names = set()
        for f in self.flows:
            if f.name in names:
                raise ScenarioError(f"duplicate flow {f.name}")
            names.add(f.name)
            for end in (f.src, f.dst):
                try:
                    node = self.topology.node(end)
                except TopologyError:
                    raise ScenarioError(f"flow {f.name}: unknown node {end}") from None
                if node.kind != HOST:
                    raise ScenarioError(f"flow {f.name}: {end} is not a host")
            if f.src == f.dst:
                raise ScenarioError(f"flow {f.name}: source equals destination")
            if not (f.rate_pps > 0 and f.packet_bytes > 0 and 0 <= f.start_s < f.end_s):
                raise ScenarioError(f"flow {f.name}: need pps > 0, packet_bytes > 0, 0 <= start < end")
            if f.end_s > self.duration_s + 1e-9:
                raise ScenarioError(f"flow {f.name} outlives the scenario duration")

    def build_flows(self) -> list[Flow]:
        try:
            return [
                Flow(i, self.topology.node_id(f.src), self.topology.node_id(f.dst),
                     f.rate_pps, f.packet_bytes, f.start_s, f.end_s)
                for i, f in enumerate(self.flows)
            ]
        except ValueError as exc:
            raise ScenarioError(str(exc)) from None

    def with_rate(self, pps: float) -> "Scenario":
        return replace(self, flows=tuple(replace(f, rate_pps=float(pps)) for f in self.flows))

    def with_flow_count(self, n: int) -> "Scenario":
        if not 0 <= n <= len(self.flows):
            raise ScenarioError(f"scenario has only {len(self.flows)} flows, asked for {n}")
        return replace(self, flows=self.flows[:n])

    def with_strategy(self, strategy) -> "Scenario":
        return replace(self, strategy=Strategy(strategy))


@dataclass(frozen=True)
class SweepSpec:
    name: str
    base: Scenario
    axis: str
    values: tuple[float, ...]
    strategies: tuple[Strategy, ...] = field(default=(Strategy.NONE, Strategy.PROACTIVE))

    def __post_init__(self):
        if self.axis not in (PACKET_RATE, FLOW_COUNT):
            raise ScenarioError(f"unknown sweep axis {self.axis!r}")
        if not self.values:
            raise ScenarioError("sweep has no axis values")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ScenarioError("sweep axis values must be strictly increasing")
        if not self.strategies:
            raise ScenarioError("sweep has no strategies")

    def cell(self, value, strategy) -> Scenario:
        s = self.base.with_strategy(strategy)
        if self.axis == PACKET_RATE:
            return s.with_rate(value)
        return s.with_flow_count(int(value))


def _parser() -> configparser.ConfigParser:
    p = configparser.ConfigParser(delimiters=("=",), comment_prefixes=("#", ";"),
                                  inline_comment_prefixes=("#", ";"))
    p.optionxform = str
    return p


def _read(path: FsPath) -> configparser.ConfigParser:
    p = _parser()
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc.strerror}") from None
    try:
        p.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ScenarioError(str(exc).splitlines()[0]) from None
    return p


def _num(section, key, default=None, cast=float):
    raw = section.get(key) if section is not None else None
    if raw is None or raw == "":
        if default is None:
            raise ScenarioError(f"missing key {key!r}")
        return default
    try:
        return cast(raw)
    except ValueError:
        raise ScenarioError(f"bad value for {key!r}: {raw!r}") from None


def bundled_path(name: str) -> FsPath:
    """Path of a scenario shipped with the package (``.cfg`` optional)."""
    fname = name if name.endswith(".cfg") else name + ".cfg"
    return FsPath(str(resources.files("flowgate") / "data" / fname))


def bundled_names() -> list[str]:
    data = resources.files("flowgate") / "data"
    return sorted(p.name[:-4] for p in data.iterdir() if p.name.endswith(".cfg"))


def locate(ref: str | os.PathLike) -> FsPath:
    path = FsPath(ref)
    if path.exists():
        return path
    candidate = bundled_path(str(ref))
    if candidate.exists():
        return candidate
    raise ScenarioError(f"no such scenario file: {ref}")


def _capacity_overrides(topo: Topology, section) -> dict[int, float]:
    out: dict[int, float] = {}
    if section is None:
        return out
    if "default_mbps" in section:
        cap = _num(section, "default_mbps") * 1e6
        for link in topo.links:
            out[link.id] = cap
    if "host_uplink_mbps" in section:
        cap = _num(section, "host_uplink_mbps") * 1e6
        for link in topo.links:
            if topo.nodes[link.src].kind == HOST:
                out[link.id] = cap
    for key, raw in section.items():
        if key in ("default_mbps", "host_uplink_mbps"):
            continue
        cap = _num(section, key) * 1e6
        try:
            if ">" in key:
                a, b = (x.strip() for x in key.split(">", 1))
                out[topo.link_between(a, b).id] = cap
            elif "-" in key:
                a, b = (x.strip() for x in key.split("-", 1))
                link = topo.link_between(a, b)
                out[link.id] = cap
                out[topo.reverse(link.id)] = cap
            else:
                raise ScenarioError(f"bad capacity key {key!r}")
        except TopologyError:
            raise ScenarioError(f"capacity override for unknown link {key!r}") from None
    return out


def parse_scenario(path: str | os.PathLike, env: dict | None = None) -> Scenario:
    path = locate(path)
    env = os.environ if env is None else env
    p = _read(path)
    if not p.has_section("scenario"):
        raise ScenarioError("missing [scenario] section")
    sc = p["scenario"]
    ctl = p["controller"] if p.has_section("controller") else None
    adm = p["admission"] if p.has_section("admission") else None
    out = p["output"] if p.has_section("output") else None

    topo_ref = sc.get("topology", "abilene")
    try:
        topo = resolve_topology(topo_ref, path.parent)
        topo = topo.with_capacities(_capacity_overrides(
            topo, p["capacity"] if p.has_section("capacity") else None))
    except TopologyError as exc:
        raise ScenarioError(str(exc)) from None

    flows = []
    if p.has_section("flows"):
        for name, raw in p["flows"].items():
            parts = [x.strip() for x in raw.split(",")]
            if len(parts) != 6:
                raise ScenarioError(f"flow {name}: expected src, dst, pps, packet_bytes, start_s, end_s")
            try:
                flows.append(FlowSpec(name, parts[0], parts[1], *map(float, parts[2:])))
            except ValueError:
                raise ScenarioError(f"flow {name}: bad number in {raw!r}") from None

    try:
        strategy = Strategy(env.get(ENV_PREFIX + "STRATEGY") or (ctl.get("strategy") if ctl else None) or "none")
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None
    try:
        monitor = MonitorConfig(
            interval_s=_num(ctl, "interval_s", 10.0),
            threshold_pct=_num(ctl, "threshold_pct", 70.0),
            hard_timeout_s=_num(ctl, "hard_timeout_s", 30.0),
        )
        bayes = BayesParams(
            prior_la=_num(adm, "prior_la", 0.5),
            lik_rb_pos_given_la1=_num(adm, "lik_rb_pos_given_la1", 0.9),
            lik_rb_pos_given_la0=_num(adm, "lik_rb_pos_given_la0", 0.6),
            pu_eps=_num(adm, "pu_eps", 0.01),
        )
    except ValueError as exc:
        raise ScenarioError(str(exc)) from None

    formats = env.get(ENV_PREFIX + "FORMAT") or (out.get("formats") if out else None) or "csv, json"
    seed = env.get(ENV_PREFIX + "SEED") or sc.get("seed", "0")
    try:
        seed = int(seed)
    except ValueError:
        raise ScenarioError(f"bad seed {seed!r}") from None
    return Scenario(
        name=sc.get("name", path.stem),
        topology=topo,
        flows=tuple(flows),
        duration_s=_num(sc, "duration_s"),
        strategy=strategy,
        monitor=monitor,
        bayes=bayes,
        tick_s=_num(sc, "tick_s", 0.1),
        q_coeff_ms=_num(sc, "q_coeff_ms", 1.0),
        seed=seed,
        out_dir=env.get(ENV_PREFIX + "OUT_DIR") or (out.get("dir") if out else None) or "out",
        formats=parse_formats(formats),
        topology_ref=topo_ref,
    )


def parse_formats(raw: str) -> tuple[str, ...]:
    formats = tuple(x.strip() for x in raw.split(",") if x.strip())
    for f in formats:
        if f not in ("csv", "json"):
            raise ScenarioError(f"unknown output format {f!r}")
    if not formats:
        raise ScenarioError("no output format")
    return formats


def parse_sweep(path: str | os.PathLike, env: dict | None = None) -> SweepSpec:
    path = locate(path)
    p = _read(path)
    if not p.has_section("sweep"):
        raise ScenarioError("missing [sweep] section")
    sw = p["sweep"]
    base_ref = sw.get("base")
    if not base_ref:
        raise ScenarioError("sweep needs a base scenario")
    base_path = path.parent / base_ref
    base = parse_scenario(base_path if base_path.exists() else base_ref, env)
    try:
        values = tuple(float(v) for v in sw.get("values", "").split(",") if v.strip())
        strategies = tuple(Strategy(s.strip()) for s in sw.get("strategies", "none, proactive").split(",")
                           if s.strip())
    except ValueError as exc:
        raise ScenarioError(f"bad sweep definition: {exc}") from None
    return SweepSpec(sw.get("name", path.stem), base, sw.get("axis", ""), values, strategies)
