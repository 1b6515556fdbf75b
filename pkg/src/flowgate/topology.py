"""Network graph model: nodes, directed capacity-weighted links, exclusion
overlays and deterministic shortest paths.

Every physical cable is stored as two directed links.  Cable ``i`` produces
link ``2*i`` (as declared) and link ``2*i + 1`` (reverse direction), so link
ids are small integers and the lexicographic tie-break between equal-weight
paths is reproducible.
"""

from __future__ import annotations

import configparser
import heapq
import math
from dataclasses import dataclass, field, replace
from pathlib import Path as FsPath
from typing import Iterable, Mapping

INFINITE = math.inf

SWITCH = "switch"
HOST = "host"


class TopologyError(ValueError):
    pass


class MalformedTopology(TopologyError):
    def __init__(self, message: str, element=None):
        super().__init__(message if element is None else f"{message}: {element!r}")
        self.element = element


class UnknownLink(TopologyError, KeyError):
    pass


class UnknownNode(TopologyError, KeyError):
    pass


@dataclass(frozen=True)
class Node:
    id: int
    name: str
    kind: str = SWITCH


@dataclass(frozen=True)
class Link:
    id: int
    src: int
    dst: int
    capacity_bps: float
    prop_delay_ms: float = 0.0
    weight: float = 1.0
    cable: int = 0


@dataclass(frozen=True)
class Path:
    src: int
    dst: int
    links: tuple[int, ...] = ()

    def __len__(self) -> int:
        return len(self.links)

    def __iter__(self):
        return iter(self.links)


@dataclass(frozen=True)
class Topology:
    nodes: tuple[Node, ...]
    links: tuple[Link, ...]
    excluded: frozenset[int] = frozenset()
    _by_name: Mapping[str, int] = field(default=None, repr=False, compare=False)
    _adjacency: Mapping[int, tuple[int, ...]] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self._by_name is None:
            object.__setattr__(self, "_by_name", {n.name: n.id for n in self.nodes})
        if self._adjacency is None:
            adj: dict[int, list[int]] = {n.id: [] for n in self.nodes}
            for link in self.links:
                adj[link.src].append(link.id)
            object.__setattr__(self, "_adjacency", {k: tuple(sorted(v)) for k, v in adj.items()})

    @property
    def adjacency(self) -> Mapping[int, tuple[int, ...]]:
        return self._adjacency

    def node(self, ref: int | str) -> Node:
        return self.nodes[self.node_id(ref)]

    def node_id(self, ref: int | str) -> int:
        if isinstance(ref, str):
            try:
                return self._by_name[ref]
            except KeyError:
                raise UnknownNode(ref) from None
        if not 0 <= ref < len(self.nodes):
            raise UnknownNode(ref)
        return ref

    def link(self, link_id: int) -> Link:
        if not 0 <= link_id < len(self.links):
            raise UnknownLink(link_id)
        return self.links[link_id]

    def weight(self, link_id: int) -> float:
        if link_id in self.excluded:
            return INFINITE
        return self.link(link_id).weight

    def link_between(self, a: int | str, b: int | str) -> Link:
        a, b = self.node_id(a), self.node_id(b)
        for lid in self._adjacency[a]:
            if self.links[lid].dst == b:
                return self.links[lid]
        raise UnknownLink(f"{self.nodes[a].name}->{self.nodes[b].name}")

    def reverse(self, link_id: int) -> int:
        return link_id ^ 1

    def link_name(self, link_id: int) -> str:
        link = self.link(link_id)
        return f"{self.nodes[link.src].name}->{self.nodes[link.dst].name}"

    def switches(self) -> list[Node]:
        return [n for n in self.nodes if n.kind == SWITCH]

    def hosts(self) -> list[Node]:
        return [n for n in self.nodes if n.kind == HOST]

    def is_switch_port(self, link_id: int) -> bool:
        """True if the link leaves a switch, i.e. it is visible in port stats."""
        return self.nodes[self.link(link_id).src].kind == SWITCH

    def path_nodes(self, path: Path) -> list[int]:
        nodes = [path.src]
        for lid in path.links:
            nodes.append(self.links[lid].dst)
        return nodes

    def path_weight(self, path: Path) -> float:
        return sum(self.weight(lid) for lid in path.links)

    def reverse_path(self, path: Path) -> Path:
        return Path(path.dst, path.src, tuple(self.reverse(l) for l in reversed(path.links)))

    def with_capacities(self, overrides: Mapping[int, float]) -> "Topology":
        """Copy with per-link capacity changes (link id -> bps)."""
        links = tuple(
            replace(l, capacity_bps=float(overrides[l.id])) if l.id in overrides else l
            for l in self.links
        )
        for lid, cap in overrides.items():
            self.link(lid)
            if not cap > 0:
                raise MalformedTopology("capacity must be positive", self.link_name(lid))
        return Topology(self.nodes, links, self.excluded)


def load_topology(spec: Mapping) -> Topology:
    """Validate a topology description and build a :class:`Topology`.

    ``spec`` has ``nodes``: a sequence of ``(name, kind)`` pairs and
    ``links``: a sequence of ``(a, b, capacity_mbps, prop_delay_ms)`` cables.
    Both directions are generated for every cable.
    """
    raw_nodes = list(spec.get("nodes") or [])
    raw_links = list(spec.get("links") or [])
    if not raw_nodes:
        raise MalformedTopology("topology has no nodes")

    nodes: list[Node] = []
    seen: set[str] = set()
    for entry in raw_nodes:
        name, kind = (entry, SWITCH) if isinstance(entry, str) else entry
        name = str(name).strip()
        if not name:
            raise MalformedTopology("empty node name", entry)
        if name in seen:
            raise MalformedTopology("duplicate node", name)
        if kind not in (SWITCH, HOST):
            raise MalformedTopology("unknown node kind", entry)
        seen.add(name)
        nodes.append(Node(len(nodes), name, kind))
    index = {n.name: n.id for n in nodes}

    links: list[Link] = []
    cables: set[frozenset[int]] = set()
    for cable, entry in enumerate(raw_links):
        try:
            a, b, cap_mbps, delay = entry
            cap_mbps, delay = float(cap_mbps), float(delay)
        except (TypeError, ValueError):
            raise MalformedTopology("link needs src, dst, capacity_mbps, prop_delay_ms", entry) from None
        for end in (a, b):
            if end not in index:
                raise MalformedTopology("link references unknown node", entry)
        if a == b:
            raise MalformedTopology("self-loop", entry)
        key = frozenset((index[a], index[b]))
        if key in cables:
            raise MalformedTopology("duplicate link", entry)
        if not cap_mbps > 0 or not math.isfinite(cap_mbps):
            raise MalformedTopology("capacity must be positive", entry)
        if delay < 0:
            raise MalformedTopology("negative propagation delay", entry)
        cables.add(key)
        ia, ib = index[a], index[b]
        links.append(Link(2 * cable, ia, ib, cap_mbps * 1e6, delay, 1.0, cable))
        links.append(Link(2 * cable + 1, ib, ia, cap_mbps * 1e6, delay, 1.0, cable))

    for node in nodes:
        if node.kind != HOST:
            continue
        attached = [l for l in links if l.src == node.id]
        if len(attached) != 1 or nodes[attached[0].dst].kind != SWITCH:
            raise MalformedTopology("host must attach to exactly one switch", node.name)

    return Topology(tuple(nodes), tuple(links))


def parse_topology_text(text: str) -> Topology:
    """Parse the ``[nodes]`` / ``[links]`` text format.

    ::

        [nodes]
        A = switch
        H1 = host

        [links]
        H1, A, 20, 0.1
    """
    parser = configparser.ConfigParser(allow_no_value=True, delimiters=("=",),
                                       comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise MalformedTopology(str(exc).splitlines()[0]) from None
    if not parser.has_section("nodes"):
        raise MalformedTopology("missing [nodes] section")
    nodes = [(name, (kind or SWITCH).strip()) for name, kind in parser.items("nodes")]
    links = []
    if parser.has_section("links"):
        for line, _ in parser.items("links"):
            links.append(tuple(part.strip() for part in line.split(",")))
    return load_topology({"nodes": nodes, "links": links})


# Abilene backbone (Internet Topology Zoo): 11 PoPs, 14 cables.  Letters run
# breadth-first from Houston, so A is a three-port PoP and hosts are numbered
# roughly nearest-first from H1.  Host Hk hangs off the k-th switch.
ABILENE_POPS = {
    "A": "Houston",
    "B": "Atlanta",
    "C": "Los Angeles",
    "D": "Kansas City",
    "E": "Washington DC",
    "F": "Indianapolis",
    "G": "Sunnyvale",
    "H": "Denver",
    "I": "New York",
    "J": "Chicago",
    "K": "Seattle",
}
# Zoo edge order
ABILENE_CABLES = [
    ("I", "J"), ("I", "E"), ("J", "F"), ("E", "B"), ("K", "G"), ("K", "H"), ("G", "C"),
    ("G", "H"), ("C", "A"), ("H", "D"), ("D", "A"), ("D", "F"), ("A", "B"), ("B", "F"),
]


def abilene_spec(capacity_mbps: float = 20.0, core_delay_ms: float = 1.0,
                 host_delay_ms: float = 0.1) -> dict:
    switches = list(ABILENE_POPS)
    hosts = [f"H{i + 1}" for i in range(len(switches))]
    links = [(a, b, capacity_mbps, core_delay_ms) for a, b in ABILENE_CABLES]
    links += [(h, s, capacity_mbps, host_delay_ms) for h, s in zip(hosts, switches)]
    return {"nodes": [(s, SWITCH) for s in switches] + [(h, HOST) for h in hosts],
            "links": links}


def _small(switches: Iterable[str], cables, capacity_mbps=20.0, delay_ms=1.0) -> dict:
    switches = list(switches)
    hosts = [f"H{i + 1}" for i in range(len(switches))]
    links = [(a, b, capacity_mbps, delay_ms) for a, b in cables]
    links += [(h, s, capacity_mbps, 0.1) for h, s in zip(hosts, switches)]
    return {"nodes": [(s, SWITCH) for s in switches] + [(h, HOST) for h in hosts],
            "links": links}


BUILTINS = {
    "abilene": abilene_spec,
    "triangle": lambda: _small("ABC", [("A", "B"), ("A", "C"), ("C", "B")]),
    "line2": lambda: _small("AB", [("A", "B")]),
}


def builtin_topology(name: str) -> Topology:
    try:
        factory = BUILTINS[name]
    except KeyError:
        raise MalformedTopology("unknown built-in topology", name) from None
    return load_topology(factory())


def resolve_topology(ref: str, base_dir: FsPath | None = None) -> Topology:
    """Built-in name or path to a topology file."""
    if ref in BUILTINS:
        return builtin_topology(ref)
    path = FsPath(ref)
    if not path.is_absolute() and base_dir is not None:
        path = base_dir / path
    if not path.exists():
        raise MalformedTopology("topology not found", ref)
    return parse_topology_text(path.read_text())


def virtual_overlay(t: Topology, excluded: Iterable[int]) -> Topology:
    """Copy of ``t`` where every link in ``excluded`` weighs INFINITE."""
    excluded = frozenset(excluded)
    for lid in excluded:
        t.link(lid)
    if not excluded:
        return t
    return replace(t, excluded=t.excluded | excluded)


def clear_exclusions(t: Topology) -> Topology:
    return replace(t, excluded=frozenset())


def shortest_path(t: Topology, src: int | str, dst: int | str) -> Path | None:
    """Dijkstra over finite-weight links.

    Among equal-weight paths the lexicographically smallest link-id sequence
    wins.  Heap entries carry the link sequence so the first time a node is
    popped its (weight, sequence) pair is minimal.
    """
    src, dst = t.node_id(src), t.node_id(dst)
    if src == dst:
        return Path(src, dst, ())

    # (weight, link sequence) is unique per entry, so the trailing fields
    # never take part in heap ordering.
    heap: list = [(0.0, (), src, frozenset((src,)))]
    done: set[int] = set()
    while heap:
        dist, seq, node, visited = heapq.heappop(heap)
        if node in done:
            continue
        done.add(node)
        if node == dst:
            return Path(src, dst, seq)
        for lid in t.adjacency[node]:
            w = t.weight(lid)
            if w == INFINITE:
                continue
            nxt = t.links[lid].dst
            if nxt in done or nxt in visited:
                continue
            heapq.heappush(heap, (dist + w, seq + (lid,), nxt, visited | {nxt}))
    return None
