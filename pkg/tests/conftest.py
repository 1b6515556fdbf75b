import pytest

from flowgate.dataplane import Flow, SimState
from flowgate.topology import load_topology


def line_topology(cap_mbps=10.0, delay_ms=1.0):
    """H1 - A - B - H2 with a single core cable."""
    return load_topology({
        "nodes": [("A", "switch"), ("B", "switch"), ("H1", "host"), ("H2", "host")],
        "links": [("A", "B", cap_mbps, delay_ms), ("H1", "A", 1000, 0.0), ("H2", "B", 1000, 0.0)],
    })


def flow(fid, topo, src, dst, mbps, start=0.0, end=1e9, packet_bytes=1000):
    pps = mbps * 1e6 / (8 * packet_bytes)
    return Flow(fid, topo.node_id(src), topo.node_id(dst), pps, packet_bytes, start, end)


def state_with(topo, flows, tick_s=0.1, q_coeff_ms=1.0):
    return SimState.create(topo, flows, tick_s, q_coeff_ms)


@pytest.fixture
def line():
    return line_topology()
