"""Synthetic networks: the small two-path observation fixture, a hub/mid/leaf
base graph for flooding runs, and the botmaster + private C&C layout."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

from .topology import (
    DEFAULT_CAPACITY_FLOOR_SAT,
    DEFAULT_ONCHAIN_FEE_SAT,
    ChannelGraph,
    Role,
)

CNC_CHANNELS = 3
CNC_CHANNEL_SAT = DEFAULT_CAPACITY_FLOOR_SAT


def two_path_fixture(capacity_sat: int = 1_000_000) -> ChannelGraph:
    """BM reaches the private C&C over A->B->C or D->E->F; B and E are linked.

    Observers in the detection scenarios sit at A, D and the C&C.
    """
    g = ChannelGraph(close_fee_sat=0)
    g.add_node("BM", wallet_sat=0, role=Role.BOTMASTER)
    for name in "ABCDEF":
        g.add_node(name)
    g.add_node("CnC", role=Role.CNC)
    for a, b in [("BM", "A"), ("A", "B"), ("B", "C"), ("BM", "D"), ("D", "E"),
                 ("E", "F"), ("B", "E")]:
        g.add_existing_channel(a, b, capacity_sat)
    for peer in ("C", "F"):
        g.add_existing_channel(peer, "CnC", capacity_sat, is_private=True)
    return g


@dataclass
class HubTreeParams:
    hubs: int = 10
    mids_per_hub: int = 3
    leaves_per_mid: int = 5
    min_capacity_sat: int = 200_000
    max_capacity_sat: int = 5_000_000
    capacity_step_sat: int = 10_000


def hub_tree(rng: random.Random, params: HubTreeParams = HubTreeParams(),
             graph: ChannelGraph = None) -> ChannelGraph:
    """Clique of hubs, each with mids, each mid with leaves; balanced channels.

    Capacities are round multiples of ``capacity_step_sat``, like most real
    channels. Node ids are h<i>, m<i>_<j>, l<i>_<j>_<k>.
    """
    g = graph if graph is not None else ChannelGraph(close_fee_sat=0)

    def cap():
        lo = params.min_capacity_sat // params.capacity_step_sat
        hi = params.max_capacity_sat // params.capacity_step_sat
        return rng.randint(lo, hi) * params.capacity_step_sat

    hubs = [f"h{i}" for i in range(params.hubs)]
    for h in hubs:
        g.add_node(h)
    for i, a in enumerate(hubs):
        for b in hubs[i + 1:]:
            g.add_existing_channel(a, b, cap())
    for i, h in enumerate(hubs):
        for j in range(params.mids_per_hub):
            m = f"m{i}_{j}"
            g.add_node(m)
            g.add_existing_channel(h, m, cap())
            for k in range(params.leaves_per_mid):
                leaf = f"l{i}_{j}_{k}"
                g.add_node(leaf)
                g.add_existing_channel(m, leaf, cap())
    return g


@dataclass
class LnbotNetwork:
    graph: ChannelGraph
    botmaster: str
    cncs: List[str]
    collector: str
    innocents: List[str] = field(default_factory=list)


def lnbot_network(n_cnc: int, rng: random.Random, *, push_sat: int = 10_000,
                  innocents: int = 12, onchain_fee_sat: int = DEFAULT_ONCHAIN_FEE_SAT,
                  close_fee_sat: int = 0) -> LnbotNetwork:
    """Botmaster and collector on a public ring-with-chords of innocent nodes;
    every C&C is private with three floor-capacity channels into it.

    C&C wallets hold exactly the three channel capacities plus open fees.
    ``push_sat`` gives each C&C channel inbound liquidity so it can receive.
    """
    g = ChannelGraph(onchain_fee_sat=onchain_fee_sat, close_fee_sat=close_fee_sat)
    pub = [f"n{i:02d}" for i in range(innocents)]
    for p in pub:
        g.add_node(p)
    for i, p in enumerate(pub):
        g.add_existing_channel(p, pub[(i + 1) % innocents], 5_000_000)
    for i in range(0, innocents, 3):
        g.add_existing_channel(pub[i], pub[(i + innocents // 2) % innocents], 5_000_000)
    g.add_node("botmaster", role=Role.BOTMASTER)
    g.add_existing_channel("botmaster", pub[0], 10_000_000, balance1_msat=10_000_000_000)
    g.add_node("collector", role=Role.COLLECTOR)
    g.add_existing_channel(pub[innocents // 2], "collector", 5_000_000)
    # C&Cs attach away from the botmaster's entry so routes have several hops
    far = [p for i, p in enumerate(pub) if 2 <= i <= innocents - 2]
    cncs = []
    for c in range(n_cnc):
        cid = f"cnc{c:03d}"
        g.add_node(cid, role=Role.CNC)
        g.fund(cid, CNC_CHANNELS * (CNC_CHANNEL_SAT + onchain_fee_sat))
        for peer in rng.sample(far, CNC_CHANNELS):
            g.open_channel(cid, peer, CNC_CHANNEL_SAT, is_private=True, push_sat=push_sat)
        cncs.append(cid)
    return LnbotNetwork(g, "botmaster", cncs, "collector", pub)


def route_hop_histogram(hops: List[int]) -> Dict[int, int]:
    out: Dict[int, int] = {}
    for h in hops:
        out[h] = out.get(h, 0) + 1
    return dict(sorted(out.items()))


def line_topology(nodes: List[str]) -> Dict[str, List[str]]:
    out: Dict[str, List[str]] = {n: [] for n in nodes}
    for a, b in zip(nodes, nodes[1:]):
        out[a].append(b)
        out[b].append(a)
    return out


def mary_tree(m: int, n: int) -> Tuple[List[str], Dict[str, List[str]]]:
    """Complete m-ary tree of n nodes (heap numbering), edges both ways."""
    names = [f"t{i:03d}" for i in range(n)]
    adj: Dict[str, List[str]] = {x: [] for x in names}
    for i in range(1, n):
        parent = (i - 1) // m
        adj[names[parent]].append(names[i])
        adj[names[i]].append(names[parent])
    return names, adj
