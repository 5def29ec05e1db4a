"""Distributed C&C formation through capacity-policy rendezvous channels.

A joining server opens a public channel whose capacity satisfies a shared
predicate to one of the most connected nodes, then scans announced channels
for others satisfying it. Older servers register newcomers as they announce
and close their own rendezvous channel after ``m`` of them, so only about
``m`` servers are discoverable at any time.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from .errors import ConfigError, FormationError, InsufficientFundsError
from .topology import Announcement, Channel, ChannelGraph, Role

DIGEST_POLICY = "digest-mod"
SIN_POLICY = "sin"


def _digest_ok(capacity: int, xi, modulus: int) -> bool:
    h = hashlib.sha256(f"{capacity}|{xi}".encode()).digest()
    return int.from_bytes(h, "big") % modulus == 0


@dataclass(frozen=True)
class PolicyK:
    f_id: str
    xi: object
    valid_capacities: Tuple[int, ...]
    modulus: int = 1000
    eps: float = 1e-4
    floor_sat: int = 20_000

    def contains(self, capacity_sat: int) -> bool:
        """Recompute the predicate; any capacity at or above the floor may match."""
        if capacity_sat < self.floor_sat:
            return False
        if self.f_id == DIGEST_POLICY:
            return _digest_ok(capacity_sat, self.xi, self.modulus)
        return abs(math.sin(capacity_sat) - float(self.xi)) <= self.eps

    __contains__ = contains


def derive_capacities(policy_seed, n: int, *, f_id: str = DIGEST_POLICY, modulus: int = 1000,
                      eps: float = 1e-4, floor_sat: int = 20_000) -> PolicyK:
    """The ``n`` smallest capacities >= floor that satisfy the predicate."""
    if n < 1:
        raise ValueError("need at least one capacity")
    if f_id == SIN_POLICY and not -1.0 <= float(policy_seed) <= 1.0:
        raise ValueError("sin policy target must lie in [-1, 1]")
    if f_id not in (DIGEST_POLICY, SIN_POLICY):
        raise ValueError(f"unknown policy function {f_id!r}")
    probe = PolicyK(f_id, policy_seed, (), modulus, eps, floor_sat)
    found: List[int] = []
    k = floor_sat
    while len(found) < n:
        if probe.contains(k):
            found.append(k)
        k += 1
    return PolicyK(f_id, policy_seed, tuple(found), modulus, eps, floor_sat)


def infection_gate(rng: random.Random, p: float) -> bool:
    if not 0.0 <= p <= 1.0:
        raise ValueError("probability must lie in [0, 1]")
    return rng.random() < p


@dataclass(frozen=True)
class FormationParams:
    h: int = 10
    m: int = 3
    p: float = 0.3
    retry_open_max: int = 3
    wallet_sat: int = 1_000_000
    routing_capacity_sat: int = 200_000
    routing_push_sat: int = 100_000

    def __post_init__(self):
        if self.h < 1 or self.m < 1:
            raise ValueError("h and m must be >= 1")
        if not 0.0 < self.p < 0.5:
            raise ValueError("infection probability must lie in (0, 0.5)")
        if self.retry_open_max < 0:
            raise ValueError("retry_open_max must be >= 0")


@dataclass
class CncState:
    node: str
    innocent_channel: Optional[str] = None
    neighbors: List[str] = field(default_factory=list)
    older: List[str] = field(default_factory=list)
    newer: List[str] = field(default_factory=list)
    discovered_at: Dict[str, int] = field(default_factory=dict)
    newcomer_counter: int = 0
    active: bool = True
    bootstrap: bool = False
    routing_channel: Optional[str] = None
    joined_at: int = 0
    innocent_opens: int = 0

    def register(self, other: str, at: int, newer: bool) -> bool:
        if other == self.node or other in self.discovered_at:
            return False
        self.neighbors.append(other)
        self.discovered_at[other] = at
        (self.newer if newer else self.older).append(other)
        return True

    def discoverable(self, graph: ChannelGraph) -> bool:
        return self.innocent_channel is not None and graph.channels[self.innocent_channel].is_open


def scan_policy(graph: ChannelGraph, policy: PolicyK, exclude: str = "") -> List[Channel]:
    return [c for c in graph.public_channels()
            if c.funder != exclude and policy.contains(c.capacity_sat)]


def _open_innocent(graph, state, params, policy, rng, now):
    candidates = [x for x in graph.most_connected(params.h + 1) if x != state.node][:params.h]
    peer = rng.choice(candidates)
    cap = rng.choice(policy.valid_capacities)
    try:
        state.innocent_channel = graph.open_channel(state.node, peer, cap, time=now)
    except InsufficientFundsError as exc:
        raise FormationError(f"{state.node} cannot fund its rendezvous channel: {exc}") from exc
    state.innocent_opens += 1


def _off_policy_capacity(rng, policy, lo, hi):
    cap = rng.randint(lo, hi)
    while policy.contains(cap):
        cap += 1
    return cap


def join_as_cnc(engine, node: str, params: FormationParams, policy: PolicyK) -> CncState:
    graph = engine.graph
    rng = engine.rng("formation")
    now = engine.now
    state = CncState(node, joined_at=now)
    _open_innocent(graph, state, params, policy, rng, now)
    # a second, ordinary channel keeps the server routable once the rendezvous closes
    pool = [n.id for n in graph.nodes.values() if n.role == Role.INNOCENT and n.id != node]
    peer = rng.choice(pool)
    cap = _off_policy_capacity(rng, policy, params.routing_capacity_sat,
                               params.routing_capacity_sat * 2)
    try:
        state.routing_channel = graph.open_channel(node, peer, cap, time=now,
                                                   push_sat=min(params.routing_push_sat, cap))
    except InsufficientFundsError as exc:
        raise FormationError(f"{node} cannot fund its routing channel: {exc}") from exc

    need = min(2, params.m)
    for attempt in range(params.retry_open_max + 1):
        if attempt:
            graph.close_channel(state.innocent_channel, node, time=now)
            _open_innocent(graph, state, params, policy, rng, now)
        for chan in scan_policy(graph, policy, exclude=node):
            state.register(chan.funder, now, newer=False)
        if len(state.older) >= need:
            break
    state.bootstrap = len(state.older) < need
    return state


def on_new_channel(state: CncState, channel, policy: PolicyK, m: int,
                   graph: Optional[ChannelGraph] = None, time: int = 0) -> CncState:
    """React to a public channel announcement; ``channel`` is an Announcement or Channel."""
    if not state.active or state.innocent_channel is None:
        return state
    if graph is not None and not state.discoverable(graph):
        return state
    if not policy.contains(channel.capacity_sat):
        return state
    opener = channel.node1
    if state.newcomer_counter < m and state.register(opener, time, newer=True):
        state.newcomer_counter += 1
    if state.newcomer_counter >= m and graph is not None and state.discoverable(graph):
        graph.close_channel(state.innocent_channel, state.node, time=time)
    return state


@dataclass
class FormationResult:
    states: Dict[str, CncState]
    order: List[str]
    window_history: List[Tuple[int, int]]
    false_positives: int

    def edges(self) -> List[dict]:
        return [{"from": s.node, "to": nb, "discovered_at": s.discovered_at[nb]}
                for s in (self.states[x] for x in self.order) for nb in s.neighbors]

    def topology(self, cnc_only: bool = True) -> Dict[str, List[str]]:
        """Neighbor lists in registration order."""
        return {x: [nb for nb in self.states[x].neighbors
                    if not cnc_only or nb in self.states]
                for x in self.order}

    def undirected(self) -> Dict[str, set]:
        adj = {x: set() for x in self.order}
        for x, nbs in self.topology().items():
            for y in nbs:
                adj[x].add(y)
                adj[y].add(x)
        return adj

    def bootstrap_nodes(self) -> List[str]:
        return [x for x in self.order if self.states[x].bootstrap]


def arrival_times(rng: random.Random, n: int, mean_gap_s: float = 600.0,
                  start_ms: int = 1000) -> List[int]:
    """Strictly increasing join times with exponential gaps."""
    out, t = [], start_ms
    for _ in range(n):
        t += max(1, round(rng.expovariate(1.0 / mean_gap_s) * 1000))
        out.append(t)
    return out


def gated_arrivals(rng: random.Random, machines: int, p: float,
                   mean_gap_s: float = 600.0) -> List[int]:
    """Machines get infected at random times; each becomes a server with probability p."""
    return [t for t in arrival_times(rng, machines, mean_gap_s) if infection_gate(rng, p)]


def form_network(engine, arrival_schedule: Sequence[int], params: FormationParams,
                 policy: PolicyK, prefix: str = "cnc") -> FormationResult:
    graph = engine.graph
    public = [n for n in graph.nodes if graph.public_degree(n) > 0]
    if len(public) < params.h:
        raise ConfigError(f"base graph has {len(public)} public nodes, need h={params.h}")
    times = list(arrival_schedule)
    if any(b <= a for a, b in zip(times, times[1:])):
        raise ConfigError("arrival times must be strictly increasing")
    states: Dict[str, CncState] = {}
    order: List[str] = []
    history: List[Tuple[int, int]] = []
    for i, t in enumerate(times):
        engine.advance_to(t)
        node = f"{prefix}{i:03d}"
        graph.add_node(node, wallet_sat=params.wallet_sat, role=Role.CNC)
        cursor = len(graph.announcements)
        state = join_as_cnc(engine, node, params, policy)
        fresh: List[Announcement] = graph.announcements[cursor:]
        for other in order:
            for ann in fresh:
                on_new_channel(states[other], ann, policy, params.m, graph, t)
        states[node] = state
        order.append(node)
        history.append((t, sum(1 for x in order if states[x].discoverable(graph))))
    fps = sum(1 for x in order for nb in states[x].neighbors if nb not in states)
    return FormationResult(states, order, history, fps)


# ---------- property checks ----------

def check_window(result: FormationResult, m: int) -> bool:
    """After the first m joins, exactly m servers are discoverable (one extra allowed)."""
    for k, (_, count) in enumerate(result.window_history, start=1):
        expected = min(k, m)
        if not expected <= count <= expected + 1:
            return False
    return True


def check_mutual(result: FormationResult) -> bool:
    for x in result.order:
        s = result.states[x]
        for y in s.older:
            if y in result.states and x not in result.states[y].neighbors:
                return False
    return True


def is_connected(adj: Dict[str, Iterable[str]]) -> bool:
    nodes = list(adj)
    if len(nodes) <= 1:
        return True
    seen = {nodes[0]}
    stack = [nodes[0]]
    while stack:
        for y in adj[stack.pop()]:
            if y not in seen:
                seen.add(y)
                stack.append(y)
    return len(seen) == len(nodes)
