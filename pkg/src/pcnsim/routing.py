"""Source routing: fee computation, path finding, routing hints, onion packets."""

from __future__ import annotations

import hashlib
import heapq
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

from .errors import NoRouteError, PayloadTooLargeError, RouteConstraintError
from .topology import MSAT_PER_SAT, Channel, ChannelGraph

ONION_PAYLOAD_BYTES = 1300
TIMELOCK_DELTA = 40


@dataclass(frozen=True)
class FeeModel:
    kind: str = "per_channel_default"  # or "fixed_per_payment"
    fixed_fee_sat: int = 0

    def __post_init__(self):
        if self.kind not in ("per_channel_default", "fixed_per_payment"):
            raise ValueError(f"unknown fee model {self.kind!r}")
        if self.fixed_fee_sat < 0:
            raise ValueError("fixed fee must be >= 0")

    @classmethod
    def fixed(cls, sat: int) -> "FeeModel":
        return cls("fixed_per_payment", sat)

    @property
    def is_fixed(self) -> bool:
        return self.kind == "fixed_per_payment"


PER_CHANNEL = FeeModel()


def compute_fee(channel: Channel, amount_msat: int) -> int:
    if amount_msat <= 0:
        raise ValueError("amount must be positive")
    return channel.base_fee_msat + amount_msat * channel.prop_fee_ppm // 1_000_000


@dataclass(frozen=True)
class RouteHop:
    chan_id: str
    from_node: str
    to_node: str
    amt_to_forward_msat: int
    fee_msat: int
    timelock_delta: int = TIMELOCK_DELTA

    @property
    def amount_msat(self) -> int:
        """Amount carried over this hop's channel."""
        return self.amt_to_forward_msat + self.fee_msat


@dataclass(frozen=True)
class Route:
    hops: Tuple[RouteHop, ...]
    total_fee_msat: int
    total_amt_msat: int

    @property
    def source(self) -> str:
        return self.hops[0].from_node

    @property
    def destination(self) -> str:
        return self.hops[-1].to_node

    @property
    def nodes(self) -> List[str]:
        return [self.hops[0].from_node] + [h.to_node for h in self.hops]

    def __len__(self):
        return len(self.hops)

    def to_dict(self) -> dict:
        return {
            "total_fee_msat": self.total_fee_msat,
            "total_amt_msat": self.total_amt_msat,
            "hops": [
                {"chan_id": h.chan_id, "from": h.from_node, "to": h.to_node,
                 "amt_to_forward_msat": h.amt_to_forward_msat, "fee_msat": h.fee_msat,
                 "timelock_delta": h.timelock_delta}
                for h in self.hops
            ],
        }


@dataclass(frozen=True)
class RoutingHint:
    hidden_node: str
    entry_peer: str
    chan_id: str
    base_fee_msat: int
    prop_fee_ppm: int


def hints_for(graph: ChannelGraph, node: str) -> List[RoutingHint]:
    """Hints for every open private channel of ``node`` (known to whoever set it up)."""
    out = []
    for c in graph.channels_of(node):
        if c.is_private:
            out.append(RoutingHint(node, c.peer(node), c.chan_id, c.base_fee_msat, c.prop_fee_ppm))
    return out


def build_route(graph: ChannelGraph, src: str, chan_ids: Sequence[str], amount_msat: int,
                fee_model: FeeModel = PER_CHANNEL) -> Route:
    """Turn an explicit channel sequence into a Route with per-hop amounts."""
    if amount_msat <= 0:
        raise ValueError("amount must be positive")
    if not chan_ids:
        raise NoRouteError("empty route")
    path = [src]
    for cid in chan_ids:
        path.append(graph.channel(cid).peer(path[-1]))
    n = len(chan_ids)
    fees = [0] * n  # fees[i] is kept by path[i+1]
    if fee_model.is_fixed:
        intermediaries = n - 1
        if intermediaries:
            q, r = divmod(fee_model.fixed_fee_sat * MSAT_PER_SAT, intermediaries)
            for i in range(intermediaries):
                fees[i] = q + (1 if i < r else 0)
    hops: List[RouteHop] = []
    forward = amount_msat
    for i in range(n - 1, -1, -1):
        if not fee_model.is_fixed and i < n - 1:
            fees[i] = compute_fee(graph.channel(chan_ids[i + 1]), forward)
        hops.append(RouteHop(chan_ids[i], path[i], path[i + 1], forward, fees[i]))
        forward += fees[i]
    hops.reverse()
    return Route(tuple(hops), forward - amount_msat, forward)


def route_from_path(graph: ChannelGraph, path: Sequence[str], amount_msat: int,
                    fee_model: FeeModel = PER_CHANNEL) -> Route:
    """Source-route along a node sequence, choosing the best-funded channel per step."""
    chans = []
    for a, b in zip(path, path[1:]):
        cands = [c for c in graph.channels_of(a) if c.peer(a) == b]
        if not cands:
            raise NoRouteError(f"no open channel between {a} and {b}")
        cands.sort(key=lambda c: (-c.balance(a), c.chan_id))
        chans.append(cands[0].chan_id)
    return build_route(graph, path[0], chans, amount_msat, fee_model)


def _usable(chan: Channel, frm: str, to: str, src: str, dst: str, hinted: set) -> bool:
    if not chan.is_open:
        return False
    if not chan.is_private:
        return True
    if frm == src:
        return True  # own channel
    return to == dst and chan.chan_id in hinted


def find_route(graph: ChannelGraph, src: str, dst: str, amount_msat: int,
               hints: Iterable[RoutingHint] = (), max_hops: Optional[int] = None,
               max_fee_msat: Optional[int] = None, fee_model: FeeModel = PER_CHANNEL,
               check_liquidity: bool = True) -> Route:
    """Minimum-fee route (hop count, then node path, breaks ties).

    Runs backwards from ``dst`` so per-hop fees can be computed from the amount
    each intermediary must forward.
    """
    graph.node(src)
    graph.node(dst)
    if src == dst:
        raise ValueError("source and destination must differ")
    if amount_msat <= 0:
        raise ValueError("amount must be positive")
    hinted = {h.chan_id for h in hints if h.hidden_node == dst}
    fixed = fee_model.is_fixed
    # conservative liquidity bound under a fixed route fee
    slack = fee_model.fixed_fee_sat * MSAT_PER_SAT if fixed else 0

    # label: (fee, hops, path-from-node-to-dst); state keyed by node (and hops if capped)
    nodes, channels, adjacency = graph.nodes, graph.channels, graph._adjacency
    start = (0, 0, (graph.nodes[dst].pubkey,))
    heap = [(start, dst, amount_msat, ())]
    settled = set()
    best = None
    while heap:
        (fee, hops, keypath), node, amt_in, chans = heapq.heappop(heap)
        state = (node, hops) if max_hops is not None else node
        if state in settled:
            continue
        settled.add(state)
        if node == src:
            best = (fee, chans)
            break
        if max_hops is not None and hops >= max_hops:
            continue
        for cid in adjacency[node]:
            chan = channels[cid]
            if chan.close_time is not None:
                continue
            u = chan.node1 if chan.node2 == node else chan.node2
            pk = nodes[u].pubkey
            if pk in keypath:
                continue
            if chan.is_private and not _usable(chan, u, node, src, dst, hinted):
                continue
            if check_liquidity and chan.balance(u) < amt_in + slack:
                continue
            if u == src:
                label = (fee, hops + 1, (pk,) + keypath)
                heapq.heappush(heap, (label, u, amt_in, (chan.chan_id,) + chans))
                continue
            f = 0 if fixed else compute_fee(chan, amt_in)
            label = (fee + f, hops + 1, (pk,) + keypath)
            heapq.heappush(heap, (label, u, amt_in + f, (chan.chan_id,) + chans))
    if best is None:
        _explain_failure(graph, src, dst, amount_msat, hints, max_hops, fee_model, check_liquidity)
    route = build_route(graph, src, best[1], amount_msat, fee_model)
    if max_fee_msat is not None and route.total_fee_msat > max_fee_msat:
        raise RouteConstraintError(
            f"cheapest route fee {route.total_fee_msat} msat exceeds cap {max_fee_msat}")
    return route


def _explain_failure(graph, src, dst, amount_msat, hints, max_hops, fee_model, check_liquidity):
    if max_hops is not None:
        try:
            r = find_route(graph, src, dst, amount_msat, hints, None, None, fee_model,
                           check_liquidity)
        except NoRouteError:
            pass
        else:
            raise RouteConstraintError(
                f"shortest feasible route has {len(r)} hops, cap is {max_hops}")
    if check_liquidity:
        try:
            r = find_route(graph, src, dst, amount_msat, hints, None, None, fee_model, False)
        except NoRouteError:
            pass
        else:
            for i, h in enumerate(r.hops, start=1):
                if graph.channel(h.chan_id).balance(h.from_node) < h.amount_msat:
                    raise NoRouteError(
                        f"no route {src}->{dst} with liquidity for {amount_msat} msat; "
                        f"bottleneck at hop {i} (channel {h.chan_id})", bottleneck=i)
    raise NoRouteError(f"{dst} unreachable from {src}")


# ---------- onion packets ----------

def payload_size(payload) -> int:
    if payload is None:
        return 0
    if isinstance(payload, (bytes, bytearray)):
        return len(payload)
    return payload.serialized_size()


@dataclass
class OnionPacket:
    per_hop: Tuple[bytes, ...]
    _final_node: str = field(repr=False)
    _final_payload: object = field(default=None, repr=False)
    payload_capacity: int = ONION_PAYLOAD_BYTES

    @property
    def size(self) -> int:
        return self.payload_capacity

    def payload_for(self, node: str):
        """What ``node`` can read from the packet: the payload only at the final hop."""
        if node != self._final_node:
            return None
        return self._final_payload

    def hop_entry(self, index: int) -> bytes:
        return self.per_hop[index]


def build_onion(route: Route, final_payload=None) -> OnionPacket:
    size = payload_size(final_payload)
    if size > ONION_PAYLOAD_BYTES:
        raise PayloadTooLargeError(size, ONION_PAYLOAD_BYTES)
    entries = tuple(
        hashlib.sha256(f"{i}|{h.chan_id}|{h.amt_to_forward_msat}|{h.timelock_delta}".encode()).digest()
        for i, h in enumerate(route.hops)
    )
    return OnionPacket(entries, route.destination, final_payload)

