"""Payment-channel graph, simulated on-chain ledger and snapshot I/O.

All balances inside channels are integer millisatoshi; wallets and on-chain
amounts are integer satoshi. Sim-time is integer milliseconds.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from typing import Dict, List, Optional, Tuple

from .errors import (
    ChannelClosedError,
    InsufficientFundsError,
    PolicyError,
    SnapshotError,
    UnknownChannelError,
    UnknownNodeError,
)

MSAT_PER_SAT = 1000
SAT_PER_BTC = 100_000_000

DEFAULT_ONCHAIN_FEE_SAT = 154
DEFAULT_CAPACITY_FLOOR_SAT = 20_000
DEFAULT_BASE_FEE_MSAT = 1
DEFAULT_PROP_FEE_PPM = 1

_CHAN_ID_BASE = 1_000_000


def sat_to_btc(sat: int) -> str:
    """Exact BTC string for an integer satoshi amount, trailing zeros dropped."""
    d = (Decimal(sat) / SAT_PER_BTC).normalize()
    return format(d, "f")


class Role(str, Enum):
    INNOCENT = "innocent"
    CNC = "cnc"
    BOTMASTER = "botmaster"
    COLLECTOR = "collector"
    OBSERVER = "bot-observer"


def derive_pubkey(node_id: str) -> str:
    """Deterministic 33-byte compressed-pubkey-looking hex string."""
    digest = hashlib.sha256(f"node:{node_id}".encode()).hexdigest()
    return "02" + digest


@dataclass
class Node:
    id: str
    pubkey: str
    wallet_sat: int = 0
    role: Role = Role.INNOCENT
    accepts_keysend: bool = True
    online: bool = True

    def __setattr__(self, name, value):
        if name == "role" and "role" in self.__dict__:
            raise AttributeError("node role is fixed after creation")
        if name == "wallet_sat" and value < 0:
            raise InsufficientFundsError(f"wallet of {self.__dict__.get('id')} would go negative")
        super().__setattr__(name, value)


@dataclass
class Channel:
    chan_id: str
    node1: str
    node2: str
    capacity_sat: int
    balances: Dict[str, int]
    base_fee_msat: int = DEFAULT_BASE_FEE_MSAT
    prop_fee_ppm: int = DEFAULT_PROP_FEE_PPM
    is_private: bool = False
    open_time: int = 0
    close_time: Optional[int] = None
    funder: Optional[str] = None

    @property
    def endpoints(self) -> Tuple[str, str]:
        return (self.node1, self.node2)

    @property
    def is_open(self) -> bool:
        return self.close_time is None

    def peer(self, node: str) -> str:
        if node == self.node1:
            return self.node2
        if node == self.node2:
            return self.node1
        raise UnknownNodeError(f"{node} is not an endpoint of channel {self.chan_id}")

    def balance(self, node: str) -> int:
        """Spendable msat from ``node`` towards its peer."""
        return self.balances[node]

    def shift(self, from_node: str, amount_msat: int) -> None:
        to_node = self.peer(from_node)
        if self.balances[from_node] < amount_msat:
            raise InsufficientFundsError(
                f"channel {self.chan_id}: {from_node} has {self.balances[from_node]} msat, "
                f"needs {amount_msat}"
            )
        self.balances[from_node] -= amount_msat
        self.balances[to_node] += amount_msat


@dataclass(frozen=True)
class OnChainEvent:
    kind: str  # "open" | "close"
    chan_id: str
    funder: str
    fee_sat: int
    time: int
    amount_sat: int = 0
    push_sat: int = 0
    peer: str = ""
    settlement: Tuple[Tuple[str, int], ...] = ()


@dataclass(frozen=True)
class Announcement:
    chan_id: str
    node1: str
    node2: str
    capacity_sat: int
    time: int


class AnnouncementStream:
    """Pull-based subscription to public channel opens made after creation."""

    def __init__(self, graph: "ChannelGraph"):
        self._graph = graph
        self._cursor = len(graph.announcements)

    def poll(self) -> List[Announcement]:
        new = self._graph.announcements[self._cursor:]
        self._cursor = len(self._graph.announcements)
        return list(new)

    def pending(self) -> int:
        return len(self._graph.announcements) - self._cursor


@dataclass
class ChannelGraph:
    onchain_fee_sat: int = DEFAULT_ONCHAIN_FEE_SAT
    close_fee_sat: int = DEFAULT_ONCHAIN_FEE_SAT
    capacity_floor_sat: int = DEFAULT_CAPACITY_FLOOR_SAT
    nodes: Dict[str, Node] = field(default_factory=dict)
    channels: Dict[str, Channel] = field(default_factory=dict)
    ledger: List[OnChainEvent] = field(default_factory=list)
    announcements: List[Announcement] = field(default_factory=list)
    # payment-side logs, filled by the payments module
    forwards: Dict[str, list] = field(default_factory=dict)
    receipts: Dict[str, list] = field(default_factory=dict)
    minted_sat: int = 0
    dust_msat: int = 0
    onchain_fees_paid_sat: int = 0
    version: int = 0
    _by_pubkey: Dict[str, str] = field(default_factory=dict, repr=False)
    _adjacency: Dict[str, List[str]] = field(default_factory=dict, repr=False)
    _next_chan: int = field(default=0, repr=False)

    # ---------- nodes ----------

    def add_node(self, node_id: str, wallet_sat: int = 0, role: Role = Role.INNOCENT,
                 pubkey: Optional[str] = None, accepts_keysend: bool = True) -> Node:
        if node_id in self.nodes:
            raise PolicyError(f"duplicate node id {node_id}")
        pubkey = pubkey or derive_pubkey(node_id)
        if pubkey in self._by_pubkey:
            raise PolicyError(f"duplicate pubkey {pubkey}")
        node = Node(node_id, pubkey, wallet_sat, Role(role), accepts_keysend)
        self.nodes[node_id] = node
        self._by_pubkey[pubkey] = node_id
        self._adjacency[node_id] = []
        self.minted_sat += wallet_sat
        return node

    def node(self, node_id: str) -> Node:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNodeError(node_id) from None

    def by_pubkey(self, pubkey: str) -> str:
        try:
            return self._by_pubkey[pubkey]
        except KeyError:
            raise UnknownNodeError(pubkey) from None

    def has_pubkey(self, pubkey: str) -> bool:
        return pubkey in self._by_pubkey

    def fund(self, node_id: str, sat: int) -> None:
        """Credit a wallet from outside the system (faucet / pre-funded wallet)."""
        self.node(node_id).wallet_sat += sat
        self.minted_sat += sat

    # ---------- channels ----------

    def channel(self, chan_id: str) -> Channel:
        try:
            return self.channels[chan_id]
        except KeyError:
            raise UnknownChannelError(chan_id) from None

    def channels_of(self, node_id: str, include_closed: bool = False) -> List[Channel]:
        chans = (self.channels[c] for c in self._adjacency.get(node_id, ()))
        return [c for c in chans if include_closed or c.is_open]

    def public_channels(self) -> List[Channel]:
        return [c for c in self.channels.values() if c.is_open and not c.is_private]

    def _new_chan_id(self) -> str:
        self._next_chan += 1
        return str(_CHAN_ID_BASE + self._next_chan)

    def _attach(self, chan: Channel) -> None:
        self.channels[chan.chan_id] = chan
        self._adjacency[chan.node1].append(chan.chan_id)
        self._adjacency[chan.node2].append(chan.chan_id)
        self.version += 1
        if not chan.is_private:
            self.announcements.append(
                Announcement(chan.chan_id, chan.node1, chan.node2, chan.capacity_sat, chan.open_time)
            )

    def add_existing_channel(self, node1: str, node2: str, capacity_sat: int,
                             balance1_msat: Optional[int] = None, chan_id: Optional[str] = None,
                             base_fee_msat: int = DEFAULT_BASE_FEE_MSAT,
                             prop_fee_ppm: int = DEFAULT_PROP_FEE_PPM,
                             is_private: bool = False, time: int = 0) -> str:
        """Insert a pre-existing channel (snapshot data); its capacity is minted."""
        for n in (node1, node2):
            self.node(n)
        if capacity_sat <= 0:
            raise PolicyError(f"channel capacity must be positive, got {capacity_sat}")
        total = capacity_sat * MSAT_PER_SAT
        if balance1_msat is None:
            balance1_msat = total // 2
        if not 0 <= balance1_msat <= total:
            raise PolicyError(f"balance {balance1_msat} outside [0, {total}]")
        chan_id = chan_id or self._new_chan_id()
        if chan_id in self.channels:
            raise PolicyError(f"duplicate channel id {chan_id}")
        chan = Channel(chan_id, node1, node2, capacity_sat,
                       {node1: balance1_msat, node2: total - balance1_msat},
                       base_fee_msat, prop_fee_ppm, is_private, time, None, node1)
        self.minted_sat += capacity_sat
        self._attach(chan)
        return chan_id

    def open_channel(self, funder: str, peer: str, capacity_sat: int, is_private: bool = False,
                     fee_policy: Tuple[int, int] = (DEFAULT_BASE_FEE_MSAT, DEFAULT_PROP_FEE_PPM),
                     time: int = 0, push_sat: int = 0, onchain_fee_sat: Optional[int] = None) -> str:
        fnode = self.node(funder)
        self.node(peer)
        if funder == peer:
            raise PolicyError("cannot open a channel to self")
        if capacity_sat < self.capacity_floor_sat:
            raise PolicyError(
                f"capacity {capacity_sat} sat below floor {self.capacity_floor_sat} sat"
            )
        if not 0 <= push_sat <= capacity_sat:
            raise PolicyError(f"push amount {push_sat} outside channel capacity")
        fee = self.onchain_fee_sat if onchain_fee_sat is None else onchain_fee_sat
        if fee <= 0:
            raise PolicyError("channel opens require a positive on-chain fee")
        if fnode.wallet_sat < capacity_sat + fee:
            raise InsufficientFundsError(
                f"{funder} wallet {fnode.wallet_sat} sat < capacity {capacity_sat} + fee {fee}"
            )
        fnode.wallet_sat -= capacity_sat + fee
        self.onchain_fees_paid_sat += fee
        chan_id = self._new_chan_id()
        total = capacity_sat * MSAT_PER_SAT
        push = push_sat * MSAT_PER_SAT
        base, ppm = fee_policy
        chan = Channel(chan_id, funder, peer, capacity_sat, {funder: total - push, peer: push},
                       base, ppm, is_private, time, None, funder)
        self.ledger.append(OnChainEvent("open", chan_id, funder, fee, time, capacity_sat,
                                        push_sat, peer))
        self._attach(chan)
        return chan_id

    def close_channel(self, chan_id: str, closer: str, time: int = 0,
                      close_fee_sat: Optional[int] = None) -> Dict[str, int]:
        chan = self.channel(chan_id)
        if not chan.is_open:
            raise ChannelClosedError(f"channel {chan_id} already closed")
        if closer not in chan.endpoints:
            raise PolicyError(f"{closer} is not an endpoint of channel {chan_id}")
        fee = self.close_fee_sat if close_fee_sat is None else close_fee_sat
        settlement = {}
        for n in chan.endpoints:
            sat, dust = divmod(chan.balances[n], MSAT_PER_SAT)
            settlement[n] = sat
            self.dust_msat += dust
        closer_node = self.node(closer)
        if closer_node.wallet_sat + settlement[closer] < fee:
            raise InsufficientFundsError(f"{closer} cannot pay the {fee} sat close fee")
        for n, sat in settlement.items():
            self.nodes[n].wallet_sat += sat
        closer_node.wallet_sat -= fee
        self.onchain_fees_paid_sat += fee
        for n in chan.endpoints:
            chan.balances[n] = 0
        chan.close_time = time
        self.version += 1
        self.ledger.append(OnChainEvent("close", chan_id, closer, fee, time, chan.capacity_sat,
                                        0, chan.peer(closer), tuple(sorted(settlement.items()))))
        return settlement

    # ---------- queries ----------

    def public_degree(self, node_id: str) -> int:
        return sum(1 for c in self.channels_of(node_id) if not c.is_private)

    def most_connected(self, h: int) -> List[str]:
        if h < 1:
            raise PolicyError("h must be >= 1")
        ranked = sorted(self.nodes.values(),
                        key=lambda n: (-self.public_degree(n.id), n.pubkey))
        return [n.id for n in ranked[:h]]

    def subscribe_announcements(self) -> AnnouncementStream:
        return AnnouncementStream(self)

    def total_money_msat(self) -> int:
        """Wallets + open channel balances + fees paid + dust; constant over time."""
        wallets = sum(n.wallet_sat for n in self.nodes.values()) * MSAT_PER_SAT
        locked = sum(sum(c.balances.values()) for c in self.channels.values() if c.is_open)
        return wallets + locked + self.onchain_fees_paid_sat * MSAT_PER_SAT + self.dust_msat

    def check_conservation(self) -> None:
        for c in self.channels.values():
            if c.is_open and sum(c.balances.values()) != c.capacity_sat * MSAT_PER_SAT:
                raise AssertionError(f"channel {c.chan_id} balances do not sum to capacity")
        if self.total_money_msat() != self.minted_sat * MSAT_PER_SAT:
            raise AssertionError("money not conserved")

    # ---------- exports ----------

    def ledger_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "chan_id", "funder", "fee_sat", "time"])
        for ev in self.ledger:
            w.writerow([ev.kind, ev.chan_id, ev.funder, ev.fee_sat, ev.time])
        return buf.getvalue()

    def export_snapshot(self) -> dict:
        """``describegraph``-shaped document with public, open channels only."""
        edges = []
        for c in self.public_channels():
            policy = {"fee_base_msat": str(c.base_fee_msat),
                      "fee_rate_milli_msat": str(c.prop_fee_ppm)}
            edges.append({
                "channel_id": c.chan_id,
                "node1_pub": self.nodes[c.node1].pubkey,
                "node2_pub": self.nodes[c.node2].pubkey,
                "capacity": str(c.capacity_sat),
                "node1_policy": policy,
                "node2_policy": dict(policy),
            })
        return {
            "nodes": [{"pub_key": n.pubkey, "alias": n.id} for n in self.nodes.values()],
            "edges": edges,
        }


def replay_wallets(graph: ChannelGraph, initial_wallets: Dict[str, int]) -> Dict[str, int]:
    """Rebuild wallet balances from initial funding and the on-chain ledger."""
    wallets = dict(initial_wallets)
    for ev in graph.ledger:
        if ev.kind == "open":
            wallets[ev.funder] -= ev.amount_sat + ev.fee_sat
        else:
            for node, sat in ev.settlement:
                wallets[node] = wallets.get(node, 0) + sat
            wallets[ev.funder] -= ev.fee_sat
    return wallets


def _as_int(value, what, idx):
    try:
        if isinstance(value, bool):
            raise TypeError
        return int(value)
    except (TypeError, ValueError):
        raise SnapshotError(f"{what} #{idx}: expected an integer, got {value!r}") from None


def load_snapshot(data: dict, *, onchain_fee_sat: int = DEFAULT_ONCHAIN_FEE_SAT,
                  close_fee_sat: int = 0,
                  capacity_floor_sat: int = DEFAULT_CAPACITY_FLOOR_SAT) -> ChannelGraph:
    """Build a graph from a ``describegraph``-style JSON document.

    Nodes are keyed by ``pub_key``; balances default to a 50/50 split unless an
    edge carries ``node1_balance_msat``. Unknown fields are ignored.
    """
    if not isinstance(data, dict):
        raise SnapshotError("snapshot document must be an object")
    graph = ChannelGraph(onchain_fee_sat=onchain_fee_sat, close_fee_sat=close_fee_sat,
                         capacity_floor_sat=capacity_floor_sat)
    nodes = data.get("nodes", [])
    edges = data.get("edges", [])
    if not isinstance(nodes, list) or not isinstance(edges, list):
        raise SnapshotError("'nodes' and 'edges' must be lists")
    for i, rec in enumerate(nodes):
        if not isinstance(rec, dict) or not isinstance(rec.get("pub_key"), str):
            raise SnapshotError(f"node #{i}: missing pub_key")
        pk = rec["pub_key"]
        if pk in graph.nodes:
            raise SnapshotError(f"node #{i}: duplicate pub_key {pk}")
        graph.add_node(pk, pubkey=pk)
    for i, rec in enumerate(edges):
        if not isinstance(rec, dict):
            raise SnapshotError(f"edge #{i}: not an object")
        missing = [k for k in ("channel_id", "node1_pub", "node2_pub", "capacity") if k not in rec]
        if missing:
            raise SnapshotError(f"edge #{i}: missing {', '.join(missing)}")
        chan_id = str(rec["channel_id"])
        for end in ("node1_pub", "node2_pub"):
            if rec[end] not in graph.nodes:
                raise SnapshotError(f"channel {chan_id}: unknown endpoint {rec[end]}")
        capacity = _as_int(rec["capacity"], "edge", i)
        policy = rec.get("node1_policy") or {}
        base = _as_int(policy.get("fee_base_msat", DEFAULT_BASE_FEE_MSAT), "edge", i)
        ppm = _as_int(policy.get("fee_rate_milli_msat", DEFAULT_PROP_FEE_PPM), "edge", i)
        bal1 = rec.get("node1_balance_msat")
        bal1 = None if bal1 is None else _as_int(bal1, "edge", i)
        try:
            graph.add_existing_channel(rec["node1_pub"], rec["node2_pub"], capacity, bal1,
                                       chan_id=chan_id, base_fee_msat=base, prop_fee_ppm=ppm,
                                       is_private=bool(rec.get("private", False)))
        except PolicyError as exc:
            raise SnapshotError(f"channel {chan_id}: {exc}") from None
    # snapshot channels were announced before the simulation started
    graph.announcements.clear()
    return graph

