"""Multi-hop HTLC and keysend payment execution.

Payments settle atomically at send time: either every hop's balances shift or
none do. The receiver's receipt is stamped with the arrival time
(``at_ms + latency``); callers that run an event queue may defer the receipt
by passing ``deliver=False`` and recording ``result.receipt`` themselves.
"""

from __future__ import annotations

import csv
import hashlib
import hmac
import io
import random
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

from .errors import AuthenticationError, NoRouteError
from .routing import (
    PER_CHANNEL,
    FeeModel,
    OnionPacket,
    Route,
    RoutingHint,
    build_onion,
    find_route,
)
from .topology import MSAT_PER_SAT, ChannelGraph

UNKNOWN_SENDER = "<unknown-sender>"

SIGNATURE_BYTES = 65  # 64-byte compact signature + recovery id
TIMESTAMP_BYTES = 8
PREIMAGE_BYTES = 32


# ---------- credentials ----------

@dataclass(frozen=True)
class Credential:
    """Simulated recoverable signature: claimed signer plus a keyed digest."""

    signer_pubkey: str
    tag: bytes


class KeyRing:
    """Holds every simulated node's private key; stands in for ECDSA recovery."""

    def __init__(self, seed: int = 0):
        self._seed = seed

    def _secret(self, pubkey: str) -> bytes:
        return hashlib.sha256(f"secret|{self._seed}|{pubkey}".encode()).digest()

    def sign(self, pubkey: str, payload: bytes) -> Credential:
        return Credential(pubkey, hmac.new(self._secret(pubkey), payload, hashlib.sha256).digest())

    def verify(self, cred: Credential, payload: bytes) -> bool:
        expected = hmac.new(self._secret(cred.signer_pubkey), payload, hashlib.sha256).digest()
        return hmac.compare_digest(expected, cred.tag)


@dataclass(frozen=True)
class AttachedMessage:
    keysend_preimage: bytes
    body: bytes
    signature: Credential
    timestamp: int

    def signed_bytes(self) -> bytes:
        return _signed_payload(self.keysend_preimage, self.body, self.timestamp)

    def serialized_size(self) -> int:
        return PREIMAGE_BYTES + len(self.body) + SIGNATURE_BYTES + TIMESTAMP_BYTES


def _signed_payload(preimage: bytes, body: bytes, timestamp: int) -> bytes:
    return preimage + body + timestamp.to_bytes(TIMESTAMP_BYTES, "big", signed=False)


def new_preimage(rng: random.Random) -> bytes:
    return rng.getrandbits(8 * PREIMAGE_BYTES).to_bytes(PREIMAGE_BYTES, "big")


def sign_message(keys: KeyRing, sender_pubkey: str, body: bytes, timestamp: int,
                 preimage: bytes) -> AttachedMessage:
    cred = keys.sign(sender_pubkey, _signed_payload(preimage, body, timestamp))
    return AttachedMessage(preimage, body, cred, timestamp)


def recover_sender(message: AttachedMessage, keys: KeyRing,
                   graph: Optional[ChannelGraph] = None) -> str:
    """Node id of the signer, or ``UNKNOWN_SENDER`` if it is not in ``graph``.

    Raises AuthenticationError when the body, timestamp or signature was altered.
    """
    if not keys.verify(message.signature, message.signed_bytes()):
        raise AuthenticationError("signature does not match message")
    pk = message.signature.signer_pubkey
    if graph is None:
        return pk
    if not graph.has_pubkey(pk):
        return UNKNOWN_SENDER
    return graph.by_pubkey(pk)


# ---------- records ----------

@dataclass
class Htlc:
    payment_hash: bytes
    amount_msat: int
    timelock: int
    status: str = "pending"

    def fulfill(self, preimage: bytes) -> None:
        if hashlib.sha256(preimage).digest() != self.payment_hash:
            raise AuthenticationError("pre-image does not match payment hash")
        self.status = "fulfilled"

    def fail(self) -> None:
        self.status = "failed"


@dataclass(frozen=True)
class ForwardEvent:
    timestamp: int  # ms
    node: str
    chan_id_in: str
    chan_id_out: str
    amt_in_msat: int
    amt_out_msat: int
    fee_msat: int

    def to_fwdinghistory(self) -> dict:
        return {
            "timestamp": str(self.timestamp // 1000),
            "timestamp_ns": str(self.timestamp * 1_000_000),
            "chan_id_in": self.chan_id_in,
            "chan_id_out": self.chan_id_out,
            "amt_in": str(self.amt_in_msat // MSAT_PER_SAT),
            "amt_out": str(self.amt_out_msat // MSAT_PER_SAT),
            "fee": str(self.fee_msat // MSAT_PER_SAT),
            "fee_msat": str(self.fee_msat),
            "amt_in_msat": str(self.amt_in_msat),
            "amt_out_msat": str(self.amt_out_msat),
        }


@dataclass(frozen=True)
class Receipt:
    time: int
    node: str
    amount_msat: int
    chan_id_in: str
    payment_hash: bytes
    packet: OnionPacket

    @property
    def message(self) -> Optional[AttachedMessage]:
        return self.packet.payload_for(self.node)


@dataclass
class PaymentResult:
    success: bool
    amount_msat: int
    fee_paid_msat: int = 0
    latency_ms: int = 0
    hops_used: int = 0
    failure_stage: Optional[int] = None
    error: Optional[str] = None
    route: Optional[Route] = None
    sent_at: int = 0
    receipt: Optional[Receipt] = None
    htlcs: List[Htlc] = field(default_factory=list)

    def __post_init__(self):
        if self.success and self.failure_stage is not None:
            raise ValueError("successful payment cannot carry a failure stage")

    @property
    def latency_s(self) -> float:
        return self.latency_ms / 1000

    @property
    def arrival(self) -> int:
        return self.sent_at + self.latency_ms


# ---------- latency ----------

@dataclass(frozen=True)
class LatencyModel:
    """Payment delivery delay; all parameters in seconds, samples in integer ms.

    per_payment_gaussianish draws a normal truncated to [low, high] by rejection;
    per_hop_uniform sums one uniform(low, high) draw per hop.
    """

    kind: str = "per_payment_gaussianish"
    mean: float = 7.0
    sigma: float = 1.5
    low: float = 4.0
    high: float = 10.0

    def __post_init__(self):
        if self.kind not in ("per_payment_gaussianish", "per_payment_fixed", "per_hop_uniform"):
            raise ValueError(f"unknown latency model {self.kind!r}")
        if self.kind == "per_payment_fixed" and self.mean <= 0:
            raise ValueError("fixed latency must be positive")
        if self.kind != "per_payment_fixed" and not 0 < self.low <= self.high:
            raise ValueError("latency bounds must satisfy 0 < low <= high")

    @classmethod
    def fixed(cls, seconds: float) -> "LatencyModel":
        return cls("per_payment_fixed", mean=seconds, sigma=0.0, low=seconds, high=seconds)

    @classmethod
    def per_hop(cls, low: float = 0.4, high: float = 0.5) -> "LatencyModel":
        return cls("per_hop_uniform", mean=(low + high) / 2, sigma=0.0, low=low, high=high)

    def sample(self, rng: random.Random, hops: int) -> Tuple[int, List[int]]:
        """Total delay and a cumulative arrival offset at each hop (both ms)."""
        hops = max(hops, 1)
        if self.kind == "per_hop_uniform":
            lo, hi = round(self.low * 1000), round(self.high * 1000)
            offsets, t = [], 0
            for _ in range(hops):
                t += rng.randint(lo, hi)
                offsets.append(t)
            return t, offsets
        if self.kind == "per_payment_fixed":
            total = round(self.mean * 1000)
        else:
            while True:
                x = rng.gauss(self.mean, self.sigma)
                if self.low <= x <= self.high:
                    break
            total = max(1, round(x * 1000))
        return total, [total * (i + 1) // hops for i in range(hops)]


FIXED_7S = LatencyModel.fixed(7.0)
KEYSEND_DEFAULT = LatencyModel()


# ---------- execution ----------

def _record_receipt(graph: ChannelGraph, receipt: Receipt) -> None:
    graph.receipts.setdefault(receipt.node, []).append(receipt)


def deliver(graph: ChannelGraph, receipt: Receipt) -> None:
    _record_receipt(graph, receipt)


def send_payment(graph: ChannelGraph, route: Route, amount_msat: int,
                 latency_model: LatencyModel, rng: random.Random, *, at_ms: int = 0,
                 preimage: Optional[bytes] = None, payload=None,
                 fail_at_hop: Optional[int] = None, deliver_now: bool = True) -> PaymentResult:
    """Execute ``route``; on any hop lacking liquidity nothing moves."""
    if route.hops[-1].amt_to_forward_msat != amount_msat:
        raise ValueError("route was built for a different amount")
    hops = route.hops
    preimage = preimage if preimage is not None else new_preimage(rng)
    payment_hash = hashlib.sha256(preimage).digest()
    htlcs = [Htlc(payment_hash, h.amount_msat, h.timelock_delta * (len(hops) - i))
             for i, h in enumerate(hops)]
    packet = build_onion(route, payload)  # oversize payloads fail before any HTLC is offered
    latency, offsets = latency_model.sample(rng, len(hops))

    failed_at = None
    for i, h in enumerate(hops, start=1):
        chan = graph.channels.get(h.chan_id)
        if chan is None or not chan.is_open or chan.balance(h.from_node) < h.amount_msat:
            failed_at = i
            break
        if fail_at_hop == i:
            failed_at = i
            break
    if failed_at is not None:
        for htlc in htlcs:
            htlc.fail()
        return PaymentResult(False, amount_msat, 0, latency, len(hops), failed_at,
                             "temporary_channel_failure", route, at_ms, None, htlcs)

    for h in hops:
        graph.channels[h.chan_id].shift(h.from_node, h.amount_msat)
    for htlc in reversed(htlcs):
        htlc.fulfill(preimage)
    for i in range(len(hops) - 1):
        h_in, h_out = hops[i], hops[i + 1]
        ev = ForwardEvent(at_ms + offsets[i], h_in.to_node, h_in.chan_id, h_out.chan_id,
                          h_in.amount_msat, h_out.amount_msat, h_in.fee_msat)
        graph.forwards.setdefault(h_in.to_node, []).append(ev)
    receipt = Receipt(at_ms + latency, route.destination, amount_msat, hops[-1].chan_id,
                      payment_hash, packet)
    if deliver_now:
        _record_receipt(graph, receipt)
    return PaymentResult(True, amount_msat, route.total_fee_msat, latency, len(hops), None,
                         None, route, at_ms, receipt, htlcs)


def send_keysend(graph: ChannelGraph, src: str, dst_pubkey: str, amount_msat: int,
                 message: Optional[AttachedMessage] = None,
                 hints: Sequence[RoutingHint] = (),
                 latency_model: LatencyModel = KEYSEND_DEFAULT,
                 rng: Optional[random.Random] = None, *, fee_model: FeeModel = PER_CHANNEL,
                 at_ms: int = 0, fail_at_hop: Optional[int] = None, deliver_now: bool = True,
                 route_finder: Optional[Callable[..., Route]] = None) -> PaymentResult:
    """Spontaneous payment; the sender generates the pre-image."""
    rng = rng or random.Random(0)
    dst = graph.by_pubkey(dst_pubkey)
    if not graph.nodes[dst].accepts_keysend:
        return PaymentResult(False, amount_msat, error="keysend_rejected", sent_at=at_ms)
    if not graph.nodes[dst].online:
        return PaymentResult(False, amount_msat, error="destination_offline", sent_at=at_ms)
    finder = route_finder or find_route
    try:
        route = finder(graph, src, dst, amount_msat, hints=hints, fee_model=fee_model)
    except NoRouteError as exc:
        return PaymentResult(False, amount_msat, error=f"no_route: {exc}", sent_at=at_ms)
    preimage = message.keysend_preimage if message is not None else new_preimage(rng)
    return send_payment(graph, route, amount_msat, latency_model, rng, at_ms=at_ms,
                        preimage=preimage, payload=message, fail_at_hop=fail_at_hop,
                        deliver_now=deliver_now)


# ---------- logs ----------

def forwarding_history(graph: ChannelGraph, node: str,
                       window: Optional[Tuple[int, int]] = None) -> List[ForwardEvent]:
    """Events ``node`` forwarded, ascending by timestamp; ``window`` is [start, end] ms."""
    events = graph.forwards.get(node, [])
    if window is not None:
        lo, hi = window
        events = [e for e in events if lo <= e.timestamp <= hi]
    return sorted(events, key=lambda e: e.timestamp)


def receipts_of(graph: ChannelGraph, node: str) -> List[Receipt]:
    return sorted(graph.receipts.get(node, []), key=lambda r: r.time)


def fwdinghistory_document(events: Sequence[ForwardEvent]) -> dict:
    return {"forwarding_events": [e.to_fwdinghistory() for e in events],
            "last_offset_index": len(events)}


def fwdinghistory_csv(events: Sequence[ForwardEvent]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["timestamp", "node", "chan_id_in", "chan_id_out", "amt_in_msat",
                "amt_out_msat", "fee_msat"])
    for e in events:
        w.writerow([e.timestamp, e.node, e.chan_id_in, e.chan_id_out, e.amt_in_msat,
                    e.amt_out_msat, e.fee_msat])
    return buf.getvalue()


def receipts_csv(receipts: Sequence[Receipt]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time", "node", "amount_msat", "chan_id_in"])
    for r in receipts:
        w.writerow([r.time, r.node, r.amount_msat, r.chan_id_in])
    return buf.getvalue()
