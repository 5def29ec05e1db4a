"""Discrete-event engine: ordered event queue, seeded RNG streams, payment plumbing.

Time is integer milliseconds. Events at equal times fire in insertion order.
Keysends settle balances when sent; the receipt arrives as a queued event at
``send time + latency``, so handlers observe receipts in arrival order.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .errors import SchedulingError
from .payments import (
    KEYSEND_DEFAULT,
    AttachedMessage,
    KeyRing,
    LatencyModel,
    PaymentResult,
    Receipt,
    deliver,
    send_keysend,
    sign_message,
    new_preimage,
)
from .routing import PER_CHANNEL, FeeModel, Route, RoutingHint, find_route, hints_for
from .topology import MSAT_PER_SAT, ChannelGraph

END_OF_SIMULATION = None


@dataclass(order=True)
class Event:
    time: int
    seq: int
    action: Callable = field(compare=False)
    args: tuple = field(compare=False, default=())
    label: str = field(compare=False, default="")

    def fire(self):
        return self.action(*self.args)


class EventQueue:
    def __init__(self):
        self.now = 0
        self._heap: List[Event] = []
        self._seq = 0
        self.fired = 0

    def __len__(self):
        return len(self._heap)

    def schedule(self, at_ms: int, action: Callable, *args, label: str = "") -> Event:
        if not isinstance(at_ms, int):
            raise SchedulingError(f"event time must be integer ms, got {at_ms!r}")
        if at_ms < self.now:
            raise SchedulingError(f"cannot schedule at {at_ms} ms; clock is at {self.now} ms")
        ev = Event(at_ms, self._seq, action, args, label)
        self._seq += 1
        heapq.heappush(self._heap, ev)
        return ev

    def schedule_in(self, delay_ms: int, action: Callable, *args, label: str = "") -> Event:
        return self.schedule(self.now + delay_ms, action, *args, label=label)

    def peek_time(self) -> Optional[int]:
        return self._heap[0].time if self._heap else None

    def advance(self) -> Optional[Event]:
        """Fire the next event and return it, or END_OF_SIMULATION when empty."""
        if not self._heap:
            return END_OF_SIMULATION
        ev = heapq.heappop(self._heap)
        self.now = ev.time
        ev.fire()
        self.fired += 1
        return ev

    def advance_to(self, t_ms: int) -> None:
        """Fire every event due at or before ``t_ms``, then set the clock to it."""
        if t_ms < self.now:
            raise SchedulingError(f"cannot rewind clock from {self.now} to {t_ms} ms")
        while self._heap and self._heap[0].time <= t_ms:
            self.advance()
        self.now = t_ms

    def sleep(self, delay_ms: int) -> None:
        self.advance_to(self.now + delay_ms)

    def run(self, until: Optional[int] = None) -> None:
        if until is not None:
            self.advance_to(until)
            return
        while self._heap:
            self.advance()


def stream_seed(seed: int, name: str) -> int:
    digest = hashlib.sha256(f"{seed}|{name}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


ReceiptHandler = Callable[[Receipt], None]


class Engine(EventQueue):
    """One simulation run: a graph, its clock, and every source of randomness."""

    def __init__(self, graph: ChannelGraph, seed: int = 0,
                 latency: LatencyModel = KEYSEND_DEFAULT, fee_model: FeeModel = PER_CHANNEL,
                 failure_rate: float = 0.0):
        super().__init__()
        if not 0.0 <= failure_rate <= 1.0:
            raise ValueError("failure rate must lie in [0, 1]")
        self.graph = graph
        self.seed = seed
        self.latency = latency
        self.fee_model = fee_model
        self.failure_rate = failure_rate
        self.keys = KeyRing(seed)
        self._streams: Dict[str, random.Random] = {}
        self._forced_failures = 0
        self._handlers: Dict[str, List[ReceiptHandler]] = {}
        self._route_cache: Dict[tuple, Tuple[int, Route]] = {}
        self.received_msat: Dict[str, int] = {}
        self.payments_attempted = 0
        self.payments_succeeded = 0
        self.fees_paid_msat = 0
        self.latencies_ms: List[int] = []

    def rng(self, name: str) -> random.Random:
        """Independent stream per consumer, so adding one never shifts another."""
        if name not in self._streams:
            self._streams[name] = random.Random(stream_seed(self.seed, name))
        return self._streams[name]

    # ---------- failure injection ----------

    def inject_failures(self, count: int) -> None:
        """Make the next ``count`` payments fail at their first hop."""
        self._forced_failures += count

    def _draw_failure(self) -> bool:
        if self._forced_failures:
            self._forced_failures -= 1
            return True
        return self.failure_rate > 0 and self.rng("failures").random() < self.failure_rate

    # ---------- receipts ----------

    def on_receipt(self, node: str, handler: ReceiptHandler) -> None:
        self._handlers.setdefault(node, []).append(handler)

    def _deliver(self, receipt: Receipt, then: Optional[Callable[[PaymentResult], None]],
                 result: PaymentResult) -> None:
        deliver(self.graph, receipt)
        self.received_msat[receipt.node] = self.received_msat.get(receipt.node, 0) + receipt.amount_msat
        for h in self._handlers.get(receipt.node, ()):
            h(receipt)
        if then is not None:
            then(result)

    # ---------- payments ----------

    def _find_route(self, graph, src, dst, amount_msat, hints=(), fee_model=PER_CHANNEL):
        key = (src, dst, amount_msat, tuple(hints), fee_model)
        hit = self._route_cache.get(key)
        if hit is not None and hit[0] == graph.version:
            return hit[1]
        route = find_route(graph, src, dst, amount_msat, hints=hints, fee_model=fee_model)
        self._route_cache[key] = (graph.version, route)
        return route

    def sign(self, sender: str, body: bytes, preimage: Optional[bytes] = None) -> AttachedMessage:
        preimage = preimage or new_preimage(self.rng("preimages"))
        return sign_message(self.keys, self.graph.nodes[sender].pubkey, body, self.now, preimage)

    def keysend(self, src: str, dst: str, amount_msat: int,
                message: Optional[AttachedMessage] = None,
                hints: Optional[Sequence[RoutingHint]] = None,
                latency: Optional[LatencyModel] = None, fee_model: Optional[FeeModel] = None,
                then: Optional[Callable[[PaymentResult], None]] = None) -> PaymentResult:
        """Send now; the receipt (and ``then``) fire at the arrival time.

        Failed payments invoke ``then`` after their latency as well, modelling
        the sender learning of the failure.
        """
        if hints is None:
            hints = hints_for(self.graph, dst)
        fail_at = 1 if self._draw_failure() else None
        fee_model = fee_model or self.fee_model
        result = send_keysend(self.graph, src, self.graph.nodes[dst].pubkey, amount_msat,
                              message, hints, latency or self.latency, self.rng("latency"),
                              fee_model=fee_model, at_ms=self.now, fail_at_hop=fail_at,
                              deliver_now=False, route_finder=self._route_finder(fee_model))
        self.payments_attempted += 1
        if result.route is None and result.latency_ms == 0:
            # rejected before any HTLC was offered; the sender still waits a round trip
            result.latency_ms = 1
        self.latencies_ms.append(result.latency_ms)
        if result.success:
            self.payments_succeeded += 1
            self.fees_paid_msat += result.fee_paid_msat
            self.schedule(result.arrival, self._deliver, result.receipt, then, result,
                          label=f"receipt:{dst}")
        else:
            if result.route is not None:
                self._route_cache.pop((src, dst, amount_msat, tuple(hints), fee_model), None)
            if then is not None:
                self.schedule(result.arrival, then, result, label=f"failure:{dst}")
        return result

    def _route_finder(self, fee_model):
        def finder(graph, src, dst, amount_msat, hints=(), fee_model=fee_model):
            return self._find_route(graph, src, dst, amount_msat, hints, fee_model)
        return finder

    def keysend_sat(self, src: str, dst: str, amount_sat: int, **kw) -> PaymentResult:
        return self.keysend(src, dst, amount_sat * MSAT_PER_SAT, **kw)
