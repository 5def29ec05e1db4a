"""Botmaster-side send loops: amount-encoded commands with retry/reschedule,
single-payment message commands, and the C&C-to-collector sweep."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from .covert_codec import REFERENCE_CODEBOOK, Codebook, encode, frame
from .engine import Engine
from .errors import AbandonedCommandError, EncodingError, NoRouteError
from .payments import LatencyModel, PaymentResult
from .routing import FeeModel, RoutingHint, find_route, hints_for
from .topology import MSAT_PER_SAT

NOISE_AMOUNT_SAT = 1
_ENVELOPE = struct.Struct(">Q")


@dataclass(frozen=True)
class SendPolicy:
    k: int = 3  # consecutive retries per payment before rescheduling
    reschedule_delay_s: int = 3600
    online_check: bool = True
    max_reschedules: int = 5

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("retry count k must be >= 0")
        if self.reschedule_delay_s < 0 or self.max_reschedules < 0:
            raise ValueError("reschedule settings must be >= 0")


@dataclass
class SendReport:
    """Totals for one command to one C&C.

    ``payments``, ``total_sat``, ``fee_msat`` and ``duration_ms`` count only
    the payload payments of the delivered attempt; ``*_all`` fields and
    ``wall_clock_ms`` include sentinels, retries and reschedule waits.
    """

    scheme: str
    destination: str
    payments: int = 0
    total_sat: int = 0
    fee_msat: int = 0
    duration_ms: int = 0
    payment_attempts: int = 0
    fee_msat_all: int = 0
    wall_clock_ms: int = 0
    reschedules: int = 0
    delivered: bool = False
    started_at: int = 0
    stream: List[int] = field(default_factory=list)

    @property
    def fee_sat(self) -> float:
        return self.fee_msat / MSAT_PER_SAT

    @property
    def duration_s(self) -> float:
        return self.duration_ms / 1000

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme, "destination": self.destination,
            "payments": self.payments, "sat": self.total_sat, "fees_sat": self.fee_sat,
            "duration_s": self.duration_s, "payment_attempts": self.payment_attempts,
            "fees_sat_all": self.fee_msat_all / MSAT_PER_SAT,
            "wall_clock_s": self.wall_clock_ms / 1000, "reschedules": self.reschedules,
            "delivered": self.delivered,
        }


def send_command(engine: Engine, botmaster: str, cnc: str, command: str, scheme: str,
                 policy: SendPolicy = SendPolicy(), *, codebook: Codebook = REFERENCE_CODEBOOK,
                 hints: Optional[Sequence[RoutingHint]] = None,
                 fee_model: Optional[FeeModel] = None,
                 latency: Optional[LatencyModel] = None) -> SendReport:
    """Deliver ``command`` as START, payload amounts, END, one keysend at a time.

    Each payment waits for its outcome before the next is sent. A payment
    failing more than ``policy.k`` times in a row aborts the attempt; the
    command restarts from START after the reschedule delay.
    """
    if scheme not in ("ascii", "huffman"):
        raise EncodingError(f"send_command needs an amount scheme, got {scheme!r}")
    stream = frame(encode(command, scheme, codebook))
    if hints is None:
        hints = hints_for(engine.graph, cnc)
    report = SendReport(scheme, cnc, started_at=engine.now)
    last = len(stream) - 1
    for attempt in range(policy.max_reschedules + 1):
        if attempt:
            report.reschedules += 1
            engine.sleep(policy.reschedule_delay_s * 1000)
        if policy.online_check and not engine.graph.nodes[cnc].online:
            continue
        payload = [0, 0, 0, 0]  # payments, sat, fee, duration for this attempt
        sent: List[int] = []
        ok = True
        for idx, amount in enumerate(stream):
            failures = 0
            while True:
                res = engine.keysend(botmaster, cnc, amount * MSAT_PER_SAT, hints=hints,
                                     fee_model=fee_model, latency=latency)
                report.payment_attempts += 1
                engine.sleep(res.latency_ms)  # wait for the outcome
                if res.success:
                    report.fee_msat_all += res.fee_paid_msat
                    sent.append(amount)
                    if 0 < idx < last:
                        payload[0] += 1
                        payload[1] += amount
                        payload[2] += res.fee_paid_msat
                        payload[3] += res.latency_ms
                    break
                failures += 1
                if failures > policy.k:
                    ok = False
                    break
            if not ok:
                break
        report.stream.extend(sent)
        if ok:
            report.payments, report.total_sat, report.fee_msat, report.duration_ms = payload
            report.delivered = True
            report.wall_clock_ms = engine.now - report.started_at
            return report
    report.wall_clock_ms = engine.now - report.started_at
    raise AbandonedCommandError(
        f"command to {cnc} abandoned after {report.reschedules} reschedules", report)


def pack_command(command_id: int, body: bytes) -> bytes:
    return _ENVELOPE.pack(command_id) + body


def unpack_command(data: bytes) -> Tuple[int, bytes]:
    if len(data) < _ENVELOPE.size:
        raise EncodingError("message too short for a command envelope")
    (cid,) = _ENVELOPE.unpack_from(data)
    return cid, data[_ENVELOPE.size:]


def send_command_noise(engine: Engine, src: str, dst: str, command: str, *,
                       command_id: Optional[int] = None,
                       hints: Optional[Sequence[RoutingHint]] = None,
                       fee_model: Optional[FeeModel] = None,
                       latency: Optional[LatencyModel] = None,
                       amount_sat: int = NOISE_AMOUNT_SAT, wait: bool = True) -> SendReport:
    """One keysend carrying the signed command as an attached message."""
    body = command.encode()
    if command_id is not None:
        body = pack_command(command_id, body)
    msg = engine.sign(src, body)
    report = SendReport("noise", dst, started_at=engine.now)
    res = engine.keysend(src, dst, amount_sat * MSAT_PER_SAT, message=msg, hints=hints,
                         fee_model=fee_model, latency=latency)
    report.payment_attempts = 1
    if wait:
        engine.sleep(res.latency_ms)
    if res.success:
        report.payments = 1
        report.total_sat = amount_sat
        report.fee_msat = report.fee_msat_all = res.fee_paid_msat
        report.duration_ms = res.latency_ms
        report.delivered = True
    report.wall_clock_ms = res.latency_ms
    report.stream = [amount_sat] if res.success else []
    return report


def reimburse_collector(engine: Engine, cnc: str, collector: str, threshold_sat: int,
                        hints: Optional[Sequence[RoutingHint]] = None) -> Optional[PaymentResult]:
    """Sweep what ``cnc`` received since its last sweep to ``collector``.

    Returns None below the threshold. On failure the funds stay put and the
    counter is kept, so the next crossing retries.
    """
    accumulated = engine.received_msat.get(cnc, 0)
    if accumulated < threshold_sat * MSAT_PER_SAT:
        return None
    if hints is None:
        hints = hints_for(engine.graph, collector)
    graph = engine.graph
    if not graph.nodes[collector].online:
        return PaymentResult(False, 0, error="collector_offline", sent_at=engine.now)
    try:
        probe = find_route(graph, cnc, collector, accumulated, hints=hints)
        amount = accumulated - probe.total_fee_msat
        route = find_route(graph, cnc, collector, amount, hints=hints)
    except NoRouteError as exc:
        return PaymentResult(False, 0, error=f"no_route: {exc}", sent_at=engine.now)
    if amount + route.total_fee_msat > accumulated or amount <= 0:
        return PaymentResult(False, 0, error="fees exceed accumulated balance", sent_at=engine.now)
    res = engine.keysend(cnc, collector, amount, hints=hints, fee_model=engine.fee_model)
    engine.sleep(res.latency_ms)
    if res.success:
        engine.received_msat[cnc] = 0
    return res
