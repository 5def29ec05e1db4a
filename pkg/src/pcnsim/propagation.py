"""Command dissemination: botmaster-to-each-server and server-to-server flooding."""

from __future__ import annotations

import csv
import io
import math
import random
import statistics
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

from .commands import SendPolicy, pack_command, send_command, send_command_noise, unpack_command
from .engine import Engine
from .errors import AbandonedCommandError, AuthenticationError, EncodingError
from .payments import UNKNOWN_SENDER, Receipt, recover_sender

ORDERS = ("registration", "shuffled", "parallel")


@dataclass(frozen=True)
class CommandInstance:
    command_id: int
    body: str
    origin: str = "botmaster"
    scheme: str = "noise"


@dataclass
class PropagationReport:
    start_ms: int = 0
    first_receipt: Dict[str, int] = field(default_factory=dict)
    executions: Dict[str, int] = field(default_factory=dict)
    duplicates: Dict[str, int] = field(default_factory=dict)
    depth: Dict[str, int] = field(default_factory=dict)
    messages_sent: int = 0
    failed_sends: int = 0
    rejected: int = 0
    route_hops: List[int] = field(default_factory=list)
    total_time_ms: Optional[int] = None  # set when time is a sum rather than a max
    fees_msat: int = 0

    @property
    def duplicate_receipts(self) -> int:
        return sum(self.duplicates.values())

    @property
    def total_time_s(self) -> float:
        if self.total_time_ms is not None:
            return self.total_time_ms / 1000
        if not self.first_receipt:
            return 0.0
        return (max(self.first_receipt.values()) - self.start_ms) / 1000

    @property
    def max_depth(self) -> int:
        return max(self.depth.values(), default=0)

    def reached(self) -> List[str]:
        return sorted(self.first_receipt)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cnc_id", "first_receipt_s", "duplicates"])
        for node in sorted(self.first_receipt):
            w.writerow([node, f"{(self.first_receipt[node] - self.start_ms) / 1000:.3f}",
                        self.duplicates.get(node, 0)])
        return buf.getvalue()

    def summary(self) -> dict:
        return {"total_time_s": self.total_time_s, "messages_sent": self.messages_sent,
                "duplicate_receipts": self.duplicate_receipts, "reached": len(self.first_receipt),
                "max_depth": self.max_depth, "rejected": self.rejected,
                "failed_sends": self.failed_sends}


def broadcast_sequential(engine: Engine, botmaster: str, cnc_list: Sequence[str], command: str,
                         scheme: str, policy: SendPolicy = SendPolicy(), **send_kw) -> PropagationReport:
    """Botmaster sends to each server in turn; total time is the sum of send durations."""
    report = PropagationReport(start_ms=engine.now, total_time_ms=0)
    for cnc in cnc_list:
        try:
            if scheme == "noise":
                r = send_command_noise(engine, botmaster, cnc, command, **send_kw)
            else:
                r = send_command(engine, botmaster, cnc, command, scheme, policy, **send_kw)
        except AbandonedCommandError as exc:
            report.failed_sends += 1
            report.messages_sent += exc.report.payment_attempts if exc.report else 0
            continue
        report.messages_sent += r.payments
        report.fees_msat += r.fee_msat
        if not r.delivered:
            report.failed_sends += 1
            continue
        report.total_time_ms += r.duration_ms
        report.first_receipt[cnc] = engine.now
        report.executions[cnc] = 1
        report.depth[cnc] = 1
    return report


class CncNetwork:
    """Server-side receive logic for flooding: authenticate, dedup, execute, forward.

    ``topology`` maps each server to its neighbor database in registration
    order. A receipt is accepted only if its recovered sender is a neighbor
    (or the ``operator`` key). Dedup tables persist across floods.
    """

    def __init__(self, engine: Engine, topology: Dict[str, Sequence[str]],
                 operator: Optional[str] = None, order: str = "registration",
                 skip_sender: bool = True):
        if order not in ORDERS:
            raise ValueError(f"unknown forward order {order!r}")
        self.engine = engine
        self.topology = {k: list(v) for k, v in topology.items()}
        self.operator = operator
        self.order = order
        self.skip_sender = skip_sender
        self.seen: Dict[str, set] = {x: set() for x in self.topology}
        self.executed: List[tuple] = []  # (time, node, command_id, body)
        self._report: Optional[PropagationReport] = None
        self._queues: Dict[str, list] = {}
        self._command: Optional[CommandInstance] = None
        for node in self.topology:
            engine.on_receipt(node, self._make_handler(node))

    def trusted(self, node: str) -> set:
        t = set(self.topology.get(node, ()))
        if self.operator is not None:
            t.add(self.operator)
        return t

    def executions(self, node: str) -> int:
        return sum(1 for _, n, _, _ in self.executed if n == node)

    def _make_handler(self, node: str) -> Callable[[Receipt], None]:
        def handle(receipt: Receipt) -> None:
            self._receive(node, receipt)
        return handle

    def authenticate(self, node: str, receipt: Receipt) -> Optional[str]:
        msg = receipt.message
        if msg is None:
            return None
        try:
            sender = recover_sender(msg, self.engine.keys, self.engine.graph)
        except AuthenticationError:
            return None
        if sender == UNKNOWN_SENDER or sender not in self.trusted(node):
            return None
        return sender

    def _receive(self, node: str, receipt: Receipt) -> None:
        report = self._report
        sender = self.authenticate(node, receipt)
        if sender is None:
            if receipt.message is not None and report is not None:
                report.rejected += 1
            return
        try:
            cid, body = unpack_command(receipt.message.body)
        except EncodingError:
            return
        if cid in self.seen[node]:
            if report is not None:
                report.duplicates[node] = report.duplicates.get(node, 0) + 1
            return
        self.seen[node].add(cid)
        self.executed.append((self.engine.now, node, cid, body))
        if report is None:
            return
        report.first_receipt[node] = self.engine.now
        report.executions[node] = report.executions.get(node, 0) + 1
        report.depth[node] = report.depth.get(sender, 0) + 1
        self._forward(node, sender)

    def _forward(self, node: str, came_from: Optional[str]) -> None:
        targets = [v for v in self.topology[node] if not (self.skip_sender and v == came_from)]
        if self.order == "shuffled":
            self.engine.rng("flood-order").shuffle(targets)
        if self.order == "parallel":
            for v in targets:
                self._send(node, v, None)
            return
        self._queues[node] = targets
        self._pump(node)

    def _pump(self, node: str) -> None:
        queue = self._queues.get(node)
        if not queue:
            return
        self._send(node, queue.pop(0), lambda _res: self._pump(node))

    def _send(self, src: str, dst: str, then) -> None:
        cmd = self._command
        body = pack_command(cmd.command_id, cmd.body.encode())
        msg = self.engine.sign(src, body)
        res = self.engine.keysend(src, dst, 1000, message=msg, then=then)
        report = self._report
        report.messages_sent += 1
        if res.success:
            report.route_hops.append(res.hops_used)
            report.fees_msat += res.fee_paid_msat
        else:
            report.failed_sends += 1

    def flood(self, start_cnc: str, command: CommandInstance) -> PropagationReport:
        if start_cnc not in self.topology:
            raise KeyError(f"{start_cnc} is not a server in this topology")
        report = PropagationReport(start_ms=self.engine.now)
        self._report, self._command = report, command
        # the operator hands the command to the start server out of band
        self.seen[start_cnc].add(command.command_id)
        self.executed.append((self.engine.now, start_cnc, command.command_id, command.body.encode()))
        report.first_receipt[start_cnc] = self.engine.now
        report.executions[start_cnc] = 1
        report.depth[start_cnc] = 0
        self._forward(start_cnc, None)
        self.engine.run()
        self._report = None
        return report


def flood_p2p(engine: Engine, topology: Dict[str, Sequence[str]], start_cnc: str,
              command: CommandInstance, order: str = "registration",
              skip_sender: bool = True) -> PropagationReport:
    return CncNetwork(engine, topology, order=order, skip_sender=skip_sender).flood(start_cnc, command)


@dataclass(frozen=True)
class ComplexityEstimate:
    m: int
    n: int
    predicted_depth_messages: float
    depth: int


def _log_exact(n: int, m: int) -> float:
    d, p = 0, 1
    while p < n:
        p *= m
        d += 1
    if p == n:
        return float(d)
    return math.log(n) / math.log(m)


def predicted_messages(m: int, n: int) -> ComplexityEstimate:
    """m + m(log_m n - 1), and the tree depth ceil(log_m n)."""
    if m < 2:
        raise ValueError("estimate defined for m >= 2; m = 1 is a line with O(n) messages")
    if n < m:
        raise ValueError("need n >= m")
    depth, p = 0, 1
    while p < n:
        p *= m
        depth += 1
    return ComplexityEstimate(m, n, m + m * (_log_exact(n, m) - 1), depth)


def flood_depth_bound(m: int, n: int, slack: int = 2) -> int:
    return 1 + predicted_messages(m, n).depth + slack


@dataclass
class PropagationRow:
    n: int
    mean_s: float
    stdev_s: float
    min_s: float
    max_s: float
    trials: int
    mean_hops: float
    max_depth: int


def measure_propagation(trial: Callable[[int, int], PropagationReport], ns: Sequence[int],
                        trials: int = 30, seed: int = 1) -> List[PropagationRow]:
    """Mean flood time per n over seeded trials; ``trial(n, trial_seed)`` runs one."""
    rows = []
    for n in ns:
        times, hops, depth = [], [], 0
        for t in range(trials):
            rep = trial(n, seed * 1_000_003 + n * 1009 + t)
            times.append(rep.total_time_s)
            hops.extend(rep.route_hops)
            depth = max(depth, rep.max_depth)
        rows.append(PropagationRow(n, statistics.mean(times),
                                   statistics.stdev(times) if len(times) > 1 else 0.0,
                                   min(times), max(times), trials,
                                   statistics.mean(hops) if hops else 0.0, depth))
    return rows
