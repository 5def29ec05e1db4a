"""Defender-side analyses over simulator logs.

Observers only see what a compromised node would: its own forwarding log,
the peers on its own channels, and (for a compromised C&C) its receipts.
"""

from __future__ import annotations

import csv
import io
import math
import random
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

from .commands import pack_command
from .covert_codec import START, REFERENCE_CODEBOOK, Codebook, decode_stream, encode, frame
from .engine import Engine
from .formation import PolicyK
from .payments import AttachedMessage, Credential, ForwardEvent
from .propagation import CncNetwork
from .topology import MSAT_PER_SAT, ChannelGraph

Z95 = 1.96


def wilson_lower(successes: float, trials: int, z: float = Z95) -> float:
    """Lower end of the Wilson score interval; small samples score low."""
    if trials <= 0:
        return 0.0
    p = successes / trials
    denom = 1 + z * z / trials
    centre = p + z * z / (2 * trials)
    margin = z * math.sqrt(max(p * (1 - p) / trials + z * z / (4 * trials * trials), 0.0))
    return max(0.0, (centre - margin) / denom)


@dataclass(frozen=True)
class ObserverSet:
    compromised_nodes: FrozenSet[str]
    cnc: Optional[str]
    cnc_receipt_log: Tuple[Tuple[int, int], ...]  # (time ms, amount msat)
    forward_log: Tuple[ForwardEvent, ...]
    channel_peers: Tuple[Tuple[str, str, str], ...]  # (observer, chan_id, peer)

    @classmethod
    def from_graph(cls, graph: ChannelGraph, observers: Iterable[str],
                   cnc: Optional[str] = None) -> "ObserverSet":
        obs = frozenset(observers)
        events = tuple(e for n in sorted(obs) for e in graph.forwards.get(n, ()))
        peers = tuple((n, c.chan_id, c.peer(n)) for n in sorted(obs)
                      for c in graph.channels_of(n, include_closed=True))
        log = ()
        if cnc is not None:
            log = tuple(sorted((r.time, r.amount_msat) for r in graph.receipts.get(cnc, ())))
        return cls(obs, cnc, log, events, peers)

    def upstream(self, event: ForwardEvent) -> Optional[str]:
        for node, cid, peer in self.channel_peers:
            if node == event.node and cid == event.chan_id_in:
                return peer
        return None


@dataclass
class SuspectReport:
    suspect_edges: List[Tuple[str, float]]
    window_s: float
    receipts: int = 0
    matched: int = 0

    def top(self) -> Optional[str]:
        return self.suspect_edges[0][0] if self.suspect_edges else None

    def max_score(self) -> float:
        return self.suspect_edges[0][1] if self.suspect_edges else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["upstream", "score"])
        for peer, score in self.suspect_edges:
            w.writerow([peer, f"{score:.6f}"])
        return buf.getvalue()


def fee_slack_msat(amount_msat: int, max_hops: int = 20, base_bound_msat: int = 1000,
                   ppm_bound: int = 1000) -> int:
    return max_hops * (base_bound_msat + amount_msat * ppm_bound // 1_000_000)


def timing_correlation(observers: ObserverSet, window_s: float = 15.0, *,
                       max_hops: int = 20, base_bound_msat: int = 1000,
                       ppm_bound: int = 1000) -> SuspectReport:
    """Score upstream peers by the share of C&C receipts they plausibly sent.

    A receipt (t, a) matches forwarding events at observers with timestamp in
    [t - window, t] whose outgoing amount is a plus at most the fee of the
    remaining hops. Each receipt spreads one unit over the distinct upstream
    peers it matched; the score is the Wilson lower bound of that share.
    """
    window_ms = round(window_s * 1000)
    credit: Dict[str, float] = {}
    matched = 0
    for t, a in observers.cnc_receipt_log:
        slack = fee_slack_msat(a, max_hops, base_bound_msat, ppm_bound)
        peers = set()
        for e in observers.forward_log:
            if t - window_ms <= e.timestamp <= t and a <= e.amt_out_msat <= a + slack:
                up = observers.upstream(e)
                if up is not None:
                    peers.add(up)
        if peers:
            matched += 1
            for p in peers:
                credit[p] = credit.get(p, 0.0) + 1.0 / len(peers)
    n = len(observers.cnc_receipt_log)
    ranked = sorted(((p, wilson_lower(c, n)) for p, c in credit.items()),
                    key=lambda x: (-x[1], x[0]))
    return SuspectReport(ranked, window_s, n, matched)


# ---------- capacity scanning ----------

@dataclass
class ScanResult:
    flagged: List[str]
    flagged_owners: List[str]
    true_positives: int
    false_positives: int
    precision: float
    recall: float


def scan_policy_channels(graph: ChannelGraph, hypothesis: PolicyK,
                         ground_truth_channels: Iterable[str] = ()) -> ScanResult:
    """Flag open public channels whose capacity fits the guessed policy."""
    truth = set(ground_truth_channels)
    flagged = [c for c in graph.public_channels() if hypothesis.contains(c.capacity_sat)]
    ids = [c.chan_id for c in flagged]
    tp = sum(1 for c in ids if c in truth)
    fp = len(ids) - tp
    open_truth = {c for c in truth if c in graph.channels and graph.channels[c].is_open}
    precision = tp / len(ids) if ids else 1.0
    recall = (sum(1 for c in open_truth if c in ids) / len(open_truth)) if open_truth else 1.0
    return ScanResult(ids, sorted({c.funder for c in flagged}), tp, fp, precision, recall)


# ---------- stream poisoning ----------

@dataclass(frozen=True)
class PoisonPlan:
    target_cnc: str
    injected_amounts: Tuple[int, ...]
    trigger: str = "on_frame_open"  # or fixed_time
    at_ms: int = 0
    spacing_ms: int = 1

    def __post_init__(self):
        if self.trigger not in ("on_frame_open", "fixed_time"):
            raise ValueError(f"unknown trigger {self.trigger!r}")


@dataclass
class PoisonOutcome:
    result: str  # original | corrupted | different | none
    decoded: List[str]
    injected_ok: int
    injected_failed: int
    attacker_cost_msat: int

    @property
    def corrupted(self) -> bool:
        return self.result != "original"


def classify(decoded, original: str) -> str:
    if decoded.corrupted:
        return "corrupted"
    if list(decoded) == [original]:
        return "original"
    if not list(decoded):
        return "none"
    return "different"


def poison_stream(engine: Engine, plan: PoisonPlan, botmaster: str, attacker: str,
                  command: str, scheme: str, *, codebook: Codebook = REFERENCE_CODEBOOK,
                  send_kw: Optional[dict] = None) -> PoisonOutcome:
    """Run a live send to ``plan.target_cnc`` while the attacker injects paid keysends."""
    from .commands import send_command, send_command_noise

    send_kw = send_kw or {}
    target = plan.target_cnc
    graph = engine.graph
    mark = len(graph.receipts.get(target, ()))
    stats = {"ok": 0, "failed": 0, "cost": 0}

    def inject(amount):
        res = engine.keysend(attacker, target, amount * MSAT_PER_SAT)
        if res.success:
            stats["ok"] += 1
            stats["cost"] += amount * MSAT_PER_SAT + res.fee_paid_msat
        else:
            stats["failed"] += 1

    def arm(t0):
        for i, a in enumerate(plan.injected_amounts):
            engine.schedule(t0 + i * plan.spacing_ms, inject, a, label="poison")

    if plan.trigger == "fixed_time":
        arm(max(plan.at_ms, engine.now))
    else:
        state = {"armed": False}

        def watch(receipt):
            # single-message schemes have no START; the first arrival opens the window
            opens = scheme == "noise" or receipt.amount_msat == START * MSAT_PER_SAT
            if not state["armed"] and opens:
                state["armed"] = True
                arm(engine.now + 1)
        engine.on_receipt(target, watch)

    if scheme == "noise":
        msg_body = command
        send_command_noise(engine, botmaster, target, command, **send_kw)
        engine.run()
        recv = graph.receipts.get(target, [])[mark:]
        texts = [r.message.body.decode() for r in recv if r.message is not None
                 and r.message.signature.signer_pubkey == graph.nodes[botmaster].pubkey]
        result = "original" if texts == [msg_body] else "different"
        return PoisonOutcome(result, texts, stats["ok"], stats["failed"], stats["cost"])

    send_command(engine, botmaster, target, command, scheme, **send_kw)
    engine.run()
    recv = sorted(graph.receipts.get(target, [])[mark:], key=lambda r: r.time)
    amounts = [r.amount_msat // MSAT_PER_SAT for r in recv]
    decoded = decode_stream(amounts, scheme, codebook)
    return PoisonOutcome(classify(decoded, command), list(decoded), stats["ok"],
                         stats["failed"], stats["cost"])


def single_injection_sweep(command: str, scheme: str, values: Sequence[int],
                           codebook: Codebook = REFERENCE_CODEBOOK) -> Tuple[int, int]:
    """Insert each value at each position strictly inside the frame.

    Returns (cases, cases that decode to the original command unflagged).
    """
    framed = frame(encode(command, scheme, codebook))
    cases = silent = 0
    for pos in range(1, len(framed)):
        for v in values:
            stream = framed[:pos] + [v] + framed[pos:]
            decoded = decode_stream(stream, scheme, codebook)
            cases += 1
            if classify(decoded, command) == "original":
                silent += 1
    return cases, silent


# ---------- authentication ----------

def forge_credential(rng: random.Random, claimed_pubkey: str) -> Credential:
    return Credential(claimed_pubkey, rng.getrandbits(256).to_bytes(32, "big"))


def verify_auth_rejection(engine: Engine, network: CncNetwork, attacker: str, target_cnc: str,
                          forged_command: str, *, command_id: Optional[int] = None,
                          message: Optional[AttachedMessage] = None,
                          claim: Optional[str] = None) -> bool:
    """True iff ``target_cnc`` did not execute the attacker's delivery.

    By default the attacker signs with its own key. ``claim`` names a node
    whose identity is spoofed without its key; ``message`` replays a captured
    message verbatim.
    """
    before = network.executions(target_cnc)
    if message is None:
        cid = command_id if command_id is not None else engine.rng("forgery-ids").getrandbits(63)
        body = pack_command(cid, forged_command.encode())
        message = engine.sign(attacker, body)
        if claim is not None:
            message = AttachedMessage(message.keysend_preimage, body,
                                      forge_credential(engine.rng("forgery"),
                                                       engine.graph.nodes[claim].pubkey),
                                      message.timestamp)
    engine.keysend(attacker, target_cnc, MSAT_PER_SAT, message=message)
    engine.run()
    return network.executions(target_cnc) == before
