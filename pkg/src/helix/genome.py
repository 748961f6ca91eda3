"""DNA symbols, reads, edit distance and random/systematic error classification."""

from __future__ import annotations

import enum
import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from helix import kernels

BASES = "ACGT"
BLANK = "-"
ALPHABET = BASES + BLANK  # column order of a probability matrix

BASE_INDEX = {b: i for i, b in enumerate(ALPHABET)}


class Base(str, enum.Enum):
    A = "A"
    C = "C"
    G = "G"
    T = "T"


class CtcSymbol(str, enum.Enum):
    A = "A"
    C = "C"
    G = "G"
    T = "T"
    BLANK = "-"

    @property
    def is_blank(self) -> bool:
        return self is CtcSymbol.BLANK


# 3-bit codes used by the binary comparator arrays; C=010 is fixed by the hardware walkthrough.
CODE3 = {"A": 0b001, "C": 0b010, "G": 0b011, "T": 0b100, "-": 0b101}
DECODE3 = {v: k for k, v in CODE3.items()}


def encode3(symbol: str | Base | CtcSymbol) -> int:
    return CODE3[_symbol_str(symbol)]


def decode3(code: int) -> str:
    try:
        return DECODE3[code]
    except KeyError:
        raise ValueError(f"{code:03b} is not a valid symbol code") from None


def encode3_bits(symbols: str) -> list[int]:
    """Big-endian bit list, three bits per symbol."""
    bits = []
    for s in symbols:
        c = CODE3[s]
        bits.extend(((c >> 2) & 1, (c >> 1) & 1, c & 1))
    return bits


def _symbol_str(symbol) -> str:
    if isinstance(symbol, enum.Enum):
        return symbol.value
    return str(symbol)


def validate_bases(symbols: str) -> str:
    bad = set(symbols) - set(BASES)
    if bad:
        raise ValueError(f"non-ACGT symbols in read: {sorted(bad)}")
    return symbols


@dataclass(frozen=True)
class Read:
    symbols: str
    origin_offset: int = 0

    def __post_init__(self):
        validate_bases(self.symbols)
        if self.origin_offset < 0:
            raise ValueError("origin_offset must be >= 0")

    def __len__(self) -> int:
        return len(self.symbols)

    def __str__(self) -> str:
        return self.symbols

    @property
    def end(self) -> int:
        return self.origin_offset + len(self.symbols)


@dataclass(frozen=True)
class ErrorReport:
    random_count: int
    systematic_count: int
    per_position: tuple[str, ...] = field(default_factory=tuple)

    @property
    def error_count(self) -> int:
        return self.random_count + self.systematic_count

    def to_json(self) -> str:
        return json.dumps(
            {
                "random_count": self.random_count,
                "systematic_count": self.systematic_count,
                "per_position": list(self.per_position),
            }
        )


def _as_codes(a, b) -> tuple[list[int], list[int]]:
    """Map two symbol sequences onto a shared small-integer alphabet."""
    table: dict = {}
    out = []
    for seq in (a, b):
        if isinstance(seq, Read):
            seq = seq.symbols
        out.append([table.setdefault(_symbol_str(s), len(table)) for s in seq])
    return out[0], out[1]


def edit_distance(a, b) -> int:
    """Levenshtein distance between two symbol sequences."""
    return kernels.edit_distance(*_as_codes(a, b))


def majority(symbols: Iterable[str]) -> str:
    """Most frequent symbol; ties go to the lexicographically smallest."""
    counts = Counter(symbols)
    if not counts:
        raise ValueError("cannot vote on an empty column")
    best = max(counts.values())
    return min(s for s, c in counts.items() if c == best)


def pileup(reads: Sequence[Read], length: int) -> list[list[str]]:
    """Symbols stacked per truth coordinate, using each read's origin_offset."""
    columns: list[list[str]] = [[] for _ in range(length)]
    for read in reads:
        for i, s in enumerate(read.symbols):
            pos = read.origin_offset + i
            if 0 <= pos < length:
                columns[pos].append(s)
    return columns


def classify_errors(reads: Sequence[Read], truth: str) -> ErrorReport:
    """Label every truth position as correct, random (fixed by voting) or systematic.

    Reads must already sit in truth coordinates via ``origin_offset``. Positions
    no read covers cannot be recovered by voting and count as systematic.
    """
    if not reads:
        raise ValueError("classify_errors needs at least one read")
    labels = []
    for col, want in zip(pileup(reads, len(truth)), truth):
        if not col:
            labels.append("systematic")
        elif majority(col) != want:
            labels.append("systematic")
        elif any(s != want for s in col):
            labels.append("random")
        else:
            labels.append("correct")
    return ErrorReport(
        random_count=labels.count("random"),
        systematic_count=labels.count("systematic"),
        per_position=tuple(labels),
    )


def read_accuracy(predicted: str, truth: str) -> float:
    if not truth:
        return 1.0 if not predicted else 0.0
    return max(0.0, 1.0 - edit_distance(predicted, truth) / len(truth))
