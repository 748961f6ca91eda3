"""Read voting: longest-match chaining, per-column majority, and the binary comparator array."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import binom, multinomial

from helix import kernels
from helix.genome import CODE3, Read, encode3_bits, majority

COMPARATOR_ROWS = 256
COMPARATOR_COLS = 256
CELLS_PER_SYMBOL = 6  # 3 code bits, one complementary cell pair each

_LRS, _HRS = 1, 0


@dataclass(frozen=True)
class MatchResult:
    length: int
    pos_a: int
    pos_b: int


def _codes(r) -> list[int]:
    s = r.symbols if isinstance(r, Read) else str(r)
    return [CODE3[c] for c in s]


def longest_match(a, b) -> MatchResult:
    """Longest common substring; ties go to the smallest (pos_a, pos_b)."""
    if not len(a) or not len(b):
        raise ValueError("longest_match needs two non-empty reads")
    n, pa, pb = kernels.longest_match(_codes(a), _codes(b))
    return MatchResult(n, pa, pb)


def chain_shift(a, b) -> MatchResult:
    """Longest match between consecutive reads with ``b`` starting no earlier than ``a``."""
    n, pa, pb = kernels.longest_match(_codes(a), _codes(b), 0)
    return MatchResult(n, pa, pb)


@dataclass(frozen=True)
class ConsensusRead:
    symbols: str
    columns: tuple[dict[str, int], ...]
    starts: tuple[int, ...]
    gaps: tuple[int, ...] = field(default_factory=tuple)

    def __str__(self) -> str:
        return self.symbols

    def span(self, i: int, reads: Sequence) -> tuple[int, int]:
        """Consensus columns occupied by read ``i``."""
        return self.starts[i], self.starts[i] + len(reads[i])

    def to_json(self) -> str:
        return json.dumps(
            {
                "consensus": self.symbols,
                "starts": list(self.starts),
                "gaps": list(self.gaps),
                "tallies": [dict(sorted(c.items())) for c in self.columns],
            }
        )


def place_reads(reads: Sequence) -> tuple[list[int], list[int]]:
    """Column offset of every read, chaining each to its predecessor.

    A pair with no common symbol run is placed end to end and reported as a gap
    (index of the later read).
    """
    starts, gaps = [0], []
    for i in range(1, len(reads)):
        m = chain_shift(reads[i - 1], reads[i])
        if m.length == 0:
            starts.append(starts[-1] + len(reads[i - 1]))
            gaps.append(i)
        else:
            starts.append(starts[-1] + m.pos_a - m.pos_b)
    return starts, gaps


def vote_columns(reads: Sequence, starts: Sequence[int]) -> tuple[str, list[dict[str, int]]]:
    width = max(s + len(r) for s, r in zip(starts, reads))
    cols: list[Counter] = [Counter() for _ in range(width)]
    for r, s in zip(reads, starts):
        sym = r.symbols if isinstance(r, Read) else str(r)
        for k, c in enumerate(sym):
            cols[s + k][c] += 1
    consensus = "".join(majority(c.elements()) for c in cols if c)
    return consensus, [dict(c) for c in cols]


def align_and_vote(reads: Sequence) -> ConsensusRead:
    """Chain reads in their known order by longest match, then take per-column majorities."""
    reads = [r for r in reads if len(r)]
    if not reads:
        raise ValueError("no reads to vote on")
    starts, gaps = place_reads(reads)
    consensus, columns = vote_columns(reads, starts)
    return ConsensusRead(consensus, tuple(columns), tuple(starts), tuple(gaps))


# -- binary comparator array ----------------------------------------------------


def symbol_cells(symbols: str) -> np.ndarray:
    """Stored cell states: bit 0 -> (LRS, HRS), bit 1 -> (HRS, LRS)."""
    bits = np.array(encode3_bits(symbols), dtype=np.int8)
    cells = np.empty(2 * len(bits), dtype=np.int8)
    cells[0::2] = np.where(bits == 0, _LRS, _HRS)
    cells[1::2] = np.where(bits == 0, _HRS, _LRS)
    return cells


def query_voltages(symbols: str) -> np.ndarray:
    """RBL drive: bit 0 -> (low, high), bit 1 -> (high, low); 1 marks a high line."""
    bits = np.array(encode3_bits(symbols), dtype=np.int8)
    volts = np.empty(2 * len(bits), dtype=np.int8)
    volts[0::2] = bits
    volts[1::2] = 1 - bits
    return volts


@dataclass
class ComparatorArray:
    """SOT-MRAM rows of complementary cell pairs compared against a driven query.

    A cell conducts when its RBL is high and it reads as LRS. With
    ``per_cell_error`` each cell read flips state independently.
    """

    rows: int = COMPARATOR_ROWS
    cols: int = COMPARATOR_COLS
    per_cell_error: float = 0.0
    stored: list[str] = field(default_factory=list)

    @property
    def max_symbols(self) -> int:
        return self.cols // CELLS_PER_SYMBOL

    def write(self, substrings: Sequence[str]) -> None:
        if len(self.stored) + len(substrings) > self.rows:
            raise ValueError("comparator array is full")
        for s in substrings:
            if len(s) > self.max_symbols:
                raise ValueError(f"{len(s)} symbols exceed the {self.cols}-cell row")
            self.stored.append(str(s))

    def cell_matrix(self) -> np.ndarray:
        cells = np.full((len(self.stored), self.cols), _HRS, dtype=np.int8)
        for i, s in enumerate(self.stored):
            c = symbol_cells(s)
            cells[i, : len(c)] = c
        return cells

    def sl_currents(self, query: str, rng: np.random.Generator | None = None) -> np.ndarray:
        """Per-row source-line current in units of one conducting cell."""
        if len(query) > self.max_symbols:
            raise ValueError(f"query of {len(query)} symbols is wider than the array")
        v = np.zeros(self.cols, dtype=np.int8)
        q = query_voltages(query)
        v[: len(q)] = q
        cells = self.cell_matrix()
        if self.per_cell_error > 0:
            rng = rng or np.random.default_rng()
            flips = rng.random(cells.shape) < self.per_cell_error
            cells = np.where(flips, 1 - cells, cells)
        return (cells[:, : self.cols] * v).sum(axis=1)

    def compare(self, query: str, rng: np.random.Generator | None = None) -> np.ndarray:
        """Row match flags: true where the sense amplifier sees no current.

        Rows whose stored length differs from the query never match.
        """
        currents = self.sl_currents(query, rng)
        lengths = np.array([len(s) for s in self.stored])
        return (currents == 0) & (lengths == len(query))


def comparator_compare(array: ComparatorArray, query, rng: np.random.Generator | None = None) -> np.ndarray:
    q = query.symbols if isinstance(query, Read) else str(query)
    return array.compare(q, rng)


def all_substrings(read: str) -> list[str]:
    return [read[i:j] for i in range(len(read)) for j in range(i + 1, len(read) + 1)]


def comparator_longest_match(a: str, b: str, array: ComparatorArray | None = None) -> MatchResult:
    """Longest match found by storing substrings of ``a`` and querying substrings of ``b``."""
    best = MatchResult(0, 0, 0)
    subs_a = [(i, a[i:j]) for i in range(len(a)) for j in range(i + 1, len(a) + 1)]
    for start in range(0, len(subs_a), (array or ComparatorArray()).rows):
        arr = ComparatorArray(per_cell_error=array.per_cell_error if array else 0.0)
        block = subs_a[start : start + arr.rows]
        arr.write([s for _, s in block])
        for pb in range(len(b)):
            for pe in range(pb + 1, len(b) + 1):
                flags = arr.compare(b[pb:pe])
                for idx in np.flatnonzero(flags):
                    pa, s = block[idx]
                    cand = MatchResult(len(s), pa, pb)
                    if (cand.length, -cand.pos_a, -cand.pos_b) > (best.length, -best.pos_a, -best.pos_b):
                        best = cand
    return best


def expected_comparator_errors(per_cell_error: float, comparisons: float, bases: int = 30) -> float:
    """Mean misread cells over ``comparisons`` reads of ``bases`` symbols each."""
    return per_cell_error * CELLS_PER_SYMBOL * bases * comparisons


def binomial_vote_error(p: float, coverage: int) -> float:
    """Probability that at least half (rounded up) of ``coverage`` reads are wrong."""
    k = -(-coverage // 2)
    return float(binom.sf(k - 1, coverage, p))


def plurality_vote_error(p: float, coverage: int, truth: str = "A") -> float:
    """Exact probability that the per-column vote misses ``truth``.

    Each read shows the true base with probability ``1 - p`` and each of the
    three other bases with ``p / 3``; ties go to the lexicographically smallest
    base, as in :func:`majority`.
    """
    others = [b for b in "ACGT" if b != truth]
    err = 0.0
    for n_true in range(coverage + 1):
        rest = coverage - n_true
        for a in range(rest + 1):
            for b in range(rest - a + 1):
                c = rest - a - b
                counts = {truth: n_true, others[0]: a, others[1]: b, others[2]: c}
                top = max(counts.values())
                winner = min(k for k, v in counts.items() if v == top)
                if winner != truth:
                    err += float(multinomial.pmf([n_true, a, b, c], coverage, [1 - p, p / 3, p / 3, p / 3]))
    return err
