"""CTC read probability, prefix beam search, and the crossbar-mapped beam step."""

from __future__ import annotations

import csv
import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from helix import kernels
from helix.genome import ALPHABET, BASE_INDEX, BASES, BLANK, Read
from helix.quant import quantize_with, symmetric_spec

BLANK_INDEX = BASE_INDEX[BLANK]
ORACLE_MAX_STEPS = 8
DEFAULT_BEAM_WIDTH = 10


@dataclass(frozen=True)
class BeamEntry:
    prefix: str
    prob_blank: float
    prob_nonblank: float

    @property
    def total(self) -> float:
        return self.prob_blank + self.prob_nonblank


def as_matrix(p) -> np.ndarray:
    m = np.asarray(p, dtype=np.float64)
    if m.ndim != 2 or m.shape[1] != len(ALPHABET):
        raise ValueError(f"probability matrix must be (steps, {len(ALPHABET)}), got {m.shape}")
    return m


def collapse(alignment: str) -> str:
    """Merge repeated symbols, then drop blanks."""
    return "".join(k for k, _ in itertools.groupby(alignment) if k != BLANK)


def _labels(d) -> list[int]:
    s = d.symbols if isinstance(d, Read) else str(d)
    return [BASE_INDEX[c] for c in s]


def ctc_log_prob(d, p) -> float:
    m = as_matrix(p)
    labels = _labels(d)
    if len(labels) > m.shape[0]:
        return -math.inf
    return kernels.ctc_log_prob(m, labels, BLANK_INDEX)


def ctc_prob(d, p) -> float:
    """Probability of read ``d``: the sum over all of its CTC alignments."""
    lp = ctc_log_prob(d, p)
    return 0.0 if lp == -math.inf else math.exp(lp)


def enumerate_alignments_oracle(d, steps: int) -> set[str]:
    """Every length-``steps`` label string that collapses to ``d`` (brute force)."""
    if steps > ORACLE_MAX_STEPS:
        raise ValueError(f"oracle enumeration limited to {ORACLE_MAX_STEPS} steps")
    target = d.symbols if isinstance(d, Read) else str(d)
    return {
        "".join(a)
        for a in itertools.product(ALPHABET, repeat=steps)
        if collapse("".join(a)) == target
    }


def alignment_prob(alignment: str, p) -> float:
    m = as_matrix(p)
    out = 1.0
    for t, s in enumerate(alignment):
        out *= m[t, BASE_INDEX[s]]
    return out


# -- beam search ----------------------------------------------------------------


def _software_products(inputs: np.ndarray, probs: np.ndarray) -> np.ndarray:
    return np.multiply.outer(inputs, probs)


def beam_search(
    p,
    width: int = DEFAULT_BEAM_WIDTH,
    *,
    top_symbols: int | None = None,
    products=None,
) -> tuple[Read, float]:
    """Prefix beam search with blank/non-blank bookkeeping and prefix merging.

    ``top_symbols`` optionally keeps only the k most probable symbols per step.
    ``products(inputs, probs)`` computes the entry-by-symbol product table; the
    crossbar model plugs in here.
    """
    if width < 1:
        raise ValueError("beam width must be >= 1")
    m = as_matrix(p)
    if m.shape[0] == 0:
        raise ValueError("empty probability matrix")
    products = products or _software_products
    beams = [BeamEntry("", 1.0, 0.0)]
    for row in m:
        symbols = range(len(ALPHABET))
        if top_symbols is not None:
            symbols = sorted(np.argsort(-row, kind="stable")[:top_symbols])
        step = [int(s) for s in symbols]
        # WL inputs per entry: [pb, pnb, total]
        inputs = np.array([[b.prob_blank, b.prob_nonblank, b.total] for b in beams]).reshape(-1)
        table = products(inputs, row[step]).reshape(len(beams), 3, len(step))
        acc: dict[str, list[float]] = defaultdict(lambda: [0.0, 0.0])
        for bi, entry in enumerate(beams):
            last = BASE_INDEX[entry.prefix[-1]] if entry.prefix else None
            for si, sym in enumerate(step):
                if sym == BLANK_INDEX:
                    acc[entry.prefix][0] += table[bi, 2, si]
                elif sym == last:
                    acc[entry.prefix][1] += table[bi, 1, si]
                    acc[entry.prefix + ALPHABET[sym]][1] += table[bi, 0, si]
                else:
                    acc[entry.prefix + ALPHABET[sym]][1] += table[bi, 2, si]
        ranked = sorted(acc.items(), key=lambda kv: (-(kv[1][0] + kv[1][1]), kv[0]))
        beams = [BeamEntry(k, v[0], v[1]) for k, v in ranked[:width]]
    best = min(beams, key=lambda b: (-b.total, b.prefix))
    return Read(best.prefix), best.total


def exhaustive_decode(p, max_len: int | None = None) -> tuple[str, float]:
    """Argmax of ctc_prob over every read up to ``max_len`` (test oracle)."""
    m = as_matrix(p)
    max_len = m.shape[0] if max_len is None else max_len
    best = ("", ctc_prob("", m))
    for n in range(1, max_len + 1):
        for s in itertools.product(BASES, repeat=n):
            d = "".join(s)
            pr = ctc_prob(d, m)
            if pr > best[1] or (pr == best[1] and d < best[0]):
                best = (d, pr)
    return best


# -- crossbar-mapped beam step ----------------------------------------------


@dataclass(frozen=True)
class CtcCrossbar:
    """Dot-product array used for beam extension.

    Step-(t+1) probabilities sit on the array diagonal, step-t probabilities
    drive the word-lines, and a transistor per bit-line can short it to its
    neighbour so adjacent currents sum. ``prob_bits=None`` is the ideal model.
    """

    size: int = 128
    prob_bits: int | None = None

    def _q(self, v: np.ndarray) -> np.ndarray:
        if self.prob_bits is None:
            return v
        spec = symmetric_spec(1.0, self.prob_bits)
        return quantize_with(np.clip(v, 0.0, 1.0), spec).dequantize()

    def bitline_currents(self, wl_inputs: np.ndarray, diagonal: np.ndarray) -> np.ndarray:
        n = len(diagonal)
        if n > self.size:
            raise ValueError(f"{n} products do not fit a {self.size}-wide array")
        cells = np.zeros((self.size, self.size))
        cells[np.arange(n), np.arange(n)] = self._q(np.asarray(diagonal, dtype=np.float64))
        v = np.zeros(self.size)
        v[:n] = self._q(np.asarray(wl_inputs, dtype=np.float64))
        return (v @ cells)[:n]

    def products(self, inputs: np.ndarray, probs: np.ndarray) -> np.ndarray:
        """Entry-by-symbol product table, computed one array load at a time."""
        inputs = np.asarray(inputs, dtype=np.float64)
        probs = np.asarray(probs, dtype=np.float64)
        k = len(probs)
        per_load = max(1, self.size // k)
        out = np.empty((len(inputs), k))
        for start in range(0, len(inputs), per_load):
            chunk = inputs[start : start + per_load]
            wl = np.repeat(chunk, k)
            diag = np.tile(probs, len(chunk))
            out[start : start + len(chunk)] = self.bitline_currents(wl, diag).reshape(len(chunk), k)
        return out

    def passes(self, width: int, symbols: int = len(ALPHABET)) -> int:
        """Array loads per time step for a beam of ``width`` entries."""
        return math.ceil(3 * width * symbols / self.size)


def _step_pairs(top_k: Mapping[str, float], nxt: Mapping[str, float]):
    for a, pa in top_k.items():
        for b, pb in nxt.items():
            yield a, b, pa, pb


def crossbar_beam_step(
    top_k: Mapping[str, float],
    nxt: Mapping[str, float],
    merge: bool = True,
    *,
    array: CtcCrossbar | None = None,
) -> dict[str, float]:
    """Two-step product/merge on the crossbar.

    Returns the raw products keyed by the two-symbol string when ``merge`` is
    false, else sums keyed by the collapsed read (bit-lines of one group are
    adjacent and shorted together).
    """
    array = array or CtcCrossbar()
    pairs = list(_step_pairs(top_k, nxt))
    if len(pairs) > array.size:
        raise ValueError(f"k={len(top_k)} x {len(nxt)} products exceed a {array.size}-wide array")
    currents = array.bitline_currents(
        np.array([pa for *_, pa, _ in pairs]), np.array([pb for *_, pb in pairs])
    )
    if not merge:
        return {a + b: float(c) for (a, b, _, _), c in zip(pairs, currents)}
    return _merge_groups([collapse(a + b) for a, b, _, _ in pairs], currents)


def software_beam_step(top_k: Mapping[str, float], nxt: Mapping[str, float], merge: bool = True) -> dict[str, float]:
    """Reference beam step with plain float products."""
    pairs = list(_step_pairs(top_k, nxt))
    prods = [pa * pb for *_, pa, pb in pairs]
    if not merge:
        return {a + b: pr for (a, b, _, _), pr in zip(pairs, prods)}
    return _merge_groups([collapse(a + b) for a, b, _, _ in pairs], prods)


def _merge_groups(keys: Sequence[str], values) -> dict[str, float]:
    # bit-lines are ordered so each group is contiguous; sum in bit-line order
    order = sorted(range(len(keys)), key=lambda i: (keys[i], i))
    out: dict[str, float] = {}
    for i in order:
        out[keys[i]] = out.get(keys[i], 0.0) + float(values[i])
    return out


# -- CSV ------------------------------------------------------------------------


def load_prob_csv(path: str | Path) -> np.ndarray:
    """Steps x 5 matrix (columns A, C, G, T, blank); a non-numeric header row is skipped."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or not "".join(rec).strip():
                continue
            try:
                rows.append([float(v) for v in rec])
            except ValueError:
                if rows:
                    raise ValueError(f"malformed probability row: {rec}") from None
    m = np.array(rows, dtype=np.float64)
    if m.size == 0:
        raise ValueError("probability CSV is empty")
    return as_matrix(m)


def save_prob_csv(path: str | Path, p) -> None:
    m = as_matrix(p)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(list(ALPHABET))
        for row in m:
            w.writerow([repr(float(v)) for v in row])
