"""Systematic-error-aware training on small models.

``loss0`` is the usual CTC negative log-likelihood of the truth read. ``loss1``
adds, per window, the squared log-ratio between the truth and the consensus
that read voting would produce from the model's own reads of the neighbouring
windows, so training is pushed away from errors that voting cannot fix.
Gradients come from central finite differences, which is adequate for models of
a few hundred parameters.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from helix.ctc import beam_search, ctc_log_prob
from helix.genome import Read, read_accuracy
from helix.nn import NetTopology, check_weights, flatten, logits_forward, softmax, unflatten, weight_shapes
from helix.synth import SignalStream
from helix.vote import align_and_vote

PROB_FLOOR = 1e-12
LOG_FLOOR = math.log(PROB_FLOOR)

ModelFn = Callable[[np.ndarray], np.ndarray]  # (B, L) signals -> (B, T, 5) probabilities


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainSample:
    """Consecutive overlapping windows; the middle one is labelled with ``truth``."""

    signals: np.ndarray
    truth: Read

    def __post_init__(self):
        s = np.asarray(self.signals, dtype=np.float64)
        if s.ndim != 2 or s.shape[0] % 2 == 0:
            raise ValueError("signals must be an odd number of windows, shape (k, L)")
        object.__setattr__(self, "signals", s)

    @property
    def centre(self) -> np.ndarray:
        return self.signals[len(self.signals) // 2]


@dataclass(frozen=True)
class SeatConfig:
    eta: float = 1.0
    vote_arity: int = 3

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")
        if self.vote_arity < 3 or self.vote_arity % 2 == 0:
            raise ValueError("vote_arity must be an odd integer >= 3")


@dataclass
class ToyModel:
    """A topology, its weights and an optional fixed-point width, callable on signal batches."""

    topo: NetTopology
    weights: dict[str, np.ndarray]
    bits: int | None = None
    names: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        check_weights(self.topo, self.weights)
        self.names = tuple(weight_shapes(self.topo))

    def __call__(self, signals: np.ndarray) -> np.ndarray:
        return softmax(logits_forward(self.topo, self.weights, np.atleast_2d(signals), self.bits))

    def vector(self) -> np.ndarray:
        return flatten(self.weights, self.names)

    def with_vector(self, vec: np.ndarray) -> "ToyModel":
        return ToyModel(self.topo, unflatten(np.array(vec, dtype=np.float64), self.weights, self.names), self.bits)


def _log_p(read, probs: np.ndarray) -> float:
    return max(ctc_log_prob(read, probs), LOG_FLOOR)


def loss0(samples: Sequence[TrainSample], model: ModelFn) -> float:
    """Sum over samples of -ln p(G_i | R_i)."""
    if not samples:
        return 0.0
    probs = model(np.stack([s.centre for s in samples]))
    return float(sum(-_log_p(s.truth, p) for s, p in zip(samples, probs)))


def decode(probs: np.ndarray, width: int = 5) -> Read:
    return beam_search(probs, width)[0]


def consensus_of(reads: Sequence[Read]) -> Read:
    """Consensus restricted to the columns of the middle read."""
    centre = len(reads) // 2
    if not len(reads[centre]):
        return Read("")
    kept = [i for i, r in enumerate(reads) if len(r)]
    cons = align_and_vote([reads[i] for i in kept])
    j = kept.index(centre)
    start = cons.starts[j]
    return Read(cons.symbols[start : start + len(reads[centre])])


def predicted_reads(samples: Sequence[TrainSample], model: ModelFn, width: int = 5) -> list[list[Read]]:
    k = len(samples[0].signals)
    probs = model(np.concatenate([s.signals for s in samples]))
    return [[decode(probs[i * k + j], width) for j in range(k)] for i in range(len(samples))]


def consensus_reads(samples: Sequence[TrainSample], model: ModelFn, width: int = 5) -> list[Read]:
    return [consensus_of(r) for r in predicted_reads(samples, model, width)]


def loss1(
    samples: Sequence[TrainSample],
    model: ModelFn,
    config: SeatConfig = SeatConfig(),
    consensus: Sequence[Read] | None = None,
) -> float:
    """Sum of -eta ln p(G|R) + (ln p(G|R) - ln p(C|R))^2 over samples.

    ``consensus`` holds C_i; when omitted it is recomputed from ``model``.
    """
    if not samples:
        return 0.0
    if consensus is None:
        consensus = consensus_reads(samples, model)
    probs = model(np.stack([s.centre for s in samples]))
    total = 0.0
    for s, c, p in zip(samples, consensus, probs):
        lg = _log_p(s.truth, p)
        lc = lg if c == s.truth else _log_p(c, p)
        total += -config.eta * lg + (lg - lc) ** 2
    return float(total)


def make_samples(stream: SignalStream, topo: NetTopology, arity: int = 3) -> list[TrainSample]:
    """One sample per window that has ``arity // 2`` neighbours on both sides."""
    sig, truths, _ = stream.windows(topo)
    h = arity // 2
    return [TrainSample(sig[i - h : i + h + 1], truths[i]) for i in range(h, len(sig) - h)]


@dataclass(frozen=True)
class TracePoint:
    step: int
    loss: float
    read_accuracy: float
    vote_accuracy: float


@dataclass
class TrainResult:
    model: ToyModel
    trace: list[TracePoint]

    def write_csv(self, path: str | Path) -> None:
        write_trace_csv(self.trace, path)


def write_trace_csv(trace: Sequence[TracePoint], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "loss", "read_accuracy", "vote_accuracy"])
        for t in trace:
            w.writerow([t.step, f"{t.loss:.6g}", f"{t.read_accuracy:.6f}", f"{t.vote_accuracy:.6f}"])


def accuracies(samples: Sequence[TrainSample], reads: Sequence[Sequence[Read]]) -> tuple[float, float]:
    """Mean read accuracy of the middle reads and of their consensus."""
    centre = len(reads[0]) // 2
    ra = np.mean([read_accuracy(r[centre].symbols, s.truth.symbols) for s, r in zip(samples, reads)])
    va = np.mean([read_accuracy(consensus_of(r).symbols, s.truth.symbols) for s, r in zip(samples, reads)])
    return float(ra), float(va)


def fd_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, eps: float, stencil: str = "central") -> np.ndarray:
    g = np.empty_like(x)
    f0 = f(x) if stencil == "forward" else None
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = eps
        if stencil == "central":
            g[i] = (f(x + e) - f(x - e)) / (2 * eps)
        elif stencil == "forward":
            g[i] = (f(x + e) - f0) / eps
        else:
            raise ValueError(f"unknown stencil {stencil!r}")
    return g


def train_toy(
    model: ToyModel,
    samples: Sequence[TrainSample],
    loss: str = "loss0",
    steps: int = 50,
    lr: float = 0.05,
    config: SeatConfig = SeatConfig(),
    eps: float | None = None,
    beam_width: int = 5,
) -> TrainResult:
    """Adam on finite-difference gradients; the consensus is refreshed at every step.

    ``eps`` defaults to 1e-4 for float models and 0.05 (about one 5-bit step of
    a unit-range tensor) for quantized ones, where the loss is piecewise constant.
    """
    if loss not in ("loss0", "loss1"):
        raise ValueError(f"unknown loss {loss!r}")
    if steps < 0 or lr < 0:
        raise ValueError("steps and lr must be non-negative")
    if not samples:
        raise ValueError("no training samples")
    eps = eps if eps is not None else (1e-4 if model.bits is None else 0.05)
    x = model.vector()
    m = np.zeros_like(x)
    v = np.zeros_like(x)
    b1, b2 = 0.9, 0.999
    trace: list[TracePoint] = []

    for step in range(steps + 1):
        cur = model.with_vector(x)
        reads = predicted_reads(samples, cur, beam_width)
        cons = [consensus_of(r) for r in reads]
        if loss == "loss0":
            objective = lambda vec: loss0(samples, model.with_vector(vec))  # noqa: E731
        else:
            objective = lambda vec: loss1(samples, model.with_vector(vec), config, cons)  # noqa: E731
        value = objective(x)
        if not math.isfinite(value):
            raise TrainingDiverged(f"loss became {value} at step {step}")
        trace.append(TracePoint(step, value, *accuracies(samples, reads)))
        if step == steps or lr == 0:
            if lr == 0 and step < steps:
                trace.extend(TracePoint(s, value, trace[-1].read_accuracy, trace[-1].vote_accuracy) for s in range(step + 1, steps + 1))
            break
        g = fd_gradient(objective, x, eps)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        mh = m / (1 - b1 ** (step + 1))
        vh = v / (1 - b2 ** (step + 1))
        x = x - lr * mh / (np.sqrt(vh) + 1e-8)
    return TrainResult(model.with_vector(x), trace)


def evaluate_stream(model: ToyModel, stream: SignalStream, width: int = 5) -> tuple[float, float]:
    """Read accuracy (mean over windows) and vote accuracy (consensus over the whole stream)."""
    sig, truths, starts = stream.windows(model.topo)
    probs = model(sig)
    reads = [decode(p, width) for p in probs]
    ra = float(np.mean([read_accuracy(r.symbols, t.symbols) for r, t in zip(reads, truths)]))
    covered = stream.truth(starts[0], starts[-1] + model.topo.input_length)
    nonempty = [r for r in reads if len(r)]
    cons = align_and_vote(nonempty).symbols if nonempty else ""
    return ra, read_accuracy(cons, covered.symbols)
