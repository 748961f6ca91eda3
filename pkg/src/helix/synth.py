"""Synthetic nanopore-like signals for desk-scale experiments.

Each base holds a fixed current level for a short random dwell, plus Gaussian
noise. Sequences avoid homopolymers, so collapsing the per-sample labels
recovers the base sequence exactly and a per-sample classifier is enough to
base-call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from helix.genome import BASES, Read
from helix.nn import NetTopology, window_starts

LEVELS = {"A": -1.5, "C": -0.5, "G": 0.5, "T": 1.5}


def random_sequence(n: int, rng: np.random.Generator) -> str:
    """Random bases with no two neighbours equal."""
    if n <= 0:
        return ""
    out = [int(rng.integers(4))]
    for _ in range(n - 1):
        out.append((out[-1] + 1 + int(rng.integers(3))) % 4)
    return "".join(BASES[i] for i in out)


@dataclass(frozen=True)
class SignalStream:
    bases: str
    signal: np.ndarray
    labels: np.ndarray  # base index per sample
    base_of_sample: np.ndarray  # position in ``bases`` per sample

    def truth(self, start: int, stop: int) -> Read:
        """Bases touched by samples [start, stop)."""
        idx = self.base_of_sample[start:stop]
        if not len(idx):
            return Read("")
        return Read(self.bases[idx[0] : idx[-1] + 1])

    def windows(self, topo: NetTopology) -> tuple[np.ndarray, list[Read], list[int]]:
        starts = window_starts(len(self.signal), topo.input_length, topo.sliding_offset)
        sig = np.stack([self.signal[s : s + topo.input_length] for s in starts])
        truths = [self.truth(s, s + topo.input_length) for s in starts]
        return sig, truths, starts


def make_stream(
    n_bases: int,
    rng: np.random.Generator,
    noise: float = 0.3,
    dwell: tuple[int, int] = (1, 3),
    levels: dict[str, float] = LEVELS,
) -> SignalStream:
    bases = random_sequence(n_bases, rng)
    lengths = rng.integers(dwell[0], dwell[1] + 1, size=n_bases)
    base_of_sample = np.repeat(np.arange(n_bases), lengths)
    labels = np.array([BASES.index(bases[i]) for i in base_of_sample], dtype=np.int64)
    level = np.array([levels[b] for b in BASES])[labels]
    signal = level + noise * rng.standard_normal(len(labels))
    return SignalStream(bases, signal, labels, base_of_sample)


def threshold_toy_weights(topo: NetTopology, gain: float = 4.0) -> dict[str, np.ndarray]:
    """Hand-set weights that classify each sample by its level.

    The conv layer's centre tap feeds three tanh threshold units placed between
    the four levels, the GRU passes its input straight through (update gate held
    at zero), and the FC layer scores each base by how well the threshold
    pattern matches. Requires a single K=3, 1->4 conv, one GRU of width 4 and
    FC 4->5, i.e. the ``toy`` topology.
    """
    if (
        len(topo.conv) != 1
        or topo.conv[0].in_channels != 1
        or topo.conv[0].out_channels != 4
        or not topo.rnn
        or topo.rnn.type != "GRU"
        or topo.rnn.count != 1
        or topo.rnn.width != 4
    ):
        raise ValueError("threshold weights are defined for the toy conv/GRU/FC topology only")
    k = topo.conv[0].kernel
    cuts = np.array([-1.0, 0.0, 1.0])
    w = np.zeros((k, 1, 4))
    w[k // 2, 0, :3] = gain
    b = np.zeros(4)
    b[:3] = -gain * cuts
    hidden = 4
    z = np.zeros((hidden, hidden))
    weights = {
        "conv0.w": w,
        "conv0.b": b,
        "rnn0.W_z": z.copy(),
        "rnn0.U_z": z.copy(),
        "rnn0.b_z": np.full(hidden, -0.5),  # sigma(0) - 0.5 = 0: no carry-over
        "rnn0.W_r": z.copy(),
        "rnn0.U_r": z.copy(),
        "rnn0.b_r": np.zeros(hidden),
        "rnn0.W_h": np.eye(hidden) * 1.5,
        "rnn0.U_h": z.copy(),
        "rnn0.b_h": np.zeros(hidden),
    }
    # base k sits above the first k cuts
    pattern = np.array([[1.0 if j < kk else -1.0 for j in range(3)] for kk in range(4)])
    fc = np.zeros((hidden, 5))
    fc[:3, :4] = pattern.T * 3.0
    fc_b = np.array([0.0, 0.0, 0.0, 0.0, -6.0])
    weights["fc.w"] = fc
    weights["fc.b"] = fc_b
    return weights
