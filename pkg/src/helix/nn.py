"""Float and fixed-point forward passes for Conv -> GRU/LSTM -> FC base-callers."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from helix.genome import ALPHABET, Read
from helix.quant import fake_quant, quantize, save_bundle, load_bundle

Weights = dict[str, np.ndarray]

ROW_SUM_TOL = 1e-9


class ShapeWarning(UserWarning):
    """A configured layer shape disagrees with the one computed from layer parameters."""


@dataclass(frozen=True)
class ConvLayer:
    kernel: int
    in_channels: int
    out_channels: int
    stride: int = 1

    def output_length(self, length: int) -> int:
        return math.ceil(length / self.stride)


@dataclass(frozen=True)
class RnnLayer:
    type: str  # "GRU" | "LSTM"
    width: int
    count: int = 1

    def __post_init__(self):
        if self.type not in ("GRU", "LSTM"):
            raise ValueError(f"unknown recurrent layer type {self.type!r}")

    @property
    def gates(self) -> int:
        return 3 if self.type == "GRU" else 4


@dataclass(frozen=True)
class FcLayer:
    inputs: int
    outputs: int = len(ALPHABET)


@dataclass(frozen=True)
class NetTopology:
    name: str
    input_length: int
    sliding_offset: int
    conv: tuple[ConvLayer, ...]
    rnn: RnnLayer | None
    fc: FcLayer
    conv_activation: str = "tanh"
    reported: Mapping = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.fc.outputs != len(ALPHABET):
            raise ValueError("fc layer must emit 5 symbol logits")
        channels = 1
        for layer in self.conv:
            if layer.in_channels != channels:
                raise ValueError(f"conv expects {layer.in_channels} channels, previous layer gives {channels}")
            channels = layer.out_channels
        feat = self.rnn.width if self.rnn else channels
        if self.fc.inputs != feat:
            raise ValueError(f"fc expects {self.fc.inputs} inputs, previous layer gives {feat}")

    @property
    def timesteps(self) -> int:
        length = self.input_length
        for layer in self.conv:
            length = layer.output_length(length)
        return length

    @property
    def conv_channels(self) -> int:
        return self.conv[-1].out_channels if self.conv else 1

    def layer_shapes(self) -> dict[str, tuple[int, int]]:
        steps = self.timesteps
        shapes = {"conv_output": (steps, self.conv_channels)}
        if self.rnn:
            shapes["rnn_output"] = (steps, self.rnn.width)
        shapes["fc_output"] = (steps, self.fc.outputs)
        return shapes

    def matmul_layers(self) -> list[dict]:
        """Every weight matrix as (name, rows=inputs, cols=outputs, uses per window)."""
        out = []
        length = self.input_length
        for i, layer in enumerate(self.conv):
            length = layer.output_length(length)
            out.append(dict(name=f"conv{i}", rows=layer.kernel * layer.in_channels, cols=layer.out_channels, uses=length))
        steps = self.timesteps
        if self.rnn:
            feat = self.conv_channels
            for k in range(self.rnn.count):
                h, g = self.rnn.width, self.rnn.gates
                out.append(dict(name=f"rnn{k}.W", rows=feat, cols=g * h, uses=steps))
                out.append(dict(name=f"rnn{k}.U", rows=h, cols=g * h, uses=steps))
                feat = h
        out.append(dict(name="fc", rows=self.fc.inputs, cols=self.fc.outputs, uses=steps))
        return out

    def macs(self) -> int:
        return sum(l["rows"] * l["cols"] * l["uses"] for l in self.matmul_layers())

    def param_count(self) -> int:
        return sum(int(np.prod(s)) for s in weight_shapes(self).values())

    def check_reported(self) -> list[str]:
        """Compare computed shapes with configured ones; warn on each disagreement."""
        issues = []
        for key, computed in self.layer_shapes().items():
            want = self.reported.get(key)
            if want is not None and tuple(want) != tuple(computed):
                issues.append(f"{self.name}: {key} computed {tuple(computed)} but configured {tuple(want)}")
        want_fc = self.reported.get("fc_in")
        if want_fc is not None and want_fc != self.fc.inputs:
            issues.append(f"{self.name}: fc input computed {self.fc.inputs} but configured {want_fc}")
        for msg in issues:
            warnings.warn(msg, ShapeWarning, stacklevel=2)
        return issues

    @property
    def reported_macs(self) -> float | None:
        return self.reported.get("total_macs")


def topology_from_dict(name: str, cfg: Mapping) -> NetTopology:
    rnn = cfg.get("rnn")
    topo = NetTopology(
        name=name,
        input_length=int(cfg["input_length"]),
        sliding_offset=int(cfg.get("sliding_offset", 1)),
        conv=tuple(ConvLayer(**c) for c in cfg.get("conv", [])),
        rnn=RnnLayer(type=rnn["type"], width=int(rnn["width"]), count=int(rnn.get("count", 1))) if rnn else None,
        fc=FcLayer(inputs=int(cfg["fc"]["in"]), outputs=int(cfg["fc"].get("out", 5))),
        conv_activation=cfg.get("conv_activation", "tanh"),
        reported=cfg.get("reported", {}),
    )
    return topo


def builtin_topologies() -> dict[str, dict]:
    text = resources.files("helix").joinpath("data/topologies.json").read_text()
    return json.loads(text)


def load_topology(name_or_path: str | Path) -> NetTopology:
    """Built-in topology by name, or a JSON file holding one topology object."""
    table = builtin_topologies()
    if str(name_or_path) in table:
        topo = topology_from_dict(str(name_or_path), table[str(name_or_path)])
    else:
        path = Path(name_or_path)
        cfg = json.loads(path.read_text())
        topo = topology_from_dict(cfg.get("name", path.stem), cfg)
    topo.check_reported()
    return topo


# -- probability matrix -------------------------------------------------------


class ProbMatrix:
    """Per-timestep distribution over A, C, G, T, blank."""

    def __init__(self, rows):
        m = np.array(rows, dtype=np.float64)
        if m.ndim != 2 or m.shape[1] != len(ALPHABET):
            raise ValueError(f"expected (steps, 5) probabilities, got {m.shape}")
        if np.any(m < 0):
            raise ValueError("probabilities must be non-negative")
        if m.size and np.max(np.abs(m.sum(axis=1) - 1.0)) > ROW_SUM_TOL:
            raise ValueError("every row must sum to 1")
        m.setflags(write=False)
        self.rows = m

    def __array__(self, dtype=None, copy=None):
        return self.rows if dtype is None else self.rows.astype(dtype)

    def __len__(self) -> int:
        return self.rows.shape[0]

    def argmax_path(self) -> str:
        return "".join(ALPHABET[i] for i in self.rows.argmax(axis=1))


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


# -- layers -------------------------------------------------------------------


def _q(x: np.ndarray, bits: int | None) -> np.ndarray:
    if bits is None or not np.any(x):
        return x
    return fake_quant(x, bits)


def conv1d_forward(x: np.ndarray, weights: np.ndarray, stride: int = 1, bias=None, bits: int | None = None) -> np.ndarray:
    """Same-padded 1-D convolution of an (L, N) input by a (K, N, M) filter.

    A leading batch axis on ``x`` is allowed. Output length is ceil(L / stride).
    """
    x = np.asarray(x, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    batched = x.ndim == 3
    if not batched:
        x = x[None]
    if x.ndim != 3 or w.ndim != 3 or x.shape[2] != w.shape[1]:
        raise ValueError(f"conv shape mismatch: input {x.shape[1:]} vs filter {w.shape}")
    if stride <= 0:
        raise ValueError("stride must be positive")
    _, length, _ = x.shape
    k, n, m = w.shape
    if length < k:
        raise ValueError("input shorter than the kernel")
    out_len = math.ceil(length / stride)
    pad = max((out_len - 1) * stride + k - length, 0)
    xp = np.pad(x, ((0, 0), (pad // 2, pad - pad // 2), (0, 0)))
    idx = np.arange(out_len)[:, None] * stride + np.arange(k)[None, :]
    patches = xp[:, idx, :].reshape(x.shape[0], out_len, k * n)
    out = _q(patches, bits) @ _q(w.reshape(k * n, m), bits)
    if bias is not None:
        out = out + bias
    return out if batched else out[0]


@dataclass
class GruParams:
    W_z: np.ndarray
    U_z: np.ndarray
    b_z: np.ndarray
    W_r: np.ndarray
    U_r: np.ndarray
    b_r: np.ndarray
    W_h: np.ndarray
    U_h: np.ndarray
    b_h: np.ndarray

    def __post_init__(self):
        hidden, inputs = np.shape(self.W_z)
        for name in ("W_z", "W_r", "W_h"):
            if np.shape(getattr(self, name)) != (hidden, inputs):
                raise ValueError(f"{name} must be ({hidden}, {inputs})")
        for name in ("U_z", "U_r", "U_h"):
            if np.shape(getattr(self, name)) != (hidden, hidden):
                raise ValueError(f"{name} must be ({hidden}, {hidden})")
        for name in ("b_z", "b_r", "b_h"):
            if np.shape(getattr(self, name)) != (hidden,):
                raise ValueError(f"{name} must be ({hidden},)")

    @property
    def hidden(self) -> int:
        return np.shape(self.W_z)[0]

    @classmethod
    def from_weights(cls, w: Mapping[str, np.ndarray], prefix: str) -> "GruParams":
        return cls(**{k: np.asarray(w[f"{prefix}.{k}"], dtype=np.float64) for k in cls.__dataclass_fields__})


def gru_forward(params: GruParams, x_seq: np.ndarray, h0=None, bits: int | None = None) -> np.ndarray:
    """GRU over a (T, I) or (B, T, I) sequence; returns the hidden state at every step.

    The update gate bias sits outside the sigmoid, matching the published cell
    equations (Z = sigmoid(W_z x + U_z h) + b_z).
    """
    x = np.asarray(x_seq, dtype=np.float64)
    batched = x.ndim == 3
    if not batched:
        x = x[None]
    batch, steps, _ = x.shape
    hidden = params.hidden
    h = np.zeros((batch, hidden)) if h0 is None else np.broadcast_to(np.asarray(h0, dtype=np.float64), (batch, hidden)).copy()
    W = np.concatenate([params.W_z, params.W_r, params.W_h]).T  # (I, 3H)
    xw = _q(x, bits) @ _q(W, bits)
    Uzr = _q(np.concatenate([params.U_z, params.U_r]).T, bits)
    Uh = _q(params.U_h.T, bits)
    out = np.empty((batch, steps, hidden))
    for t in range(steps):
        hq = _q(h, bits)
        zr = hq @ Uzr
        z = sigmoid(xw[:, t, :hidden] + zr[:, :hidden]) + params.b_z
        r = sigmoid(xw[:, t, hidden : 2 * hidden] + zr[:, hidden:]) + params.b_r
        h_cand = np.tanh(xw[:, t, 2 * hidden :] + _q(r * h, bits) @ Uh) + params.b_h
        h = z * h + (1.0 - z) * h_cand
        out[:, t] = h
    return out if batched else out[0]


def lstm_forward(w: Mapping[str, np.ndarray], prefix: str, x_seq: np.ndarray, bits: int | None = None) -> np.ndarray:
    """Standard LSTM cell (input, forget, cell, output gates), zero initial state."""
    x = np.asarray(x_seq, dtype=np.float64)
    batched = x.ndim == 3
    if not batched:
        x = x[None]
    batch, steps, _ = x.shape
    W = np.asarray(w[f"{prefix}.W"])  # (I, 4H) gate order i, f, g, o
    U = np.asarray(w[f"{prefix}.U"])  # (H, 4H)
    b = np.asarray(w[f"{prefix}.b"])
    hidden = U.shape[0]
    xw = _q(x, bits) @ _q(W, bits) + b
    Uq = _q(U, bits)
    h = np.zeros((batch, hidden))
    c = np.zeros((batch, hidden))
    out = np.empty((batch, steps, hidden))
    for t in range(steps):
        g = xw[:, t] + _q(h, bits) @ Uq
        i, f = sigmoid(g[:, :hidden]), sigmoid(g[:, hidden : 2 * hidden])
        cand, o = np.tanh(g[:, 2 * hidden : 3 * hidden]), sigmoid(g[:, 3 * hidden :])
        c = f * c + i * cand
        h = o * np.tanh(c)
        out[:, t] = h
    return out if batched else out[0]


# -- whole network -------------------------------------------------------------

_GRU_KEYS = ("W_z", "U_z", "b_z", "W_r", "U_r", "b_r", "W_h", "U_h", "b_h")


def weight_shapes(topo: NetTopology) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    for i, c in enumerate(topo.conv):
        shapes[f"conv{i}.w"] = (c.kernel, c.in_channels, c.out_channels)
        shapes[f"conv{i}.b"] = (c.out_channels,)
    feat = topo.conv_channels
    if topo.rnn:
        h = topo.rnn.width
        for k in range(topo.rnn.count):
            if topo.rnn.type == "GRU":
                for g in "zrh":
                    shapes[f"rnn{k}.W_{g}"] = (h, feat)
                    shapes[f"rnn{k}.U_{g}"] = (h, h)
                    shapes[f"rnn{k}.b_{g}"] = (h,)
            else:
                shapes[f"rnn{k}.W"] = (feat, 4 * h)
                shapes[f"rnn{k}.U"] = (h, 4 * h)
                shapes[f"rnn{k}.b"] = (4 * h,)
            feat = h
    shapes["fc.w"] = (topo.fc.inputs, topo.fc.outputs)
    shapes["fc.b"] = (topo.fc.outputs,)
    return shapes


def init_weights(topo: NetTopology, rng: np.random.Generator, scale: float = 0.5) -> Weights:
    """Uniform fan-in scaled initialisation; biases start at zero."""
    out = {}
    for name, shape in weight_shapes(topo).items():
        if name.split(".")[-1].startswith("b"):
            out[name] = np.zeros(shape)
        else:
            fan_in = int(np.prod(shape[:-1])) if name.startswith(("conv", "fc")) or name.endswith((".W", ".U")) else shape[-1]
            out[name] = rng.uniform(-scale, scale, size=shape) / math.sqrt(max(fan_in, 1))
    return out


def check_weights(topo: NetTopology, weights: Mapping[str, np.ndarray]) -> None:
    for name, shape in weight_shapes(topo).items():
        if name not in weights:
            raise ValueError(f"missing weight {name}")
        if tuple(np.shape(weights[name])) != shape:
            raise ValueError(f"weight {name} has shape {np.shape(weights[name])}, topology needs {shape}")


def logits_forward(topo: NetTopology, weights: Mapping[str, np.ndarray], signal, bits: int | None = None) -> np.ndarray:
    """FC logits for one window (L,) or a batch of windows (B, L)."""
    x = np.asarray(signal, dtype=np.float64)
    batched = x.ndim == 2
    if not batched:
        x = x[None]
    if x.shape[1] != topo.input_length:
        raise ValueError(f"signal window length {x.shape[1]} != topology input length {topo.input_length}")
    h = x[:, :, None]
    for i, layer in enumerate(topo.conv):
        h = conv1d_forward(h, weights[f"conv{i}.w"], layer.stride, weights[f"conv{i}.b"], bits=bits)
        if topo.conv_activation == "tanh":
            h = np.tanh(h)
        elif topo.conv_activation == "relu":
            h = np.maximum(h, 0.0)
    if topo.rnn:
        for k in range(topo.rnn.count):
            if topo.rnn.type == "GRU":
                h = gru_forward(GruParams.from_weights(weights, f"rnn{k}"), h, bits=bits)
            else:
                h = lstm_forward(weights, f"rnn{k}", h, bits=bits)
    z = _q(h, bits) @ _q(np.asarray(weights["fc.w"]), bits) + weights["fc.b"]
    return z if batched else z[0]


def basecaller_forward(topo: NetTopology, weights: Mapping[str, np.ndarray], signal, bits: int | None = None):
    """Symbol probabilities per FC timestep; a list of ProbMatrix for batched input.

    ``bits`` runs the fixed-point path: weights and every layer input are
    quantized per tensor before each matrix product.
    """
    check_weights(topo, weights)
    probs = softmax(logits_forward(topo, weights, signal, bits))
    if probs.ndim == 3:
        return [ProbMatrix(p) for p in probs]
    return ProbMatrix(probs)


def flatten(weights: Mapping[str, np.ndarray], names: Sequence[str]) -> np.ndarray:
    return np.concatenate([np.ravel(weights[n]) for n in names])


def unflatten(vec: np.ndarray, like: Mapping[str, np.ndarray], names: Sequence[str]) -> Weights:
    out, pos = {}, 0
    for n in names:
        shape = np.shape(like[n])
        size = int(np.prod(shape))
        out[n] = vec[pos : pos + size].reshape(shape)
        pos += size
    return out


def save_weights(path: str | Path, weights: Mapping[str, np.ndarray], bit_width: int = 32) -> None:
    save_bundle(path, {k: quantize(np.atleast_1d(v), bit_width) for k, v in weights.items()})


def load_weights(path: str | Path) -> Weights:
    return {k: t.dequantize() for k, t in load_bundle(path).items()}


# -- sliding windows -----------------------------------------------------------


def window_starts(stream_length: int, window: int, offset: int) -> list[int]:
    if offset <= 0:
        raise ValueError("sliding offset must be positive")
    if stream_length < window:
        raise ValueError("signal stream shorter than one window")
    return list(range(0, stream_length - window + 1, offset))


def coverage(stream_length: int, window: int, offset: int) -> np.ndarray:
    """Number of windows containing each signal element."""
    cov = np.zeros(stream_length, dtype=int)
    for s in window_starts(stream_length, window, offset):
        cov[s : s + window] += 1
    return cov


def sliding_window_reads(
    signal_stream,
    topo: NetTopology,
    decoder: Callable[[np.ndarray], Read | str],
) -> list[Read]:
    """Decode every window of length L taken every T samples.

    ``decoder`` maps one signal window to a read; the returned reads carry the
    window start as ``origin_offset``.
    """
    stream = np.asarray(signal_stream, dtype=np.float64)
    reads = []
    for start in window_starts(len(stream), topo.input_length, topo.sliding_offset):
        out = decoder(stream[start : start + topo.input_length])
        symbols = out.symbols if isinstance(out, Read) else str(out)
        reads.append(Read(symbols, origin_offset=start))
    return reads
