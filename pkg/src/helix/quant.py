"""Uniform fixed-point quantization and the bit decompositions a crossbar consumes.

Values are stored offset-binary: a signed real ``x`` becomes the unsigned integer
``q = round(x / scale) + zero_point`` with ``zero_point = 2**(bit_width - 1)``, so
every stored level is a non-negative cell conductance.
"""

from __future__ import annotations

import io
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterable, Mapping

import numpy as np

MIN_BITS = 2
MAX_BITS = 32

_MAGIC = b"HXQT"
_VERSION = 1


@dataclass(frozen=True)
class QuantSpec:
    bit_width: int
    scale: float
    zero_point: int

    def __post_init__(self):
        if not MIN_BITS <= self.bit_width <= MAX_BITS:
            raise ValueError(f"bit_width must be in [{MIN_BITS}, {MAX_BITS}], got {self.bit_width}")
        if not self.scale > 0 or not math.isfinite(self.scale):
            raise ValueError("scale must be positive and finite")
        if not 0 <= self.zero_point <= self.qmax:
            raise ValueError("zero_point not representable in bit_width")

    @property
    def qmax(self) -> int:
        return (1 << self.bit_width) - 1


@dataclass(frozen=True, eq=False)
class FixedTensor:
    data: np.ndarray  # int64, offset-binary levels in [0, 2**bit_width - 1]
    spec: QuantSpec

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.int64)
        if data.size and (data.min() < 0 or data.max() > self.spec.qmax):
            raise ValueError("stored levels fall outside the bit_width range")
        object.__setattr__(self, "data", data)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def signed(self) -> np.ndarray:
        """Levels with the zero point removed."""
        return self.data - self.spec.zero_point

    def dequantize(self) -> np.ndarray:
        return self.signed.astype(np.float64) * self.spec.scale

    def __eq__(self, other) -> bool:
        if not isinstance(other, FixedTensor):
            return NotImplemented
        return self.spec == other.spec and np.array_equal(self.data, other.data)


def round_half_away(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def symmetric_spec(max_abs: float, bit_width: int) -> QuantSpec:
    """Per-tensor symmetric spec spanning [-max_abs, max_abs] (min/max calibration)."""
    if not MIN_BITS <= bit_width <= MAX_BITS:
        raise ValueError(f"bit_width must be in [{MIN_BITS}, {MAX_BITS}], got {bit_width}")
    max_abs = float(max_abs)
    scale = 2.0 * max_abs / ((1 << bit_width) - 1) if max_abs > 0 else 1.0
    return QuantSpec(bit_width=bit_width, scale=scale, zero_point=1 << (bit_width - 1))


def quantize_with(x, spec: QuantSpec) -> FixedTensor:
    x = np.asarray(x, dtype=np.float64)
    q = round_half_away(x / spec.scale) + spec.zero_point
    q = np.clip(q, 0, spec.qmax).astype(np.int64)
    return FixedTensor(q, spec)


def quantize(x, bit_width: int) -> FixedTensor:
    """Symmetric per-tensor quantization with round-half-away-from-zero."""
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        raise ValueError("cannot quantize an empty tensor")
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot quantize non-finite values")
    return quantize_with(x, symmetric_spec(np.max(np.abs(x)), bit_width))


def dequantize(t: FixedTensor) -> np.ndarray:
    return t.dequantize()


def fake_quant(x, bit_width: int) -> np.ndarray:
    """Quantize then dequantize; returns floats on the fixed-point grid."""
    return quantize(x, bit_width).dequantize()


def _check_slice_width(bits: int) -> None:
    if bits <= 0:
        raise ValueError("bits per slice must be positive")


def split_levels(levels: np.ndarray, bit_width: int, bits_per_slice: int) -> list[np.ndarray]:
    """Split unsigned integers into ``ceil(bit_width / bits_per_slice)`` planes, LSB first."""
    _check_slice_width(bits_per_slice)
    levels = np.asarray(levels, dtype=np.int64)
    mask = (1 << bits_per_slice) - 1
    n = -(-bit_width // bits_per_slice)
    return [((levels >> (k * bits_per_slice)) & mask) for k in range(n)]


def recompose(planes: Iterable[np.ndarray], bits_per_slice: int) -> np.ndarray:
    """Shift-add planes (LSB first) back into integers."""
    _check_slice_width(bits_per_slice)
    total = None
    for k, plane in enumerate(planes):
        term = np.asarray(plane, dtype=np.int64) << (k * bits_per_slice)
        total = term if total is None else total + term
    if total is None:
        raise ValueError("no planes to recompose")
    return total


def slice_weights(w: FixedTensor, bits_per_cell: int) -> list[np.ndarray]:
    """Cell planes holding ``bits_per_cell`` bits of every stored weight level."""
    return split_levels(w.data, w.spec.bit_width, bits_per_cell)


def bitserial_inputs(x: FixedTensor) -> list[np.ndarray]:
    """One 0/1 plane per input bit, LSB first."""
    return split_levels(x.data, x.spec.bit_width, 1)


# -- binary container -------------------------------------------------------
#
# record := magic "HXQT" | u8 version | u8 bit_width | u8 ndim | u8 elem_bytes
#           | u32 dims[ndim] | f64 scale | i64 zero_point | payload (LE unsigned)


def _elem_bytes(bit_width: int) -> int:
    for nbytes in (1, 2, 4, 8):
        if bit_width <= 8 * nbytes:
            return nbytes
    raise ValueError("bit_width too large")


def write_tensor(fh: BinaryIO, t: FixedTensor) -> None:
    nbytes = _elem_bytes(t.spec.bit_width)
    fh.write(_MAGIC)
    fh.write(struct.pack("<BBBB", _VERSION, t.spec.bit_width, t.data.ndim, nbytes))
    fh.write(struct.pack(f"<{t.data.ndim}I", *t.data.shape))
    fh.write(struct.pack("<dq", t.spec.scale, t.spec.zero_point))
    fh.write(t.data.astype(f"<u{nbytes}").tobytes())


def read_tensor(fh: BinaryIO) -> FixedTensor:
    magic = fh.read(4)
    if magic != _MAGIC:
        raise ValueError("not a tensor record (bad magic)")
    version, bit_width, ndim, nbytes = struct.unpack("<BBBB", fh.read(4))
    if version != _VERSION:
        raise ValueError(f"unsupported tensor container version {version}")
    shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
    scale, zero_point = struct.unpack("<dq", fh.read(16))
    count = int(np.prod(shape, dtype=np.int64))
    raw = fh.read(count * nbytes)
    if len(raw) != count * nbytes:
        raise ValueError("truncated tensor payload")
    data = np.frombuffer(raw, dtype=f"<u{nbytes}").astype(np.int64).reshape(shape)
    return FixedTensor(data, QuantSpec(bit_width, scale, zero_point))


def save_tensor(path: str | Path, t: FixedTensor) -> None:
    with open(path, "wb") as fh:
        write_tensor(fh, t)


def load_tensor(path: str | Path) -> FixedTensor:
    with open(path, "rb") as fh:
        return read_tensor(fh)


def save_bundle(path: str | Path, tensors: Mapping[str, FixedTensor]) -> None:
    """Several named tensors: u32 count, then (u16 name length, utf-8 name, record)."""
    buf = io.BytesIO()
    buf.write(struct.pack("<I", len(tensors)))
    for name, t in tensors.items():
        raw = name.encode()
        buf.write(struct.pack("<H", len(raw)))
        buf.write(raw)
        write_tensor(buf, t)
    Path(path).write_bytes(buf.getvalue())


def load_bundle(path: str | Path) -> dict[str, FixedTensor]:
    with open(path, "rb") as fh:
        (count,) = struct.unpack("<I", fh.read(4))
        out = {}
        for _ in range(count):
            (n,) = struct.unpack("<H", fh.read(2))
            name = fh.read(n).decode()
            out[name] = read_tensor(fh)
    return out
