"""Behavioral dot-product engine: bit-serial inputs x bit-sliced weights x ADC x shift-add."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from helix import kernels
from helix.quant import FixedTensor, split_levels


@dataclass(frozen=True)
class CrossbarConfig:
    rows: int = 128
    cols: int = 128
    bits_per_cell: int = 2
    dac_bits: int = 1
    arrays_per_engine: int = 8
    engines_per_tile: int = 12
    tiles: int = 168
    engine_freq_hz: float = 10e6
    pipeline_stages: int = 5

    def __post_init__(self):
        for name in ("rows", "cols", "bits_per_cell", "dac_bits", "arrays_per_engine", "engines_per_tile", "pipeline_stages"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.tiles < 0 or self.engine_freq_hz <= 0:
            raise ValueError("tiles must be >= 0 and engine_freq_hz > 0")

    @property
    def total_arrays(self) -> int:
        return self.tiles * self.engines_per_tile * self.arrays_per_engine

    @property
    def cycle_s(self) -> float:
        return 1.0 / self.engine_freq_hz


def required_adc_bits(rows: int, dac_bits: int = 1, bits_per_cell: int = 2) -> int:
    """Smallest ADC resolution that never clips a column sum."""
    return math.ceil(math.log2(rows)) + dac_bits + bits_per_cell - 1


def analog_mac(cells: np.ndarray | None, inputs: np.ndarray) -> np.ndarray:
    """Column currents of one programmed array for one DAC input plane (ideal, integer)."""
    if cells is None:
        raise ValueError("array has not been programmed")
    cells = np.asarray(cells, dtype=np.int64)
    inputs = np.asarray(inputs, dtype=np.int64)
    if inputs.shape != (cells.shape[0],):
        raise ValueError(f"input plane of shape {inputs.shape} does not match {cells.shape[0]} rows")
    return inputs @ cells


class IdealAdc:
    """Unit-LSB converter that clips at full scale."""

    def __init__(self, bits: int):
        self.bits = bits

    def digitize(self, sums: np.ndarray) -> np.ndarray:
        return np.minimum(sums, (1 << self.bits) - 1)


def _check_levels(levels: np.ndarray, bits: int, what: str) -> None:
    if levels.size and (levels.min() < 0 or levels.max() >= (1 << bits)):
        raise ValueError(f"{what} levels do not fit in {bits} bits")


def crossbar_matvec(
    x_levels,
    w_levels,
    input_bits: int,
    weight_bits: int,
    cfg: CrossbarConfig = CrossbarConfig(),
    adc=None,
    return_overflow: bool = False,
):
    """Unsigned integer matvec through the engine model.

    x_levels: (R,) or (B, R); w_levels: (R, C) or (B, R, C), at most one array
    (cfg.rows x cfg.cols) per instance. Every input bit plane meets every
    weight slice on the array, each column sum goes through ``adc``, and the
    codes are shift-added back together.
    """
    x = np.asarray(x_levels, dtype=np.int64)
    w = np.asarray(w_levels, dtype=np.int64)
    single = x.ndim == 1
    if single:
        x, w = x[None], w[None]
    if w.ndim != 3 or x.shape[0] != w.shape[0] or x.shape[1] != w.shape[1]:
        raise ValueError("input and weight shapes do not line up")
    if w.shape[1] > cfg.rows or w.shape[2] > cfg.cols:
        raise ValueError("weights exceed one array; use tiled_matvec")
    _check_levels(x, input_bits, "input")
    _check_levels(w, weight_bits, "weight")
    adc = adc or IdealAdc(required_adc_bits(cfg.rows, cfg.dac_bits, cfg.bits_per_cell))
    x_planes = np.stack(split_levels(x, input_bits, cfg.dac_bits), axis=1).astype(np.uint8)  # (B, P, R)
    w_planes = np.stack(split_levels(w, weight_bits, cfg.bits_per_cell), axis=1).astype(np.uint8)  # (B, S, R, C)
    sums = kernels.bitplane_mvm(x_planes, w_planes)  # (B, P, S, C)
    codes = adc.digitize(sums)
    p_shift = (np.arange(x_planes.shape[1]) * cfg.dac_bits)[:, None, None]
    s_shift = (np.arange(w_planes.shape[1]) * cfg.bits_per_cell)[None, :, None]
    out = (codes << (p_shift + s_shift)).sum(axis=(1, 2))
    out = out[0] if single else out
    if return_overflow:
        return out, bool(np.any(codes != sums))
    return out


def tiled_matvec(x_levels, w_levels, input_bits: int, weight_bits: int, cfg: CrossbarConfig = CrossbarConfig(), adc=None):
    """Matvec of any size: row/column tiles on separate arrays, partial sums added digitally."""
    x = np.asarray(x_levels, dtype=np.int64)
    w = np.asarray(w_levels, dtype=np.int64)
    rows, cols = w.shape
    out = np.zeros(cols, dtype=np.int64)
    for r0 in range(0, rows, cfg.rows):
        for c0 in range(0, cols, cfg.cols):
            out[c0 : c0 + cfg.cols] += crossbar_matvec(
                x[r0 : r0 + cfg.rows], w[r0 : r0 + cfg.rows, c0 : c0 + cfg.cols], input_bits, weight_bits, cfg, adc
            )
    return out


def signed_matvec(x: FixedTensor, w: FixedTensor, cfg: CrossbarConfig = CrossbarConfig(), adc=None) -> np.ndarray:
    """Signed product of offset-binary tensors.

    The array only sees non-negative levels; the shift-add unit removes the
    zero-point terms afterwards:
    sum (qx-zx)(qw-zw) = sum qx qw - zx sum qw - zw sum qx + R zx zw.
    """
    raw = tiled_matvec(x.data, w.data, x.spec.bit_width, w.spec.bit_width, cfg, adc)
    zx, zw = x.spec.zero_point, w.spec.zero_point
    rows = w.shape[0]
    return raw - zx * w.data.sum(axis=0) - zw * x.data.sum() + rows * zx * zw


def slices_for(weight_bits: int, bits_per_cell: int) -> int:
    return -(-weight_bits // bits_per_cell)
