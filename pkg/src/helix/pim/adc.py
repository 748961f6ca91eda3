"""SOT-MRAM ADC array: a reference-voltage ladder of cells producing a thermometer code.

Cell k sees reference ``refs[k]`` on its read bit-line; a larger reference
lowers the voltage needed to switch it, so cells switch in ladder order as the
input rises. The encoder turns the switched count into a binary code.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AdcArrayConfig:
    resolution_bits: int = 5
    size: tuple[int, int] = (32, 32)
    freq_hz: float = 640e6
    write_pulse_s: float = 1.56e-9
    write_voltage_step: float = 0.05  # switching-voltage gap between adjacent ladder cells at the pulse width
    v_max: float = 3.0
    ref_max: float = 3.0
    ref_step: float = 0.09

    def __post_init__(self):
        if self.resolution_bits <= 0:
            raise ValueError("resolution_bits must be positive")
        if self.ref_step <= 0 or self.v_max <= 0:
            raise ValueError("ref_step and v_max must be positive")

    @property
    def levels(self) -> int:
        return 1 << self.resolution_bits

    @property
    def refs(self) -> np.ndarray:
        """Descending reference ladder, one entry per cell."""
        return self.ref_max - self.ref_step * np.arange(self.levels)

    @property
    def lsb(self) -> float:
        return self.v_max / self.levels

    def threshold(self, ref) -> np.ndarray:
        """Input voltage that switches a cell biased at ``ref`` (affine, decreasing in ref)."""
        rank = (self.ref_max - np.asarray(ref, dtype=np.float64)) / self.ref_step
        return (rank + 0.5) * self.lsb

    @property
    def thresholds(self) -> np.ndarray:
        return self.threshold(self.refs)

    def design_levels(self) -> np.ndarray:
        """Input voltages nominally encoding codes 0 .. 2**bits - 1."""
        return (np.arange(self.levels) + 1) * self.lsb

    @property
    def conversion_s(self) -> float:
        return 1.0 / self.freq_hz


@dataclass(frozen=True)
class AdcResult:
    code: int
    pattern: str
    under_range: bool
    over_range: bool


def _switched(v_in, cfg: AdcArrayConfig) -> np.ndarray:
    v = np.asarray(v_in, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("input voltage must be finite")
    return v[..., None] >= cfg.thresholds


def adc_convert(v_in: float, cfg: AdcArrayConfig = AdcArrayConfig()) -> AdcResult:
    on = _switched(v_in, cfg)
    count = int(on.sum())
    code = min(max(count - 1, 0), cfg.levels - 1)
    return AdcResult(
        code=code,
        pattern="".join("1" if b else "0" for b in on),
        under_range=count == 0,
        over_range=v_in > cfg.v_max,
    )


def adc_codes(v_in, cfg: AdcArrayConfig = AdcArrayConfig()) -> np.ndarray:
    """Vectorised codes for an array of input voltages."""
    count = _switched(v_in, cfg).sum(axis=-1)
    return np.clip(count - 1, 0, cfg.levels - 1)


def is_thermometer(pattern: str) -> bool:
    return "01" not in pattern


class SotAdc:
    """Digitizes column sums by scaling them onto the ladder's input range.

    ``full_scale`` is the largest column sum mapped to ``v_max``. With
    ``full_scale == levels - 1`` every integer sum maps to its own design level
    and conversion is exact.
    """

    def __init__(self, cfg: AdcArrayConfig = AdcArrayConfig(), full_scale: int | None = None):
        self.cfg = cfg
        self.full_scale = cfg.levels - 1 if full_scale is None else full_scale
        self.bits = cfg.resolution_bits

    def voltage(self, sums) -> np.ndarray:
        unit = self.cfg.lsb * (self.cfg.levels - 1) / self.full_scale
        return (np.asarray(sums, dtype=np.float64) + self.full_scale / (self.cfg.levels - 1)) * unit

    def digitize(self, sums: np.ndarray) -> np.ndarray:
        codes = adc_codes(self.voltage(sums), self.cfg)
        scale = self.full_scale / (self.cfg.levels - 1)
        return np.rint(codes * scale).astype(np.int64)
