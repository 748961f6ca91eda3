"""Network-to-chip mapping, pipeline timing, and the evaluation-scheme throughput model.

DNN layers run on the crossbar engines. CTC decoding and read voting run on
the host unless the scheme offloads them: CTC to the dot-product engines and
voting to the comparator arrays. Host speed and the cost left over after each
offload are free parameters; :func:`calibrate_host` fits them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import least_squares

from helix.ctc import DEFAULT_BEAM_WIDTH, CtcCrossbar
from helix.nn import NetTopology
from helix.pim.crossbar import CrossbarConfig, slices_for
from helix.pim.ledger import ledger_rollup

SAMPLES_PER_BASE = 9
HOST_CTC_SHARE = 0.167  # host share of 16-bit Guppy latency spent in CTC decoding
HOST_VOTE_SHARE = 0.37  # ... and in read voting


@dataclass(frozen=True)
class Scheme:
    name: str
    bits: int
    ledger_variant: str
    ctc_on_pim: bool = False
    vote_on_pim: bool = False


SCHEMES: dict[str, Scheme] = {
    s.name: s
    for s in (
        Scheme("ISAAC", 32, "isaac"),
        Scheme("16-bit", 16, "isaac"),
        Scheme("SEAT", 5, "isaac"),
        Scheme("ADC", 5, "sot-adc"),
        Scheme("CTC", 5, "sot-adc", ctc_on_pim=True),
        Scheme("Helix", 5, "helix", ctc_on_pim=True, vote_on_pim=True),
    )
}
SCHEME_ORDER = tuple(SCHEMES)


def pipeline_cycles(
    rows: int,
    cols: int,
    cfg: CrossbarConfig = CrossbarConfig(),
    input_bits: int = 5,
    weight_bits: int = 5,
) -> int:
    """Engine cycles for one input vector through a rows x cols layer, including pipeline fill."""
    if rows <= 0 or cols <= 0 or input_bits <= 0 or weight_bits <= 0:
        raise ValueError("layer dimensions and bit widths must be positive")
    row_groups = math.ceil(rows / cfg.rows)
    col_groups = math.ceil(cols * slices_for(weight_bits, cfg.bits_per_cell) / cfg.cols)
    passes = math.ceil(input_bits / cfg.dac_bits) * row_groups * col_groups
    return passes + cfg.pipeline_stages - 1


def layer_arrays(rows: int, cols: int, cfg: CrossbarConfig, weight_bits: int) -> int:
    return math.ceil(rows / cfg.rows) * math.ceil(cols * slices_for(weight_bits, cfg.bits_per_cell) / cfg.cols)


@dataclass(frozen=True)
class NetworkMapping:
    topology: str
    bits: int
    arrays_per_copy: int
    replicas: int
    cycles_per_window: int
    layer_cycles: tuple[tuple[str, int], ...]

    def dnn_seconds_per_window(self, cfg: CrossbarConfig) -> float:
        return self.cycles_per_window * cfg.cycle_s / self.replicas


def map_layers(topo: NetTopology, cfg: CrossbarConfig = CrossbarConfig(), bits: int = 5) -> NetworkMapping:
    """Place one copy of every weight matrix and replicate the network over the remaining arrays."""
    layers = topo.matmul_layers()
    arrays = sum(layer_arrays(l["rows"], l["cols"], cfg, bits) for l in layers)
    if arrays > cfg.total_arrays:
        raise ValueError(f"{topo.name} needs {arrays} arrays at {bits} bits; the chip has {cfg.total_arrays}")
    per_layer = tuple((l["name"], l["uses"] * pipeline_cycles(l["rows"], l["cols"], cfg, bits, bits)) for l in layers)
    return NetworkMapping(
        topology=topo.name,
        bits=bits,
        arrays_per_copy=arrays,
        replicas=cfg.total_arrays // arrays,
        cycles_per_window=sum(c for _, c in per_layer),
        layer_cycles=per_layer,
    )


def bases_per_window(topo: NetTopology, samples_per_base: int = SAMPLES_PER_BASE) -> float:
    """New bases emitted per window step of ``sliding_offset`` samples."""
    return topo.sliding_offset / samples_per_base


def window_bases(topo: NetTopology, samples_per_base: int = SAMPLES_PER_BASE) -> float:
    return topo.input_length / samples_per_base


@dataclass(frozen=True)
class HostModel:
    """Host cost per window and the fractions left after offloading.

    ``ctc_s_per_step`` is host time per decoded time step; voting costs
    ``vote_s_per_base`` per base in the window. The residuals scale the host
    cost that remains once the phase runs in memory (transfers, control).
    """

    ctc_s_per_step: float = 1e-6
    vote_s_per_base: float = 1e-5
    ctc_residual: float = 0.3
    vote_residual: float = 0.3
    beam_width: int = DEFAULT_BEAM_WIDTH

    @classmethod
    def from_shares(
        cls,
        reference: NetTopology,
        ctc_s_per_step: float,
        ctc_residual: float,
        vote_residual: float,
        ctc_share: float = HOST_CTC_SHARE,
        vote_share: float = HOST_VOTE_SHARE,
    ) -> "HostModel":
        """Fix the vote cost so the reference network's host CTC:vote time ratio equals the shares."""
        ctc_time = ctc_s_per_step * reference.timesteps
        vote = ctc_time * (vote_share / ctc_share) / window_bases(reference)
        return cls(ctc_s_per_step, vote, ctc_residual, vote_residual)


@dataclass(frozen=True)
class Schedule:
    topology: str
    scheme: str
    mapping: NetworkMapping
    seconds: Mapping[str, float]  # per window step, by phase
    bases_per_s: float
    chip_w: float
    chip_mm2: float

    @property
    def window_s(self) -> float:
        return sum(self.seconds.values())

    @property
    def shares(self) -> dict[str, float]:
        total = self.window_s
        return {k: v / total for k, v in self.seconds.items()}

    @property
    def bases_per_joule(self) -> float:
        return self.bases_per_s / self.chip_w

    @property
    def bases_per_s_mm2(self) -> float:
        return self.bases_per_s / self.chip_mm2


def map_network(
    topo: NetTopology,
    cfg: CrossbarConfig = CrossbarConfig(),
    scheme: str | Scheme = "Helix",
    host: HostModel | None = None,
) -> Schedule:
    """Per-phase time for one window step, throughput and chip totals under one scheme."""
    sch = SCHEMES[scheme] if isinstance(scheme, str) else scheme
    host = host or HostModel()
    mapping = map_layers(topo, cfg, sch.bits)
    dnn = mapping.dnn_seconds_per_window(cfg)
    ctc = host.ctc_s_per_step * topo.timesteps
    if sch.ctc_on_pim:
        steps = topo.timesteps * CtcCrossbar().passes(host.beam_width)
        ctc = host.ctc_residual * ctc + steps * cfg.cycle_s / mapping.replicas
    vote = host.vote_s_per_base * window_bases(topo)
    if sch.vote_on_pim:
        vote *= host.vote_residual
    ledger = ledger_rollup(cfg, sch.ledger_variant)
    seconds = {"dnn": dnn, "ctc": ctc, "vote": vote}
    return Schedule(
        topology=topo.name,
        scheme=sch.name,
        mapping=mapping,
        seconds=seconds,
        bases_per_s=bases_per_window(topo) / sum(seconds.values()),
        chip_w=ledger.chip_power_w,
        chip_mm2=ledger.chip_area_mm2,
    )


def scheme_table(
    topologies: Sequence[NetTopology],
    host: HostModel,
    cfg: CrossbarConfig = CrossbarConfig(),
    schemes: Sequence[str] = SCHEME_ORDER,
) -> dict[str, dict[str, Schedule]]:
    return {t.name: {s: map_network(t, cfg, s, host) for s in schemes} for t in topologies}


def geomean(values) -> float:
    v = np.asarray(list(values), dtype=np.float64)
    return float(np.exp(np.mean(np.log(v))))


def mean_ratio(table: Mapping[str, Mapping[str, Schedule]], num: str, den: str, metric: str = "bases_per_s") -> float:
    """Geometric mean over networks of ``metric(num) / metric(den)``."""
    return geomean(getattr(row[num], metric) / getattr(row[den], metric) for row in table.values())


# Per-step throughput claims plus the end-to-end claim; the three steps alone
# cannot be met together once the host CTC:vote ratio is pinned (see README).
CALIBRATION_TARGETS = {
    ("SEAT", "ISAAC"): 1.111,
    ("CTC", "ADC"): 1.678,
    ("Helix", "CTC"): 2.22,
    ("Helix", "ISAAC"): 6.0,
}


@dataclass(frozen=True)
class Calibration:
    host: HostModel
    ratios: dict[tuple[str, str], float]
    targets: dict[tuple[str, str], float]
    cost: float


def calibrate_host(
    topologies: Sequence[NetTopology],
    reference: NetTopology | None = None,
    cfg: CrossbarConfig = CrossbarConfig(),
    targets: Mapping[tuple[str, str], float] = CALIBRATION_TARGETS,
) -> Calibration:
    """Fit host speed and both offload residuals to the target throughput ratios.

    Parameters are fitted in log space, so all three stay positive; the
    residuals are additionally capped at 1 (offloading never slows a phase).
    """
    reference = reference or topologies[0]
    for t in topologies:  # capacity errors surface here, before the optimizer runs
        map_layers(t, cfg, max(s.bits for s in SCHEMES.values()))

    def host_of(p) -> HostModel:
        return HostModel.from_shares(reference, math.exp(p[0]), math.exp(p[1]), math.exp(p[2]))

    needed = sorted({s for pair in targets for s in pair})

    def residuals(p):
        table = scheme_table(topologies, host_of(p), cfg, needed)
        return [math.log(mean_ratio(table, a, b) / v) for (a, b), v in targets.items()]

    fit = least_squares(residuals, x0=[math.log(1e-6), math.log(0.3), math.log(0.3)], bounds=([-40, -30, -30], [0, 0, 0]))
    host = host_of(fit.x)
    table = scheme_table(topologies, host, cfg, needed)
    return Calibration(
        host=host,
        ratios={k: mean_ratio(table, *k) for k in targets},
        targets=dict(targets),
        cost=float(fit.cost),
    )


def with_beam_width(host: HostModel, width: int) -> HostModel:
    return replace(host, beam_width=width)
