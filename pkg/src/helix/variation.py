"""Process-variation Monte Carlo for SOT-MRAM cells.

Write duration follows the thermal-activation law
``t = tau0 * exp((1 - I / (A * Jc0)) * Delta)`` with the write current taken from a
square-law transistor proxy ``I = k (W/L) (Vgs - Vth)^2``. Every parameter is
drawn from a lognormal whose mean and relative spread match the table values.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import integrate, optimize, stats

NOMINAL_CELL_F2 = 60
TARGET_WRITE_S = 1.56e-9
CHUNK = 1_000_000
MIN_SAMPLES = 10_000


@dataclass(frozen=True)
class Dist:
    mean: float
    rel_sigma: float

    def __post_init__(self):
        if self.mean <= 0 or self.rel_sigma < 0:
            raise ValueError("distribution mean must be positive and sigma non-negative")

    @property
    def ln_sigma(self) -> float:
        return math.sqrt(math.log1p(self.rel_sigma**2))

    @property
    def ln_mu(self) -> float:
        return math.log(self.mean) - 0.5 * self.ln_sigma**2

    def from_normal(self, z: np.ndarray) -> np.ndarray:
        return np.exp(self.ln_mu + self.ln_sigma * z)


@dataclass(frozen=True)
class VariationParams:
    w_wt: Dist = Dist(384e-9, 0.10)  # write transistor width at the nominal cell size (m)
    l_wt: Dist = Dist(192e-9, 0.10)
    v_th: Dist = Dist(0.2, 0.10)
    ra: Dist = Dist(25e-12, 0.08)  # resistance-area product (ohm m^2)
    area: Dist = Dist(64e-9 * 128e-9, 0.05)  # MTJ free-layer cross section (m^2)
    delta: Dist = Dist(22.0, 0.27)
    v_gs: float = 1.0
    k_prime: float = 1e-4  # square-law transconductance (A / V^2)
    tau0: float = 1e-9
    jc0: float = 5.852497560351016e9  # A / m^2; output of calibrate_jc0 on the defaults
    nominal_size_f2: int = NOMINAL_CELL_F2
    tmr: float = 1.4436979762712887  # HRS = LRS * (1 + tmr); gives a 1e-11 pair misread rate

    NAMES = ("w_wt", "l_wt", "v_th", "ra", "area", "delta")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "VariationParams":
        raw = json.loads(text)
        kw = {k: Dist(**v) if k in cls.NAMES else v for k, v in raw.items()}
        return cls(**kw)

    def without_variation(self) -> "VariationParams":
        return replace(self, **{n: Dist(getattr(self, n).mean, 0.0) for n in self.NAMES})


@dataclass(frozen=True)
class CellSample:
    w_wt: float
    l_wt: float
    v_th: float
    area: float
    delta: float
    v_gs: float = 1.0
    k_prime: float = 1e-4
    tau0: float = 1e-9
    jc0: float = 5.852497560351016e9

    @property
    def current(self) -> float:
        return write_current(self.w_wt, self.l_wt, self.v_th, self.v_gs, self.k_prime)

    @classmethod
    def nominal(cls, params: VariationParams, size_f2: int | None = None) -> "CellSample":
        size = params.nominal_size_f2 if size_f2 is None else size_f2
        return cls(
            w_wt=params.w_wt.mean * size / params.nominal_size_f2,
            l_wt=params.l_wt.mean,
            v_th=params.v_th.mean,
            area=params.area.mean,
            delta=params.delta.mean,
            v_gs=params.v_gs,
            k_prime=params.k_prime,
            tau0=params.tau0,
            jc0=params.jc0,
        )


def write_current(w, l, v_th, v_gs: float = 1.0, k_prime: float = 1e-4):
    over = np.maximum(v_gs - np.asarray(v_th, dtype=np.float64), 0.0)
    return k_prime * (np.asarray(w) / np.asarray(l)) * over**2


def switching_time(current, area, delta, tau0: float, jc0: float):
    """Vectorised duration law; rejects non-positive current or critical current."""
    current = np.asarray(current, dtype=np.float64)
    ic = np.asarray(area, dtype=np.float64) * jc0
    if np.any(current <= 0):
        raise ValueError("write current must be positive")
    if np.any(ic <= 0):
        raise ValueError("A * Jc0 must be positive")
    return tau0 * np.exp((1.0 - current / ic) * np.asarray(delta, dtype=np.float64))


def write_duration(cell: CellSample) -> float:
    return float(switching_time(cell.current, cell.area, cell.delta, cell.tau0, cell.jc0))


def _draw(params: VariationParams, size_f2: int, rng: np.random.Generator, n: int) -> dict[str, np.ndarray]:
    z = rng.standard_normal((5, n))
    return {
        "w": params.w_wt.from_normal(z[0]) * size_f2 / params.nominal_size_f2,
        "l": params.l_wt.from_normal(z[1]),
        "v_th": params.v_th.from_normal(z[2]),
        "area": params.area.from_normal(z[3]),
        "delta": params.delta.from_normal(z[4]),
    }


def _chunks(n: int, seed: int):
    """Fixed-size substreams so results depend only on (n, seed), never on scheduling."""
    count = -(-n // CHUNK)
    for i, ss in enumerate(np.random.SeedSequence(seed).spawn(count)):
        yield np.random.default_rng(ss), min(CHUNK, n - i * CHUNK)


def sample_durations(params: VariationParams, size_f2: int, n: int, seed: int = 0) -> np.ndarray:
    out = []
    for rng, m in _chunks(n, seed):
        d = _draw(params, size_f2, rng, m)
        i = write_current(d["w"], d["l"], d["v_th"], params.v_gs, params.k_prime)
        out.append(switching_time(i, d["area"], d["delta"], params.tau0, params.jc0))
    return np.concatenate(out)


@dataclass(frozen=True)
class SweepResult:
    size_f2: int
    n: int
    durations: np.ndarray = field(repr=False)
    limit_s: float = TARGET_WRITE_S

    @property
    def worst(self) -> float:
        return float(self.durations.max())

    @property
    def exceed_count(self) -> int:
        return int(np.count_nonzero(self.durations > self.limit_s))

    def quantile(self, q: float) -> float:
        return float(np.quantile(self.durations, q))

    def summary(self) -> dict:
        return {
            "size_f2": self.size_f2,
            "n": self.n,
            "mean_s": float(self.durations.mean()),
            "p999999_s": self.quantile(0.999999),
            "worst_s": self.worst,
            "exceed": self.exceed_count,
        }


def mc_sweep(size_f2: int, n: int = 1_000_000, params: VariationParams = VariationParams(), seed: int = 0) -> SweepResult:
    """Monte Carlo write durations at one cell size.

    The same seed gives the same underlying draws at every size, so sweeping
    sizes compares cells that differ only in write-transistor width.
    """
    if n < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples, got {n}")
    if size_f2 <= 0:
        raise ValueError("cell size must be positive")
    return SweepResult(size_f2, n, sample_durations(params, size_f2, n, seed))


def size_sweep(sizes, n: int = 1_000_000, params: VariationParams = VariationParams(), seed: int = 0) -> list[SweepResult]:
    return [mc_sweep(s, n, params, seed) for s in sizes]


# -- tail extrapolation and calibration -------------------------------------------


def _overdrive_fit(params: VariationParams, size_f2: int, n: int, seed: int) -> tuple[float, float]:
    """Normal fit to ln(I / A), which carries every non-Delta parameter."""
    rng = np.random.default_rng(seed)
    d = _draw(params, size_f2, rng, n)
    x = np.log(write_current(d["w"], d["l"], d["v_th"], params.v_gs, params.k_prime) / d["area"])
    return float(x.mean()), float(x.std())


def exceed_probability(
    params: VariationParams,
    size_f2: int = NOMINAL_CELL_F2,
    limit_s: float = TARGET_WRITE_S,
    fit: tuple[float, float] | None = None,
    fit_samples: int = 200_000,
    seed: int = 12345,
) -> float:
    """P(t > limit) from a lognormal fit of I/A combined with the exact Delta law.

    The cell is late when ``(1 - x) Delta > c`` with ``x = I / (A Jc0)`` and
    ``c = ln(limit / tau0)``, i.e. ``ln x < ln(1 - c / Delta)``.
    """
    m, s = fit or _overdrive_fit(params, size_f2, fit_samples, seed)
    c = math.log(limit_s / params.tau0)
    if c <= 0:
        return 1.0
    mu = m - math.log(params.jc0)
    dd = params.delta
    if dd.rel_sigma == 0:
        if dd.mean <= c:
            return 0.0
        return float(stats.norm.cdf((math.log1p(-c / dd.mean) - mu) / s)) if s > 0 else float(math.log1p(-c / dd.mean) > mu)

    def integrand(u):  # u = ln Delta
        delta = math.exp(u)
        return stats.norm.pdf(u, dd.ln_mu, dd.ln_sigma) * stats.norm.cdf((math.log1p(-c / delta) - mu) / s)

    lo = math.log(c) + 1e-12
    hi = dd.ln_mu + 12 * dd.ln_sigma
    if hi <= lo:
        return 0.0
    val, _ = integrate.quad(integrand, lo, hi, limit=200, epsabs=0.0, epsrel=1e-8, points=[dd.ln_mu])
    return float(val)


def calibrate_jc0(
    params: VariationParams = VariationParams(),
    tail_probability: float = 1e-10,
    size_f2: int = NOMINAL_CELL_F2,
    limit_s: float = TARGET_WRITE_S,
) -> VariationParams:
    """Solve Jc0 so the extrapolated fraction of cells slower than ``limit_s`` equals ``tail_probability``."""
    fit = _overdrive_fit(params, size_f2, 200_000, 12345)

    def gap(log_jc0: float) -> float:
        p = exceed_probability(replace(params, jc0=math.exp(log_jc0)), size_f2, limit_s, fit)
        return math.log(max(p, 1e-300)) - math.log(tail_probability)

    log_ic = fit[0]  # ln(I/A) at the median cell
    root = optimize.brentq(gap, log_ic - 10.0, log_ic + 5.0, xtol=1e-12)
    return replace(params, jc0=math.exp(root))


# -- comparator read errors -------------------------------------------------------


@dataclass(frozen=True)
class ErrorEstimate:
    probability: float
    std_error: float
    analytic: float
    n: int

    def expected_errors(self, comparisons: float, cells_per_comparison: int = 180) -> float:
        return self.probability * comparisons * cells_per_comparison


def _pair_sigma(params: VariationParams) -> float:
    """Std of ln R_LRS - ln R_HRS for two independently varied cells."""
    return math.sqrt(2 * (params.ra.ln_sigma**2 + params.area.ln_sigma**2))


def analytic_cell_error(params: VariationParams = VariationParams()) -> float:
    """A complementary pair misreads when its LRS cell ends up more resistive than its HRS cell."""
    s = _pair_sigma(params)
    if s == 0:
        return 0.0
    return float(stats.norm.sf(math.log1p(params.tmr) / s))


def tmr_for_error(p: float, params: VariationParams = VariationParams()) -> float:
    return math.expm1(stats.norm.isf(p) * _pair_sigma(params))


def comparator_error_estimate(
    params: VariationParams = VariationParams(),
    n: int = 100_000,
    seed: int = 0,
) -> ErrorEstimate:
    """Per-cell read error probability by importance sampling.

    Draws the four standard normals behind (RA, A) of both cells from a
    proposal shifted to the most likely failure point, and reweights by the
    likelihood ratio.
    """
    if n < 1000:
        raise ValueError("importance sampling needs at least 1000 draws")
    s_ra, s_a = params.ra.ln_sigma, params.area.ln_sigma
    margin = math.log1p(params.tmr)
    analytic = analytic_cell_error(params)
    if s_ra == 0 and s_a == 0:
        return ErrorEstimate(0.0 if margin > 0 else 1.0, 0.0, analytic, n)
    # ln R = ln RA - ln A; failure when (ln R_L - ln R_H) + margin > 0
    g = np.array([s_ra, -s_a, -s_ra, s_a])
    beta = margin / np.linalg.norm(g)
    shift = beta * g / np.linalg.norm(g)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, 4)) + shift
    fail = z @ g > margin
    log_w = -z @ shift + 0.5 * shift @ shift
    w = np.where(fail, np.exp(log_w), 0.0)
    p = float(w.mean())
    se = float(w.std(ddof=1) / math.sqrt(n))
    return ErrorEstimate(p, se, analytic, n)


def histogram_csv(result: SweepResult, path: str | Path, bins: int = 100) -> None:
    counts, edges = np.histogram(result.durations, bins=bins)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["size_f2", "bin_lo_s", "bin_hi_s", "count"])
        for c, lo, hi in zip(counts, edges[:-1], edges[1:]):
            w.writerow([result.size_f2, f"{lo:.6e}", f"{hi:.6e}", int(c)])
