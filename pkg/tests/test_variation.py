from __future__ import annotations

import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helix.variation import (
    _chunks,
    _draw,
    CellSample,
    Dist,
    VariationParams,
    analytic_cell_error,
    calibrate_jc0,
    comparator_error_estimate,
    exceed_probability,
    histogram_csv,
    mc_sweep,
    sample_durations,
    switching_time,
    tmr_for_error,
    write_current,
    write_duration,
)

TAU0, JC0, AREA = 1e-9, 5e9, 8e-15


def test_critical_current_gives_tau0():
    assert switching_time(AREA * JC0, AREA, 22.0, TAU0, JC0) == pytest.approx(TAU0, rel=1e-15)


def test_overdrive_case():
    t = switching_time(1.1 * AREA * JC0, AREA, 22.0, TAU0, JC0)
    assert t == pytest.approx(TAU0 * math.exp(-2.2), rel=1e-12)


@given(st.floats(0.05, 3.0), st.floats(1.01, 2.0), st.floats(5, 60), st.floats(1.01, 2.0))
def test_duration_monotone(x, k, delta, j):
    ic = AREA * JC0
    t = lambda i, d: float(switching_time(i * ic, AREA, d, TAU0, JC0))  # noqa: E731
    assert t(x * k, delta) < t(x, delta)  # more current is always faster
    if x < 1:
        assert t(x, delta * j) > t(x, delta)  # a higher barrier slows a sub-critical write
    elif x > 1:
        assert t(x, delta * j) < t(x, delta)


def test_switching_time_rejects_bad_inputs():
    with pytest.raises(ValueError):
        switching_time(0.0, AREA, 22, TAU0, JC0)
    with pytest.raises(ValueError):
        switching_time(1e-4, AREA, 22, TAU0, 0.0)


def test_write_current_square_law():
    assert write_current(2.0, 1.0, 0.2, 1.0, 1e-4) == pytest.approx(2e-4 * 0.64)
    assert write_current(1.0, 1.0, 1.2) == 0.0


def test_dist_preserves_mean(rng):
    d = Dist(3.0, 0.3)
    assert d.from_normal(rng.standard_normal(400_000)).mean() == pytest.approx(3.0, rel=5e-3)
    with pytest.raises(ValueError):
        Dist(0.0, 0.1)


def test_nominal_cell_meets_limit():
    p = VariationParams()
    assert write_duration(CellSample.nominal(p)) <= 1.56e-9


def test_zero_sigma_is_degenerate():
    p = VariationParams().without_variation()
    r = mc_sweep(50, 10_000, p, seed=3)
    want = write_duration(CellSample.nominal(p, 50))
    np.testing.assert_allclose(r.durations, want, rtol=1e-12)


def test_reproducible():
    a = mc_sweep(40, 20_000, seed=11).durations
    b = mc_sweep(40, 20_000, seed=11).durations
    assert a.tobytes() == b.tobytes()
    assert mc_sweep(40, 20_000, seed=12).durations.tobytes() != a.tobytes()


def test_too_few_samples():
    with pytest.raises(ValueError):
        mc_sweep(60, 9_999)
    with pytest.raises(ValueError):
        mc_sweep(0, 10_000)


def test_larger_cells_are_faster():
    q = [mc_sweep(s, 100_000, seed=5).quantile(0.999) for s in (40, 50, 60)]
    assert q[0] > q[1] > q[2]


def test_log_duration_affine_in_delta():
    base = VariationParams().without_variation()
    p = VariationParams(**{**{n: getattr(base, n) for n in VariationParams.NAMES}, "delta": Dist(22.0, 0.27)})
    rng, n = next(_chunks(20_000, 4))
    d = _draw(p, 60, rng, n)
    t = sample_durations(p, 60, 20_000, seed=4)
    assert np.corrcoef(np.log(t), d["delta"])[0, 1] ** 2 >= 0.99


def test_jc0_calibration_reproduces_default():
    p = VariationParams()
    cal = calibrate_jc0(p)
    assert cal.jc0 == pytest.approx(p.jc0, rel=1e-6)
    assert exceed_probability(cal) == pytest.approx(1e-10, rel=1e-4)


def test_tail_probability_falls_with_size():
    p = VariationParams()
    probs = [exceed_probability(p, s) for s in (40, 50, 60)]
    assert probs[0] > probs[1] > probs[2]


def test_params_json_round_trip():
    p = VariationParams(v_gs=0.9)
    assert VariationParams.from_json(p.to_json()) == p


def test_comparator_error():
    p = VariationParams()
    assert analytic_cell_error(p) == pytest.approx(1e-11, rel=1e-9)
    assert tmr_for_error(1e-11, p) == pytest.approx(p.tmr, rel=1e-12)
    est = comparator_error_estimate(p, n=20_000, seed=2)
    assert abs(est.probability - est.analytic) <= 3 * est.std_error
    assert est.expected_errors(5.56e8) == pytest.approx(1.0, rel=0.05)
    with pytest.raises(ValueError):
        comparator_error_estimate(p, n=10)


def test_comparator_without_variation():
    est = comparator_error_estimate(VariationParams().without_variation(), n=1000)
    assert est.probability == 0.0 and est.analytic == 0.0


def test_histogram(tmp_path):
    r = mc_sweep(50, 10_000, seed=1)
    histogram_csv(r, tmp_path / "h.csv", bins=20)
    with open(tmp_path / "h.csv") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 21
    assert sum(int(r[-1]) for r in rows[1:]) == 10_000
