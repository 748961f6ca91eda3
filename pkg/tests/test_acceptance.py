"""End-to-end acceptance checks, one test per criterion.

Each test records a single PASS/FAIL line (shown in pytest's terminal summary)
and then asserts, so a failing criterion also fails the suite.
"""

from __future__ import annotations

import itertools
import math
import time
import warnings

import numpy as np
import pytest
from conftest import record_criterion
from ctc_oracle import read_probabilities

from helix.ctc import beam_search, ctc_prob
from helix.genome import BASES, Read, classify_errors
from helix.nn import ShapeWarning, init_weights, load_topology
from helix.pim.adc import AdcArrayConfig, adc_codes, adc_convert
from helix.pim.crossbar import IdealAdc, crossbar_matvec
from helix.pim.ledger import ledger_rollup
from helix.pim.mapping import calibrate_host
from helix.seat import SeatConfig, ToyModel, evaluate_stream, loss0, loss1, make_samples, train_toy
from helix.synth import make_stream
from helix.variation import VariationParams, analytic_cell_error, comparator_error_estimate, mc_sweep
from helix.vote import binomial_vote_error, vote_columns

pytestmark = pytest.mark.slow


def _topos(*names):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ShapeWarning)
        return [load_topology(n) for n in names]


def test_criterion_1_ctc_exactness(fig4d):
    t0 = time.perf_counter()
    read, prob = beam_search(fig4d, 2)
    fig_ok = read.symbols == "A" and abs(prob - 0.36) <= 1e-12
    rng = np.random.default_rng(1)
    worst = 0.0
    reads = ["".join(d) for n in range(5) for d in itertools.product(BASES, repeat=n)]
    for _ in range(500):
        steps = int(rng.integers(1, 7))
        p = rng.dirichlet(np.ones(5), size=steps)
        table = read_probabilities(p)
        for d in reads:
            worst = max(worst, abs(ctc_prob(d, p) - table.get(d, 0.0)))
    elapsed = time.perf_counter() - t0
    ok = fig_ok and worst <= 1e-12 and elapsed < 10
    record_criterion(1, "CTC exactness", ok, f"beam {read.symbols!r} p={prob:.15f}, max oracle gap {worst:.1e}, {elapsed:.1f}s")
    assert ok


def test_criterion_2_crossbar_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    mismatches, total, batch = 0, 10_000, 250
    for _ in range(total // batch):
        x = rng.integers(0, 32, size=(batch, 128))
        w = rng.integers(0, 32, size=(batch, 128, 128))
        out = crossbar_matvec(x, w, 5, 5, adc=IdealAdc(9))
        mismatches += int(np.any(out != np.einsum("br,brc->bc", x, w), axis=1).sum())
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 60
    record_criterion(2, "crossbar functional equivalence", ok, f"{mismatches}/{total} mismatches, 9-bit ADC, {elapsed:.1f}s")
    assert ok


def test_criterion_3_adc():
    cfg = AdcArrayConfig(resolution_bits=2)
    demo = [adc_convert(v, cfg) for v in cfg.design_levels()]
    refs_ok = np.allclose(cfg.refs, [3.0, 2.91, 2.82, 2.73])
    demo_ok = [r.pattern for r in demo] == ["1000", "1100", "1110", "1111"] and [r.code for r in demo] == [0, 1, 2, 3]
    codes = adc_codes(np.linspace(0.0, 3.0, 10_000))
    sweep_ok = len(np.unique(codes)) == 32 and bool(np.all(np.diff(codes) >= 0))
    ok = refs_ok and demo_ok and sweep_ok
    record_criterion(3, "ADC model", ok, f"demo patterns {[r.pattern for r in demo]}, {len(np.unique(codes))} monotone codes")
    assert ok


def test_criterion_4_ledger():
    isaac, helix, sot = (ledger_rollup(variant=v) for v in ("isaac", "helix", "sot-adc"))
    checks = {
        "ISAAC W": (isaac.chip_power_w, 55.4),
        "ISAAC mm2": (isaac.chip_area_mm2, 62.5),
        "Helix W": (helix.chip_power_w, 25.7),
        "Helix mm2": (helix.chip_area_mm2, 43.83),
        "ISAAC engine mW": (isaac.engine_group_power_mw, 289.0),
        "SOT engine mW": (sot.engine_group_power_mw, 122.0),
    }
    rel = {k: got / want - 1 for k, (got, want) in checks.items()}
    bad = [k for k, r in rel.items() if abs(r) > 0.02]
    detail = ", ".join(f"{k} {checks[k][0]:.2f} ({rel[k]:+.1%})" for k in checks)
    record_criterion(4, "ledger fidelity", not bad, detail + (f"; outside 2%: {bad}" if bad else ""))
    assert not bad


def test_criterion_5_calibration():
    cal = calibrate_host(_topos("guppy", "scrappie", "chiron"))
    steps = [("SEAT", "ISAAC"), ("CTC", "ADC"), ("Helix", "CTC")]
    errs = {k: cal.ratios[k] / cal.targets[k] - 1 for k in steps}
    composed = cal.ratios[("Helix", "ISAAC")]
    ok = all(abs(e) <= 0.2 for e in errs.values()) and 4 <= composed <= 8
    detail = ", ".join(f"{a}/{b} {cal.ratios[(a, b)]:.3f} ({errs[(a, b)]:+.1%})" for a, b in steps)
    record_criterion(5, "scheme ladder calibration", ok, f"{detail}, Helix/ISAAC {composed:.2f}")
    assert ok


def test_criterion_6_voting():
    rng = np.random.default_rng(6)
    p, coverage, loci = 0.1, 33, 100_000
    truth = rng.integers(0, 4, size=loci)
    wrong = rng.random((coverage, loci)) < p
    shift = rng.integers(1, 4, size=(coverage, loci))
    calls = np.where(wrong, (truth + shift) % 4, truth)
    reads = ["".join(np.array(list(BASES))[row]) for row in calls]
    consensus, _ = vote_columns(reads, [0] * coverage)
    rate = float(np.mean(np.array(list(consensus)) != np.array(list(BASES))[truth]))
    oracle = binomial_vote_error(p, coverage)
    se = math.sqrt(oracle * (1 - oracle) / loci)
    stats_ok = abs(rate - oracle) <= 3 * se

    survived = 0
    cases = 1000
    for _ in range(cases):
        length, locus = 12, int(rng.integers(12))
        t = "".join(rng.choice(list(BASES), length))
        bad = rng.choice([b for b in BASES if b != t[locus]])
        n = int(rng.integers(3, 34))
        reads_ = [Read(t[:locus] + bad + t[locus + 1 :]) for _ in range(n)]
        cons, _ = vote_columns(reads_, [0] * n)
        label = classify_errors(reads_, t).per_position[locus]
        survived += cons[locus] == bad and label == "systematic"
    ok = stats_ok and survived == cases
    record_criterion(
        6, "voting statistics", ok,
        f"error rate {rate:.2e} vs binomial {oracle:.2e} (3 SE = {3 * se:.1e}); systematic kept {survived}/{cases}",
    )
    assert ok


def test_criterion_7_seat():
    topo = _topos("toy")[0]
    rng = np.random.default_rng(7)

    # exact equality with a perfect consensus
    samples = make_samples(make_stream(60, np.random.default_rng(1)), topo)[:3]
    model = ToyModel(topo, init_weights(topo, rng))
    truths = [s.truth for s in samples]
    eq_ok = loss1(samples, model, SeatConfig(eta=1.0), truths) == loss0(samples, model)

    # lower bound on random models
    violations = 0
    for _ in range(1000):
        m = ToyModel(topo, init_weights(topo, rng, scale=float(rng.uniform(0.2, 6))), bits=int(rng.choice([5, 8, 0])) or None)
        eta = float(rng.uniform())
        violations += loss1(samples, m, SeatConfig(eta=eta)) < eta * loss0(samples, m) - 1e-9

    # training comparison: float pretraining, then 5-bit fine-tuning with each loss
    train = make_samples(make_stream(150, np.random.default_rng(1)), topo)
    base = ToyModel(topo, init_weights(topo, np.random.default_rng(8)))
    pre = train_toy(base, train, "loss0", steps=40, lr=0.05)
    pre_acc = pre.trace[-1].read_accuracy
    held_out = make_stream(400, np.random.default_rng(1001))
    acc = {}
    for loss in ("loss0", "loss1"):
        q = ToyModel(topo, pre.model.weights, bits=5)
        acc[loss] = evaluate_stream(train_toy(q, train, loss, steps=10, lr=0.005).model, held_out)[1]
    direction_ok = acc["loss1"] >= acc["loss0"]

    ok = eq_ok and violations == 0 and pre_acc >= 0.9 and direction_ok
    record_criterion(
        7, "SEAT properties", ok,
        f"equality {eq_ok}, bound violations {violations}/1000, float training accuracy {pre_acc:.3f}, "
        f"held-out 5-bit vote accuracy loss1 {acc['loss1']:.3f} vs loss0 {acc['loss0']:.3f}",
    )
    assert ok


def test_criterion_8_variation():
    t0 = time.perf_counter()
    params = VariationParams()
    results = [mc_sweep(s, 1_000_000, params, seed=8) for s in (40, 50, 60)]
    worst = [r.worst for r in results]
    again = mc_sweep(60, 1_000_000, params, seed=8)
    repro = again.durations.tobytes() == results[2].durations.tobytes()
    elapsed = time.perf_counter() - t0
    ok = results[2].exceed_count == 0 and worst[0] >= worst[1] >= worst[2] and repro and elapsed < 300
    record_criterion(
        8, "variation Monte Carlo", ok,
        f"tau0 {params.tau0:.0e}s, Jc0 {params.jc0:.4e}A/m2, exceedances {[r.exceed_count for r in results]}, "
        f"worst {[f'{w:.2e}' for w in worst]}s, reproducible {repro}, {elapsed:.1f}s",
    )
    assert ok


def test_criterion_9_comparator():
    params = VariationParams()
    comparisons, cells = 5.56e8, 180
    analytic = 1e-11 * comparisons * cells
    model_p = analytic_cell_error(params)
    est = comparator_error_estimate(params, n=100_000, seed=9)
    arith_ok = abs(analytic - 1.0) <= 0.01 and abs(model_p * comparisons * cells - 1.0) <= 0.01
    sim_ok = abs(est.probability - model_p) <= 3 * est.std_error
    ok = arith_ok and sim_ok
    record_criterion(
        9, "comparator reliability", ok,
        f"expected errors {analytic:.4f} (model {model_p * comparisons * cells:.4f}), "
        f"importance sampled p {est.probability:.3e} +/- {est.std_error:.1e} vs {model_p:.3e}",
    )
    assert ok
