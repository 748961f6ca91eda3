from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from ctc_oracle import read_probabilities
from hypothesis import given
from hypothesis import strategies as st

from helix.ctc import (
    CtcCrossbar,
    alignment_prob,
    beam_search,
    collapse,
    crossbar_beam_step,
    ctc_log_prob,
    ctc_prob,
    enumerate_alignments_oracle,
    exhaustive_decode,
    load_prob_csv,
    save_prob_csv,
    software_beam_step,
)
from helix.genome import BASES


def test_all_blank_alignment():
    p = np.full((2, 5), 0.2)
    assert ctc_prob("", p) == pytest.approx(0.04, abs=1e-15)


def test_fig4d_probability(fig4d):
    assert ctc_prob("A", fig4d) == pytest.approx(0.36, abs=1e-12)
    parts = [alignment_prob(a, fig4d) for a in ("AA", "A-", "-A")]
    assert parts == pytest.approx([0.09, 0.15, 0.12])


def test_fig4d_beam(fig4d):
    read, prob = beam_search(fig4d, 2)
    assert read.symbols == "A"
    assert prob == pytest.approx(0.36, abs=1e-12)


def test_single_certain_step():
    read, prob = beam_search([[0, 1, 0, 0, 0]], 3)
    assert (read.symbols, prob) == ("C", 1.0)


@pytest.mark.parametrize(
    "d, steps, want",
    [("A", 2, {"A-", "-A", "AA"}), ("", 1, {"-"}), ("AA", 2, set()), ("AA", 3, {"A-A"})],
)
def test_alignment_sets(d, steps, want):
    assert enumerate_alignments_oracle(d, steps) == want


def test_collapse():
    assert collapse("AA-AC--C") == "AACC"
    assert collapse("---") == ""


def test_matches_alignment_oracle(rng):
    for _ in range(40):
        p = rng.dirichlet(np.ones(5), size=5)
        table = read_probabilities(p)
        for n in range(4):
            for d in itertools.islice(itertools.product(BASES, repeat=n), 6):
                d = "".join(d)
                assert ctc_prob(d, p) == pytest.approx(table.get(d, 0.0), abs=1e-12)


def test_oracle_sum_over_alignment_set(rng):
    p = rng.dirichlet(np.ones(5), size=4)
    for d in ("", "A", "CA", "GTT"):
        want = sum(alignment_prob(a, p) for a in enumerate_alignments_oracle(d, 4))
        assert ctc_prob(d, p) == pytest.approx(want, abs=1e-14)


@given(st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_probabilities_sum_to_one(steps, seed):
    p = np.random.default_rng(seed).dirichlet(np.ones(5), size=steps)
    total = sum(
        ctc_prob("".join(d), p) for n in range(steps + 1) for d in itertools.product(BASES, repeat=n)
    )
    assert total == pytest.approx(1.0, abs=1e-12)


def test_too_long_read_impossible(fig4d):
    assert ctc_log_prob("ACG", fig4d) == -math.inf
    assert ctc_prob("ACG", fig4d) == 0.0
    assert ctc_prob("AA", fig4d) == 0.0  # repeats need a separating blank


def test_long_matrix_is_stable(rng):
    p = rng.dirichlet(np.ones(5), size=2000)
    assert math.isfinite(ctc_log_prob("ACGT" * 50, p))


def test_wide_beam_equals_exhaustive(rng):
    for _ in range(20):
        steps = int(rng.integers(1, 5))
        p = rng.dirichlet(np.ones(5) * 0.7, size=steps)
        read, prob = beam_search(p, 5**steps)
        want, want_p = exhaustive_decode(p)
        assert read.symbols == want
        assert prob == pytest.approx(want_p, rel=1e-12)


def test_beam_probability_bounds(rng):
    # a beam's score is a partial sum of its read's alignments, and no width beats the exhaustive optimum
    for _ in range(100):
        steps = int(rng.integers(2, 6))
        p = rng.dirichlet(np.ones(5) * 0.5, size=steps)
        best = exhaustive_decode(p)[1]
        for width in (1, 2, 3, 10):
            read, prob = beam_search(p, width)
            assert prob <= ctc_prob(read, p) * (1 + 1e-12)
            assert prob <= best * (1 + 1e-12)


def test_beam_width_monotone_on_fig4d(fig4d):
    probs = [beam_search(fig4d, w)[1] for w in range(1, 8)]
    assert all(b >= a for a, b in zip(probs, probs[1:]))


def test_beam_width_non_monotone_case():
    # pruning can drop an entry that a narrower beam kept, so width monotonicity is not guaranteed
    p = np.array(
        [
            [1.70691383e-02, 4.68014757e-02, 5.98988523e-01, 2.61393757e-04, 3.36879469e-01],
            [1.68875828e-01, 2.76221260e-01, 5.14087559e-02, 1.66879087e-01, 3.36615069e-01],
            [2.58085321e-01, 5.74245731e-04, 2.18100128e-04, 6.61234272e-01, 7.98880609e-02],
            [3.05462776e-01, 5.35957738e-02, 1.77888958e-01, 8.99736833e-02, 3.73078808e-01],
            [5.84601263e-01, 1.24783151e-01, 1.03799510e-04, 1.03579544e-01, 1.86932243e-01],
            [2.87260303e-01, 1.23894724e-01, 1.84581342e-02, 9.98272787e-03, 5.60404111e-01],
        ]
    )
    p = p / p.sum(axis=1, keepdims=True)
    assert beam_search(p, 5)[1] < beam_search(p, 3)[1]


def test_beam_ties_lexicographic():
    p = np.array([[0.5, 0.5, 0, 0, 0]])
    assert beam_search(p, 2)[0].symbols == "A"


def test_beam_errors():
    with pytest.raises(ValueError):
        beam_search(np.full((2, 5), 0.2), 0)
    with pytest.raises(ValueError):
        beam_search(np.full((2, 4), 0.25), 2)


def test_crossbar_products_fig9():
    top = {"A": 0.3, "-": 0.4}
    nxt = {"A": 0.3, "-": 0.5}
    raw = crossbar_beam_step(top, nxt, merge=False)
    assert raw == pytest.approx({"AA": 0.09, "A-": 0.15, "-A": 0.12, "--": 0.2})
    merged = crossbar_beam_step(top, nxt)
    assert merged["A"] == pytest.approx(0.36, abs=1e-15)
    assert merged[""] == pytest.approx(0.2, abs=1e-15)


def test_crossbar_step_bit_identical(rng):
    for _ in range(20):
        top = dict(zip("ACGT", rng.random(4)))
        nxt = dict(zip("ACGT-", rng.dirichlet(np.ones(5))))
        assert crossbar_beam_step(top, nxt) == software_beam_step(top, nxt)
        assert crossbar_beam_step(top, nxt, merge=False) == software_beam_step(top, nxt, merge=False)


def test_crossbar_raw_is_outer_product(rng):
    a, b = rng.random(4), rng.random(5)
    raw = crossbar_beam_step(dict(zip("ACGT", a)), dict(zip("ACGT-", b)), merge=False)
    np.testing.assert_array_equal(np.array(list(raw.values())).reshape(4, 5), np.multiply.outer(a, b))


def test_crossbar_decoder_matches_software(rng):
    xbar = CtcCrossbar()
    for _ in range(10):
        p = rng.dirichlet(np.ones(5), size=12)
        r0, p0 = beam_search(p, 10)
        r1, p1 = beam_search(p, 10, products=xbar.products)
        assert r0 == r1 and p0 == pytest.approx(p1, rel=1e-12)


def test_quantized_crossbar_close(fig4d):
    merged = crossbar_beam_step({"A": 0.3, "-": 0.4}, {"A": 0.3, "-": 0.5}, array=CtcCrossbar(prob_bits=8))
    assert merged["A"] == pytest.approx(0.36, abs=0.02)
    with pytest.raises(ValueError):
        crossbar_beam_step(dict(zip("ACGT", [0.1] * 4)), {str(i): 0.1 for i in range(40)})


def test_passes():
    assert CtcCrossbar().passes(10) == 2
    assert CtcCrossbar().passes(1) == 1


def test_csv_round_trip(tmp_path, rng):
    p = rng.dirichlet(np.ones(5), size=7)
    save_prob_csv(tmp_path / "p.csv", p)
    np.testing.assert_array_equal(load_prob_csv(tmp_path / "p.csv"), p)
    (tmp_path / "bad.csv").write_text("0.5,0.5\n")
    with pytest.raises(ValueError):
        load_prob_csv(tmp_path / "bad.csv")
