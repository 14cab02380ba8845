from __future__ import annotations

import math
from fractions import Fraction
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from circsplit.errors import Infeasible, InvalidSpec
from circsplit.lacunary import (
    LacunaryFamily,
    alpha_of_family,
    anticoncentration_threshold,
    double_factorial_identity,
    exhaustive_min_max,
    gen_lacunary,
    normalized_moment_ratio,
    log6,
    log6_floor,
    lower_bound_threshold,
    moment_closed_form,
    moment_quadrature,
    moment_spec,
    paley_zygmund_fraction,
    standard_gap,
    sign_classes,
    skmax_sampled,
    validity_bound,
)
from circsplit.spectral import canonical_circulant, limit_effective_resistance, spectral_ratio


def brute_moment(K, p):
    """Average of (Σ cos φ_k)^p over independent uniform phases, by expanding
    with exponentials: count the ±1 frequency tuples summing to zero."""
    total = Fraction(0)
    # (Σ_k cos φ_k)^p = 2^-p Σ over choices of (k_i, ε_i); nonzero mean iff every k
    # carries as many +1 as -1
    for ks in product(range(K), repeat=p):
        for eps in product((-1, 1), repeat=p):
            net = [0] * K
            for k, e in zip(ks, eps):
                net[k] += e
            if not any(net):
                total += 1
    return total / 2**p


def test_log6_helpers():
    assert log6_floor(5) == 0 and log6_floor(6) == 1 and log6_floor(1295) == 3 and log6_floor(1296) == 4
    assert log6(216) == 3.0 and log6(1296) == 4.0
    assert standard_gap(6) == 4.0


def test_gen_examples():
    assert gen_lacunary(3, 4.0).gens == (1, 5, 25)
    assert gen_lacunary(1, 7.5).gens == (1,)
    fam = gen_lacunary(4, standard_gap(4))
    assert all(r > standard_gap(4) for r in fam.ratios())


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 12), st.floats(0.5, 9.0))
def test_gen_satisfies_gap(K, gap):
    fam = gen_lacunary(K, gap)
    total = 0
    for a in fam.gens:
        assert total == 0 or Fraction(a) > Fraction(gap) * total
        total += a
    assert fam.gens == gen_lacunary(K, gap).gens


def test_family_rejects_bad_gap():
    with pytest.raises(InvalidSpec):
        LacunaryFamily(3, (1, 4, 25), 4.0)
    with pytest.raises(OverflowError):
        gen_lacunary(40, 8.0)


@pytest.mark.parametrize("K,p,expected", [
    (7, 2, Fraction(7, 2)),
    (1, 4, Fraction(3, 8)),
    (3, 4, Fraction(45, 8)),
    (64, 4, Fraction(6 * 64 + 24 * math.comb(64, 2), 16)),
])
def test_closed_form_examples(K, p, expected):
    assert moment_closed_form(K, p) == expected


@pytest.mark.parametrize("K,p", [(1, 2), (2, 4), (3, 4), (2, 6), (3, 6), (4, 4)])
def test_closed_form_matches_phase_expansion(K, p):
    assert moment_closed_form(K, p) == brute_moment(K, p)


def test_double_factorial():
    assert double_factorial_identity(2) == (1, 1)
    assert double_factorial_identity(4) == (3, 3)
    assert double_factorial_identity(6) == (15, 15)
    for p in range(2, 40, 2):
        lhs, rhs = double_factorial_identity(p)
        assert lhs == rhs


def test_quadrature_examples():
    assert moment_quadrature(LacunaryFamily(2, (1, 2), 1.0), [1, -1], 2) == pytest.approx(1.0, abs=1e-12)
    fam = gen_lacunary(3, 4.0)
    assert abs(moment_quadrature(fam, [1, 1, 1], 4) - 5.625) < 1e-8
    assert abs(moment_quadrature(fam, [1, -1, 1], 4) - 5.625) < 1e-8


def test_quadrature_cap():
    with pytest.raises(Infeasible):
        moment_quadrature(gen_lacunary(6, 6.0), np.ones(6), 8, max_nodes=1000)


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 5), st.sampled_from([2, 4, 6]), st.integers(0, 2**32 - 1))
def test_quadrature_sign_independent(K, p, seed):
    fam = gen_lacunary(K, float(p))
    xs = np.random.default_rng(seed).choice([-1.0, 1.0], (8, K))
    vals = moment_quadrature(fam, xs, p)
    assert float(vals.max() - vals.min()) <= 2e-10 * max(1.0, float(vals.max()))
    assert abs(float(vals[0]) - float(moment_closed_form(K, p))) <= 1e-8 * float(moment_closed_form(K, p))


def test_validity_guard_triggers():
    fam = gen_lacunary(4, 2.0)  # barely lacunary: (1, 3, 9, 27)
    vb = validity_bound(fam)
    assert vb == 2
    assert moment_spec(fam, vb).applies
    guard = moment_spec(fam, vb + 2)
    assert not guard.applies
    with pytest.raises(InvalidSpec):
        guard.require()
    assert validity_bound(gen_lacunary(1, 3.0)) == math.inf


def test_normalized_moment_examples():
    assert normalized_moment_ratio(64, 2).ratio == 1
    K = 64
    expected = Fraction(3 * K + 12 * math.comb(K, 2), 8) / (Fraction(K, 2) ** 2 * 3)
    assert normalized_moment_ratio(64, 4).ratio == expected
    rep = normalized_moment_ratio(729, 6)
    assert rep.within


def test_skmax_examples():
    fam = gen_lacunary(3, 4.0)
    rng = np.random.default_rng(0)
    best, frac = skmax_sampled(fam, np.ones(3), 200_000, rng)
    assert best <= 3.0 and best > 2.999
    assert 0 <= frac <= 1
    x = np.array([1, -1, 1])
    a = skmax_sampled(fam, x, 5000, np.random.default_rng(7))
    b = skmax_sampled(fam, -x, 5000, np.random.default_rng(7))
    assert a == b


def test_sign_classes():
    xs = sign_classes(4)
    assert xs.shape == (8, 4) and np.all(xs[:, 0] == 1)
    assert len({tuple(r) for r in xs}) == 8


def test_min_max_examples():
    fam = gen_lacunary(3, 4.0)
    res = exhaustive_min_max(fam, 64)
    ones = int(np.flatnonzero((sign_classes(3) == 1).all(axis=1))[0])
    assert res.class_max[ones] == pytest.approx(6.0)
    assert res.class_degree_gap[ones] == 3
    assert exhaustive_min_max(LacunaryFamily(1, (1,), 1.0), 64).min_max == pytest.approx(2.0)
    with pytest.raises(Infeasible):
        exhaustive_min_max(gen_lacunary(21, 1.0))


def test_min_max_branch_and_bound_matches_dense():
    fam = gen_lacunary(6, standard_gap(6))
    dense = exhaustive_min_max(fam, 64, dense_cap=1 << 30)
    bnb = exhaustive_min_max(fam, 64, dense_cap=0)
    np.testing.assert_allclose(bnb.class_max, dense.class_max, rtol=1e-12)
    assert bnb.min_max == pytest.approx(dense.min_max, rel=1e-12)


def test_min_max_k10_standard_family():
    fam = gen_lacunary(10, standard_gap(10))
    thr = lower_bound_threshold(10)
    lo = exhaustive_min_max(fam, 64, thr, full=False)
    hi = exhaustive_min_max(fam, 128, thr, full=False)
    assert lo.passes and hi.passes
    assert abs(lo.min_max - hi.min_max) <= 0.01 * hi.min_max


def test_paley_zygmund():
    rng = np.random.default_rng(5)
    for K in (8, 10, 12):
        fam = gen_lacunary(K, standard_gap(K))
        p = 2 * log6_floor(K)
        x = rng.choice([-1, 1], K)
        frac, bound = paley_zygmund_fraction(fam, x, p, 1.0 / K, 100_000, rng)
        assert frac >= 0.9 * bound


@settings(max_examples=40, deadline=None)
@given(st.integers(5, 300), st.lists(st.integers(1, 149), min_size=1, max_size=6), st.integers(0, 2**32 - 1))
def test_degree_gap_bounded_by_ratio(n, raw, seed):
    gens = sorted({r % n for r in raw + [1]} - {0})
    gens = sorted({min(a, n - a) for a in gens if 2 * a != n})
    g = canonical_circulant(n, gens)
    x = np.random.default_rng(seed).choice([-1, 1], g.k)
    gamma = spectral_ratio(g, x).max_ratio
    assert 2 * abs(int(x.sum())) <= gamma * 2 * g.k + 1e-9


def test_alpha_examples():
    assert alpha_of_family(LacunaryFamily(1, (1,), 1.0)) == pytest.approx(1.0)
    a12 = alpha_of_family(LacunaryFamily(2, (1, 2), 1.0))
    assert a12 == pytest.approx(max(1 / math.sqrt(5), limit_effective_resistance((1, 2), 2)))


def test_thresholds():
    assert anticoncentration_threshold(6) == pytest.approx(0.25 * math.sqrt(6))
    assert lower_bound_threshold(6) == pytest.approx(0.1 * math.sqrt(6))
