from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from circsplit.ap_partition import ALPHA, APGenerators, partition_ap
from circsplit.errors import DisconnectedGraph, EnumerationCapExceeded, InvalidSpec
from circsplit.products import (
    KINDS,
    ProductSigning,
    ProductSpec,
    partition_product,
    product_spectral_ratio,
)
from circsplit.spectral import canonical_circulant, spectral_ratio
from product_oracle import dense_product_ratio


def signing(*ys):
    return ProductSigning(tuple(np.array(y) for y in ys))


def test_spec_validation():
    with pytest.raises(InvalidSpec):
        ProductSpec("strong", 16, (2,))
    with pytest.raises(InvalidSpec):
        ProductSpec("tensor", 16, (8,))
    with pytest.raises(DisconnectedGraph):
        ProductSpec("tensor", 16, (1, 1))
    assert ProductSpec("Tensor", 15, (1, 1)).K == 1


def test_enumeration_cap():
    spec = ProductSpec("cartesian", 64, (2, 2, 2, 2, 2))
    s = signing(*[[1, -1]] * 5)
    with pytest.raises(EnumerationCapExceeded):
        product_spectral_ratio(spec, s)


@pytest.mark.parametrize("kind", KINDS)
def test_d1_matches_spectral_core_bitwise(kind):
    y = np.array([1, -1, -1, 1, 1])
    r = product_spectral_ratio(ProductSpec(kind, 23, (5,)), signing(y))
    assert r.max_ratio == spectral_ratio(canonical_circulant(23, range(1, 6)), y).max_ratio


@pytest.mark.parametrize("kind", KINDS)
def test_d1_partition_matches_partition_ap(kind):
    spec = ProductSpec(kind, 41, (6,))
    sg, rep = partition_product(spec, rng=np.random.default_rng(3))
    direct = partition_ap(APGenerators(0, 1, 6, 41), rng=np.random.default_rng(3))
    assert np.array_equal(sg.per_factor[0], direct.signing)
    assert rep.max_ratio == direct.spectral.max_ratio


def test_tensor_trivial_all_plus():
    rep = product_spectral_ratio(ProductSpec("tensor", 15, (1, 1)), signing([1], [1]))
    assert rep.max_ratio == pytest.approx(1.0)


@pytest.mark.parametrize("kind,n,ks,ys", [
    ("tensor", 16, (2, 2), [[1, -1], [1, -1]]),
    ("tensor", 16, (2, 4), [[1, -1], [1, -1, -1, 1]]),
    ("cartesian", 16, (3, 5), [[1, -1, 1], [1, 1, -1, -1, 1]]),
    ("tensor", 9, (2, 3, 1), [[1, -1], [1, -1, 1], [1]]),
    ("cartesian", 7, (2, 3, 1), [[-1, 1], [1, 1, -1], [1]]),
])
def test_matches_dense_oracle(kind, n, ks, ys):
    spec = ProductSpec(kind, n, ks)
    s = signing(*ys)
    assert abs(product_spectral_ratio(spec, s).max_ratio - dense_product_ratio(spec, s)) <= 1e-8


def test_generator_signs():
    spec = ProductSpec("tensor", 16, (2, 2))
    signs = signing([1, -1], [1, -1]).generator_signs(spec)
    assert signs == {(1, 1): 1, (1, 2): -1, (2, 1): -1, (2, 2): 1}
    cart = signing([1, -1], [-1]).generator_signs(ProductSpec("cartesian", 16, (2, 1)))
    assert cart == {(1, 0): 1, (2, 0): -1, (0, 1): -1}


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_cartesian_mediant_bound(seed):
    rng = np.random.default_rng(seed)
    spec = ProductSpec("cartesian", 32, (3, 5))
    ys = [rng.choice([-1, 1], k) for k in spec.ks]
    ratio = product_spectral_ratio(spec, signing(*ys)).max_ratio
    per = [spectral_ratio(canonical_circulant(32, range(1, k + 1)), y).max_ratio for k, y in zip(spec.ks, ys)]
    assert ratio <= max(per) + 1e-12


@pytest.mark.parametrize("ks", [(2, 2), (2, 4), (3, 5)])
def test_tensor_far_denominator(ks):
    n = 16
    K = math.prod(ks)
    theta = 2 * math.pi / n
    cos_sums = [np.array([np.cos(np.arange(1, k + 1) * j * theta).sum() for j in range(n)]) for k in ks]
    for j in np.ndindex(*(n,) * len(ks)):
        if not any(j):
            continue
        far = any(abs(math.remainder(jh * theta, 2 * math.pi)) >= ALPHA / k for jh, k in zip(j, ks))
        if far:
            den = K - math.prod(c[jh] for c, jh in zip(cos_sums, j))
            assert den >= K * ALPHA**2 / 96


def test_partition_product_cartesian():
    spec = ProductSpec("cartesian", 64, (4, 8))
    sg, rep = partition_product(spec, rng=np.random.default_rng(0))
    sg.check(spec)
    per = [spectral_ratio(canonical_circulant(64, range(1, k + 1)), y).max_ratio
           for k, y in zip(spec.ks, sg.per_factor)]
    assert rep.max_ratio <= max(per) + 1e-12
    assert rep.argmax_index is not None and any(rep.argmax_index)
