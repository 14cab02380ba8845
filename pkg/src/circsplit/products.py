"""Cartesian and tensor products of circulant factors X(Z_n, ±[k_h]) on Z_n^d.

Eigenvalues of both products factor over the coordinates j = (j_1, ..., j_d),
so the signed error is assembled from per-factor trigonometric sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ap_partition import AlgoConfig, APGenerators, partition_ap
from .errors import DisconnectedGraph, EnumerationCapExceeded, InvalidSpec
from .spectral import SpectralErrorReport, _as_signing, half_angle_sin2

KINDS = ("cartesian", "tensor")
DEFAULT_CAP = 1 << 26


@dataclass(frozen=True)
class ProductSpec:
    kind: str
    n: int
    ks: tuple[int, ...]

    def __post_init__(self) -> None:
        kind = str(self.kind).lower()
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "ks", tuple(int(k) for k in self.ks))
        if kind not in KINDS:
            raise InvalidSpec(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.n < 3:
            raise InvalidSpec("n must be at least 3")
        if len(self.ks) < 1:
            raise InvalidSpec("need at least one factor")
        for k in self.ks:
            if not 1 <= k <= (self.n - 1) // 2:
                raise InvalidSpec(f"k_h = {k} must lie in [1, {(self.n - 1) // 2}]")
        # X(Z_n, ±1) with n even is bipartite; two bipartite factors split the tensor product
        if kind == "tensor" and self.n % 2 == 0 and sum(k == 1 for k in self.ks) >= 2:
            raise DisconnectedGraph("tensor product of two or more bipartite factors is disconnected")

    @property
    def d(self) -> int:
        return len(self.ks)

    @property
    def K(self) -> int:
        return math.prod(self.ks)


@dataclass(frozen=True)
class ProductSigning:
    """One signing y_h per factor; generator signs follow from ``kind``."""

    per_factor: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "per_factor", tuple(np.asarray(y, dtype=np.int64) for y in self.per_factor)
        )

    def check(self, spec: ProductSpec) -> None:
        if len(self.per_factor) != spec.d:
            raise ValueError(f"{len(self.per_factor)} factor signings for d = {spec.d}")
        for y, k in zip(self.per_factor, spec.ks):
            _as_signing(y, k)

    def generator_signs(self, spec: ProductSpec) -> dict[tuple[int, ...], int]:
        """Sign of every positive-representative generator, for inspection."""
        self.check(spec)
        out: dict[tuple[int, ...], int] = {}
        if spec.kind == "cartesian":
            for h, y in enumerate(self.per_factor):
                for s, v in enumerate(y, start=1):
                    e = [0] * spec.d
                    e[h] = s
                    out[tuple(e)] = int(v)
            return out
        grids = np.meshgrid(*[np.arange(1, k + 1) for k in spec.ks], indexing="ij")
        signs = np.ones(grids[0].shape, dtype=np.int64)
        for h, y in enumerate(self.per_factor):
            signs = signs * y[grids[h] - 1]
        for idx in np.ndindex(signs.shape):
            out[tuple(int(i) + 1 for i in idx)] = int(signs[idx])
        return out


def _factor_sums(n: int, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(Σ_s y_s (1 - cos(2π j s/n)), Σ_s (1 - cos(2π j s/n))) for j = 0..n-1."""
    gens = np.arange(1, len(y) + 1, dtype=np.int64)
    w = half_angle_sin2(gens, np.arange(n, dtype=np.int64), n)
    return 2.0 * (w @ y.astype(float)), 2.0 * w.sum(axis=1)


def _telescoped(a: list, b: list) -> np.ndarray:
    """Π_h a_h - Π_h (a_h - b_h) without cancellation when the b_h are small.

    Uses Σ_h (Π_{i<h} a_i)·b_h·(Π_{i>h} (a_i - b_i)); all factors broadcast.
    """
    d = len(a)
    total = 0.0
    for h in range(d):
        term = b[h]
        for i in range(h):
            term = term * a[i]
        for i in range(h + 1, d):
            term = term * (a[i] - b[i])
        total = total + term
    return total


def product_spectral_ratio(spec: ProductSpec, signs: ProductSigning,
                           cap: int = DEFAULT_CAP) -> SpectralErrorReport:
    """Exact max over j in Z_n^d minus 0 of the relative error of the signed split."""
    signs.check(spec)
    n, d = spec.n, spec.d
    if n**d > cap:
        raise EnumerationCapExceeded(f"n^d = {n**d} exceeds the enumeration cap {cap}")
    sums = [_factor_sums(n, y) for y in signs.per_factor]
    kind = spec.kind if d > 1 else "cartesian"
    rest_shape = (n,) * (d - 1)

    def lift(v: np.ndarray, h: int) -> np.ndarray:
        # factor h >= 1 along axis h-1 of the trailing (d-1)-dim block
        shape = [1] * (d - 1)
        shape[h - 1] = n
        return v.reshape(shape)

    if kind == "cartesian":
        rest_num = sum((lift(sums[h][0], h) for h in range(1, d)), np.zeros(rest_shape))
        rest_den = sum((lift(sums[h][1], h) for h in range(1, d)), np.zeros(rest_shape))
    else:
        # Π Y_h - Π (Y_h - N_h) over K - Π (k_h - D_h), sums over s = 1..k_h
        a_num = [float(y.sum()) for y in signs.per_factor]
        a_den = [float(k) for k in spec.ks]
        b_num = [None] + [lift(sums[h][0], h) for h in range(1, d)]
        b_den = [None] + [lift(sums[h][1], h) for h in range(1, d)]

    best = (-1.0, 0, 0.0, 1.0)
    for j1 in range(n):
        if kind == "cartesian":
            num = sums[0][0][j1] + rest_num
            den = sums[0][1][j1] + rest_den
        else:
            b_num[0] = sums[0][0][j1]
            b_den[0] = sums[0][1][j1]
            num = np.broadcast_to(_telescoped(a_num, b_num), rest_shape)
            den = np.broadcast_to(_telescoped(a_den, b_den), rest_shape)
        num, den = num.reshape(-1), den.reshape(-1)
        offset = 1 if j1 == 0 else 0
        num, den = num[offset:], den[offset:]
        if num.size == 0:
            continue
        if np.any(den <= 0):
            raise DisconnectedGraph("zero eigenvalue away from j = 0; the product is disconnected")
        ratio = np.abs(num) / den
        i = int(np.argmax(ratio))
        if ratio[i] > best[0]:
            best = (float(ratio[i]), j1 * n ** (d - 1) + i + offset, float(num[i]), float(den[i]))
    ratio, flat, num, den = best
    index = tuple(int(v) for v in np.unravel_index(flat, (n,) * d))
    theta = 2.0 * math.pi * index[0] / n
    return SpectralErrorReport(ratio, theta, "exact", np.array([[theta, num, den]]),
                               argmax_index=index)


def partition_product(spec: ProductSpec, cfg=None,
                      rng: np.random.Generator | None = None) -> tuple[ProductSigning, SpectralErrorReport]:
    """Sign each factor's generators ±[k_h] independently, then verify the product.

    ``cfg`` is one AlgoConfig for every factor, a callable k -> AlgoConfig,
    or None for the desk default per factor.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    ys = []
    for k in spec.ks:
        if cfg is None:
            c = AlgoConfig.desk(k)
        elif isinstance(cfg, AlgoConfig):
            c = cfg
        else:
            c = cfg(k)
        ys.append(partition_ap(APGenerators(0, 1, k, spec.n), c, rng).signing)
    signing = ProductSigning(tuple(ys))
    return signing, product_spectral_ratio(spec, signing)
