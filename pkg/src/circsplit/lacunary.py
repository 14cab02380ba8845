"""Lacunary generator families and the signed cosine sum S_K(θ) = Σ x_k cos(a_k θ).

Logarithms written log6 are base 6. Moments are exact rationals; every
angle fed to cos is 2π·(integer mod M)/M so huge generators keep full
precision on the uniform grids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import Infeasible, InvalidSpec, QuadratureNonConvergence
from .spectral import limit_integrals

TWO_PI = 2.0 * math.pi
_INT64_SAFE = 2**62
_CHUNK_CELLS = 1 << 22
_BNB_SEED = 1 << 18


def log6_floor(K: int) -> int:
    """Largest e with 6**e <= K, in integer arithmetic."""
    if K < 1:
        raise ValueError("K must be positive")
    e, p = 0, 6
    while p <= K:
        e, p = e + 1, p * 6
    return e


def log6(K: float) -> float:
    if isinstance(K, int) and K >= 1 and 6 ** log6_floor(K) == K:
        return float(log6_floor(K))
    return math.log(K) / math.log(6.0)


def standard_gap(K: int) -> float:
    """Gap 4·log6 K required between consecutive partial sums."""
    return 4.0 * log6(K)


@dataclass(frozen=True)
class LacunaryFamily:
    K: int
    gens: tuple[int, ...]
    gap: float

    def __post_init__(self) -> None:
        gens = tuple(int(a) for a in self.gens)
        object.__setattr__(self, "gens", gens)
        if len(gens) != self.K or self.K < 1:
            raise InvalidSpec(f"expected {self.K} generators, got {len(gens)}")
        if gens[0] < 1:
            raise InvalidSpec("generators must be positive")
        gap = Fraction(self.gap)
        total = 0
        for a in gens:
            if total and not a > gap * total:
                raise InvalidSpec(f"gap condition fails at a = {a}")
            total += a

    @property
    def a_max(self) -> int:
        return self.gens[-1]

    def ratios(self) -> list[float]:
        out, total = [], 0
        for a in self.gens:
            if total:
                out.append(a / total)
            total += a
        return out


def gen_lacunary(K: int, gap: float) -> LacunaryFamily:
    """Greedy family a_1 = 1, a_k = smallest integer strictly above gap·(a_1+...+a_{k-1})."""
    if K < 1 or gap <= 0:
        raise ValueError("need K >= 1 and gap > 0")
    g = Fraction(gap)
    gens, total = [1], 1
    for _ in range(1, K):
        a = math.floor(g * total) + 1
        while not a > g * total:
            a += 1
        if a > 2**63 - 1:
            raise OverflowError(f"generator {a} exceeds the 64-bit range")
        gens.append(a)
        total += a
    return LacunaryFamily(K, tuple(gens), gap)


def validity_bound(fam: LacunaryFamily) -> float:
    """Largest even p with a_k > p·(a_1+...+a_{k-1}) for every k >= 2 (inf if K = 1)."""
    best, total = math.inf, 0
    for a in fam.gens:
        if total:
            best = min(best, (a - 1) // total)
        total += a
    if best == math.inf:
        return best
    return int(best) - int(best) % 2


@dataclass(frozen=True)
class MomentSpec:
    """Moment order p for a family; the closed form is only certified for p <= validity_bound."""

    p: int
    validity_bound: float

    def __post_init__(self) -> None:
        if self.p < 2 or self.p % 2:
            raise ValueError("p must be a positive even integer")

    @property
    def applies(self) -> bool:
        return self.p <= self.validity_bound

    def require(self) -> None:
        if not self.applies:
            raise InvalidSpec(
                f"p = {self.p} exceeds the validity bound {self.validity_bound}; "
                "the closed form is not certified for this family"
            )


def moment_spec(fam: LacunaryFamily, p: int) -> MomentSpec:
    return MomentSpec(int(p), validity_bound(fam))


@lru_cache(maxsize=None)
def _compositions(m: int, parts: int) -> Fraction:
    """Σ over ordered q_1+...+q_parts = m, q_i >= 1, of 1/Π (q_i!)²."""
    if parts == 0:
        return Fraction(1) if m == 0 else Fraction(0)
    return sum(
        (Fraction(1, math.factorial(q) ** 2) * _compositions(m - q, parts - 1)
         for q in range(1, m - parts + 2)),
        Fraction(0),
    )


def moment_closed_form(K: int, p: int) -> Fraction:
    """2^-p Σ_l C(K,l) Σ_{even p_1+...+p_l = p} p!/Π((p_i/2)!)², exact."""
    if p < 2 or p % 2:
        raise ValueError("p must be a positive even integer")
    m = p // 2
    total = Fraction(0)
    for parts in range(1, min(K, m) + 1):
        total += math.comb(K, parts) * _compositions(m, parts)
    return total * math.factorial(p) / 2**p


def double_factorial_identity(p: int) -> tuple[int, int]:
    """((p-1)!!, p!/(2^(p/2)(p/2)!)); the two agree for every even p."""
    if p < 2 or p % 2:
        raise ValueError("p must be a positive even integer")
    lhs = math.prod(range(p - 1, 0, -2))
    rhs = math.factorial(p) // (2 ** (p // 2) * math.factorial(p // 2))
    return lhs, rhs


def _phases_cos(gens: np.ndarray, idx: np.ndarray, modulus: int) -> np.ndarray:
    r = np.multiply.outer(idx, gens) % modulus
    return np.cos(TWO_PI * r / modulus)


def _signings(x, K: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != K or not np.all(np.abs(x) == 1.0):
        raise ValueError(f"signings must be ±1 with {K} entries")
    return x, single


def moment_quadrature(
    fam: LacunaryFamily,
    x,
    p: int,
    quad_tol: float = 1e-10,
    max_nodes: int = 1 << 27,
):
    """(1/2π)∫ S_K(θ)^p dθ by the periodic trapezoid rule.

    S_K^p is a trigonometric polynomial of degree p·a_K, so the rule is exact
    beyond that many nodes; we start at 16·p·a_K, double once and require the
    two estimates to agree to ``quad_tol`` (relative once the value exceeds
    1). ``x`` may hold several signings (rows), sharing the cosine evaluations.
    """
    if p < 1:
        raise ValueError("p must be positive")
    xs, single = _signings(x, fam.K)
    gens = np.array(fam.gens, dtype=np.int64)
    m = 16 * p * fam.a_max
    if 2 * m > max_nodes:
        raise Infeasible(f"{2 * m} quadrature nodes exceed the cap {max_nodes}")
    if 2 * m * fam.a_max >= _INT64_SAFE:
        raise Infeasible("phase products exceed the int64 range")

    def node_sum(start: int, step: int, modulus: int) -> np.ndarray:
        acc = np.zeros(xs.shape[0])
        count = modulus // step
        per = max(1, _CHUNK_CELLS // fam.K)
        for lo in range(0, count, per):
            idx = start + step * np.arange(lo, min(count, lo + per), dtype=np.int64)
            s = _phases_cos(gens, idx, modulus) @ xs.T
            acc += (s**p).sum(axis=0)
        return acc

    coarse = node_sum(0, 1, m)
    fine = coarse + node_sum(1, 2, 2 * m)
    est, est2 = coarse / m, fine / (2 * m)
    # both rules are exact, so any gap is roundoff, which scales with the value
    gap = np.abs(est2 - est) / np.maximum(1.0, np.abs(est2))
    if float(gap.max()) > quad_tol:
        raise QuadratureNonConvergence(
            f"trapezoid estimates differ by {float(gap.max()):.3g} (relative) > {quad_tol:g}"
        )
    return float(est2[0]) if single else est2


@dataclass(frozen=True)
class NormalizedMomentReport:
    K: int
    p: int
    ratio: Fraction
    lower: float
    upper: float

    @property
    def within(self) -> bool:
        return self.lower <= self.ratio <= self.upper


def normalized_moment_ratio(K: int, p: int) -> NormalizedMomentReport:
    """A_K^p / ((K/2)^(p/2)·(p-1)!!) with the two-sided bounds
    1 - 8·log6²K/K and 1 + log6K/(K - log6K)·K^(log6 4)/2."""
    a = moment_closed_form(K, p)
    dfact, _ = double_factorial_identity(p)
    ratio = a / (Fraction(K, 2) ** (p // 2) * dfact)
    lg = log6(K)
    lower = 1.0 - 8.0 * lg * lg / K
    beta = lg / (K - lg) * 0.5 * 4.0**lg
    return NormalizedMomentReport(K, p, ratio, lower, 1.0 + beta)


def anticoncentration_threshold(K: int) -> float:
    return 0.25 * math.sqrt(K * log6(K))


def skmax_sampled(fam: LacunaryFamily, x, n_samples: int, rng: np.random.Generator,
                  threshold: float | None = None):
    """Max |S_K(θ)| over uniform θ samples and the fraction of samples with
    |S_K| >= (1/4)√(K·log6 K). Several signings (rows of x) share the samples."""
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    xs, single = _signings(x, fam.K)
    thr = anticoncentration_threshold(fam.K) if threshold is None else threshold
    theta = rng.uniform(0.0, TWO_PI, n_samples)
    gens = np.array(fam.gens, dtype=float)
    best = np.zeros(xs.shape[0])
    hits = np.zeros(xs.shape[0], dtype=np.int64)
    per = max(1, _CHUNK_CELLS // max(fam.K, xs.shape[0]))
    for lo in range(0, n_samples, per):
        c = np.cos(np.multiply.outer(theta[lo:lo + per], gens))
        s = np.abs(c @ xs.T)
        best = np.maximum(best, s.max(axis=0))
        hits += (s >= thr).sum(axis=0)
    frac = hits / n_samples
    if single:
        return float(best[0]), float(frac[0])
    return best, frac


def sign_classes(K: int) -> np.ndarray:
    """All 2^(K-1) signings with x_1 = +1, one per {x, -x} class."""
    if K < 1:
        raise ValueError("K must be positive")
    masks = np.arange(1 << (K - 1), dtype=np.int64)
    bits = (masks[:, None] >> np.arange(K - 1)) & 1
    return np.hstack([np.ones((len(masks), 1)), 1.0 - 2.0 * bits])


@dataclass(frozen=True)
class MinMaxResult:
    min_max: float
    witness: np.ndarray
    class_max: np.ndarray
    class_degree_gap: np.ndarray
    grid_size: int
    threshold: float | None
    class_exact: np.ndarray | None = None

    @property
    def passes(self) -> bool | None:
        return None if self.threshold is None else self.min_max >= self.threshold


def _term_ranges(gens: np.ndarray, lo: np.ndarray, width: int, modulus: int):
    """Range of 1 - cos(2π a i/M) over i in [lo, lo+width), shape (len(lo), K)."""
    start = np.multiply.outer(lo, gens) % modulus
    span = gens * (width - 1)
    end = start + span
    c0 = np.cos(TWO_PI * start / modulus)
    c1 = np.cos(TWO_PI * (end % modulus) / modulus)
    cmax = np.maximum(c0, c1)
    cmin = np.minimum(c0, c1)
    half = modulus / 2.0
    wraps = (end >= modulus) | (start == 0)
    # the phase interval [start, end] contains M/2 (mod M)
    has_half = ((start <= half) & (end >= half)) | (end >= modulus + half)
    cmax = np.where(wraps, 1.0, cmax)
    cmin = np.where(has_half, -1.0, cmin)
    full = span >= modulus
    cmax = np.where(full, 1.0, cmax)
    cmin = np.where(full, -1.0, cmin)
    return 1.0 - cmax, 1.0 - cmin


def _seed_points(modulus: int) -> np.ndarray:
    return np.unique(np.linspace(0, modulus - 1, min(modulus, _BNB_SEED)).astype(np.int64))


def _grid_max_bnb(gens: np.ndarray, x: np.ndarray, modulus: int, best: float = 0.0,
                  stop_above: float = math.inf, branch: int = 16) -> tuple[float, bool]:
    """Max over i of |Σ x_k (1 - cos(2π a_k i/M))| by branch and bound.

    ``best`` is a known lower bound (a value attained on the grid). Returns
    (value, exact); the search gives up with exact=False as soon as the
    running maximum exceeds ``stop_above``.
    """
    pos = x > 0
    width = 1
    while width * branch < modulus:
        width *= branch
    lo = np.arange(0, modulus, width, dtype=np.int64)
    while True:
        vals = np.abs((1.0 - _phases_cos(gens, lo, modulus)) @ x)
        best = max(best, float(vals.max()))
        if best > stop_above:
            return best, False
        if width == 1:
            return best, True
        tmin, tmax = _term_ranges(gens, lo, width, modulus)
        fmax = np.where(pos, tmax, -tmin).sum(axis=1)
        fmin = np.where(pos, tmin, -tmax).sum(axis=1)
        ub = np.maximum(np.abs(fmax), np.abs(fmin)) + 1e-12
        lo = lo[ub > best]
        if lo.size == 0:
            return best, True
        sub = max(1, width // branch)
        lo = (lo[:, None] + sub * np.arange(branch, dtype=np.int64)).reshape(-1)
        lo = lo[lo < modulus]
        width = sub


def _dense_class_max(gens: np.ndarray, xs: np.ndarray, idx_all: np.ndarray | None, modulus: int) -> np.ndarray:
    out = np.zeros(len(xs))
    count = modulus if idx_all is None else len(idx_all)
    per = max(1, _CHUNK_CELLS // max(len(gens), len(xs)))
    for lo in range(0, count, per):
        idx = np.arange(lo, min(count, lo + per), dtype=np.int64)
        if idx_all is not None:
            idx = idx_all[idx]
        w = 1.0 - _phases_cos(gens, idx, modulus)
        out = np.maximum(out, np.abs(w @ xs.T).max(axis=0))
    return out


def exhaustive_min_max(fam: LacunaryFamily, theta_grid_density: int = 64,
                       threshold: float | None = None, dense_cap: int = 1 << 22,
                       full: bool = True) -> MinMaxResult:
    """min over sign classes of max_θ |Σ x_k (1 - cos a_k θ)| on the uniform
    grid of density·a_K angles.

    Small grids are swept densely; larger ones use an exact branch and bound
    that returns the same grid maximum. With full=False a class is abandoned
    once it provably exceeds the current minimum, so only the minimizing
    class is exact (``class_exact`` marks which entries are exact maxima;
    the others are lower bounds).
    """
    K = fam.K
    if K > 20:
        raise Infeasible(f"K = {K} gives 2^{K - 1} sign classes; the cap is K <= 20")
    modulus = int(theta_grid_density) * fam.a_max
    if modulus < 2:
        raise ValueError("grid too coarse")
    if modulus * fam.a_max >= _INT64_SAFE:
        raise Infeasible("grid phase products exceed the int64 range")
    xs = sign_classes(K)
    gens = np.array(fam.gens, dtype=np.int64)
    exact = np.ones(len(xs), dtype=bool)
    if modulus <= dense_cap:
        class_max = _dense_class_max(gens, xs, None, modulus)
    else:
        class_max = _dense_class_max(gens, xs, _seed_points(modulus), modulus)
        current = math.inf
        for c in np.argsort(class_max, kind="stable"):
            stop = math.inf if full else current
            class_max[c], exact[c] = _grid_max_bnb(gens, xs[c], modulus, class_max[c], stop)
            if exact[c]:
                current = min(current, class_max[c])
    i = int(np.argmin(np.where(exact, class_max, np.inf)))
    return MinMaxResult(
        float(class_max[i]), xs[i].astype(np.int64), class_max,
        np.abs(xs.sum(axis=1)), modulus, threshold, exact,
    )


def lower_bound_threshold(K: int) -> float:
    """(1/10)·√(K·log6 K)."""
    return 0.1 * math.sqrt(K * log6(K))


def alpha_of_family(fam: LacunaryFamily, quad_tol: float = 1e-10) -> float:
    """Largest continuous-limit effective resistance over the family's generators."""
    return float(limit_integrals(fam.gens, quad_tol).max())


def paley_zygmund_fraction(fam: LacunaryFamily, x, p: int, delta: float,
                           n_samples: int, rng: np.random.Generator) -> tuple[float, float]:
    """Sampled measure of {ψ >= δA} for ψ = S_K^p, against (1-δ)²A²/B.

    A and B are the closed-form p-th and 2p-th moments.
    """
    a = float(moment_closed_form(fam.K, p))
    b = float(moment_closed_form(fam.K, 2 * p))
    xs, _ = _signings(x, fam.K)
    theta = rng.uniform(0.0, TWO_PI, n_samples)
    s = np.cos(np.multiply.outer(theta, np.array(fam.gens, dtype=float))) @ xs[0]
    frac = float(np.mean(s**p >= delta * a))
    return frac, (1.0 - delta) ** 2 * a * a / b
