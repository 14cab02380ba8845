"""Closed-form spectral quantities of circulant graphs X(Z_n, {±a_1, ..., ±a_k}).

Every angle used here is a rational multiple of 2π, so phases are reduced
in integer arithmetic before any trigonometric call.  Terms of the form
1 - cos(a·θ) are evaluated as 2·sin²(a·θ/2), which keeps them exact and
nonnegative near the zeros of the Laplacian symbol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np

from .errors import (
    DisconnectedGraph,
    EmptyGenerators,
    GeneratorNotInGraph,
    InvalidGraph,
    QuadratureNonConvergence,
    SelfInverseGenerator,
)

# rows*cols budget for one chunk of the angle sweep
_CHUNK_CELLS = 1 << 22
_ZERO_DEN = 1e-12


@dataclass(frozen=True)
class CirculantGraph:
    """Canonical circulant graph; ``gens`` are the representatives in [1, n/2)."""

    n: int
    gens: tuple[int, ...]

    @property
    def k(self) -> int:
        return len(self.gens)

    @property
    def degree(self) -> int:
        return 2 * len(self.gens)

    def index_of(self, a: int) -> int:
        try:
            return self.gens.index(int(a))
        except ValueError:
            raise GeneratorNotInGraph(f"{a} is not a generator of X(Z_{self.n}, {self.gens})") from None


def fold_residue(a: int, n: int) -> int:
    """Representative of the pair {a, -a} mod n in [0, n/2]."""
    r = int(a) % n
    return min(r, n - r)


def canonical_circulant(n: int, raw_gens: Sequence[int]) -> CirculantGraph:
    """Reduce, fold and deduplicate generators, then check connectivity.

    >>> canonical_circulant(5, [1, -2, 7]).gens
    (1, 2)
    """
    n = int(n)
    if n < 3:
        raise ValueError(f"n must be at least 3, got {n}")
    if len(raw_gens) == 0:
        raise EmptyGenerators("generator list is empty")
    folded = set()
    for a in raw_gens:
        r = fold_residue(a, n)
        if r == 0:
            raise InvalidGraph(f"generator {a} is 0 mod {n}")
        if 2 * r == n:
            raise SelfInverseGenerator(f"generator {a} is n/2 = {n // 2} mod {n}")
        folded.add(r)
    gens = tuple(sorted(folded))
    g = reduce(math.gcd, gens, n)
    if g != 1:
        raise DisconnectedGraph(f"gcd(gens, n) = {g}; the graph has {g} components")
    return CirculantGraph(n, gens)


def half_angle_sin2(gens: np.ndarray, idx: np.ndarray, modulus: int) -> np.ndarray:
    """sin²(π·(a·j mod M)/M) for every (j, a) pair, shape (len(idx), len(gens)).

    Equals (1 - cos(a·2πj/M)) / 2 with the phase reduced exactly.
    """
    r = np.multiply.outer(np.asarray(idx, dtype=np.int64), np.asarray(gens, dtype=np.int64)) % modulus
    # fold to [0, M/2] so that sin is evaluated on a short argument
    r = np.minimum(r, modulus - r)
    return np.sin(np.pi * r / modulus) ** 2


def _chunks(start: int, stop: int, width: int):
    step = max(1, _CHUNK_CELLS // max(1, width))
    for lo in range(start, stop, step):
        yield np.arange(lo, min(stop, lo + step), dtype=np.int64)


def _check_int64(n: int, gens: Sequence[int]) -> None:
    if n * max(gens) >= 2**62:
        raise OverflowError("n·max(gens) exceeds the int64 phase-reduction range")


def laplacian_eigenvalues(g: CirculantGraph) -> np.ndarray:
    """Eigenvalue j of L_X is 2·Σ_s (1 - cos(a_s·2πj/n)); entry 0 is 0."""
    _check_int64(g.n, g.gens)
    gens = np.array(g.gens, dtype=np.int64)
    out = np.empty(g.n)
    for idx in _chunks(0, g.n, len(gens)):
        out[idx] = 4.0 * half_angle_sin2(gens, idx, g.n).sum(axis=1)
    return out


def edge_effective_resistance(g: CirculantGraph, a: int) -> float:
    """Effective resistance across any edge generated by ±a.

    er = (1/n)·Σ_{j=1}^{n-1} (1 - cos(2πja/n)) / Σ_s (1 - cos(2πja_s/n)).
    """
    col = g.index_of(a)
    return float(_edge_resistances(g)[col])


def _edge_resistances(g: CirculantGraph) -> np.ndarray:
    _check_int64(g.n, g.gens)
    gens = np.array(g.gens, dtype=np.int64)
    acc = np.zeros(len(gens))
    for idx in _chunks(1, g.n, len(gens)):
        w = half_angle_sin2(gens, idx, g.n)
        acc += (w / w.sum(axis=1, keepdims=True)).sum(axis=0)
    return acc / g.n


def edge_effective_resistances(g: CirculantGraph) -> dict[int, float]:
    """Effective resistance for every generator, keyed by generator."""
    return dict(zip(g.gens, map(float, _edge_resistances(g))))


def max_edge_effective_resistance(g: CirculantGraph) -> float:
    return float(_edge_resistances(g).max())


def limit_integrals(gens: Sequence[int], quad_tol: float = 1e-10, max_nodes: int = 1 << 26) -> np.ndarray:
    """(1/2π)∫ h_a for every a in ``gens`` where h_a = (1 - cos aθ)/Σ_k(1 - cos a_kθ).

    Periodic trapezoid rule with node doubling; the integrand is smooth and
    periodic once extended by a²/Σa_k² at the zeros of the denominator, so the
    rule converges geometrically.  Stops when successive estimates differ by
    at most ``quad_tol`` in every component.
    """
    gens_arr = np.array([int(a) for a in gens], dtype=np.int64)
    if len(gens_arr) == 0:
        raise EmptyGenerators("generator list is empty")
    if quad_tol <= 0:
        raise ValueError("quad_tol must be positive")
    limit_val = gens_arr.astype(float) ** 2 / float(np.sum(gens_arr.astype(float) ** 2))
    amax = int(gens_arr.max())

    def node_sum(idx: np.ndarray, modulus: int) -> np.ndarray:
        w = half_angle_sin2(gens_arr, idx, modulus)
        den = w.sum(axis=1)
        zero = den < _ZERO_DEN
        den[zero] = 1.0
        h = w / den[:, None]
        h[zero] = limit_val
        return h.sum(axis=0)

    def total(stride_start: int, modulus: int) -> np.ndarray:
        # nodes i = stride_start, stride_start + 2, ... when refining, every node otherwise
        acc = np.zeros(len(gens_arr))
        step = 2 if stride_start else 1
        count = modulus // step
        per = max(1, _CHUNK_CELLS // len(gens_arr))
        for lo in range(0, count, per):
            idx = stride_start + step * np.arange(lo, min(count, lo + per), dtype=np.int64)
            acc += node_sum(idx, modulus)
        return acc

    m = 16
    while m < 4 * amax:
        m *= 2
    if m > max_nodes:
        raise QuadratureNonConvergence(f"initial node count {m} exceeds max_nodes={max_nodes}")
    _check_int64(2 * max_nodes, [amax])
    sums = total(0, m)
    est = sums / m
    while True:
        m2 = 2 * m
        if m2 > max_nodes:
            raise QuadratureNonConvergence(
                f"no convergence to {quad_tol:g} within {max_nodes} nodes (last estimate {est.max():.6g})"
            )
        sums = sums + total(1, m2)
        est2 = sums / m2
        done = float(np.max(np.abs(est2 - est))) <= quad_tol and m2 >= 16 * amax
        m, est = m2, est2
        if done:
            return est


def limit_effective_resistance(gens: Sequence[int], a: int, quad_tol: float = 1e-10,
                               max_nodes: int = 1 << 26) -> float:
    """N → ∞ limit of the edge effective resistance across ±a in X(Z_N, ±gens)."""
    gens = [int(x) for x in gens]
    if int(a) not in gens:
        raise GeneratorNotInGraph(f"{a} not in {gens}")
    return float(limit_integrals(gens, quad_tol, max_nodes)[gens.index(int(a))])


@dataclass
class SpectralErrorReport:
    """Relative spectral error of a signing.

    ``samples`` holds (theta, numerator, denominator) rows; when the full trace
    is not requested it holds only the maximizing row.  In grid mode
    ``inflation`` is the Bernstein factor (1 - 2π·max(a)/M)^-1 and
    ``certified_bound = max_ratio·inflation``.
    """

    max_ratio: float
    argmax_theta: float
    mode: str
    samples: np.ndarray = field(repr=False)
    inflation: float | None = None
    certified_bound: float | None = None
    argmax_index: tuple[int, ...] | None = None

    @property
    def bound(self) -> float:
        """Certified bound in grid mode, the exact maximum otherwise."""
        return self.certified_bound if self.certified_bound is not None else self.max_ratio

    def to_dict(self) -> dict:
        return {
            "max_ratio": self.max_ratio,
            "argmax_theta": self.argmax_theta,
            "mode": self.mode,
            "inflation": self.inflation,
            "certified_bound": self.certified_bound,
            "argmax_index": None if self.argmax_index is None else list(self.argmax_index),
        }


def _as_signing(x, k: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (k,):
        raise ValueError(f"signing has shape {x.shape}, expected ({k},)")
    if not np.all(np.abs(x) == 1.0):
        raise ValueError("signing entries must be ±1")
    return x


def _ratio_sweep(gens, x, idx_iter, modulus, keep_samples):
    best = (-1.0, 0, 0.0, 1.0)  # ratio, index, num, den
    traces = []
    for idx in idx_iter:
        w = half_angle_sin2(gens, idx, modulus)
        num = 2.0 * (w @ x)
        den = 2.0 * w.sum(axis=1)
        ratio = np.abs(num) / den
        i = int(np.argmax(ratio))
        if ratio[i] > best[0]:
            best = (float(ratio[i]), int(idx[i]), float(num[i]), float(den[i]))
        if keep_samples:
            traces.append(np.column_stack([2.0 * np.pi * idx / modulus, num, den]))
    return best, traces


def spectral_ratio(g: CirculantGraph, x, mode: str = "exact", grid_oversample: int = 32,
                   keep_samples: bool = False) -> SpectralErrorReport:
    """max_θ |Σ x_s (1 - cos a_sθ)| / Σ (1 - cos a_sθ).

    ``exact`` sweeps θ_j = 2πj/n, j = 1..n-1.  ``grid`` sweeps M =
    grid_oversample·max(a) uniform angles in (0, 2π), adds the θ → 0 limit
    |Σ x_s a_s²| / Σ a_s², and reports the Bernstein inflation factor for the
    degree-max(a) numerator alongside the grid maximum.
    """
    x = _as_signing(x, g.k)
    gens = np.array(g.gens, dtype=np.int64)
    if mode == "exact":
        _check_int64(g.n, g.gens)
        (ratio, j, num, den), traces = _ratio_sweep(gens, x, _chunks(1, g.n, g.k), g.n, keep_samples)
        samples = np.vstack(traces) if keep_samples else np.array([[2 * np.pi * j / g.n, num, den]])
        return SpectralErrorReport(ratio, 2 * np.pi * j / g.n, "exact", samples)
    if mode != "grid":
        raise ValueError(f"unknown mode {mode!r}")
    if grid_oversample < 8:
        raise ValueError("grid_oversample must be at least 8")
    amax = int(gens.max())
    m = int(grid_oversample) * amax
    _check_int64(m, g.gens)
    (ratio, j, num, den), traces = _ratio_sweep(gens, x, _chunks(1, m, g.k), m, keep_samples)
    theta = 2 * np.pi * j / m
    a2 = gens.astype(float) ** 2
    lim_num, lim_den = float(a2 @ x), float(a2.sum())
    lim = abs(lim_num) / lim_den
    if lim > ratio:
        ratio, theta, num, den = lim, 0.0, lim_num, lim_den
    samples = np.array([[theta, num, den]])
    if keep_samples:
        samples = np.vstack([np.array([[0.0, lim_num, lim_den]])] + traces)
    inflation = 1.0 / (1.0 - 2.0 * np.pi * amax / m)
    return SpectralErrorReport(ratio, theta, "grid", samples, inflation, ratio * inflation)


def er_degree_lower_bound(n: int, d: float) -> float:
    """Any graph with n vertices and average degree d has an edge with er ≥ (2/d)(1 - 1/n)."""
    if n < 2 or d <= 0:
        raise ValueError("need n >= 2 and d > 0")
    return (2.0 / d) * (1.0 - 1.0 / n)


def partition_error_floor(d: int) -> float:
    """No split of a d-regular graph achieves relative error below 1/(2√d)."""
    if d < 1:
        raise ValueError("d must be positive")
    return 1.0 / (2.0 * math.sqrt(d))
