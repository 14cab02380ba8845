"""Constructive partial coloring and the iterate-to-full-signing driver.

The partial coloring is a Gaussian edge walk: starting at x0, take small
Gaussian steps projected away from frozen coordinates and tight constraints.
Steps are truncated so that no coordinate leaves [-1, 1] and no constraint
leaves its band; whatever the truncation stops at becomes frozen or tight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import InvalidThresholds, RestartCapExceeded

_BAND_SHRINK = 1e-9
_POST_ATOL = 1e-9


@dataclass(frozen=True)
class ConstraintSystem:
    """Rows v_j of dimension n with relative thresholds c_j (bound c_j * |v_j|)."""

    vectors: np.ndarray
    thresholds: np.ndarray

    def __post_init__(self) -> None:
        v = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        c = np.asarray(self.thresholds, dtype=float).reshape(-1)
        if v.shape == (1, 0) and c.size == 0:
            v = np.zeros((0, 0))
        if v.shape[0] != c.shape[0]:
            raise ValueError(f"{v.shape[0]} vectors but {c.shape[0]} thresholds")
        if np.any(c < 0) or np.any(np.isnan(c)):
            raise ValueError("thresholds must be nonnegative")
        object.__setattr__(self, "vectors", v)
        object.__setattr__(self, "thresholds", c)

    @classmethod
    def empty(cls, n: int) -> "ConstraintSystem":
        return cls(np.zeros((0, n)), np.zeros(0))

    @property
    def m(self) -> int:
        return self.vectors.shape[0]

    @property
    def n(self) -> int:
        return self.vectors.shape[1]

    def bounds(self) -> np.ndarray:
        """Absolute bands c_j * |v_j|; infinite thresholds stay infinite."""
        norms = np.linalg.norm(self.vectors, axis=1)
        with np.errstate(invalid="ignore"):
            b = self.thresholds * norms
        b[np.isinf(self.thresholds)] = np.inf
        return b


@dataclass(frozen=True)
class PartialColoringState:
    x: np.ndarray
    alive: np.ndarray
    delta: float
    t: int


def validate_thresholds(thresholds, n_alive: int) -> bool:
    """True iff sum_j exp(-c_j^2/16) <= n_alive/16."""
    c = np.asarray(thresholds, dtype=float).reshape(-1)
    if np.any(c < 0):
        raise ValueError("thresholds must be nonnegative")
    return float(np.exp(-(c**2) / 16.0).sum()) <= n_alive / 16.0


def default_restart_cap(n: int, m: int) -> int:
    return 64 * max(1, math.ceil(math.log(max(n * m, 2))))


def _orthonormal_rows(a: np.ndarray) -> np.ndarray:
    """Orthonormal basis (as columns) of the row space of a."""
    if a.shape[0] == 0:
        return np.zeros((a.shape[1], 0))
    u, s, _ = np.linalg.svd(a.T, full_matrices=False)
    tol = max(a.shape) * np.finfo(float).eps * (s[0] if s.size else 0.0)
    return u[:, s > max(tol, 1e-12)]


def _walk(v, bounds, x0, live, delta, step, max_steps, rng):
    """One edge walk; returns the end point."""
    x = x0.copy()
    n = x.size
    free = live & (np.abs(x) < 1.0 - delta)
    band = bounds * (1.0 - _BAND_SHRINK)
    # rows supported only on frozen coordinates never move
    active = np.abs(v[:, live]).sum(axis=1) > 0 if n else np.zeros(len(bounds), bool)
    tight = active & (band <= 0)
    resid = np.zeros(len(bounds))
    dirty = True
    q = None
    for _ in range(max_steps):
        if dirty:
            fidx = np.flatnonzero(free)
            if fidx.size == 0:
                break
            q = _orthonormal_rows(v[np.ix_(tight, fidx)])
            if q.shape[1] >= fidx.size:
                break
            dirty = False
        g = rng.standard_normal(fidx.size)
        u = g - q @ (q.T @ g)
        d = step * u
        # truncation against the cube
        lim = np.full(fidx.size, np.inf)
        pos, neg = d > 0, d < 0
        xf = x[fidx]
        lim[pos] = (1.0 - xf[pos]) / d[pos]
        lim[neg] = (-1.0 - xf[neg]) / d[neg]
        t = 1.0
        hit_coord = -1
        if lim.size and lim.min() < t:
            hit_coord = int(lim.argmin())
            t = float(lim[hit_coord])
        # truncation against the constraint bands
        hit_row = -1
        watch = np.flatnonzero(active & ~tight & np.isfinite(band))
        if watch.size:
            s = v[np.ix_(watch, fidx)] @ d
            r = resid[watch]
            with np.errstate(divide="ignore", invalid="ignore"):
                up = np.where(s > 0, (band[watch] - r) / s, np.inf)
                dn = np.where(s < 0, (-band[watch] - r) / s, np.inf)
            rl = np.maximum(np.minimum(up, dn), 0.0)
            j = int(rl.argmin())
            if rl[j] < t:
                t = float(rl[j])
                hit_row = int(watch[j])
                hit_coord = -1
        x[fidx] = np.clip(xf + t * d, -1.0, 1.0)
        if hit_coord >= 0:
            x[fidx[hit_coord]] = math.copysign(1.0, d[hit_coord])
        resid = v @ (x - x0)
        newly_frozen = free & (np.abs(x) >= 1.0 - delta)
        if newly_frozen.any():
            free &= ~newly_frozen
            dirty = True
        if hit_row >= 0:
            tight[hit_row] = True
            dirty = True
        over = active & ~tight & (np.abs(resid) >= band)
        if over.any():
            tight |= over
            dirty = True
    return x


def _postconditions_hold(v, bounds, x0, x, live, delta) -> bool:
    n_live = int(live.sum())
    if np.any(x[~live] != x0[~live]):
        return False
    if np.any(np.abs(x) > 1.0):
        return False
    if 2 * int((np.abs(x[live]) >= 1.0 - delta).sum()) < n_live:
        return False
    if v.shape[0] == 0:
        return True
    dev = np.abs(v @ (x - x0))
    # zero bands can only be met up to rounding in the projection
    slack = _POST_ATOL * np.linalg.norm(v, axis=1)
    return bool(np.all(dev <= bounds + slack))


def partial_color(
    sys: ConstraintSystem,
    x0,
    delta: float,
    rng: np.random.Generator,
    restart_cap: int | None = None,
    *,
    strict: bool = True,
    step: float = 0.05,
    max_steps: int | None = None,
) -> np.ndarray:
    """Move x0 so at least half its alive coordinates reach |x| >= 1-delta
    while every |<v_j, x-x0>| stays within c_j * |v_j|.

    Coordinates with |x0| >= 1-delta are frozen and returned unchanged.
    With strict=True the threshold budget is validated first.
    """
    if not 0.0 < delta < 0.5:
        raise ValueError("delta must lie in (0, 1/2)")
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if x0.size != sys.n:
        raise ValueError(f"x0 has length {x0.size}, system dimension is {sys.n}")
    if np.any(np.abs(x0) > 1.0):
        raise ValueError("x0 must lie in [-1, 1]^n")
    live = np.abs(x0) < 1.0 - delta
    n_live = int(live.sum())
    if strict and not validate_thresholds(sys.thresholds, n_live):
        raise InvalidThresholds(
            f"sum exp(-c^2/16) exceeds {n_live}/16 for {sys.m} constraints"
        )
    if n_live == 0:
        return x0.copy()
    if restart_cap is None:
        restart_cap = default_restart_cap(sys.n, max(sys.m, 1))
    if max_steps is None:
        max_steps = int(math.ceil(16.0 / step**2))
    bounds = sys.bounds()
    for _ in range(restart_cap):
        child = rng.spawn(1)[0]
        x = _walk(sys.vectors, bounds, x0, live, delta, step, max_steps, child)
        if _postconditions_hold(sys.vectors, bounds, x0, x, live, delta):
            return x
    raise RestartCapExceeded(f"no valid partial coloring after {restart_cap} attempts")


Schedule = Callable[[int, np.ndarray], np.ndarray]


def iterate_to_full_signing(
    vectors,
    schedule: Schedule,
    delta: float,
    stop_threshold: int,
    rng: np.random.Generator,
    restart_cap: int | None = None,
    *,
    strict: bool = True,
    step: float = 0.05,
    history: list | None = None,
) -> np.ndarray:
    """Repeat partial coloring on the alive coordinates, then round to signs.

    schedule(a_t, sub_vectors) returns relative thresholds for the rows
    restricted to the a_t alive coordinates. Once a_t <= stop_threshold the
    remaining alive coordinates are signed +1 and the rest rounded to sign.
    """
    v = np.atleast_2d(np.asarray(vectors, dtype=float))
    n = v.shape[1]
    x = np.zeros(n)
    t = 0
    while True:
        alive = np.abs(x) < 1.0 - delta
        a_t = int(alive.sum())
        if history is not None:
            history.append(PartialColoringState(x.copy(), np.flatnonzero(alive), delta, t))
        if a_t <= stop_threshold or a_t == 0:
            break
        sub = v[:, alive]
        c = np.asarray(schedule(a_t, sub), dtype=float)
        x_sub = partial_color(
            ConstraintSystem(sub, c), x[alive], delta, rng, restart_cap,
            strict=strict, step=step,
        )
        x[alive] = x_sub
        t += 1
    out = np.where(x >= 0, 1, -1).astype(np.int64)
    out[np.abs(x) < 1.0 - delta] = 1
    return out
