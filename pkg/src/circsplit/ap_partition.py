"""Balanced signing of arithmetic-progression generators a + s·b, s = 1..k.

The signing is built by iterated partial coloring against two families of
rows: trigonometric rows (cos sθ, sin sθ) on the grid θ = 2πj/(7k), which
control angles where bθ is far from 0, and monomial rows (s/k)^l, which
control the Taylor expansion where bθ is near 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import NamedTuple

import numpy as np

from .discrepancy import ConstraintSystem, iterate_to_full_signing
from .errors import InvalidSpec, ThetaNotInTheta2
from .spectral import (
    CirculantGraph,
    SpectralErrorReport,
    canonical_circulant,
    fold_residue,
    spectral_ratio,
)

ALPHA = 0.9
TWO_PI = 2.0 * math.pi
# exact verification up to this many angles per generator
_EXACT_LIMIT_PER_GEN = 10**6


@dataclass(frozen=True)
class APGenerators:
    """Generators ±(a + s·b) mod n for s = 1..k."""

    a: int
    b: int
    k: int
    n: int

    def __post_init__(self) -> None:
        if self.k < 1 or self.b < 1 or self.a < 0 or self.n < 3:
            raise InvalidSpec(f"need a >= 0, b >= 1, k >= 1, n >= 3; got {self}")
        folded = [fold_residue(r, self.n) for r in self.residues]
        if any(r == 0 for r in folded):
            raise InvalidSpec("a progression term is 0 mod n")
        if any(2 * r == self.n for r in folded):
            raise InvalidSpec("a progression term equals n/2")
        if len(set(folded)) != self.k:
            raise InvalidSpec("progression terms collide after folding ±r mod n")
        if reduce(math.gcd, folded, self.n) != 1:
            raise InvalidSpec("progression does not generate Z_n")

    @property
    def residues(self) -> list[int]:
        return [(self.a + s * self.b) % self.n for s in range(1, self.k + 1)]

    def graph(self) -> CirculantGraph:
        return canonical_circulant(self.n, self.residues)

    def to_graph_order(self, x) -> np.ndarray:
        """Reorder a signing indexed by s into the sorted generator order."""
        folded = np.array([fold_residue(r, self.n) for r in self.residues])
        return np.asarray(x)[np.argsort(folded, kind="stable")]


@dataclass(frozen=True)
class AlgoConfig:
    """Parameters of the iterated partial coloring.

    ``asymptotic(k)`` uses L = ⌈38·log2 k⌉ and stop_threshold = 32(L+1). For any
    k below a few thousand those constants stop before the first round, so
    ``desk(k)`` is the default: monomial rows up to the cubic term (the
    Taylor orders that dominate near bθ ≈ 1/k; fewer for k < 14), trig bands
    at coef 2 without the budget check, and rounds continue while at least
    2(L+1) coordinates are alive. A round holds the L+1 monomial rows fixed,
    so it can always freeze half of those.
    """

    L: int
    delta: float
    stop_threshold: int
    alpha: float = ALPHA
    budget_lambda: float = 50.0
    budget_moment: float = 33.0
    threshold_coef: float = 7.0
    strict: bool = True
    step: float = 0.05
    restart_cap: int | None = None

    def __post_init__(self) -> None:
        if self.alpha != ALPHA:
            raise InvalidSpec(f"alpha is fixed at {ALPHA}")
        if self.L < 0 or self.stop_threshold < 0:
            raise InvalidSpec("L and stop_threshold must be nonnegative")
        if not 0.0 < self.delta < 0.5:
            raise InvalidSpec("delta must lie in (0, 1/2)")

    @classmethod
    def asymptotic(cls, k: int) -> "AlgoConfig":
        L = max(1, math.ceil(38 * math.log2(max(k, 2))))
        return cls(L=L, delta=1.0 / max(k, 3), stop_threshold=32 * (L + 1))

    @classmethod
    def desk(cls, k: int) -> "AlgoConfig":
        # small k drops monomial orders so at least one round runs
        L = min(3, max(0, (k - 2) // 4))
        return cls(
            L=L,
            delta=1.0 / max(k, 3),
            stop_threshold=2 * (L + 1) - 1,
            threshold_coef=2.0,
            strict=False,
        )


@dataclass(frozen=True)
class ConditionReport:
    lambda_max: float
    moment_max: float
    passes: tuple[bool, bool]
    lambda_budget: float
    moment_budget: float

    @property
    def ok(self) -> bool:
        return all(self.passes)

    def to_dict(self) -> dict:
        return {
            "lambda_max": self.lambda_max,
            "moment_max": self.moment_max,
            "passes": list(self.passes),
            "lambda_budget": self.lambda_budget,
            "moment_budget": self.moment_budget,
        }


class ThetaClass(NamedTuple):
    region: str  # "Theta1" or "Theta2"
    theta_hat: float


class TaylorSplit(NamedTuple):
    beta1: float
    beta2: float
    beta3: float
    beta1p: float
    beta2p: float
    beta3p: float


class APResult(NamedTuple):
    signing: np.ndarray
    conditions: ConditionReport
    spectral: SpectralErrorReport


def _grid_trig(k: int, modulus: int) -> tuple[np.ndarray, np.ndarray]:
    """cos and sin of s·2πj/modulus for j = 0..modulus-1, s = 1..k (rows j)."""
    r = np.multiply.outer(np.arange(modulus, dtype=np.int64), np.arange(1, k + 1, dtype=np.int64)) % modulus
    ang = TWO_PI * r / modulus
    return np.cos(ang), np.sin(ang)


def monomial_rows(k: int, L: int) -> np.ndarray:
    s = np.arange(1, k + 1) / k
    return np.vstack([s**l for l in range(L + 1)])


def trig_threshold(k: int, a_t: int, coef: float = 7.0) -> float:
    """Absolute band coef·√(a_t·ln(14k/a_t)) for the trigonometric rows."""
    return coef * math.sqrt(a_t * math.log(14.0 * k / a_t))


def ap_schedule(k: int, L: int, coef: float = 7.0):
    """Relative thresholds for sub-vectors restricted to a_t alive coordinates."""
    n_trig = 14 * k

    def schedule(a_t: int, sub: np.ndarray) -> np.ndarray:
        norms = np.linalg.norm(sub, axis=1)
        c = np.zeros(sub.shape[0])
        trig = norms[:n_trig]
        with np.errstate(divide="ignore"):
            c[:n_trig] = np.where(trig > 0, trig_threshold(k, a_t, coef) / trig, np.inf)
        # monomial rows are held at zero discrepancy
        c[n_trig:] = 0.0
        return c

    return schedule


def build_constraint_system(k: int, L: int, coef: float = 7.0) -> ConstraintSystem:
    """14k trigonometric rows followed by L+1 monomial rows, thresholds at a_t = k."""
    if k < 2:
        raise InvalidSpec("the constraint family needs k >= 2")
    cos_rows, sin_rows = _grid_trig(k, 7 * k)
    v = np.vstack([cos_rows, sin_rows, monomial_rows(k, L)])
    return ConstraintSystem(v, ap_schedule(k, L, coef)(k, v))


def classify_theta(theta: float, b: int, k: int, alpha: float = ALPHA) -> ThetaClass:
    """Theta1 iff bθ mod 2π lies in (α/k, 2π - α/k); also returns θ̂ in (-π, π]."""
    th = math.remainder(b * theta, TWO_PI)
    if th == -math.pi:
        th = math.pi
    region = "Theta1" if abs(th) > alpha / k else "Theta2"
    return ThetaClass(region, th)


def classify_index(j: int, n: int, b: int, k: int, alpha: float = ALPHA) -> ThetaClass:
    """classify_theta for θ = 2πj/n with the reduction done on integers."""
    r = (j * b) % n
    if 2 * r > n:
        r -= n
    th = TWO_PI * r / n
    region = "Theta1" if abs(th) > alpha / k else "Theta2"
    return ThetaClass(region, th)


def fk_eval(k: int, theta_hat: float) -> float:
    """(Σ_s cos sθ̂)² + (Σ_s sin sθ̂)² via the geometric-sum closed forms."""
    half = math.sin(theta_hat / 2.0)
    if abs(half) < 1e-12:
        s = np.arange(1, k + 1) * theta_hat
        return float(np.cos(s).sum() ** 2 + np.sin(s).sum() ** 2)
    c = -0.5 + math.sin((k + 0.5) * theta_hat) / (2.0 * half)
    s = (1.0 - math.cos(k * theta_hat)) / (2.0 * math.tan(theta_hat / 2.0)) + math.sin(k * theta_hat) / 2.0
    return c * c + s * s


def lambda_condition_check(x, k: int, budget_lambda: float = 50.0) -> tuple[float, bool]:
    """Max of |Σ x_s cos sθ̂| and |Σ x_s sin sθ̂| over θ̂ = 2πj/(7k)."""
    x = np.asarray(x, dtype=float)
    cos_rows, sin_rows = _grid_trig(k, 7 * k)
    val = float(max(np.abs(cos_rows @ x).max(), np.abs(sin_rows @ x).max()))
    return val, val <= budget_lambda * math.sqrt(k)


def moment_budget_scale(k: int) -> float:
    # log2(1) = 0 would make the k = 1 budget vacuous-but-failing
    return max(math.log2(k), 1.0)


def moment_condition_check(x, k: int, L: int, budget_moment: float = 33.0) -> tuple[float, bool]:
    """max over l = 0..L of |Σ x_s (s/k)^l|."""
    x = np.asarray(x, dtype=float)
    val = float(np.abs(monomial_rows(k, L) @ x).max())
    return val, val <= budget_moment * moment_budget_scale(k)


def condition_report(x, k: int, cfg: AlgoConfig) -> ConditionReport:
    lam, lam_ok = lambda_condition_check(x, k, cfg.budget_lambda)
    mom, mom_ok = moment_condition_check(x, k, cfg.L, cfg.budget_moment)
    return ConditionReport(
        lam, mom, (lam_ok, mom_ok),
        cfg.budget_lambda * math.sqrt(k), cfg.budget_moment * moment_budget_scale(k),
    )


def taylor_split(x, spec: APGenerators, theta: float, alpha: float = ALPHA) -> TaylorSplit:
    """β sums at θ̂ for the signing x and for x ≡ 1 (primed)."""
    cls = classify_theta(theta, spec.b, spec.k, alpha)
    if cls.region != "Theta2":
        raise ThetaNotInTheta2(f"θ = {theta} lies in Theta1 for b = {spec.b}, k = {spec.k}")
    x = np.asarray(x, dtype=float)
    st = np.arange(1, spec.k + 1) * cls.theta_hat
    one_minus_cos = 2.0 * np.sin(st / 2.0) ** 2
    sin_s = np.sin(st)
    return TaylorSplit(
        float(one_minus_cos @ x), float(sin_s @ x), float(x.sum()),
        float(one_minus_cos.sum()), float(sin_s.sum()), float(spec.k),
    )


def g_combination(beta, a: int, theta: float) -> float:
    """Σ x_s(1 - cos((a+sb)θ)) rebuilt from (β1, β2, β3) at phase aθ."""
    phi = math.remainder(a * theta, TWO_PI)
    return math.cos(phi) * beta[0] + math.sin(phi) * beta[1] + 2.0 * math.sin(phi / 2.0) ** 2 * beta[2]


def default_mode(spec: APGenerators) -> str:
    return "exact" if spec.n <= _EXACT_LIMIT_PER_GEN * spec.k else "grid"


def partition_ap(
    spec: APGenerators,
    cfg: AlgoConfig | None = None,
    rng: np.random.Generator | None = None,
    mode: str | None = None,
    grid_oversample: int = 32,
) -> APResult:
    """Sign the progression terms, check both sufficient conditions, verify.

    The signing is indexed by s (term a + s·b); the spectral report is for
    X(Z_n, ±{a + s·b}).
    """
    k = spec.k
    cfg = cfg or AlgoConfig.desk(k)
    rng = rng if rng is not None else np.random.default_rng(0)
    g = spec.graph()
    if k == 1:
        x = np.ones(1, dtype=np.int64)
    else:
        vectors = build_constraint_system(k, cfg.L, cfg.threshold_coef).vectors
        x = iterate_to_full_signing(
            vectors,
            ap_schedule(k, cfg.L, cfg.threshold_coef),
            cfg.delta,
            cfg.stop_threshold,
            rng,
            cfg.restart_cap,
            strict=cfg.strict,
            step=cfg.step,
        )
    report = spectral_ratio(g, spec.to_graph_order(x), mode or default_mode(spec), grid_oversample)
    return APResult(x, condition_report(x, k, cfg), report)


def signing_ratio(spec: APGenerators, x, mode: str | None = None) -> SpectralErrorReport:
    """Spectral report of an s-indexed signing."""
    return spectral_ratio(spec.graph(), spec.to_graph_order(x), mode or default_mode(spec))


def exhaustive_optimum(spec: APGenerators) -> tuple[float, np.ndarray]:
    """Best exact ratio over all 2^(k-1) sign classes (x and -x tie)."""
    g = spec.graph()
    k = spec.k
    best, best_x = math.inf, None
    for mask in range(1 << (k - 1)):
        x = np.ones(k, dtype=np.int64)
        for s in range(1, k):
            if mask >> (s - 1) & 1:
                x[s] = -1
        r = spectral_ratio(g, spec.to_graph_order(x)).max_ratio
        if r < best:
            best, best_x = r, x
    return best, best_x
