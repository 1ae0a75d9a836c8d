"""Constrained second-moment machinery for the balanced partition function.

The large-deviation functional over pair-overlap measures mu on [q]^2 is

    phi2(beta, kappa, q, mu) = s(mu)
        + (kappa/2) ln(1 - 2(1-e^-beta)/q + (1-e^-beta)^2 sum mu^2),

with s(mu) the Shannon entropy (0 ln 0 := 0).  At the uniform measure it
equals twice the annealed pressure.  The one-parameter-per-row family

    mu_{k,t}: rows r1 <= k uniform; rows r1 > k put t q^-2 on column 0 and
              (q-t)/(q-1) q^-2 elsewhere,

gives the closed form (x = x(beta, q), E(t) = t ln t + (q-t) ln((q-t)/(q-1)))

    Phi2(beta,c,q,k,t) - 2P = (c/2) ln(1 + x^2 (q-k)(t-1)^2 / (q(q-1)))
                              - (q-k) E(t) / q^2,

which matches phi2(mu_{k,t}) identically for integer k and extends to real
k as a pure optimization parameter.  Rescaling with the multiplier
lambda = x^2 (q-1)^2 maps the positive-temperature gap exactly onto the
zero-temperature one:

    lambda (Phi2(beta,c,q,k,t) - 2P(beta,c))
        = Phi2(inf, lambda c, q, q - lambda (q-k), t) - 2P(inf, lambda c),

because x(inf, q) = 1/(q-1) absorbs lambda in both the energy and entropy
terms.  The zero-t optimum is guaranteed (t* = 1, zero gap) whenever the
effective zero-temperature connectivity x^2 q^2 c stays below 2 q ln q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bounds import annealed_pressure, beta_1, beta_rs_loc, x_param

CERTIFIED_TOL = 1e-9
GRID_POINTS = 401


@dataclass(frozen=True)
class OverlapMeasure:
    """Probability mass function on [q]^2, stored as a q x q array."""

    mass: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mass, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("overlap measure must be a square array")
        if np.any(m < -1e-15):
            raise ValueError("overlap measure entries must be >= 0")
        if abs(m.sum() - 1.0) > 1e-12:
            raise ValueError("overlap measure must sum to 1")
        object.__setattr__(self, "mass", m)

    @property
    def q(self) -> int:
        return self.mass.shape[0]

    def has_uniform_marginals(self, tol: float = 1e-12) -> bool:
        """Membership test for the doubly balanced class M_*([q]^2)."""
        target = 1.0 / self.q
        return bool(
            np.all(np.abs(self.mass.sum(axis=0) - target) <= tol)
            and np.all(np.abs(self.mass.sum(axis=1) - target) <= tol)
        )


@dataclass(frozen=True)
class SecondMomentResult:
    t_star: float
    k_star: float
    max_gap: float
    certified: bool


def uniform_overlap(q: int) -> OverlapMeasure:
    return OverlapMeasure(np.full((q, q), 1.0 / q**2))


def _y(beta: float) -> float:
    if not beta >= 0:
        raise ValueError("beta must be >= 0")
    return 1.0 if beta == math.inf else -math.expm1(-beta)


def phi2(beta: float, kappa: float, q: int, mu: OverlapMeasure) -> float:
    """Entropy plus energy of a pair-overlap measure; beta = inf allowed."""
    if mu.q != q:
        raise ValueError(f"measure is on [{mu.q}]^2, expected [{q}]^2")
    y = _y(beta)
    m = mu.mass
    nz = m[m > 0]
    entropy = -float(np.dot(nz, np.log(nz)))
    return entropy + 0.5 * kappa * math.log(
        1.0 - 2.0 * y / q + y * y * float((m * m).sum())
    )


def mu_kt(q: int, k: float, t: float) -> OverlapMeasure:
    """The row-structured family member for integer k.

    Non-integer k does not define a measure (k enters Phi2_kt as a real
    parameter only), so it is rejected here.
    """
    if not (0 <= t <= q):
        raise ValueError(f"t must lie in [0, {q}], got {t}")
    if not (0 <= k <= q):
        raise ValueError(f"k must lie in [0, {q}], got {k}")
    if abs(k - round(k)) > 1e-12:
        raise ValueError(
            f"mu_kt is a measure only for integer k (got {k}); "
            "use Phi2_kt directly for real k"
        )
    kk = int(round(k))
    mass = np.empty((q, q))
    mass[:kk, :] = 1.0 / q**2
    mass[kk:, 0] = t / q**2
    mass[kk:, 1:] = (q - t) / (q - 1.0) / q**2
    return OverlapMeasure(mass)


def _row_entropy(t: float, q: int) -> float:
    """E(t) = t ln t + (q - t) ln((q - t)/(q - 1)), with 0 ln 0 := 0."""
    first = t * math.log(t) if t > 0 else 0.0
    second = (q - t) * math.log((q - t) / (q - 1.0)) if q - t > 0 else 0.0
    return first + second


def phi2_kt_gap(beta: float, c: float, q: int, k: float, t: float) -> float:
    """Phi2(beta, c, q, k, t) - 2 P(beta, c), computed without cancellation."""
    if not (0 <= t <= q) or not (0 <= k <= q):
        raise ValueError(f"(k, t) must lie in [0, {q}]^2, got ({k}, {t})")
    x = x_param(beta, q)
    energy = 0.5 * c * math.log1p(x * x * (q - k) * (t - 1.0) ** 2 / (q * (q - 1.0)))
    entropy = (q - k) * _row_entropy(t, q) / q**2
    return energy - entropy


def Phi2_kt(beta: float, c: float, q: int, k: float, t: float) -> float:
    """Closed-form phi2(mu_{k,t}); k may be real in [0, q]."""
    return 2.0 * annealed_pressure(beta, c, q) + phi2_kt_gap(beta, c, q, k, t)


def rescale(beta: float, q: int, c: float, k: float) -> tuple[float, float]:
    """Map (c, k) to the zero-temperature pair (C, K).

    With lambda = x^2 (q-1)^2 the identity

        lambda (Phi2(beta,c,q,k,t) - 2P(beta,c))
            = Phi2(inf, C, q, K, t) - 2P(inf, C)

    holds for every t; at beta = inf the map is the identity.
    """
    lam = rescale_multiplier(beta, q)
    return lam * c, q - lam * (q - k)


def rescale_multiplier(beta: float, q: int) -> float:
    """The exact overall multiplier x^2 (q-1)^2 of the rescaling identity."""
    return x_param(beta, q) ** 2 * (q - 1.0) ** 2


def zero_t_connectivity(beta: float, c: float, q: int) -> float:
    """Effective connectivity x^2 q^2 c gating the guaranteed t* = 1 region."""
    return x_param(beta, q) ** 2 * q * q * c


def in_guaranteed_region(beta: float, c: float, q: int) -> bool:
    """True when x^2 q^2 c <= 2 q ln q, where t* = 1 is guaranteed."""
    return zero_t_connectivity(beta, c, q) <= 2.0 * q * math.log(q)


def _gap_grid(beta: float, c: float, q: int, ks: np.ndarray, ts: np.ndarray) -> np.ndarray:
    x = x_param(beta, q)
    k = ks[:, None]
    t = ts[None, :]
    energy = 0.5 * c * np.log1p(x * x * (q - k) * (t - 1.0) ** 2 / (q * (q - 1.0)))
    with np.errstate(divide="ignore", invalid="ignore"):
        tlnt = np.where(t > 0, t * np.log(np.where(t > 0, t, 1.0)), 0.0)
        qmt = q - t
        rest = np.where(qmt > 0, qmt * np.log(np.where(qmt > 0, qmt / (q - 1.0), 1.0)), 0.0)
    return energy - (q - k) * (tlnt + rest) / q**2


def _golden_max(fn, lo: float, hi: float, iters: int = 80) -> tuple[float, float]:
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c1 = b - phi * (b - a)
    c2 = a + phi * (b - a)
    f1, f2 = fn(c1), fn(c2)
    for _ in range(iters):
        if f1 < f2:
            a, c1, f1 = c1, c2, f2
            c2 = a + phi * (b - a)
            f2 = fn(c2)
        else:
            b, c2, f2 = c2, c1, f1
            c1 = b - phi * (b - a)
            f1 = fn(c1)
    xm = 0.5 * (a + b)
    return xm, fn(xm)


def optimize(beta: float, c: float, q: int,
             grid_points: int = GRID_POINTS) -> SecondMomentResult:
    """Maximize Phi2 - 2P over (k, t) in [0, q]^2.

    Dense grid scan first (the maximum can sit on the boundary), then
    alternating golden-section refinement from the best cell.  Argmax ties
    break toward the lowest k, then the lowest t.  certified means the
    refined maximum is <= 1e-9; inside the guaranteed region the grid
    maximum is exactly zero, attained on the t = 1 line.
    """
    ks = np.linspace(0.0, q, grid_points)
    ts = np.linspace(0.0, q, grid_points)
    if not np.any(ts == 1.0):
        # the symmetric point must sit on the grid so that exact zero-gap
        # ties resolve to t = 1 rather than to the degenerate k = q row
        ts = np.sort(np.append(ts, 1.0))
    gaps = _gap_grid(beta, c, q, ks, ts)
    flat = int(np.argmax(gaps))
    ik, it = divmod(flat, len(ts))
    k_best, t_best = float(ks[ik]), float(ts[it])
    gap_best = float(gaps[ik, it])

    def gap_at(kk: float, tt: float) -> float:
        return phi2_kt_gap(beta, c, q, kk, tt)

    dk = q / (grid_points - 1)
    for _ in range(3):
        k_lo, k_hi = max(0.0, k_best - dk), min(float(q), k_best + dk)
        k_best, _ = _golden_max(lambda kk: gap_at(kk, t_best), k_lo, k_hi)
        t_lo, t_hi = max(0.0, t_best - dk), min(float(q), t_best + dk)
        t_best, gap_ref = _golden_max(lambda tt: gap_at(k_best, tt), t_lo, t_hi)
    # prefer the exact symmetric point over a refinement wobble that ties it
    # to within rounding noise
    if abs(t_best - 1.0) < 2 * dk and gap_at(k_best, 1.0) >= gap_ref - 1e-15:
        t_best = 1.0
    gap_best = max(gap_best, gap_ref)
    return SecondMomentResult(
        t_star=t_best,
        k_star=k_best,
        max_gap=gap_best,
        certified=bool(gap_best <= CERTIFIED_TOL),
    )


def ising_gap(beta: float, c: float, theta: float) -> float:
    """Linearized q = 2 bound: H-part plus (c/2) x^2 (2 theta - 1)^2.

    Upper-bounds phi2 - 2P via ln(1 + u) <= u applied to the exact energy
    term (c/2) ln(1 + x^2 (2 theta - 1)^2).  Its second theta-derivative at
    the symmetric point is 4 (c x^2 - 1), so theta = 1/2 goes unstable
    exactly on the beta_rs_loc(c, 2) boundary.
    """
    if not (0.0 <= theta <= 1.0):
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    x = x_param(beta, 2)
    ent = 0.0
    if theta > 0:
        ent -= theta * math.log(2.0 * theta)
    if theta < 1:
        ent -= (1.0 - theta) * math.log(2.0 * (1.0 - theta))
    return ent + 0.5 * c * x * x * (2.0 * theta - 1.0) ** 2


def beta_star_certified(c: float, q: int) -> float:
    """Certified annealed-region boundary: exact for q = 2, a lower bound else."""
    if q == 2:
        return beta_rs_loc(c, 2)
    return beta_1(c, q)
