"""Propagator deconvolution: invert the response/autocorrelation relation.

The impact model writes each one-step mid change as a moving average of past
trade signs with kernel increments g(k) = G(k) - G(k-1):

    m_{t+1} - m_t = sum_{k>=1} g(k) * eps_{t+1-k} + noise_t

Correlating both sides with eps_t gives, for every lag l >= 0,

    D(l) := R(l+1) - R(l) = sum_{k=1..K} g(k) * C(|l-k+1|)

which is the discrete-derivative form of the classical response identity

    R(l) = sum_{0<n<=l} G(n) C(l-n) + sum_{n>0} [G(n+l) - G(n)] C(n).

Solving in increment space keeps the system well-behaved: inverting for G
directly amplifies noise in the measured correlations. The system is solved
by least squares over l = 0..L-1 with K unknowns (K defaults to L/2 so it is
overdetermined), via normal equations with a small ridge fallback when the
conditioning is poor. C is treated as zero beyond its measured max lag,
consistent with short-ranged (integrable) sign correlations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .domain import CurveKind, LagCurve
from .errors import DimensionMismatchError, SingularSystemError

#: condition-number threshold above which the ridge fallback kicks in
RIDGE_CONDITION = 1e10
#: condition-number threshold above which the system is rejected outright
SINGULAR_CONDITION = 1e14
RIDGE_SCALE = 1e-8


def _padded(values: np.ndarray, lag: int) -> float:
    return float(values[lag]) if lag < len(values) else 0.0


def design_matrix(c: LagCurve, L: int, K: int) -> np.ndarray:
    """A[l, k-1] = C(|l - k + 1|) for l = 0..L-1, k = 1..K (zero-padded)."""
    A = np.empty((L, K))
    for l in range(L):
        for k in range(1, K + 1):
            A[l, k - 1] = _padded(c.values, abs(l - k + 1))
    return A


@dataclass(frozen=True)
class KernelSolution:
    """Solved propagator: increments g(1..K) and the cumulative curve.

    ``cumulative`` extends to the response's max lag, flat beyond the
    truncation (increments past K are taken as zero: permanent plateau).
    """

    increments: np.ndarray
    cumulative: LagCurve
    residual_norm: float
    truncation: int

    def __post_init__(self):
        arr = np.array(self.increments, dtype=np.float64)
        arr.setflags(write=False)
        object.__setattr__(self, "increments", arr)

    def plateau(self, lag_from: int, lag_to: Optional[int] = None) -> float:
        """Mean cumulative value over a deep-lag window."""
        hi = self.cumulative.max_lag if lag_to is None else lag_to
        return float(np.mean(self.cumulative.values[lag_from : hi + 1]))


def solve_propagator(c: LagCurve, r: LagCurve, truncation: Optional[int] = None) -> KernelSolution:
    """Recover the propagator from measured autocorrelation and response.

    Differences the response and solves D = A g in the least-squares sense;
    with uncorrelated flow (C = delta) this collapses to g(k) = R(k)-R(k-1),
    i.e. G = R. Raises SINGULAR_SYSTEM when even the ridge-stabilized normal
    equations are hopeless.
    """
    if c.kind is not CurveKind.AUTOCORR:
        raise DimensionMismatchError("first curve must be an autocorrelation", kind=c.kind.value)
    L = r.max_lag
    if L < 1:
        raise DimensionMismatchError("response needs at least lag 1")
    K = truncation if truncation is not None else max(1, L // 2)
    if K < 1 or K > L:
        raise DimensionMismatchError("truncation must lie in 1..max_lag", K=K, L=L)
    if abs(c.value(0) - 1.0) > 1e-9:
        raise DimensionMismatchError("autocorrelation must be 1 at lag 0")

    A = design_matrix(c, L, K)
    d = np.diff(r.values)
    ata = A.T @ A
    atd = A.T @ d
    cond = float(np.linalg.cond(ata))
    if not np.isfinite(cond) or cond > RIDGE_CONDITION:
        ridge = RIDGE_SCALE * float(np.trace(ata))
        if ridge <= 0:
            raise SingularSystemError("normal equations have zero trace")
        ata = ata + ridge * np.eye(K)
        cond = float(np.linalg.cond(ata))
        if not np.isfinite(cond) or cond > SINGULAR_CONDITION:
            raise SingularSystemError("system remains ill-conditioned after ridge",
                                      condition=cond)
    g = np.linalg.solve(ata, atd)
    # residual in response space: forward-mapping the solution reproduces the
    # input R to exactly this norm (the fit itself minimizes the increments)
    residual = float(np.linalg.norm(np.cumsum(A @ g - d)))

    cumulative = np.zeros(L + 1)
    cumulative[1 : K + 1] = np.cumsum(g)
    if L > K:
        cumulative[K + 1 :] = cumulative[K]
    curve = LagCurve(kind=CurveKind.PROPAGATOR, values=cumulative, counts=r.counts)
    return KernelSolution(increments=g, cumulative=curve, residual_norm=residual, truncation=K)


def forward_response(solution: KernelSolution, c: LagCurve) -> LagCurve:
    """Map a solved kernel back to the response it implies.

    Evaluates the response identity exactly, both sums, with the second sum
    truncated where the zero-padded C and the plateaued G kill its terms
    (n beyond c.max_lag, or n >= K where G(n+l) - G(n) = 0).
    """
    G = solution.cumulative.values
    L = solution.cumulative.max_lag
    K = solution.truncation

    def G_at(l: int) -> float:
        return float(G[l]) if l <= L else float(G[L])  # plateau beyond the curve

    values = np.zeros(L + 1)
    n_second = min(K - 1, c.max_lag)
    for l in range(1, L + 1):
        direct = 0.0
        for n in range(1, l + 1):
            direct += G_at(n) * _padded(c.values, l - n)
        cross = 0.0
        for n in range(1, n_second + 1):
            cross += (G_at(n + l) - G_at(n)) * float(c.values[n])
        values[l] = direct + cross
    return LagCurve(kind=CurveKind.RESPONSE, values=values, counts=solution.cumulative.counts)


def bound_lower(r_at: float, n_eff: float) -> float:
    """Large-lag lower bound on the propagator: R(l) / (2 N_eff - 1)."""
    if n_eff < 1:
        raise ValueError(f"n_eff must be >= 1, got {n_eff}")
    return r_at / (2.0 * n_eff - 1.0)


def bound_upper(r_at: float, n_eff: float) -> float:
    """Large-lag upper bound on the propagator (immediate saturation): R(l) / N_eff."""
    if n_eff < 1:
        raise ValueError(f"n_eff must be >= 1, got {n_eff}")
    return r_at / n_eff
