"""Theoretical error-bound constants, the bound curve, and rate fitting.

The strong-L2 bound for the left-endpoint integral sum has two branches:

    generic  (gamma < alpha/2):  D * C * ||h||^2 * n^(-(1 + 2 gamma/alpha))
    boundary (gamma = alpha/2):  D * ||h||^2 * n^(-2) * ln n

with D = 8 c_T^2 T^(2 + 2 gamma/alpha) * (2 gamma-moment of Q) and C the
maximum of (1 - 2g/a)^(-1) (2g/a)^(-1) and the integer maximum of
(ln n)^2 / n^(1 - 2g/a).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DegenerateFit, UndefinedAtBoundary
from .model import DensityBoundCertificate, q_moment

__all__ = [
    "TheoryBound",
    "FitResult",
    "c_gamma_alpha",
    "log_term_maximum",
    "d_constant",
    "theoretical_bound",
    "bm_linear_mse_oracle",
    "fit_rate",
    "export_bound_curve",
]

_SCAN_LIMIT = 4_000_000


def _ratio(gamma: float, alpha: float) -> float:
    if not (0.0 < alpha <= 2.0):
        raise ValueError(f"alpha must lie in (0, 2], got {alpha}")
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    r = 2.0 * gamma / alpha
    if r == 1.0:
        raise UndefinedAtBoundary(
            "the generic-branch constant is undefined at gamma = alpha/2"
        )
    if r > 1.0:
        raise ValueError(f"gamma={gamma:g} exceeds alpha/2={alpha / 2:g}")
    return r


def log_term_maximum(gamma: float, alpha: float):
    """Integer maximum of (ln n)^2 / n^(1 - 2 gamma/alpha): (argmax, value).

    The continuous function rises to its single peak at x* = e^(2/(1-r))
    and falls thereafter (its log-derivative is (2 - (1-r) ln x)/x,
    positive below x* and negative above), so an exact scan up to a little
    past x* settles the integer maximum.  When x* is too large to scan,
    unimodality reduces the candidates to floor(x*) and ceil(x*).
    """
    r = _ratio(gamma, alpha)
    x_star = math.exp(2.0 / (1.0 - r))
    cutoff = 10 * math.ceil(x_star)
    if cutoff <= _SCAN_LIMIT:
        n = np.arange(1, cutoff + 1, dtype=float)
        vals = np.log(n) ** 2 / n ** (1.0 - r)
        k = int(np.argmax(vals))
        return k + 1, float(vals[k])
    candidates = sorted({max(1, math.floor(x_star)), math.ceil(x_star)})
    best = max(candidates, key=lambda m: math.log(m) ** 2 / m ** (1.0 - r))
    return best, math.log(best) ** 2 / best ** (1.0 - r)


def c_gamma_alpha(gamma: float, alpha: float) -> float:
    """max{(1-2g/a)^(-1) (2g/a)^(-1), max_n (ln n)^2 / n^(1-2g/a)}.

    Defined only for 0 < gamma < alpha/2; at the boundary the first term
    diverges and UndefinedAtBoundary is raised.  Depends on gamma, alpha
    only through the ratio 2*gamma/alpha.
    """
    r = _ratio(gamma, alpha)
    first = 1.0 / ((1.0 - r) * r)
    _, scanned = log_term_maximum(gamma, alpha)
    return max(first, scanned)


def d_constant(cert: DensityBoundCertificate, T: float, gamma: float) -> float:
    """8 c_T^2 T^(2 + 2 gamma/alpha) * integral of |z|^(2 gamma) Q(z) dz."""
    if T <= 0:
        raise ValueError(f"T must be positive, got {T}")
    moment = q_moment(cert, gamma)  # InfiniteMoment propagates
    return 8.0 * cert.c_T**2 * T ** (2.0 + 2.0 * gamma / cert.alpha) * moment


@dataclass(frozen=True)
class TheoryBound:
    """Evaluated constants of the strong-L2 bound for one experiment."""

    gamma: float
    alpha: float
    horizon: float
    holder_norm: float
    d_value: float
    c_value: Optional[float]
    branch: str  # "generic" | "boundary"

    def __post_init__(self):
        if self.branch not in ("generic", "boundary"):
            raise ValueError(f"unknown branch {self.branch!r}")
        if self.branch == "generic" and (self.c_value is None or self.c_value < 1.0):
            raise ValueError("generic branch requires c_value >= 1")
        if self.branch == "boundary" and self.c_value is not None:
            raise ValueError("boundary branch carries no c constant")
        if self.d_value <= 0:
            raise ValueError("d_value must be positive")

    @classmethod
    def for_certificate(
        cls,
        cert: DensityBoundCertificate,
        gamma: float,
        holder_norm: float,
        T: Optional[float] = None,
    ) -> "TheoryBound":
        T = cert.horizon if T is None else T
        boundary = 2.0 * gamma == cert.alpha
        return cls(
            gamma=gamma,
            alpha=cert.alpha,
            horizon=T,
            holder_norm=holder_norm,
            d_value=d_constant(cert, T, gamma),
            c_value=None if boundary else c_gamma_alpha(gamma, cert.alpha),
            branch="boundary" if boundary else "generic",
        )

    def exponent(self) -> float:
        """Power-law exponent of the bound (the boundary branch also
        carries a ln n factor on top of n^-2)."""
        if self.branch == "boundary":
            return -2.0
        return -(1.0 + 2.0 * self.gamma / self.alpha)


def theoretical_bound(tb: TheoryBound, n: int) -> float:
    """The bound evaluated at grid level n (>= 1).

    The boundary branch is literally D ||h||^2 n^-2 ln n, which vanishes at
    n = 1; experiments therefore use n >= 2 in that branch.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    norm_sq = tb.holder_norm**2
    if tb.branch == "boundary":
        return tb.d_value * norm_sq * math.log(n) / n**2
    return tb.d_value * tb.c_value * norm_sq * float(n) ** tb.exponent()


def bm_linear_mse_oracle(T: float, n: int) -> float:
    """Exact E|int_0^T W_t dt - (T/n) sum_k W_(kT/n)|^2 = T^3 / (3 n^2).

    Derivation: the error is the sum over the n grid intervals of
    int (W_t - W_(t_k)) dt; these terms are independent (they depend on
    disjoint increments), each with variance
    int_0^D int_0^D min(s, t) ds dt = D^3/3 for D = T/n, and n * D^3/3
    = T^3/(3 n^2).  Scale by sigma^2 * slope^2 for sigma W and h = slope*x.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return T**3 / (3.0 * n * n)


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r2: float
    slope_stderr: float


def fit_rate(summary, n_min: Optional[int] = None) -> FitResult:
    """Weighted least squares of log(mse) on log(n).

    Weights are 1/(std_error/mse)^2, the delta-method inverse variance of
    log(mse).  Rows with n < n_min are dropped (default n_min: the
    second-smallest level, trimming pre-asymptotic bias); rows with
    mse = 0 are unusable.  Raises DegenerateFit with fewer than 3 usable
    rows.
    """
    rows = list(summary.rows)
    if n_min is None:
        ns = sorted({r.n for r in rows})
        n_min = ns[1] if len(ns) >= 2 else ns[0]
    usable = [r for r in rows if r.n >= n_min and r.mse > 0]
    if len(usable) < 3:
        raise DegenerateFit(
            f"need >= 3 rows with n >= {n_min} and mse > 0, have {len(usable)}"
        )
    x = np.log([r.n for r in usable])
    y = np.log([r.mse for r in usable])
    rel = np.array([r.std_error / r.mse for r in usable])
    known_var = bool(rel.min() > 0)
    w = 1.0 / rel**2 if known_var else np.ones_like(x)
    X = np.column_stack([x, np.ones_like(x)])
    WX = X * w[:, None]
    cov = np.linalg.inv(X.T @ WX)
    beta = cov @ (WX.T @ y)
    resid = y - X @ beta
    if known_var:
        slope_var = cov[0, 0]
    else:
        dof = max(len(usable) - 2, 1)
        slope_var = cov[0, 0] * float(w @ resid**2) / dof
    ybar = float(w @ y) / float(w.sum())
    ss_tot = float(w @ (y - ybar) ** 2)
    ss_res = float(w @ resid**2)
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return FitResult(
        slope=float(beta[0]),
        intercept=float(beta[1]),
        r2=r2,
        slope_stderr=math.sqrt(max(slope_var, 0.0)),
    )


def export_bound_curve(tb: TheoryBound, ns: Sequence[int]) -> str:
    """Bound curve in the ErrorSummary CSV schema, for joint plotting."""
    lines = ["n,mse,std_error,M,bound,certified"]
    for n in ns:
        lines.append(f"{int(n)},,,,{theoretical_bound(tb, int(n))!r},true")
    return "\n".join(lines) + "\n"
