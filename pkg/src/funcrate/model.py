"""Process models and their density-bound certificates.

A certificate packages the constants (c_T, Q) for which the model's
transition density p_t(x, y) and its first two time derivatives are
dominated by

    |d^k/dt^k p_t(x, y)| <= c_T * t^(-k - d/alpha) * Q(t^(-1/alpha) (x - y)),

for t <= T and k = 0, 1, 2.  For the exactly self-similar models supported
here (scaled Brownian motion and the symmetric stable process) these ratios
are functions of the rescaled displacement only, and the certificate
constant is obtained by numeric maximization of the three ratios.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Union

import numpy as np
from scipy import integrate
from scipy.special import gamma as gamma_fn

from .errors import InfiniteMoment

__all__ = [
    "BrownianScaled",
    "SymmetricStable",
    "EulerDiffusion",
    "ProcessModel",
    "GaussianKernel",
    "StableKernel",
    "DensityBoundCertificate",
    "NotCertified",
    "certificate_for",
    "q_moment",
    "transition_density",
]


# ---------------------------------------------------------------------------
# Process models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BrownianScaled:
    """sigma * W_t started at x0, in ``dimension`` independent coordinates."""

    sigma: float = 1.0
    x0: Union[float, tuple] = 0.0
    dimension: int = 1

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.dimension < 1:
            raise ValueError(f"dimension must be >= 1, got {self.dimension}")
        if self.dimension > 1 and np.size(self.x0) not in (1, self.dimension):
            raise ValueError("x0 does not match dimension")

    def alpha(self) -> float:
        return 2.0

    def start_point(self) -> np.ndarray:
        x = np.asarray(self.x0, dtype=float)
        if self.dimension > 1 and x.ndim == 0:
            x = np.full(self.dimension, float(x))
        return np.atleast_1d(x)

    def descriptor(self) -> dict:
        return {
            "kind": "brownian",
            "sigma": self.sigma,
            "x0": self.x0,
            "dimension": self.dimension,
        }


@dataclass(frozen=True)
class SymmetricStable:
    """Symmetric alpha-stable process: X_t = x0 + scale * t^(1/alpha) * S.

    S has characteristic function exp(-|xi|^alpha).  One-dimensional only.
    """

    alpha_index: float
    scale: float = 1.0
    x0: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.alpha_index < 2.0):
            raise ValueError(f"stable index must lie in (0, 2), got {self.alpha_index}")
        if self.scale <= 0:
            raise ValueError(f"scale must be positive, got {self.scale}")

    @property
    def dimension(self) -> int:
        return 1

    def alpha(self) -> float:
        return self.alpha_index

    def start_point(self) -> np.ndarray:
        return np.atleast_1d(float(self.x0))

    def descriptor(self) -> dict:
        return {
            "kind": "stable",
            "alpha": self.alpha_index,
            "scale": self.scale,
            "x0": self.x0,
        }


@dataclass(frozen=True)
class EulerDiffusion:
    """dX = drift(X) dt + diffusion(X) dW, discretized with the Euler scheme.

    The simulated law is approximate, so this model is never certified and
    all theory-bound operations reject it.
    """

    drift: Callable[[float], float]
    diffusion: Callable[[float], float]
    x0: float = 0.0

    @property
    def dimension(self) -> int:
        return 1

    def alpha(self) -> float:
        return 2.0

    def start_point(self) -> np.ndarray:
        return np.atleast_1d(float(self.x0))

    def descriptor(self) -> dict:
        return {
            "kind": "euler",
            "drift": repr(self.drift),
            "diffusion": repr(self.diffusion),
            "x0": self.x0,
        }


ProcessModel = Union[BrownianScaled, SymmetricStable, EulerDiffusion]


# ---------------------------------------------------------------------------
# Dominating kernels Q
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianKernel:
    """Q(z) = c1 * exp(-c2 |z|^2) on R^dim."""

    c1: float
    c2: float
    dim: int = 1

    def __post_init__(self):
        if self.c1 <= 0 or self.c2 <= 0:
            raise ValueError("Gaussian kernel needs positive c1, c2")

    @classmethod
    def normalized(cls, c2: float, dim: int = 1) -> "GaussianKernel":
        """Kernel with c1 fixed so the total mass is 1."""
        return cls(c1=(c2 / math.pi) ** (dim / 2.0), c2=c2, dim=dim)

    def pdf(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        sq = z * z if self.dim == 1 else np.sum(z * z, axis=-1)
        return self.c1 * np.exp(-self.c2 * sq)

    def total_mass(self) -> float:
        # Radial quadrature; exact answer is c1 * (pi/c2)^(dim/2).
        d = self.dim
        surface = float(2.0 * math.pi ** (d / 2.0) / gamma_fn(d / 2.0))
        val, _ = integrate.quad(
            lambda r: surface * r ** (d - 1) * self.c1 * math.exp(-self.c2 * r * r),
            0.0,
            np.inf,
            epsabs=1e-12,
        )
        return val

    def moment(self, gamma: float) -> float:
        """Integral of |z|^(2*gamma) Q(z) dz, in closed form."""
        d = self.dim
        return float(
            self.c1
            * math.pi ** (d / 2.0)
            * self.c2 ** (-gamma - d / 2.0)
            * gamma_fn(gamma + d / 2.0)
            / gamma_fn(d / 2.0)
        )

    def descriptor(self) -> dict:
        return {"kind": "gaussian", "c1": self.c1, "c2": self.c2, "dim": self.dim}


@dataclass(frozen=True)
class StableKernel:
    """Standard symmetric alpha-stable density (cf exp(-|xi|^alpha)), d = 1."""

    alpha: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 2.0):
            raise ValueError(f"stable index must lie in (0, 2), got {self.alpha}")

    @property
    def dim(self) -> int:
        return 1

    def pdf(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        flat = np.abs(z).ravel()
        out = np.array([_stable_q(self.alpha, w) for w in flat])
        return out.reshape(z.shape) if z.shape else float(out[0])

    def total_mass(self) -> float:
        cut = 100.0
        val, _ = integrate.quad(
            lambda w: _stable_q(self.alpha, w),
            0.0,
            cut,
            limit=400,
            epsabs=1e-11,
            points=[1.0, 10.0],
        )
        return 2.0 * (val + _stable_tail_integral(self.alpha, cut))

    def moment(self, gamma: float) -> float:
        """Fractional moment E|S|^(2*gamma); finite only for 2*gamma < alpha.

        Closed form for 0 < p < alpha, p = 2*gamma:
            E|S|^p = 2^p Gamma((p+1)/2) Gamma(1 - p/alpha)
                     / (Gamma(1 - p/2) sqrt(pi))
        """
        p = 2.0 * gamma
        if p >= self.alpha:
            raise InfiniteMoment(
                f"|z|^{p:g} moment of the alpha={self.alpha:g} stable kernel diverges "
                f"(requires 2*gamma < alpha)"
            )
        return float(
            2.0**p
            * gamma_fn((p + 1.0) / 2.0)
            * gamma_fn(1.0 - p / self.alpha)
            / (gamma_fn(1.0 - p / 2.0) * math.sqrt(math.pi))
        )

    def descriptor(self) -> dict:
        return {"kind": "stable", "alpha": self.alpha}


QKernel = Union[GaussianKernel, StableKernel]


def _stable_tail_integral(alpha: float, cut: float, terms: int = 6) -> float:
    """Integral of the standard stable density over [cut, inf).

    Uses the alternating tail series
        q(w) = (1/pi) sum_k (-1)^(k+1) Gamma(k alpha + 1)/k! sin(k pi alpha/2)
               * w^(-k alpha - 1),
    integrated termwise; at cut = 100 six terms leave an error far below
    1e-9 for every alpha in (0, 2).
    """
    total = 0.0
    for k in range(1, terms + 1):
        coeff = float(
            (-1.0) ** (k + 1)
            * gamma_fn(k * alpha + 1.0)
            / math.factorial(k)
            * math.sin(k * math.pi * alpha / 2.0)
            / math.pi
        )
        total += coeff * cut ** (-k * alpha) / (k * alpha)
    return total


# ---------------------------------------------------------------------------
# Standard stable density and its derivatives by Fourier inversion
# ---------------------------------------------------------------------------
#
# q(w)   = (1/pi) int_0^inf cos(u w) exp(-u^alpha) du
# q'(w)  = -(1/pi) int_0^inf u sin(u w) exp(-u^alpha) du
# q''(w) = -(1/pi) int_0^inf u^2 cos(u w) exp(-u^alpha) du
#
# Two regimes: when the weight oscillates only a few times over the decay
# range of exp(-u^alpha), a plain adaptive quad on that finite range is
# accurate; for fast oscillation QUADPACK's QAWF is.  (QAWF silently loses
# the integral when the cycle length dwarfs the integrand's support, so
# the small-w branch is required, not an optimization.)  Absolute error is
# kept well below 1e-9 either way.

_QUAD_EPSABS = 1e-12
_MAX_PLAIN_CYCLES = 50.0


def _fourier_integral(alpha: float, w: float, power: int, kind: str) -> float:
    """int_0^inf u^power * trig(u w) * exp(-u^alpha) du for w >= 0."""
    u_max = 60.0 ** (1.0 / alpha)  # exp(-u^alpha) < 1e-26 beyond
    cycles = w * u_max / (2.0 * math.pi)
    if cycles <= _MAX_PLAIN_CYCLES:
        trig = math.cos if kind == "cos" else math.sin
        val, _ = integrate.quad(
            lambda u: u**power * trig(u * w) * math.exp(-(u**alpha)),
            0.0,
            u_max,
            epsabs=_QUAD_EPSABS,
            limit=max(100, int(10 * cycles) + 50),
        )
    else:
        val, _ = integrate.quad(
            lambda u: u**power * math.exp(-(u**alpha)),
            0.0,
            np.inf,
            weight=kind,
            wvar=w,
            epsabs=_QUAD_EPSABS,
            limlst=200,
        )
    return val


@lru_cache(maxsize=1 << 18)
def _stable_q(alpha: float, w: float) -> float:
    return _fourier_integral(alpha, abs(w), 0, "cos") / math.pi


@lru_cache(maxsize=1 << 18)
def _stable_dq(alpha: float, w: float) -> float:
    if w == 0.0:
        return 0.0
    val = _fourier_integral(alpha, abs(w), 1, "sin")
    return -math.copysign(val / math.pi, w)


@lru_cache(maxsize=1 << 18)
def _stable_d2q(alpha: float, w: float) -> float:
    return -_fourier_integral(alpha, abs(w), 2, "cos") / math.pi


# ---------------------------------------------------------------------------
# Certificates
# ---------------------------------------------------------------------------


class NotCertified:
    """Returned when no certified (c_T, Q) pair exists for a model."""

    def __init__(self, reason: str):
        self.reason = reason

    def __repr__(self):
        return f"NotCertified({self.reason!r})"

    def __bool__(self):
        return False


@dataclass(frozen=True)
class DensityBoundCertificate:
    """Concrete (alpha, c_T, Q) data making the three density bounds hold."""

    alpha: float
    c_T: float
    horizon: float
    q_kernel: QKernel

    def __post_init__(self):
        if not (0.0 < self.alpha <= 2.0):
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha}")
        if self.c_T < 1.0:
            raise ValueError(f"c_T must be >= 1, got {self.c_T}")
        if self.horizon <= 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        mass = self.q_kernel.total_mass()
        if abs(mass - 1.0) > 1e-8:
            raise ValueError(f"kernel mass {mass!r} is not 1 within 1e-8")

    def descriptor(self) -> dict:
        return {
            "alpha": self.alpha,
            "c_T": self.c_T,
            "horizon": self.horizon,
            "q_kernel": self.q_kernel.descriptor(),
        }


def q_moment(cert: DensityBoundCertificate, gamma: float) -> float:
    """Integral of |z|^(2*gamma) Q(z) dz for the certificate's kernel.

    Raises
    ------
    InfiniteMoment
        For the stable kernel when 2*gamma >= alpha.
    """
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    return cert.q_kernel.moment(gamma)


# --- ratio maximization ----------------------------------------------------


def _sup_over_grid(f, lo, hi, coarse=513, rounds=60, tol=1e-6):
    """sup of f on [lo, hi]: coarse scan, then local grid refinement.

    Refinement stops once the located maximum is stable to ``tol`` relative.
    """
    xs = np.linspace(lo, hi, coarse)
    vals = np.array([f(x) for x in xs])
    i = int(np.argmax(vals))
    best_x, best = xs[i], vals[i]
    left = xs[max(i - 1, 0)]
    right = xs[min(i + 1, len(xs) - 1)]
    for _ in range(rounds):
        xs = np.linspace(left, right, 17)
        vals = np.array([f(x) for x in xs])
        j = int(np.argmax(vals))
        new_best = vals[j]
        improved = abs(new_best - best) <= tol * max(abs(best), 1e-300)
        if new_best >= best:
            best, best_x = new_best, xs[j]
        left = xs[max(j - 1, 0)]
        right = xs[min(j + 1, len(xs) - 1)]
        if improved:
            break
    return float(best)


def _max_ratio(ratio_of_t_w, T, w_max):
    """Maximize ratio(t, w) over a (t, w) grid refined to 1e-6 stability.

    The supported models are exactly self-similar, so the ratio is flat in
    t; the t sweep is kept as a guard.
    """
    t_grid = np.geomspace(T * 1e-3, T, 5)
    best = 0.0
    for t in t_grid:
        f = lambda w: ratio_of_t_w(t, w)
        # dense near the origin, log-spaced in the tail
        near = _sup_over_grid(f, 0.0, 10.0)
        far = max(f(w) for w in np.geomspace(10.0, w_max, 60))
        best = max(best, near, far)
    return best


def _brownian_ratios(sigma: float, d: int, kernel: GaussianKernel):
    """The three |d^k/dt^k p| / (t^(-k-d/2) Q) ratios as functions of (t, w).

    With v = |w|^2 and b = 1/(2 sigma^2) - c2 > 0:
        k=0:  A exp(-b v)
        k=1:  A |v/(2s2) - d/2| exp(-b v)
        k=2:  A |(v/(2s2) - d/2)^2 + d/2 - v/s2| exp(-b v)
    """
    s2 = sigma * sigma
    A = (2.0 * math.pi * s2) ** (-d / 2.0) / kernel.c1
    b = 1.0 / (2.0 * s2) - kernel.c2
    if b <= 0:
        raise ValueError("kernel exponent must be smaller than the density's")

    def r0(t, w):
        return A * math.exp(-b * w * w)

    def r1(t, w):
        v = w * w
        return A * abs(v / (2.0 * s2) - d / 2.0) * math.exp(-b * v)

    def r2(t, w):
        v = w * w
        poly = (v / (2.0 * s2) - d / 2.0) ** 2 + d / 2.0 - v / s2
        return A * abs(poly) * math.exp(-b * v)

    return r0, r1, r2


def _stable_ratios(alpha: float, scale: float):
    """The three ratio functions for the symmetric stable process.

    p_t(x, y) = t^(-beta) q_s(w), w = (y - x) t^(-beta), beta = 1/alpha,
    where q_s(z) = q(z/scale)/scale.  Differentiating the self-similar form,

        dp/dt    = -beta t^(-beta-1) (q_s + w q_s')
        d2p/dt2  =  beta t^(-beta-2) [(beta+1)(q_s + w q_s')
                                      + beta (2 w q_s' + w^2 q_s'')]

    and each is compared against t^(-k-beta) Q(w) with Q the standard
    stable density.
    """
    beta = 1.0 / alpha
    s = scale

    def qs(w):
        return _stable_q(alpha, w / s) / s

    def dqs(w):
        return _stable_dq(alpha, w / s) / (s * s)

    def d2qs(w):
        return _stable_d2q(alpha, w / s) / (s * s * s)

    def r0(t, w):
        return qs(w) / _stable_q(alpha, w)

    def r1(t, w):
        return beta * abs(qs(w) + w * dqs(w)) / _stable_q(alpha, w)

    def r2(t, w):
        inner = (beta + 1.0) * (qs(w) + w * dqs(w)) + beta * (
            2.0 * w * dqs(w) + w * w * d2qs(w)
        )
        return beta * abs(inner) / _stable_q(alpha, w)

    return r0, r1, r2


def certificate_for(model: ProcessModel, T: float):
    """Derive a DensityBoundCertificate for the model over horizon T.

    Constants are implementation-derived: the kernel shape is fixed first
    (an inflated Gaussian for Brownian models, the standard stable density
    for stable models) and c_T is the numeric supremum of the three
    density-derivative ratios, clamped to >= 1.

    Returns NotCertified for EulerDiffusion: the Euler scheme's law has no
    certified density bounds.
    """
    if T <= 0:
        raise ValueError(f"horizon T must be positive, got {T}")
    if isinstance(model, EulerDiffusion):
        return NotCertified("Euler-discretized law has no certified density bounds")
    if isinstance(model, BrownianScaled):
        # Half the density's own exponent so every polynomial prefactor of
        # the time derivatives is absorbed by the leftover Gaussian factor.
        c2 = 1.0 / (4.0 * model.sigma**2)
        kernel = GaussianKernel.normalized(c2, dim=model.dimension)
        ratios = _brownian_ratios(model.sigma, model.dimension, kernel)
        w_max = 80.0 * model.sigma
        alpha = 2.0
    elif isinstance(model, SymmetricStable):
        alpha = model.alpha_index
        kernel = StableKernel(alpha)
        ratios = _stable_ratios(alpha, model.scale)
        w_max = 400.0 * max(model.scale, 1.0)
    else:
        raise TypeError(f"unknown model type {type(model).__name__}")
    c_T = 1.0
    for r in ratios:
        c_T = float(max(c_T, _max_ratio(r, T, w_max)))
    return DensityBoundCertificate(alpha=alpha, c_T=c_T, horizon=T, q_kernel=kernel)


# ---------------------------------------------------------------------------
# Transition densities
# ---------------------------------------------------------------------------


def transition_density(model: ProcessModel, t: float, x, y) -> float:
    """p_t(x, y) for models with a closed or semi-closed form.

    Brownian models use the Gaussian formula; stable models use numeric
    Fourier inversion of exp(-t scale^alpha |xi|^alpha) with absolute
    error below 1e-9.  EulerDiffusion is unsupported.
    """
    if t <= 0:
        raise ValueError(f"t must be positive, got {t}")
    if isinstance(model, BrownianScaled):
        d = model.dimension
        dx = np.atleast_1d(np.asarray(y, dtype=float) - np.asarray(x, dtype=float))
        var = model.sigma**2 * t
        return float(
            (2.0 * math.pi * var) ** (-d / 2.0)
            * math.exp(-float(np.dot(dx, dx)) / (2.0 * var))
        )
    if isinstance(model, SymmetricStable):
        c = model.scale * t ** (1.0 / model.alpha_index)
        w = (float(y) - float(x)) / c
        return _stable_q(model.alpha_index, w) / c
    raise ValueError("transition density is unsupported for EulerDiffusion")
