"""Catalog of Holder-continuous test functions.

The catalog is closed: every entry carries a trusted Holder exponent gamma
and norm, so downstream bound computations never depend on a user-supplied
constant.  Entries evaluate elementwise on numpy arrays; PowerAbs and
ClippedPower also accept R^d states (Euclidean norm of the displacement).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import HolderViolation

__all__ = [
    "Constant",
    "Linear",
    "PowerAbs",
    "Sine",
    "ClippedPower",
    "HolderFunction",
    "evaluate",
    "empirical_holder_check",
]


@dataclass(frozen=True)
class Constant:
    """h(x) = value; Holder norm 0 for any declared gamma."""

    value: float
    gamma: float = 1.0

    def __post_init__(self):
        _check_gamma(self.gamma)

    @property
    def holder_norm(self) -> float:
        return 0.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        shape = x.shape if x.ndim <= 1 else x.shape[:-1]
        return np.full(shape, self.value) if shape else float(self.value)

    def descriptor(self) -> dict:
        return {"kind": "constant", "value": self.value, "gamma": self.gamma}


@dataclass(frozen=True)
class Linear:
    """h(x) = slope * x + offset; gamma = 1, norm |slope|.  Scalar states."""

    slope: float
    offset: float = 0.0

    @property
    def gamma(self) -> float:
        return 1.0

    @property
    def holder_norm(self) -> float:
        return abs(self.slope)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = self.slope * x + self.offset
        return out if out.shape else float(out)

    def descriptor(self) -> dict:
        return {"kind": "linear", "slope": self.slope, "offset": self.offset}


@dataclass(frozen=True)
class PowerAbs:
    """h(x) = |x - center|^gamma; norm exactly 1.

    |a^g - b^g| <= |a - b|^g for g in (0, 1] and a, b >= 0, with equality
    when one argument is 0, so the declared norm is sharp.
    """

    gamma: float
    center: float = 0.0

    def __post_init__(self):
        _check_gamma(self.gamma)

    @property
    def holder_norm(self) -> float:
        return 1.0

    def __call__(self, x):
        r = _radial_distance(x, self.center)
        return _fractional_power(r, self.gamma)

    def descriptor(self) -> dict:
        return {"kind": "power", "gamma": self.gamma, "center": self.center}


@dataclass(frozen=True)
class Sine:
    """h(x) = sin(frequency * x) with declared exponent gamma.

    From |sin a - sin b| <= min(2, frequency |a - b|) the valid norm is
    2^(1-gamma) * frequency^gamma.  Scalar states.
    """

    frequency: float
    gamma: float = 1.0

    def __post_init__(self):
        _check_gamma(self.gamma)
        if self.frequency <= 0:
            raise ValueError(f"frequency must be positive, got {self.frequency}")

    @property
    def holder_norm(self) -> float:
        return 2.0 ** (1.0 - self.gamma) * self.frequency**self.gamma

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.sin(self.frequency * x)
        return out if out.shape else float(out)

    def descriptor(self) -> dict:
        return {"kind": "sine", "frequency": self.frequency, "gamma": self.gamma}


@dataclass(frozen=True)
class ClippedPower:
    """h(x) = min(|x - center|^gamma, cap): bounded, same norm as PowerAbs.

    Clipping is a 1-Lipschitz post-composition, so the uncapped norm 1 is
    still valid.
    """

    gamma: float
    center: float = 0.0
    cap: float = 1.0

    def __post_init__(self):
        _check_gamma(self.gamma)
        if self.cap <= 0:
            raise ValueError(f"cap must be positive, got {self.cap}")

    @property
    def holder_norm(self) -> float:
        return 1.0

    def __call__(self, x):
        r = _radial_distance(x, self.center)
        out = np.minimum(_fractional_power(r, self.gamma), self.cap)
        return out if np.ndim(out) else float(out)

    def descriptor(self) -> dict:
        return {
            "kind": "clipped_power",
            "gamma": self.gamma,
            "center": self.center,
            "cap": self.cap,
        }


HolderFunction = Union[Constant, Linear, PowerAbs, Sine, ClippedPower]


def _check_gamma(gamma: float):
    if not (0.0 < gamma <= 1.0):
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")


def _radial_distance(x, center):
    x = np.asarray(x, dtype=float)
    if x.ndim >= 2:
        return np.sqrt(np.sum((x - center) ** 2, axis=-1))
    return np.abs(x - center)


def _fractional_power(r, gamma):
    # sqrt/abs fast paths matter: these run over every path point
    if gamma == 1.0:
        return r
    if gamma == 0.5:
        return np.sqrt(r)
    return r**gamma


def evaluate(h: HolderFunction, x):
    """h(x) for a scalar, an array of scalars, or (d > 1) an array of states."""
    return h(x)


def empirical_holder_check(h: HolderFunction, domain=(-10.0, 10.0), grid_points=10_000):
    """Max of |h(x) - h(y)| / |x - y|^gamma over all grid pairs in ``domain``.

    Raises HolderViolation if the ratio exceeds the declared norm by more
    than 1e-9 (a misconfigured catalog entry).
    """
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    lo, hi = domain
    xs = np.linspace(lo, hi, grid_points)
    hx = np.asarray(h(xs), dtype=float)
    worst = 0.0
    block = max(1, 2**22 // grid_points)
    for start in range(0, grid_points - 1, block):
        stop = min(start + block, grid_points - 1)
        dx = np.abs(xs[start:stop, None] - xs[None, start + 1 :])
        dh = np.abs(hx[start:stop, None] - hx[None, start + 1 :])
        mask = dx > 0
        ratios = dh[mask] / dx[mask] ** h.gamma
        if ratios.size:
            worst = max(worst, float(ratios.max()))
    if worst > h.holder_norm + 1e-9:
        raise HolderViolation(
            f"empirical ratio {worst!r} exceeds declared norm {h.holder_norm!r} "
            f"for {h!r}"
        )
    return worst
