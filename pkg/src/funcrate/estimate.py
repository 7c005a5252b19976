"""Riemann-sum estimators and coupled Monte Carlo error curves.

The coarse- and fine-grid sums are computed on the same path (coupling),
so their squared difference estimates the discretization error directly.
All reductions are compensated and merged in a fixed block order, making
results bit-identical for any worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._kernels import kahan_row_sums
from .errors import GammaTooLarge
from .funcs import HolderFunction
from .model import (
    DensityBoundCertificate,
    EulerDiffusion,
    ProcessModel,
    q_moment,
)
from .simulate import DIAGNOSTIC_STREAM_BASE, GridSpec, path_stream, simulate_block

__all__ = [
    "RateRow",
    "ErrorSummary",
    "MomentRow",
    "MomentDiagnostic",
    "riemann_sum",
    "reference_integral",
    "mse_curve",
    "moment_diagnostic",
    "resolve_workers",
]

_BLOCK_PATHS = 256


def riemann_sum(path: np.ndarray, T: float, n: int, h: HolderFunction) -> float:
    """Left-endpoint integral sum (T/n) * sum_{k<n} h(path[k]).

    The path must hold n + 1 values; the last is ignored.  Summation uses
    math.fsum, so the only rounding is the final one.
    """
    if path.shape[0] != n + 1:
        raise ValueError(f"path has {path.shape[0]} values, expected n+1={n + 1}")
    values = np.asarray(h(path[:n]), dtype=float)
    return (T / n) * math.fsum(values)


def reference_integral(path: np.ndarray, grid: GridSpec, h: HolderFunction) -> float:
    """Fine-grid proxy for the time integral of h along the path."""
    return riemann_sum(path, grid.horizon, grid.n_ref, h)


def _check_gamma_pairing(h: HolderFunction, alpha: float):
    gamma = h.gamma
    if gamma > alpha / 2.0 or (gamma == alpha / 2.0 and alpha < 2.0):
        raise GammaTooLarge(
            f"gamma={gamma:g} is outside (0, alpha/2] for alpha={alpha:g} "
            f"(equality is admissible only for alpha = 2)"
        )


def resolve_workers(workers: Optional[int] = None) -> int:
    """Worker count: explicit argument, else FUNCRATE_THREADS, else CPUs."""
    if workers is None:
        env = os.environ.get("FUNCRATE_THREADS")
        workers = int(env) if env else (os.cpu_count() or 1)
    if workers < 1:
        raise ValueError(f"worker count must be >= 1, got {workers}")
    return workers


def _block_partials(args):
    """Per-block coupled squared errors, reduced to (sum, sum of squares).

    Runs in worker processes; everything it touches is a pure function of
    (master_seed, path index).
    """
    model, grid, h, master_seed, start, stop = args
    paths = simulate_block(model, grid, master_seed, start, stop)
    hv = np.asarray(h(paths[:, : grid.n_ref]), dtype=float)
    T = grid.horizon
    ref = (T / grid.n_ref) * kahan_row_sums(np.ascontiguousarray(hv))
    out = []
    for n in grid.eval_ns:
        stride = grid.n_ref // n
        sub = np.ascontiguousarray(hv[:, ::stride])
        coarse = (T / n) * kahan_row_sums(sub)
        e = (ref - coarse) ** 2
        out.append((math.fsum(e), math.fsum(e * e)))
    return out


@dataclass(frozen=True)
class RateRow:
    """Empirical mean squared error at one grid level."""

    n: int
    mse: float
    std_error: float
    m_paths: int


@dataclass(frozen=True)
class ErrorSummary:
    """Per-level MSE curve plus the experiment's full metadata."""

    rows: tuple
    model: dict
    h: dict
    gamma: float
    alpha: float
    horizon: float
    n_ref: int
    master_seed: int
    certified: bool

    def __post_init__(self):
        ns = [r.n for r in self.rows]
        if ns != sorted(ns):
            raise ValueError("rows must be sorted by n ascending")
        for r in self.rows:
            if r.mse < 0 or r.std_error < 0:
                raise ValueError(f"negative mse/std_error in row n={r.n}")

    def eval_ns(self) -> tuple:
        return tuple(r.n for r in self.rows)

    def to_csv_text(self, bounds: Optional[dict] = None) -> str:
        """CSV with columns n,mse,std_error,M,bound,certified.

        Floats are rendered with repr (shortest round-trip), so identical
        results serialize to identical bytes.
        """
        lines = ["n,mse,std_error,M,bound,certified"]
        flag = "true" if self.certified else "false"
        for r in self.rows:
            bound = "" if not bounds or r.n not in bounds else repr(bounds[r.n])
            lines.append(
                f"{r.n},{r.mse!r},{r.std_error!r},{r.m_paths},{bound},{flag}"
            )
        return "\n".join(lines) + "\n"

    def to_json_dict(self, bounds: Optional[dict] = None) -> dict:
        return {
            "model": self.model,
            "h": self.h,
            "gamma": self.gamma,
            "alpha": self.alpha,
            "T": self.horizon,
            "n_ref": self.n_ref,
            "master_seed": self.master_seed,
            "certified": self.certified,
            "rows": [
                {
                    "n": r.n,
                    "mse": r.mse,
                    "std_error": r.std_error,
                    "M": r.m_paths,
                    "bound": None if not bounds else bounds.get(r.n),
                }
                for r in self.rows
            ],
        }


def mse_curve(
    model: ProcessModel,
    grid: GridSpec,
    h: HolderFunction,
    m_paths: int,
    master_seed: int,
    workers: Optional[int] = None,
    block_paths: int = _BLOCK_PATHS,
) -> ErrorSummary:
    """Monte Carlo curve of E|I_ref - I_n|^2 over the grid's eval levels.

    For every path the reference integral and all coarse sums are computed
    from the same realization, one pass over the fine path.  Returns the
    per-level sample mean and standard error over m_paths paths.
    """
    if m_paths < 100:
        raise ValueError(f"need at least 100 paths, got {m_paths}")
    _check_gamma_pairing(h, model.alpha())
    workers = resolve_workers(workers)
    tasks = [
        (model, grid, h, master_seed, start, min(start + block_paths, m_paths))
        for start in range(0, m_paths, block_paths)
    ]
    if workers == 1 or len(tasks) == 1:
        partials = [_block_partials(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            # map preserves task order, so the merge below is fixed
            partials = list(pool.map(_block_partials, tasks, chunksize=1))
    rows = []
    for j, n in enumerate(grid.eval_ns):
        total = math.fsum(p[j][0] for p in partials)
        total_sq = math.fsum(p[j][1] for p in partials)
        mean = total / m_paths
        var = max(total_sq - m_paths * mean * mean, 0.0) / (m_paths - 1)
        rows.append(
            RateRow(
                n=n,
                mse=mean,
                std_error=math.sqrt(var / m_paths),
                m_paths=m_paths,
            )
        )
    return ErrorSummary(
        rows=tuple(rows),
        model=model.descriptor(),
        h=h.descriptor(),
        gamma=h.gamma,
        alpha=model.alpha(),
        horizon=grid.horizon,
        n_ref=grid.n_ref,
        master_seed=master_seed,
        certified=not isinstance(model, EulerDiffusion),
    )


# ---------------------------------------------------------------------------
# Moment diagnostic
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MomentRow:
    delta: float
    ratio: float
    std_error: float
    passed: bool


@dataclass(frozen=True)
class MomentDiagnostic:
    """Empirical check of E|X_delta - x0|^(2 gamma) <= bound * delta^(2 gamma/alpha).

    ratio is the Monte Carlo mean divided by delta^(2 gamma/alpha); for the
    exactly self-similar models it is constant in delta, and the bound
    c_T * q_moment dominates it.
    """

    rows: tuple
    bound: float
    gamma: float
    alpha: float
    model: dict

    def all_passed(self) -> bool:
        return all(r.passed for r in self.rows)


def moment_diagnostic(
    model: ProcessModel,
    cert: DensityBoundCertificate,
    gamma: float,
    deltas: Sequence[float],
    m_draws: int,
    master_seed: int,
) -> MomentDiagnostic:
    """Monte Carlo moment ratios of single increments against the bound.

    Raises InfiniteMoment (propagated from q_moment) when the kernel's
    2*gamma moment diverges.
    """
    if isinstance(model, EulerDiffusion):
        raise ValueError("moment diagnostic requires an exact-law model")
    alpha = model.alpha()
    if not isinstance(cert, DensityBoundCertificate):
        raise TypeError("cert must be a DensityBoundCertificate")
    deltas = [float(d) for d in deltas]
    if any(d <= 0 or d > cert.horizon for d in deltas):
        raise ValueError("every delta must lie in (0, horizon]")
    bound = cert.c_T * q_moment(cert, gamma)  # InfiniteMoment propagates
    from .simulate import _bulk_increments  # local: avoids a public bulk API

    p = 2.0 * gamma
    rows = []
    for k, delta in enumerate(deltas):
        stream = path_stream(master_seed, DIAGNOSTIC_STREAM_BASE + k)
        chunk = 1 << 20
        sums, sq_sums, left = [], [], m_draws
        while left > 0:
            take = min(chunk, left)
            inc = _bulk_increments(model, delta, take, stream)
            mag = np.abs(inc) if inc.ndim == 1 else np.sqrt(np.sum(inc * inc, axis=-1))
            vals = mag**p
            sums.append(math.fsum(vals))
            sq_sums.append(math.fsum(vals * vals))
            left -= take
        mean = math.fsum(sums) / m_draws
        var = max(math.fsum(sq_sums) - m_draws * mean * mean, 0.0) / (m_draws - 1)
        scale = delta ** (p / alpha)
        ratio = mean / scale
        se = math.sqrt(var / m_draws) / scale
        rows.append(
            MomentRow(
                delta=delta, ratio=ratio, std_error=se, passed=ratio <= bound + 3 * se
            )
        )
    return MomentDiagnostic(
        rows=tuple(rows),
        bound=bound,
        gamma=gamma,
        alpha=alpha,
        model=model.descriptor(),
    )
