"""Experiment configuration: a flat structured-text file.

Syntax is one ``key = value`` per line; values are strings, numbers,
booleans, lists, or one-level inline tables:

    mode = "rates"
    T = 1.0
    n_ref = 32768
    eval_ns = [8, 16, 32, 64, 128, 256, 512]
    M = 100000
    master_seed = 20150728
    output_dir = "out/exp1"
    model = { kind = "brownian", sigma = 1.0, x0 = 0.0 }
    h = { kind = "power", gamma = 0.5, center = 0.0 }

Parse and validation errors carry the offending line number.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import ConfigError, GammaTooLarge
from .funcs import ClippedPower, Constant, HolderFunction, Linear, PowerAbs, Sine
from .model import BrownianScaled, EulerDiffusion, ProcessModel, SymmetricStable
from .simulate import GridSpec

__all__ = ["ExperimentConfig", "PolyCoef", "load_config", "parse_config_text",
           "build_model", "build_holder_function"]

MODES = ("rates", "bound-check", "moment-check", "oracle-compare")


# ---------------------------------------------------------------------------
# Value parsing
# ---------------------------------------------------------------------------


def _strip_comment(line: str) -> str:
    out = []
    in_str = False
    for ch in line:
        if ch == '"':
            in_str = not in_str
        if ch == "#" and not in_str:
            break
        out.append(ch)
    return "".join(out)


def _split_top_level(body: str, line: int):
    """Split on commas that are not nested inside quotes or brackets."""
    parts, depth, in_str, cur = [], 0, False, []
    for ch in body:
        if ch == '"':
            in_str = not in_str
        if not in_str:
            if ch in "[{":
                depth += 1
            elif ch in "]}":
                depth -= 1
                if depth < 0:
                    raise ConfigError("unbalanced brackets", line)
            elif ch == "," and depth == 0:
                parts.append("".join(cur))
                cur = []
                continue
        cur.append(ch)
    if in_str or depth != 0:
        raise ConfigError("unbalanced quotes or brackets", line)
    tail = "".join(cur)
    if tail.strip():
        parts.append(tail)
    return parts


def _parse_value(text: str, line: int):
    s = text.strip()
    if not s:
        raise ConfigError("missing value", line)
    if s.startswith('"'):
        if not s.endswith('"') or len(s) < 2:
            raise ConfigError(f"unterminated string {s!r}", line)
        return s[1:-1]
    if s.startswith("["):
        if not s.endswith("]"):
            raise ConfigError(f"unterminated list {s!r}", line)
        return [_parse_value(p, line) for p in _split_top_level(s[1:-1], line)]
    if s.startswith("{"):
        if not s.endswith("}"):
            raise ConfigError(f"unterminated table {s!r}", line)
        table = {}
        for item in _split_top_level(s[1:-1], line):
            if "=" not in item:
                raise ConfigError(f"expected key = value in table, got {item!r}", line)
            k, v = item.split("=", 1)
            table[k.strip()] = _parse_value(v, line)
        return table
    if s == "true":
        return True
    if s == "false":
        return False
    try:
        if not any(c in s for c in ".eE") or s.startswith(("0x", "0b")):
            return int(s, 0)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        raise ConfigError(f"cannot parse value {s!r}", line) from None


def parse_config_text(text: str) -> dict:
    """Raw key/value mapping; duplicate keys are an error."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key = value, got {line!r}", lineno)
        key, rest = line.split("=", 1)
        key = key.strip()
        if not key or " " in key:
            raise ConfigError(f"bad key {key!r}", lineno)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        values[key] = (_parse_value(rest, lineno), lineno)
    return values


# ---------------------------------------------------------------------------
# Descriptor builders
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PolyCoef:
    """Polynomial coefficient callable (low degree first); picklable, so
    Euler models built from configs work with process-pool workers."""

    coeffs: tuple

    def __call__(self, x):
        acc = 0.0
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def __repr__(self):
        return f"poly{tuple(self.coeffs)}"


def _take(table: dict, key: str, line: int, default=None, required=False):
    if key in table:
        return table.pop(key)
    if required:
        raise ConfigError(f"missing required field {key!r}", line)
    return default


def _no_leftovers(table: dict, what: str, line: int):
    if table:
        raise ConfigError(f"unknown {what} fields {sorted(table)}", line)


def build_model(desc: dict, line: int = 0) -> ProcessModel:
    if not isinstance(desc, dict):
        raise ConfigError("model must be an inline table", line)
    table = dict(desc)
    kind = _take(table, "kind", line, required=True)
    try:
        if kind == "brownian":
            m = BrownianScaled(
                sigma=float(_take(table, "sigma", line, 1.0)),
                x0=_take(table, "x0", line, 0.0),
                dimension=int(_take(table, "dimension", line, 1)),
            )
        elif kind == "stable":
            m = SymmetricStable(
                alpha_index=float(_take(table, "alpha", line, required=True)),
                scale=float(_take(table, "scale", line, 1.0)),
                x0=float(_take(table, "x0", line, 0.0)),
            )
        elif kind == "euler":
            drift = _take(table, "drift", line, required=True)
            diffusion = _take(table, "diffusion", line, required=True)
            if not isinstance(drift, list) or not isinstance(diffusion, list):
                raise ConfigError(
                    "euler drift/diffusion must be coefficient lists", line
                )
            m = EulerDiffusion(
                drift=PolyCoef(tuple(float(c) for c in drift)),
                diffusion=PolyCoef(tuple(float(c) for c in diffusion)),
                x0=float(_take(table, "x0", line, 0.0)),
            )
        else:
            raise ConfigError(f"unknown model kind {kind!r}", line)
    except ValueError as err:
        raise ConfigError(str(err), line) from err
    _no_leftovers(table, "model", line)
    return m


def build_holder_function(desc: dict, line: int = 0) -> HolderFunction:
    if not isinstance(desc, dict):
        raise ConfigError("h must be an inline table", line)
    table = dict(desc)
    kind = _take(table, "kind", line, required=True)
    try:
        if kind == "constant":
            h = Constant(
                value=float(_take(table, "value", line, required=True)),
                gamma=float(_take(table, "gamma", line, 1.0)),
            )
        elif kind == "linear":
            h = Linear(
                slope=float(_take(table, "slope", line, required=True)),
                offset=float(_take(table, "offset", line, 0.0)),
            )
        elif kind == "power":
            h = PowerAbs(
                gamma=float(_take(table, "gamma", line, required=True)),
                center=float(_take(table, "center", line, 0.0)),
            )
        elif kind == "sine":
            h = Sine(
                frequency=float(_take(table, "frequency", line, required=True)),
                gamma=float(_take(table, "gamma", line, 1.0)),
            )
        elif kind in ("clipped_power", "clipped-power"):
            h = ClippedPower(
                gamma=float(_take(table, "gamma", line, required=True)),
                center=float(_take(table, "center", line, 0.0)),
                cap=float(_take(table, "cap", line, 1.0)),
            )
        else:
            raise ConfigError(f"unknown h kind {kind!r}", line)
    except ValueError as err:
        raise ConfigError(str(err), line) from err
    _no_leftovers(table, "h", line)
    return h


# ---------------------------------------------------------------------------
# ExperimentConfig
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str
    model: ProcessModel
    h: HolderFunction
    horizon: float
    m_paths: int
    master_seed: int
    output_dir: str
    n_ref: Optional[int] = None
    eval_ns: tuple = ()
    deltas: tuple = ()
    slope_tol: float = 0.2
    source: str = field(default="<memory>", compare=False)

    def grid(self) -> GridSpec:
        if self.n_ref is None or not self.eval_ns:
            raise ConfigError(f"mode {self.mode!r} requires n_ref and eval_ns")
        return GridSpec(horizon=self.horizon, n_ref=self.n_ref, eval_ns=self.eval_ns)


def _config_from_values(values: dict, source: str) -> ExperimentConfig:
    def take(key, default=None, required=False):
        if key in values:
            val, line = values.pop(key)
            return val, line
        if required:
            raise ConfigError(f"missing required key {key!r} in {source}")
        return default, 0

    mode, _ = take("mode", required=True)
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    model_desc, model_line = take("model", required=True)
    h_desc, h_line = take("h", required=True)
    T, t_line = take("T", required=True)
    m, _ = take("M", required=True)
    seed, _ = take("master_seed", required=True)
    outdir, _ = take("output_dir", required=True)
    n_ref, _ = take("n_ref")
    eval_ns, ns_line = take("eval_ns")
    deltas, d_line = take("deltas")
    slope_tol, _ = take("slope_tol", 0.2)
    if values:
        key = sorted(values)[0]
        raise ConfigError(f"unknown key {key!r}", values[key][1])

    model = build_model(model_desc, model_line)
    h = build_holder_function(h_desc, h_line)
    if not isinstance(T, (int, float)) or T <= 0:
        raise ConfigError(f"T must be positive, got {T!r}", t_line)
    needs_grid = mode != "moment-check"
    if needs_grid and (n_ref is None or eval_ns is None):
        raise ConfigError(f"mode {mode!r} requires n_ref and eval_ns")
    cfg = ExperimentConfig(
        mode=mode,
        model=model,
        h=h,
        horizon=float(T),
        m_paths=int(m),
        master_seed=int(seed),
        output_dir=str(outdir),
        n_ref=None if n_ref is None else int(n_ref),
        eval_ns=tuple(int(n) for n in eval_ns) if eval_ns else (),
        deltas=tuple(float(d) for d in deltas) if deltas else (),
        slope_tol=float(slope_tol),
        source=source,
    )
    # fail fast, before any simulation: grid shape and exponent pairing
    if needs_grid:
        try:
            cfg.grid()
        except ValueError as err:
            raise ConfigError(str(err), ns_line) from err
    if cfg.deltas and any(d <= 0 or d > cfg.horizon for d in cfg.deltas):
        raise ConfigError("deltas must lie in (0, T]", d_line)
    gamma, alpha = h.gamma, model.alpha()
    if gamma > alpha / 2.0 or (gamma == alpha / 2.0 and alpha < 2.0):
        raise GammaTooLarge(
            f"line {h_line}: gamma={gamma:g} is outside (0, alpha/2] for "
            f"alpha={alpha:g} (equality is admissible only for alpha = 2)"
        )
    return cfg


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return _config_from_values(parse_config_text(text), source=path)


def parse_config(text: str, source: str = "<memory>") -> ExperimentConfig:
    """Parse a config from a string (used by tests and the CLI)."""
    return _config_from_values(parse_config_text(text), source=source)
