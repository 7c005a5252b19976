"""Experiment runner CLI.

Subcommands:
    funcrate run <config>        run one experiment, write results, verdict
    funcrate report <dir>...     tabulate one or more summary.json files
    funcrate constants ...       print the bound constants for a model

Exit codes: 0 pass, 1 configuration or runtime error, 2 statistical-check
failure.  The worker count is taken from FUNCRATE_THREADS (it never
changes results, only wall time).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from datetime import datetime, timezone
from pathlib import Path

from .config import ExperimentConfig, build_model, load_config, parse_config_text
from .errors import ConfigError, DegenerateFit, FuncrateError, NonFinite
from .estimate import ErrorSummary, moment_diagnostic, mse_curve, resolve_workers
from .funcs import Linear
from .model import BrownianScaled, NotCertified, certificate_for, q_moment
from .theory import TheoryBound, bm_linear_mse_oracle, fit_rate, theoretical_bound

__all__ = ["run", "report", "main"]


def _default_deltas(T: float) -> tuple:
    return tuple(2.0**-k for k in range(2, 9) if 2.0**-k <= T)


def _bounds_for(summary: ErrorSummary, tb: TheoryBound) -> dict:
    return {r.n: theoretical_bound(tb, r.n) for r in summary.rows}


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _curve_dat(summary: ErrorSummary, bounds: dict) -> str:
    lines = ["# log2_n log2_mse log2_bound"]
    for r in summary.rows:
        if r.mse <= 0:
            continue
        b = bounds.get(r.n)
        b_txt = repr(math.log2(b)) if b else "nan"
        lines.append(f"{math.log2(r.n)!r} {math.log2(r.mse)!r} {b_txt}")
    return "\n".join(lines) + "\n"


def _check(name: str, passed: bool, detail: str) -> dict:
    return {"name": name, "passed": bool(passed), "detail": detail}


def run(config: ExperimentConfig, out=sys.stdout) -> int:
    """Execute one experiment and write summary.csv / summary.json / curve.dat.

    Returns the process exit code (0 pass, 2 statistical failure); raises
    ConfigError and friends for anything wrong with the setup.
    """
    workers = resolve_workers()
    outdir = Path(config.output_dir)
    model, h = config.model, config.h
    cert = certificate_for(model, config.horizon)
    certified = not isinstance(cert, NotCertified)

    checks = []
    fit_dict = None
    constants = None
    rows_extra = {}
    summary = None
    bounds = {}

    if config.mode == "moment-check":
        if not certified:
            raise ConfigError(f"moment-check needs a certified model: {cert.reason}")
        deltas = config.deltas or _default_deltas(config.horizon)
        diag = moment_diagnostic(
            model, cert, h.gamma, deltas, config.m_paths, config.master_seed
        )
        csv_lines = ["delta,ratio,std_error,bound,passed"]
        for r in diag.rows:
            csv_lines.append(
                f"{r.delta!r},{r.ratio!r},{r.std_error!r},{diag.bound!r},"
                f"{'true' if r.passed else 'false'}"
            )
        _write(outdir / "moment.csv", "\n".join(csv_lines) + "\n")
        checks.append(
            _check(
                "moment-bound",
                diag.all_passed(),
                f"every ratio <= {diag.bound:.6g} + 3 SE",
            )
        )
        wsum = math.fsum(r.ratio / r.std_error**2 for r in diag.rows)
        wtot = math.fsum(1.0 / r.std_error**2 for r in diag.rows)
        pooled = wsum / wtot
        se_pooled = math.sqrt(1.0 / wtot)
        const_ok = all(
            abs(r.ratio - pooled) <= 3.0 * math.hypot(r.std_error, se_pooled)
            for r in diag.rows
        )
        checks.append(
            _check(
                "moment-constancy",
                const_ok,
                f"ratios within 3 SE of pooled value {pooled:.6g}",
            )
        )
        json_rows = [
            {
                "delta": r.delta,
                "ratio": r.ratio,
                "std_error": r.std_error,
                "passed": r.passed,
            }
            for r in diag.rows
        ]
        payload_rows = {"moment_rows": json_rows, "moment_bound": diag.bound}
    else:
        grid = config.grid()
        summary = mse_curve(
            model, grid, h, config.m_paths, config.master_seed, workers=workers
        )
        if certified:
            tb = TheoryBound.for_certificate(
                cert, h.gamma, h.holder_norm, config.horizon
            )
            bounds = _bounds_for(summary, tb)
            constants = {
                "c_T": cert.c_T,
                "q_moment": q_moment(cert, h.gamma),
                "D": tb.d_value,
                "C": tb.c_value,
                "branch": tb.branch,
                "exponent": tb.exponent(),
            }
        _write(outdir / "summary.csv", summary.to_csv_text(bounds))
        _write(outdir / "curve.dat", _curve_dat(summary, bounds))
        payload_rows = {}

        if config.mode == "rates":
            try:
                fit = fit_rate(summary)
            except DegenerateFit:
                checks.append(
                    _check("rate-fit", False, "degenerate: zero error curve")
                )
            else:
                fit_dict = {
                    "slope": fit.slope,
                    "slope_stderr": fit.slope_stderr,
                    "intercept": fit.intercept,
                    "r2": fit.r2,
                }
                expected = -(1.0 + 2.0 * h.gamma / model.alpha())
                gap = abs(fit.slope - expected)
                checks.append(
                    _check(
                        "rate-fit",
                        gap <= config.slope_tol,
                        f"slope {fit.slope:.4f} vs {expected:.4f} "
                        f"(|gap| {gap:.4f} <= tol {config.slope_tol:g})",
                    )
                )
        elif config.mode == "bound-check":
            if not certified:
                raise ConfigError(
                    f"bound-check needs a certified model: {cert.reason}"
                )
            ok = all(
                r.mse <= bounds[r.n] + 3.0 * r.std_error for r in summary.rows
            )
            checks.append(
                _check("bound-domination", ok, "every mse <= bound(n) + 3 SE")
            )
        elif config.mode == "oracle-compare":
            if not isinstance(model, BrownianScaled) or model.dimension != 1:
                raise ConfigError("oracle-compare requires a 1-d Brownian model")
            if not isinstance(h, Linear):
                raise ConfigError("oracle-compare requires h of kind linear")
            scale = (model.sigma * h.slope) ** 2
            oracle = {
                r.n: scale * bm_linear_mse_oracle(config.horizon, r.n)
                for r in summary.rows
            }
            ok = True
            worst = 0.0
            for r in summary.rows:
                tol = max(3.0 * r.std_error, 0.05 * oracle[r.n])
                dev = abs(r.mse - oracle[r.n])
                worst = max(worst, dev / oracle[r.n])
                ok = ok and dev <= tol
            checks.append(
                _check(
                    "oracle-compare",
                    ok,
                    f"max relative deviation {worst:.3%} "
                    f"(tolerance max(3 SE, 5%))",
                )
            )
            payload_rows = {"oracle": {str(n): v for n, v in oracle.items()}}

    passed = all(c["passed"] for c in checks)
    payload = {
        "mode": config.mode,
        "model": model.descriptor(),
        "h": h.descriptor(),
        "gamma": h.gamma,
        "alpha": model.alpha(),
        "T": config.horizon,
        "n_ref": config.n_ref,
        "eval_ns": list(config.eval_ns),
        "M": config.m_paths,
        "master_seed": config.master_seed,
        "certified": certified,
        "workers": workers,
        "theoretical_exponent": -(1.0 + 2.0 * h.gamma / model.alpha()),
        "constants": constants,
        "fit": fit_dict,
        "checks": checks,
        "passed": passed,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    if summary is not None:
        payload["rows"] = summary.to_json_dict(bounds)["rows"]
    payload.update(payload_rows)
    _write(outdir / "summary.json", json.dumps(payload, indent=2) + "\n")

    for c in checks:
        tag = "PASS" if c["passed"] else "FAIL"
        print(f"[{tag}] {c['name']}: {c['detail']}", file=out)
    print("PASS" if passed else "FAIL (statistical)", file=out)
    return 0 if passed else 2


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def _load_summary(arg: str) -> tuple:
    p = Path(arg)
    path = p / "summary.json" if p.is_dir() else p
    if not path.is_file():
        raise ConfigError(f"no summary.json at {arg}")
    with open(path, "r", encoding="utf-8") as fh:
        return (p.name if p.is_dir() else p.parent.name or str(p)), json.load(fh)


def report(args, out=sys.stdout) -> int:
    """Aggregate experiment summaries into one table."""
    if not args:
        raise ConfigError("report needs at least one summary.json or directory")
    rows = [_load_summary(a) for a in args]
    header = f"{'experiment':<24} {'mode':<15} {'slope':>18} {'theory':>8} {'bound':>7} {'verdict':>8}"
    print(header, file=out)
    print("-" * len(header), file=out)
    for name, data in rows:
        fit = data.get("fit")
        slope = (
            f"{fit['slope']:+.3f} ± {fit['slope_stderr']:.3f}" if fit else "-"
        )
        theo = data.get("theoretical_exponent")
        theo_txt = f"{theo:+.3f}" if theo is not None else "-"
        bound_checks = [
            c for c in data.get("checks", []) if c["name"] != "rate-fit"
        ]
        bound_txt = (
            "-"
            if not bound_checks
            else ("ok" if all(c["passed"] for c in bound_checks) else "FAIL")
        )
        verdict = "PASS" if data.get("passed") else "FAIL"
        print(
            f"{name:<24} {data.get('mode', '?'):<15} {slope:>18} "
            f"{theo_txt:>8} {bound_txt:>7} {verdict:>8}",
            file=out,
        )
    return 0


# ---------------------------------------------------------------------------
# constants
# ---------------------------------------------------------------------------


def constants_command(args, out=sys.stdout) -> int:
    values = parse_config_text(f"model = {args.model}")
    model = build_model(values["model"][0], values["model"][1])
    cert = certificate_for(model, args.T)
    if isinstance(cert, NotCertified):
        raise ConfigError(f"model has no certificate: {cert.reason}")
    if args.alpha is not None and abs(args.alpha - cert.alpha) > 1e-12:
        raise ConfigError(
            f"--alpha {args.alpha:g} contradicts the model's alpha {cert.alpha:g}"
        )
    tb = TheoryBound.for_certificate(cert, args.gamma, args.holder_norm, args.T)
    print(f"alpha      = {cert.alpha!r}", file=out)
    print(f"gamma      = {args.gamma!r}", file=out)
    print(f"c_T        = {cert.c_T!r}", file=out)
    print(f"q_moment   = {q_moment(cert, args.gamma)!r}", file=out)
    print(f"D          = {tb.d_value!r}", file=out)
    c_txt = repr(tb.c_value) if tb.c_value is not None else "n/a (boundary branch)"
    print(f"C          = {c_txt}", file=out)
    print(f"branch     = {tb.branch}", file=out)
    print(f"bound(n={args.n}) = {theoretical_bound(tb, args.n)!r}", file=out)
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors, which this tool reserves for
    # statistical failures; map usage problems to exit code 1 instead
    def error(self, message):
        raise ConfigError(message)


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="funcrate", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", help="path to the experiment config file")

    p_rep = sub.add_parser("report", help="tabulate experiment summaries")
    p_rep.add_argument("summaries", nargs="+", help="summary.json files or dirs")

    p_const = sub.add_parser("constants", help="print bound constants")
    p_const.add_argument("--gamma", type=float, required=True)
    p_const.add_argument("--alpha", type=float, default=None)
    p_const.add_argument("--T", type=float, required=True)
    p_const.add_argument(
        "--model",
        required=True,
        help='inline table, e.g. \'{ kind = "brownian", sigma = 1.0 }\'',
    )
    p_const.add_argument("--n", type=int, default=64)
    p_const.add_argument("--holder-norm", type=float, default=1.0)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            return run(load_config(args.config))
        if args.command == "report":
            return report(args.summaries)
        return constants_command(args)
    except NonFinite as err:
        print(
            f"error: {err} (master_seed={err.master_seed}, "
            f"path={err.path_index})",
            file=sys.stderr,
        )
        return 1
    except (FuncrateError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
