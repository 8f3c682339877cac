"""Command-line front end.

Exit codes: 0 success, 1 invalid input or usage, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import analytic
from . import estimators as est
from .figures import CANNED, DEFAULT_REPS, PAPER_REPS
from .metrics import BURES, CHERNOFF, log_ellipsoid_volume, weight_superop, wmse
from .povm import (
    BoundaryStateError,
    NotInformationallyCompleteError,
    frame_superop,
    is_informationally_complete,
    is_tight_ic,
    povm_to_dict,
    resolve_povm,
    save_povm,
)
from .simulate import ExperimentConfig, run_experiment, state_from_spec

OUTPUT_ENV = "IOCTOMO_OUTPUT_DIR"


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _fmt(x) -> str:
    return f"{x:.6g}"


def _default_out(arg) -> Path:
    return Path(arg) if arg else Path(os.environ.get(OUTPUT_ENV, "."))


def _complex_json(a):
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


# --- povm ---------------------------------------------------------------------

def cmd_povm(args) -> int:
    povm = resolve_povm(args.spec)
    if args.action == "export":
        if args.out:
            save_povm(povm, args.out)
        else:
            print(json.dumps(povm_to_dict(povm)))
        return 0
    ic = is_informationally_complete(povm)
    tight, resid = is_tight_ic(povm)
    spectrum = np.linalg.eigvalsh(frame_superop(povm))
    res = "residual < 1e-12" if resid < 1e-12 else f"residual {resid:.3g}"
    print(f"IC: {str(ic).lower()}, tight-IC: {str(tight).lower()} ({res})")
    print(f"dimension: {povm.dim}, outcomes: {len(povm)}")
    print("frame spectrum: " + " ".join(_fmt(v) for v in spectrum))
    return 0


# --- analytic -----------------------------------------------------------------

def _parse_params(items) -> dict:
    out = {}
    for item in items:
        key, sep, val = item.partition("=")
        if not sep or key not in ("d", "purity", "r", "s", "bloch"):
            raise UsageError(f"bad --params entry {item!r}; use d=, purity=, r=, s= or bloch=x,y,z")
        if key == "bloch":
            out[key] = tuple(float(v) for v in val.split(","))
        else:
            out[key] = int(val) if key in ("d", "r") else float(val)
    return out


def cmd_analytic(args) -> int:
    if args.action == "list":
        print("\n".join(analytic.formula_names()))
        return 0
    if args.formula not in analytic.FORMULAS:
        raise UsageError(f"unknown formula {args.formula!r}; try 'analytic list'")
    params = {k: getattr(args, k) for k in ("d", "purity", "r", "s") if getattr(args, k) is not None}
    params.update(_parse_params(args.params or []))
    if args.bloch is not None:
        params["bloch"] = tuple(args.bloch)
    try:
        value = analytic.FORMULAS[args.formula](**params)
    except TypeError as exc:
        raise UsageError(f"formula {args.formula} is missing parameters ({exc})") from None
    print(value if isinstance(value, str) else _fmt(value))
    return 0


# --- estimate -----------------------------------------------------------------

def _read_counts(path) -> np.ndarray:
    text = Path(path).read_text().strip()
    try:
        data = json.loads(text)
        if isinstance(data, dict):
            data = data["counts"]
    except json.JSONDecodeError:
        data = text.replace(",", " ").split()
    counts = np.asarray(data, dtype=float)
    if counts.ndim != 1 or np.any(counts < 0) or np.any(counts != np.round(counts)):
        raise ValueError("counts must be a flat list of nonnegative integers")
    return counts.astype(int)


def cmd_estimate(args) -> int:
    povm = resolve_povm(args.povm)
    counts = _read_counts(args.counts)
    if len(counts) != len(povm):
        raise ValueError(f"{len(counts)} counts for a POVM with {len(povm)} outcomes")
    freqs = est.Frequencies.from_counts(counts)
    if args.estimator == "cle":
        result = est.cle(povm, freqs)
    elif args.estimator == "blue":
        rho_true = None
        if args.true_state:
            rho_true = state_from_spec(json.loads(Path(args.true_state).read_text()))
        result = est.blue(povm, freqs, args.blue_mode, rho_true)
    else:
        result = est.mle(povm, freqs, max_iter=args.max_iter)
    rho = result.estimate
    out = {
        "estimator": result.mode,
        "N": freqs.N,
        "estimate": _complex_json(rho),
        "eigenvalues": np.linalg.eigvalsh(rho).tolist(),
        "log_likelihood": est.log_likelihood(povm, freqs, rho) if np.all(povm.probabilities(rho) > 0) else None,
        "diagnostics": {k: (bool(v) if isinstance(v, (bool, np.bool_)) else v) for k, v in result.diagnostics.items()},
    }
    C = result.scaled_mse_matrix
    if C is None and args.estimator == "mle" and np.all(povm.probabilities(rho) > 1e-12):
        # asymptotic MSE matrix of the MLE: inverse Fisher information at the estimate
        C = est.blue_mse_matrix(povm, rho)
    figures = {}
    if C is not None:
        figures["scaled_mse"] = float(np.trace(C))
        figures["log_volume"] = log_ellipsoid_volume(C, povm.dim)
    for name in args.weight:
        if C is None:
            raise NumericalFailure(f"estimate: no MSE matrix available for the {name} figure")
        spec = {"bures": BURES, "chernoff": CHERNOFF}[name]
        figures["scaled_msb" if name == "bures" else "scaled_wmse_chernoff"] = wmse(C, weight_superop(rho, spec))
    out["figures"] = figures
    print(json.dumps(out, indent=2))
    return 0


# --- simulate / figures -------------------------------------------------------

def cmd_simulate(args) -> int:
    cfg = ExperimentConfig.from_json(args.config)
    if args.out:
        cfg.output = args.out
    elif not cfg.output:
        cfg.output = str(_default_out(None) / Path(args.config).stem)
    res = run_experiment(cfg, threads=args.threads)
    print(f"wrote {len(res.records)} trial records to {cfg.output}_trials.csv and {cfg.output}_aggregate.csv")
    return 0


def cmd_figures(args) -> int:
    out = _default_out(args.out)
    kwargs = {}
    if args.name != "fig2":
        kwargs["seed"] = args.seed
    if args.name == "fig1":
        kwargs["reps"] = PAPER_REPS if args.paper_scale else (args.reps or DEFAULT_REPS)
        kwargs["threads"] = args.threads
    elif args.name == "fig3":
        kwargs["reps"] = args.reps or 300
    elif args.name == "fig4":
        kwargs["samples"] = args.samples or (100_000 if args.paper_scale else 10_000)
    paths = CANNED[args.name](out, **kwargs)
    for p in paths:
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ioctomo", description="Linear and maximum-likelihood quantum state tomography.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    pv = sub.add_parser("povm", help="check or export a POVM")
    pv.add_argument("action", choices=("check", "export"))
    pv.add_argument("spec", help="builtin:<name> or a JSON file")
    pv.add_argument("--out", help="export destination (default stdout)")
    pv.set_defaults(func=cmd_povm)

    an = sub.add_parser("analytic", help="evaluate closed-form expressions")
    an.add_argument("action", choices=("eval", "list"))
    an.add_argument("--formula")
    an.add_argument("--d", type=int)
    an.add_argument("--purity", type=float)
    an.add_argument("--r", type=int)
    an.add_argument("--s", type=float)
    an.add_argument("--bloch", type=float, nargs=3, metavar=("X", "Y", "Z"))
    an.add_argument("--params", nargs="+", metavar="KEY=VALUE", help="alternative to the individual flags")
    an.set_defaults(func=cmd_analytic)

    es = sub.add_parser("estimate", help="estimate a state from count data")
    es.add_argument("--povm", required=True)
    es.add_argument("--counts", required=True, help="JSON list or whitespace/comma separated counts")
    es.add_argument("--estimator", choices=("cle", "blue", "mle"), default="blue")
    es.add_argument("--blue-mode", choices=("plugin", "oracle", "twostep"), default="plugin")
    es.add_argument("--true-state", help="JSON state spec (needed by --blue-mode oracle)")
    es.add_argument("--weight", choices=("bures", "chernoff"), action="append", default=[],
                    help="also report a monotone-metric weighted MSE (repeatable)")
    es.add_argument("--max-iter", type=int, default=10_000)
    es.set_defaults(func=cmd_estimate)

    si = sub.add_parser("simulate", help="run a Monte Carlo experiment from a JSON config")
    si.add_argument("--config", required=True)
    si.add_argument("--out", help="CSV prefix (overrides the config)")
    si.add_argument("--threads", type=int, default=1)
    si.set_defaults(func=cmd_simulate)

    fg = sub.add_parser("figures", help="regenerate canned figure data")
    fg.add_argument("name", choices=sorted(CANNED))
    fg.add_argument("--seed", type=int, default=0)
    fg.add_argument("--reps", type=int)
    fg.add_argument("--samples", type=int, help="Haar samples per point (fig4)")
    fg.add_argument("--paper-scale", action="store_true", help="use the published repetition counts")
    fg.add_argument("--threads", type=int, default=1)
    fg.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or cwd)")
    fg.set_defaults(func=cmd_figures)
    return p


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "threads", 1) < 1:
            raise UsageError("--threads must be at least 1")
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (BoundaryStateError, NotInformationallyCompleteError, NumericalFailure,
            np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"{getattr(args, 'command', 'ioctomo')}: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"{getattr(args, 'command', 'ioctomo')}: invalid input: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())
