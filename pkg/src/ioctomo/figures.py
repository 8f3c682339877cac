"""Canned experiments that regenerate the data behind the published figures.

Each function writes CSV files into ``out`` and returns their paths. Plotting
is left to external tools.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from . import analytic
from . import estimators as est
from .opspace import vectorize
from .povm import covariant_povm, mub_povm, platonic_povm, sic_povm
from .simulate import (
    ExperimentConfig,
    bloch_state,
    blue_figures_batch,
    log_grid,
    orbit_states,
    run_experiment,
    sample_counts,
    trial_seed,
)

FIG1_BLOCH = (0.6886, 0.1137, -0.5025)
DEFAULT_REPS = 100
PAPER_REPS = 1000


def _writer(path: Path, header):
    path.parent.mkdir(parents=True, exist_ok=True)
    fh = open(path, "w", newline="")
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    return fh, w


def _num(x) -> str:
    return repr(float(x))


def fig1(out, seed: int = 0, reps: int = DEFAULT_REPS, threads: int = 1, N_grid=None) -> list[Path]:
    """CLE, oracle BLUE, plug-in BLUE and MLE on the cube measurement versus N."""
    cfg = ExperimentConfig(
        povm="builtin:cube",
        state={"bloch": list(FIG1_BLOCH)},
        estimators=["cle", "blue_oracle", "blue_plugin", "mle"],
        N_grid=list(N_grid) if N_grid is not None else log_grid(),
        repetitions=reps,
        seed=seed,
        figures=["mse"],
    )
    res = run_experiment(cfg, threads=threads)
    paths = list(res.write_csv(Path(out) / "fig1"))
    theory = Path(out) / "fig1_theory.csv"
    fh, w = _writer(theory, ["estimator", "figure", "value"])
    with fh:
        w.writerow(["cle", "mse", _num(analytic.qubit_closed_form("iso_canonical", FIG1_BLOCH, "canonical", "mse"))])
        w.writerow(["blue_oracle", "mse", _num(analytic.qubit_closed_form("cube", FIG1_BLOCH, "optimal", "mse"))])
    return paths + [theory]


def fig2(out, dims=range(2, 7), r: int = 1, s_grid=None) -> list[Path]:
    """Covariant-measurement scaled MSE and MSB versus s, optimal and canonical."""
    s_grid = np.round(np.arange(0, 1, 0.02), 10) if s_grid is None else s_grid
    path = Path(out) / "fig2.csv"
    fh, w = _writer(path, ["d", "r", "s", "recon", "figure", "value"])
    with fh:
        for d in dims:
            for s in s_grid:
                opt = analytic.covariant_blue_figures(d, r, float(s))
                lam1, lam2 = analytic.family_eigenvalues(d, r, float(s))
                can = analytic.covariant_canonical_figures([lam1] * r + [lam2] * (d - r))
                for recon, figs in (("optimal", opt), ("canonical", can)):
                    for fig in ("mse", "msb"):
                        w.writerow([d, r, _num(s), recon, fig, _num(figs[fig])])
    return [path]


def fig3(out, seed: int = 0, reps: int = 300, N: int = 1000, s_values=(0.5, 0.9), n_angles: int = 8) -> list[Path]:
    """MUB estimates for states on the x-z great circle; canonical vs optimal reconstruction.

    Writes per-trial Bloch estimates and a summary of N-scaled x-z covariances,
    empirical next to the exact 2x2 marginal of the MSE matrix.
    """
    povm = mub_povm(2)
    can = est.canonical_recon(povm)
    states = [(s, 2 * math.pi * k / n_angles) for s in s_values for k in range(n_angles)]
    trials = Path(out) / "fig3_trials.csv"
    summary = Path(out) / "fig3_ellipses.csv"
    fh, w = _writer(trials, ["state", "x", "z", "recon", "rep", "est_x", "est_z"])
    fs, ws = _writer(summary, ["state", "x", "z", "recon", "source", "cxx", "cxz", "czz"])
    with fh, fs:
        for i, (s, th) in enumerate(states):
            x, z = s * math.cos(th), s * math.sin(th)
            rho = bloch_state([x, 0.0, z])
            p = povm.probabilities(rho)
            p = p / p.sum()
            freqs = np.array([sample_counts(p, N, trial_seed(seed, i, r)) for r in range(reps)]) / N
            opt = est.optimal_recon(povm, rho)
            for label, recon in (("canonical", can), ("optimal", opt)):
                bloch = np.sqrt(2) * (freqs @ recon.thetas)[:, [1, 3]]
                for r, (bx, bz) in enumerate(bloch):
                    w.writerow([i, _num(x), _num(z), label, r, _num(bx), _num(bz)])
                emp = N * np.cov(bloch.T, ddof=1)
                exact = 2 * est.mse_matrix(povm, recon, rho)[np.ix_([1, 3], [1, 3])]
                for source, c in (("empirical", emp), ("exact", exact)):
                    ws.writerow([i, _num(x), _num(z), label, source, _num(c[0, 0]), _num(c[0, 1]), _num(c[1, 1])])
    return [trials, summary]


FIG4_MEASUREMENTS = ("sic", "mub", "cube", "covariant")


def _fig4_povm(name):
    return {"sic": lambda: sic_povm(2), "mub": lambda: mub_povm(2),
            "cube": lambda: platonic_povm("cube"), "covariant": covariant_povm}[name]()


def fig4(out, seed: int = 0, samples: int = 10_000, s_grid=None, monte_carlo: bool = True) -> list[Path]:
    """Orbit-averaged qubit MSE, MSB and log volume versus Bloch length.

    Closed forms for every measurement (SIC log volume by sphere quadrature),
    the isotropic canonical curve, and optionally Haar Monte Carlo estimates
    of the BLUE figures for SIC, MUB and cube.
    """
    s_grid = np.round(np.arange(0, 1, 0.05), 10) if s_grid is None else s_grid
    path = Path(out) / "fig4.csv"
    figs = ("avg_mse", "avg_msb", "avg_logvolume")
    fh, w = _writer(path, ["s", "measurement", "recon", "figure", "source", "value", "stderr"])
    with fh:
        for j, s in enumerate(s_grid):
            s = float(s)
            b = [s, 0.0, 0.0]
            for m in FIG4_MEASUREMENTS:
                for fig in figs:
                    v = analytic.qubit_closed_form(m, b, "optimal", fig)
                    source = "closed_form"
                    if v == analytic.NUMERIC_ONLY:
                        v, source = analytic.sic_avg_logvolume(s), "quadrature"
                    w.writerow([_num(s), m, "optimal", fig, source, _num(v), ""])
            for fig in figs:
                v = analytic.qubit_closed_form("iso_canonical", b, "canonical", fig)
                w.writerow([_num(s), "iso", "canonical", fig, "closed_form", _num(v), ""])
            if not monte_carlo:
                continue
            for i, m in enumerate(FIG4_MEASUREMENTS[:3]):
                states = orbit_states(2, s, samples, trial_seed(seed, j, i))
                vals = blue_figures_batch(_fig4_povm(m), states)
                for fig, key in zip(figs, ("mse", "msb", "log_volume")):
                    v = vals[key]
                    se = v.std(ddof=1) / math.sqrt(samples) if samples > 1 else math.nan
                    w.writerow([_num(s), m, "optimal", fig, "haar", _num(v.mean()), _num(se)])
    return [path]


CANNED = {"fig1": fig1, "fig2": fig2, "fig3": fig3, "fig4": fig4}
