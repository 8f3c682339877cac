"""Seeded Monte Carlo harness.

Randomness for trial ``(N index i, repetition r)`` comes from
``SeedSequence(seed, spawn_key=(i, r))``, so results do not depend on the
order in which trials run or on the number of worker threads.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import estimators as est
from .metrics import BURES, CHERNOFF, weight_superop
from .opspace import check_state, vectorize
from .povm import PAULI, BoundaryStateError, Povm, frame_superop_from_probs, povm_from_dict, resolve_povm
from .analytic import family_state

log = logging.getLogger(__name__)

ESTIMATORS = ("cle", "blue_oracle", "blue_plugin", "blue_twostep", "mle")
ALIASES = {"blue1": "blue_oracle", "blue2": "blue_plugin", "blue": "blue_plugin"}
FIGURES = ("mse", "msb", "wmse_chernoff")
CHUNK = 100


def bloch_state(bloch) -> np.ndarray:
    v = np.asarray(bloch, dtype=float)
    if v.shape != (3,) or v @ v > 1 + 1e-12:
        raise ValueError(f"invalid Bloch vector {bloch}")
    return (np.eye(2) + np.einsum("i,iab->ab", v, PAULI)) / 2


def state_from_spec(spec: dict) -> np.ndarray:
    """Density matrix from ``{"bloch"}``, ``{"family"}``, ``{"matrix"}`` or ``{"file"}``."""
    if not isinstance(spec, dict):
        raise ValueError(f"state spec must be a JSON object, got {type(spec).__name__}")
    if "file" in spec:
        spec = json.loads(Path(spec["file"]).read_text())
    if "bloch" in spec:
        return bloch_state(spec["bloch"])
    if "family" in spec:
        fam = spec["family"]
        return family_state(int(fam["d"]), int(fam["r"]), float(fam["s"]))
    if "matrix" in spec:
        m = np.asarray(spec["matrix"], dtype=float)
        if m.ndim != 3 or m.shape[-1] != 2:
            raise ValueError("state matrix entries must be [re, im] pairs")
        return check_state(m[..., 0] + 1j * m[..., 1], atol=1e-10)
    raise ValueError(f"cannot interpret state spec {spec}")


def sample_counts(probs, N: int, seed=None) -> np.ndarray:
    """Multinomial counts for ``N`` shots.

    ``seed`` may be an int, a ``SeedSequence`` or a ``Generator``.
    """
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1) > 1e-12:
        raise ValueError("invalid probability vector")
    if N < 0:
        raise ValueError("N must be nonnegative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.multinomial(int(N), p / p.sum())


def trial_seed(seed: int, n_index: int, rep: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(n_index, rep))


def log_grid(lo_exp: float = 2.0, hi_exp: float = 5.0, step: float = 0.5) -> list[int]:
    n = int(round((hi_exp - lo_exp) / step)) + 1
    return [int(round(10 ** (lo_exp + k * step))) for k in range(n)]


@dataclass
class ExperimentConfig:
    """Monte Carlo experiment description (JSON-serializable).

    ``state`` is one of ``{"bloch": [x, y, z]}``, ``{"family": {"d", "r", "s"}}``,
    ``{"matrix": [[[re, im], ...], ...]}`` or ``{"file": path}`` (a JSON file
    holding one of the others). ``povm`` is ``builtin:<name>``, a file path, or
    an inline POVM dict.
    """

    povm: object = "builtin:cube"
    state: dict = field(default_factory=lambda: {"bloch": [0.6886, 0.1137, -0.5025]})
    estimators: list = field(default_factory=lambda: ["cle", "blue_oracle", "blue_plugin", "mle"])
    N_grid: list = field(default_factory=log_grid)
    repetitions: int = 100
    seed: int = 0
    figures: list = field(default_factory=lambda: ["mse"])
    pairwise: bool = True
    output: str | None = None
    mle_max_iter: int = 10_000
    mle_tol: float = 1e-12

    def __post_init__(self):
        self.estimators = [ALIASES.get(e.lower(), e.lower()) for e in self.estimators]
        bad = [e for e in self.estimators if e not in ESTIMATORS]
        if bad:
            raise ValueError(f"unknown estimators {bad}; choose from {ESTIMATORS}")
        bad = [f for f in self.figures if f not in FIGURES]
        if bad:
            raise ValueError(f"unknown figures {bad}; choose from {FIGURES}")
        self.N_grid = [int(n) for n in self.N_grid]
        if not self.N_grid or min(self.N_grid) < 1:
            raise ValueError("N grid must contain positive shot counts")
        if self.repetitions < 1:
            raise ValueError("need at least one repetition")

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)

    def build_povm(self) -> Povm:
        return povm_from_dict(self.povm) if isinstance(self.povm, dict) else resolve_povm(str(self.povm))

    def build_state(self) -> np.ndarray:
        return state_from_spec(self.state)


@dataclass
class TrialRecord:
    """One (N, repetition, estimator) outcome; scaled figures are N x squared error."""

    N: int
    rep: int
    estimator: str
    values: dict
    error: str | None = None
    wall_time: float = 0.0


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list
    aggregate: list

    def rows(self):
        for r in self.records:
            for fig, val in r.values.items():
                yield r.N, r.rep, r.estimator, fig, val

    def write_csv(self, prefix) -> tuple[Path, Path]:
        """Write ``<prefix>_trials.csv`` and ``<prefix>_aggregate.csv``."""
        prefix = Path(prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        trials = prefix.with_name(prefix.name + "_trials.csv")
        agg = prefix.with_name(prefix.name + "_aggregate.csv")
        with open(trials, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["N", "rep", "estimator", "figure", "value"])
            for N, rep, e, fig, val in self.rows():
                w.writerow([N, rep, e, fig, repr(float(val))])
        with open(agg, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["N", "estimator", "figure", "mean", "stderr", "R"])
            for row in self.aggregate:
                w.writerow([row["N"], row["estimator"], row["figure"], repr(row["mean"]),
                            repr(row["stderr"]), row["R"]])
        return trials, agg

    def mean(self, N, estimator, figure="mse") -> tuple[float, float]:
        for row in self.aggregate:
            if row["N"] == N and row["estimator"] == estimator and row["figure"] == figure:
                return row["mean"], row["stderr"]
        raise KeyError((N, estimator, figure))


def pair_label(a: str, b: str) -> str:
    return f"{a}~{b}"


def _estimate_kets(name, povm, freqs, N, rho_true, recon, cfg):
    if name == "cle":
        return est.cle_batch(povm, freqs, recon)
    if name == "blue_oracle":
        return est.oracle_blue_batch(povm, freqs, rho_true)
    if name == "blue_plugin":
        return est.plugin_blue_batch(povm, freqs, N)
    if name == "blue_twostep":
        return est.twostep_blue_batch(povm, freqs, N, recon)
    rhos, _ = est.mle_batch(povm, freqs, cfg.mle_max_iter, cfg.mle_tol)
    return vectorize(rhos)


def _run_estimator(name, povm, freqs, N, rho_true, recon, cfg):
    """Batched estimate with per-trial fallback so one failure only blanks its own row."""
    errors = [None] * len(freqs)
    try:
        kets = _estimate_kets(name, povm, freqs, N, rho_true, recon, cfg)
        if np.all(np.isfinite(kets)):
            return kets, errors
    except (np.linalg.LinAlgError, ValueError) as exc:
        log.debug("batch %s failed (%s); retrying per trial", name, exc)
    kets = np.full((len(freqs), povm.dim**2), np.nan)
    for i, f in enumerate(freqs):
        try:
            k = _estimate_kets(name, povm, f[None], N, rho_true, recon, cfg)[0]
            if not np.all(np.isfinite(k)):
                raise FloatingPointError("non-finite estimate")
            kets[i] = k
        except (np.linalg.LinAlgError, ValueError, FloatingPointError) as exc:
            errors[i] = f"{type(exc).__name__}: {exc}"
    return kets, errors


def _run_chunk(cfg, povm, rho_true, probs, weights, recon, n_index, reps):
    N = cfg.N_grid[n_index]
    counts = np.array([sample_counts(probs, N, trial_seed(cfg.seed, n_index, r)) for r in reps])
    freqs = counts / N
    true_ket = vectorize(rho_true)
    records = []
    kets = {}
    for name in cfg.estimators:
        t0 = time.perf_counter()
        k, errors = _run_estimator(name, povm, freqs, N, rho_true, recon, cfg)
        dt = (time.perf_counter() - t0) / len(reps)
        kets[name] = k
        delta = k - true_ket
        vals = {"mse": N * np.sum(delta**2, axis=1)}
        for fig, W in weights.items():
            vals[fig] = N * np.einsum("ri,ij,rj->r", delta, W, delta)
        for i, r in enumerate(reps):
            records.append(TrialRecord(N, r, name, {f: float(vals[f][i]) for f in cfg.figures},
                                       errors[i], dt))
    if cfg.pairwise:
        names = cfg.estimators
        for a in range(len(names)):
            for b in range(a + 1, len(names)):
                diff = kets[names[a]] - kets[names[b]]
                pm = N * np.sum(diff**2, axis=1)
                for i, r in enumerate(reps):
                    records.append(TrialRecord(N, r, pair_label(names[a], names[b]),
                                               {"pairwise_mse": float(pm[i])}))
    return records


def _aggregate(records, order):
    groups = {}
    for r in records:
        for fig, val in r.values.items():
            groups.setdefault((r.N, r.estimator, fig), []).append(val)
    out = []
    for (N, e, fig), vals in sorted(groups.items(), key=lambda kv: (kv[0][0], order[kv[0][1]], kv[0][2])):
        v = np.asarray(vals, dtype=float)
        v = v[np.isfinite(v)]
        n = len(v)
        mean = float(v.mean()) if n else math.nan
        se = float(v.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
        out.append({"N": N, "estimator": e, "figure": fig, "mean": mean, "stderr": se, "R": n})
    return out


def run_experiment(config: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    """Run every (N, repetition) trial and aggregate mean and standard error.

    Trials are processed in fixed-size chunks; chunks run on up to ``threads``
    worker threads and results are re-sorted, so output is identical for any
    thread count. Estimator failures produce ``nan`` rows, never exceptions.
    """
    povm = config.build_povm()
    rho = config.build_state()
    if rho.shape[0] != povm.dim:
        raise ValueError(f"state dimension {rho.shape[0]} does not match POVM dimension {povm.dim}")
    probs = povm.probabilities(rho)
    probs = np.clip(probs, 0, None)
    probs = probs / probs.sum()
    weights = {}
    if "msb" in config.figures:
        weights["msb"] = weight_superop(rho, BURES)
    if "wmse_chernoff" in config.figures:
        weights["wmse_chernoff"] = weight_superop(rho, CHERNOFF)
    recon = None
    if {"cle", "blue_twostep"} & set(config.estimators):
        recon = est.canonical_recon(povm)

    tasks = [(i, list(range(start, min(start + CHUNK, config.repetitions))))
             for i in range(len(config.N_grid)) for start in range(0, config.repetitions, CHUNK)]

    def work(task):
        return _run_chunk(config, povm, rho, probs, weights, recon, *task)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(work, tasks))
    else:
        chunks = [work(t) for t in tasks]
    order = {name: k for k, name in enumerate(config.estimators)}
    names = config.estimators
    for a in range(len(names)):
        for b in range(a + 1, len(names)):
            order[pair_label(names[a], names[b])] = len(order)
    records = [r for chunk in chunks for r in chunk]
    records.sort(key=lambda r: (r.N, r.rep, order[r.estimator]))
    result = ExperimentResult(config, records, _aggregate(records, order))
    if config.output:
        result.write_csv(config.output)
    return result


# --- Haar averages ------------------------------------------------------------

def haar_unitaries(d: int, samples: int, rng) -> np.ndarray:
    """Haar-random unitaries: QR of complex Ginibre matrices with phase correction."""
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    Z = (rng.normal(size=(samples, d, d)) + 1j * rng.normal(size=(samples, d, d))) / math.sqrt(2)
    Q, R = np.linalg.qr(Z)
    diag = np.diagonal(R, axis1=-2, axis2=-1)
    return Q * (diag / np.abs(diag))[:, None, :]


def orbit_states(d: int, spectrum, samples: int, seed) -> np.ndarray:
    """Haar-random rotations ``U diag(spectrum) U^dag``.

    ``spectrum`` may be a qubit Bloch length ``s`` (d = 2) or d eigenvalues.
    """
    if np.ndim(spectrum) == 0:
        if d != 2:
            raise ValueError("a scalar spectrum is a Bloch length and needs d = 2")
        s = float(spectrum)
        lam = np.array([(1 + s) / 2, (1 - s) / 2])
    else:
        lam = np.asarray(spectrum, dtype=float)
        if len(lam) != d:
            raise ValueError(f"need {d} eigenvalues")
    U = haar_unitaries(d, samples, seed)
    return (U * lam[None, None, :]) @ U.conj().transpose(0, 2, 1)


def haar_average(quantity, d: int, spectrum, samples: int, seed=None, batched: bool = False) -> dict:
    """Mean and standard error of ``quantity(state)`` over the unitary orbit of a spectrum.

    With ``batched=True`` the quantity receives the whole (samples, d, d) stack
    and returns an array.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    states = orbit_states(d, spectrum, samples, seed)
    vals = np.asarray(quantity(states) if batched else [quantity(r) for r in states], dtype=float)
    se = float(vals.std(ddof=1) / math.sqrt(samples)) if samples > 1 else math.nan
    return {"mean": float(vals.mean()), "stderr": se, "samples": samples}


def blue_figures_batch(povm: Povm, rhos) -> dict:
    """BLUE scaled MSE, MSB and log ellipsoid volume for a stack of interior states."""
    from .metrics import log_unit_ball_volume

    rhos = np.asarray(rhos, dtype=complex)
    d = povm.dim
    p = povm.probabilities(rhos)
    if np.any(p <= 0):
        k = int(np.argmin(p.min(axis=0)))
        raise BoundaryStateError(k, float(p.min()), 0.0)
    F = frame_superop_from_probs(povm, p)
    r = vectorize(rhos)
    C = np.linalg.inv(F) - r[..., :, None] * r[..., None, :]
    W = weight_superop(rhos, BURES)
    sign, logdet = np.linalg.slogdet(C[..., 1:, 1:])
    return {
        "mse": np.trace(C, axis1=-2, axis2=-1),
        "msb": np.einsum("...ij,...ji->...", W, C),
        "log_volume": log_unit_ball_volume(d * d - 1) + 0.5 * np.where(sign > 0, logdet, np.nan),
    }


def canonical_figures_batch(povm: Povm, rhos) -> dict:
    """Same figures as :func:`blue_figures_batch` for canonical reconstruction."""
    from .metrics import log_unit_ball_volume

    rhos = np.asarray(rhos, dtype=complex)
    d = povm.dim
    T = est.canonical_recon(povm).thetas
    p = povm.probabilities(rhos)
    r = vectorize(rhos)
    C = np.einsum("ki,...k,kj->...ij", T, p, T) - r[..., :, None] * r[..., None, :]
    W = weight_superop(rhos, BURES)
    sign, logdet = np.linalg.slogdet(C[..., 1:, 1:])
    return {
        "mse": np.trace(C, axis1=-2, axis2=-1),
        "msb": np.einsum("...ij,...ji->...", W, C),
        "log_volume": log_unit_ball_volume(d * d - 1) + 0.5 * np.where(sign > 0, logdet, np.nan),
    }


def loglog_slope(x, y) -> float:
    """Least-squares slope of log(y) against log(x)."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


__all__ = [
    "ExperimentConfig", "ExperimentResult", "TrialRecord", "run_experiment", "sample_counts",
    "haar_average", "haar_unitaries", "orbit_states", "blue_figures_batch", "canonical_figures_batch",
    "bloch_state", "state_from_spec", "log_grid", "loglog_slope", "trial_seed",
]
