"""Linear (canonical and best linear unbiased) and maximum-likelihood estimators.

Every estimator has a batched core operating on a ``(R, K)`` array of
frequencies, used directly by the Monte Carlo harness; the public functions
wrap it for a single data set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .opspace import (
    bar_restrict,
    devectorize,
    gellmann_basis,
    identity_ket,
    ket_outer,
    pinv,
    vectorize,
)
from .povm import (
    BOUNDARY_EPS,
    BoundaryStateError,
    NotInformationallyCompleteError,
    Povm,
    frame_superop,
    frame_superop_at,
    frame_superop_from_probs,
)

IC_RTOL = 1e-10
ORACLE_MIN_EIG = 1e-10

MODES = ("canonical", "blue_oracle", "blue_plugin", "blue_twostep", "incomplete")


@dataclass(frozen=True)
class Frequencies:
    """Observed relative frequencies, optionally with the underlying counts."""

    f: np.ndarray
    N: int | None = None

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float)
        if np.any(f < 0) or abs(f.sum() - 1) > 1e-12:
            raise ValueError("frequencies must be nonnegative and sum to 1")
        object.__setattr__(self, "f", f)

    @classmethod
    def from_counts(cls, counts) -> "Frequencies":
        counts = np.asarray(counts)
        if np.any(counts < 0) or not np.all(np.equal(np.mod(counts, 1), 0)):
            raise ValueError("counts must be nonnegative integers")
        N = int(counts.sum())
        if N < 1:
            raise ValueError("need at least one count")
        return cls(counts / N, N)

    @property
    def counts(self) -> np.ndarray | None:
        return None if self.N is None else np.rint(self.f * self.N)


@dataclass(frozen=True)
class ReconstructionSet:
    """Reconstruction operators as Gell-Mann coordinate rows, shape (K, d^2)."""

    thetas: np.ndarray = field(repr=False)
    mode: str
    dim: int

    @property
    def operators(self) -> np.ndarray:
        return devectorize(self.thetas, gellmann_basis(self.dim))

    def estimate(self, freqs) -> np.ndarray:
        f = freqs.f if isinstance(freqs, Frequencies) else np.asarray(freqs, dtype=float)
        return devectorize(f @ self.thetas, gellmann_basis(self.dim))


@dataclass
class EstimationResult:
    estimate: np.ndarray
    mode: str
    scaled_mse_matrix: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)


def _as_freqs(freqs) -> Frequencies:
    return freqs if isinstance(freqs, Frequencies) else Frequencies(freqs)


def _require_ic(F: np.ndarray):
    ev = np.linalg.eigvalsh(F)
    if ev.min() <= IC_RTOL * ev.max():
        raise NotInformationallyCompleteError(
            "measurement is not informationally complete (singular frame superoperator)")


# --- reconstruction operators ----------------------------------------------

def canonical_recon(povm: Povm) -> ReconstructionSet:
    """``|Theta_k>> = d F^{-1} |Pi_k>> / tr(Pi_k)``."""
    F = frame_superop(povm)
    _require_ic(F)
    thetas = np.linalg.solve(F, povm.dim * povm.kets.T / povm.weights).T
    return ReconstructionSet(thetas, "canonical", povm.dim)


def _optimal_thetas(povm: Povm, probs: np.ndarray) -> np.ndarray:
    F = frame_superop_from_probs(povm, probs)
    return np.linalg.solve(F, povm.kets.T / probs).T


def optimal_recon(povm: Povm, rho_ref, eps: float = BOUNDARY_EPS, mode: str = "blue_oracle") -> ReconstructionSet:
    """Pointwise optimal operators ``|Theta_k>> = F(rho)^{-1} |Pi_k>> / p_k``."""
    F = frame_superop_at(povm, rho_ref, eps)
    _require_ic(F)
    p = povm.probabilities(rho_ref)
    thetas = np.linalg.solve(F, povm.kets.T / p).T
    return ReconstructionSet(thetas, mode, povm.dim)


def incomplete_recon(povm: Povm, rho, eps: float = BOUNDARY_EPS, rtol: float = 1e-10):
    """Optimal reconstruction on the span of the outcomes for any measurement.

    Returns:
        ``(recon, C_R)`` with ``|Theta_k>> = F(rho)^+ |Pi_k>> / p_k`` and
        ``C_R = Fbar(rho)^+`` the scaled MSE matrix on the reconstruction subspace.
    """
    F = frame_superop_at(povm, rho, eps)
    p = povm.probabilities(rho)
    thetas = (pinv(F, rtol) @ (povm.kets.T / p)).T
    C_R = pinv(bar_restrict(F), rtol)
    return ReconstructionSet(thetas, "incomplete", povm.dim), C_R


# --- MSE and Fisher information --------------------------------------------

def mse_matrix(povm: Povm, recon: ReconstructionSet, rho) -> np.ndarray:
    """Scaled MSE matrix ``sum_k p_k |Theta_k>><<Theta_k| - |m>><<m|`` with ``m = sum_k p_k Theta_k``.

    For an unbiased set ``m`` is the true state.
    """
    p = povm.probabilities(rho)
    T = recon.thetas
    mean = p @ T
    return (T.T * p) @ T - ket_outer(mean)


def blue_mse_matrix(povm: Povm, rho, eps: float = BOUNDARY_EPS) -> np.ndarray:
    """``F(rho)^{-1} - |rho>><<rho|``, the MSE matrix of the BLUE."""
    F = frame_superop_at(povm, rho, eps)
    r = vectorize(rho)
    return np.linalg.inv(F) - ket_outer(r)


def fisher_matrix(povm: Povm, rho, basis=None, eps: float = BOUNDARY_EPS) -> np.ndarray:
    """Fisher information in the affine parametrization ``rho = 1/d + sum_j theta_j E_j``.

    ``I_jk = sum_xi tr(E_j Pi) tr(Pi E_k) / p``, computed from traces directly.
    """
    basis = gellmann_basis(povm.dim) if basis is None else basis
    E = basis.elements[1:]
    p = povm.probabilities(rho)
    k = int(np.argmin(p))
    if p[k] <= eps:
        raise BoundaryStateError(k, float(p[k]), eps)
    T = np.einsum("jab,kba->jk", E, povm.outcomes).real
    return (T / p) @ T.T


def log_likelihood(povm: Povm, freqs, rho) -> float:
    """Per-shot log-likelihood ``sum_k f_k ln p_k`` (zero-frequency terms skipped)."""
    f = _as_freqs(freqs).f
    p = povm.probabilities(rho)
    m = f > 0
    with np.errstate(divide="ignore"):
        return float(np.sum(f[m] * np.log(p[m])))


# --- batched cores -----------------------------------------------------------

def _trace_fix(kets: np.ndarray, dim: int) -> np.ndarray:
    # closest unit-trace operator in HS norm
    out = np.array(kets, dtype=float)
    out[..., 0] = 1 / np.sqrt(dim)
    return out


def regularize_frequencies(freqs: np.ndarray, N) -> np.ndarray:
    """Add-half pseudocounts: ``(n + 1/2) / (N + K/2)``."""
    freqs = np.asarray(freqs, dtype=float)
    N = np.asarray(N, dtype=float)[..., None]
    K = freqs.shape[-1]
    return (freqs * N + 0.5) / (N + K / 2)


def cle_batch(povm: Povm, freqs: np.ndarray, recon: ReconstructionSet | None = None) -> np.ndarray:
    recon = canonical_recon(povm) if recon is None else recon
    return np.asarray(freqs) @ recon.thetas


def _check_oracle_state(rho):
    lam = np.linalg.eigvalsh(np.asarray(rho)).min()
    if lam <= ORACLE_MIN_EIG:
        raise BoundaryStateError(-1, float(lam), ORACLE_MIN_EIG,
                                 f"boundary state: oracle BLUE needs a full-rank true state (min eigenvalue {lam:.3g})")


def oracle_blue_batch(povm: Povm, freqs: np.ndarray, rho_true) -> np.ndarray:
    _check_oracle_state(rho_true)
    return np.asarray(freqs) @ optimal_recon(povm, rho_true).thetas


def plugin_blue_batch(povm: Povm, freqs: np.ndarray, N=None, zero_freq: str = "regularize") -> np.ndarray:
    """Frequencies substituted for probabilities in the optimal operators.

    The estimate is ``F(q)^{-1} sum_k (f_k / q_k) |Pi_k>>`` with ``q`` the
    (regularized) frequencies, shifted to unit trace.
    """
    freqs = np.atleast_2d(np.asarray(freqs, dtype=float))
    q = freqs
    if np.any(freqs <= 0):
        if zero_freq == "error":
            r, k = np.argwhere(freqs <= 0)[0]
            raise BoundaryStateError(int(k), 0.0, 0.0)
        if N is None:
            raise ValueError("zero frequencies need the shot count N for regularization")
        q = regularize_frequencies(freqs, np.broadcast_to(N, freqs.shape[:-1]))
    F = frame_superop_from_probs(povm, q)
    rhs = (freqs / q) @ povm.kets
    kets = np.linalg.solve(F, rhs[..., None])[..., 0]
    return _trace_fix(kets, povm.dim)


def _mix_to_floor(povm: Povm, kets: np.ndarray, floor: np.ndarray) -> np.ndarray:
    """Move states toward 1/d until every probability clears its floor."""
    p = kets @ povm.kets.T
    p0 = povm.weights / povm.dim
    # (1 - t) p + t p0 >= floor  for every outcome
    with np.errstate(divide="ignore", invalid="ignore"):
        need = np.where(p < floor, (floor - p) / (p0 - p), 0.0)
    t = np.clip(need.max(axis=-1), 0, 1)[..., None]
    mixed = identity_ket(povm.dim) / povm.dim
    return (1 - t) * kets + t * mixed


def twostep_blue_batch(povm: Povm, freqs: np.ndarray, N, recon: ReconstructionSet | None = None) -> np.ndarray:
    """Optimal operators built at the canonical estimate.

    Canonical estimates whose predicted probabilities fall below
    ``tr(Pi_k) / (2 d N)`` are first mixed with the maximally mixed state.
    """
    freqs = np.atleast_2d(np.asarray(freqs, dtype=float))
    pre = cle_batch(povm, freqs, recon)
    N = np.broadcast_to(np.asarray(N, dtype=float), freqs.shape[:-1])[..., None]
    floor = povm.weights / povm.dim / (2 * N)
    ref = _mix_to_floor(povm, pre, floor)
    q = ref @ povm.kets.T
    F = frame_superop_from_probs(povm, q)
    rhs = (freqs / q) @ povm.kets
    return np.linalg.solve(F, rhs[..., None])[..., 0]


def mle_batch(povm: Povm, freqs: np.ndarray, max_iter: int = 10_000, tol: float = 1e-12,
              dilution: float = 1.0, min_dilution: float = 1e-12):
    """Diluted R rho R iteration over a batch of frequency vectors.

    Each trial keeps its own dilution ``eps``: a candidate
    ``(1 + eps R) rho (1 + eps R)``, normalized, is accepted when it does not
    lower the log-likelihood, otherwise ``eps`` is halved. A trial stops once an
    accepted step gains less than ``tol``.

    Returns:
        ``(rhos, info)`` with ``rhos`` of shape (R, d, d) and ``info`` holding
        per-trial ``iterations``, ``converged``, ``residual``, ``loglik``.
    """
    freqs = np.atleast_2d(np.asarray(freqs, dtype=float))
    R, K = freqs.shape
    d = povm.dim
    ops = povm.outcomes
    mask = freqs > 0
    rho = np.broadcast_to(np.eye(d, dtype=complex) / d, (R, d, d)).copy()

    def probs(r):
        return np.einsum("kab,rba->rk", ops, r).real

    def loglik(p, idx=slice(None)):
        m, f = mask[idx], freqs[idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(m, f * np.log(np.where(m, p, 1.0)), 0.0).sum(axis=-1)

    def rmat(p, idx=slice(None)):
        m, f = mask[idx], freqs[idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(m, f / np.where(m, p, 1.0), 0.0)
        return np.einsum("rk,kab->rab", ratio, ops)

    p = probs(rho)
    ll = loglik(p)
    eps = np.full(R, float(dilution))
    iters = np.zeros(R, dtype=int)
    active = np.ones(R, dtype=bool)
    converged = np.zeros(R, dtype=bool)
    eye = np.eye(d)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        A = eye + eps[idx, None, None] * rmat(p[idx], idx)
        cand = A @ rho[idx] @ A.conj().transpose(0, 2, 1)
        cand = cand / np.einsum("raa->r", cand).real[:, None, None]
        cand = (cand + cand.conj().transpose(0, 2, 1)) / 2
        p_new = probs(cand)
        ll_new = loglik(p_new, idx)
        gain = ll_new - ll[idx]
        ok = gain >= 0
        acc = idx[ok]
        rho[acc] = cand[ok]
        p[acc] = p_new[ok]
        ll[acc] = ll_new[ok]
        iters[idx] += 1
        done = acc[gain[ok] < tol]
        converged[done] = True
        active[done] = False
        rej = idx[~ok]
        eps[rej] /= 2
        stuck = rej[eps[rej] < min_dilution]
        active[stuck] = False
    Rm = rmat(p)
    residual = np.linalg.norm(Rm @ rho - rho, axis=(1, 2))
    return rho, {"iterations": iters, "converged": converged, "residual": residual, "loglik": ll}


# --- single-data-set estimators ---------------------------------------------

def cle(povm: Povm, freqs) -> EstimationResult:
    """Canonical linear estimate; unit trace but possibly not positive."""
    fr = _as_freqs(freqs)
    recon = canonical_recon(povm)
    est = recon.estimate(fr)
    C = None
    p = povm.probabilities(est)
    if np.all(p > 0):
        C = mse_matrix(povm, recon, est)
    return EstimationResult(est, "canonical", C)


def blue(povm: Povm, freqs, mode: str = "plugin", rho_true=None, zero_freq: str = "regularize") -> EstimationResult:
    """Best linear unbiased estimate with the optimal operators built from:

    * ``oracle``: the true state ``rho_true``;
    * ``plugin``: the observed frequencies (zero frequencies regularized with
      add-half pseudocounts, or rejected with ``zero_freq="error"``);
    * ``twostep``: the canonical linear estimate.
    """
    fr = _as_freqs(freqs)
    basis = gellmann_basis(povm.dim)
    if mode == "oracle":
        if rho_true is None:
            raise ValueError("oracle mode needs rho_true")
        _check_oracle_state(rho_true)
        recon = optimal_recon(povm, rho_true)
        est = recon.estimate(fr)
        return EstimationResult(est, "blue_oracle", blue_mse_matrix(povm, rho_true))
    if mode == "plugin":
        _require_ic(frame_superop(povm))
        ket = plugin_blue_batch(povm, fr.f[None], fr.N, zero_freq)[0]
        label = "blue_plugin"
    elif mode == "twostep":
        if fr.N is None:
            raise ValueError("twostep mode needs the shot count N")
        ket = twostep_blue_batch(povm, fr.f[None], fr.N)[0]
        label = "blue_twostep"
    else:
        raise ValueError(f"unknown BLUE mode {mode!r}")
    est = devectorize(ket, basis)
    C = None
    if np.all(povm.probabilities(est) > 0):
        C = blue_mse_matrix(povm, est)
    return EstimationResult(est, label, C)


def mle(povm: Povm, freqs, max_iter: int = 10_000, tol: float = 1e-12, dilution: float = 1.0) -> EstimationResult:
    """Maximum-likelihood estimate; non-convergence is flagged in diagnostics, not raised."""
    fr = _as_freqs(freqs)
    if fr.N is not None and fr.N < 1:
        raise ValueError("need N >= 1")
    rhos, info = mle_batch(povm, fr.f[None], max_iter, tol, dilution)
    diag = {key: (val[0].item() if hasattr(val[0], "item") else val[0]) for key, val in info.items()}
    return EstimationResult(rhos[0], "mle", None, diag)
