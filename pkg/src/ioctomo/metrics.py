"""Figures of merit: weighted MSEs and the uncertainty-ellipsoid volume."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .opspace import gellmann_basis, logdet_bar
from .povm import BoundaryStateError

BOUNDARY_EIG = 1e-12


@dataclass(frozen=True)
class WeightSpec:
    """Distance used to weight the MSE matrix.

    ``kind`` is ``hs``, ``bures``, ``chernoff`` or ``custom``; ``custom`` takes a
    Morozova-Chentsov function ``mc(x, y)``. Operator monotonicity of a custom
    function is the caller's responsibility; only symmetry and positivity are
    spot-checked.
    """

    kind: str = "hs"
    mc: Callable | None = None

    def __post_init__(self):
        if self.kind not in ("hs", "bures", "chernoff", "custom"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.kind == "custom":
            if self.mc is None:
                raise ValueError("custom weights need a Morozova-Chentsov function")
            pts = np.array([0.1, 0.37, 0.8, 1.0])
            x, y = np.meshgrid(pts, pts)
            v = np.asarray(self.mc(x, y), dtype=float)
            if np.any(v <= 0) or not np.allclose(v, v.T):
                raise ValueError("Morozova-Chentsov function must be symmetric and positive")

    def kernel(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "bures":
            return 2 / (x + y)
        if self.kind == "chernoff":
            return 4 / (np.sqrt(x) + np.sqrt(y)) ** 2
        if self.kind == "custom":
            return np.asarray(self.mc(x, y), dtype=float)
        raise ValueError("hs weighting has no Morozova-Chentsov kernel")


HS = WeightSpec("hs")
BURES = WeightSpec("bures")
CHERNOFF = WeightSpec("chernoff")


def weight_superop(rho, spec: WeightSpec = BURES) -> np.ndarray:
    """Weighting matrix W with ``D^2(rho, rho + drho) = <<drho|W|drho>>``.

    In the eigenbasis of rho the metric is
    ``sum_j |drho_jj|^2 / (4 l_j) + sum_{j != k} c(l_j, l_k) |drho_jk|^2 / 4``.
    For ``hs`` W is the identity. Accepts a batch of states.
    """
    rho = np.asarray(rho, dtype=complex)
    d = rho.shape[-1]
    if spec.kind == "hs":
        return np.broadcast_to(np.eye(d * d), rho.shape[:-2] + (d * d, d * d)).copy()
    lam, U = np.linalg.eigh(rho)
    if lam.min() <= BOUNDARY_EIG:
        raise BoundaryStateError(-1, float(lam.min()), BOUNDARY_EIG,
                                 f"boundary state: eigenvalue {lam.min():.3g} (weighting needs a full-rank state)")
    K = spec.kernel(lam[..., :, None], lam[..., None, :]) / 4
    diag = np.arange(d)
    K[..., diag, diag] = 1 / (4 * lam)
    E = gellmann_basis(d).elements
    Uh = np.conj(np.swapaxes(U, -1, -2))
    A = Uh[..., None, :, :] @ E @ U[..., None, :, :]
    return np.einsum("...jk,...ajk,...bjk->...ab", K, A.conj(), A).real


def wmse(C, W) -> float:
    """``Tr(W C)``."""
    C = np.asarray(C)
    W = np.asarray(W)
    if C.shape != W.shape:
        raise ValueError(f"shape mismatch {C.shape} vs {W.shape}")
    return float(np.einsum("ij,ji->", W, C))


def unit_ball_volume(n: int) -> float:
    return float(np.exp(log_unit_ball_volume(n)))


def log_unit_ball_volume(n: int) -> float:
    return 0.5 * n * np.log(np.pi) - gammaln(n / 2 + 1)


def log_ellipsoid_volume(C, dim: int | None = None) -> float:
    """``ln V_{d^2-1} + ln Detbar(C) / 2``."""
    C = np.asarray(C, dtype=float)
    dim = int(round(np.sqrt(C.shape[-1]))) if dim is None else dim
    sign, logdet = np.linalg.slogdet(C[1:, 1:])
    if sign <= 0:
        det = np.linalg.det(C[1:, 1:])
        if det < -1e-12:
            raise ValueError(f"numerically degenerate MSE matrix (restricted det {det:.3g})")
        return -np.inf
    return log_unit_ball_volume(dim * dim - 1) + 0.5 * logdet


def ellipsoid_volume(C, dim: int | None = None) -> float:
    """Volume ``V_{d^2-1} sqrt(Detbar C)`` of the scaled uncertainty ellipsoid (HS metric)."""
    return float(np.exp(log_ellipsoid_volume(C, dim)))


def log_volume_from_fisher(Fbar) -> float:
    """``ln V`` from the restricted Fisher superoperator, ``V = V_n Detbar(Fbar)^{-1/2}``."""
    Fbar = np.asarray(Fbar, dtype=float)
    dim = int(round(np.sqrt(Fbar.shape[-1])))
    return log_unit_ball_volume(dim * dim - 1) - 0.5 * logdet_bar(Fbar)
