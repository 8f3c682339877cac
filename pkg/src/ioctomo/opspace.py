"""Real vector space of Hermitian operators.

Operators on a d-dimensional Hilbert space are represented by their real
coordinates in an orthonormal Hermitian basis (identity/sqrt(d) first, then
the traceless generalized Gell-Mann matrices). Superoperators are then plain
real d^2 x d^2 arrays, and the projector onto traceless operators is simply
``diag(0, 1, ..., 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

HERMITIAN_ATOL = 1e-12


@dataclass(frozen=True)
class HermitianBasis:
    """Orthonormal basis of d x d Hermitian matrices.

    ``elements[0]`` is ``identity / sqrt(dim)``; the remaining ``dim**2 - 1``
    elements are traceless.
    """

    dim: int
    elements: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.dim * self.dim


@lru_cache(maxsize=None)
def _gellmann(dim: int) -> np.ndarray:
    mats = [np.eye(dim, dtype=complex) / np.sqrt(dim)]
    for j in range(dim):
        for k in range(j + 1, dim):
            sym = np.zeros((dim, dim), dtype=complex)
            sym[j, k] = sym[k, j] = 1 / np.sqrt(2)
            asym = np.zeros((dim, dim), dtype=complex)
            asym[j, k] = -1j / np.sqrt(2)
            asym[k, j] = 1j / np.sqrt(2)
            mats.extend([sym, asym])
    for l in range(1, dim):
        diag = np.zeros(dim)
        diag[:l] = 1
        diag[l] = -l
        mats.append(np.diag(diag / np.sqrt(l * (l + 1))).astype(complex))
    out = np.array(mats)
    out.setflags(write=False)
    return out


def gellmann_basis(dim: int) -> HermitianBasis:
    """Generalized Gell-Mann basis prefixed by the normalized identity.

    For ``dim == 2`` the traceless elements are ``sigma_x, sigma_y, sigma_z``
    divided by sqrt(2), so traceless coordinates are Bloch components / sqrt(2).
    """
    if dim < 1:
        raise ValueError(f"dimension must be positive, got {dim}")
    return HermitianBasis(dim, _gellmann(dim))


def _check_dim(A: np.ndarray, basis: HermitianBasis):
    if A.shape[-2:] != (basis.dim, basis.dim):
        raise ValueError(f"operator shape {A.shape[-2:]} does not match basis dimension {basis.dim}")


def vectorize(A, basis: HermitianBasis | None = None) -> np.ndarray:
    """Coordinates ``tr(E_j A)`` of Hermitian ``A`` (leading batch axes allowed)."""
    A = np.asarray(A)
    if basis is None:
        basis = gellmann_basis(A.shape[-1])
    _check_dim(A, basis)
    # tr(E_j A) = sum_ab (E_j)_ba A_ab
    return np.einsum("jba,...ab->...j", basis.elements, A).real


def devectorize(coords, basis: HermitianBasis | None = None) -> np.ndarray:
    coords = np.asarray(coords, dtype=float)
    if basis is None:
        dim = int(round(np.sqrt(coords.shape[-1])))
        basis = gellmann_basis(dim)
    if coords.shape[-1] != basis.size:
        raise ValueError(f"expected {basis.size} coordinates, got {coords.shape[-1]}")
    return np.einsum("...j,jab->...ab", coords, basis.elements)


def identity_ket(dim: int) -> np.ndarray:
    """|1>> in Gell-Mann coordinates: (sqrt(d), 0, ..., 0)."""
    v = np.zeros(dim * dim)
    v[0] = np.sqrt(dim)
    return v


def is_hermitian(A, atol: float = HERMITIAN_ATOL) -> bool:
    A = np.asarray(A)
    return A.ndim == 2 and A.shape[0] == A.shape[1] and np.allclose(A, A.conj().T, rtol=0, atol=atol)


def check_state(rho, atol: float = HERMITIAN_ATOL) -> np.ndarray:
    """Validate a density matrix and return it as a complex array."""
    rho = np.asarray(rho, dtype=complex)
    if not is_hermitian(rho, atol):
        raise ValueError("state is not Hermitian")
    if abs(np.trace(rho) - 1) > atol:
        raise ValueError(f"state trace {np.trace(rho).real:.3g} != 1")
    if np.linalg.eigvalsh(rho).min() < -atol:
        raise ValueError("state has a negative eigenvalue")
    return rho


def pinv(M, rtol: float | None = None) -> np.ndarray:
    """Moore-Penrose pseudoinverse of a symmetric real matrix.

    Eigenvalues with magnitude below ``rtol * max|eigenvalue|`` are treated
    as zero; ``rtol`` defaults to ``n * eps`` for an n x n input.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[-1]
    if rtol is None:
        rtol = n * np.finfo(float).eps
    w, V = np.linalg.eigh((M + np.swapaxes(M, -1, -2)) / 2)
    cutoff = rtol * np.abs(w).max(axis=-1, keepdims=True)
    keep = np.abs(w) > cutoff
    inv_w = np.where(keep, 1 / np.where(keep, w, 1), 0.0)
    return (V * inv_w[..., None, :]) @ np.swapaxes(V, -1, -2)


def traceless_projector(dim: int) -> np.ndarray:
    P = np.eye(dim * dim)
    P[0, 0] = 0
    return P


def bar_restrict(S) -> np.ndarray:
    """Project a superoperator onto the traceless subspace: ``Ibar S Ibar``."""
    S = np.array(S, dtype=float)
    S[..., 0, :] = 0
    S[..., :, 0] = 0
    return S


def det_bar(S) -> np.ndarray:
    """Determinant of ``S`` restricted to traceless Hermitian operators."""
    S = np.asarray(S, dtype=float)
    return np.linalg.det(S[..., 1:, 1:])


def logdet_bar(S) -> np.ndarray:
    """Natural log of ``det_bar``; raises if the restricted determinant is not positive."""
    S = np.asarray(S, dtype=float)
    sign, logdet = np.linalg.slogdet(S[..., 1:, 1:])
    if np.any(sign <= 0):
        raise ValueError("restricted determinant is not positive")
    return logdet


def trace_bar(S) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    return np.trace(S[..., 1:, 1:], axis1=-2, axis2=-1)


def ket_outer(u, v=None) -> np.ndarray:
    """``|u>><<v|`` for real coordinate vectors (batched over leading axes)."""
    u = np.asarray(u, dtype=float)
    v = u if v is None else np.asarray(v, dtype=float)
    return u[..., :, None] * v[..., None, :]


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    G = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (G + G.conj().T) / 2


def random_state(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random density matrix from the induced (Hilbert-Schmidt for full rank) measure."""
    rank = dim if rank is None else rank
    G = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = G @ G.conj().T
    return rho / np.trace(rho).real
