"""Measurement families and their frame superoperators."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .opspace import gellmann_basis, vectorize

PSD_ATOL = 1e-10
SUM_ATOL = 1e-10
BOUNDARY_EPS = 1e-12

PAULI = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)

SOLIDS = ("tetrahedron", "octahedron", "cube", "icosahedron", "dodecahedron")


class PovmError(ValueError):
    """Raised when a set of operators is not a valid POVM."""


class BoundaryStateError(ValueError):
    """Raised when some outcome has (near) zero probability for the reference state."""

    def __init__(self, index: int, prob: float, eps: float, message: str | None = None):
        self.index = index
        self.prob = prob
        super().__init__(message or f"boundary state: outcome {index} has probability {prob:.3g} <= {eps:g}")


class NotInformationallyCompleteError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Povm:
    """Ordered list of positive outcome operators summing to the identity.

    Args:
        outcomes: complex array of shape (K, d, d).
        family: one of ``sic``, ``mub``, ``platonic``, ``covariant``, ``custom``.
        name: free-form label, e.g. the solid name.
    """

    outcomes: np.ndarray = field(repr=False)
    family: str = "custom"
    name: str = ""

    def __post_init__(self):
        ops = np.array(self.outcomes, dtype=complex)
        if ops.ndim != 3 or ops.shape[1] != ops.shape[2]:
            raise PovmError(f"outcomes must have shape (K, d, d), got {ops.shape}")
        for k, op in enumerate(ops):
            if not np.allclose(op, op.conj().T, rtol=0, atol=PSD_ATOL):
                raise PovmError(f"outcome {k} is not Hermitian")
            if np.linalg.eigvalsh(op).min() < -PSD_ATOL:
                raise PovmError(f"outcome {k} is not positive semidefinite")
        dev = np.abs(ops.sum(axis=0) - np.eye(ops.shape[1])).max()
        if dev > SUM_ATOL:
            raise PovmError(f"outcomes sum to identity only within {dev:.3g}")
        ops.setflags(write=False)
        object.__setattr__(self, "outcomes", ops)

    @property
    def dim(self) -> int:
        return self.outcomes.shape[1]

    def __len__(self) -> int:
        return self.outcomes.shape[0]

    @cached_property
    def weights(self) -> np.ndarray:
        """w_k = tr(Pi_k)."""
        return np.einsum("kaa->k", self.outcomes).real

    @cached_property
    def kets(self) -> np.ndarray:
        """Gell-Mann coordinates of every outcome, shape (K, d^2)."""
        return vectorize(self.outcomes, gellmann_basis(self.dim))

    def probabilities(self, rho) -> np.ndarray:
        """Born probabilities tr(Pi_k rho); accepts a batch of states."""
        return vectorize(np.asarray(rho), gellmann_basis(self.dim)) @ self.kets.T

    def __repr__(self):
        return f"Povm(family={self.family!r}, name={self.name!r}, dim={self.dim}, outcomes={len(self)})"


def bloch_povm(vectors, weights=None, family="custom", name="") -> Povm:
    """Qubit POVM with outcomes ``w_k (1 + v_k . sigma)``; default weights 1/n."""
    v = np.asarray(vectors, dtype=float)
    w = np.full(len(v), 1 / len(v)) if weights is None else np.asarray(weights, dtype=float)
    ops = w[:, None, None] * (np.eye(2) + np.einsum("ki,iab->kab", v, PAULI))
    return Povm(ops, family, name)


def platonic_vertices(solid: str) -> np.ndarray:
    """Unit vertex vectors of a platonic solid inscribed in the Bloch sphere.

    The cube and octahedron take the standard orientation; the tetrahedron is
    the four cube vertices containing (1,1,1)/sqrt(3).
    """
    phi = (1 + np.sqrt(5)) / 2
    if solid == "tetrahedron":
        v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    elif solid == "octahedron":
        v = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=float)
    elif solid == "cube":
        v = np.array([[i, j, k] for i in (1, -1) for j in (1, -1) for k in (1, -1)], dtype=float)
    elif solid == "icosahedron":
        v = np.array([p for a in (1, -1) for b in (phi, -phi)
                      for p in ((0, a, b), (a, b, 0), (b, 0, a))], dtype=float)
    elif solid == "dodecahedron":
        cube = [[i, j, k] for i in (1, -1) for j in (1, -1) for k in (1, -1)]
        rest = [p for a in (1 / phi, -1 / phi) for b in (phi, -phi)
                for p in ((0, a, b), (a, b, 0), (b, 0, a))]
        v = np.array(cube + rest, dtype=float)
    else:
        raise ValueError(f"unknown solid {solid!r}; expected one of {', '.join(SOLIDS)}")
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def platonic_povm(solid: str) -> Povm:
    """Qubit POVM ``Pi_k = (1 + v_k . sigma)/n`` over the vertices of ``solid``."""
    return bloch_povm(platonic_vertices(solid), family="platonic", name=solid)


def covariant_povm(order: int = 40) -> Povm:
    """Discretized qubit covariant measurement.

    Product rule of Gauss-Legendre nodes in cos(theta) and ``2*order``
    equispaced azimuths; a weighted spherical design of degree ``2*order - 1``,
    so frame superoperators at interior states converge exponentially in
    ``order`` to the Haar-integral values.
    """
    x, wx = np.polynomial.legendre.leggauss(order)
    nphi = 2 * order
    phis = (np.arange(nphi) + 0.5) * 2 * np.pi / nphi
    st = np.sqrt(1 - x**2)
    vecs = np.array([[s * np.cos(p), s * np.sin(p), c] for c, s in zip(x, st) for p in phis])
    w = np.repeat(wx / 2, nphi) / nphi
    return bloch_povm(vecs, w, family="covariant", name=f"covariant{order}")


def weyl_heisenberg_orbit(fiducial) -> np.ndarray:
    """Kets ``X^a Z^b |fiducial>`` for a, b = 0..d-1 (shape (d^2, d))."""
    psi = np.asarray(fiducial, dtype=complex)
    d = len(psi)
    omega = np.exp(2j * np.pi / d)
    phases = omega ** np.arange(d)
    kets = []
    for a in range(d):
        for b in range(d):
            kets.append(np.roll(phases**b * psi, a))
    return np.array(kets)


def _builtin_fiducial(dim: int) -> np.ndarray:
    if dim == 2:
        theta = np.arccos(1 / np.sqrt(3))
        return np.array([np.cos(theta / 2), np.exp(1j * np.pi / 4) * np.sin(theta / 2)])
    if dim == 3:
        return np.array([0, 1, -1]) / np.sqrt(2)
    raise ValueError(f"no built-in SIC fiducial for dim={dim}; supply one")


def sic_povm(dim: int, fiducial=None, atol: float = 1e-9) -> Povm:
    """Weyl-Heisenberg SIC POVM ``|psi_k><psi_k|/d``.

    The orbit's pairwise fidelities are checked against ``(d delta + 1)/(d + 1)``
    before the POVM is returned.
    """
    psi = _builtin_fiducial(dim) if fiducial is None else np.asarray(fiducial, dtype=complex)
    if len(psi) != dim:
        raise ValueError(f"fiducial has length {len(psi)}, expected {dim}")
    psi = psi / np.linalg.norm(psi)
    kets = weyl_heisenberg_orbit(psi)
    fid = np.abs(kets.conj() @ kets.T) ** 2
    target = (dim * np.eye(dim * dim) + 1) / (dim + 1)
    dev = np.abs(fid - target).max()
    if dev > atol:
        raise ValueError(f"SIC condition violated (max fidelity deviation {dev:.3g})")
    ops = np.einsum("ka,kb->kab", kets, kets.conj()) / dim
    return Povm(ops, "sic", f"sic{dim}")


def _is_prime(n: int) -> bool:
    return n >= 2 and all(n % p for p in range(2, int(n**0.5) + 1))


def mub_bases(dim: int) -> np.ndarray:
    """Complete set of d + 1 mutually unbiased bases for prime d, shape (d+1, d, d).

    ``bases[k, j]`` is the j-th ket of basis k. For d = 2 these are the
    x, y, z Pauli eigenbases (in that order).
    """
    if not _is_prime(dim):
        raise ValueError(f"dim not prime: {dim}")
    if dim == 2:
        s = 1 / np.sqrt(2)
        return np.array([[[s, s], [s, -s]], [[s, 1j * s], [s, -1j * s]], [[1, 0], [0, 1]]], dtype=complex)
    n = np.arange(dim)
    omega = np.exp(2j * np.pi / dim)
    bases = [np.eye(dim, dtype=complex)]
    for k in range(dim):
        bases.append(np.array([omega ** (k * n * n + j * n) for j in range(dim)]) / np.sqrt(dim))
    return np.array(bases)


def mub_povm(dim: int, atol: float = 1e-10) -> Povm:
    """Union of the d + 1 MUB projective measurements, each weighted 1/(d + 1)."""
    bases = mub_bases(dim)
    kets = bases.reshape(-1, dim)
    overlap = np.abs(kets.conj() @ kets.T) ** 2
    block = np.kron(np.eye(dim + 1), np.ones((dim, dim)))
    target = np.where(block == 1, np.eye(dim * (dim + 1)), 1 / dim)
    dev = np.abs(overlap - target).max()
    if dev > atol:
        raise ValueError(f"bases are not mutually unbiased (deviation {dev:.3g})")
    ops = np.einsum("ka,kb->kab", kets, kets.conj()) / (dim + 1)
    return Povm(ops, "mub", f"mub{dim}")


def frame_superop(povm: Povm) -> np.ndarray:
    """State-independent frame superoperator ``d sum_k |Pi_k>><<Pi_k| / tr(Pi_k)``."""
    w = povm.weights
    if np.any(w <= 0):
        raise PovmError(f"outcome {int(np.argmin(w))} has zero trace")
    K = povm.kets
    return povm.dim * (K.T / w) @ K


def frame_superop_from_probs(povm: Povm, probs) -> np.ndarray:
    """``sum_k |Pi_k>><<Pi_k| / p_k`` for given (possibly batched) probabilities."""
    probs = np.asarray(probs, dtype=float)
    K = povm.kets
    return np.einsum("ki,...k,kj->...ij", K, 1 / probs, K)


def frame_superop_at(povm: Povm, rho, eps: float = BOUNDARY_EPS) -> np.ndarray:
    """State-dependent frame superoperator F(rho) = sum_k |Pi_k>><<Pi_k| / p_k.

    Raises:
        BoundaryStateError: some p_k <= eps.
    """
    p = povm.probabilities(rho)
    k = int(np.argmin(p))
    if p[k] <= eps:
        raise BoundaryStateError(k, float(p[k]), eps)
    return frame_superop_from_probs(povm, p)


def is_informationally_complete(povm: Povm, rtol: float = 1e-10) -> bool:
    ev = np.linalg.eigvalsh(frame_superop(povm))
    return bool(ev.min() > rtol * ev.max())


def _rank_one_vectors(povm: Povm, atol: float = 1e-10):
    vecs = []
    for op in povm.outcomes:
        w, V = np.linalg.eigh(op)
        if np.sum(w > atol) != 1:
            return None
        vecs.append(V[:, -1])
    return np.array(vecs)


def is_tight_ic(povm: Povm, atol: float = 1e-10) -> tuple[bool, float]:
    """Whether a rank-one POVM is a weighted 2-design, with the max entrywise residual.

    Checks ``sum_k w_k (psi_k psi_k^dag)^{(x)2} = 2 P_sym / (d + 1)``. POVMs with a
    higher-rank outcome return ``(False, inf)``.
    """
    psis = _rank_one_vectors(povm)
    if psis is None:
        return False, float("inf")
    d = povm.dim
    projs = np.einsum("ka,kb->kab", psis, psis.conj())
    lhs = np.einsum("k,kab,kcd->acbd", povm.weights, projs, projs).reshape(d * d, d * d)
    swap = np.eye(d * d).reshape(d, d, d, d).transpose(0, 1, 3, 2).reshape(d * d, d * d)
    rhs = (np.eye(d * d) + swap) / (d + 1)
    residual = float(np.abs(lhs - rhs).max())
    return residual < atol, residual


def combine(povms, probs, name="mixture") -> Povm:
    """Randomly choose measurement i with probability probs[i]; outcomes concatenate."""
    probs = np.asarray(probs, dtype=float)
    ops = np.concatenate([p * m.outcomes for p, m in zip(probs, povms)])
    return Povm(ops, "custom", name)


def rotate(povm: Povm, U) -> Povm:
    """Unitarily rotated POVM ``U Pi_k U^dag``."""
    U = np.asarray(U)
    return Povm(U @ povm.outcomes @ U.conj().T, povm.family, povm.name)


# --- JSON files -------------------------------------------------------------

def _complex_to_json(a: np.ndarray):
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def _complex_from_json(data) -> np.ndarray:
    a = np.asarray(data, dtype=float)
    if a.shape[-1] != 2:
        raise PovmError("complex entries must be [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]


def povm_to_dict(povm: Povm) -> dict:
    return {"dim": povm.dim, "family": povm.family, "name": povm.name,
            "outcomes": _complex_to_json(povm.outcomes)}


def povm_from_dict(data: dict) -> Povm:
    try:
        dim = int(data["dim"])
        raw = data["outcomes"]
    except (KeyError, TypeError) as exc:
        raise PovmError(f"POVM file needs 'dim' and 'outcomes': {exc}") from None
    ops = []
    for k, m in enumerate(raw):
        try:
            op = _complex_from_json(m)
        except (ValueError, PovmError) as exc:
            raise PovmError(f"outcome {k}: {exc}") from None
        if op.shape != (dim, dim):
            raise PovmError(f"outcome {k} has shape {op.shape}, expected ({dim}, {dim})")
        ops.append(op)
    return Povm(np.array(ops), data.get("family", "custom"), data.get("name", ""))


def save_povm(povm: Povm, path) -> None:
    Path(path).write_text(json.dumps(povm_to_dict(povm)))


def load_povm(path) -> Povm:
    return povm_from_dict(json.loads(Path(path).read_text()))


def load_fiducial(path) -> np.ndarray:
    data = json.loads(Path(path).read_text())
    a = np.asarray(data, dtype=float)
    return _complex_from_json(a) if a.ndim == 2 else a.astype(complex)


def resolve_povm(spec: str) -> Povm:
    """Build a POVM from ``builtin:<name>`` or a JSON file path.

    Built-in names: the five platonic solids, ``sic2``, ``sic3``, ``mub<p>`` for
    prime p, and ``covariant`` (discretized qubit covariant measurement).
    """
    if not spec.startswith("builtin:"):
        return load_povm(spec)
    name = spec.split(":", 1)[1]
    if name in SOLIDS:
        return platonic_povm(name)
    if name == "covariant":
        return covariant_povm()
    if name.startswith("sic") and name[3:].isdigit():
        return sic_povm(int(name[3:]))
    if name.startswith("mub") and name[3:].isdigit():
        return mub_povm(int(name[3:]))
    raise ValueError(f"unknown built-in POVM {name!r}")
