"""Closed-form efficiencies of SIC, MUB, platonic and covariant measurements.

These evaluators double as oracles for the numeric pipeline in
:mod:`ioctomo.estimators` and :mod:`ioctomo.metrics`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .metrics import BURES, HS, WeightSpec, log_unit_ball_volume

NUMERIC_ONLY = "numeric-only"
"""Returned by :func:`qubit_closed_form` for combinations without a closed form."""

SQRT3 = math.sqrt(3)


# --- covariant measurement on rho_r(s) --------------------------------------

def family_eigenvalues(d: int, r: int, s: float) -> tuple[float, float]:
    """Eigenvalues ``(s/r + (1-s)/d, (1-s)/d)`` of the rank-r family state."""
    return s / r + (1 - s) / d, (1 - s) / d


def family_state(d: int, r: int, s: float) -> np.ndarray:
    lam1, lam2 = family_eigenvalues(d, r, s)
    return np.diag([lam1] * r + [lam2] * (d - r)).astype(complex)


def _check_family(d, r, s):
    if not 1 <= r <= d - 1:
        raise ValueError(f"need 1 <= r <= d - 1, got d={d}, r={r}")
    if not 0 <= s <= 1:
        raise ValueError(f"need 0 <= s <= 1, got {s}")


def _cos_sin_integral(m: int, u):
    """``int_0^{pi/2} cos(a) sin(a)^{2m+1} / (cos(a)^2 + u) da`` in closed form (mpmath)."""
    one_u = 1 + u
    head = one_u**m * mpmath.log(one_u / u) / 2
    tail = mpmath.fsum(one_u**n / (m - n) for n in range(m)) / 2
    return head - tail


def g_jk(d: int, r: int, s: float, j: int, k: int) -> float:
    """Frame-superoperator coefficient ``g_jk`` of the covariant measurement at rho_r(s).

    Uses the closed-form antiderivative after expanding ``cos^{2p}`` in powers
    of ``sin^2``; the alternating sum is evaluated in extended precision.
    ``s = 0`` and ``s = 1`` use the Beta-function limits.
    """
    _check_family(d, r, s)
    p = r - 1 + j
    q = d - r - 1 + k
    pref = 2 * d * r * math.gamma(d + 1) / (math.gamma(r + j) * math.gamma(d - r + k))
    if s == 0:
        return pref * math.exp(math.lgamma(p + 1) + math.lgamma(q + 1) - math.lgamma(p + q + 2)) / (2 * r)
    if s == 1:
        if p == 0:
            return math.inf
        return pref * math.exp(math.lgamma(p) + math.lgamma(q + 1) - math.lgamma(p + q + 1)) / (2 * d)
    u_float = r * (1 - s) / (d * s)
    dps = 30 + int((p + q + 2) * math.log10(2 + u_float)) + int(max(0, -math.log10(u_float)))
    with mpmath.workdps(dps):
        s_mp = mpmath.mpf(s)
        u = r * (1 - s_mp) / (d * s_mp)
        total = mpmath.fsum(mpmath.binomial(p, i) * (-1) ** i * _cos_sin_integral(q + i, u)
                            for i in range(p + 1))
        return float(pref * total / (d * s_mp))


@dataclass(frozen=True)
class CovariantParams:
    """Eigenvalues of the restricted Fisher superoperator at rho_r(s).

    ``a``, ``b``, ``c``, ``beta`` have multiplicities ``r^2-1``, ``2r(d-r)``,
    ``(d-r)^2-1`` and 1.
    """

    d: int
    r: int
    s: float
    a: float
    b: float
    c: float
    beta: float

    @property
    def multiplicities(self) -> tuple[int, int, int, int]:
        d, r = self.d, self.r
        return r * r - 1, 2 * r * (d - r), (d - r) ** 2 - 1, 1


def _beta(d, r, a, b, c):
    return ((r + 1) * (d - r) * a + r * (d - r + 1) * c - 2 * r * (d - r) * b) / d


def covariant_params(d: int, r: int, s: float) -> CovariantParams:
    """a = g20, b = g11, c = g02 and the remaining eigenvalue beta.

    At ``s = 1`` with ``r >= 2`` the limits are ``a = r/(r+1)``, ``b = 1``,
    ``c = r/(r-1)``; with ``r = 1``, ``c`` and ``beta`` are infinite.
    """
    _check_family(d, r, s)
    if s == 1:
        a, b = r / (r + 1), 1.0
        c = math.inf if r == 1 else r / (r - 1)
    else:
        a, b, c = g_jk(d, r, s, 2, 0), g_jk(d, r, s, 1, 1), g_jk(d, r, s, 0, 2)
    beta = math.inf if math.isinf(c) else _beta(d, r, a, b, c)
    return CovariantParams(d, r, s, a, b, c, beta)


def qubit_covariant_b_beta(s: float) -> tuple[float, float]:
    """Qubit covariant ``b`` and ``beta``; power series below s = 0.1."""
    if not 0 <= s < 1:
        raise ValueError(f"need 0 <= s < 1, got {s}")
    if s < 0.1:
        n = np.arange(1, 14)
        pw = s ** (2 * n - 2)
        return float(2 * np.sum(pw / (4 * n * n - 1))), float(2 * np.sum(pw / (2 * n + 1)))
    L = math.log((1 + s) / (1 - s))
    return (2 * s - (1 - s * s) * L) / (2 * s**3), (L - 2 * s) / s**3


def _kernel(spec: WeightSpec, x, y):
    return float(spec.kernel(x, y))


def covariant_blue_figures(d: int, r: int, s: float, spec: WeightSpec = BURES) -> dict:
    """Scaled MSE, MSB, WMSE (for ``spec``) and ellipsoid volume of the covariant BLUE at rho_r(s).

    Metric-weighted entries are ``nan`` for a rank-deficient state (s = 1).
    """
    P = covariant_params(d, r, s)
    a, b, c, beta = P.a, P.b, P.c, P.beta
    ma, mb, mc, _ = P.multiplicities
    mse = ma / a + mb / b + mc / c + 1 / beta
    lam1, lam2 = family_eigenvalues(d, r, s)
    if lam2 > 0:
        msb = (ma / (a * lam1) + 2 * mb / (b * (lam1 + lam2)) + mc / (c * lam2)
               + (d - r) / (d * beta * lam1) + r / (d * beta * lam2)) / 4
        if spec.kind == "hs":
            wm = mse
        else:
            k11, k12, k22 = _kernel(spec, lam1, lam1), _kernel(spec, lam1, lam2), _kernel(spec, lam2, lam2)
            wm = ((r - 1) / (a * lam1) + r * (r - 1) * k11 / a + mb * k12 / b
                  + (d - r - 1) / (c * lam2) + (d - r) * (d - r - 1) * k22 / c
                  + (d - r) / (d * beta * lam1) + r / (d * beta * lam2)) / 4
    else:
        msb = wm = math.nan
    logdet = sum(m * math.log(x) for m, x in zip(P.multiplicities, (a, b, c, beta)) if m)
    log_volume = log_unit_ball_volume(d * d - 1) - logdet / 2
    return {"mse": mse, "msb": msb, "wmse": wm, "volume": math.exp(log_volume), "log_volume": log_volume}


def pure_limit_mse(d: int, r: int) -> float:
    """Scaled MSE of the covariant BLUE at s = 1: ``d^2 + 2d - 1 - d^2/r - 1/r``, or 2(d-1) for r = 1."""
    if r == 1:
        return 2.0 * (d - 1)
    return d * d + 2 * d - 1 - d * d / r - 1 / r


# --- covariant (isotropic) measurement, canonical reconstruction ------------

def canonical_isotropic_mse_matrix_spectrum(eigenvalues):
    """Blocks of the canonical MSE matrix of an isotropic measurement at diag(eigenvalues).

    Returns:
        ``(Q, off)`` where ``Q`` (d x d) acts on the diagonal matrix units and
        ``off[j, k]`` (j != k) is the eigenvalue on ``E^pm_jk``.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    d = len(lam)
    Q = ((d + 1) * (1 + 2 * lam) * np.eye(d) - 1 - lam[:, None] - lam[None, :]
         - (d + 2) * np.outer(lam, lam)) / (d + 2)
    off = (d + 1) * (1 + lam[:, None] + lam[None, :]) / (d + 2)
    return Q, off


def covariant_canonical_figures(eigenvalues, spec: WeightSpec = BURES) -> dict:
    """Figures of merit for canonical reconstruction with any isotropic measurement."""
    lam = np.asarray(eigenvalues, dtype=float)
    d = len(lam)
    if abs(lam.sum() - 1) > 1e-12 or lam.min() < -1e-12:
        raise ValueError("eigenvalues must form a probability vector")
    mse = d * d + d - 1 - float(lam @ lam)
    Q, off = canonical_isotropic_mse_matrix_spectrum(lam)
    iu = np.triu_indices(d, 1)
    # orthonormal basis of traceless diagonal matrices
    H = np.linalg.qr(np.column_stack([np.ones(d), np.eye(d)[:, :-1]]))[0][:, 1:]
    logdet = 2 * np.sum(np.log(off[iu])) + np.linalg.slogdet(H.T @ Q @ H)[1]
    log_volume = log_unit_ball_volume(d * d - 1) + logdet / 2
    out = {"mse": mse, "volume": math.exp(log_volume), "log_volume": log_volume}
    if lam.min() <= 0:
        out["msb"] = out["wmse"] = math.nan
        return out
    jk = ~np.eye(d, dtype=bool)
    pair_sum = (lam[:, None] + lam[None, :])[jk]
    out["msb"] = ((2 * d**3 + 2 * d * d - 3 * d - 2) / (4 * (d + 2))
                  + (np.sum(d / lam) + np.sum(2 * (d + 1) / pair_sum)) / (4 * (d + 2)))
    if spec.kind == "hs":
        out["wmse"] = mse
    else:
        kern = spec.kernel(lam[:, None], lam[None, :])[jk]
        out["wmse"] = ((2 * d * d - d - 2) / (4 * (d + 2)) + d * np.sum(1 / lam) / (4 * (d + 2))
                       + (d + 1) * np.sum((1 + pair_sum) * kern) / (4 * (d + 2)))
    out = {k: float(v) for k, v in out.items()}
    return out


# --- SIC / MUB / minimal tomography -----------------------------------------

def minimal_ic_bound(d: int, purity: float) -> float:
    """Lower bound ``d^2 + d - 1 - tr(rho^2)`` on the orbit-averaged MSE of minimal IC tomography."""
    if not 1 / d - 1e-12 <= purity <= 1 + 1e-12:
        raise ValueError(f"purity {purity} outside [1/d, 1]")
    return d * d + d - 1 - purity


def sic_mse(d: int, purity: float) -> float:
    """Scaled MSE of SIC tomography (pointwise, equal to the minimal-IC bound)."""
    return minimal_ic_bound(d, purity)


def mub_mse(d: int, purity: float) -> float:
    """Scaled MSE of the BLUE for a complete set of MUB: ``(d+1)(d - tr rho^2)``."""
    if not 1 / d - 1e-12 <= purity <= 1 + 1e-12:
        raise ValueError(f"purity {purity} outside [1/d, 1]")
    return (d + 1) * (d - purity)


def pure_state_limits(d: int) -> dict:
    """Pure-state benchmarks of the covariant measurement versus minimal tomography."""
    if d < 2:
        raise ValueError("need d >= 2")
    mean_trace = math.exp(math.lgamma(d - 0.5) - math.lgamma(d - 1))
    return {
        "covariant_mse": 2.0 * (d - 1),
        "covariant_mean_trace": mean_trace,
        "covariant_mean_hs": math.sqrt(2) * mean_trace,
        "minimal_mse": float(d * d + d - 2),
        "trace_advantage_factor": 4 * d / (3 * math.pi),
    }


# --- qubit catalog ------------------------------------------------------------

QUBIT_MEASUREMENTS = ("sic", "mub", "cube", "covariant", "iso_canonical")
QUBIT_FIGURES = ("mse", "msb", "volume", "avg_mse", "avg_msb", "avg_logvolume")


def _atanh_ratio(s: float) -> float:
    """``ln((1+s)/(1-s)) / s`` with its s -> 0 limit 2."""
    return 2.0 if s < 1e-8 else 2 * math.atanh(s) / s


def _iso_canonical(fig, x, y, z, s2, sic):
    xyz = x * y * z
    if fig in ("mse", "avg_mse"):
        return (9 - s2) / 2
    if fig == "avg_msb" or (fig == "msb" and not sic):
        return 9 / 4 + s2 / (2 * (1 - s2))
    if fig == "msb":
        return 9 / 4 + (s2 + 3 * SQRT3 * xyz) / (2 * (1 - s2))
    if fig == "volume" and sic:
        q4 = x**4 + y**4 + z**4
        return math.sqrt(2 / 3) * math.pi * math.sqrt(2 * q4 + 8 * SQRT3 * xyz - s2 * s2 - 6 * s2 + 9)
    if fig == "volume" or (fig == "avg_logvolume" and not sic):
        v = math.pi * math.sqrt(2 * (3 - s2))
        return v if fig == "volume" else math.log(v)
    return NUMERIC_ONLY


def qubit_closed_form(measurement: str, bloch, recon: str = "optimal", figure: str = "mse"):
    """Evaluate a printed qubit formula.

    Args:
        measurement: ``sic`` (tetrahedron), ``mub`` (octahedron), ``cube``,
            ``covariant`` or ``iso_canonical`` (any isotropic measurement with
            canonical reconstruction; ``recon`` is ignored).
        bloch: Bloch vector (x, y, z); averaged figures use only its length.
        recon: ``canonical`` or ``optimal``.
        figure: one of :data:`QUBIT_FIGURES`.

    Returns:
        The value, or :data:`NUMERIC_ONLY` when no closed form exists
        (e.g. the SIC averaged log-volume).
    """
    x, y, z = (float(t) for t in bloch)
    s2 = x * x + y * y + z * z
    if s2 > 1 + 1e-12:
        raise ValueError(f"Bloch vector length {math.sqrt(s2):.6g} exceeds 1")
    if measurement not in QUBIT_MEASUREMENTS:
        raise ValueError(f"unknown measurement {measurement!r}")
    if figure not in QUBIT_FIGURES:
        raise ValueError(f"unknown figure {figure!r}")
    if recon not in ("canonical", "optimal"):
        raise ValueError(f"unknown reconstruction {recon!r}")
    s = math.sqrt(s2)
    if s2 >= 1 and figure in ("msb", "avg_msb"):
        return math.inf

    if measurement == "iso_canonical" or (recon == "canonical" and measurement != "sic"):
        return _iso_canonical(figure, x, y, z, s2, sic=False)
    if measurement == "sic":
        # minimal IC: optimal and canonical reconstruction coincide
        return _iso_canonical(figure, x, y, z, s2, sic=True)

    q4 = x**4 + y**4 + z**4
    if measurement == "mub":
        if figure in ("mse", "avg_mse"):
            return 3 * (3 - s2) / 2
        if figure == "msb":
            return 3 * (3 - s2) / 4 + 3 * (s2 - q4) / (4 * (1 - s2))
        if figure == "avg_msb":
            return 9 / 4 + 3 * s2 * s2 / (10 * (1 - s2))
        if figure == "volume":
            return math.pi * math.sqrt(6 * (1 - x * x) * (1 - y * y) * (1 - z * z))
        if s2 >= 1:
            return -math.inf
        return math.log(math.sqrt(6) * math.pi) - 3 + 1.5 * (math.log(1 - s2) + _atanh_ratio(s))

    if measurement == "cube":
        if figure == "mse":
            return (27 - 18 * s2 + s2 * s2 + 2 * q4) / (2 * (3 - s2))
        if figure == "avg_mse":
            return (135 - 90 * s2 + 11 * s2 * s2) / (10 * (3 - s2))
        if figure == "msb":
            q6 = x**6 + y**6 + z**6
            return ((27 - 27 * s2 - 2 * s2 * s2) / (12 * (1 - s2))
                    + (6 * q4 - 2 * q6 - 21 * x * x * y * y * z * z) / (3 * (3 - s2) * (1 - s2)))
        if figure == "avg_msb":
            return (945 - 1260 * s2 + 413 * s2**2 - 26 * s2**3) / (140 * (3 - s2) * (1 - s2))
        if figure == "volume":
            f1 = (3 - (x + y - z) ** 2) * (3 - (x - y + z) ** 2)
            f2 = (3 - (-x + y + z) ** 2) * (3 - (x + y + z) ** 2)
            return math.pi / 3 * math.sqrt(2 * f1 / (3 - s2)) * math.sqrt(f2)
        if s2 >= 1:
            return -math.inf
        return (math.log(3 * math.sqrt(2) * math.pi) - 4 + math.log((1 - s2) ** 2 / math.sqrt(3 - s2))
                + 2 * _atanh_ratio(s))

    # covariant, optimal reconstruction: unitarily invariant
    if s >= 1:
        return {"mse": 2.0, "avg_mse": 2.0, "volume": 0.0, "avg_logvolume": -math.inf}[figure]
    b, beta = qubit_covariant_b_beta(s)
    if figure in ("mse", "avg_mse"):
        return 2 / b + 1 / beta
    if figure in ("msb", "avg_msb"):
        return 1 / b + 1 / (2 * beta * (1 - s2))
    v = 4 * math.pi / (3 * b * math.sqrt(beta))
    return v if figure == "volume" else math.log(v)


def qubit_covariant_wmse(s: float, spec: WeightSpec, recon: str = "optimal") -> float:
    """Monotone-metric WMSE of the qubit covariant measurement at Bloch length s."""
    lp, lm = (1 + s) / 2, (1 - s) / 2
    if spec.kind == "hs":
        return qubit_closed_form("covariant" if recon == "optimal" else "iso_canonical", (0, 0, s), recon, "mse")
    c = _kernel(spec, lp, lm)
    if recon == "canonical":
        return 3 * c / 4 + (3 - s * s) / (4 * (1 - s * s))
    b, beta = qubit_covariant_b_beta(s)
    return c / (2 * b) + 1 / (2 * beta * (1 - s * s))


def sphere_average(func, s: float, order: int = 48) -> float:
    """Average of ``func(x, y, z)`` over the sphere of radius s (product Gauss rule)."""
    t, wt = np.polynomial.legendre.leggauss(order)
    nphi = 2 * order
    phis = (np.arange(nphi) + 0.5) * 2 * np.pi / nphi
    total = 0.0
    for ct, w in zip(t, wt):
        st = math.sqrt(1 - ct * ct)
        vals = [func(s * st * math.cos(p), s * st * math.sin(p), s * ct) for p in phis]
        total += w / 2 * float(np.mean(vals))
    return total


def sic_avg_logvolume(s: float, order: int = 48) -> float:
    """Orbit-averaged log-volume for the qubit SIC, by numerical integration."""
    return sphere_average(lambda x, y, z: math.log(qubit_closed_form("sic", (x, y, z), "optimal", "volume")),
                          s, order)


def formula_names() -> list[str]:
    return sorted(FORMULAS)


def _qubit_formula(measurement, recon, figure):
    def f(bloch=(0.0, 0.0, 0.0), **_):
        return qubit_closed_form(measurement, bloch, recon, figure)
    return f


FORMULAS = {
    "sic_mse": lambda d, purity, **_: sic_mse(int(d), purity),
    "mub_mse": lambda d, purity, **_: mub_mse(int(d), purity),
    "minimal_ic_bound": lambda d, purity, **_: minimal_ic_bound(int(d), purity),
    "covariant_mse": lambda d, r, s, **_: covariant_blue_figures(int(d), int(r), s, HS)["mse"],
    "covariant_msb": lambda d, r, s, **_: covariant_blue_figures(int(d), int(r), s)["msb"],
    "covariant_volume": lambda d, r, s, **_: covariant_blue_figures(int(d), int(r), s)["volume"],
    "pure_limit_mse": lambda d, r, **_: pure_limit_mse(int(d), int(r)),
    "covariant_mean_trace": lambda d, **_: pure_state_limits(int(d))["covariant_mean_trace"],
}
for _m in ("sic", "mub", "cube", "covariant"):
    for _fig in QUBIT_FIGURES:
        FORMULAS[f"qubit_{_m}_{_fig}"] = _qubit_formula(_m, "optimal", _fig)
for _fig in QUBIT_FIGURES:
    FORMULAS[f"qubit_iso_canonical_{_fig}"] = _qubit_formula("iso_canonical", "canonical", _fig)
