import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ioctomo.estimators import blue_mse_matrix, canonical_recon, mse_matrix
from ioctomo.metrics import (
    BURES,
    CHERNOFF,
    HS,
    WeightSpec,
    ellipsoid_volume,
    log_ellipsoid_volume,
    log_volume_from_fisher,
    unit_ball_volume,
    weight_superop,
    wmse,
)
from ioctomo.povm import BoundaryStateError, combine, frame_superop_at, mub_povm, platonic_povm, rotate, sic_povm
from ioctomo.opspace import bar_restrict, random_state, vectorize
from ioctomo.simulate import bloch_state, haar_unitaries

from conftest import bloch, interior_state, to_bloch_matrix


def test_bures_qubit_bloch_form(rng):
    for _ in range(10):
        rho = interior_state(2, rng)
        s = bloch(rho)
        W = weight_superop(rho, BURES)[1:, 1:] / 2
        expected = np.eye(3) / 4 + np.outer(s, s) / (4 * (1 - s @ s))
        assert np.allclose(W, expected, atol=1e-12)


@pytest.mark.parametrize("d", [2, 3, 4])
def test_bures_at_maximally_mixed(d):
    W = weight_superop(np.eye(d) / d, BURES)
    assert np.allclose(W[1:, 1:], d / 4 * np.eye(d * d - 1), atol=1e-12)


def test_bures_matches_direct_metric(rng):
    # D^2 = sum_jk |<j|drho|k>|^2 / (2 (l_j + l_k)) in the eigenbasis
    rho = interior_state(3, rng)
    lam, U = np.linalg.eigh(rho)
    W = weight_superop(rho, BURES)
    for _ in range(5):
        X = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        drho = X + X.conj().T
        drho -= np.trace(drho) / 3 * np.eye(3)
        m = U.conj().T @ drho @ U
        direct = np.sum(np.abs(m) ** 2 / (2 * (lam[:, None] + lam[None, :])))
        v = vectorize(drho)
        assert v @ W @ v == pytest.approx(direct, rel=1e-12)


def test_hs_weight_is_identity(rng):
    rho = interior_state(3, rng)
    assert np.allclose(weight_superop(rho, HS), np.eye(9))
    assert np.allclose(weight_superop(np.diag([1.0, 0, 0]), HS), np.eye(9))


def test_weight_batched(rng):
    rhos = np.array([interior_state(3, rng) for _ in range(3)])
    W = weight_superop(rhos, CHERNOFF)
    for i in range(3):
        assert np.allclose(W[i], weight_superop(rhos[i], CHERNOFF), atol=1e-14)


def test_boundary_state_rejected():
    with pytest.raises(BoundaryStateError, match="boundary state"):
        weight_superop(np.diag([1.0, 0.0]), BURES)


@pytest.mark.parametrize("d", [2, 3])
def test_bures_below_chernoff_as_forms(d, rng):
    for _ in range(10):
        rho = interior_state(d, rng, 0.01)
        diff = weight_superop(rho, CHERNOFF) - weight_superop(rho, BURES)
        assert np.linalg.eigvalsh(bar_restrict(diff)).min() > -1e-9


def test_custom_kernel():
    bures_like = WeightSpec("custom", lambda x, y: 2 / (x + y))
    rho = np.diag([0.6, 0.3, 0.1])
    assert np.allclose(weight_superop(rho, bures_like), weight_superop(rho, BURES))
    with pytest.raises(ValueError):
        WeightSpec("custom", lambda x, y: x - y + 0.5)
    with pytest.raises(ValueError):
        WeightSpec("custom")
    with pytest.raises(ValueError):
        WeightSpec("euclid")


@pytest.mark.parametrize("d", [2, 3])
def test_wmse_closed_forms(d, rng):
    for _ in range(5):
        rho = interior_state(d, rng)
        t = np.trace(rho @ rho).real
        W = weight_superop(rho, HS)
        assert wmse(blue_mse_matrix(sic_povm(d), rho), W) == pytest.approx(d * d + d - 1 - t, abs=1e-9)
        assert wmse(blue_mse_matrix(mub_povm(d), rho), W) == pytest.approx((d + 1) * (d - t), abs=1e-9)


def test_octahedron_canonical_mse(rng):
    povm = platonic_povm("octahedron")
    rho = interior_state(2, rng)
    s2 = bloch(rho) @ bloch(rho)
    C = mse_matrix(povm, canonical_recon(povm), rho)
    assert wmse(C, np.eye(4)) == pytest.approx((9 - s2) / 2)
    # Bloch-ball coordinates carry the factor 2: trace of 3 - s s^T
    assert np.trace(to_bloch_matrix(C)) == pytest.approx(9 - s2)


def test_wmse_shape_mismatch():
    with pytest.raises(ValueError):
        wmse(np.eye(4), np.eye(9))


def test_unit_ball_volumes():
    assert unit_ball_volume(3) == pytest.approx(4 * np.pi / 3)
    assert unit_ball_volume(2) == pytest.approx(np.pi)
    assert unit_ball_volume(8) == pytest.approx(np.pi**4 / 24)


def test_isotropic_volume(rng):
    for s in [0.0, 0.3, 0.8]:
        rho = bloch_state([0, s, 0])
        povm = platonic_povm("octahedron")
        C = mse_matrix(povm, canonical_recon(povm), rho)
        assert ellipsoid_volume(C) == pytest.approx(np.pi * np.sqrt(2 * (3 - s * s)), rel=1e-12)
    assert ellipsoid_volume(blue_mse_matrix(sic_povm(2), np.eye(2) / 2)) == pytest.approx(np.sqrt(6) * np.pi)


def test_volume_degenerate_and_negative():
    assert log_ellipsoid_volume(np.diag([1.0, 0, 1, 1])) == -np.inf
    with pytest.raises(ValueError):
        log_ellipsoid_volume(np.diag([1.0, -1, 1, 1]))


def test_volume_from_fisher_agrees(rng):
    povm = mub_povm(3)
    rho = interior_state(3, rng)
    F = frame_superop_at(povm, rho)
    assert log_volume_from_fisher(bar_restrict(F)) == pytest.approx(
        log_ellipsoid_volume(blue_mse_matrix(povm, rho)), rel=1e-10)


def test_log_volume_concave_under_mixing(rng):
    cube = platonic_povm("cube")
    for _ in range(10):
        other = rotate(cube, haar_unitaries(2, 1, rng)[0])
        p = rng.uniform(0.1, 0.9)
        mix = combine([cube, other], [p, 1 - p])
        rho = interior_state(2, rng)
        lhs = log_ellipsoid_volume(blue_mse_matrix(mix, rho))
        rhs = p * log_ellipsoid_volume(blue_mse_matrix(cube, rho)) + (1 - p) * log_ellipsoid_volume(
            blue_mse_matrix(other, rho))
        assert lhs <= rhs + 1e-12


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_hs_wmse_rotation_invariant(seed):
    rng = np.random.default_rng(seed)
    povm = mub_povm(3)
    rho = interior_state(3, rng)
    U = haar_unitaries(3, 1, rng)[0]
    a = wmse(blue_mse_matrix(povm, rho), np.eye(9))
    b = wmse(blue_mse_matrix(rotate(povm, U), U @ rho @ U.conj().T), np.eye(9))
    assert a == pytest.approx(b, abs=1e-9)
