import csv
import json
import math

import numpy as np
import pytest

from ioctomo import analytic as an
from ioctomo import estimators as est
from ioctomo import simulate as sim
from ioctomo.estimators import blue_mse_matrix, canonical_recon, mse_matrix
from ioctomo.opspace import vectorize
from ioctomo.povm import mub_povm, platonic_povm, sic_povm

from conftest import interior_state


def test_sample_counts_basic():
    assert list(sim.sample_counts([1, 0, 0], 17, 3)) == [17, 0, 0]
    a = sim.sample_counts([0.2, 0.3, 0.5], 1000, 42)
    b = sim.sample_counts([0.2, 0.3, 0.5], 1000, 42)
    assert a.sum() == 1000 and np.array_equal(a, b)
    assert np.array_equal(sim.sample_counts([0.5, 0.5], 10, sim.trial_seed(1, 2, 3)),
                          sim.sample_counts([0.5, 0.5], 10, sim.trial_seed(1, 2, 3)))


def test_sample_counts_uniform_within_5_sigma():
    c = sim.sample_counts(np.full(6, 1 / 6), 600_000, 9)
    sigma = math.sqrt(600_000 * (1 / 6) * (5 / 6))
    assert np.all(np.abs(c - 100_000) < 5 * sigma)


@pytest.mark.parametrize("p", [[0.5, 0.6], [-0.1, 1.1], [[0.5, 0.5]], [0.5, 0.5 + 1e-9]])
def test_sample_counts_rejects(p):
    with pytest.raises(ValueError):
        sim.sample_counts(p, 10, 0)


def test_sample_counts_covariance():
    p = np.array([0.1, 0.2, 0.3, 0.4])
    N = 50
    rng = np.random.default_rng(5)
    draws = np.array([sim.sample_counts(p, N, rng) for _ in range(40_000)]) / N
    expected = (np.diag(p) - np.outer(p, p)) / N
    assert np.allclose(np.cov(draws.T), expected, atol=2e-4)


def test_log_grid():
    assert sim.log_grid() == [100, 316, 1000, 3162, 10000, 31623, 100000]


def test_config_validation(tmp_path):
    cfg = sim.ExperimentConfig(estimators=["CLE", "BLUE1", "BLUE2"])
    assert cfg.estimators == ["cle", "blue_oracle", "blue_plugin"]
    with pytest.raises(ValueError):
        sim.ExperimentConfig(estimators=["bayes"])
    with pytest.raises(ValueError):
        sim.ExperimentConfig(N_grid=[0])
    with pytest.raises(ValueError):
        sim.ExperimentConfig(repetitions=0)
    with pytest.raises(ValueError):
        sim.ExperimentConfig(figures=["fidelity"])
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert sim.ExperimentConfig.from_json(path).to_dict() == cfg.to_dict()


def test_state_specs(tmp_path):
    rho = sim.state_from_spec({"family": {"d": 3, "r": 1, "s": 0.5}})
    assert np.allclose(rho, an.family_state(3, 1, 0.5))
    m = np.diag([0.7, 0.3])
    spec = {"matrix": np.stack([m, 0 * m], axis=-1).tolist()}
    assert np.allclose(sim.state_from_spec(spec), m)
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"bloch": [0, 0, 0.4]}))
    assert np.allclose(sim.state_from_spec({"file": str(path)}), np.diag([0.7, 0.3]))
    with pytest.raises(ValueError):
        sim.state_from_spec({"bloch": [1, 1, 0]})
    with pytest.raises(ValueError):
        sim.state_from_spec({"nothing": 1})


def test_single_trial_experiment_is_reproducible():
    cfg = sim.ExperimentConfig(povm="builtin:tetrahedron", state={"bloch": [0.1, 0.2, 0.3]},
                               estimators=["cle", "blue_oracle", "blue_plugin", "blue_twostep", "mle"],
                               N_grid=[1], repetitions=1, seed=5, pairwise=False)
    res = sim.run_experiment(cfg)
    assert [r.estimator for r in res.records] == cfg.estimators
    assert all(r.N == 1 and r.rep == 0 for r in res.records)
    again = sim.run_experiment(cfg)
    assert [r.values for r in res.records] == [r.values for r in again.records]


def test_dimension_mismatch():
    cfg = sim.ExperimentConfig(povm="builtin:mub3", state={"bloch": [0, 0, 0]}, N_grid=[10], repetitions=1)
    with pytest.raises(ValueError):
        sim.run_experiment(cfg)


def test_csv_identical_across_thread_counts(tmp_path):
    base = dict(povm="builtin:cube", state={"bloch": [0.3, -0.2, 0.5]}, N_grid=[50, 500],
                repetitions=250, seed=11, figures=["mse", "msb", "wmse_chernoff"])
    outs = []
    for threads, name in [(1, "a"), (3, "b")]:
        cfg = sim.ExperimentConfig(**base, output=str(tmp_path / name))
        sim.run_experiment(cfg, threads=threads)
        outs.append(((tmp_path / f"{name}_trials.csv").read_bytes(), (tmp_path / f"{name}_aggregate.csv").read_bytes()))
    assert outs[0] == outs[1]
    with open(tmp_path / "a_trials.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["N", "rep", "estimator", "figure", "value"]
    with open(tmp_path / "a_aggregate.csv") as fh:
        assert next(csv.reader(fh)) == ["N", "estimator", "figure", "mean", "stderr", "R"]


def test_estimator_failures_become_nan_rows():
    cfg = sim.ExperimentConfig(povm="builtin:cube", state={"bloch": [0, 0, 1]},
                               estimators=["cle", "blue_oracle"], N_grid=[20], repetitions=3)
    res = sim.run_experiment(cfg)
    bad = [r for r in res.records if r.estimator == "blue_oracle"]
    assert len(bad) == 3 and all(math.isnan(r.values["mse"]) and "boundary" in r.error for r in bad)
    good = [r for r in res.records if r.estimator == "cle"]
    assert all(np.isfinite(r.values["mse"]) and r.error is None for r in good)
    assert res.mean(20, "blue_oracle")[0] != res.mean(20, "blue_oracle")[0]  # nan mean
    with pytest.raises(KeyError):
        res.mean(21, "cle")


def test_scaled_mse_converges_to_trace_of_mse_matrix():
    rho_spec = {"family": {"d": 3, "r": 1, "s": 0.4}}
    cfg = sim.ExperimentConfig(povm="builtin:mub3", state=rho_spec, estimators=["cle", "blue_oracle"],
                               N_grid=[10_000], repetitions=1000, seed=3, pairwise=False)
    res = sim.run_experiment(cfg)
    povm = mub_povm(3)
    rho = an.family_state(3, 1, 0.4)
    for name, C in [("cle", mse_matrix(povm, canonical_recon(povm), rho)), ("blue_oracle", blue_mse_matrix(povm, rho))]:
        mean, se = res.mean(10_000, name)
        assert abs(mean - np.trace(C)) < 4 * se


@pytest.mark.parametrize("name", ["cle", "blue_oracle"])
def test_linear_estimators_unbiased_at_finite_N(name):
    povm = platonic_povm("cube")
    rho = sim.bloch_state([0.6886, 0.1137, -0.5025])
    p = povm.probabilities(rho)
    N, R = 20, 100_000
    freqs = np.random.default_rng(8).multinomial(N, p, size=R) / N
    kets = est.cle_batch(povm, freqs) if name == "cle" else est.oracle_blue_batch(povm, freqs, rho)
    mean, se = kets.mean(axis=0), kets.std(axis=0, ddof=1) / math.sqrt(R)
    target = vectorize(rho)
    assert np.all(np.abs(mean - target)[1:] < 5 * se[1:])
    assert mean[0] == pytest.approx(target[0], abs=1e-12)


def test_haar_unitaries():
    U = sim.haar_unitaries(3, 500, 1)
    assert np.allclose(U @ U.conj().transpose(0, 2, 1), np.eye(3), atol=1e-12)
    assert np.array_equal(U, sim.haar_unitaries(3, 500, 1))
    # first-moment check: E|U_00|^2 = 1/d
    big = sim.haar_unitaries(3, 50_000, 2)
    assert np.mean(np.abs(big[:, 0, 0]) ** 2) == pytest.approx(1 / 3, abs=0.01)
    # phase-corrected QR is Haar: E[U_00^2] = 0 (uncorrected QR is biased toward real positive diagonal)
    assert abs(np.mean(big[:, 0, 0])) < 0.01


def test_orbit_states():
    states = sim.orbit_states(2, 0.6, 100, 0)
    ev = np.linalg.eigvalsh(states)
    assert np.allclose(ev, [0.2, 0.8])
    states = sim.orbit_states(3, [0.5, 0.3, 0.2], 10, 0)
    assert np.allclose(np.linalg.eigvalsh(states), [0.2, 0.3, 0.5])
    with pytest.raises(ValueError):
        sim.orbit_states(3, 0.5, 10, 0)
    with pytest.raises(ValueError):
        sim.orbit_states(3, [0.5, 0.5], 10, 0)


def test_haar_average_invariant_quantity():
    povm = sic_povm(2)
    out = sim.haar_average(lambda r: np.trace(blue_mse_matrix(povm, r)), 2, 0.5, 200, seed=1)
    assert out["mean"] == pytest.approx(an.sic_mse(2, (1 + 0.25) / 2), abs=1e-10)
    assert out["stderr"] < 1e-12
    batched = sim.haar_average(lambda rs: sim.blue_figures_batch(povm, rs)["mse"], 2, 0.5, 200, 1, batched=True)
    assert batched["mean"] == pytest.approx(out["mean"], abs=1e-12)
    with pytest.raises(ValueError):
        sim.haar_average(np.trace, 2, 0.5, 0)


def test_haar_average_cube_mse():
    povm = platonic_povm("cube")
    s = 0.6
    out = sim.haar_average(lambda rs: sim.blue_figures_batch(povm, rs)["mse"], 2, s, 100_000, 4, batched=True)
    assert abs(out["mean"] - (135 - 90 * s**2 + 11 * s**4) / (10 * (3 - s**2))) < 3 * out["stderr"]


def test_haar_average_mub_log_volume():
    povm = mub_povm(2)
    s = 0.5
    out = sim.haar_average(lambda rs: sim.blue_figures_batch(povm, rs)["log_volume"], 2, s, 100_000, 6, batched=True)
    expected = an.qubit_closed_form("mub", (s, 0, 0), "optimal", "avg_logvolume")
    assert abs(out["mean"] - expected) < 3 * out["stderr"]


def test_figure_batches_match_single_state(rng):
    povm = mub_povm(3)
    rhos = np.array([interior_state(3, rng) for _ in range(4)])
    blue = sim.blue_figures_batch(povm, rhos)
    can = sim.canonical_figures_batch(povm, rhos)
    from ioctomo.metrics import BURES, log_ellipsoid_volume, weight_superop, wmse
    for i, rho in enumerate(rhos):
        C = blue_mse_matrix(povm, rho)
        assert blue["mse"][i] == pytest.approx(np.trace(C))
        assert blue["msb"][i] == pytest.approx(wmse(C, weight_superop(rho, BURES)))
        assert blue["log_volume"][i] == pytest.approx(log_ellipsoid_volume(C))
        Cc = mse_matrix(povm, canonical_recon(povm), rho)
        assert can["mse"][i] == pytest.approx(np.trace(Cc))
        assert can["log_volume"][i] == pytest.approx(log_ellipsoid_volume(Cc))


def test_loglog_slope():
    x = np.array([1e2, 1e3, 1e4])
    assert sim.loglog_slope(x, 3 / x**2) == pytest.approx(-2)
