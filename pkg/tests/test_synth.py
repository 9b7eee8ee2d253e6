import numpy as np
import pytest

from ht_sentinel.calibration import sample_powerlaw
from ht_sentinel.criterion import Trajectory, classify_phases, evaluate_epoch, fit_spectrum, stop_epoch
from ht_sentinel.errors import InvalidConfigError, InvalidInputError
from ht_sentinel.ingest import load_manifest, load_spectrum
from ht_sentinel.powerlaw import fit_exponential, loglik_ratio
from ht_sentinel.rng import substream
from ht_sentinel.spectra import esd
from ht_sentinel.synth import (
    TrajectorySpec,
    gen_distribution,
    gen_gaussian_matrix,
    gen_heavytail_matrix,
    gen_trajectory,
    trajectory_matrices,
    trajectory_spectra,
)


class FixedUniforms:
    def __init__(self, values):
        self.values = np.asarray(values, dtype=np.float64)

    def random(self, n):
        return self.values[:n]


def test_power_law_first_value_closed_form():
    x = gen_distribution("power_law", {"alpha": 3.0, "x_min": 1.0}, 3, rng=FixedUniforms([0.75, 0.0, 0.96]))
    assert x[0] == pytest.approx(2.0, abs=1e-15)
    assert x[1] == 1.0
    assert x[2] == pytest.approx(5.0)


def test_power_law_matches_calibration_sampler_bitwise():
    a = gen_distribution("power_law", {"alpha": 2.2, "x_min": 0.5}, 1000, rng=substream(5, 1))
    b = sample_powerlaw(2.2, 0.5, 1000, substream(5, 1))
    assert a.tobytes() == b.tobytes()


def test_exponential_mean():
    assert gen_distribution("exponential", {"lam": 1.0}, 100_000, seed=1).mean() == pytest.approx(1.0, abs=0.02)


def test_exponential_shift():
    x = gen_distribution("exponential", {"lam": 2.0, "x_min": 3.0}, 1000, seed=2)
    assert x.min() >= 3.0


def test_lognormal_median():
    assert np.median(gen_distribution("log_normal", {"mu": 0.0, "sigma": 1.0}, 100_000, seed=1)) == pytest.approx(1.0, abs=0.03)


@pytest.mark.parametrize(
    "kind, params, n",
    [
        ("power_law", {"alpha": 1.0}, 5),
        ("exponential", {"lam": 0}, 5),
        ("log_normal", {"sigma": -1}, 5),
        ("cauchy", {}, 5),
        ("exponential", {}, 0),
    ],
)
def test_distribution_guards(kind, params, n):
    with pytest.raises(InvalidConfigError):
        gen_distribution(kind, params, n)


def test_distributions_deterministic():
    for kind in ("power_law", "exponential", "log_normal"):
        assert np.array_equal(gen_distribution(kind, {}, 50, seed=3), gen_distribution(kind, {}, 50, seed=3))
        assert not np.array_equal(gen_distribution(kind, {}, 50, seed=3), gen_distribution(kind, {}, 50, seed=4))


def test_gaussian_matrix_basics():
    assert gen_gaussian_matrix(1, 1, seed=0).shape == (1, 1)
    assert np.array_equal(gen_gaussian_matrix(5, 3, seed=9).values, gen_gaussian_matrix(5, 3, seed=9).values)
    assert np.allclose(gen_gaussian_matrix(5, 3, sigma=2.0, seed=9).values, 2 * gen_gaussian_matrix(5, 3, seed=9).values)
    with pytest.raises(InvalidConfigError):
        gen_gaussian_matrix(0, 3)


def test_gaussian_matrix_edge_of_marchenko_pastur():
    hits = 0
    for seed in range(100):
        top = esd(gen_gaussian_matrix(400, 400, seed=seed)).eigenvalues[-1] / 400
        hits += 3.6 <= top <= 4.4
    assert hits >= 95


def test_heavytail_guards():
    with pytest.raises(InvalidConfigError):
        gen_heavytail_matrix(10, 10, 1.0)
    with pytest.raises(InvalidConfigError):
        gen_heavytail_matrix(0, 10, 2.5)


def test_heavytail_matrices_are_heavy_tailed():
    heavy = beats_exp = 0
    for seed in range(100):
        rec = evaluate_epoch(esd(gen_heavytail_matrix(400, 400, 2.5, seed=seed)))
        heavy += rec.heavy_tailed
        beats_exp += rec.r_exp > 0
    assert heavy >= 90
    assert beats_exp >= 90


def test_heavytail_tail_comparison_matches_record():
    spec = esd(gen_heavytail_matrix(200, 200, 2.5, seed=1))
    fit = fit_spectrum(spec)
    cmp = loglik_ratio(fit.tail, fit, fit_exponential(fit.tail))
    assert evaluate_epoch(spec).r_exp == cmp.r


def test_trajectory_spec_guards():
    with pytest.raises(InvalidConfigError):
        TrajectorySpec(phase_boundaries=(30, 20))
    with pytest.raises(InvalidConfigError):
        TrajectorySpec(epochs=100, phase_boundaries=(20, 150))
    with pytest.raises(InvalidConfigError):
        TrajectorySpec(epochs=0)
    with pytest.raises(InvalidConfigError):
        TrajectorySpec(column_alpha=1.0)


def test_single_epoch_trajectory():
    spec = TrajectorySpec(epochs=1, matrix_dims=(20, 20))
    spectra = trajectory_spectra(spec)
    assert len(spectra) == 1
    traj = Trajectory(tuple(evaluate_epoch(s, epoch=e) for e, s in spectra))
    with pytest.raises(InvalidInputError):
        classify_phases(traj)


def test_trajectory_deterministic_per_seed():
    spec = TrajectorySpec(epochs=20, phase_boundaries=(5, 15), matrix_dims=(30, 20))
    first = [w.values for _, w in trajectory_matrices(spec)]
    again = [w.values for _, w in trajectory_matrices(spec)]
    assert all(np.array_equal(a, b) for a, b in zip(first, again))
    other_seed = TrajectorySpec(epochs=20, phase_boundaries=(5, 15), matrix_dims=(30, 20), seed=8)
    assert not np.array_equal(first[0], next(trajectory_matrices(other_seed))[1].values)


def test_gen_trajectory_writes_manifest(tmp_path):
    spec = TrajectorySpec(epochs=12, phase_boundaries=(3, 8), matrix_dims=(25, 15))
    manifest = gen_trajectory(spec, tmp_path)
    assert len(list(tmp_path.glob("epoch_*.npy"))) == 12
    loaded = load_manifest(tmp_path / "manifest.json")
    assert loaded == manifest
    in_memory = trajectory_spectra(spec)
    for entry, (epoch, spectrum) in zip(loaded.entries, in_memory):
        assert entry.epoch == epoch
        assert np.array_equal(load_spectrum(entry).eigenvalues, spectrum.eigenvalues)


def test_default_trajectory_morphology(default_spectra):
    traj = Trajectory(tuple(evaluate_epoch(s, epoch=e) for e, s in default_spectra))
    assert len(traj) == 205
    seg = classify_phases(traj)
    assert abs(seg.phase1_end - 25) <= 10
    assert abs(seg.phase2_end - 150) <= 10
    decision = stop_epoch(traj)
    assert decision.triggered
    assert 25 <= decision.stop_epoch <= 170
    alpha = traj.column("alpha")
    # steep early spectra, heavy tail in the middle phase
    assert alpha[:10].mean() > 5
    assert np.median(alpha[40:140]) < 3
