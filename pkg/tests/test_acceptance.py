"""Acceptance criteria 1-8. Each test prints one PASS/FAIL line."""

import math
import time

import numpy as np
import pytest

from ht_sentinel.calibration import CalibrationConfig, run_calibration, sample_powerlaw
from ht_sentinel.criterion import Trajectory, classify_phases, evaluate_epoch, stop_epoch
from ht_sentinel.ingest import read_matrix, write_matrix
from ht_sentinel.powerlaw import TailSample, fit_alpha, fit_exponential, fit_tail, ks_distance, loglik_ratio
from ht_sentinel.report import read_trajectory_csv, trajectory_csv
from ht_sentinel.rng import substream
from ht_sentinel.spectra import esd
from ht_sentinel.synth import gen_gaussian_matrix, gen_heavytail_matrix
from ht_sentinel.theory import theory_report
from oracles import brute_force_ks, numeric_mle

ALPHA = 2.5


@pytest.fixture(scope="module")
def single_thread_calibration():
    start = time.perf_counter()
    result = run_calibration(CalibrationConfig(), workers=1)
    return result, time.perf_counter() - start


def test_criterion_1_calibration(verdict, single_thread_calibration):
    result, seconds = single_thread_calibration
    cfg = result.config
    grid_ok = cfg.alphas == (1.5, 2.0, 2.5, 3.0) and cfg.n_tails == (100, 200, 300) and cfg.runs == 10_000
    q999 = result.pooled_quantiles["q99.9"]
    ok = grid_ok and q999 <= 2.0 and result.recommended_c == 2.0 and seconds < 300
    detail = (
        f"pooled q99.9 = {q999:.4f}, max = {result.pooled_quantiles['max']:.4f}, "
        f"C = {result.recommended_c}, {seconds:.1f} s single-threaded"
    )
    verdict(1, "calibration", ok, detail)


def test_criterion_2_ks_rate(verdict):
    def median_d(n):
        ds = []
        for seed in range(200):
            tail = TailSample(sample_powerlaw(ALPHA, 1.0, n, substream(seed, 1002, n)), 1.0)
            ds.append(ks_distance(tail, fit_alpha(tail)))
        return float(np.median(ds))

    ratio = median_d(400) / median_d(100)
    verdict(2, "KS rate", 0.35 <= ratio <= 0.65, f"median ratio d(400)/d(100) = {ratio:.4f}")


def test_criterion_3_mle(verdict):
    worst = 0.0
    for seed in range(100):
        rng = substream(seed, 1003)
        alpha0 = 1.2 + 3.5 * rng.random()
        x_min = 0.1 + 5 * rng.random()
        x = sample_powerlaw(alpha0, x_min, 50 + int(rng.integers(500)), rng)
        worst = max(worst, abs(fit_alpha(TailSample(x, x_min)) - numeric_mle(x, x_min)))
    coverage = {}
    for n in (1000, 10_000):
        hits = 0
        for seed in range(100):
            x = sample_powerlaw(ALPHA, 1.0, n, substream(seed, 1013, n))
            hits += abs(fit_alpha(TailSample(x, 1.0)) - ALPHA) < 3 / math.sqrt(n)
        coverage[n] = hits
    ok = worst <= 1e-6 and all(h >= 90 for h in coverage.values())
    verdict(3, "MLE fidelity", ok, f"max |closed form - numeric| = {worst:.2e}, coverage {coverage}")


def test_criterion_4_ks_oracle(verdict):
    worst = 0.0
    for seed in range(100):
        rng = substream(seed, 1004)
        x_min = 0.2 + 3 * rng.random()
        x = sample_powerlaw(1.3 + 3 * rng.random(), x_min, 2 + int(rng.integers(300)), rng)
        alpha = 1.05 + 4 * rng.random()
        worst = max(worst, abs(ks_distance(TailSample(x, x_min), alpha) - brute_force_ks(x, alpha, x_min)))
    verdict(4, "KS oracle", worst <= 1e-12, f"max |breakpoint - brute force| = {worst:.2e}")


def test_criterion_5_discrimination(verdict):
    pl_wins = exp_wins = gauss_heavy = pareto_heavy = 0
    for seed in range(100):
        tail = TailSample(sample_powerlaw(ALPHA, 1.0, 1000, substream(seed, 1005)), 1.0)
        res = loglik_ratio(tail, fit_tail(tail), fit_exponential(tail))
        pl_wins += res.r > 0 and res.p_value < 0.1
        tail = TailSample(1.0 + substream(seed, 1015).exponential(1.0, 1000), 1.0)
        exp_wins += loglik_ratio(tail, fit_tail(tail), fit_exponential(tail)).r < 0
        gauss_heavy += evaluate_epoch(esd(gen_gaussian_matrix(400, 400, seed=1000 + seed))).heavy_tailed
        pareto_heavy += evaluate_epoch(esd(gen_heavytail_matrix(400, 400, ALPHA, seed=1000 + seed))).heavy_tailed
    ok = pl_wins >= 95 and exp_wins >= 95 and gauss_heavy <= 10 and pareto_heavy >= 90
    detail = (
        f"PL beats exp {pl_wins}/100, exp beats PL {exp_wins}/100, "
        f"Gaussian not heavy {100 - gauss_heavy}/100, Pareto-scaled heavy {pareto_heavy}/100"
    )
    verdict(5, "discrimination", ok, detail)


def test_criterion_6_trajectory(verdict, default_spectra):
    traj = Trajectory(tuple(evaluate_epoch(s, epoch=e) for e, s in default_spectra))
    seg = classify_phases(traj)
    decision = stop_epoch(traj)
    ok = (
        len(traj) == 205
        and abs(seg.phase1_end - 25) <= 10
        and abs(seg.phase2_end - 150) <= 10
        and 25 <= decision.stop_epoch <= 170
        and decision.peak_indicator > 0
    )
    detail = (
        f"phase1_end {seg.phase1_end}, phase2_end {seg.phase2_end}, "
        f"stop {decision.stop_epoch} with indicator {decision.peak_indicator:.4f}"
    )
    verdict(6, "synthetic trajectory", ok, detail)


def test_criterion_7_theory(verdict):
    report = theory_report(seed=0, probes=10_000, instances=20)
    claims = {c["claim"]: c for c in report["claims"]}
    required = [
        "hessian_symmetric",
        "hessian_psd",
        "hessian_annihilates_ones",
        "hessian_max_eigenvalue_half",
        "gd_loss_non_increasing",
    ]
    quarter = claims["hessian_max_eigenvalue_quarter"]
    ok = (
        report["ok"]
        and all(claims[name]["passed"] and claims[name]["asserted"] for name in required)
        and claims["hessian_annihilates_ones"]["observed"] <= 1e-12
        and claims["hessian_max_eigenvalue_half"]["observed"] <= 0.5 + 1e-10
        and not quarter["asserted"]
    )
    detail = (
        f"max eigenvalue {claims['hessian_max_eigenvalue_half']['observed']:.12g}, "
        f"min eigenvalue {claims['hessian_psd']['observed']:.3g}, "
        f"worst GD rise {claims['gd_loss_non_increasing']['observed']:.3g}; "
        f"1/4 bound reported: observed {quarter['observed']:.3g}"
    )
    verdict(7, "theory checks", ok, detail)


def test_criterion_8_round_trips(verdict, tmp_path, monkeypatch, single_thread_calibration):
    rng = substream(8, 1008)
    npy_ok = True
    for shape in [(1, 1), (3, 7), (400, 400), (1024, 1024)]:
        arr = rng.standard_normal(shape) * 10.0 ** rng.integers(-300, 300, size=shape)
        write_matrix(tmp_path / "w.npy", arr)
        npy_ok &= read_matrix(tmp_path / "w.npy").values.tobytes() == arr.tobytes()
        np.save(tmp_path / "ref.npy", arr)
        npy_ok &= (tmp_path / "w.npy").read_bytes() == (tmp_path / "ref.npy").read_bytes()

    spectra = [esd(gen_heavytail_matrix(200, 200, ALPHA, seed=s)) for s in range(5)]
    traj = Trajectory(tuple(evaluate_epoch(s, epoch=10 * (i + 1)) for i, s in enumerate(spectra)))
    (tmp_path / "t.csv").write_text(trajectory_csv(traj))
    csv_ok = read_trajectory_csv(tmp_path / "t.csv")[0].records == traj.records

    reference = single_thread_calibration[0].to_json(include_samples=True)
    again = run_calibration(CalibrationConfig(), workers=1).to_json(include_samples=True)
    threaded = run_calibration(CalibrationConfig(), workers=4).to_json(include_samples=True)
    monkeypatch.setenv("HT_SENTINEL_THREADS", "3")
    from_env = run_calibration(CalibrationConfig()).to_json(include_samples=True)
    json_ok = reference == again == threaded == from_env

    ok = npy_ok and csv_ok and json_ok
    verdict(8, "format round-trips", ok, f"NPY {npy_ok}, CSV {csv_ok}, calibration JSON across runs/threads {json_ok}")
