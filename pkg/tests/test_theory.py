import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ht_sentinel.errors import DomainError, InvalidConfigError, InvalidInputError
from ht_sentinel.theory import (
    CLAIMED_BOUND,
    HESSIAN_BOUND,
    ce_grad,
    ce_hessian,
    ce_loss,
    gd_descent_check,
    logsumexp,
    make_toy_instance,
    smoothness_probe,
    softmax,
    sublinear_margin,
    theory_report,
    write_theory_report,
)

logits = arrays(np.float64, st.integers(2, 12), elements=st.floats(-30, 30))


def test_softmax_examples():
    np.testing.assert_allclose(softmax([0, 0, 0]), [1 / 3] * 3, rtol=1e-15)
    p = softmax([1000.0, 0.0])
    assert np.all(np.isfinite(p))
    assert p[0] == 1.0 and 0 <= p[1] < 1e-300


@given(logits, st.floats(-100, 100))
def test_softmax_shift_invariant_and_normalized(z, c):
    p = softmax(z)
    assert abs(p.sum() - 1) <= 1e-12
    np.testing.assert_allclose(softmax(z + c), p, atol=1e-12)


def test_softmax_rejects_bad_input():
    with pytest.raises(InvalidInputError):
        softmax([1.0])
    with pytest.raises(InvalidInputError):
        softmax([0.0, np.nan])


def test_logsumexp_matches_scipy():
    from scipy.special import logsumexp as reference

    z = np.random.default_rng(0).standard_normal((5, 7)) * 50
    np.testing.assert_allclose(logsumexp(z, axis=0), reference(z, axis=0), rtol=1e-14)
    np.testing.assert_allclose(logsumexp(z, axis=1, keepdims=True), reference(z, axis=1, keepdims=True), rtol=1e-14)
    assert logsumexp(z) == pytest.approx(reference(z), rel=1e-14)


def test_hessian_closed_form():
    np.testing.assert_array_equal(ce_hessian([0.5, 0.5]), [[0.25, -0.25], [-0.25, 0.25]])
    assert np.linalg.eigvalsh(ce_hessian([0.5, 0.5]))[-1] == pytest.approx(HESSIAN_BOUND)
    assert HESSIAN_BOUND > CLAIMED_BOUND


def test_hessian_rejects_non_probability():
    for p in ([0.5, 0.6], [-0.1, 1.1], [[0.5, 0.5]]):
        with pytest.raises(InvalidInputError):
            ce_hessian(p)


def test_hessian_spectrum_on_random_probabilities():
    rng = np.random.default_rng(1)
    for _ in range(100):
        k = int(rng.integers(2, 11))
        h = ce_hessian(softmax(rng.standard_normal(k) * 3))
        eig = np.linalg.eigvalsh(h)
        assert eig[0] >= -1e-10
        assert eig[-1] <= 0.5 + 1e-10
        assert np.abs(h @ np.ones(k)).max() <= 1e-12


@given(logits, st.data())
def test_gradient_matches_finite_differences(z, data):
    label = data.draw(st.integers(0, z.size - 1))
    h = 1e-6
    fd = np.array([(ce_loss(z + h * e, label) - ce_loss(z - h * e, label)) / (2 * h) for e in np.eye(z.size)])
    np.testing.assert_allclose(ce_grad(z, label), fd, atol=1e-6)


def test_probe_on_two_class_directions():
    eps = 1e-6
    # along e_1 the gradient difference is H e_1 scaled by 2 eps: ratio ||H e_1|| = sqrt(2) / 4
    assert smoothness_probe([eps, 0.0], [-eps, 0.0], 0) == pytest.approx(math.sqrt(2) / 4, rel=1e-6)
    # along (1, -1) the ratio reaches the top eigenvalue
    assert smoothness_probe([eps, -eps], [-eps, eps], 1) == pytest.approx(0.5, rel=1e-6)


def test_probe_rejects_equal_points():
    with pytest.raises(DomainError):
        smoothness_probe([1.0, 2.0], [1.0, 2.0], 0)


@given(logits, st.data())
def test_probe_never_exceeds_half(z1, data):
    dz = data.draw(arrays(np.float64, z1.size, elements=st.floats(-5, 5)))
    if not np.any(dz):
        return
    label = data.draw(st.integers(0, z1.size - 1))
    assert smoothness_probe(z1, z1 + dz, label) <= 0.5 + 1e-6


def test_toy_instance_gradient():
    inst = make_toy_instance(seed=3)
    v = np.random.default_rng(3).standard_normal((inst.n_classes, inst.features.shape[1]))
    h = 1e-6
    fd = np.zeros_like(v)
    for idx in np.ndindex(v.shape):
        e = np.zeros_like(v)
        e[idx] = h
        fd[idx] = (inst.loss(v + e) - inst.loss(v - e)) / (2 * h)
    np.testing.assert_allclose(inst.grad(v), fd, atol=1e-8)


def test_toy_instance_guards():
    with pytest.raises(InvalidConfigError):
        make_toy_instance(n_classes=9)
    with pytest.raises(InvalidConfigError):
        make_toy_instance(samples=33)


def test_descent_guards():
    inst = make_toy_instance(seed=0)
    with pytest.raises(InvalidConfigError):
        gd_descent_check(inst, steps=0)
    with pytest.raises(InvalidConfigError):
        gd_descent_check(inst, eta=1.01 / inst.lipschitz)


@pytest.mark.parametrize("seed", range(20))
def test_descent_is_monotone(seed):
    inst = make_toy_instance(seed=seed, n_classes=2 + seed % 7, samples=8 + seed % 25)
    f = gd_descent_check(inst, steps=300)
    assert f.size == 301
    assert np.all(np.diff(f) <= 1e-12)
    assert f[0] == pytest.approx(math.log(inst.n_classes))
    # the (1, 2t) halving signature of sublinear convergence
    assert all(f[t] - f[2 * t] >= -1e-12 for t in range(1, 150))


def test_smaller_steps_also_descend():
    inst = make_toy_instance(seed=4)
    f = gd_descent_check(inst, eta=0.1 / inst.lipschitz, steps=200)
    assert np.all(np.diff(f) <= 1e-12)


def test_sublinear_margin_within_bound():
    for seed in range(5):
        assert 0 <= sublinear_margin(make_toy_instance(seed=seed), steps=1500) <= 1.0


def test_report_flags_quarter_bound(tmp_path):
    report = theory_report(seed=1, probes=500, instances=4, steps=400)
    claims = {c["claim"]: c for c in report["claims"]}
    assert report["ok"]
    assert report["schema"] == "ht-sentinel/v1"
    quarter = claims["hessian_max_eigenvalue_quarter"]
    assert not quarter["asserted"] and not quarter["passed"]
    assert quarter["observed"] == pytest.approx(0.5)
    assert all(c["passed"] for c in report["claims"] if c["asserted"])
    write_theory_report(tmp_path / "t.json", report)
    assert json.loads((tmp_path / "t.json").read_text()) == report
