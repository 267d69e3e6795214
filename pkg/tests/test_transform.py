import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jndbench.transform import (
    ConstantPredictor,
    LogisticParams,
    MisalignedVariants,
    TransformError,
    apply_logistic,
    clamp_sentinels,
    fit_logistic,
    fit_logistic_joint,
    is_monotone_increasing,
    transformed,
)


def test_midpoint():
    p = LogisticParams(3.0, 1.0, 7.0, 2.0)
    assert apply_logistic(p, 7.0) == 2.0
    assert apply_logistic(LogisticParams(0.0, 4.0, 30.0, -5.0), 30.0) == 2.0


def test_constant_params():
    p = LogisticParams(1.5, 1.5, 0.0, 1.0)
    assert np.all(apply_logistic(p, np.linspace(-1e3, 1e3, 11)) == 1.5)


def test_infinite_inputs_hit_asymptotes():
    # B4 < 0: large scores head to B2, small ones to B1.
    p = LogisticParams(0.0, 4.0, 30.0, -5.0)
    assert apply_logistic(p, math.inf) == 4.0
    assert apply_logistic(p, -math.inf) == 0.0
    assert apply_logistic(LogisticParams(0.0, 4.0, 30.0, 5.0), math.inf) == 0.0


def test_zero_b4_rejected():
    with pytest.raises(TransformError):
        LogisticParams(1, 0, 0, 0)


def test_recovers_known_params():
    truth = LogisticParams(0.0, 4.0, 0.5, 0.1)
    s = np.linspace(0.0, 1.0, 50)
    y = truth(s)
    p = fit_logistic(s, y)
    assert p.fit_rmse < 1e-6
    assert np.max(np.abs(p(s) - y)) < 1e-3
    assert p.converged


def test_constant_target():
    p = fit_logistic(np.arange(10.0), np.full(10, 0.7))
    assert p.b1 == p.b2 == 0.7 and p.fit_rmse == 0.0


def test_constant_predictor():
    with pytest.raises(ConstantPredictor):
        fit_logistic(np.ones(10), np.arange(10.0))


def test_too_few_points():
    with pytest.raises(TransformError):
        fit_logistic([1, 2, 3], [1, 2, 3])


def test_sentinel_clamp():
    s = np.array([10.0, 20.0, 30.0, 40.0, math.inf])
    out, clamp = clamp_sentinels(s)
    iqr = np.subtract(*np.percentile([10, 20, 30, 40], [75, 25]))
    assert clamp == 40.0 + iqr
    assert out[-1] == clamp
    p = fit_logistic(s, np.array([3.0, 2.0, 1.5, 0.5, 0.1]))
    assert p.sentinel_clamp == clamp
    assert transformed(p, [math.inf])[0] == pytest.approx(p(clamp))


def test_joint_identical_variants():
    rng = np.random.default_rng(0)
    s = np.sort(rng.uniform(20, 40, 40))
    y = 4.0 / (1 + np.exp((s - 30) / 3)) + rng.normal(0, 0.05, 40)
    a = fit_logistic(s, y)
    j = fit_logistic_joint(s, s, y)
    np.testing.assert_allclose(a(s), j(s), atol=1e-8)


def test_joint_is_optimal_against_perturbations():
    rng = np.random.default_rng(1)
    y = rng.uniform(0, 3, 60)
    full = 30 - 5 * y + rng.normal(0, 1, 60)
    crop = 30 - 5 * y + rng.normal(0, 2, 60)
    p = fit_logistic_joint(full, crop, y)
    s, yy = np.concatenate([full, crop]), np.concatenate([y, y])

    def sse(q):
        return float(np.sum((apply_logistic(q, s) - yy) ** 2))

    best = sse(p)
    for variant in (full, crop):
        single = fit_logistic(variant, y)
        assert best <= sse(single) + 1e-9
    base = np.array([p.b1, p.b2, p.b3, p.b4])
    for k in range(4):
        for eps in (-1e-3, 1e-3):
            q = base.copy()
            q[k] += eps * max(1.0, abs(q[k]))
            assert best <= sse(LogisticParams(*q)) + 1e-12


def test_joint_misaligned():
    with pytest.raises(MisalignedVariants):
        fit_logistic_joint([1, 2, 3, 4, 5], [1, 2, 3, 4, 5], [1, 2, 3, 4, 5],
                           ["a", "b", "c", "d", "e"], ["v", "w", "x", "y", "z"])
    with pytest.raises(MisalignedVariants):
        fit_logistic_joint([1, 2, 3, 4, 5], [1, 2, 3], [1, 2, 3, 4, 5])


def test_joint_reorders_by_id():
    y = np.linspace(0, 3, 8)
    full = 30 - 5 * y
    ids = [f"s{i}" for i in range(8)]
    perm = np.random.default_rng(2).permutation(8)
    a = fit_logistic_joint(full, full, y, ids, ids)
    b = fit_logistic_joint(full, full[perm], y, ids, [ids[i] for i in perm])
    np.testing.assert_allclose(a(full), b(full), atol=1e-12)


def test_deterministic():
    rng = np.random.default_rng(3)
    s = rng.uniform(0, 1, 50)
    y = 2 * s + rng.normal(0, 0.1, 50)
    assert fit_logistic(s, y) == fit_logistic(s, y)


@settings(max_examples=60, deadline=None)
@given(
    st.floats(1.0, 5.0), st.floats(-1.0, 0.5), st.floats(-5.0, 5.0),
    st.floats(0.5, 5.0), st.booleans(), st.integers(0, 2**31),
)
def test_noiseless_recovery(b1, b2, b3, b4, flip, seed):
    truth = LogisticParams(b1, b2, b3, -b4 if flip else b4)
    s = np.sort(np.random.default_rng(seed).uniform(b3 - 4 * b4, b3 + 4 * b4, 50))
    p = fit_logistic(s, truth(s))
    assert np.max(np.abs(p(s) - truth(s))) < 1e-3
    assert is_monotone_increasing(p) == is_monotone_increasing(truth)
