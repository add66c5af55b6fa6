import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import euler_exponential_error
from texgeo.errors import NonPositiveVariance, ShapeMismatch, TOutOfRange
from texgeo.neural_kernels import (KL_WEIGHT, LatentSequence, TinyMlp, euler_sample, flow_demo,
                                   flow_loss, flow_path, fourier_encode, gradient_check, kl_loss,
                                   mlp_train_step, multi_task_attention, recon_loss, sdpa, vae_loss)

rng = np.random.default_rng(0)


def test_fourier_origin_and_identity():
    e = fourier_encode(np.zeros((2, 3)), 4)
    assert e.shape == (2, 27)
    blocks = e[:, 3:].reshape(2, 4, 2, 3)
    assert np.all(blocks[:, :, 0] == 0) and np.all(blocks[:, :, 1] == 1)
    p = rng.random((5, 3))
    assert np.array_equal(fourier_encode(p, 0), p)


def test_fourier_pi():
    e = fourier_encode([[1.0, 0, 0]], 1)
    assert abs(e[0, 3]) < 1e-15 and e[0, 6] == -1.0
    with pytest.raises(ValueError):
        fourier_encode([[0, 0, 0]], -1)


def test_sdpa_single_key_and_zero_query():
    v = rng.random((1, 8))
    out = sdpa(rng.random((4, 8)), rng.random((1, 8)), v)
    assert np.array_equal(out, np.repeat(v, 4, axis=0))
    v = rng.random((6, 5))
    np.testing.assert_allclose(sdpa(np.zeros((3, 5)), rng.random((6, 5)), v),
                               np.repeat(v.mean(axis=0, keepdims=True), 3, axis=0), atol=1e-15)


def test_sdpa_rows_sum_to_one_and_stable():
    _, w = sdpa(rng.normal(size=(4, 8)), rng.normal(size=(4, 8)), rng.normal(size=(4, 8)), return_weights=True)
    assert np.max(np.abs(w.sum(axis=1) - 1)) <= 1e-9
    out = sdpa(np.full((2, 4), 1e3), np.full((3, 4), 1e3), rng.random((3, 2)))
    assert np.all(np.isfinite(out))


@given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_sdpa_convex_rows(n, m, d, seed):
    r = np.random.default_rng(seed)
    v = r.normal(size=(m, d))
    out = sdpa(r.normal(size=(n, d)) * 3, r.normal(size=(m, d)), v)
    assert np.all(out >= v.min(axis=0) - 1e-12) and np.all(out <= v.max(axis=0) + 1e-12)


def test_sdpa_shape_errors():
    with pytest.raises(ShapeMismatch):
        sdpa(np.zeros((2, 3)), np.zeros((2, 4)), np.zeros((2, 4)))
    with pytest.raises(ShapeMismatch):
        sdpa(np.zeros((2, 3)), np.zeros((2, 3)), np.zeros((3, 3)))


def _branches(n=4, mr=3, mv=5, d=8, seed=1):
    r = np.random.default_rng(seed)
    z = r.normal(size=(n, d))
    ref = (r.normal(size=(n, d)), r.normal(size=(mr, d)), r.normal(size=(mr, d)))
    mvb = (r.normal(size=(n, d)), r.normal(size=(mv, d)), r.normal(size=(mv, d)))
    return z, ref, mvb


def test_attention_zero_lambdas_identity():
    z, ref, mv = _branches()
    assert np.array_equal(multi_task_attention(z, ref, mv, 0.0, 0.0), z)


def test_attention_single_ref_key():
    z, _, mv = _branches()
    ref = (rng.normal(size=(4, 8)), rng.normal(size=(1, 8)), rng.normal(size=(1, 8)))
    np.testing.assert_allclose(multi_task_attention(z, ref, mv, 1.0, 0.0), z + ref[2], atol=0)


def test_attention_linear_in_lambda():
    z, ref, mv = _branches()
    for lam in (0.3, 1.7):
        base = multi_task_attention(z, ref, mv, 0.0, 0.0)
        one = multi_task_attention(z, ref, mv, lam, 0.0)
        two = multi_task_attention(z, ref, mv, 2 * lam, 0.0)
        assert np.max(np.abs((two - base) - 2 * (one - base))) <= 1e-12
        one = multi_task_attention(z, ref, mv, 0.0, lam)
        two = multi_task_attention(z, ref, mv, 0.0, 2 * lam)
        assert np.max(np.abs((two - base) - 2 * (one - base))) <= 1e-12


def test_attention_branch_shape_mismatch():
    z, ref, mv = _branches()
    with pytest.raises(ShapeMismatch):
        multi_task_attention(z[:3], ref, mv, 1, 1)


def test_kl_values():
    assert kl_loss(np.zeros((3, 4)), np.ones((3, 4))) == 0.0
    assert kl_loss([[1.0]], [[1.0]]) == 0.5
    with pytest.raises(NonPositiveVariance):
        kl_loss([0.0], [0.0])
    with pytest.raises(NonPositiveVariance):
        LatentSequence(np.zeros(2), np.zeros(2), np.array([1.0, -1.0]))


@given(st.integers(0, 2**32 - 1))
def test_kl_nonnegative_and_zero_only_at_standard_normal(seed):
    r = np.random.default_rng(seed)
    mu = r.normal(size=(5, 3))
    s2 = np.exp(r.normal(size=(5, 3)))
    assert kl_loss(mu, s2) >= 0
    base_mu, base_s2 = np.zeros((1, 1)), np.ones((1, 1))
    assert kl_loss(base_mu, base_s2) <= 1e-12
    assert kl_loss(base_mu + 1e-3, base_s2) > 0
    assert kl_loss(base_mu, base_s2 + 1e-3) > 0


def test_recon_and_combined():
    t = rng.normal(size=50)
    assert recon_loss(t, t) == 0.0
    assert recon_loss(t + 1, t) == pytest.approx(1.0, abs=1e-15)
    seq = LatentSequence(rng.normal(size=(4, 2)), rng.normal(size=(4, 2)), rng.random((4, 2)) + 0.1)
    p = t + rng.normal(size=50) * 0.1
    manual = np.mean((p - t) ** 2) + 1e-3 * 0.5 * np.mean(seq.mean ** 2 + seq.variance - np.log(seq.variance) - 1)
    assert KL_WEIGHT == 1e-3
    assert abs(vae_loss(p, t, seq) - manual) <= 1e-12
    with pytest.raises(ShapeMismatch):
        recon_loss([1, 2], [1, 2, 3])


def test_flow_path_examples():
    x0, x1 = rng.normal(size=(3, 2)), rng.normal(size=(3, 2))
    assert np.array_equal(flow_path(x0, x1, 0.0).x_t, x0)
    assert np.array_equal(flow_path(x0, x1, 1.0).x_t, x1)
    b = flow_path([[0.0, 0.0]], [[2.0, 4.0]], 0.5)
    assert b.x_t.tolist() == [[1.0, 2.0]] and b.u_t.tolist() == [[2.0, 4.0]]
    assert b.c.shape == (1, 0)
    with pytest.raises(TOutOfRange):
        flow_path(x0, x1, 1.5)
    with pytest.raises(ShapeMismatch):
        flow_path(x0, x1[:2], 0.5)


def test_velocity_independent_of_t():
    x0, x1 = rng.normal(size=(4, 3)), rng.normal(size=(4, 3))
    us = [flow_path(x0, x1, t).u_t for t in np.linspace(0, 1, 11)]
    assert all(np.array_equal(u, us[0]) for u in us)
    b = flow_path(x0, x1, rng.random(4))
    np.testing.assert_allclose(b.x_t, (1 - b.t)[:, None] * x0 + b.t[:, None] * x1, atol=0)


def test_flow_loss_oracle_models():
    x0, x1 = rng.normal(size=(8, 3)), rng.normal(size=(8, 3))
    b = flow_path(x0, x1, rng.random(8))
    assert flow_loss(lambda x, c, t: x1 - x0, b) == 0.0
    shift = np.zeros(3)
    shift[0] = 1.0
    assert flow_loss(lambda x, c, t: x1 - x0 + shift, b) == pytest.approx(1.0, abs=1e-12)
    zero = flow_loss(lambda x, c, t: np.zeros_like(x), b)
    assert zero == pytest.approx(np.mean(np.sum((x1 - x0) ** 2, axis=1)), abs=1e-12)
    with pytest.raises(ShapeMismatch):
        flow_loss(TinyMlp.init([5, 4, 3]), b)


def test_euler_constant_field_exact():
    v = np.array([0.5, -2.0])
    x0 = rng.normal(size=(10, 2))
    for s in (1, 3, 8, 64):
        np.testing.assert_allclose(euler_sample(lambda x, c, t: np.broadcast_to(v, x.shape), x0, steps=s),
                                   x0 + v, atol=1e-13)


def test_euler_exponential_error_and_order():
    x0 = np.array([[1.0], [-2.0]])

    def field(x, c, t):
        return x

    end = euler_sample(field, x0, steps=1000)
    assert np.max(np.abs(end / (math.e * x0) - 1)) < 2e-3
    err = {s: abs(euler_sample(field, x0, steps=s)[0, 0] - math.e) for s in (50, 100, 200)}
    for s in (50, 100, 200):
        assert err[s] == pytest.approx(euler_exponential_error(s), rel=1e-9)
    for a, b in ((50, 100), (100, 200)):
        assert 1.7 <= err[a] / err[b] <= 2.3
    with pytest.raises(ValueError):
        euler_sample(field, x0, steps=0)


def test_train_step_zero_lr():
    m = TinyMlp.init([3, 6, 2], seed=3)
    x0 = rng.normal(size=(10, 2))
    b = flow_path(x0, x0 + [3, 0], rng.random(10))
    new, loss = mlp_train_step(m, b, 0.0)
    assert loss == flow_loss(m, b)
    assert all(np.array_equal(p, q) for p, q in zip(m.params(), new.params()))


@pytest.mark.parametrize("sizes", [[3, 8, 2], [3, 32, 32, 2], [5, 7, 4, 2]])
def test_gradient_check(sizes):
    r = np.random.default_rng(7)
    m = TinyMlp.init(sizes, seed=2)
    d = sizes[-1]
    c = r.normal(size=(12, sizes[0] - d - 1))
    x0 = r.normal(size=(12, d))
    b = flow_path(x0, x0 + r.normal(size=d), r.random(12), c if c.shape[1] else None)
    assert gradient_check(m, b) < 1e-4


def test_flow_demo():
    res = flow_demo(steps=500, lr=0.05, seed=1)
    assert res.final_loss < 0.01 * res.initial_loss
    assert abs(res.endpoint_mean[0] - 3) <= 0.1 and abs(res.endpoint_mean[1]) <= 0.1
    assert res.grad_check < 1e-4
    again = flow_demo(steps=20, seed=1)
    assert again.losses == flow_demo(steps=20, seed=1).losses
