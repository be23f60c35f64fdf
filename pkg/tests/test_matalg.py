import numpy as np
import pytest
from hypothesis import given, strategies as st

from ncconvex.matalg import (
    DimensionError,
    PreconditionError,
    SchattenExponent,
    abs_selfadjoint,
    dagger,
    ginibre,
    gue,
    hermitian_eig,
    psd_power,
    random_invertible_selfadjoint,
    random_psd,
    random_unitary,
    schatten_norm,
    selfadjoint_dilation,
    singular_values,
    trace,
)

seeds = st.integers(0, 2**32 - 1)
dims = st.integers(1, 6)
exps = st.floats(1.05, 6.0)


def test_exponent_orientation():
    assert SchattenExponent(1.5).sign == 1.0
    assert SchattenExponent(2.0).orientation == "direct"
    assert SchattenExponent(3.0).sign == -1.0
    assert SchattenExponent(3.0).conjugate == pytest.approx(1.5)
    for bad in (1.0, 0.5, np.inf):
        with pytest.raises(PreconditionError):
            SchattenExponent(bad)


def test_known_norms():
    assert schatten_norm(np.eye(3), 2) == pytest.approx(np.sqrt(3))
    assert schatten_norm(np.diag([3.0, 4.0]), 2) == pytest.approx(5.0)
    assert schatten_norm(np.diag([1.0, -2.0]), np.inf) == pytest.approx(2.0)
    assert schatten_norm(np.eye(4), 3, normalized=True) == pytest.approx(1.0)
    assert schatten_norm(np.zeros((3, 3)), 1.5) == 0.0


def test_norm_rejects_bad_input():
    with pytest.raises(PreconditionError):
        schatten_norm(np.eye(2), 0.5)
    with pytest.raises(PreconditionError):
        schatten_norm(np.ones((2, 3)), 2)


def test_large_entries_do_not_overflow():
    m = np.diag([1e200, 1e200])
    assert schatten_norm(m, 4) == pytest.approx(1e200 * 2 ** 0.25)


def test_batched_norm_matches_loop(rng):
    xs = ginibre(rng, 4, size=7)
    batched = schatten_norm(xs, 1.7)
    assert batched.shape == (7,)
    np.testing.assert_allclose(batched, [schatten_norm(x, 1.7) for x in xs], rtol=1e-14)


@given(seeds, dims, exps)
def test_unitary_invariance(seed, n, p):
    rng = np.random.default_rng(seed)
    x = ginibre(rng, n)
    u, v = random_unitary(rng, n), random_unitary(rng, n)
    assert schatten_norm(u @ x @ v, p) == pytest.approx(schatten_norm(x, p), rel=1e-10)


@given(seeds, dims, exps)
def test_holder_duality(seed, n, p):
    # |tr(xy)| <= ||x||_p ||y||_p'
    rng = np.random.default_rng(seed)
    x, y = ginibre(rng, n), ginibre(rng, n)
    q = p / (p - 1)
    assert abs(trace(x @ y)) <= schatten_norm(x, p) * schatten_norm(y, q) * (1 + 1e-10)


@given(seeds, dims, st.floats(1.0, 3.0), st.floats(3.0, 8.0))
def test_norm_decreases_in_p(seed, n, p, q):
    x = ginibre(np.random.default_rng(seed), n)
    assert schatten_norm(x, q) <= schatten_norm(x, p) * (1 + 1e-12)


@given(seeds, dims, exps)
def test_triangle_inequality(seed, n, p):
    rng = np.random.default_rng(seed)
    x, y = ginibre(rng, n), ginibre(rng, n)
    assert schatten_norm(x + y, p) <= (schatten_norm(x, p) + schatten_norm(y, p)) * (1 + 1e-12)


@given(seeds, dims, exps)
def test_dilation_doubles_pth_power(seed, n, p):
    rng = np.random.default_rng(seed)
    x, y = ginibre(rng, n), ginibre(rng, n)
    a, b = selfadjoint_dilation(x, y)
    assert np.allclose(a, dagger(a)) and np.allclose(b, dagger(b))
    assert schatten_norm(a, p) ** p == pytest.approx(2 * schatten_norm(x, p) ** p, rel=1e-10)


def test_dilation_shape_mismatch():
    with pytest.raises(DimensionError):
        selfadjoint_dilation(np.eye(2), np.eye(3))


def test_trace_cyclic(rng):
    a, b = ginibre(rng, 5), ginibre(rng, 5)
    scale = np.linalg.norm(a) * np.linalg.norm(b)
    assert abs(trace(a @ b) - trace(b @ a)) <= 1e-12 * scale


@given(seeds, dims, st.floats(0.1, 3.0), st.floats(0.1, 3.0))
def test_psd_power_semigroup(seed, n, s, t):
    m = random_psd(np.random.default_rng(seed), n, floor=0.05)
    np.testing.assert_allclose(psd_power(m, s) @ psd_power(m, t), psd_power(m, s + t), atol=1e-9 * np.linalg.norm(m) ** (s + t) + 1e-12)


def test_psd_power_identities(rng):
    m = random_psd(rng, 4, floor=0.1)
    np.testing.assert_allclose(psd_power(m, 1.0), m, atol=1e-12)
    np.testing.assert_allclose(psd_power(m, 0.5) @ psd_power(m, 0.5), m, atol=1e-12)
    np.testing.assert_allclose(psd_power(m, -1.0), np.linalg.inv(m), atol=1e-9)


def test_psd_power_preconditions():
    with pytest.raises(PreconditionError):
        psd_power(np.diag([1.0, -1.0]), 0.5)
    with pytest.raises(PreconditionError):
        psd_power(np.diag([1.0, 0.0]), -0.5)
    with pytest.raises(PreconditionError):
        psd_power(np.array([[0, 1], [0, 0]]), 0.5)


def test_psd_power_clips_roundoff():
    m = np.diag([1.0, 1e-17])
    np.testing.assert_allclose(psd_power(m, 0.5), np.diag([1.0, 0.0]))


def test_abs_and_eig(rng):
    a = gue(rng, 5)
    w, u = hermitian_eig(a)
    np.testing.assert_allclose((u * w) @ dagger(u), a, atol=1e-12)
    np.testing.assert_allclose(abs_selfadjoint(a) @ abs_selfadjoint(a), a @ a, atol=1e-12)
    np.testing.assert_allclose(np.sort(np.abs(w)), np.sort(singular_values(a)), atol=1e-12)


def test_random_invertible_gap(rng):
    a = random_invertible_selfadjoint(rng, 6, gap=0.3)
    assert np.min(np.abs(np.linalg.eigvalsh(a))) >= 0.3 - 1e-12
