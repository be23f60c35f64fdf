import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from oracles import divided_difference_oracle

from ncconvex.condexp import Diagonal, Filtration, FullTrace, Identity, make_spec, random_pinching, walsh_expectations
from ncconvex.convexity import (
    MAX_SIGN_SPECS,
    bcl_campaign,
    bcl_deficit,
    df1_check,
    filtration_campaign,
    filtration_deficit,
    kernel_constants,
    martingale_campaign,
    martingale_deficit,
    martingale_path,
    psi,
    psi_oracle_campaign,
    psi_second_derivative,
    psi_second_derivative_fd,
    psi_second_derivative_positive,
    sharpness_probe,
    sign_pattern_deficit,
    signs_campaign,
)
from ncconvex.matalg import (
    DimensionError,
    PreconditionError,
    abs_selfadjoint,
    ginibre,
    gue,
    random_invertible_selfadjoint,
    random_unitary,
)

seeds = st.integers(0, 2**32 - 1)
exps = st.floats(1.05, 4.0)


# --- deficits ----------------------------------------------------------------

def test_scalar_bcl_by_hand():
    # x = 1, y = 1/2 in M_1, p = 1.5: 1.5^2 + 0.5^2 - 2 - 2*0.5*0.25
    res = bcl_deficit([[1.0]], [[0.5]], 1.5)
    assert res.raw == pytest.approx(2.25 + 0.25 - 2.0 - 0.25)
    assert res.holds


@given(seeds, st.integers(1, 5))
def test_parallelogram_at_two(seed, n):
    rng = np.random.default_rng(seed)
    x, y = ginibre(rng, n), ginibre(rng, n)
    res = bcl_deficit(x, y, 2.0)
    assert abs(res.normalized()) <= 1e-10


@given(seeds, st.integers(1, 5), exps)
def test_bcl_orientation_adjusted_nonnegative(seed, n, p):
    rng = np.random.default_rng(seed)
    res = bcl_deficit(ginibre(rng, n), ginibre(rng, n), p)
    assert res.normalized() >= -1e-9
    assert res.deficit == pytest.approx(res.p.sign * res.raw)


@given(seeds, st.integers(1, 4), st.floats(1.05, 2.0))
def test_bcl_invariant_under_unitaries_and_swap_sign(seed, n, p):
    rng = np.random.default_rng(seed)
    x, y = ginibre(rng, n), ginibre(rng, n)
    u, v = random_unitary(rng, n), random_unitary(rng, n)
    base = bcl_deficit(x, y, p).raw
    assert bcl_deficit(u @ x @ v, u @ y @ v, p).raw == pytest.approx(base, rel=1e-9, abs=1e-10)
    assert bcl_deficit(x, -y, p).raw == pytest.approx(base, rel=1e-12, abs=1e-12)


def test_bcl_normalized_trace_scaling(rng):
    x, y = ginibre(rng, 4), ginibre(rng, 4)
    full = bcl_deficit(x, y, 1.5).raw
    norm = bcl_deficit(x, y, 1.5, normalized=True).raw
    assert norm == pytest.approx(full * 4 ** (-2 / 1.5))


def test_bcl_shape_mismatch():
    with pytest.raises(DimensionError):
        bcl_deficit(np.eye(2), np.eye(3), 1.5)


def test_martingale_trivial_expectations(rng):
    x = ginibre(rng, 4)
    assert martingale_deficit(x, Identity(), 1.5).raw == pytest.approx(0.0, abs=1e-12)
    # at p = 2 the deficit is zero for any conditional expectation (orthogonality)
    for name in ("diagonal", "pinching", "partial-trace", "full-trace"):
        e = make_spec(name, 4, rng)
        assert abs(martingale_deficit(x, e, 2.0).normalized()) <= 1e-10


@given(seeds, st.sampled_from(["diagonal", "pinching", "partial-trace", "full-trace"]), exps)
def test_martingale_nonnegative(seed, name, p):
    rng = np.random.default_rng(seed)
    e = make_spec(name, 4, rng)
    assert martingale_deficit(ginibre(rng, 4), e, p).normalized() >= -1e-9


@given(seeds, st.floats(1.05, 2.0))
def test_martingale_path_increasing(seed, p):
    rng = np.random.default_rng(seed)
    e = random_pinching(rng, 4, [2, 2])
    vals = martingale_path(ginibre(rng, 4), e, p, np.linspace(0, 1, 11))
    assert np.all(np.diff(vals) >= -1e-9 * max(1.0, np.abs(vals).max()))


def test_two_level_filtration_is_martingale(rng):
    x = ginibre(rng, 4)
    f = Filtration((Diagonal(), Identity()), dim=4)
    assert filtration_deficit(x, f, 1.4).raw == pytest.approx(martingale_deficit(x, Diagonal(), 1.4).raw)


def test_filtration_requires_identity_top(rng):
    with pytest.raises(PreconditionError):
        filtration_deficit(ginibre(rng, 4), Filtration((FullTrace(), Diagonal()), dim=4), 1.5)


def test_single_sign_pattern_is_martingale(rng):
    x = ginibre(rng, 4)
    e = make_spec("pinching", 4, rng)
    assert sign_pattern_deficit(x, [e], 1.3).raw == pytest.approx(martingale_deficit(x, e, 1.3).raw, rel=1e-12)


def test_sign_pattern_parseval_at_two(rng):
    specs = walsh_expectations(3)
    x = np.diag(rng.standard_normal(8))
    assert abs(sign_pattern_deficit(x, specs, 2.0).normalized()) <= 1e-10


def test_sign_pattern_limits(rng):
    with pytest.raises(PreconditionError):
        sign_pattern_deficit(np.eye(2), [Diagonal()] * (MAX_SIGN_SPECS + 1), 1.5)
    with pytest.raises(DimensionError):
        sign_pattern_deficit(np.eye(3), walsh_expectations(2), 1.5)


def test_batched_deficits(rng):
    xs, ys = ginibre(rng, 3, size=6), ginibre(rng, 3, size=6)
    res = bcl_deficit(xs, ys, 1.7)
    assert res.deficit.shape == (6,)
    np.testing.assert_allclose(res.raw, [bcl_deficit(x, y, 1.7).raw for x, y in zip(xs, ys)], rtol=1e-12)


# --- second-derivative oracle ------------------------------------------------

@pytest.mark.parametrize("p", [1.1, 1.5, 1.9])
def test_kernel_constants_closed_form(p):
    c_p, d_p = kernel_constants(p)
    assert c_p == pytest.approx(math.sin(math.pi * p / 2) / math.pi, rel=1e-10)
    assert d_p == pytest.approx(math.sin(math.pi * (p - 1)) / math.pi, rel=1e-10)


def test_scalar_second_derivative():
    # psi(t) = |1 + t|^p
    assert psi_second_derivative([[1.0]], [[1.0]], 1.5) == pytest.approx(0.75, rel=1e-9)
    assert psi_second_derivative([[-2.0]], [[1.0]], 1.5) == pytest.approx(0.75 * 2 ** -0.5, rel=1e-9)


def test_commuting_second_derivative():
    a, b, p = np.diag([0.5, -1.0, 2.0]), np.diag([1.0, 2.0, -1.0]), 1.3
    ref = p * (p - 1) * np.sum(np.abs(np.diag(a)) ** (p - 2) * np.diag(b) ** 2)
    assert psi_second_derivative(a, b, p) == pytest.approx(ref, rel=1e-9)


@given(seeds, st.integers(2, 5), st.floats(1.05, 1.95))
def test_quadrature_matches_divided_differences(seed, n, p):
    rng = np.random.default_rng(seed)
    a = random_invertible_selfadjoint(rng, n, 0.2)
    b = gue(rng, n)
    assert psi_second_derivative(a, b, p) == pytest.approx(divided_difference_oracle(a, b, p), rel=1e-8)


@given(seeds, st.integers(2, 4), st.floats(1.1, 1.9))
def test_quadrature_matches_finite_differences(seed, n, p):
    rng = np.random.default_rng(seed)
    a = random_invertible_selfadjoint(rng, n, 0.25)
    b = gue(rng, n)
    # h = 1e-4 loses ~eps*psi/h^2 to rounding when psi'' << psi (p near 1); wider steps stay clean
    fd = psi_second_derivative_fd(a, b, p, steps=(1e-2, 1e-3))
    assert psi_second_derivative(a, b, p) == pytest.approx(fd, rel=1e-6)


@given(seeds, st.integers(2, 4), st.floats(1.1, 1.9))
def test_positive_formula_agrees(seed, n, p):
    rng = np.random.default_rng(seed)
    a = abs_selfadjoint(random_invertible_selfadjoint(rng, n, 0.2))
    b = gue(rng, n)
    assert psi_second_derivative_positive(a, b, p) == pytest.approx(psi_second_derivative(a, b, p), rel=1e-8)


@given(seeds, st.integers(2, 4), st.floats(1.1, 1.9))
def test_absolute_value_lowers_second_derivative(seed, n, p):
    rng = np.random.default_rng(seed)
    a = random_invertible_selfadjoint(rng, n, 0.2)
    b = gue(rng, n)
    assert psi_second_derivative(abs_selfadjoint(a), b, p) <= psi_second_derivative(a, b, p) * (1 + 1e-9) + 1e-12


def test_absolute_value_counterexample_to_reverse_direction():
    # sign flip across a zero crossing: the reverse comparison fails strictly
    a = np.diag([1.0, -1.0])
    b = np.array([[0.0, 1.0], [1.0, 0.0]])
    p = 1.5
    assert psi_second_derivative(a, b, p) == pytest.approx(2 * p, rel=1e-9)
    assert psi_second_derivative(abs_selfadjoint(a), b, p) == pytest.approx(2 * p * (p - 1), rel=1e-9)


@given(seeds, st.integers(1, 4), st.floats(1.1, 1.9))
def test_df1_holds(seed, n, p):
    rng = np.random.default_rng(seed)
    assert df1_check(random_invertible_selfadjoint(rng, n, 0.2), gue(rng, n), p).passed


def test_oracle_preconditions():
    with pytest.raises(PreconditionError):
        psi_second_derivative(np.diag([1.0, 0.0]), np.eye(2), 1.5)
    with pytest.raises(PreconditionError):
        psi_second_derivative(np.eye(2), np.eye(2), 2.5)
    with pytest.raises(PreconditionError):
        psi_second_derivative(np.array([[1.0, 1.0], [0.0, 1.0]]), np.eye(2), 1.5)
    with pytest.raises(PreconditionError):
        psi_second_derivative_positive(np.diag([1.0, -1.0]), np.eye(2), 1.5)


def test_psi_eigenvalue_form():
    assert psi(np.eye(2), np.diag([1.0, -1.0]), 1.5, 0.5) == pytest.approx(1.5 ** 1.5 + 0.5 ** 1.5)


# --- sharpness and campaigns ---------------------------------------------------

def test_sharpness_critical_constant():
    rep = sharpness_probe(1.5, 0.5)
    assert rep.passed
    assert abs(rep.params["ratios"][-1]) <= 1e-3


def test_sharpness_violation_above_critical():
    rep = sharpness_probe(1.5, 0.51)
    assert rep.passed
    assert min(rep.params["ratios"]) < 0


def test_sharpness_below_critical_holds():
    assert sharpness_probe(1.5, 0.45).passed


def test_sharpness_rejects_large_p():
    with pytest.raises(PreconditionError):
        sharpness_probe(3.0, 2.0)


def test_campaigns_small():
    assert bcl_campaign(3, [1.2, 2.0, 3.0], 50, seed=1).passed
    for name in ("diagonal", "pinching", "partial-trace", "walsh", "full-trace"):
        assert martingale_campaign(4, [1.3, 2.5], name, 50, seed=1).passed
    assert filtration_campaign(4, [1.3, 2.5], 50, seed=1).passed
    assert filtration_campaign(4, [1.3, 2.5], 50, seed=1, chain="pinching").passed
    assert signs_campaign(2, [1.3, 2.5], 50, seed=1).passed
    assert signs_campaign(2, [1.3, 2.5], 50, seed=1, family="pinching", dim=4).passed
    assert psi_oracle_campaign(3, [1.5], 5, seed=1).passed


def test_campaign_deterministic():
    a = bcl_campaign(3, [1.3], 20, seed=5).to_dict()
    b = bcl_campaign(3, [1.3], 20, seed=5).to_dict()
    assert a == b


@given(seeds, st.integers(1, 4), exps)
def test_dilation_scales_deficit(seed, n, p):
    from ncconvex.matalg import selfadjoint_dilation

    rng = np.random.default_rng(seed)
    x, y = ginibre(rng, n), ginibre(rng, n)
    a, b = selfadjoint_dilation(x, y)
    d, da = bcl_deficit(x, y, p).raw, bcl_deficit(a, b, p).raw
    # every squared norm picks up 2^(2/p), so the signs agree
    assert da == pytest.approx(2 ** (2 / p) * d, rel=1e-8, abs=1e-10)


@given(seeds, st.sampled_from(["diagonal", "pinching", "partial-trace"]), exps)
def test_normalized_trace_keeps_deficit_sign(seed, name, p):
    rng = np.random.default_rng(seed)
    e = make_spec(name, 4, rng)
    x = ginibre(rng, 4)
    full = martingale_deficit(x, e, p).raw
    norm = martingale_deficit(x, e, p, normalized=True).raw
    assert norm == pytest.approx(full * 4 ** (-2 / p), rel=1e-10, abs=1e-14)


@given(seeds, st.floats(-3.0, 3.0).filter(lambda v: abs(v) > 1e-3), st.floats(1.1, 1.9))
def test_second_derivative_even_and_quadratic_in_b(seed, beta, p):
    rng = np.random.default_rng(seed)
    a = random_invertible_selfadjoint(rng, 3, 0.2)
    b = gue(rng, 3)
    base = psi_second_derivative(a, b, p)
    assert psi_second_derivative(a, -b, p) == pytest.approx(base, rel=1e-9)
    assert psi_second_derivative(a, beta * b, p) == pytest.approx(beta ** 2 * base, rel=1e-9)
