"""Deficits of the two-point and martingale convexity inequalities in S_p.

Every deficit is orientation adjusted: for ``p <= 2`` it is ``LHS - RHS`` of
``||x+y||^2 + ||x-y||^2 >= 2||x||^2 + 2(p-1)||y||^2`` (resp. the martingale
form), for ``p > 2`` its negative, so ``deficit >= 0`` always means the
inequality holds in the orientation valid for that ``p``. The raw signed
expression is kept on the result as ``raw``.

Functions accept single matrices or stacks ``(T, n, n)``; the result fields
are then arrays of length ``T``.

The second half of the module is the second-derivative oracle for
``psi(t) = ||a + t b||_p^p`` (``a`` self-adjoint invertible), computed from the
resolvent integral representations and checked against finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import _quad
from .condexp import ExpectationSpec, Filtration, Identity, spec_dim
from .matalg import (
    DEFAULT_TOL,
    DimensionError,
    PreconditionError,
    SchattenExponent,
    as_matrix,
    dagger,
    exponent,
    ginibre,
    is_psd,
    is_selfadjoint,
    schatten_norm,
)
from .report import VerificationReport

MAX_SIGN_SPECS = 12
INVERTIBILITY_FLOOR = 1e-6


@dataclass
class DeficitResult:
    deficit: np.ndarray | float
    raw: np.ndarray | float
    terms: dict = field(default_factory=dict)
    p: SchattenExponent | None = None
    scale: np.ndarray | float = 1.0

    @property
    def holds(self) -> bool:
        """True when every deficit is above ``-tol * scale**2``."""
        return bool(np.all(np.asarray(self.deficit) >= -DEFAULT_TOL * np.asarray(self.scale) ** 2))

    def normalized(self) -> np.ndarray | float:
        return self.deficit / np.asarray(self.scale) ** 2


def _sq(m, p, normalized):
    return schatten_norm(m, p, normalized=normalized) ** 2


def _opnorm(m):
    return np.linalg.norm(m, ord=2, axis=(-2, -1))


def _scale(*ms):
    s = np.ones(np.shape(ms[0])[:-2])
    for m in ms:
        s = np.maximum(s, _opnorm(m))
    return float(s) if np.ndim(s) == 0 else s


def _pack(raw, terms, p: SchattenExponent, scale):
    raw = float(raw) if np.ndim(raw) == 0 else raw
    return DeficitResult(deficit=p.sign * raw, raw=raw, terms=terms, p=p, scale=scale)


def bcl_deficit(x, y, p, constant: float | None = None, normalized: bool = False) -> DeficitResult:
    """Deficit of ``||x+y||^2 + ||x-y||^2 >= 2||x||^2 + 2c||y||^2`` with ``c = p - 1`` by default."""
    p = exponent(p)
    x, y = as_matrix(x, "x"), as_matrix(y, "y")
    if x.shape != y.shape:
        raise DimensionError(f"x and y shapes differ: {x.shape} vs {y.shape}")
    c = p.p - 1.0 if constant is None else float(constant)
    terms = {
        "sum": _sq(x + y, p.p, normalized),
        "diff": _sq(x - y, p.p, normalized),
        "x": _sq(x, p.p, normalized),
        "y": _sq(y, p.p, normalized),
    }
    raw = terms["sum"] + terms["diff"] - 2.0 * terms["x"] - 2.0 * c * terms["y"]
    return _pack(raw, terms, p, _scale(x, y, x + y, x - y))


def martingale_deficit(x, e: ExpectationSpec, p, normalized: bool = False) -> DeficitResult:
    """Deficit of ``||x||^2 >= ||E x||^2 + (p-1)||x - E x||^2``."""
    p = exponent(p)
    x = as_matrix(x, "x")
    ex = e.apply(x)
    terms = {
        "x": _sq(x, p.p, normalized),
        "Ex": _sq(ex, p.p, normalized),
        "x-Ex": _sq(x - ex, p.p, normalized),
    }
    raw = terms["x"] - terms["Ex"] - (p.p - 1.0) * terms["x-Ex"]
    return _pack(raw, terms, p, _scale(x, ex))


def _acts_as_identity(e: ExpectationSpec, n: int) -> bool:
    if isinstance(e, Identity):
        return True
    probe = ginibre(np.random.default_rng(12345), n)
    return float(np.max(np.abs(e.apply(probe) - probe))) <= DEFAULT_TOL * float(np.max(np.abs(probe)))


def filtration_deficit(x, f: Filtration, p, normalized: bool = False) -> DeficitResult:
    """Deficit of ``||x||^2 >= ||E_0 x||^2 + (p-1) sum_n ||E_n x - E_{n-1} x||^2``.

    The last expectation of ``f`` must be the identity map.
    """
    p = exponent(p)
    x = as_matrix(x, "x")
    n = x.shape[-1]
    if f.dim is not None and f.dim != n:
        raise DimensionError(f"filtration acts on M_{f.dim}, x is {n}x{n}")
    if not _acts_as_identity(f.specs[-1], n):
        raise PreconditionError("the last expectation of a filtration must be the identity")
    images = [s.apply(x) for s in f.specs]
    increments = [_sq(images[k] - images[k - 1], p.p, normalized) for k in range(1, len(images))]
    total = sum(increments) if increments else np.zeros(np.shape(x)[:-2])
    terms = {"x": _sq(x, p.p, normalized), "E0x": _sq(images[0], p.p, normalized), "increments": total}
    raw = terms["x"] - terms["E0x"] - (p.p - 1.0) * total
    return _pack(raw, terms, p, _scale(x, *images))


def sign_pattern_deficit(x, specs: Sequence[ExpectationSpec], p, normalized: bool = False) -> DeficitResult:
    """Deficit of ``||x||^2 >= sum_eps (p-1)^{#minus} ||E_N^eps_N ... E_1^eps_1 x||^2``.

    ``E^+ = E`` and ``E^- = Id - E``; ``specs[0]`` is applied first. The
    2^N words share prefixes, so only ``2^(N+1) - 2`` applications are made.
    """
    p = exponent(p)
    specs = list(specs)
    if len(specs) > MAX_SIGN_SPECS:
        raise PreconditionError(f"at most {MAX_SIGN_SPECS} expectations (2^N terms), got {len(specs)}")
    x = as_matrix(x, "x")
    d = spec_dim(specs) if specs else None
    if d is not None and d != x.shape[-1]:
        raise DimensionError(f"expectations act on M_{d}, x is {x.shape[-1]}x{x.shape[-1]}")
    level = [(x, 0)]
    for e in specs:
        nxt = []
        for y, minus in level:
            ey = e.apply(y)
            nxt.append((ey, minus))
            nxt.append((y - ey, minus + 1))
        level = nxt
    c = p.p - 1.0
    pattern_sum = sum(c ** minus * _sq(y, p.p, normalized) for y, minus in level)
    terms = {"x": _sq(x, p.p, normalized), "patterns": pattern_sum}
    raw = terms["x"] - pattern_sum
    return _pack(raw, terms, p, _scale(x))


def martingale_path(x, e: ExpectationSpec, p, t) -> np.ndarray:
    """``f(t) = ||E x + t (x - E x)||^2 - (p-1) t^2 ||x - E x||^2`` (increasing on t >= 0 for p <= 2)."""
    p = exponent(p)
    x = as_matrix(x)
    a = e.apply(x)
    b = x - a
    t = np.asarray(t, dtype=float)
    nb = schatten_norm(b, p.p) ** 2
    vals = [schatten_norm(a + ti * b, p.p) ** 2 - (p.p - 1.0) * ti * ti * nb for ti in np.atleast_1d(t)]
    return np.array(vals)


# --- second-derivative oracle ---------------------------------------------

@lru_cache(maxsize=None)
def kernel_constants(p: float) -> tuple[float, float]:
    """``(c_p, d_p)`` normalizing the two resolvent representations.

    ``1/c_p = int s^(p/2-1)/(s+1) ds`` and ``1/d_p = int s^(p-1) (1/s - 1/(s+1)) ds``,
    both by quadrature, cross-checked against ``sin(pi p/2)/pi`` and
    ``sin(pi (p-1))/pi``; the quadrature values are returned.
    """
    if not (1.0 < p < 2.0):
        raise PreconditionError(f"kernel constants need 1 < p < 2, got {p}")
    c_p = 1.0 / _quad.single_resolvent_integral(p / 2.0 - 1.0, [1.0], [1.0])
    d_p = 1.0 / _quad.single_resolvent_integral(p - 2.0, [1.0], [1.0])
    for got, ref, name in ((c_p, math.sin(math.pi * p / 2) / math.pi, "c_p"),
                           (d_p, math.sin(math.pi * (p - 1)) / math.pi, "d_p")):
        if abs(got - ref) > 1e-9 * abs(ref):
            raise _quad.QuadratureError(f"{name} self-test failed: quadrature {got!r} vs closed form {ref!r}")
    return c_p, d_p


def _oracle_inputs(a, b, p):
    p = exponent(p)
    if p.p >= 2.0:
        raise PreconditionError("second-derivative oracle needs p < 2")
    a, b = as_matrix(a, "a"), as_matrix(b, "b")
    if a.shape != b.shape or a.ndim != 2:
        raise DimensionError("a and b must be n x n matrices of one size")
    if not is_selfadjoint(a) or not is_selfadjoint(b):
        raise PreconditionError("a and b must be self-adjoint")
    a = (a + dagger(a)) / 2
    b = (b + dagger(b)) / 2
    return a, b, p


def psi(a, b, p, t) -> np.ndarray | float:
    """``psi(t) = ||a + t b||_p^p`` from exact eigenvalues (self-adjoint a, b)."""
    p = float(p)
    a, b = as_matrix(a), as_matrix(b)
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    vals = np.array([np.sum(np.abs(np.linalg.eigvalsh(a + ti * b)) ** p) for ti in ts])
    return float(vals[0]) if np.ndim(t) == 0 else vals


def psi_second_derivative(a, b, p) -> float:
    """``psi''(0)`` through the resolvent representation of ``(a^2 + t(ab+ba) + t^2 b^2)^(p/2-1)``.

    psi''(0) = p tr(|a|^(p-2) b^2)
               - (p/2) c_p int_0^inf s^(p/2-1) tr[(s+a^2)^-1 C (s+a^2)^-1 C] ds,   C = ab + ba.
    """
    a, b, p = _oracle_inputs(a, b, p)
    w, u = np.linalg.eigh(a)
    scale = max(1.0, float(np.max(np.abs(w))))
    if np.min(np.abs(w)) <= INVERTIBILITY_FLOOR * scale:
        raise PreconditionError("a is too close to singular for the oracle; perturb it")
    bt = dagger(u) @ b @ u
    first = p.p * float(np.real(np.sum(np.abs(w) ** (p.p - 2.0) * np.diagonal(bt @ bt))))
    ct = bt * (w[:, None] + w[None, :])
    c_p, _ = kernel_constants(p.p)
    integral = _quad.double_resolvent_integral(p.p / 2.0 - 1.0, w ** 2, np.abs(ct) ** 2)
    return first - 0.5 * p.p * c_p * integral


def psi_second_derivative_positive(a, b, p) -> float:
    """``psi''(0) = p d_p int_0^inf s^(p-1) tr[(s+a)^-1 b (s+a)^-1 b] ds`` for positive definite ``a``."""
    a, b, p = _oracle_inputs(a, b, p)
    if not is_psd(a):
        raise PreconditionError("a must be positive semidefinite")
    w, u = np.linalg.eigh(a)
    scale = max(1.0, float(np.max(w)))
    if np.min(w) <= INVERTIBILITY_FLOOR * scale:
        raise PreconditionError("a must be positive definite")
    bt = dagger(u) @ b @ u
    _, d_p = kernel_constants(p.p)
    return p.p * d_p * _quad.double_resolvent_integral(p.p - 1.0, w, np.abs(bt) ** 2)


def psi_second_derivative_fd(a, b, p, steps: Sequence[float] = (1e-3, 1e-4)) -> float:
    """Central second differences of ``psi`` at two steps, Richardson-extrapolated."""
    h1, h2 = steps
    p = float(p)

    def d2(h):
        v = psi(a, b, p, [h, -h, 0.0])
        return (v[0] + v[1] - 2.0 * v[2]) / (h * h)

    return (d2(h2) * h1 * h1 - d2(h1) * h2 * h2) / (h1 * h1 - h2 * h2)


def df1_check(a, b, p, tol: float = DEFAULT_TOL) -> VerificationReport:
    """``(1/p) ||a||_p^(2-p) psi''(0) >= (p-1) ||b||_p^2``."""
    a, b, pe = _oracle_inputs(a, b, p)
    p_ = pe.p
    second = psi_second_derivative(a, b, pe)
    lhs = schatten_norm(a, p_) ** (2.0 - p_) * second / p_
    rhs = (p_ - 1.0) * schatten_norm(b, p_) ** 2
    scale = max(1.0, float(np.linalg.norm(a, 2)), float(np.linalg.norm(b, 2)))
    rep = VerificationReport("df1_check", {"p": p_, "dim": a.shape[-1], "tol": tol})
    rep.check_ge("(1/p)|a|^(2-p) psi''(0) vs (p-1)|b|^2 - tol", lhs, rhs - tol * scale ** 2)
    return rep


# --- sharpness -------------------------------------------------------------

def sharpness_probe(p, c: float, t_max: float = 0.05, steps: int = 50,
                    tol: float = DEFAULT_TOL) -> VerificationReport:
    """Scan ``deficit(t)/t^2`` on the two-point family ``x = (1, 1)``, ``y = (t, -t)``.

    The grid runs from ``t_max`` down to ``t_max/steps``, so the last value is
    the one nearest ``t = 0``. With ``c = p - 1`` the ratio must vanish as
    ``t -> 0``; with ``c > p - 1`` some ``t <= 0.05`` must violate the
    inequality; with ``c < p - 1`` the deficit must stay nonnegative.
    """
    pe = exponent(p)
    if pe.p > 2.0:
        raise PreconditionError("the sharpness probe is implemented for p <= 2 only")
    if c <= 0:
        raise PreconditionError("constant must be positive")
    ts = t_max * np.arange(steps, 0, -1) / steps
    x = np.broadcast_to(np.eye(2, dtype=complex), (steps, 2, 2))
    y = ts[:, None, None] * np.diag([1.0, -1.0]).astype(complex)
    res = bcl_deficit(x, y, pe, constant=c)
    ratios = res.raw / ts ** 2
    rep = VerificationReport("sharpness", {"p": pe.p, "c": c, "t_max": t_max, "steps": steps})
    critical = pe.p - 1.0
    if abs(c - critical) <= 1e-12:
        rep.check_le("deficit/t^2 at smallest t", float(abs(ratios[-1])), 1e-3)
        rep.check_ge("min deficit / scale^2", float(np.min(res.normalized())), -tol)
    elif c > critical:
        neg = ts[(res.raw < 0) & (ts <= 0.05)]
        rep.add("largest violating t <= 0.05", float(neg.max()) if neg.size else float("nan"), 0.05, bool(neg.size))
        rep.add("min deficit/t^2", float(ratios.min()), 0.0, bool(ratios.min() < 0))
    else:
        rep.check_ge("min deficit / scale^2", float(np.min(res.normalized())), -tol)
    rep.params["ratios"] = [float(r) for r in ratios]
    rep.params["t_grid"] = [float(t) for t in ts]
    return rep


# --- Monte-Carlo campaigns ---------------------------------------------------
# Trial t draws from default_rng([seed, t]); random expectations come from a
# separate stream so results do not depend on evaluation order.

FD_RTOL = 1e-6
PARALLELOGRAM_TOL = 1e-10


def _trial_stack(seed: int, trials: int, draw) -> np.ndarray:
    return np.stack([draw(np.random.default_rng([seed, t])) for t in range(trials)])


def _spec_rng(seed: int, tag: int = 0) -> np.random.Generator:
    return np.random.default_rng([seed, tag, 0x5EC])


def _record_deficits(rep: VerificationReport, label: str, res: DeficitResult, tol: float) -> None:
    rep.check_ge(f"min deficit/scale^2 [{label}]", float(np.min(res.normalized())), -tol)


def bcl_campaign(dim: int, ps: Sequence[float], trials: int, seed: int = 0,
                 tol: float = DEFAULT_TOL) -> VerificationReport:
    """Random complex Gaussian pairs ``(x, y)`` in M_dim."""
    rep = VerificationReport("verify-bcl", {"dim": dim, "p": list(map(float, ps)), "trials": trials, "tol": tol},
                             seed=seed)
    xy = _trial_stack(seed, trials, lambda r: ginibre(r, dim, size=2))
    for p in ps:
        res = bcl_deficit(xy[:, 0], xy[:, 1], p)
        _record_deficits(rep, f"p={p:g}", res, tol)
        if float(p) == 2.0:
            rep.check_le("max |deficit|/scale^2 [p=2]", float(np.max(np.abs(res.normalized()))), PARALLELOGRAM_TOL)
    return rep


def _martingale_inputs(spec_name: str, dim: int, seed: int, trials: int):
    from .condexp import make_spec

    spec = make_spec(spec_name, dim, _spec_rng(seed))
    if spec_name == "walsh":
        # commutative case: x ranges over the diagonal algebra
        xs = _trial_stack(seed, trials, lambda r: np.diag(r.standard_normal(dim) + 1j * r.standard_normal(dim)))
    else:
        xs = _trial_stack(seed, trials, lambda r: ginibre(r, dim))
    return spec, xs


def martingale_campaign(dim: int, ps: Sequence[float], spec_name: str, trials: int, seed: int = 0,
                        tol: float = DEFAULT_TOL) -> VerificationReport:
    rep = VerificationReport("verify-martingale", {"dim": dim, "p": list(map(float, ps)), "spec": spec_name,
                                                   "trials": trials, "tol": tol}, seed=seed)
    spec, xs = _martingale_inputs(spec_name, dim, seed, trials)
    for p in ps:
        _record_deficits(rep, f"{spec_name} p={p:g}", martingale_deficit(xs, spec, p), tol)
        if float(p) <= 2.0:
            # f(t) = ||Ex + t(x-Ex)||^2 - (p-1)t^2||x-Ex||^2 has f(1) >= f(0)
            ex = spec.apply(xs)
            f1 = schatten_norm(xs, p) ** 2 - (p - 1.0) * schatten_norm(xs - ex, p) ** 2
            f0 = schatten_norm(ex, p) ** 2
            scale = _scale(xs, ex) ** 2
            rep.check_ge(f"min (f(1)-f(0))/scale^2 [{spec_name} p={p:g}]", float(np.min((f1 - f0) / scale)), -tol)
    return rep


def filtration_campaign(dim: int, ps: Sequence[float], trials: int, seed: int = 0, chain: str = "canonical",
                        tol: float = DEFAULT_TOL) -> VerificationReport:
    from .condexp import canonical_chain, pinching_chain, validate_filtration

    if chain == "canonical":
        f = canonical_chain(dim)
    elif chain == "pinching":
        f = pinching_chain(_spec_rng(seed), dim)
    else:
        raise PreconditionError(f"unknown chain {chain!r}")
    rep = VerificationReport("verify-filtration", {"dim": dim, "p": list(map(float, ps)), "chain": chain,
                                                   "levels": len(f), "trials": trials, "tol": tol}, seed=seed)
    rep.extend(validate_filtration(f, trials=min(trials, 50), seed=seed, tol=tol))
    xs = _trial_stack(seed, trials, lambda r: ginibre(r, dim))
    for p in ps:
        _record_deficits(rep, f"{chain} p={p:g}", filtration_deficit(xs, f, p), tol)
    return rep


def signs_campaign(n_specs: int, ps: Sequence[float], trials: int, seed: int = 0, family: str = "walsh",
                   dim: int | None = None, tol: float = DEFAULT_TOL) -> VerificationReport:
    """Sign-pattern sums: Walsh coordinates on diagonal x, or random pinchings on general x."""
    from .condexp import random_pinching, walsh_expectations

    if family == "walsh":
        dim = 2 ** n_specs
        specs = walsh_expectations(n_specs)
        xs = _trial_stack(seed, trials, lambda r: np.diag(r.standard_normal(dim) + 1j * r.standard_normal(dim)))
    elif family == "pinching":
        dim = dim or 4
        rng = _spec_rng(seed)
        specs = [random_pinching(rng, dim, [dim - dim // 2, dim // 2]) for _ in range(n_specs)]
        xs = _trial_stack(seed, trials, lambda r: ginibre(r, dim))
    else:
        raise PreconditionError(f"unknown family {family!r}")
    rep = VerificationReport("verify-signs", {"n_specs": n_specs, "family": family, "dim": dim,
                                              "p": list(map(float, ps)), "trials": trials, "tol": tol}, seed=seed)
    for p in ps:
        _record_deficits(rep, f"{family} N={n_specs} p={p:g}", sign_pattern_deficit(xs, specs, p), tol)
    return rep


def psi_oracle_campaign(dim: int, ps: Sequence[float], trials: int, seed: int = 0, gap: float = 0.25,
                        tol: float = DEFAULT_TOL, fd_rtol: float = FD_RTOL) -> VerificationReport:
    """Quadrature second derivative vs finite differences, the df1 bound and the |a| comparison.

    ``a`` is a random self-adjoint matrix with spectrum bounded away from 0
    by ``gap``; ``b`` is GUE.
    """
    from .matalg import abs_selfadjoint, gue, random_invertible_selfadjoint

    rep = VerificationReport("psi-oracle", {"dim": dim, "p": list(map(float, ps)), "trials": trials,
                                            "gap": gap, "tol": tol}, seed=seed)
    for p in ps:
        fd_err = pos_err = 0.0
        df1_margin = mono_margin = math.inf
        reverse_fails = 0
        for t in range(trials):
            rng = np.random.default_rng([seed, t])
            a = random_invertible_selfadjoint(rng, dim, gap)
            b = gue(rng, dim)
            abs_a = abs_selfadjoint(a)
            second = psi_second_derivative(a, b, p)
            fd = psi_second_derivative_fd(a, b, p)
            fd_err = max(fd_err, abs(second - fd) / abs(fd))
            second_abs = psi_second_derivative(abs_a, b, p)
            pos = psi_second_derivative_positive(abs_a, b, p)
            pos_err = max(pos_err, abs(pos - second_abs) / abs(second_abs))
            scale = max(1.0, float(np.linalg.norm(a, 2)), float(np.linalg.norm(b, 2)))
            lhs = schatten_norm(a, p) ** (2.0 - p) * second / p
            rhs = (p - 1.0) * schatten_norm(b, p) ** 2
            df1_margin = min(df1_margin, (lhs - rhs) / scale ** 2)
            mono_margin = min(mono_margin, (second - second_abs) / scale ** 2)
            reverse_fails += (second_abs - second) / scale ** 2 < -tol
        rep.check_le(f"max rel err quadrature vs finite differences [p={p:g}]", fd_err, fd_rtol)
        rep.check_le(f"max rel err positive vs general formula [p={p:g}]", pos_err, fd_rtol)
        rep.check_ge(f"min df1 margin/scale^2 [p={p:g}]", df1_margin, -tol)
        rep.check_ge(f"min (psi''(a) - psi''(|a|))/scale^2 [p={p:g}]", mono_margin, -tol)
        # trials where psi''(|a|) >= psi''(a) fails, i.e. the opposite comparison
        rep.params[f"reverse_comparison_failures_p{p:g}"] = int(reverse_fails)
    return rep
