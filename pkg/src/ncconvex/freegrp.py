"""The group algebra C[F_n]: reduced words, convolution and trace moments.

A word is a tuple of nonzero ints; letter ``i`` is the generator ``g_i`` and
``-i`` its inverse. Words are kept reduced (no adjacent ``i, -i``). A
:class:`GroupPolynomial` is a finitely supported map word -> coefficient.
Coefficients may be floats/complex or :class:`fractions.Fraction` (exact
mode, used by brute-force checks).
"""

from __future__ import annotations

import math
import numbers
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .report import VerificationReport

Word = tuple
IDENTITY: Word = ()

TERM_BUDGET = 10**7
POWER_ITERATIONS = 500
POWER_RTOL = 1e-10


class ResourceError(RuntimeError):
    """A computation would exceed its term budget."""


class WordError(ValueError):
    pass


# --- words -----------------------------------------------------------------

def reduce_word(letters: Iterable[int]) -> Word:
    out: list[int] = []
    for a in letters:
        a = int(a)
        if a == 0:
            raise WordError("letter 0 is not a generator")
        if out and out[-1] == -a:
            out.pop()
        else:
            out.append(a)
    return tuple(out)


def is_reduced(w: Sequence[int]) -> bool:
    return all(a != 0 for a in w) and all(w[i] != -w[i + 1] for i in range(len(w) - 1))


def word_multiply(u: Word, v: Word) -> Word:
    """Concatenate and cancel; both inputs must be reduced."""
    lu, k = len(u), 0
    m = min(lu, len(v))
    while k < m and u[lu - 1 - k] == -v[k]:
        k += 1
    return u[:lu - k] + v[k:]


def word_inverse(w: Word) -> Word:
    return tuple(-a for a in reversed(w))


def word_rank(w: Word) -> int:
    return max((abs(a) for a in w), default=0)


def sphere(n: int, k: int) -> list[Word]:
    """All reduced words of length exactly ``k`` in F_n, in lexicographic letter order."""
    letters = [a for i in range(1, n + 1) for a in (i, -i)]
    words: list[Word] = [()]
    for _ in range(k):
        words = [w + (a,) for w in words for a in letters if not w or w[-1] != -a]
    return words


def ball(n: int, r: int) -> list[Word]:
    out: list[Word] = []
    for k in range(r + 1):
        out.extend(sphere(n, k))
    return out


def sphere_size(n: int, k: int) -> int:
    return 1 if k == 0 else 2 * n * (2 * n - 1) ** (k - 1)


def ball_size(n: int, r: int) -> int:
    return sum(sphere_size(n, k) for k in range(r + 1))


# --- polynomials -----------------------------------------------------------

def _is_exact(c) -> bool:
    return isinstance(c, numbers.Rational)


class GroupPolynomial:
    """Finitely supported ``x = sum_g x(g) lambda(g)`` in C[F_n]."""

    __slots__ = ("n", "coeffs")

    def __init__(self, n: int, coeffs: Mapping[Sequence[int], object] | None = None, check: bool = True):
        if n < 1:
            raise WordError("rank must be at least 1")
        self.n = int(n)
        self.coeffs: dict[Word, object] = {}
        for w, c in (coeffs or {}).items():
            w = tuple(w)
            if check:
                if not is_reduced(w):
                    raise WordError(f"word {w} is not reduced")
                if word_rank(w) > self.n:
                    raise WordError(f"word {w} uses a generator outside F_{self.n}")
            if c != 0:
                self.coeffs[w] = self.coeffs.get(w, 0) + c
        self.coeffs = {w: c for w, c in self.coeffs.items() if c != 0}

    @classmethod
    def delta(cls, n: int, word: Sequence[int] = (), coeff=1) -> "GroupPolynomial":
        """``coeff * lambda(word)``."""
        return cls(n, {reduce_word(word): coeff})

    @classmethod
    def from_vector(cls, n: int, words: Sequence[Word], values) -> "GroupPolynomial":
        return cls(n, dict(zip(words, values)), check=False)

    # arithmetic
    def _same_rank(self, other: "GroupPolynomial") -> None:
        if self.n != other.n:
            raise WordError(f"rank mismatch: F_{self.n} vs F_{other.n}")

    def __add__(self, other):
        if not isinstance(other, GroupPolynomial):
            return NotImplemented
        self._same_rank(other)
        out = dict(self.coeffs)
        for w, c in other.coeffs.items():
            out[w] = out.get(w, 0) + c
        return GroupPolynomial(self.n, out, check=False)

    def __neg__(self):
        return GroupPolynomial(self.n, {w: -c for w, c in self.coeffs.items()}, check=False)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, GroupPolynomial):
            return poly_multiply(self, other)
        if isinstance(other, numbers.Number):
            return GroupPolynomial(self.n, {w: c * other for w, c in self.coeffs.items()}, check=False)
        return NotImplemented

    def __rmul__(self, other):
        if isinstance(other, numbers.Number):
            return self * other
        return NotImplemented

    def __eq__(self, other):
        return isinstance(other, GroupPolynomial) and self.n == other.n and self.coeffs == other.coeffs

    def __getitem__(self, w) -> object:
        return self.coeffs.get(tuple(w), 0)

    def __len__(self) -> int:
        return len(self.coeffs)

    def __repr__(self) -> str:
        return f"GroupPolynomial(n={self.n}, terms={len(self.coeffs)})"

    @property
    def support(self) -> list[Word]:
        return sorted(self.coeffs, key=lambda w: (len(w), w))

    @property
    def exact(self) -> bool:
        return all(_is_exact(c) for c in self.coeffs.values())

    def degrees(self) -> set[int]:
        return {len(w) for w in self.coeffs}

    def l2_norm_sq(self):
        return sum(abs(c) ** 2 if not _is_exact(c) else c * c for c in self.coeffs.values())

    def l2_norm(self) -> float:
        return math.sqrt(float(self.l2_norm_sq()))

    def to_text(self) -> str:
        return to_text(self)


def poly_multiply(x: GroupPolynomial, y: GroupPolynomial) -> GroupPolynomial:
    """Sparse convolution ``(xy)(g) = sum_{hk = g} x(h) y(k)``."""
    x._same_rank(y)
    out: dict[Word, object] = {}
    ys = list(y.coeffs.items())
    for h, a in x.coeffs.items():
        for k, b in ys:
            g = word_multiply(h, k)
            out[g] = out.get(g, 0) + a * b
    return GroupPolynomial(x.n, out, check=False)


def adjoint(x: GroupPolynomial) -> GroupPolynomial:
    """``x*(g) = conj(x(g^-1))``."""
    return GroupPolynomial(x.n, {word_inverse(w): c.conjugate() for w, c in x.coeffs.items()}, check=False)


def canonical_trace(x: GroupPolynomial):
    """``tau(x) = <x delta_e, delta_e> = x(e)``."""
    return x[IDENTITY]


def pair_trace(x: GroupPolynomial, y: GroupPolynomial):
    """``tau(x y) = sum_g x(g) y(g^-1)`` without forming the product."""
    x._same_rank(y)
    return sum((c * y.coeffs.get(word_inverse(w), 0) for w, c in x.coeffs.items()), 0)


def _trim(x: GroupPolynomial, rel: float = 1e-16) -> GroupPolynomial:
    if x.exact or not x.coeffs:
        return x
    cut = rel * max(abs(c) for c in x.coeffs.values())
    return GroupPolynomial(x.n, {w: c for w, c in x.coeffs.items() if abs(c) > cut}, check=False)


def trace_moment(x: GroupPolynomial, m: int, budget: int = TERM_BUDGET):
    """``tau((x* x)^m)``; exact when the coefficients are rational."""
    if m < 1:
        raise ValueError("moment order must be at least 1")
    if len(x) ** m > budget:
        raise ResourceError(f"|support|^m = {len(x)}^{m} exceeds the budget {budget}")
    if m == 1:
        return x.l2_norm_sq()
    y = _trim(poly_multiply(adjoint(x), x))
    half = m // 2
    power = y
    for _ in range(half - 1):
        power = _trim(poly_multiply(power, y))
    if m % 2 == 0:
        # tau(A* A) with A = y^(m/2), and A* = A since y is self-adjoint
        return power.l2_norm_sq()
    return pair_trace(_trim(poly_multiply(power, y)), power)


def lq_norm_even(x: GroupPolynomial, q: int, budget: int = TERM_BUDGET) -> float:
    """``||x||_q = tau((x* x)^(q/2))^(1/q)`` for even integers ``q >= 2``."""
    if q < 2 or q % 2:
        raise ValueError(f"q must be an even integer >= 2, got {q}")
    mom = trace_moment(x, q // 2, budget)
    val = complex(mom)
    if abs(val.imag) > 1e-12 * max(1.0, abs(val.real)):
        raise ArithmeticError(f"trace moment has imaginary part {val.imag}")
    return max(val.real, 0.0) ** (1.0 / q)


def homogeneous_component(x: GroupPolynomial, k: int) -> GroupPolynomial:
    return GroupPolynomial(x.n, {w: c for w, c in x.coeffs.items() if len(w) == k}, check=False)


def homogeneous_degree(x: GroupPolynomial) -> int:
    degs = x.degrees()
    if len(degs) != 1:
        raise ValueError(f"polynomial is not homogeneous (degrees {sorted(degs)})")
    return degs.pop()


def khintchine_ratio(x: GroupPolynomial, q: int = 4, budget: int = TERM_BUDGET) -> float:
    """``||x||_q / ||x||_2`` for a homogeneous polynomial."""
    homogeneous_degree(x)
    return lq_norm_even(x, q, budget) / x.l2_norm()


def poisson_apply(x: GroupPolynomial, t: float) -> GroupPolynomial:
    """``P_t``: ``lambda(g) -> exp(-t|g|) lambda(g)``."""
    if t < 0:
        raise ValueError("Poisson time must be nonnegative")
    return GroupPolynomial(x.n, {w: c * math.exp(-t * len(w)) for w, c in x.coeffs.items()}, check=False)


# --- text format -----------------------------------------------------------

def to_text(x: GroupPolynomial) -> str:
    """One line per term: ``re im : letters`` (``:`` alone for the identity)."""
    lines = []
    for w in x.support:
        c = complex(x.coeffs[w])
        letters = " ".join(str(a) for a in w)
        lines.append(f"{c.real!r} {c.imag!r} :" + (f" {letters}" if letters else ""))
    return "\n".join(lines) + ("\n" if lines else "")


def from_text(text: str, n: int | None = None) -> GroupPolynomial:
    coeffs: dict[Word, complex] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        head, sep, tail = line.partition(":")
        parts = head.split()
        if not sep or len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 're im : letters', got {raw!r}")
        try:
            c = complex(float(parts[0]), float(parts[1]))
            w = tuple(int(a) for a in tail.split())
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        if not is_reduced(w):
            raise WordError(f"line {lineno}: word {w} is not reduced")
        if w in coeffs:
            raise ValueError(f"line {lineno}: duplicate word {w}")
        coeffs[w] = c
    rank = max((word_rank(w) for w in coeffs), default=1)
    if n is None:
        n = max(rank, 1)
    return GroupPolynomial(n, coeffs)


# --- vectorized convolution on fixed supports --------------------------------

class ConvolutionPlan:
    """Precomputed index structure for products ``a * b`` with fixed supports.

    Building costs ``|A| |B|`` word multiplications once; each ``apply`` is a
    ``bincount`` over the same index array.
    """

    def __init__(self, left: Sequence[Word], right: Sequence[Word], budget: int = TERM_BUDGET):
        if len(left) * len(right) > budget:
            raise ResourceError(f"plan of {len(left)} x {len(right)} terms exceeds the budget {budget}")
        self.left, self.right = list(left), list(right)
        index: dict[Word, int] = {}
        idx = np.empty((len(left), len(right)), dtype=np.int64)
        for i, h in enumerate(self.left):
            for j, k in enumerate(self.right):
                g = word_multiply(h, k)
                idx[i, j] = index.setdefault(g, len(index))
        self.words: list[Word] = list(index)
        self.index = index
        self._flat = idx.ravel()

    def apply(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        w = np.multiply.outer(np.asarray(a), np.asarray(b)).ravel()
        size = len(self.words)
        if np.iscomplexobj(w):
            return (np.bincount(self._flat, weights=w.real, minlength=size)
                    + 1j * np.bincount(self._flat, weights=w.imag, minlength=size))
        return np.bincount(self._flat, weights=w, minlength=size)


@lru_cache(maxsize=32)
def _plan(left: tuple, right: tuple) -> ConvolutionPlan:
    return ConvolutionPlan(left, right)


def adjoint_product_plan(words: Sequence[Word]) -> ConvolutionPlan:
    """Plan for ``x* x`` when ``x`` is supported on ``words`` (left factor: inverses)."""
    ws = tuple(words)
    return _plan(tuple(word_inverse(w) for w in ws), ws)


def square_plan(words: Sequence[Word]) -> ConvolutionPlan:
    ws = tuple(words)
    return _plan(ws, ws)


def fourth_moment_vector(words: Sequence[Word], coeffs: np.ndarray) -> float:
    """``||x||_4^4 = ||x* x||_2^2`` for ``x = sum coeffs[i] lambda(words[i])``."""
    y = adjoint_product_plan(words).apply(np.conj(coeffs), coeffs)
    return float(np.sum(np.abs(y) ** 2))


# --- Khintchine and Haagerup checks ------------------------------------------

def _seed_rng(seed, *keys) -> np.random.Generator:
    return np.random.default_rng([int(seed), *keys])


def random_homogeneous(rng: np.random.Generator, n: int, k: int, real: bool = False) -> GroupPolynomial:
    words = sphere(n, k)
    vals = rng.standard_normal(len(words))
    if not real:
        vals = vals + 1j * rng.standard_normal(len(words))
    return GroupPolynomial.from_vector(n, words, vals)


def left_convolution_compression(x: GroupPolynomial, radius: int, budget: int = TERM_BUDGET):
    """Matrix of ``P_B L_x P_B`` on l2 of the ball ``B = {|g| <= radius}``."""
    size = ball_size(x.n, radius)
    if size * max(len(x), 1) > budget:
        raise ResourceError(f"ball of {size} words times {len(x)} terms exceeds the budget {budget}")
    words = ball(x.n, radius)
    index = {w: i for i, w in enumerate(words)}
    rows, cols, vals = [], [], []
    for j, h in enumerate(words):
        for g, c in x.coeffs.items():
            i = index.get(word_multiply(g, h))
            if i is not None:
                rows.append(i)
                cols.append(j)
                vals.append(complex(c))
    return sp.csr_matrix((vals, (rows, cols)), shape=(size, size), dtype=complex), words


def operator_norm_lower_bound(a, seed: int = 0, iterations: int = POWER_ITERATIONS,
                              rtol: float = POWER_RTOL) -> float:
    """Power iteration on ``A* A``; returns ``||A v|| / ||v||`` (never above ``||A||``)."""
    rng = np.random.default_rng(seed)
    n = a.shape[1]
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    best, prev = 0.0, 0.0
    for _ in range(iterations):
        av = a @ v
        est = float(np.linalg.norm(av))
        best = max(best, est)
        w = a.conj().T @ av
        nw = np.linalg.norm(w)
        if nw == 0:
            break
        v = w / nw
        if prev > 0 and abs(est - prev) <= rtol * est:
            break
        prev = est
    return best


def haagerup_lower_check(x: GroupPolynomial, radius: int, seed: int = 0,
                         slack: float = 1e-9) -> VerificationReport:
    """Lower bound on ``||x||_inf`` from a ball compression, against ``(k+1)||x||_2``."""
    k = homogeneous_degree(x)
    if radius < k + 2:
        raise ValueError(f"radius must be at least k + 2 = {k + 2}")
    a, _ = left_convolution_compression(x, radius)
    lower = operator_norm_lower_bound(a, seed=seed)
    l2 = x.l2_norm()
    rep = VerificationReport("haagerup", {"rank": x.n, "degree": k, "radius": radius, "l2": l2}, seed=seed)
    rep.check_le("compression norm lower bound vs (k+1)||x||_2", lower, (k + 1) * l2 + slack)
    return rep


def semicircle_chebyshev_lq(k: int, q: float, nodes: int = 400) -> float:
    """``||U_k||_q`` for the semicircle law on [-2, 2], ``U_k(2 cos th) = sin((k+1)th)/sin th``.

    Optional cross-check for the sharp fourth-moment constant.
    """
    th = np.pi * (np.arange(nodes) + 0.5) / nodes
    # d mu = (2/pi) sin^2 th d th after x = 2 cos th
    u = np.sin((k + 1) * th) / np.sin(th)
    weights = (2.0 / np.pi) * np.sin(th) ** 2 * (np.pi / nodes)
    return float(np.sum(weights * np.abs(u) ** q) ** (1.0 / q))
