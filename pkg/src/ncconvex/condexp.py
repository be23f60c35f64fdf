"""Trace-preserving conditional expectations on M_n and filtrations of them.

Every expectation is a small frozen dataclass with an ``apply`` method that
broadcasts over leading axes, so a batch of matrices of shape ``(T, n, n)``
is mapped in one call.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .matalg import DEFAULT_TOL, DimensionError, PreconditionError, as_matrix, dagger, ginibre, random_unitary
from .report import VerificationReport


def _check_projection_family(projections: Sequence[np.ndarray], tol: float) -> int:
    if not projections:
        raise PreconditionError("projection family is empty")
    ps = [as_matrix(p, "projection") for p in projections]
    n = ps[0].shape[-1]
    if any(p.ndim != 2 or p.shape != (n, n) for p in ps):
        raise DimensionError("projections must be n x n matrices of one size")
    total = np.zeros((n, n), dtype=complex)
    for i, p in enumerate(ps):
        if np.max(np.abs(p - dagger(p))) > tol:
            raise PreconditionError(f"projection {i} is not self-adjoint")
        if np.max(np.abs(p @ p - p)) > tol:
            raise PreconditionError(f"projection {i} is not idempotent")
        for j in range(i):
            if np.max(np.abs(p @ ps[j])) > tol:
                raise PreconditionError(f"projections {j} and {i} are not orthogonal")
        total += p
    if np.max(np.abs(total - np.eye(n))) > tol:
        raise PreconditionError("projections do not sum to the identity")
    return n


def _check_dim(x: np.ndarray, n: int | None, what: str) -> None:
    if n is not None and x.shape[-1] != n:
        raise DimensionError(f"{what} acts on M_{n}, got a {x.shape[-1]}x{x.shape[-1]} matrix")


@dataclass(frozen=True, eq=False)
class Pinching:
    """``x -> sum_i p_i x p_i`` for an orthogonal resolution of the identity."""

    projections: tuple
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        ps = tuple(np.array(as_matrix(p), copy=True) for p in self.projections)
        object.__setattr__(self, "projections", ps)
        _check_projection_family(ps, self.tol)
        for p in ps:
            p.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.projections[0].shape[-1]

    def apply(self, x: np.ndarray) -> np.ndarray:
        _check_dim(x, self.dim, "Pinching")
        return sum(p @ x @ p for p in self.projections)


@dataclass(frozen=True, eq=False)
class BlockAverage:
    """``x -> sum_i tr(p_i x)/tr(p_i) p_i``: expectation onto span{p_i}.

    The range is the abelian algebra generated by the projections. With
    the single projection 1 this is the full-trace expectation.
    """

    projections: tuple
    tol: float = DEFAULT_TOL

    def __post_init__(self):
        ps = tuple(np.array(as_matrix(p), copy=True) for p in self.projections)
        object.__setattr__(self, "projections", ps)
        _check_projection_family(ps, self.tol)
        for p in ps:
            p.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.projections[0].shape[-1]

    def apply(self, x: np.ndarray) -> np.ndarray:
        _check_dim(x, self.dim, "BlockAverage")
        out = np.zeros_like(x)
        for p in self.projections:
            r = np.trace(p).real
            c = np.einsum("ij,...ji->...", p, x) / r
            out = out + c[..., None, None] * p
        return out


@dataclass(frozen=True)
class Diagonal:
    dim = None

    def apply(self, x: np.ndarray) -> np.ndarray:
        d = np.diagonal(x, axis1=-2, axis2=-1)
        return d[..., :, None] * np.eye(x.shape[-1])


@dataclass(frozen=True)
class FullTrace:
    dim = None

    def apply(self, x: np.ndarray) -> np.ndarray:
        n = x.shape[-1]
        t = np.trace(x, axis1=-2, axis2=-1) / n
        return t[..., None, None] * np.eye(n)


@dataclass(frozen=True)
class Identity:
    dim = None

    def apply(self, x: np.ndarray) -> np.ndarray:
        return np.array(x, copy=True)


@dataclass(frozen=True)
class PartialTraceRight:
    """Expectation of M_l (x) M_r onto M_l (x) 1: ``A (x) B -> A (x) tr(B)/r 1``."""

    left_dim: int
    right_dim: int

    def __post_init__(self):
        if self.left_dim < 1 or self.right_dim < 1:
            raise PreconditionError("partial trace dimensions must be positive")

    @property
    def dim(self) -> int:
        return self.left_dim * self.right_dim

    def apply(self, x: np.ndarray) -> np.ndarray:
        _check_dim(x, self.dim, "PartialTraceRight")
        l, r = self.left_dim, self.right_dim
        t = x.reshape(x.shape[:-2] + (l, r, l, r))
        reduced = np.einsum("...ikjk->...ij", t) / r
        return np.einsum("...ij,kl->...ikjl", reduced, np.eye(r)).reshape(x.shape)


ExpectationSpec = Union[Pinching, BlockAverage, Diagonal, FullTrace, Identity, PartialTraceRight]


def apply_expectation(e: ExpectationSpec, x) -> np.ndarray:
    x = as_matrix(x)
    return e.apply(x)


def apply_complement(e: ExpectationSpec, x) -> np.ndarray:
    """``(Id - E)(x)``."""
    x = as_matrix(x)
    return x - e.apply(x)


def spec_dim(specs: Sequence[ExpectationSpec]) -> int | None:
    dims = {s.dim for s in specs if s.dim is not None}
    if len(dims) > 1:
        raise DimensionError(f"expectations act on different dimensions: {sorted(dims)}")
    return dims.pop() if dims else None


@dataclass(frozen=True)
class Filtration:
    """Expectations onto an increasing chain of subalgebras, coarsest first."""

    specs: tuple
    dim: int | None = field(default=None)

    def __post_init__(self):
        specs = tuple(self.specs)
        if not specs:
            raise PreconditionError("filtration needs at least one expectation")
        object.__setattr__(self, "specs", specs)
        d = spec_dim(specs)
        if d is not None and self.dim is not None and d != self.dim:
            raise DimensionError(f"filtration dim {self.dim} does not match expectations ({d})")
        if self.dim is None and d is not None:
            object.__setattr__(self, "dim", d)

    def __len__(self) -> int:
        return len(self.specs)


# --- constructors ----------------------------------------------------------

def coordinate_projections(n: int) -> list[np.ndarray]:
    return [np.diag(np.eye(n)[i]).astype(complex) for i in range(n)]


def block_projections(sizes: Sequence[int]) -> list[np.ndarray]:
    """Diagonal projections onto consecutive coordinate blocks."""
    n = int(sum(sizes))
    out, start = [], 0
    for s in sizes:
        d = np.zeros(n)
        d[start:start + s] = 1.0
        out.append(np.diag(d).astype(complex))
        start += s
    return out


def random_pinching(rng: np.random.Generator, n: int, ranks: Sequence[int]) -> Pinching:
    """Pinching by spectral projections of a Haar-random frame."""
    if sum(ranks) != n:
        raise PreconditionError("ranks must sum to n")
    u = random_unitary(rng, n)
    projs, start = [], 0
    for r in ranks:
        v = u[:, start:start + r]
        p = v @ dagger(v)
        projs.append((p + dagger(p)) / 2)
        start += r
    return Pinching(tuple(projs))


def refined_pinchings(rng: np.random.Generator, n: int, partitions: Sequence[Sequence[int]]) -> list[Pinching]:
    """Pinchings by consecutive column blocks of one Haar-random frame.

    A finer partition gives a smaller range algebra, so passing partitions
    from most blocks to fewest (each merging adjacent blocks of the one
    before) yields an increasing chain usable as a :class:`Filtration`.
    """
    u = random_unitary(rng, n)
    out = []
    for sizes in partitions:
        if sum(sizes) != n:
            raise PreconditionError("each partition must sum to n")
        projs, start = [], 0
        for s in sizes:
            v = u[:, start:start + s]
            projs.append(v @ dagger(v))
            start += s
        out.append(Pinching(tuple(projs)))
    return out


def walsh_expectations(n_coords: int) -> list[BlockAverage]:
    """On diag(M_{2^N}) ~ functions on {-1,1}^N: E_i averages out coordinate ``i``.

    Basis index bit ``i`` (most significant first) encodes coordinate ``i``.
    """
    dim = 2 ** n_coords
    out = []
    for i in range(n_coords):
        bit = 1 << (n_coords - 1 - i)
        projs = []
        for s in range(dim):
            if s & bit:
                continue
            d = np.zeros(dim)
            d[s] = d[s | bit] = 1.0
            projs.append(np.diag(d).astype(complex))
        out.append(BlockAverage(tuple(projs)))
    return out


# --- validation ------------------------------------------------------------

def validate_filtration(f: Filtration, trials: int = 20, seed: int = 0, tol: float = DEFAULT_TOL,
                        dim: int | None = None) -> VerificationReport:
    """Check the tower property ``E_i E_j = E_min(i,j)`` on random inputs."""
    n = f.dim if f.dim is not None else dim
    if n is None:
        raise PreconditionError("ambient dimension unknown; pass dim=")
    rep = VerificationReport("validate_filtration", {"levels": len(f), "dim": n, "trials": trials, "tol": tol},
                             seed=seed)
    rng = np.random.default_rng(seed)
    xs = ginibre(rng, n, size=trials)
    norms = np.linalg.norm(xs, axis=(-2, -1))
    images = [s.apply(xs) for s in f.specs]
    for i, ei in enumerate(f.specs):
        for j in range(len(f.specs)):
            k = min(i, j)
            res = np.linalg.norm(ei.apply(images[j]) - images[k], axis=(-2, -1)) / norms
            rep.check_le(f"tower E{i}E{j}=E{k}", float(res.max()), tol)
    return rep


def validate_expectation(e: ExpectationSpec, n: int, trials: int = 20, seed: int = 0,
                         tol: float = DEFAULT_TOL) -> VerificationReport:
    """Idempotence, trace preservation, positivity and self-adjointness residuals."""
    if e.dim is not None and e.dim != n:
        raise DimensionError(f"expectation acts on M_{e.dim}, not M_{n}")
    rep = VerificationReport("validate_expectation", {"kind": type(e).__name__, "dim": n, "trials": trials},
                             seed=seed)
    rng = np.random.default_rng(seed)
    xs = ginibre(rng, n, size=trials)
    ys = ginibre(rng, n, size=trials)
    ex, ey = e.apply(xs), e.apply(ys)
    nx = np.linalg.norm(xs, axis=(-2, -1))
    rep.check_le("idempotence", float((np.linalg.norm(e.apply(ex) - ex, axis=(-2, -1)) / nx).max()), tol)
    tr = np.abs(np.trace(ex, axis1=-2, axis2=-1) - np.trace(xs, axis1=-2, axis2=-1)) / nx
    rep.check_le("trace preservation", float(tr.max()), tol)
    pos = xs @ dagger(xs)
    mins = np.linalg.eigvalsh((e.apply(pos) + dagger(e.apply(pos))) / 2)[..., 0]
    rep.check_ge("positivity (min eig / scale)", float((mins / np.linalg.norm(pos, axis=(-2, -1))).min()), -tol)
    lhs = np.einsum("...ij,...ij->...", ex, np.conj(ys))
    rhs = np.einsum("...ij,...ij->...", xs, np.conj(ey))
    rep.check_le("trace self-adjointness", float((np.abs(lhs - rhs) / (nx * np.linalg.norm(ys, axis=(-2, -1)))).max()),
                 tol)
    return rep


SPEC_NAMES = ("diagonal", "pinching", "full-trace", "partial-trace", "walsh", "identity")


def make_spec(name: str, n: int, rng: np.random.Generator | None = None) -> ExpectationSpec:
    """Named expectation on M_n as used by the command line.

    ``pinching`` draws two complementary random projections of ranks
    ``ceil(n/2)`` and ``floor(n/2)``; ``partial-trace`` traces out a qubit
    (``n`` even); ``walsh`` averages out the first coordinate of
    ``{-1,1}^N`` with ``n = 2^N``.
    """
    if name == "diagonal":
        return Diagonal()
    if name == "full-trace":
        return FullTrace()
    if name == "identity":
        return Identity()
    if name == "pinching":
        if n < 2:
            raise PreconditionError("a nontrivial pinching needs n >= 2")
        rng = rng if rng is not None else np.random.default_rng(0)
        return random_pinching(rng, n, [n - n // 2, n // 2])
    if name == "partial-trace":
        if n % 2:
            raise PreconditionError("partial-trace needs an even dimension")
        return PartialTraceRight(n // 2, 2)
    if name == "walsh":
        if n < 2 or n & (n - 1):
            raise PreconditionError("walsh needs n = 2^N")
        return walsh_expectations(n.bit_length() - 1)[0]
    raise PreconditionError(f"unknown expectation {name!r}; choose from {', '.join(SPEC_NAMES)}")


def canonical_chain(n: int) -> Filtration:
    """``C 1 < span of two diagonal blocks < diagonal < M_n``."""
    specs = [FullTrace()]
    if n >= 2:
        specs.append(BlockAverage(tuple(block_projections([n - n // 2, n // 2]))))
    specs += [Diagonal(), Identity()]
    return Filtration(tuple(specs), dim=n)


def pinching_chain(rng: np.random.Generator, n: int) -> Filtration:
    """``C 1`` followed by nested pinchings of one random frame, ending at M_n."""
    parts = [[1] * n]
    while len(parts[-1]) > 1:
        prev = parts[-1]
        merged = [sum(prev[i:i + 2]) for i in range(0, len(prev), 2)]
        parts.append(merged)
    return Filtration((FullTrace(), *refined_pinchings(rng, n, parts)), dim=n)
