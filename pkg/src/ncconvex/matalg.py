"""Dense complex matrix arithmetic: spectra, traces and Schatten norms.

Matrices are plain ``numpy`` complex arrays. Functions that make sense on
stacks accept arrays of shape ``(..., n, n)`` and broadcast over the
leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_TOL = 1e-9
CLIP_EPS = 1e-13


class PreconditionError(ValueError):
    """An input violates an operation's stated precondition."""


class DimensionError(PreconditionError):
    pass


@dataclass(frozen=True)
class SchattenExponent:
    """Exponent ``1 < p < inf`` of a Schatten class."""

    p: float

    def __post_init__(self):
        p = float(self.p)
        if not (1.0 < p < np.inf):
            raise PreconditionError(f"Schatten exponent must satisfy 1 < p < inf, got {self.p}")
        object.__setattr__(self, "p", p)

    @property
    def orientation(self) -> str:
        return "direct" if self.p <= 2.0 else "reversed"

    @property
    def sign(self) -> float:
        """+1 where the convexity inequalities hold as stated, -1 where reversed."""
        return 1.0 if self.p <= 2.0 else -1.0

    @property
    def conjugate(self) -> float:
        return self.p / (self.p - 1.0)

    def __float__(self) -> float:
        return self.p


def exponent(p) -> SchattenExponent:
    return p if isinstance(p, SchattenExponent) else SchattenExponent(p)


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise PreconditionError(f"{name} has non-finite entries")
    return a


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def scale_of(*ms) -> float:
    """max(1, largest singular value among the arguments)."""
    s = 1.0
    for m in ms:
        m = np.asarray(m)
        if m.size:
            s = max(s, float(np.max(np.linalg.norm(m, ord=2, axis=(-2, -1)))))
    return s


def is_selfadjoint(m, tol: float = DEFAULT_TOL) -> bool:
    m = as_matrix(m)
    return float(np.max(np.abs(m - dagger(m)), initial=0.0)) <= tol * scale_of(m)


def is_psd(m, tol: float = DEFAULT_TOL) -> bool:
    m = as_matrix(m)
    if not is_selfadjoint(m, tol):
        return False
    w = np.linalg.eigvalsh((m + dagger(m)) / 2)
    return float(np.min(w)) >= -tol * scale_of(m)


def hermitian_eig(m, tol: float = DEFAULT_TOL) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and unitary eigenvector matrix of a self-adjoint matrix."""
    m = as_matrix(m)
    if not is_selfadjoint(m, tol):
        raise PreconditionError("hermitian_eig requires a self-adjoint matrix")
    return np.linalg.eigh((m + dagger(m)) / 2)


def singular_values(m) -> np.ndarray:
    return np.linalg.svd(np.asarray(m, dtype=complex), compute_uv=False)


def schatten_norm(m, p, normalized: bool = False) -> np.ndarray | float:
    """Schatten p-norm ``(sum_i s_i^p)^(1/p)``; ``p = inf`` gives the operator norm.

    With ``normalized=True`` the trace is divided by the dimension, i.e. the
    norm is taken with respect to the normalized trace ``tr/n``.
    """
    p = float(p)
    if p < 1.0:
        raise PreconditionError(f"Schatten norm needs p >= 1, got {p}")
    m = as_matrix(m)
    s = singular_values(m)
    if np.isinf(p):
        out = s.max(axis=-1)
    else:
        smax = s.max(axis=-1, keepdims=True)
        safe = np.where(smax > 0, smax, 1.0)
        # factor out the largest singular value to avoid overflow for large p
        out = safe[..., 0] * np.sum((s / safe) ** p, axis=-1) ** (1.0 / p)
        if normalized:
            out = out * m.shape[-1] ** (-1.0 / p)
    return float(out) if np.ndim(out) == 0 else out


def trace(m) -> complex | np.ndarray:
    m = as_matrix(m)
    t = np.trace(m, axis1=-2, axis2=-1)
    return complex(t) if np.ndim(t) == 0 else t


def selfadjoint_dilation(x, y) -> tuple[np.ndarray, np.ndarray]:
    """``a = [[0, x], [x*, 0]]`` and ``b = [[0, y], [y*, 0]]``."""
    x, y = as_matrix(x, "x"), as_matrix(y, "y")
    if x.shape != y.shape:
        raise DimensionError(f"dilation needs equal shapes, got {x.shape} and {y.shape}")

    def dil(z):
        zero = np.zeros_like(z)
        return np.block([[zero, z], [dagger(z), zero]])

    return dil(x), dil(y)


def psd_power(m, alpha: float, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Functional calculus ``m**alpha`` for positive semidefinite ``m``."""
    m = as_matrix(m)
    if not is_selfadjoint(m, tol):
        raise PreconditionError("psd_power requires a self-adjoint matrix")
    w, u = np.linalg.eigh((m + dagger(m)) / 2)
    scale = scale_of(m)
    if np.min(w) < -tol * scale:
        raise PreconditionError(f"psd_power: negative eigenvalue {np.min(w):.3g}")
    if alpha < 0 and np.min(w) <= tol * scale:
        raise PreconditionError("psd_power: singular input with negative exponent")
    w = np.where(np.abs(w) < CLIP_EPS * scale, 0.0, np.clip(w, 0.0, None))
    if alpha == 0:
        wa = np.ones_like(w)
    else:
        wa = w ** alpha
    return (u * wa) @ dagger(u)


def abs_selfadjoint(m) -> np.ndarray:
    """``|m|`` for self-adjoint ``m``."""
    w, u = hermitian_eig(m)
    return (u * np.abs(w)) @ dagger(u)


# --- random ensembles ------------------------------------------------------

def ginibre(rng: np.random.Generator, n: int, size=()) -> np.ndarray:
    """Independent standard complex Gaussian entries (E|z|^2 = 1)."""
    shape = tuple(int(k) for k in np.atleast_1d(size)) + (n, n) if np.size(size) else (n, n)
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def gue(rng: np.random.Generator, n: int, size=()) -> np.ndarray:
    g = ginibre(rng, n, size)
    return (g + dagger(g)) / 2.0


def random_unitary(rng: np.random.Generator, n: int) -> np.ndarray:
    """Haar-distributed unitary via QR with phase correction."""
    q, r = np.linalg.qr(ginibre(rng, n))
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_psd(rng: np.random.Generator, n: int, floor: float = 0.0) -> np.ndarray:
    g = ginibre(rng, n)
    return g @ dagger(g) / n + floor * np.eye(n)


def random_invertible_selfadjoint(rng: np.random.Generator, n: int, gap: float = 0.1) -> np.ndarray:
    """Self-adjoint matrix whose eigenvalues have modulus at least ``gap``."""
    u = random_unitary(rng, n)
    w = rng.standard_normal(n)
    w = np.sign(w) * (gap + np.abs(w))
    return (u * w) @ dagger(u)
