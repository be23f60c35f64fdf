"""Half-line integrals of power-weighted resolvent kernels.

All integrals here have the form ``int_0^inf s^beta R(s) ds`` where ``R`` is
a sum of products of resolvents ``1/(s + lam)`` with ``lam > 0``. The range is
split at ``lo = 1e-3 min(lam)`` and ``hi = 1e3 max(lam)``: the two end pieces
are integrated term by term from the convergent Taylor/Laurent expansions of
``R``, and the middle piece by composite Gauss-Legendre in ``log s`` (panels
geometric in ``s``), doubling the node count until two passes agree.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

END_RATIO = 1e-3
SERIES_TERMS = 12
PANEL_WIDTH = 1.0
START_NODES = 8
MAX_NODES = 512


class QuadratureError(RuntimeError):
    pass


@lru_cache(maxsize=None)
def _leggauss(k: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(k)


def log_panel_rule(s_lo: float, s_hi: float, nodes: int, width: float = PANEL_WIDTH):
    """Nodes ``s`` and weights ``w`` with ``sum w f(s) ~ int_{s_lo}^{s_hi} f(s) ds``."""
    y0, y1 = np.log(s_lo), np.log(s_hi)
    npan = max(1, int(np.ceil((y1 - y0) / width)))
    edges = np.linspace(y0, y1, npan + 1)
    x, wx = _leggauss(nodes)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    y = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wy = (half[:, None] * wx[None, :]).ravel()
    s = np.exp(y)
    return s, wy * s  # ds = s dy


def _converge(middle, rtol: float, scale: float) -> float:
    k = START_NODES
    prev = middle(k)
    while k < MAX_NODES:
        k *= 2
        cur = middle(k)
        if abs(cur - prev) <= rtol * max(abs(cur), scale):
            return cur
        prev = cur
    raise QuadratureError(f"Gauss-Legendre did not reach rtol={rtol} with {k} nodes per panel")


def single_resolvent_integral(beta: float, lam, w, rtol: float = 1e-9) -> float:
    """``int_0^inf s^beta sum_i w_i / (s + lam_i) ds`` for ``-1 < beta < 0``."""
    if not (-1.0 < beta < 0.0):
        raise ValueError(f"single resolvent integral needs -1 < beta < 0, got {beta}")
    lam = np.asarray(lam, dtype=float)
    w = np.asarray(w, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("resolvent points must be positive")
    lo, hi = END_RATIO * lam.min(), lam.max() / END_RATIO
    m = np.arange(SERIES_TERMS)
    sign = (-1.0) ** m
    # 1/(s+lam) = sum_m (-1)^m s^m / lam^(m+1) near 0
    left = np.sum(sign * lo ** (beta + m + 1) / (beta + m + 1)
                  * np.array([np.sum(w / lam ** (k + 1)) for k in m]))
    # 1/(s+lam) = sum_m (-1)^m lam^m / s^(m+1) near infinity
    right = np.sum(sign * hi ** (beta - m) / (m - beta)
                   * np.array([np.sum(w * lam ** k) for k in m]))

    def middle(k):
        s, ws = log_panel_rule(lo, hi, k)
        vals = (w[None, :] / (s[:, None] + lam[None, :])).sum(axis=1)
        return float(np.sum(ws * s ** beta * vals))

    mid = _converge(middle, rtol, abs(left) + abs(right))
    return float(left + mid + right)


def _complete_homogeneous(x: np.ndarray, y: np.ndarray, terms: int) -> list[np.ndarray]:
    """``h_m(x, y) = sum_k x^k y^(m-k)`` for m < terms, elementwise."""
    out = [np.ones(np.broadcast(x, y).shape)]
    xm = np.ones_like(out[0])
    for _ in range(1, terms):
        xm = xm * x
        out.append(xm + y * out[-1])
    return out


def double_resolvent_integral(beta: float, lam, weights, rtol: float = 1e-9) -> float:
    """``int_0^inf s^beta sum_ij W_ij / ((s + lam_i)(s + lam_j)) ds`` for ``-1 < beta < 1``."""
    if not (-1.0 < beta < 1.0):
        raise ValueError(f"double resolvent integral needs -1 < beta < 1, got {beta}")
    lam = np.asarray(lam, dtype=float)
    W = np.asarray(weights, dtype=float)
    if np.any(lam <= 0):
        raise ValueError("resolvent points must be positive")
    lo, hi = END_RATIO * lam.min(), lam.max() / END_RATIO
    li, lj = lam[:, None], lam[None, :]
    m = np.arange(SERIES_TERMS)
    sign = (-1.0) ** m
    h_small = _complete_homogeneous(1.0 / li, 1.0 / lj, SERIES_TERMS)
    coef_left = np.array([np.sum(W * h / (li * lj)) for h in h_small])
    left = np.sum(sign * lo ** (beta + m + 1) / (beta + m + 1) * coef_left)
    h_large = _complete_homogeneous(li, lj, SERIES_TERMS)
    coef_right = np.array([np.sum(W * h) for h in h_large])
    right = np.sum(sign * hi ** (beta - 1 - m) / (1 + m - beta) * coef_right)

    def middle(k):
        s, ws = log_panel_rule(lo, hi, k)
        r = 1.0 / (s[:, None] + lam[None, :])
        vals = np.einsum("ki,ij,kj->k", r, W, r)
        return float(np.sum(ws * s ** beta * vals))

    mid = _converge(middle, rtol, abs(left) + abs(right))
    return float(left + mid + right)


def gauss_legendre(f, a: float, b: float, nodes: int = 64) -> float:
    """Plain Gauss-Legendre on ``[a, b]`` for a vectorized smooth ``f``."""
    x, w = _leggauss(nodes)
    t = 0.5 * (b - a) * x + 0.5 * (b + a)
    return float(0.5 * (b - a) * np.sum(w * f(t)))
