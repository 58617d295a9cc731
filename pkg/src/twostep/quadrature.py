"""Composite four-point Gauss-Legendre rule on [0, 1]."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exceptions import InvalidSize

__all__ = ["QuadratureRule", "composite_gl4", "legendre4_reference"]


def _p4(x):
    """Legendre P4 and its derivative."""
    x2 = x * x
    return (35.0 * x2 * x2 - 30.0 * x2 + 3.0) / 8.0, (140.0 * x2 * x - 60.0 * x) / 8.0


def _bisect(f, lo, hi, tol=1e-15):
    flo = f(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fmid = f(mid)
        if fmid == 0.0:
            return mid
        if (fmid < 0) == (flo < 0):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@lru_cache(maxsize=None)
def legendre4_reference() -> tuple[np.ndarray, np.ndarray]:
    """Nodes (ascending) and weights of the 4-point rule on [-1, 1]."""
    p = lambda x: _p4(x)[0]
    # P4 is even; its positive roots are separated by sqrt(3/7) ~ 0.65
    pos = [_bisect(p, 0.0, 0.6), _bisect(p, 0.6, 1.0)]
    nodes = np.array([-pos[1], -pos[0], pos[0], pos[1]])
    weights = 2.0 / ((1.0 - nodes**2) * _p4(nodes)[1] ** 2)
    return nodes, weights


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes sorted descending (``nodes[0]`` closest to 1) with their weights."""

    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n(self):
        return self.nodes.size

    def integrate(self, f):
        return float(np.dot(self.weights, f(self.nodes)))


def composite_gl4(n: int) -> QuadratureRule:
    """Split [0, 1] into ``n/4`` equal panels with a 4-point rule on each."""
    if isinstance(n, bool) or int(n) != n or n < 4 or n % 4:
        raise InvalidSize(f"n must be a positive multiple of 4, got {n!r}")
    n = int(n)
    xi, w = legendre4_reference()
    m = n // 4
    h = 1.0 / m
    left = np.arange(m, dtype=np.float64)[:, None] * h
    nodes = (left + 0.5 * h * (1.0 + xi)[None, :]).ravel()
    weights = np.tile(0.5 * h * w, m)
    order = np.argsort(-nodes, kind="stable")
    nodes, weights = nodes[order], weights[order]
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes=nodes, weights=weights)
