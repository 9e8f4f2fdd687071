"""Small composite Gauss–Legendre helpers shared by the quadrature-heavy modules."""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def legendre(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def panels(edges, order: int = 16):
    """Nodes and weights of a composite rule on consecutive intervals given by `edges`."""
    edges = np.asarray(edges, dtype=float)
    x, w = legendre(order)
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    nodes = (half[:, None] * (x[None, :] + 1.0) + lo[:, None]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def uniform_panels(a: float, b: float, n_panels: int, order: int = 16):
    return panels(np.linspace(a, b, int(n_panels) + 1), order)
