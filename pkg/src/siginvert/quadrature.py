"""Composite Gauss-Legendre rules on the ordered simplex.

The simplex ``0 < u_1 < ... < u_m < 1`` is integrated as an iterated
integral, outermost variable ``u_m`` first. Every variable's range is cut at
a shared set of points (path breakpoints, optional box faces), so a
piecewise-polynomial integrand whose pieces change only at those points is
integrated exactly once the order is high enough.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Iterator, Sequence

import numpy as np

__all__ = ["gauss_legendre01", "simplex_chunks", "exact_order", "uniform_cuts", "interval_rule"]

DEFAULT_CHUNK = 1 << 16


@lru_cache(maxsize=None)
def gauss_legendre01(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on ``[0, 1]``."""
    if order < 1:
        raise ValueError("order must be positive")
    x, w = np.polynomial.legendre.leggauss(order)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def exact_order(total_degree: int, dim: int) -> int:
    """Order that integrates a degree-``total_degree`` polynomial exactly.

    Each inner integration can raise the degree in the next variable by one.
    """
    return (total_degree + dim) // 2 + 1


def uniform_cuts(panels: int, extra: Sequence[float] = ()) -> np.ndarray:
    grid = np.linspace(0.0, 1.0, panels + 1)[1:-1]
    return _clean_cuts(np.concatenate([grid, np.asarray(extra, dtype=float)]))


def _clean_cuts(cuts) -> np.ndarray:
    cuts = np.unique(np.asarray(cuts, dtype=float))
    return cuts[(cuts > 0.0) & (cuts < 1.0)]


def _panel_rule(a: np.ndarray, b: np.ndarray, cuts: np.ndarray, order: int):
    """Nodes/weights for each ``[a_p, b_p]`` split at ``cuts``."""
    x, w = gauss_legendre01(order)
    inner = np.clip(cuts[None, :], a[:, None], b[:, None])
    edges = np.concatenate([a[:, None], inner, b[:, None]], axis=1)
    left = edges[:, :-1]
    width = np.diff(edges, axis=1)
    nodes = left[..., None] + width[..., None] * x
    weights = width[..., None] * w
    return nodes.reshape(len(a), -1), weights.reshape(len(a), -1)


def interval_rule(lo: float, hi: float, cuts: Sequence[float], order: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on ``[lo, hi]`` split at ``cuts``."""
    x, w = _panel_rule(np.array([float(lo)]), np.array([float(hi)]), _clean_cuts(cuts), order)
    x, w = x[0], w[0]
    keep = w > 0
    return x[keep], w[keep]


def simplex_chunks(
    dim: int,
    cuts: Sequence[float],
    order: int,
    lower: Sequence[float] | None = None,
    upper: Sequence[float] | None = None,
    chunk: int = DEFAULT_CHUNK,
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Stream ``(nodes, weights)`` for the ordered simplex of dimension ``dim``.

    ``nodes`` has shape ``(N, dim)`` with increasing columns. ``lower`` and
    ``upper`` optionally restrict coordinate ``j`` to ``[lower_j, upper_j]``;
    their values are added to the cut set so the restriction stays exact.
    Weights of the unrestricted rule sum to ``1/dim!``. For ``dim == 0`` a
    single empty node of weight one is produced.
    """
    if dim == 0:
        yield np.zeros((1, 0)), np.ones(1)
        return
    lo = np.zeros(dim) if lower is None else np.clip(np.asarray(lower, dtype=float), 0.0, 1.0)
    hi = np.ones(dim) if upper is None else np.clip(np.asarray(upper, dtype=float), 0.0, 1.0)
    all_cuts = _clean_cuts(np.concatenate([np.asarray(cuts, dtype=float), lo, hi]))
    per_node = (len(all_cuts) + 1) * order

    def descend(nodes: np.ndarray, weights: np.ndarray, j: int):
        if j < 0:
            yield nodes, weights
            return
        batch = max(1, chunk // per_node)
        for s in range(0, len(weights), batch):
            nb = nodes[s : s + batch]
            wb = weights[s : s + batch]
            top = nb[:, j + 1] if j + 1 < dim else np.ones(len(wb))
            a = np.full(len(wb), lo[j])
            b = np.maximum(a, np.minimum(hi[j], top))
            x, w = _panel_rule(a, b, all_cuts, order)
            child = np.repeat(nb, x.shape[1], axis=0)
            child[:, j] = x.ravel()
            cw = (wb[:, None] * w).ravel()
            live = cw > 0
            if live.any():
                yield from descend(child[live], cw[live], j - 1)

    yield from descend(np.zeros((1, dim)), np.ones(1), dim - 1)


def simplex_volume(dim: int) -> float:
    return 1.0 / math.factorial(dim)
