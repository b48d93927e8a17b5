"""Concrete C1 test paths with exact constant l1 speed.

All curves here are driven by a direction angle ``theta(t)``: the velocity
is ``L * (cos theta, sin theta) / (|cos theta| + |sin theta|)``, which has l1
norm exactly ``L``. Positions are integrated cell by cell with Gauss-Legendre
rules, so they are accurate to rounding away from singular points.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .path_model import AnalyticPath
from .quadrature import gauss_legendre01

__all__ = [
    "l1_direction",
    "direction_field_path",
    "quarter_arc",
    "smoothed_corner",
    "closed_loop",
    "holder_path",
    "wavy_monotone",
]


def l1_direction(theta) -> np.ndarray:
    """Unit-l1 vector at angle ``theta``."""
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([c, s], axis=-1) / (np.abs(c) + np.abs(s))[..., None]


def _axis_crossings(theta, samples: int = 8192) -> np.ndarray:
    """Times in (0, 1) where ``theta`` crosses a multiple of pi/2."""
    t = np.linspace(0.0, 1.0, samples + 1)
    q = theta(t) / (0.5 * math.pi)
    out = []
    for i in np.flatnonzero(np.floor(q[:-1]) != np.floor(q[1:])):
        m = max(np.floor(q[i]), np.floor(q[i + 1]))
        f = lambda s: float(theta(np.array(s))) / (0.5 * math.pi) - m
        fa, fb = f(t[i]), f(t[i + 1])
        if fa == 0.0 or fb == 0.0:
            out.append(t[i] if fa == 0.0 else t[i + 1])
        elif fa * fb < 0:
            out.append(brentq(f, t[i], t[i + 1], xtol=1e-15, rtol=1e-15))
    out = np.asarray(out, dtype=float)
    return out[(out > 0) & (out < 1)]


def direction_field_path(
    theta: Callable[[np.ndarray], np.ndarray],
    length: float = 1.0,
    breakpoints: Sequence[float] = (),
    cells: int = 512,
    order: int = 16,
    name: str = "direction-field",
) -> AnalyticPath:
    """Path with velocity ``length * l1_direction(theta(t))`` started at the origin.

    ``breakpoints`` mark times where ``theta`` is not smooth. Times where the
    velocity crosses an axis (the l1 normalisation has a kink there) are
    found automatically. Both become cell edges so every Gauss-Legendre cell
    sees a smooth integrand.
    """
    given = np.asarray(breakpoints, float)
    crossings = _axis_crossings(theta)
    if len(given):
        # a crossing next to a declared breakpoint is the same feature
        crossings = crossings[np.min(np.abs(crossings[:, None] - given[None, :]), axis=1) > 1e-3]
    breakpoints = np.unique(np.concatenate([given, crossings]))
    edges = np.unique(np.concatenate([np.linspace(0.0, 1.0, cells + 1), breakpoints]))
    edges = edges[(edges >= 0) & (edges <= 1)]
    gx, gw = gauss_legendre01(order)
    width = np.diff(edges)
    t = edges[:-1, None] + width[:, None] * gx[None, :]
    vel = length * l1_direction(theta(t))
    steps = (vel * (width[:, None] * gw[None, :])[..., None]).sum(axis=1)
    anchor = np.vstack([np.zeros(2), np.cumsum(steps, axis=0)])

    def derivative(t):
        return length * l1_direction(theta(np.asarray(t, dtype=float)))

    def position(t):
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        cell = np.clip(np.searchsorted(edges, flat, side="right") - 1, 0, len(width) - 1)
        left = edges[cell]
        h = flat - left
        nodes = left[:, None] + h[:, None] * gx[None, :]
        part = (derivative(nodes) * (h[:, None] * gw[None, :])[..., None]).sum(axis=1)
        return (anchor[cell] + part).reshape(t.shape + (2,))

    bps = np.asarray(breakpoints, dtype=float)
    return AnalyticPath(position, derivative, length=length, breakpoints=bps, name=name)


def quarter_arc(radius: float = 1.0) -> AnalyticPath:
    """Circular quarter arc from ``(0, 0)`` to ``(R, R)``, both coordinates increasing.

    The arc ``R (sin phi, 1 - cos phi)`` has l1 arclength
    ``R (1 - cos phi + sin phi)``; inverting it gives a closed-form
    uniform-speed parametrisation with ``L = 2R``.
    """
    length = 2.0 * radius

    def phi(t):
        return math.pi / 4 + np.arcsin((2.0 * np.asarray(t, dtype=float) - 1.0) / math.sqrt(2.0))

    def position(t):
        p = phi(t)
        return radius * np.stack([np.sin(p), 1.0 - np.cos(p)], axis=-1)

    def derivative(t):
        p = phi(t)
        c, s = np.cos(p), np.sin(p)
        return length * np.stack([c, s], axis=-1) / (c + s)[..., None]

    return AnalyticPath(position, derivative, length=length, name="quarter-arc")


def _smoothstep(s):
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


def smoothed_corner(length: float = 2.0, width: float = 0.1) -> AnalyticPath:
    """East then north, turning through a C1 blend of half-width ``width`` around ``t = 1/2``."""
    a, b = 0.5 - width, 0.5 + width

    def theta(t):
        return 0.5 * math.pi * _smoothstep((t - a) / (b - a))

    return direction_field_path(theta, length, breakpoints=(a, b), name="smoothed-corner")


def closed_loop(length: float = 4.0, wobble: float = 0.3) -> AnalyticPath:
    """Convex closed curve: ``theta(t) = 2 pi t + wobble sin(4 pi t)``.

    The velocity at ``t + 1/2`` is minus the velocity at ``t``, so the path
    returns exactly to its start; it is C1 including across ``t = 0 = 1``.
    """

    def theta(t):
        return 2.0 * math.pi * t + wobble * np.sin(4.0 * math.pi * t)

    return direction_field_path(theta, length, name="closed-loop")


def holder_path(alpha: float, amplitude: float = 0.5, length: float = 1.0) -> AnalyticPath:
    """Velocity angle ``pi/4 + amplitude * sign(t - 1/2) |t - 1/2|^alpha``.

    The derivative is Holder continuous of order ``alpha`` and no better at
    ``t = 1/2``, so its modulus of continuity scales like ``h^alpha``.
    """

    def theta(t):
        s = t - 0.5
        return math.pi / 4 + amplitude * np.sign(s) * np.abs(s) ** alpha

    return direction_field_path(theta, length, breakpoints=(0.5,), name=f"holder-{alpha:g}")


def wavy_monotone(length: float = 3.0, amplitude: float = 0.35) -> AnalyticPath:
    """Both coordinates increasing, direction oscillating inside the first quadrant."""

    def theta(t):
        return math.pi / 4 + amplitude * np.sin(2.0 * math.pi * t)

    return direction_field_path(theta, length, name="wavy-monotone")
