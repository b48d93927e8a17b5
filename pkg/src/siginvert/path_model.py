"""Paths parametrized on [0, 1] at constant l1 speed.

Every path here satisfies ``|d gamma/dt|_1 == L`` on ``[0, 1]``, where ``L``
is its l1 length. Two backings exist: piecewise-linear vertex data and
analytic (position/derivative callables). A CSV loader turns uniformly
sampled data into an analytic path through a monotone cubic interpolant.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from .errors import DegeneratePathError

__all__ = [
    "UniformSpeedPath",
    "PiecewiseLinearPath",
    "AnalyticPath",
    "IncrementTable",
    "ModulusEstimate",
    "uniformize_pl",
    "increments",
    "modulus_of_continuity",
    "epsilon_k",
    "eta_k",
    "load_sampled_csv",
    "DEFAULT_MODULUS_GRID",
    "append_segment",
]

DEFAULT_MODULUS_GRID = 65536
SPEED_RTOL = 1e-9


class UniformSpeedPath:
    """Common interface of constant-l1-speed paths on ``[0, 1]``."""

    dim: int
    length: float
    #: interior times where the derivative may fail to be smooth
    breakpoints: np.ndarray
    name: str = "polyline"

    def position(self, t) -> np.ndarray:
        raise NotImplementedError

    def derivative(self, t) -> np.ndarray:
        raise NotImplementedError

    def transformed(self, scale: float = 1.0, flips: Sequence[int] | None = None) -> UniformSpeedPath:
        """Image under ``p -> scale * diag(flips) p`` (flips are +-1)."""
        raise NotImplementedError

    def scaled(self, factor: float) -> UniformSpeedPath:
        return self.transformed(scale=factor)

    def reflected(self, axis: int) -> UniformSpeedPath:
        flips = [1] * self.dim
        flips[axis] = -1
        return self.transformed(flips=flips)

    def increment(self) -> np.ndarray:
        return self.position(1.0) - self.position(0.0)

    def exact_modulus(self, scale: float) -> float | None:
        """Closed-form modulus of continuity when the backing allows it."""
        return None


def _flip_vector(dim: int, flips) -> np.ndarray:
    if flips is None:
        return np.ones(dim)
    f = np.asarray(flips, dtype=float)
    if f.shape != (dim,) or not np.all(np.abs(f) == 1):
        raise ValueError("flips must be a vector of +-1 entries, one per coordinate")
    return f


class PiecewiseLinearPath(UniformSpeedPath):
    """Polygonal path traversed at constant l1 speed.

    Vertex ``m`` is reached at time ``(cumulative l1 length up to m) / L``.
    Repeated consecutive vertices are dropped.
    """

    def __init__(self, vertices):
        pts = np.atleast_2d(np.asarray(vertices, dtype=float))
        if pts.ndim != 2 or pts.shape[0] < 2:
            raise ValueError("need at least two vertices")
        steps = np.diff(pts, axis=0)
        seg_len = np.abs(steps).sum(axis=1)
        keep = seg_len > 0
        if not keep.any():
            raise DegeneratePathError("all vertices coincide; the path has zero length")
        # segments below one ulp of the running length would get zero duration
        cum = np.cumsum(seg_len)
        keep &= np.diff(np.concatenate([[0.0], cum]) / cum[-1]) > 0
        pts = np.vstack([pts[:1], pts[1:][keep]])
        self.vertices = pts
        self.dim = pts.shape[1]
        self.steps = np.diff(pts, axis=0)
        seg_len = np.abs(self.steps).sum(axis=1)
        self.length = float(math.fsum(seg_len))
        cum = np.concatenate([[0.0], np.cumsum(seg_len)])
        self.times = cum / cum[-1]
        self.times[-1] = 1.0
        self.velocities = self.steps / np.diff(self.times)[:, None]
        self.breakpoints = self.times[1:-1].copy()

    def _segment(self, t: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self.times, t, side="right") - 1
        return np.clip(idx, 0, len(self.steps) - 1)

    def position(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        idx = self._segment(t)
        t0 = self.times[idx]
        t1 = self.times[idx + 1]
        frac = (t - t0) / (t1 - t0)
        out = self.vertices[idx] + frac[..., None] * self.steps[idx]
        # land exactly on vertices at their own times
        hit = frac == 1.0
        if np.any(hit):
            out[hit] = self.vertices[idx[hit] + 1]
        return out

    def derivative(self, t) -> np.ndarray:
        """Right derivative (left derivative at ``t = 1``)."""
        t = np.asarray(t, dtype=float)
        return self.velocities[self._segment(t)]

    def transformed(self, scale: float = 1.0, flips=None) -> PiecewiseLinearPath:
        if scale <= 0:
            raise ValueError("scale must be positive")
        f = _flip_vector(self.dim, flips)
        return PiecewiseLinearPath(self.vertices * (scale * f))

    def exact_modulus(self, scale: float) -> float:
        h = 1.0 / scale
        start = self.times[:-1]
        end = self.times[1:]
        # gap between segment a (earlier) and segment b (later)
        gap = start[None, :] - end[:, None]
        reach = (gap < h) | (np.arange(len(start))[None, :] <= np.arange(len(start))[:, None])
        jumps = np.abs(self.velocities[:, None, :] - self.velocities[None, :, :]).sum(axis=2)
        return float(np.max(np.where(reach, jumps, 0.0)))


class AnalyticPath(UniformSpeedPath):
    """A path given by vectorised position and derivative callables.

    The callables must already describe a constant-l1-speed parametrization
    on ``[0, 1]``; this is checked on a grid at construction.
    """

    def __init__(
        self,
        position: Callable[[np.ndarray], np.ndarray],
        derivative: Callable[[np.ndarray], np.ndarray],
        length: float | None = None,
        breakpoints: Sequence[float] = (),
        check_points: int = 2049,
        name: str = "analytic",
    ):
        self._position = position
        self._derivative = derivative
        self.name = name
        grid = np.linspace(0.0, 1.0, check_points)
        d = np.asarray(derivative(grid), dtype=float)
        self.dim = d.shape[-1]
        speed = np.abs(d).sum(axis=-1)
        if length is None:
            length = float(np.median(speed))
        self.length = float(length)
        if self.length <= 0:
            raise DegeneratePathError("path has zero length")
        err = np.max(np.abs(speed - self.length)) / self.length
        if err > SPEED_RTOL:
            raise ValueError(f"derivative is not of constant l1 speed (relative deviation {err:.3g})")
        bps = np.unique(np.asarray(breakpoints, dtype=float))
        self.breakpoints = bps[(bps > 0) & (bps < 1)]

    def position(self, t) -> np.ndarray:
        return np.asarray(self._position(np.asarray(t, dtype=float)), dtype=float)

    def derivative(self, t) -> np.ndarray:
        return np.asarray(self._derivative(np.asarray(t, dtype=float)), dtype=float)

    def transformed(self, scale: float = 1.0, flips=None) -> AnalyticPath:
        if scale <= 0:
            raise ValueError("scale must be positive")
        m = scale * _flip_vector(self.dim, flips)
        pos, der = self._position, self._derivative
        return AnalyticPath(
            lambda t: pos(t) * m,
            lambda t: der(t) * m,
            length=self.length * scale,
            breakpoints=self.breakpoints,
            name=self.name,
        )


def uniformize_pl(vertices) -> PiecewiseLinearPath:
    """Polygonal path through ``vertices`` at constant l1 speed."""
    return PiecewiseLinearPath(vertices)


@dataclass(frozen=True)
class IncrementTable:
    """Coordinate increments of a path over the ``k`` pieces ``[(j-1)/k, j/k]``."""

    k: int
    deltas: np.ndarray

    @property
    def dx(self) -> np.ndarray:
        return self.deltas[:, 0]

    @property
    def dy(self) -> np.ndarray:
        return self.deltas[:, 1]

    @property
    def norms(self) -> np.ndarray:
        return np.abs(self.deltas).sum(axis=1)

    @property
    def r(self) -> np.ndarray:
        """Unsigned direction ``|dx| / |d gamma|``; 1/2 on zero pieces."""
        norms = self.norms
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.abs(self.dx) / norms
        return np.where(norms > 0, r, 0.5)


def increments(path: UniformSpeedPath, k: int) -> IncrementTable:
    if k < 1:
        raise ValueError("k must be at least 1")
    times = np.arange(k + 1) / k
    pos = path.position(times)
    return IncrementTable(k, np.diff(pos, axis=0))


class ModulusEstimate(NamedTuple):
    """Modulus of continuity of the derivative at one scale.

    ``resolution`` is the grid spacing of the sweep (0 when exact).
    """

    value: float
    resolution: float
    exact: bool


def modulus_of_continuity(
    path: UniformSpeedPath, k: float, grid: int = DEFAULT_MODULUS_GRID
) -> ModulusEstimate:
    """``sup_{|s-t| < 1/k} |gamma'(s) - gamma'(t)|_1``.

    Exact for polygonal paths, otherwise a sweep over ``grid`` points. The
    l1 norm of a difference is the max of ``sigma . (a - b)`` over sign
    vectors ``sigma``, so the sweep reduces to sliding max/min filters.
    """
    if k <= 0:
        raise ValueError("scale must be positive")
    exact = path.exact_modulus(k)
    if exact is not None:
        return ModulusEstimate(exact, 0.0, True)
    t = np.linspace(0.0, 1.0, grid)
    der = path.derivative(t)
    spacing = 1.0 / (grid - 1)
    # largest index distance strictly below 1/k
    reach = int(math.ceil((1.0 / k) / spacing - 1e-12)) - 1
    size = min(reach + 1, grid)
    best = 0.0
    dim = der.shape[1]
    for bits in range(2 ** (dim - 1)):
        sigma = np.array([1.0] + [(-1.0) ** ((bits >> i) & 1) for i in range(dim - 1)])
        g = der @ sigma
        if size <= 1:
            continue
        spread = maximum_filter1d(g, size, mode="nearest") - minimum_filter1d(g, size, mode="nearest")
        best = max(best, float(spread.max()))
    return ModulusEstimate(best, spacing, False)


def epsilon_k(delta: float, length: float, k: float) -> float:
    """Concentration half-width ``sqrt(delta/L) + sqrt(1/k)``."""
    if length <= 0:
        raise ValueError("length must be positive")
    return math.sqrt(max(delta, 0.0) / length) + math.sqrt(1.0 / k)


def eta_k(path: UniformSpeedPath, k: int, grid: int = DEFAULT_MODULUS_GRID, floor: bool = True) -> float:
    """Dimensionless error scale: modulus at scale ``3/eps_k`` divided by ``L``.

    Floored at ``1/sqrt(k)`` unless ``floor`` is false.
    """
    eps = epsilon_k(modulus_of_continuity(path, k, grid).value, path.length, k)
    eta = modulus_of_continuity(path, 3.0 / eps, grid).value / path.length
    return max(eta, 1.0 / math.sqrt(k)) if floor else eta


class _ReparametrizedPchip:
    """Monotone-cubic interpolant re-timed to constant l1 speed."""

    def __init__(self, t, values):
        self.interp = PchipInterpolator(t, values, axis=0)
        self.dinterp = self.interp.derivative()
        cuts = [np.asarray(t, dtype=float)]
        for c in range(values.shape[1]):
            roots = PchipInterpolator(t, values[:, c]).derivative().roots(extrapolate=False)
            cuts.append(roots[np.isfinite(roots)])
        cuts = np.unique(np.concatenate(cuts))
        self.cuts = cuts
        self.cut_values = self.interp(cuts)
        # every coordinate is monotone between consecutive cuts
        arc = np.abs(np.diff(self.cut_values, axis=0)).sum(axis=1)
        self.cum = np.concatenate([[0.0], np.cumsum(arc)])
        self.length = float(self.cum[-1])
        if self.length <= 0:
            raise DegeneratePathError("sampled path has zero length")

    def arclength(self, tau: np.ndarray, seg: np.ndarray) -> np.ndarray:
        return self.cum[seg] + np.abs(self.interp(tau) - self.cut_values[seg]).sum(axis=-1)

    def invert(self, t: np.ndarray) -> np.ndarray:
        shape = np.shape(t)
        target = np.clip(np.ravel(t), 0.0, 1.0) * self.length
        seg = np.clip(np.searchsorted(self.cum, target, side="right") - 1, 0, len(self.cuts) - 2)
        lo = self.cuts[seg].copy()
        hi = self.cuts[seg + 1].copy()
        tau = lo + (hi - lo) * np.where(
            self.cum[seg + 1] > self.cum[seg],
            (target - self.cum[seg]) / np.maximum(self.cum[seg + 1] - self.cum[seg], 1e-300),
            0.0,
        )
        tol = 1e-13 * self.length
        for _ in range(100):
            resid = self.arclength(tau, seg) - target
            if np.all(np.abs(resid) <= tol):
                break
            lo = np.where(resid < 0, tau, lo)
            hi = np.where(resid > 0, tau, hi)
            speed = np.abs(self.dinterp(tau)).sum(axis=-1)
            with np.errstate(divide="ignore", invalid="ignore"):
                newton = tau - resid / speed
            ok = (speed > 0) & (newton > lo) & (newton < hi)
            tau = np.where(ok, newton, 0.5 * (lo + hi))
        return tau.reshape(shape)

    def position(self, t):
        return self.interp(self.invert(t))

    def derivative(self, t):
        tau = self.invert(t)
        d = self.dinterp(tau)
        speed = np.abs(d).sum(axis=-1, keepdims=True)
        stalled = speed[..., 0] == 0
        if np.any(stalled):
            nudged = np.minimum(tau[stalled] + 1e-9, self.cuts[-1])
            d[stalled] = self.dinterp(nudged)
            speed[stalled] = np.abs(d[stalled]).sum(axis=-1, keepdims=True)
        return d * (self.length / speed)


def load_sampled_csv(path: str | Path) -> AnalyticPath:
    """Read columns ``t, x, y`` (uniform grid) into a C1 uniform-speed path."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    header = [h.strip().lower() for h in rows[0]]
    if header[:1] == ["t"]:
        rows = rows[1:]
    data = np.array([[float(v) for v in r] for r in rows])
    if data.shape[1] < 3:
        raise ValueError("expected columns t, x, y")
    t = data[:, 0]
    steps = np.diff(t)
    if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-6):
        raise ValueError("sample times must form an increasing uniform grid")
    rep = _ReparametrizedPchip(t, data[:, 1:])
    return AnalyticPath(rep.position, rep.derivative, length=rep.length, name=str(path))


def append_segment(path: UniformSpeedPath, v) -> UniformSpeedPath:
    """The path followed by the straight segment ``v``, re-timed to uniform speed."""
    v = np.asarray(v, dtype=float)
    if isinstance(path, PiecewiseLinearPath):
        return PiecewiseLinearPath(np.vstack([path.vertices, path.vertices[-1] + v]))
    seg = float(np.abs(v).sum())
    if seg == 0:
        return path
    total = path.length + seg
    split = path.length / total
    end = path.position(np.ones(1))[0]

    def position(t):
        t = np.asarray(t, dtype=float)
        head = path.position(np.minimum(t / split, 1.0))
        tail = end + ((t - split) / (1.0 - split))[..., None] * v
        return np.where((t <= split)[..., None], head, tail)

    def derivative(t):
        t = np.asarray(t, dtype=float)
        head = path.derivative(np.minimum(t / split, 1.0)) / split
        tail = np.broadcast_to(v / (1.0 - split), head.shape)
        return np.where((t < split)[..., None], head, tail)

    return AnalyticPath(
        position,
        derivative,
        length=total,
        breakpoints=np.append(path.breakpoints * split, split),
        name=getattr(path, "name", "analytic") + "+segment",
    )
