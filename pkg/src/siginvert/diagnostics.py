"""Numerical checks of the concentration behind the inversion.

Everything here needs the path itself (positions and derivatives), not just
its signature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .logsigned import LogSigned
from .path_model import (
    PiecewiseLinearPath,
    UniformSpeedPath,
    epsilon_k,
    increments,
    modulus_of_continuity,
)
from .symmetrization import (
    DEFAULT_QUADRATURE,
    BlockSpec,
    QuadratureSettings,
    integral_table,
    integrate_adaptive,
    knot_increments,
    safe_log_abs,
)
from .sources import all_words, word_from_directions
from .tensor_algebra import Word

__all__ = [
    "StandardLocationReport",
    "NoDeviationReport",
    "ConcentrationReport",
    "WordStarReport",
    "check_standard_location",
    "check_no_deviation",
    "sample_violating_points",
    "concentration_ratio",
    "check_word_star",
    "best_word_star",
]

UPPER_RTOL = 1e-9


@dataclass(frozen=True)
class StandardLocationReport:
    k: int
    delta: float
    applicable: bool
    norms: np.ndarray
    lower: float
    upper: float
    upper_ok: np.ndarray
    lower_ok: np.ndarray

    @property
    def passed(self) -> bool:
        return (not self.applicable) or bool(self.upper_ok.all() and self.lower_ok.all())

    @property
    def lower_margin(self) -> np.ndarray:
        return self.norms - self.lower

    @property
    def upper_margin(self) -> np.ndarray:
        return self.upper - self.norms

    def to_json_dict(self) -> dict:
        return {
            "k": self.k,
            "delta_k": self.delta,
            "applicable": self.applicable,
            "passed": self.passed,
            "lower": self.lower,
            "upper": self.upper,
            "lower_margin": [float(m) for m in self.lower_margin],
            "upper_margin": [float(m) for m in self.upper_margin],
        }


def check_standard_location(path: UniformSpeedPath, k: int) -> StandardLocationReport:
    """``(L - delta_k)/k <= |Delta_j gamma| <= L/k`` for every piece.

    Not applicable when ``delta_k >= L``, where the lower bound says nothing.
    """
    delta = modulus_of_continuity(path, k).value
    norms = increments(path, k).norms
    upper = path.length / k
    lower = (path.length - delta) / k
    return StandardLocationReport(
        k,
        delta,
        delta < path.length,
        norms,
        lower,
        upper,
        norms <= upper * (1.0 + UPPER_RTOL),
        norms >= lower - UPPER_RTOL * upper,
    )


@dataclass(frozen=True)
class NoDeviationReport:
    ratio: float
    deviation: float
    eps: float
    applicable: bool

    @property
    def holds(self) -> bool:
        return (not self.applicable) or self.ratio < 1.0 / math.e

    def to_json_dict(self) -> dict:
        return {
            "ratio": self.ratio,
            "deviation": self.deviation,
            "eps_k": self.eps,
            "applicable": self.applicable,
            "holds": self.holds,
        }


def check_no_deviation(path: UniformSpeedPath, k: int, u, eps: float | None = None) -> NoDeviationReport:
    """``prod_j |Delta_{u_j} gamma| / |Delta_j gamma|`` at a point ``u`` of the simplex.

    Applicable when some ``|u_j - j/k|`` exceeds ``eps`` (default ``eps_k``);
    there the product should be below ``1/e``.
    """
    u = np.asarray(u, dtype=float).reshape(k - 1)
    if np.any(np.diff(u) < 0) or (len(u) and (u[0] < 0 or u[-1] > 1)):
        raise ValueError("u must be an ordered point of the simplex")
    if eps is None:
        eps = epsilon_k(modulus_of_continuity(path, k).value, path.length, k)
    grid = np.arange(1, k) / k
    deviation = float(np.max(np.abs(u - grid))) if k > 1 else 0.0
    moved = np.abs(knot_increments(path, u[None, :])[0]).sum(axis=1)
    base = increments(path, k).norms
    with np.errstate(divide="ignore"):
        logs = np.log(moved) - np.log(base)
    ratio = float(np.exp(np.sum(logs)))
    return NoDeviationReport(ratio, deviation, float(eps), deviation > eps)


def sample_violating_points(k: int, eps: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """Points of the ordered simplex with some ``|u_j - j/k| > eps``.

    A coordinate ``j`` and a value ``v`` outside ``(j/k - eps, j/k + eps)``
    are drawn first; the other coordinates are then uniform given ``u_j = v``.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    out = np.empty((count, k - 1))
    for m in range(count):
        for _ in range(1000):
            j = int(rng.integers(1, k))
            v = float(rng.random())
            if abs(v - j / k) > eps:
                break
        else:
            raise ValueError(f"no point of the simplex deviates by more than {eps:.4g} at k={k}")
        left = np.sort(rng.random(j - 1)) * v
        right = v + np.sort(rng.random(k - 1 - j)) * (1.0 - v)
        out[m] = np.concatenate([left, [v], right])
    return out


@dataclass(frozen=True)
class ConcentrationReport:
    k: int
    n: int
    eps: float
    mass_inside: LogSigned
    mass_total: LogSigned
    ratio: float
    word_star: "WordStarReport | None" = None

    def to_json_dict(self) -> dict:
        out = {
            "k": self.k,
            "n": self.n,
            "eps_k": self.eps,
            "mass_inside": self.mass_inside.to_json_dict(),
            "mass_total": self.mass_total.to_json_dict(),
            "ratio": self.ratio,
        }
        if self.word_star is not None:
            out["word_star"] = self.word_star.to_json_dict()
        return out


def _is_monotone(path: UniformSpeedPath) -> bool:
    if not isinstance(path, PiecewiseLinearPath):
        return False
    steps = path.steps
    return bool(np.all((steps >= 0).all(axis=0) | (steps <= 0).all(axis=0)))


def _product_mass(path, k, power, settings, lower=None, upper=None) -> LogSigned:
    """``int_{Delta_{k-1}} prod_j |Delta_{u_j} gamma|^power du`` in the log domain."""

    def integrand(nodes, weights):
        if len(weights) == 0:
            return np.zeros(1), -math.inf
        norms = np.abs(knot_increments(path, nodes)).sum(axis=2)
        logs = np.log(weights) + (power * safe_log_abs(norms).sum(axis=1) if power else 0.0)
        top = float(np.max(logs))
        if not math.isfinite(top):
            return np.zeros(1), -math.inf
        return np.array([np.exp(logs - top).sum()]), top

    # the l1 norm is a polynomial between breakpoints only while no coordinate changes sign
    polynomial = _is_monotone(path)
    out = integrate_adaptive(
        integrand, path, k - 1, k * power, settings, lower=lower, upper=upper, polynomial=polynomial
    )
    return LogSigned.from_scaled(out.values[0], out.logscale)


def concentration_ratio(
    path: UniformSpeedPath,
    k: int,
    n: int,
    eps: float | None = None,
    settings: QuadratureSettings = DEFAULT_QUADRATURE,
) -> ConcentrationReport:
    """Share of ``int prod_j |Delta_{u_j} gamma|^n`` on the box ``|u_j - j/k| < eps``.

    ``eps`` defaults to ``eps_k``; ``n = 0`` gives the volume fraction.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    if eps is None:
        eps = epsilon_k(modulus_of_continuity(path, k).value, path.length, k)
    grid = np.arange(1, k) / k
    total = _product_mass(path, k, n, settings)
    inside = _product_mass(path, k, n, settings, lower=grid - eps, upper=grid + eps)
    if total.sign == 0:
        ratio = 0.0
    else:
        ratio = min(1.0, max(0.0, math.exp(inside.logmag - total.logmag) if inside.sign else 0.0))
    return ConcentrationReport(k, n, float(eps), inside, total, ratio)


@dataclass(frozen=True)
class WordStarReport:
    k: int
    n: int
    word: Word
    lhs: LogSigned
    integral: LogSigned
    achieved: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.achieved >= self.bound

    def to_json_dict(self) -> dict:
        return {
            "k": self.k,
            "n": self.n,
            "word": str(self.word),
            "lhs": self.lhs.to_json_dict(),
            "integral": self.integral.to_json_dict(),
            "achieved": self.achieved,
            "bound": self.bound,
            "holds": self.holds,
        }


def check_word_star(
    path: UniformSpeedPath,
    k: int,
    n: int,
    word: Word | str | None = None,
    settings: QuadratureSettings = DEFAULT_QUADRATURE,
) -> WordStarReport:
    """``sum_l |S(w*, l)|`` against ``int prod_j |Delta_{u_j} gamma|^{2n}``.

    Block sums here carry ``1/(a! b!)`` per block; multiplying by
    ``((2n)!)^k`` restores binomial weights so both sides are comparable.
    ``achieved`` is the ratio of the two and ``bound`` is ``(L/7)^k``.
    The word defaults to the letterwise choice from the true piece directions.
    """
    if word is None:
        word = word_from_directions(increments(path, k).r)
    elif isinstance(word, str):
        word = Word.parse(word)
    table = integral_table(path, BlockSpec(k, n, word), settings)
    mags = np.abs(table.values)
    live = mags > 0
    if live.any():
        lhs = LogSigned(1, float(np.log(mags[live].sum()) + table.logscale + k * gammaln(2 * n + 1)))
    else:
        lhs = LogSigned(0)
    integral = _product_mass(path, k, 2 * n, settings)
    if integral.sign == 0 or lhs.sign == 0:
        achieved = 0.0
    else:
        achieved = math.exp(lhs.logmag - integral.logmag)
    return WordStarReport(k, n, word, lhs, integral, achieved, (path.length / 7.0) ** k)


def best_word_star(path: UniformSpeedPath, k: int, n: int, settings=DEFAULT_QUADRATURE) -> WordStarReport:
    """Exhaustive search over all ``2^(k-1)`` separator words."""
    reports = [check_word_star(path, k, n, w, settings) for w in all_words(k)]
    return max(reports, key=lambda r: r.achieved)
