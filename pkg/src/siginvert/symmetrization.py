"""Symmetrized block sums of a signature.

A block scheme fixes ``k`` blocks of length ``2n`` separated by the letters
of a word ``w`` with ``|w| = k - 1``. For a multi-index ``l`` the symmetrized
sum adds the coefficients of every word whose ``j``-th block holds exactly
``2 l_j`` letters ``x``. Sign variants enlarge one block by a single extra
``x`` or ``y``.

Two independent evaluators are provided: the literal word sum over a
truncated signature, and an integral over the ordered simplex of block
boundaries, where the sum over all arrangements inside block ``j`` collapses
to ``dx^a dy^b / (a! b!)`` for the increments over that block.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Sequence

import mpmath
import numpy as np
from scipy.special import gammaln

from .errors import AccuracyError, CapacityError, DepthError, ShapeError
from .logsigned import LogSigned, ScaledArray
from .path_model import PiecewiseLinearPath, UniformSpeedPath
from .quadrature import DEFAULT_CHUNK, exact_order, simplex_chunks, uniform_cuts
from .tensor_algebra import TruncatedSignature, Word

__all__ = [
    "BlockSpec",
    "SymmetrizedTable",
    "enumerate_block_words",
    "symmetrized_sum_wordsum",
    "level_symmetrized_sum",
    "block_table",
    "symmetrized_sum_integral",
    "integral_table",
    "integrate_adaptive",
    "QuadratureSettings",
    "ENUMERATION_CAP",
]

ENUMERATION_CAP = 10**7
X, Y = 0, 1


@dataclass(frozen=True)
class BlockSpec:
    """Block scheme: ``k`` blocks of half-size ``n`` split by ``separator``.

    ``variant`` is ``None`` for the base scheme or ``(i, letter)`` with
    ``1 <= i <= k`` and ``letter`` in ``{"x", "y"}`` for a sign variant.
    """

    k: int
    n: int
    separator: Word = field(default_factory=Word)
    variant: tuple[int, str] | None = None

    def __post_init__(self):
        if isinstance(self.separator, str):
            object.__setattr__(self, "separator", Word.parse(self.separator))
        if self.k < 1 or self.n < 0:
            raise ValueError("need k >= 1 and n >= 0")
        if len(self.separator) != self.k - 1:
            raise ValueError(f"separator must have length k-1 = {self.k - 1}")
        if any(a not in (X, Y) for a in self.separator):
            raise ValueError("separator letters must be x or y")
        if self.variant is not None:
            i, letter = self.variant
            if not 1 <= i <= self.k or letter not in ("x", "y"):
                raise ValueError(f"bad sign variant {self.variant!r}")

    @property
    def word_length(self) -> int:
        return 2 * self.n * self.k + self.k - 1 + (self.variant is not None)

    def exponents(self, ell: Sequence[int]) -> list[tuple[int, int]]:
        """Per-block ``(x-count, y-count)`` for the multi-index ``ell``."""
        ell = tuple(int(v) for v in ell)
        if len(ell) != self.k or any(not 0 <= v <= self.n for v in ell):
            raise ValueError(f"multi-index {ell} out of range for k={self.k}, n={self.n}")
        out = [(2 * v, 2 * self.n - 2 * v) for v in ell]
        if self.variant is not None:
            i, letter = self.variant
            ex, ey = out[i - 1]
            out[i - 1] = (ex + 1, ey) if letter == "x" else (ex, ey + 1)
        return out

    def blocks(self, ell: Sequence[int]) -> list[tuple[int, int]]:
        """Per-block ``(x-count, block-length)`` pairs."""
        return [(ex, ex + ey) for ex, ey in self.exponents(ell)]

    def multi_indices(self) -> Iterator[tuple[int, ...]]:
        return itertools.product(range(self.n + 1), repeat=self.k)


def enumerate_block_words(
    separator: Word | str, blocks: Sequence[tuple[int, int]], cap: int = ENUMERATION_CAP
) -> Iterator[Word]:
    """Every word ``b_1 s_1 b_2 ... s_{k-1} b_k`` with prescribed block x-counts."""
    if isinstance(separator, str):
        separator = Word.parse(separator)
    blocks = [(int(c), int(m)) for c, m in blocks]
    if len(blocks) != len(separator) + 1:
        raise ValueError("number of blocks must be one more than the separator length")
    if any(not 0 <= c <= m for c, m in blocks):
        raise ValueError("x-count must lie between 0 and the block length")
    total = math.prod(math.comb(m, c) for c, m in blocks)
    if total > cap:
        raise CapacityError(
            f"{total} words exceed the enumeration cap {cap}; use the integral evaluator"
        )
    return _block_words(separator, blocks)


def _block_words(separator: Word, blocks) -> Iterator[Word]:
    choices = []
    for c, m in blocks:
        opts = []
        for xs in itertools.combinations(range(m), c):
            letters = [Y] * m
            for p in xs:
                letters[p] = X
            opts.append(tuple(letters))
        choices.append(opts)
    sep = tuple(separator)
    for combo in itertools.product(*choices):
        letters = list(combo[0])
        for s, blk in zip(sep, combo[1:]):
            letters.append(s)
            letters.extend(blk)
        yield Word(tuple(letters))


def symmetrized_sum_wordsum(
    sig: TruncatedSignature, spec: BlockSpec, ell: Sequence[int], cap: int = ENUMERATION_CAP
) -> LogSigned:
    """Literal sum of signature coefficients over the block word set."""
    if sig.dim != 2:
        raise ShapeError("block sums are defined for two-letter signatures")
    length = spec.word_length
    if length > sig.depth:
        raise DepthError(f"words of length {length} exceed signature depth {sig.depth}")
    level = sig.level(length)
    vals = [level[w.index(2)] for w in enumerate_block_words(spec.separator, spec.blocks(ell), cap)]
    if sig.exact:
        return _logsigned_exact(sum(vals, Fraction(0)))
    return LogSigned.from_float(math.fsum(vals))


def _logsigned_exact(value) -> LogSigned:
    """LogSigned of a rational or mpf without rounding it to a float first."""
    if value == 0:
        return LogSigned(0)
    mag = abs(value)
    if isinstance(mag, Fraction):
        logmag = math.log(mag.numerator) - math.log(mag.denominator)
    else:
        logmag = float(mpmath.log(mag))
    return LogSigned(1 if value > 0 else -1, logmag)


def _xcounts(length: int) -> np.ndarray:
    idx = np.arange(2**length, dtype=np.int64)
    ones = np.zeros_like(idx)
    for b in range(length):
        ones += (idx >> b) & 1
    return length - ones


def level_symmetrized_sum(sig: TruncatedSignature, n: int, ell: int) -> float:
    """Sum of all level-``n`` coefficients whose word has ``ell`` letters x."""
    if sig.dim != 2:
        raise ShapeError("level sums are defined for two-letter signatures")
    level = sig.level(n)
    if not 0 <= ell <= n:
        return 0.0
    picked = level[_xcounts(n) == ell]
    if sig.exact:
        return float(sum(picked, Fraction(0)))
    return math.fsum(picked)


def block_table(sig: TruncatedSignature, spec: BlockSpec) -> np.ndarray:
    """All block sums ``S(w, l)`` of a signature at once, shape ``(n+1,)*k``.

    The level tensor is sliced at the separator positions and each block
    axis is contracted with the indicator of its admissible x-counts.
    """
    if sig.dim != 2:
        raise ShapeError("block sums are defined for two-letter signatures")
    length = spec.word_length
    if length > sig.depth:
        raise DepthError(f"words of length {length} exceed signature depth {sig.depth}")
    lens, offsets = [], []
    for j in range(spec.k):
        extra = spec.variant is not None and spec.variant[0] == j + 1
        lens.append(2 * spec.n + (1 if extra else 0))
        offsets.append(1 if extra and spec.variant[1] == "x" else 0)
    shape = []
    for j, m in enumerate(lens):
        shape.append(2**m)
        if j < spec.k - 1:
            shape.append(2)
    t = sig.level(length).reshape(shape)
    index = []
    for j in range(spec.k):
        index.append(slice(None))
        if j < spec.k - 1:
            index.append(spec.separator.letters[j])
    t = t[tuple(index)]
    ell = np.arange(spec.n + 1)
    for j, m in enumerate(lens):
        sel = (_xcounts(m)[:, None] == 2 * ell[None, :] + offsets[j]).astype(float)
        t = np.tensordot(t, sel, axes=([0], [0]))
    return np.asarray(t)


@dataclass(frozen=True)
class QuadratureSettings:
    """Knobs of the simplex quadrature.

    Polygonal paths are integrated exactly in one pass. Other paths start
    from ``2**start_level`` panels of order ``order`` and double until the
    relative change drops below ``tol``.
    """

    tol: float = 1e-8
    order: int = 16
    start_level: int = 3
    max_level: int = 12
    node_budget: int = 40_000_000
    chunk: int = DEFAULT_CHUNK


DEFAULT_QUADRATURE = QuadratureSettings()

Integrand = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, float]]


def _integrate_once(integrand: Integrand, dim, cuts, order, lower, upper, chunk) -> ScaledArray:
    acc = None
    for nodes, weights in simplex_chunks(dim, cuts, order, lower, upper, chunk):
        values, logscale = integrand(nodes, weights)
        if acc is None:
            acc = ScaledArray.empty(np.shape(values))
        acc.add(values, logscale)
    if acc is None:
        values, _ = integrand(np.zeros((0, dim)), np.zeros(0))
        acc = ScaledArray.empty(np.shape(values))
    return acc


def _relative_change(new: ScaledArray, old: ScaledArray, groups) -> float:
    if not np.isfinite(new.logscale) and not np.isfinite(old.logscale):
        return 0.0
    top = max(new.logscale, old.logscale)
    a = new.values * math.exp(new.logscale - top) if np.isfinite(new.logscale) else 0 * new.values
    b = old.values * math.exp(old.logscale - top) if np.isfinite(old.logscale) else 0 * old.values
    a, b = np.ravel(a), np.ravel(b)
    worst = 0.0
    for g in groups or [slice(None)]:
        scale = max(np.max(np.abs(a[g]), initial=0.0), np.max(np.abs(b[g]), initial=0.0))
        if scale > 0:
            worst = max(worst, float(np.max(np.abs(a[g] - b[g]))) / scale)
    return worst


def integrate_adaptive(
    integrand: Integrand,
    path: UniformSpeedPath,
    dim: int,
    degree: int,
    settings: QuadratureSettings = DEFAULT_QUADRATURE,
    lower=None,
    upper=None,
    groups=None,
    polynomial: bool = True,
) -> ScaledArray:
    """Integrate over the ordered ``dim``-simplex of block boundaries.

    ``integrand(nodes, weights)`` returns the weighted chunk sum as
    ``(values, logscale)``. On polygonal paths with ``polynomial=True`` the
    integrand is a polynomial of total degree ``degree`` between
    breakpoints and one exact pass suffices.
    """
    if dim == 0:
        return _integrate_once(integrand, 0, (), 1, None, None, settings.chunk)
    bps = np.asarray(path.breakpoints, dtype=float)
    if polynomial and isinstance(path, PiecewiseLinearPath):
        order = exact_order(degree, dim)
        return _integrate_once(integrand, dim, bps, order, lower, upper, settings.chunk)
    return refine(
        lambda cuts, order: _integrate_once(integrand, dim, cuts, order, lower, upper, settings.chunk),
        bps,
        settings,
        groups,
        lambda ncuts: ((ncuts + 1) * settings.order) ** dim / math.factorial(dim),
    )


def refine(
    evaluate: Callable[[np.ndarray, int], ScaledArray],
    breakpoints,
    settings: QuadratureSettings,
    groups=None,
    cost: Callable[[int], float] | None = None,
) -> ScaledArray:
    """Double the panel count until two successive results agree to ``settings.tol``.

    ``evaluate(cuts, order)`` runs one composite rule; ``cost(len(cuts))``
    estimates its node count, checked against ``settings.node_budget``.
    """
    previous = None
    change = math.inf
    for level in range(settings.start_level, settings.max_level + 1):
        cuts = uniform_cuts(2**level, breakpoints)
        if cost is not None and cost(len(cuts)) > settings.node_budget:
            break
        result = evaluate(cuts, settings.order)
        if previous is not None:
            change = _relative_change(result, previous, groups)
            if change < settings.tol:
                return result
        previous = result
    raise AccuracyError(
        f"quadrature did not reach relative tolerance {settings.tol:g} "
        f"(last relative change {change:.3g})",
        achieved=change,
    )


def knot_increments(path: UniformSpeedPath, nodes: np.ndarray) -> np.ndarray:
    """Increments over ``[u_{j-1}, u_j]`` with ``u_0 = 0``, ``u_k = 1``; shape ``(P, k, d)``."""
    p, m = nodes.shape
    start = path.position(np.zeros(1))[0]
    end = path.position(np.ones(1))[0]
    inner = path.position(nodes.ravel()).reshape(p, m, -1) if m else np.zeros((p, 0, len(start)))
    knots = np.concatenate(
        [np.broadcast_to(start, (p, 1, len(start))), inner, np.broadcast_to(end, (p, 1, len(start)))],
        axis=1,
    )
    return np.diff(knots, axis=1)


def log_power(logabs: np.ndarray, exponent) -> np.ndarray:
    """``exponent * log|base|`` with ``0 * log 0 = 0``."""
    exponent = np.asarray(exponent, dtype=float)
    with np.errstate(invalid="ignore"):
        out = exponent * logabs
    return np.where(exponent == 0, 0.0, out)


def safe_log_abs(v: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(np.abs(v))


def separator_factors(path: UniformSpeedPath, nodes: np.ndarray, words: Sequence[Word]):
    """``prod_j gamma'^{i_j}(u_j)`` per node and word as ``(sign, logmag)``, shape ``(P, W)``."""
    p, m = nodes.shape
    if m == 0:
        return np.ones((p, len(words))), np.zeros((p, len(words)))
    der = path.derivative(nodes.ravel()).reshape(p, m, -1)
    letters = np.array([w.letters for w in words], dtype=int)  # (W, m)
    picked = der[:, np.arange(m)[None, :], letters]  # (P, W, m)
    sign = np.prod(np.sign(picked), axis=2)
    logmag = safe_log_abs(picked).sum(axis=2)
    return sign, logmag


def _finish_chunk(logs: np.ndarray, signs: np.ndarray) -> tuple[np.ndarray, float]:
    """Reduce per-node log terms over axis 0 into ``(values, logscale)``."""
    finite = np.isfinite(logs) & (signs != 0)
    if not finite.any():
        return np.zeros(logs.shape[1:]), -math.inf
    top = float(np.max(logs[finite]))
    with np.errstate(under="ignore"):
        vals = np.where(finite, signs * np.exp(np.where(finite, logs, top) - top), 0.0)
    return vals.sum(axis=0), top


def symmetrized_sum_integral(
    path: UniformSpeedPath,
    spec: BlockSpec,
    ell: Sequence[int],
    settings: QuadratureSettings = DEFAULT_QUADRATURE,
    precision: int | None = None,
) -> LogSigned:
    """One block sum from its integral representation over block boundaries.

    ``precision`` (decimal digits) switches to multiprecision arithmetic,
    available for polygonal paths only. Double precision loses about
    ``log10(sum |terms| / |result|)`` digits when the separator velocities
    change sign and the integral cancels; the multiprecision route does not.
    """
    if path.dim != 2:
        raise ShapeError("block sums are defined for planar paths")
    if precision is not None:
        if not isinstance(path, PiecewiseLinearPath):
            raise ValueError("multiprecision evaluation needs a polygonal path")
        return _logsigned_exact(_integral_mp(path, spec, ell, precision))
    exps = np.array(spec.exponents(ell), dtype=float)  # (k, 2)
    lognorm = float(np.sum(gammaln(exps + 1.0)))
    words = [spec.separator]

    def integrand(nodes, weights):
        if len(weights) == 0:
            return np.zeros(1), -math.inf
        d = knot_increments(path, nodes)
        logs = log_power(safe_log_abs(d), exps[None]).sum(axis=(1, 2))
        # even powers are positive; vanishing bases already give a -inf log
        signs = np.prod(np.where(exps[None] % 2 == 1, np.sign(d), 1.0), axis=(1, 2))
        ssign, slog = separator_factors(path, nodes, words)
        logs = logs + slog[:, 0] + np.log(weights) - lognorm
        return _finish_chunk(logs[:, None], (signs * ssign[:, 0])[:, None])

    degree = int(exps.sum())
    result = integrate_adaptive(integrand, path, spec.k - 1, degree, settings)
    return result.item(0)


def _gauss_legendre_mp(order: int):
    """Gauss-Legendre rule on [0, 1] at the working mpmath precision."""
    x0, _ = np.polynomial.legendre.leggauss(order)
    nodes, weights = [], []
    for guess in x0:
        x = mpmath.mpf(float(guess))
        for _ in range(100):
            p, q = mpmath.legendre(order, x), mpmath.legendre(order - 1, x)
            dp = order * (x * p - q) / (x * x - 1)
            step = p / dp
            x -= step
            if abs(step) < mpmath.mpf(10) ** (-mpmath.mp.dps - 2):
                break
        p, q = mpmath.legendre(order, x), mpmath.legendre(order - 1, x)
        dp = order * (x * p - q) / (x * x - 1)
        nodes.append((x + 1) / 2)
        weights.append(1 / ((1 - x * x) * dp * dp))
    return nodes, weights


def _integral_mp(path: PiecewiseLinearPath, spec: BlockSpec, ell, dps: int):
    """Exact-order quadrature of one block sum in multiprecision arithmetic."""
    exps = spec.exponents(ell)
    dim = spec.k - 1
    with mpmath.workdps(dps):
        verts = [[mpmath.mpf(float(c)) for c in v] for v in path.vertices]
        seg = [sum(abs(b[i] - a[i]) for i in range(2)) for a, b in zip(verts[:-1], verts[1:])]
        total = sum(seg)
        times = [mpmath.mpf(0)]
        for s_ in seg:
            times.append(times[-1] + s_ / total)
        times[-1] = mpmath.mpf(1)

        def locate(u):
            m = 0
            while m < len(seg) - 1 and u >= times[m + 1]:
                m += 1
            return m

        def position(u):
            m = locate(u)
            f = (u - times[m]) / (times[m + 1] - times[m])
            return [verts[m][i] + f * (verts[m + 1][i] - verts[m][i]) for i in range(2)]

        def velocity(u, letter):
            m = locate(u)
            return (verts[m + 1][letter] - verts[m][letter]) / (times[m + 1] - times[m])

        norm = 1
        for ex, ey in exps:
            norm *= mpmath.factorial(ex) * mpmath.factorial(ey)
        start, end = position(mpmath.mpf(0)), position(mpmath.mpf(1))

        def integrand(us):
            knots = [start] + [position(u) for u in us] + [end]
            val = mpmath.mpf(1)
            for j, (ex, ey) in enumerate(exps):
                dx = knots[j + 1][0] - knots[j][0]
                dy = knots[j + 1][1] - knots[j][1]
                val *= dx**ex * dy**ey
            for u, letter in zip(us, spec.separator.letters):
                val *= velocity(u, letter)
            return val / norm

        order = exact_order(sum(ex + ey for ex, ey in exps), max(dim, 1))
        gx, gw = _gauss_legendre_mp(order)
        cuts = times[1:-1]

        def nested(j, top, us):
            if j < 0:
                return integrand(us)
            edges = [mpmath.mpf(0)] + [c for c in cuts if c < top] + [top]
            acc = mpmath.mpf(0)
            for a, b in zip(edges[:-1], edges[1:]):
                for x, w in zip(gx, gw):
                    u = a + (b - a) * x
                    us[j] = u
                    acc += (b - a) * w * nested(j - 1, u, us)
            return acc

        return +nested(dim - 1, mpmath.mpf(1), [None] * dim)


def block_logterms(logabs_x, logabs_y, n: int, extra: str | None = None):
    """Log of ``dx^a dy^b / (a! b!)`` for every ``l`` in ``0..n``.

    Base terms use ``(a, b) = (2l, 2n-2l)``; ``extra`` adds one to ``a``
    (``"x"``) or to ``b`` (``"y"``). Inputs broadcast; output gains a
    trailing axis of length ``n+1``.
    """
    ell = np.arange(n + 1, dtype=float)
    a = 2 * ell + (extra == "x")
    b = 2 * n - 2 * ell + (extra == "y")
    return (
        log_power(np.asarray(logabs_x)[..., None], a)
        + log_power(np.asarray(logabs_y)[..., None], b)
        - gammaln(a + 1.0)
        - gammaln(b + 1.0)
    )


def integral_table(
    path: UniformSpeedPath,
    spec: BlockSpec,
    settings: QuadratureSettings = DEFAULT_QUADRATURE,
    max_entries: int = 1_000_000,
) -> ScaledArray:
    """Every block sum of one scheme from the integral form, shape ``(n+1,)*k``.

    At each node the table is an outer product of per-block vectors, so
    all entries share one pass of the quadrature.
    """
    if path.dim != 2:
        raise ShapeError("block sums are defined for planar paths")
    k, n = spec.k, spec.n
    size = (n + 1) ** k
    if size > max_entries:
        raise CapacityError(f"table of {size} entries exceeds the cap {max_entries}")
    extras = [None] * k
    if spec.variant is not None:
        extras[spec.variant[0] - 1] = spec.variant[1]
    words = [spec.separator]
    chunk = max(256, min(settings.chunk, 4_000_000 // size))
    local = QuadratureSettings(settings.tol, settings.order, settings.start_level,
                               settings.max_level, settings.node_budget, chunk)

    def integrand(nodes, weights):
        if len(weights) == 0:
            return np.zeros((n + 1,) * k), -math.inf
        d = knot_increments(path, nodes)
        lx, ly = safe_log_abs(d[..., 0]), safe_log_abs(d[..., 1])
        ssign, slog = separator_factors(path, nodes, words)
        node_log = np.log(weights) + slog[:, 0]
        node_sign = ssign[:, 0]
        vecs = []
        for j in range(k):
            lt = block_logterms(lx[:, j], ly[:, j], n, extras[j])
            top = np.max(lt, axis=1)
            top = np.where(np.isfinite(top), top, 0.0)
            node_log = node_log + top
            sgn = np.ones(lt.shape)
            if extras[j] == "x":
                sgn = np.broadcast_to(np.sign(d[:, j, 0])[:, None], lt.shape)
            elif extras[j] == "y":
                sgn = np.broadcast_to(np.sign(d[:, j, 1])[:, None], lt.shape)
            with np.errstate(under="ignore"):
                vecs.append(sgn * np.exp(lt - top[:, None]))
        live = np.isfinite(node_log) & (node_sign != 0)
        if not live.any():
            return np.zeros((n + 1,) * k), -math.inf
        scale = float(np.max(node_log[live]))
        coef = np.where(live, node_sign * np.exp(np.where(live, node_log, scale) - scale), 0.0)
        acc = coef[:, None] * vecs[0]
        for v in vecs[1:]:
            acc = (acc[:, :, None] * v[:, None, :]).reshape(len(weights), -1)
        return acc.sum(axis=0).reshape((n + 1,) * k), scale

    degree = 2 * n * k + (spec.variant is not None)
    return integrate_adaptive(integrand, path, k - 1, degree, local)


@dataclass(frozen=True)
class SymmetrizedTable:
    """Block sums of one scheme over all multi-indices, in sign/log form."""

    spec: BlockSpec
    signs: np.ndarray
    logmags: np.ndarray

    @classmethod
    def from_scaled(cls, spec: BlockSpec, table: ScaledArray) -> SymmetrizedTable:
        signs = table.signs()
        logmags = np.where(signs != 0, table.logmags(), -np.inf)
        return cls(spec, signs, logmags)

    @classmethod
    def from_values(cls, spec: BlockSpec, values: np.ndarray) -> SymmetrizedTable:
        return cls.from_scaled(spec, ScaledArray(values, 0.0))

    def entry(self, ell: Sequence[int]) -> LogSigned:
        idx = tuple(int(v) for v in ell)
        s = int(self.signs[idx])
        return LogSigned(s, float(self.logmags[idx])) if s else LogSigned(0)

    def entries(self) -> Iterator[tuple[tuple[int, ...], LogSigned]]:
        for ell in self.spec.multi_indices():
            yield ell, self.entry(ell)
