"""Where block sums come from: a known path or a truncated signature.

The reconstruction only ever needs a handful of aggregates of the block
sums ``S(w, l)``, all of which are linear in ``S``:

* per-block marginals ``M_j(w, l_j) = sum over the other indices of S(w, l)``,
* totals ``sum_l S(w, l)`` and the sign-variant totals per block,
* box sums ``sum over l in a product window of S(w, l)``.

From a path these come out of one quadrature pass, because at every node the
integrand factorises over blocks. From a signature they are contractions of
exact block tables.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .chain import BlockChain, common_scale
from .errors import CapacityError, DepthError, ShapeError
from .logsigned import LogSigned, ScaledArray
from .path_model import PiecewiseLinearPath, UniformSpeedPath, append_segment
from .symmetrization import (
    DEFAULT_QUADRATURE,
    BlockSpec,
    QuadratureSettings,
    block_logterms,
    block_table,
    integrate_adaptive,
    knot_increments,
    refine,
    safe_log_abs,
    separator_factors,
)
from .tensor_algebra import (
    MAX_LEVEL_ENTRIES,
    TruncatedSignature,
    Word,
    chen_concat,
    signature_of_segment,
)

__all__ = [
    "SourceSummary",
    "SymmetrizedSource",
    "PathSource",
    "SignatureSource",
    "all_words",
    "word_from_directions",
    "direction_windows",
    "windowed_direction_mass",
    "MAX_ENUMERATED_K",
]

#: beyond this many blocks only a single separator word is used
MAX_ENUMERATED_K = 12
_NODE_WORD_BUDGET = 1 << 22
#: below this block size the zero extension across the diagonal is too rough
CHAIN_MIN_N = 3


def all_words(k: int) -> list[Word]:
    return [Word(w) for w in itertools.product((0, 1), repeat=k - 1)]


def word_from_directions(rho: Sequence[float]) -> Word:
    """Letter ``j`` is x when ``rho_j >= 1/2``, else y; the last entry is unused."""
    return Word(tuple(0 if r >= 0.5 else 1 for r in list(rho)[:-1]))


def direction_windows(rho: Sequence[float], eta: float, n: int) -> np.ndarray:
    """Boolean masks ``|l/n - rho_j| < 2 eta`` over ``l = 0..n``, shape ``(k, n+1)``."""
    ell = np.arange(n + 1) / n if n > 0 else np.zeros(1)
    rho = np.asarray(rho, dtype=float)
    return np.abs(ell[None, :] - rho[:, None]) < 2.0 * eta


@dataclass
class SourceSummary:
    """Aggregated block sums for one ``(k, n)`` and a list of separator words."""

    k: int
    n: int
    words: list[Word]
    totals: ScaledArray  # (W,)
    marginals: ScaledArray  # (W, k, n+1)
    var_x: ScaledArray  # (W, k)
    var_y: ScaledArray  # (W, k)

    def total(self, w: int) -> LogSigned:
        return self.totals.item(w)


class SymmetrizedSource:
    """Interface shared by path-backed and signature-backed evaluators."""

    def increment(self) -> np.ndarray:
        raise NotImplementedError

    def scale_proxy(self) -> float:
        """A length scale that is positive even for closed paths."""
        raise NotImplementedError

    def max_n(self, k: int) -> int | None:
        """Largest affordable half block size for ``k`` blocks (``None``: unbounded)."""
        return None

    def summary(self, k: int, n: int, words: Sequence[Word]) -> SourceSummary:
        raise NotImplementedError

    def box_sums(self, k: int, n: int, words: Sequence[Word], masks: np.ndarray) -> ScaledArray:
        raise NotImplementedError

    def extended(self, v) -> SymmetrizedSource:
        """Source for the input followed by the straight segment ``v``."""
        raise NotImplementedError

    def bootstrap_word(self, k: int) -> Word | None:
        """A separator word guessed without block sums (used when ``k`` is large)."""
        return None


def _pack(summary_parts):
    return np.concatenate([np.ravel(p) for p in summary_parts])


class PathSource(SymmetrizedSource):
    """Block sums of a known path through simplex quadrature."""

    def __init__(self, path: UniformSpeedPath, settings: QuadratureSettings = DEFAULT_QUADRATURE):
        if path.dim != 2:
            raise ShapeError("block sums are defined for planar paths")
        self.path = path
        self.settings = settings

    def increment(self) -> np.ndarray:
        return self.path.increment()

    def scale_proxy(self) -> float:
        return self.path.length

    def extended(self, v) -> PathSource:
        return PathSource(append_segment(self.path, v), self.settings)

    def bootstrap_word(self, k: int) -> Word:
        der = self.path.derivative(np.arange(1, k) / k)
        return Word(tuple(0 if abs(a) >= abs(b) else 1 for a, b in der))

    def _settings_for(self, words: int, width: int) -> QuadratureSettings:
        chunk = max(256, min(self.settings.chunk, _NODE_WORD_BUDGET // max(1, words * width)))
        s = self.settings
        return QuadratureSettings(s.tol, s.order, s.start_level, s.max_level, s.node_budget, chunk)

    def _node_terms(self, nodes, weights, words, n):
        """Per-node block data shared by all aggregates."""
        d = knot_increments(self.path, nodes)
        lx, ly = safe_log_abs(d[..., 0]), safe_log_abs(d[..., 1])
        lt = block_logterms(lx, ly, n)
        top = np.max(lt, axis=2)
        dead = ~np.isfinite(top)
        top = np.where(dead, 0.0, top)
        with np.errstate(under="ignore"):
            t_hat = np.exp(lt - top[..., None])
        tot_hat = t_hat.sum(axis=2)
        tot_hat = np.where(dead, 1.0, tot_hat)
        r = t_hat / tot_hat[..., None]
        ssign, slog = separator_factors(self.path, nodes, words)
        with np.errstate(divide="ignore"):
            node_log = np.log(weights) + np.sum(top + np.log(tot_hat), axis=1)
        node_log = np.where(dead.any(axis=1), -np.inf, node_log)
        logc = node_log[:, None] + slog
        live = np.isfinite(logc) & (ssign != 0)
        return d, lx, ly, top, tot_hat, r, ssign, logc, live

    @staticmethod
    def _coefficients(ssign, logc, live):
        if not live.any():
            return None, -math.inf
        scale = float(np.max(logc[live]))
        with np.errstate(under="ignore"):
            c = np.where(live, ssign * np.exp(np.where(live, logc, scale) - scale), 0.0)
        return c, scale

    def _variant_ratio(self, d, lx, ly, top, tot_hat, n, letter):
        lt = block_logterms(lx, ly, n, letter)
        axis = 0 if letter == "x" else 1
        with np.errstate(under="ignore"):
            s = np.exp(lt - top[..., None]).sum(axis=2)
        return np.sign(d[..., axis]) * s / tot_hat

    def _use_chain(self, k: int, n: int) -> bool:
        """Transfer kernels for smooth paths; the nested rule is exact on polygons."""
        return not isinstance(self.path, PiecewiseLinearPath) and (k <= 2 or n >= CHAIN_MIN_N)

    def _chain_cost(self, k: int, n: int):
        order = self.settings.order
        return lambda ncuts: k * ((ncuts + 1) * order) ** 2 * (n + 1) / 64

    def summary(self, k: int, n: int, words: Sequence[Word]) -> SourceSummary:
        words = list(words)
        nw = len(words)
        shapes = [(nw,), (nw, k, n + 1), (nw, k), (nw, k)]
        sizes = [math.prod(s) for s in shapes]
        bounds = np.cumsum([0] + sizes)
        groups = [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
        if self._use_chain(k, n):

            def evaluate(cuts, order):
                parts = BlockChain(self.path, k, n, cuts, order).summary(words)
                values = np.concatenate([np.ravel(v) for v, _ in parts])
                logs = np.concatenate([np.ravel(np.broadcast_to(lg, v.shape)) for v, lg in parts])
                return ScaledArray(*common_scale(values, logs))

            out = refine(evaluate, self.path.breakpoints, self.settings, groups, self._chain_cost(k, n))
            parts = [ScaledArray(out.values[g].reshape(s), out.logscale) for g, s in zip(groups, shapes)]
            return SourceSummary(k, n, words, *parts)

        def integrand(nodes, weights):
            if len(weights) == 0:
                return np.zeros(sum(sizes)), -math.inf
            d, lx, ly, top, tot_hat, r, ssign, logc, live = self._node_terms(nodes, weights, words, n)
            c, scale = self._coefficients(ssign, logc, live)
            if c is None:
                return np.zeros(sum(sizes)), -math.inf
            vx = self._variant_ratio(d, lx, ly, top, tot_hat, n, "x")
            vy = self._variant_ratio(d, lx, ly, top, tot_hat, n, "y")
            parts = [
                c.sum(axis=0),
                np.einsum("pw,pjl->wjl", c, r, optimize=True),
                c.T @ vx,
                c.T @ vy,
            ]
            return _pack(parts), scale

        degree = 2 * n * k + 1
        settings = self._settings_for(nw, k * (n + 1))
        out = integrate_adaptive(integrand, self.path, k - 1, degree, settings, groups=groups)
        parts = [ScaledArray(out.values[g].reshape(s), out.logscale) for g, s in zip(groups, shapes)]
        return SourceSummary(k, n, words, *parts)

    def box_sums(self, k: int, n: int, words: Sequence[Word], masks: np.ndarray) -> ScaledArray:
        words = list(words)
        masks = np.asarray(masks, dtype=float)
        if self._use_chain(k, n):

            def evaluate(cuts, order):
                return ScaledArray(*common_scale(*BlockChain(self.path, k, n, cuts, order).box(words, masks)))

            return refine(evaluate, self.path.breakpoints, self.settings, None, self._chain_cost(k, n))

        def integrand(nodes, weights):
            if len(weights) == 0:
                return np.zeros(len(words)), -math.inf
            _, _, _, _, _, r, ssign, logc, live = self._node_terms(nodes, weights, words, n)
            c, scale = self._coefficients(ssign, logc, live)
            if c is None:
                return np.zeros(len(words)), -math.inf
            inside = np.prod(np.einsum("pjl,jl->pj", r, masks), axis=1)
            return c.T @ inside, scale

        settings = self._settings_for(len(words), k * (n + 1))
        return integrate_adaptive(integrand, self.path, k - 1, 2 * n * k, settings)


class SignatureSource(SymmetrizedSource):
    """Block sums read off a truncated signature (exact word sums)."""

    def __init__(self, sig: TruncatedSignature, max_entries: int = MAX_LEVEL_ENTRIES):
        if sig.dim != 2:
            raise ShapeError("block sums are defined for two-letter signatures")
        self.sig = sig
        self.max_entries = max_entries
        self._tables: dict = {}

    def increment(self) -> np.ndarray:
        return np.asarray(self.sig.level(1), dtype=float)

    def scale_proxy(self) -> float:
        """``sqrt(2 sum |C(e_i e_j)|)``: equals ``|X^1|`` for a segment, positive for loops."""
        if self.sig.depth >= 2:
            return math.sqrt(2.0 * math.fsum(np.abs(np.asarray(self.sig.level(2), dtype=float))))
        return float(np.abs(self.increment()).sum())

    def max_n(self, k: int) -> int:
        return max(0, (self.sig.depth - k) // (2 * k))

    def extended(self, v) -> SignatureSource:
        seg = signature_of_segment(v, self.sig.depth, self.max_entries, exact=self.sig.exact)
        return SignatureSource(chen_concat(self.sig, seg), self.max_entries)

    def _table(self, spec: BlockSpec) -> np.ndarray:
        key = (spec.k, spec.n, spec.separator.letters, spec.variant)
        if key not in self._tables:
            if spec.word_length > self.sig.depth:
                raise DepthError(
                    f"blocks need level {spec.word_length}, signature depth is {self.sig.depth}"
                )
            self._tables[key] = np.asarray(block_table(self.sig, spec), dtype=float)
        return self._tables[key]

    def summary(self, k: int, n: int, words: Sequence[Word]) -> SourceSummary:
        words = list(words)
        nw = len(words)
        totals = np.zeros(nw)
        marginals = np.zeros((nw, k, n + 1))
        var_x = np.zeros((nw, k))
        var_y = np.zeros((nw, k))
        for a, w in enumerate(words):
            t = self._table(BlockSpec(k, n, w))
            totals[a] = math.fsum(t.ravel())
            for j in range(k):
                other = tuple(i for i in range(k) if i != j)
                marginals[a, j] = t.sum(axis=other) if other else t
                var_x[a, j] = math.fsum(self._table(BlockSpec(k, n, w, (j + 1, "x"))).ravel())
                var_y[a, j] = math.fsum(self._table(BlockSpec(k, n, w, (j + 1, "y"))).ravel())
        return SourceSummary(
            k, n, words, ScaledArray(totals), ScaledArray(marginals), ScaledArray(var_x), ScaledArray(var_y)
        )

    def box_sums(self, k: int, n: int, words: Sequence[Word], masks: np.ndarray) -> ScaledArray:
        out = np.zeros(len(words))
        for a, w in enumerate(words):
            t = self._table(BlockSpec(k, n, w))
            idx = np.ix_(*[np.flatnonzero(m) for m in np.asarray(masks, dtype=bool)])
            out[a] = math.fsum(t[idx].ravel())
        return ScaledArray(out)


def words_for(source: SymmetrizedSource, k: int, rho: Sequence[float] | None = None) -> list[Word]:
    """All separator words for small ``k``; a single word beyond that."""
    if k <= MAX_ENUMERATED_K:
        return all_words(k)
    if rho is not None:
        return [word_from_directions(rho)]
    guess = source.bootstrap_word(k)
    if guess is None:
        raise CapacityError(f"k={k} needs a separator word guess this source cannot provide")
    return [guess]


def _abs_sum(arr: ScaledArray) -> LogSigned:
    mags = np.abs(arr.values)
    total = math.fsum(mags.ravel())
    if total == 0 or not math.isfinite(arr.logscale):
        return LogSigned(0)
    return LogSigned(1, math.log(total) + arr.logscale)


def windowed_direction_mass(
    source: SymmetrizedSource,
    k: int,
    n: int,
    rho: Sequence[float],
    eta: float,
    words: Sequence[Word] | None = None,
) -> tuple[LogSigned, LogSigned]:
    """Mass inside the direction window against the total mass.

    Numerator: ``sum_w |sum over l with every |l_j/n - rho_j| < 2 eta of S(w, l)|``.
    Denominator: ``sum_w |sum_l S(w, l)|``. A window covering every index
    returns the denominator itself.
    """
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (k,) or np.any((rho < 0) | (rho > 1)):
        raise ValueError("rho must hold k values in [0, 1]")
    if eta <= 0:
        raise ValueError("eta must be positive")
    words = list(words) if words is not None else words_for(source, k, rho)
    masks = direction_windows(rho, eta, n)
    den = _abs_sum(source.box_sums(k, n, words, np.ones((k, n + 1), dtype=bool)))
    if masks.all():
        return den, den
    if not masks.any(axis=1).all():
        return LogSigned(0), den
    return _abs_sum(source.box_sums(k, n, words, masks)), den
