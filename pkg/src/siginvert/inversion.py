"""Reconstruction of a piecewise-linear approximation from block sums.

Stages, each consuming only aggregates of block sums:

1. unsigned directions ``rho_j`` from windowed marginal masses,
2. the separator word ``w*`` read off ``rho``,
3. coordinate signs from the sign-variant totals of ``w*``,
4. the l1 length from the level-1 increment, with a straight-segment
   extension when the increment is too small to divide by.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InconsistentReconstructionError, NoDirectionError, SignIndeterminateError
from .logsigned import LogSigned
from .path_model import PiecewiseLinearPath, UniformSpeedPath, epsilon_k, eta_k, modulus_of_continuity
from .sources import (
    PathSource,
    SourceSummary,
    SymmetrizedSource,
    direction_windows,
    word_from_directions,
    words_for,
)
from .tensor_algebra import TruncatedSignature, Word, chen_concat, signature_of_segment

__all__ = [
    "DirectionEstimate",
    "SignAssignment",
    "ReconstructionResult",
    "recover_directions",
    "choose_word_star",
    "usable_word",
    "recover_signs",
    "recover_length",
    "zero_increment_fallback",
    "assemble_path",
    "c1_error",
    "invert",
    "default_n",
    "default_eta",
    "sign_band",
    "zero_threshold",
]

log = logging.getLogger(__name__)

TIE_RTOL = 1e-12
LENGTH_DENOM_FLOOR = 1e-9
#: relative size below which the separator word's total counts as vanishing
WORD_FLOOR = 1e-8


@dataclass(frozen=True)
class DirectionEstimate:
    rho: np.ndarray
    ratio: float
    eta: float
    n: int
    #: per-block share of the mass whose own index falls in the window
    marginal_ratios: np.ndarray = field(default_factory=lambda: np.zeros(0))


@dataclass(frozen=True)
class SignAssignment:
    ax: np.ndarray
    ay: np.ndarray
    x_degenerate: np.ndarray
    y_degenerate: np.ndarray
    band: float


@dataclass
class ReconstructionResult:
    k: int
    n: int
    rho: np.ndarray
    ax: np.ndarray
    ay: np.ndarray
    length: float
    vertices: np.ndarray
    eta: float
    mass_ratio: float
    word_star: Word
    fallback_used: bool = False
    c1_error: float | None = None
    stages: dict = field(default_factory=dict)

    def path(self) -> PiecewiseLinearPath:
        return PiecewiseLinearPath(self.vertices)

    def to_json_dict(self) -> dict:
        out = {
            "k": self.k,
            "n": self.n,
            "rho": [float(r) for r in self.rho],
            "ax": [int(a) for a in self.ax],
            "ay": [int(a) for a in self.ay],
            "L": float(self.length),
            "vertices": [[float(c) for c in v] for v in self.vertices],
            "eta_k": float(self.eta),
            "mass_ratio": float(self.mass_ratio),
            "word_star": str(self.word_star),
            "fallback_used": bool(self.fallback_used),
        }
        if self.c1_error is not None:
            out["c1_error"] = float(self.c1_error)
        return out


def default_n(k: int) -> int:
    """``ceil(k^2 ln k)``, at least 2."""
    return max(2, math.ceil(k * k * math.log(k))) if k > 1 else 2


def default_eta(source: SymmetrizedSource, k: int) -> float:
    """Error scale from the path when it is known, else a slowly decaying schedule."""
    if isinstance(source, PathSource):
        return eta_k(source.path, k)
    return max(1.0 / math.sqrt(k), 1.0 / math.log(k + math.e))


def sign_band(k: int, n: int, source: SymmetrizedSource | None = None) -> float:
    """Half-width ``eps`` of the degenerate band ``rho < 3 eps`` (or ``> 1 - 3 eps``).

    Uses ``eps_k`` when the path is known and the band is narrow enough to
    leave room for a sign decision; otherwise ``1/(3n)``, which only flags
    pieces whose recovered direction is exactly axis-aligned.
    """
    if isinstance(source, PathSource):
        path = source.path
        eps = epsilon_k(modulus_of_continuity(path, k).value, path.length, k)
        if 3 * eps <= 0.25:
            return eps
    return 1.0 / (3 * max(n, 1))


def zero_threshold(eta: float, k: int, scale: float, n: int | None = None) -> float:
    """Increments below this l1 size send the length stage to the fallback.

    The band is ``eta/k`` of the scale, but never wider than the direction
    grid spacing ``1/n``: directions are not resolved more finely than that.
    """
    rel = eta / k if n is None else min(eta / k, 1.0 / n)
    return max(rel, 1e-6) * scale


def _window_scores(marg: np.ndarray, halfwidth: float, n: int) -> np.ndarray:
    """``sum_w |sum_{|l - c| < halfwidth n} marg[w, l]|`` for every centre ``c``."""
    reach = math.ceil(halfwidth * n - 1e-12) - 1 if halfwidth * n > 0 else -1
    if reach < 0:
        return np.zeros(n + 1)
    cs = np.concatenate([np.zeros((marg.shape[0], 1)), np.cumsum(marg, axis=1)], axis=1)
    c = np.arange(n + 1)
    lo = np.clip(c - reach, 0, n)
    hi = np.clip(c + reach, 0, n)
    return np.abs(cs[:, hi + 1] - cs[:, lo]).sum(axis=0)


def _pick_centre(marg: np.ndarray, halfwidth: float, n: int) -> int:
    """Maximiser of the windowed mass; ties go to narrower windows, then to the smaller centre."""
    alive = np.ones(n + 1, dtype=bool)
    width = halfwidth
    while True:
        scores = _window_scores(marg, width, n)
        top = scores[alive].max()
        alive &= scores >= top * (1.0 - TIE_RTOL)
        if alive.sum() == 1 or width * n <= 0.5:
            return int(np.flatnonzero(alive)[0])
        width = width / 2.0


def _abs_total(values: np.ndarray) -> float:
    return math.fsum(np.abs(np.ravel(values)))


def recover_directions(
    source: SymmetrizedSource,
    k: int,
    n: int,
    eta: float,
    words: Sequence[Word] | None = None,
    summary: SourceSummary | None = None,
) -> tuple[DirectionEstimate, SourceSummary]:
    """Grid search for ``rho`` maximising the windowed block-sum mass.

    Each coordinate is chosen from ``{0, 1/n, ..., 1}`` on its own marginal.
    The returned ratio is the joint one (every index inside its window);
    at most 1/2 raises :class:`NoDirectionError`.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if eta <= 0:
        raise ValueError("eta must be positive")
    if summary is None:
        words = list(words) if words is not None else words_for(source, k)
        summary = source.summary(k, n, words)
    marg = summary.marginals.values  # (W, k, n+1), shared log-scale
    den = _abs_total(summary.totals.values)
    if den == 0:
        raise NoDirectionError("all block sums vanish; nothing to locate")
    rho = np.zeros(k)
    marginal_ratios = np.zeros(k)
    for j in range(k):
        c = _pick_centre(marg[:, j, :], 2.0 * eta, n)
        rho[j] = c / n
        inside = direction_windows(rho[j : j + 1], eta, n)[0]
        marginal_ratios[j] = np.abs((marg[:, j, :] * inside).sum(axis=1)).sum() / den
    masks = direction_windows(rho, eta, n)
    if masks.all():
        ratio = 1.0
    else:
        box = source.box_sums(k, n, summary.words, masks)
        scale = math.exp(box.logscale - summary.totals.logscale) if math.isfinite(box.logscale) else 0.0
        ratio = _abs_total(box.values) * scale / den
    ratio = min(max(ratio, 0.0), 1.0)
    est = DirectionEstimate(rho, ratio, eta, n, np.clip(marginal_ratios, 0.0, 1.0))
    if ratio <= 0.5:
        raise NoDirectionError(
            f"windowed mass ratio {ratio:.4g} <= 1/2 at k={k}, n={n}, eta={eta:.4g}; raise n"
        )
    return est, summary


def choose_word_star(rho: Sequence[float] | DirectionEstimate) -> Word:
    """Separator word with letter x where ``rho_j >= 1/2`` and y elsewhere."""
    if isinstance(rho, DirectionEstimate):
        rho = rho.rho
    return word_from_directions(rho)


def _sign_of_ratio(num: LogSigned, den: LogSigned) -> int | None:
    """Sign of ``num / den`` with a zero numerator counted as non-negative."""
    if den.sign == 0:
        return None
    return 1 if num.sign * den.sign >= 0 else -1


def recover_signs(
    source: SymmetrizedSource,
    word: Word,
    k: int,
    n: int,
    eps: float,
    rho: Sequence[float] | DirectionEstimate,
    summary: SourceSummary | None = None,
) -> SignAssignment:
    """Signs from ``sum_l S(w*, l)`` against the sign-variant totals of each block."""
    if isinstance(rho, DirectionEstimate):
        rho = rho.rho
    rho = np.asarray(rho, dtype=float)
    if summary is None or word not in summary.words:
        summary = source.summary(k, n, [word])
    w = summary.words.index(word)
    base = summary.totals.item(w)
    x_deg = rho < 3.0 * eps
    y_deg = rho > 1.0 - 3.0 * eps
    ax = np.ones(k, dtype=int)
    ay = np.ones(k, dtype=int)
    for i in range(k):
        for arr, var, deg, name in (
            (ax, summary.var_x, x_deg, "x"),
            (ay, summary.var_y, y_deg, "y"),
        ):
            if deg[i]:
                continue
            s = _sign_of_ratio(base, var.item((w, i)))
            if s is None:
                raise SignIndeterminateError(
                    f"{name}-variant total vanishes on piece {i + 1} (rho={rho[i]:.4g})"
                )
            arr[i] = s
    return SignAssignment(ax, ay, x_deg, y_deg, eps)


def recover_length(
    increment: Sequence[float],
    rho: Sequence[float],
    ax: Sequence[int],
    ay: Sequence[int],
    threshold: float = 0.0,
) -> float | None:
    """``k |X^1| / (|sum_j ax_j rho_j| + |sum_j ay_j (1 - rho_j)|)``.

    Returns ``None`` (the fallback directive) when ``|X^1| <= threshold``.
    The factor ``k`` makes the assembled path reproduce ``|X^1|`` exactly.
    """
    rho = np.asarray(rho, dtype=float)
    k = len(rho)
    norm = float(np.abs(np.asarray(increment, dtype=float)).sum())
    if norm <= threshold:
        return None
    denom = abs(math.fsum(np.asarray(ax) * rho)) + abs(math.fsum(np.asarray(ay) * (1.0 - rho)))
    if denom / k < LENGTH_DENOM_FLOOR:
        raise InconsistentReconstructionError(
            "recovered directions and signs cancel although the increment does not vanish"
        )
    return k * norm / denom


def zero_increment_fallback(
    sig: TruncatedSignature, rho_k: float, ax_k: int, ay_k: int, length: float = 1.0
) -> TruncatedSignature:
    """Signature of the path followed by ``length * (ax rho, ay (1 - rho))``."""
    beta = length * np.array([ax_k * rho_k, ay_k * (1.0 - rho_k)])
    return chen_concat(sig, signature_of_segment(beta, sig.depth, exact=sig.exact))


def assemble_path(
    rho: Sequence[float], ax: Sequence[int], ay: Sequence[int], length: float, k: int | None = None
) -> np.ndarray:
    """Vertices of the ``k``-piece path with piece ``j`` equal to ``(L/k)(ax rho, ay (1-rho))``."""
    rho = np.asarray(rho, dtype=float)
    k = len(rho) if k is None else k
    steps = (length / k) * np.stack([np.asarray(ax) * rho, np.asarray(ay) * (1.0 - rho)], axis=1)
    return np.vstack([np.zeros(2), np.cumsum(steps, axis=0)])


def c1_error(path: UniformSpeedPath, recon: UniformSpeedPath | np.ndarray, k: int, samples: int = 64) -> float:
    """``max_j sup_{u in piece j} |gamma'(u) - recon'(u)|_1`` on an interior grid per piece."""
    s = (np.arange(samples) + 0.5) / samples
    u = ((np.arange(k)[:, None] + s[None, :]) / k).ravel()
    if isinstance(recon, np.ndarray):
        vel = np.repeat(k * np.diff(recon, axis=0), samples, axis=0)
    else:
        vel = recon.derivative(u)
    return float(np.abs(path.derivative(u) - vel).sum(axis=1).max())


def usable_word(summary: SourceSummary, word: Word) -> Word:
    """``word`` unless its total is negligible next to the largest one.

    At coarse ``k`` a piece boundary can sit where the velocity is parallel to
    an axis, so the letterwise choice reads a vanishing derivative component;
    the word with the largest total is used instead.
    """
    if word not in summary.words or len(summary.words) == 1:
        return word
    mags = np.abs(summary.totals.values)
    if mags[summary.words.index(word)] > WORD_FLOOR * mags.max():
        return word
    return summary.words[int(np.argmax(mags))]


def _run_stages(source, k, n, eta, eps, words=None):
    directions, summary = recover_directions(source, k, n, eta, words=words)
    word = usable_word(summary, choose_word_star(directions))
    signs = recover_signs(source, word, k, n, eps, directions, summary=summary)
    return directions, word, signs


def _resolve_n(source: SymmetrizedSource, k: int, n: int | None, budget_n: int) -> int:
    if n is not None:
        return n
    want = default_n(k)
    cap = source.max_n(k)
    limit = budget_n if cap is None else min(budget_n, cap)
    if want > limit:
        log.warning("n=%d for k=%d exceeds the compute budget; using n=%d", want, k, limit)
        want = limit
    if want < 1:
        raise ValueError(f"signature too shallow for k={k} blocks")
    return want


def invert(
    source: SymmetrizedSource,
    k: int,
    n: int | None = None,
    eta: float | None = None,
    eps: float | None = None,
    budget_n: int = 40,
    force_fallback: bool = False,
) -> ReconstructionResult:
    """Full reconstruction with ``k`` pieces.

    ``force_fallback`` takes the extension route even when the increment is
    large enough to divide by.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    n = _resolve_n(source, k, n, budget_n)
    eta = default_eta(source, k) if eta is None else eta
    eps = sign_band(k, n, source) if eps is None else eps
    directions, word, signs = _run_stages(source, k, n, eta, eps)
    scale = source.scale_proxy()
    increment = source.increment()
    threshold = zero_threshold(eta, k, scale, n)
    length = None if force_fallback else recover_length(increment, directions.rho, signs.ax, signs.ay, threshold)
    stages = {"directions": directions, "signs": signs}
    if length is not None:
        vertices = assemble_path(directions.rho, signs.ax, signs.ay, length)
        return ReconstructionResult(
            k, n, directions.rho, signs.ax, signs.ay, length, vertices, eta,
            directions.ratio, word, False, None, stages,
        )
    return _invert_with_extension(source, k, n, eta, eps, directions, signs, scale, budget_n, stages)


def _invert_with_extension(source, k, n, eta, eps, directions, signs, scale, budget_n, stages):
    """Append a straight piece continuing the last recovered direction, invert, remove it.

    A first pass with an extension of length ``scale`` estimates ``L``; the
    second pass uses length ``L/k`` so the extension is exactly one piece of
    the ``k + 1`` piece grid and the remaining pieces line up with the
    original ones.
    """
    unit = np.array([signs.ax[-1] * directions.rho[-1], signs.ay[-1] * (1.0 - directions.rho[-1])])
    k1 = k + 1
    n1 = min(n, source.max_n(k1)) if source.max_n(k1) is not None else n
    eps1 = eps
    first = source.extended(scale * unit)
    eta1 = default_eta(first, k1) if isinstance(first, PathSource) else eta
    d0, _, s0 = _run_stages(first, k1, n1, eta1, eps1)
    l0 = recover_length(first.increment(), d0.rho, s0.ax, s0.ay, 0.0)
    estimate = l0 - scale
    if estimate <= 0:
        estimate = l0 * k / k1
    ext = estimate / k
    second = source.extended(ext * unit)
    eta2 = default_eta(second, k1) if isinstance(second, PathSource) else eta
    d1, word1, s1 = _run_stages(second, k1, n1, eta2, eps1)
    l1 = recover_length(second.increment(), d1.rho, s1.ax, s1.ay, 0.0)
    length = l1 * k / k1
    rho, ax, ay = d1.rho[:k], s1.ax[:k], s1.ay[:k]
    vertices = assemble_path(rho, ax, ay, length)
    stages.update({"extension_length": ext, "extended_directions": d1, "extended_signs": s1})
    return ReconstructionResult(
        k, n1, rho, ax, ay, length, vertices, eta2, d1.ratio, word1, True, None, stages
    )
