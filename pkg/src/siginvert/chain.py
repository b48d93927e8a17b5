"""Block sums of a smooth path as products of transfer kernels.

The integrand over the ordered boundaries ``0 = u_0 < u_1 < ... < u_k = 1``
is a chain: block ``j`` depends only on ``(u_{j-1}, u_j)`` and the separator
letter ``j`` only on ``u_j``. Discretising every ``u_j`` on one composite
Gauss-Legendre grid turns the ``k - 1`` dimensional integral into ``k``
matrix products. The ordering constraint becomes a zero kernel below the
diagonal; every block kernel vanishes to order ``2n`` on the diagonal, so
extending it by zero costs little accuracy once ``n >= 3``.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from .path_model import UniformSpeedPath
from .quadrature import interval_rule
from .symmetrization import block_logterms, safe_log_abs
from .tensor_algebra import Word

__all__ = ["BlockChain"]

ROW_CHUNK_ENTRIES = 1 << 22


def _normalise(a: np.ndarray, logs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rescale each row of ``a`` to max-abs one, moving the factor into ``logs``."""
    top = np.max(np.abs(a), axis=1)
    alive = top > 0
    a = np.where(alive[:, None], a / np.where(alive, top, 1.0)[:, None], 0.0)
    with np.errstate(divide="ignore"):
        logs = np.where(alive, logs + np.log(np.where(alive, top, 1.0)), -np.inf)
    return a, logs


def common_scale(values: np.ndarray, logs: np.ndarray) -> tuple[np.ndarray, float]:
    """Express ``values * exp(logs)`` (elementwise logs) with one shared log-scale."""
    logs = np.broadcast_to(logs, values.shape)
    live = np.isfinite(logs) & (values != 0)
    if not live.any():
        return np.zeros(values.shape), -math.inf
    scale = float(np.max(logs[live] + np.log(np.abs(values[live]))))
    with np.errstate(under="ignore"):
        out = np.where(live, values * np.exp(np.where(live, logs, scale) - scale), 0.0)
    return out, scale


class BlockChain:
    """Transfer kernels of one path at fixed ``(k, n)`` on one grid."""

    def __init__(self, path: UniformSpeedPath, k: int, n: int, cuts: Sequence[float], order: int):
        self.path, self.k, self.n = path, k, n
        x, w = interval_rule(0.0, 1.0, cuts, order)
        self.x, self.w = x, w
        self.pos = path.position(x)
        self.der = path.derivative(x)
        start = path.position(np.zeros(1))
        end = path.position(np.ones(1))
        interior = (x, self.pos)
        self._ends = (np.zeros(1), start), (np.ones(1), end)
        self._grids = [self._ends[0]] + [interior] * (k - 1) + [self._ends[1]]
        self.blocks = [self._reduce(j) for j in range(1, k + 1)]

    def _rows(self, j: int):
        (xa, pa), (xb, pb) = self._grids[j - 1], self._grids[j]
        step = max(1, ROW_CHUNK_ENTRIES // (len(xb) * (self.n + 1)))
        for s in range(0, len(xa), step):
            d = pb[None, :, :] - pa[s : s + step, None, :]
            lt = block_logterms(safe_log_abs(d[..., 0]), safe_log_abs(d[..., 1]), self.n)
            valid = xb[None, :] > xa[s : s + step, None]
            lt = np.where(valid[..., None], lt, -np.inf)
            yield s, d, lt

    def _kernel(self, lt: np.ndarray):
        top = lt.reshape(len(lt), -1).max(axis=1)
        top = np.where(np.isfinite(top), top, -np.inf)
        with np.errstate(under="ignore", invalid="ignore"):
            k_hat = np.exp(lt - np.where(np.isfinite(top), top, 0.0)[:, None, None])
        return top, k_hat

    def _reduce(self, j: int) -> dict:
        """Row log-scales and scaled totals / sign-variant kernels of block ``j``."""
        na, nb = len(self._grids[j - 1][0]), len(self._grids[j][0])
        ell = np.arange(self.n + 1)
        wx = 1.0 / (2 * ell + 1)
        wy = 1.0 / (2 * self.n - 2 * ell + 1)
        out = {"top": np.empty(na), "t": np.empty((na, nb)), "vx": np.empty((na, nb)), "vy": np.empty((na, nb))}
        for s, d, lt in self._rows(j):
            top, k_hat = self._kernel(lt)
            e = s + len(top)
            out["top"][s:e] = top
            out["t"][s:e] = k_hat.sum(axis=2)
            out["vx"][s:e] = d[..., 0] * (k_hat @ wx)
            out["vy"][s:e] = d[..., 1] * (k_hat @ wy)
        return out

    def _row_scale(self, j: int) -> tuple[np.ndarray, float]:
        top = self.blocks[j - 1]["top"]
        finite = np.isfinite(top)
        if not finite.any():
            return np.zeros(len(top)), -math.inf
        m = float(top[finite].max())
        return np.where(finite, np.exp(np.where(finite, top, m) - m), 0.0), m

    def separators(self, words: Sequence[Word]) -> list[np.ndarray]:
        """``D_j = weight * gamma'^{letter_j}`` on the grid, one ``(W, G)`` array per ``j = 1..k-1``."""
        letters = np.array([w.letters for w in words], dtype=int).reshape(len(words), self.k - 1)
        return [self.w[None, :] * self.der[:, letters[:, j]].T for j in range(self.k - 1)]

    def forward(self, seps, kernels=None):
        """Left partial products ``A_0..A_k`` with per-word log-scales."""
        nw = seps[0].shape[0] if seps else 1
        a, la = np.ones((nw, 1)), np.zeros(nw)
        out = [(a, la)]
        for j in range(1, self.k + 1):
            s, m = self._row_scale(j)
            t = self.blocks[j - 1]["t"] if kernels is None else kernels[j - 1]
            a = (a * s[None, :]) @ t
            la = la + m
            if j < self.k:
                a = a * seps[j - 1]
            a, la = _normalise(a, la)
            out.append((a, la))
        return out

    def backward(self, seps):
        """Right partial products ``B_k..B_0`` (index ``j`` holds ``B_j``)."""
        nw = seps[0].shape[0] if seps else 1
        b, lb = np.ones((nw, 1)), np.zeros(nw)
        out = [None] * (self.k + 1)
        out[self.k] = (b, lb)
        for j in range(self.k, 0, -1):
            s, m = self._row_scale(j)
            b = (b @ self.blocks[j - 1]["t"].T) * s[None, :]
            lb = lb + m
            if j - 1 >= 1:
                b = b * seps[j - 2]
            b, lb = _normalise(b, lb)
            out[j - 1] = (b, lb)
        return out

    def summary(self, words: Sequence[Word]):
        """Totals ``(W,)``, marginals ``(W, k, n+1)``, variant totals ``(W, k)`` twice.

        Each is returned as ``(values, logs)`` with elementwise log-scales.
        """
        seps = self.separators(words)
        fwd = self.forward(seps)
        bwd = self.backward(seps)
        nw, k, n1 = len(words), self.k, self.n + 1
        totals = fwd[k][0][:, 0], fwd[k][1]
        marg = np.zeros((nw, k, n1))
        mlog = np.zeros((nw, k))
        vx, vy = np.zeros((nw, k)), np.zeros((nw, k))
        for j in range(1, k + 1):
            a, la = fwd[j - 1]
            b, lb = bwd[j]
            s, m = self._row_scale(j)
            a = a * s[None, :]
            mlog[:, j - 1] = la + lb + m
            blk = self.blocks[j - 1]
            vx[:, j - 1] = np.einsum("wa,ab,wb->w", a, blk["vx"], b, optimize=True)
            vy[:, j - 1] = np.einsum("wa,ab,wb->w", a, blk["vy"], b, optimize=True)
            for r0, _, lt in self._rows(j):
                # recomputed rows share the stored row scales, already folded into ``a``
                _, k_hat = self._kernel(lt)
                part = (a[:, r0 : r0 + len(k_hat)] @ k_hat.reshape(len(k_hat), -1)).reshape(nw, -1, n1)
                marg[:, j - 1, :] += np.einsum("wbl,wb->wl", part, b)
        return totals, (marg, mlog[..., None]), (vx, mlog), (vy, mlog)

    def box(self, words: Sequence[Word], masks: np.ndarray):
        """Totals with block ``j`` restricted to ``l`` where ``masks[j]`` holds."""
        masks = np.asarray(masks, dtype=float)
        kernels = []
        for j in range(1, self.k + 1):
            na, nb = len(self._grids[j - 1][0]), len(self._grids[j][0])
            t = np.empty((na, nb))
            for s, _, lt in self._rows(j):
                _, k_hat = self._kernel(lt)
                t[s : s + len(k_hat)] = k_hat @ masks[j - 1]
            kernels.append(t)
        fwd = self.forward(self.separators(words), kernels)
        return fwd[self.k][0][:, 0], fwd[self.k][1]
