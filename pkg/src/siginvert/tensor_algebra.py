"""Words, truncated signatures and Chen concatenation.

A truncated signature over a ``d``-letter alphabet stores, for every level
``n <= depth``, a dense array of ``d**n`` coefficients. Words are indexed
lexicographically with the first letter as the most significant base-``d``
digit, so level ``n`` reshaped to ``(d,) * n`` is the usual tensor.

For ``d = 2`` letter 0 is ``x`` and letter 1 is ``y``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .errors import CapacityError, DepthError, ShapeError

__all__ = [
    "MAX_LEVEL_ENTRIES",
    "Word",
    "TruncatedSignature",
    "signature_of_segment",
    "chen_concat",
    "signature_of_pl_path",
    "coefficient",
]

#: Default cap on ``d**n`` for a single dense level.
MAX_LEVEL_ENTRIES = 2**26

_LETTER_NAMES = "xyz"


@dataclass(frozen=True)
class Word:
    """An immutable word, stored as a tuple of letter indices."""

    letters: tuple[int, ...] = ()

    def __post_init__(self):
        letters = tuple(int(a) for a in self.letters)
        if any(a < 0 for a in letters):
            raise ValueError(f"negative letter in {letters}")
        object.__setattr__(self, "letters", letters)

    @classmethod
    def parse(cls, text: str) -> Word:
        """Read ``"xyx"`` style words (``x``, ``y``, ``z``) or digit strings."""
        letters = []
        for ch in text.strip():
            if ch in _LETTER_NAMES:
                letters.append(_LETTER_NAMES.index(ch))
            elif ch.isdigit():
                letters.append(int(ch))
            else:
                raise ValueError(f"unknown letter {ch!r} in {text!r}")
        return cls(tuple(letters))

    @classmethod
    def from_index(cls, index: int, length: int, dim: int) -> Word:
        letters = []
        for _ in range(length):
            index, a = divmod(index, dim)
            letters.append(a)
        return cls(tuple(reversed(letters)))

    def index(self, dim: int) -> int:
        """Position of this word inside its level array."""
        idx = 0
        for a in self.letters:
            if a >= dim:
                raise ValueError(f"letter {a} outside alphabet of size {dim}")
            idx = idx * dim + a
        return idx

    def count(self, letter: int) -> int:
        return self.letters.count(letter)

    def __len__(self) -> int:
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def __add__(self, other: Word) -> Word:
        return Word(self.letters + other.letters)

    def __str__(self) -> str:
        if all(a < len(_LETTER_NAMES) for a in self.letters):
            return "".join(_LETTER_NAMES[a] for a in self.letters)
        return "".join(str(a) for a in self.letters)


def _check_capacity(dim: int, depth: int, max_entries: int) -> None:
    if depth < 0:
        raise ValueError("depth must be non-negative")
    if dim ** depth > max_entries:
        raise CapacityError(
            f"level {depth} over {dim} letters has {dim ** depth} entries, "
            f"above the budget of {max_entries}"
        )


@dataclass(frozen=True, eq=False)
class TruncatedSignature:
    """Dense coefficients of a signature up to ``depth``."""

    dim: int
    depth: int
    levels: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.levels) != self.depth + 1:
            raise ShapeError(f"expected {self.depth + 1} levels, got {len(self.levels)}")
        frozen = []
        for n, lev in enumerate(self.levels):
            arr = np.asarray(lev)
            # object arrays carry exact rationals; everything else is float
            arr = np.array(arr, dtype=object if arr.dtype == object else float).ravel()
            if arr.size != self.dim ** n:
                raise ShapeError(f"level {n} must have {self.dim ** n} entries, got {arr.size}")
            arr.setflags(write=False)
            frozen.append(arr)
        object.__setattr__(self, "levels", tuple(frozen))

    @classmethod
    def identity(
        cls, dim: int, depth: int, max_entries: int = MAX_LEVEL_ENTRIES
    ) -> TruncatedSignature:
        """Signature of the constant path: 1 at level 0, zero elsewhere."""
        _check_capacity(dim, depth, max_entries)
        levels = [np.ones(1)] + [np.zeros(dim ** n) for n in range(1, depth + 1)]
        return cls(dim, depth, tuple(levels))

    @property
    def exact(self) -> bool:
        return self.levels[0].dtype == object

    def level(self, n: int) -> np.ndarray:
        if n > self.depth:
            raise DepthError(f"level {n} requested from a depth-{self.depth} signature")
        return self.levels[n]

    def tensor(self, n: int) -> np.ndarray:
        return self.level(n).reshape((self.dim,) * n)

    def coefficient(self, word: Word | str) -> float:
        return coefficient(self, word)

    def truncate(self, depth: int) -> TruncatedSignature:
        if depth > self.depth:
            raise DepthError(f"cannot deepen a depth-{self.depth} signature to {depth}")
        return TruncatedSignature(self.dim, depth, self.levels[: depth + 1])

    def __matmul__(self, other: TruncatedSignature) -> TruncatedSignature:
        return chen_concat(self, other)

    def to_json_dict(self) -> dict:
        return {
            "dim": self.dim,
            "depth": self.depth,
            "levels": [np.asarray(lev, dtype=float).tolist() for lev in self.levels],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> TruncatedSignature:
        return cls(int(data["dim"]), int(data["depth"]), tuple(np.asarray(l) for l in data["levels"]))


def coefficient(sig: TruncatedSignature, word: Word | str) -> float:
    """Return the stored coefficient of ``word``.

    Raises :class:`DepthError` when the word is longer than the truncation
    depth; the coefficient is unknown there, not zero.
    """
    if isinstance(word, str):
        word = Word.parse(word)
    n = len(word)
    if n > sig.depth:
        raise DepthError(f"word of length {n} exceeds signature depth {sig.depth}")
    return float(sig.levels[n][word.index(sig.dim)])


def signature_of_segment(
    v: Sequence[float], depth: int, max_entries: int = MAX_LEVEL_ENTRIES, exact: bool = False
) -> TruncatedSignature:
    """Tensor exponential of the displacement ``v``.

    Built by ``coef(w e_i) = coef(w) * v_i / (|w| + 1)`` so no factorial is
    ever formed. With ``exact=True`` the floats in ``v`` are converted to
    exact rationals and every coefficient is computed without rounding.
    """
    v = np.asarray(v, dtype=float).ravel()
    dim = v.size
    if dim < 1:
        raise ValueError("segment needs at least one coordinate")
    _check_capacity(dim, depth, max_entries)
    if exact:
        v = np.array([Fraction(float(a)) for a in v], dtype=object)
        levels = [np.array([Fraction(1)], dtype=object)]
    else:
        levels = [np.ones(1)]
    for n in range(1, depth + 1):
        levels.append(np.multiply.outer(levels[-1], v).ravel() / n)
    return TruncatedSignature(dim, depth, tuple(levels))


def chen_concat(a: TruncatedSignature, b: TruncatedSignature) -> TruncatedSignature:
    """Truncated tensor product: the signature of the concatenated path."""
    if a.dim != b.dim or a.depth != b.depth or a.exact != b.exact:
        raise ShapeError(
            f"cannot concatenate (dim={a.dim}, depth={a.depth}) with (dim={b.dim}, depth={b.depth})"
        )
    levels = []
    for n in range(a.depth + 1):
        # fixed summation order over the split point keeps results reproducible
        acc = np.multiply.outer(a.levels[0], b.levels[n]).ravel()
        for m in range(1, n + 1):
            acc = acc + np.multiply.outer(a.levels[m], b.levels[n - m]).ravel()
        levels.append(acc)
    return TruncatedSignature(a.dim, a.depth, tuple(levels))


def signature_of_pl_path(
    vertices: Iterable[Sequence[float]],
    depth: int,
    max_entries: int = MAX_LEVEL_ENTRIES,
    exact: bool = False,
) -> TruncatedSignature:
    """Signature of the piecewise-linear path through ``vertices``.

    ``exact=True`` works in rational arithmetic (slow; meant for checks).
    """
    pts = np.atleast_2d(np.asarray(list(vertices), dtype=float))
    if pts.shape[0] == 0:
        raise ValueError("need at least one vertex")
    dim = pts.shape[1]
    _check_capacity(dim, depth, max_entries)
    sig = signature_of_segment(np.zeros(dim), depth, max_entries, exact=exact)
    for step in np.diff(pts, axis=0):
        sig = chen_concat(sig, signature_of_segment(step, depth, max_entries, exact=exact))
    return sig


def level_norm_l1(sig: TruncatedSignature, n: int) -> float:
    return float(math.fsum(np.abs(sig.level(n))))
