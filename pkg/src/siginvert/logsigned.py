"""Sign and log-magnitude arithmetic for quantities spanning hundreds of decades."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

__all__ = ["LogSigned", "ScaledArray", "signed_logsumexp"]


@dataclass(frozen=True)
class LogSigned:
    """A real number stored as ``sign * exp(logmag)``.

    ``sign`` is -1, 0 or +1. A zero sign is the exact value 0 and its
    ``logmag`` is ignored (it is normalised to ``-inf``).
    """

    sign: int
    logmag: float = -math.inf

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or 1, got {self.sign!r}")
        if self.sign == 0:
            object.__setattr__(self, "logmag", -math.inf)
        elif not math.isfinite(self.logmag):
            raise ValueError("nonzero LogSigned needs a finite log-magnitude")

    @classmethod
    def zero(cls) -> LogSigned:
        return cls(0)

    @classmethod
    def from_float(cls, value: float) -> LogSigned:
        value = float(value)
        if value == 0.0:
            return cls(0)
        if not math.isfinite(value):
            raise ValueError(f"cannot represent {value!r}")
        return cls(1 if value > 0 else -1, math.log(abs(value)))

    @classmethod
    def from_scaled(cls, value: float, logscale: float) -> LogSigned:
        """``value * exp(logscale)`` without forming the product."""
        value = float(value)
        if value == 0.0 or not math.isfinite(logscale):
            return cls(0)
        return cls(1 if value > 0 else -1, math.log(abs(value)) + logscale)

    def to_json_dict(self) -> dict:
        return {"sign": self.sign, "logmag": self.logmag if self.sign else None}

    def __float__(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.logmag)

    @property
    def value(self) -> float:
        return float(self)

    def is_zero(self) -> bool:
        return self.sign == 0

    def __neg__(self) -> LogSigned:
        return LogSigned(-self.sign, self.logmag)

    def __abs__(self) -> LogSigned:
        return LogSigned(abs(self.sign), self.logmag)

    def __mul__(self, other: LogSigned) -> LogSigned:
        if self.sign == 0 or other.sign == 0:
            return LogSigned(0)
        return LogSigned(self.sign * other.sign, self.logmag + other.logmag)

    def __truediv__(self, other: LogSigned) -> LogSigned:
        if other.sign == 0:
            raise ZeroDivisionError("division by an exact zero")
        if self.sign == 0:
            return LogSigned(0)
        return LogSigned(self.sign * other.sign, self.logmag - other.logmag)

    def __add__(self, other: LogSigned) -> LogSigned:
        if self.sign == 0:
            return other
        if other.sign == 0:
            return self
        return signed_logsumexp(
            np.array([self.logmag, other.logmag]), np.array([self.sign, other.sign])
        )

    def __sub__(self, other: LogSigned) -> LogSigned:
        return self + (-other)

    def scale_log(self, log_factor: float) -> LogSigned:
        """Multiply by ``exp(log_factor)``."""
        if self.sign == 0:
            return self
        return LogSigned(self.sign, self.logmag + log_factor)


def signed_logsumexp(logs, signs=None) -> LogSigned:
    """Sum ``signs * exp(logs)`` without leaving the log domain.

    Entries with ``logs == -inf`` contribute nothing. The reduction order is
    the array order, so repeated calls agree bit for bit.
    """
    logs = np.asarray(logs, dtype=float).ravel()
    if signs is None:
        signs = np.ones_like(logs)
    signs = np.asarray(signs, dtype=float).ravel()
    live = np.isfinite(logs) & (signs != 0)
    if not live.any():
        return LogSigned(0)
    out, sgn = logsumexp(logs[live], b=signs[live], return_sign=True)
    if sgn == 0 or not np.isfinite(out):
        return LogSigned(0)
    return LogSigned(int(sgn), float(out))


class ScaledArray:
    """A float array with a shared log-scale: ``values * exp(logscale)``.

    Used to accumulate quadrature sums chunk by chunk. Each chunk brings its
    own scale; the accumulator rescales to the running maximum so nothing
    overflows and only contributions more than ~700 e-folds below the peak
    are lost.
    """

    def __init__(self, values, logscale: float = 0.0):
        self.values = np.asarray(values, dtype=float)
        self.logscale = float(logscale)

    @classmethod
    def empty(cls, shape) -> ScaledArray:
        return cls(np.zeros(shape), -math.inf)

    def add(self, values, logscale: float) -> None:
        """Accumulate ``values * exp(logscale)`` in place."""
        if not math.isfinite(logscale):
            return
        values = np.asarray(values, dtype=float)
        if not math.isfinite(self.logscale):
            self.values = values.copy()
            self.logscale = logscale
            return
        top = max(self.logscale, logscale)
        self.values = self.values * math.exp(self.logscale - top) + values * math.exp(
            logscale - top
        )
        self.logscale = top

    def signs(self) -> np.ndarray:
        return np.sign(self.values).astype(np.int8)

    def logmags(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self.values)) + self.logscale

    def item(self, index=()) -> LogSigned:
        v = float(self.values[index])
        if v == 0.0 or not math.isfinite(self.logscale):
            return LogSigned(0)
        return LogSigned(1 if v > 0 else -1, math.log(abs(v)) + self.logscale)

    def __getitem__(self, index) -> ScaledArray:
        return ScaledArray(self.values[index], self.logscale)

    @property
    def shape(self):
        return self.values.shape
