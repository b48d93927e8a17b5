"""Reconstruct piecewise-linear approximations of planar C1 paths from signatures."""

from .errors import (
    AccuracyError,
    CapacityError,
    DegeneratePathError,
    DepthError,
    DomainError,
    InconsistentReconstructionError,
    NoDirectionError,
    ShapeError,
    SigInvertError,
    SignIndeterminateError,
)
from .inversion import ReconstructionResult, invert
from .logsigned import LogSigned
from .path_model import AnalyticPath, PiecewiseLinearPath
from .sources import PathSource, SignatureSource
from .symmetrization import BlockSpec
from .tensor_algebra import TruncatedSignature, Word, chen_concat, signature_of_pl_path, signature_of_segment

__version__ = "0.1.0"
