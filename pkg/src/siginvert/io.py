"""File formats: paths, signatures and deterministic JSON output."""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from . import curves
from .path_model import PiecewiseLinearPath, UniformSpeedPath, load_sampled_csv
from .tensor_algebra import TruncatedSignature

__all__ = ["dumps", "write_json", "read_json", "load_path", "load_input", "CURVES"]

#: named smooth curves accepted as ``{"curve": name, ...keyword arguments}``
CURVES = {
    "quarter-arc": curves.quarter_arc,
    "smoothed-corner": curves.smoothed_corner,
    "closed-loop": curves.closed_loop,
    "holder": curves.holder_path,
    "wavy-monotone": curves.wavy_monotone,
}


def _float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    if x == 0.0:
        return "0.0"
    text = format(x, ".17g")
    if "e" not in text and "." not in text and "n" not in text:
        text += ".0"
    return text


def _plain(obj: Any) -> Any:
    if hasattr(obj, "to_json_dict"):
        return obj.to_json_dict()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """JSON text with every float at 17 significant digits and non-finite floats as null."""
    obj = _plain(obj)
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        # short numeric rows stay on one line
        if all(isinstance(_plain(v), (int, float)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_json(obj: Any, path: str | Path | None) -> str:
    text = dumps(obj) + "\n"
    if path is None or str(path) == "-":
        print(text, end="")
    else:
        Path(path).write_text(text)
    return text


def read_json(path: str | Path) -> Any:
    with open(path) as fh:
        return json.load(fh)


def _path_from_dict(data: dict) -> UniformSpeedPath:
    if "vertices" in data:
        return PiecewiseLinearPath(np.asarray(data["vertices"], dtype=float))
    if "curve" in data:
        name = data["curve"]
        if name not in CURVES:
            raise ValueError(f"unknown curve {name!r}; known: {', '.join(sorted(CURVES))}")
        kwargs = {k: v for k, v in data.items() if k != "curve"}
        return CURVES[name](**kwargs)
    raise ValueError("path JSON needs 'vertices' or 'curve'")


def load_path(path: str | Path) -> UniformSpeedPath:
    """Polygon or named curve from JSON, or a sampled path from CSV."""
    if str(path).lower().endswith(".csv"):
        return load_sampled_csv(path)
    return _path_from_dict(read_json(path))


def load_input(path: str | Path) -> UniformSpeedPath | TruncatedSignature:
    """A path or a signature, told apart by the ``levels`` key."""
    if str(path).lower().endswith(".csv"):
        return load_sampled_csv(path)
    data = read_json(path)
    if isinstance(data, dict) and "levels" in data:
        return TruncatedSignature.from_json_dict(data)
    if not isinstance(data, dict):
        raise ValueError("input JSON must be an object")
    return _path_from_dict(data)
