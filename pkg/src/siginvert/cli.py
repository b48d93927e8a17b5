"""Command-line front end.

Exit status: 0 on success, 2 on domain failures (no direction found, sign
indeterminate, capacity or depth exceeded, ...), 1 on I/O and parse errors.
Failures print a JSON object ``{"error": ..., "message": ...}`` on stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Sequence

import numpy as np
from threadpoolctl import threadpool_limits

from . import io
from .diagnostics import (
    check_no_deviation,
    check_standard_location,
    check_word_star,
    concentration_ratio,
    sample_violating_points,
)
from .errors import DomainError, SigInvertError
from .inversion import c1_error, invert
from .logsigned import LogSigned
from .path_model import PiecewiseLinearPath, epsilon_k, modulus_of_continuity
from .sources import PathSource, SignatureSource, all_words
from .symmetrization import (
    ENUMERATION_CAP,
    BlockSpec,
    QuadratureSettings,
    SymmetrizedTable,
    block_table,
    integral_table,
    symmetrized_sum_integral,
    symmetrized_sum_wordsum,
)
from .tensor_algebra import TruncatedSignature, Word, signature_of_pl_path

__all__ = ["main", "build_parser", "oracle_report", "random_polyline"]

log = logging.getLogger("siginvert")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _nonneg_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return value


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="siginvert", description="Signature inversion by symmetrization")
    parser.add_argument("--threads", type=_positive_int, default=None, help="cap on BLAS worker threads")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_input=True):
        if needs_input:
            p.add_argument("--input", "-i", required=True)
        p.add_argument("--output", "-o", default=None, help="output file (default stdout)")
        p.add_argument("--tol", type=_positive_float, default=1e-8, help="quadrature relative tolerance")

    p = sub.add_parser("signature", help="truncated signature of a polygonal path")
    common(p)
    p.add_argument("--depth", type=_nonneg_int, required=True)

    p = sub.add_parser("symmetrize", help="block sums of a path or signature")
    common(p)
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--separator", "-w", default=None, help="separator word over {x, y}, length k-1")
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--l-index", type=_int_list, help="comma-separated multi-index")
    grp.add_argument("--all", action="store_true", help="every multi-index")
    p.add_argument("--variant", default=None, help="sign variant as i:x or i:y")
    p.add_argument("--cap", type=_positive_int, default=ENUMERATION_CAP, help="word enumeration cap")
    p.add_argument("--method", choices=("auto", "wordsum", "integral"), default="auto")

    p = sub.add_parser("invert", help="piecewise-linear reconstruction")
    common(p)
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--n", type=_positive_int, default=None)
    p.add_argument("--eta", type=_positive_float, default=None)
    p.add_argument("--truth", default=None, help="ground-truth path for the C1 error")

    p = sub.add_parser("diagnose", help="concentration diagnostics of a known path")
    common(p)
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--n-grid", type=_int_list, default=[5, 10, 20, 40])
    p.add_argument("--eps", type=_positive_float, default=None)
    p.add_argument("--samples", type=_nonneg_int, default=20, help="violating points for the no-deviation check")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("oracle-check", help="word sums against the integral form on random polygons")
    common(p, needs_input=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--paths", type=_positive_int, default=20)
    p.add_argument("--precision", choices=("exact", "double"), default="exact")
    return parser


def _settings(args) -> QuadratureSettings:
    return QuadratureSettings(tol=args.tol)


def _parse_word(text: str | None, k: int) -> Word:
    if text is None:
        if k == 1:
            return Word()
        raise ValueError("--separator is required when k > 1")
    word = Word.parse(text)
    if len(word) != k - 1:
        raise ValueError(f"separator must have {k - 1} letters, got {len(word)}")
    return word


def _parse_variant(text: str | None):
    if text is None:
        return None
    i, _, letter = text.partition(":")
    return int(i), letter


def cmd_signature(args) -> dict:
    path = io.load_path(args.input)
    if not isinstance(path, PiecewiseLinearPath):
        raise DomainError("signatures are computed for polygonal paths only")
    return signature_of_pl_path(path.vertices, args.depth).to_json_dict()


def _entry(ell, value: LogSigned) -> dict:
    return {"l": [int(v) for v in ell], "sign": value.sign, "logmag": value.logmag if value.sign else None}


def cmd_symmetrize(args) -> dict:
    data = io.load_input(args.input)
    spec = BlockSpec(args.k, args.n, _parse_word(args.separator, args.k), _parse_variant(args.variant))
    is_sig = isinstance(data, TruncatedSignature)
    method = args.method
    if method == "auto":
        method = "wordsum" if is_sig else "integral"
    if method == "wordsum" and not is_sig:
        data = signature_of_pl_path(_polygon(data).vertices, spec.word_length)
        is_sig = True
    if method == "integral" and is_sig:
        raise ValueError("the integral evaluator needs a path input")
    if args.all:
        if is_sig:
            table = SymmetrizedTable.from_values(spec, block_table(data, spec))
        else:
            table = SymmetrizedTable.from_scaled(spec, integral_table(data, spec, _settings(args)))
        entries = [_entry(ell, v) for ell, v in table.entries()]
    else:
        ell = args.l_index
        if len(ell) != spec.k:
            raise ValueError(f"--l-index needs {spec.k} values")
        if is_sig:
            value = symmetrized_sum_wordsum(data, spec, ell, args.cap)
        else:
            value = symmetrized_sum_integral(data, spec, ell, _settings(args))
        entries = [_entry(ell, value)]
    out = {"k": spec.k, "n": spec.n, "w": str(spec.separator)}
    if spec.variant is not None:
        out["variant"] = f"{spec.variant[0]}:{spec.variant[1]}"
    out["entries"] = entries
    return out


def _polygon(path) -> PiecewiseLinearPath:
    if not isinstance(path, PiecewiseLinearPath):
        raise DomainError("word sums need the signature of a polygonal path")
    return path


def cmd_invert(args) -> dict:
    data = io.load_input(args.input)
    if isinstance(data, TruncatedSignature):
        source = SignatureSource(data)
        truth = None
    else:
        source = PathSource(data, _settings(args))
        truth = data
    if args.truth is not None:
        truth = io.load_path(args.truth)
    result = invert(source, args.k, n=args.n, eta=args.eta)
    if truth is not None:
        result.c1_error = c1_error(truth, result.vertices, args.k)
    return result.to_json_dict()


def cmd_diagnose(args) -> dict:
    path = io.load_path(args.input)
    k = args.k
    settings = _settings(args)
    eps = args.eps
    if eps is None:
        eps = epsilon_k(modulus_of_continuity(path, k).value, path.length, k)
    reports = []
    for n in args.n_grid:
        rep = concentration_ratio(path, k, n, eps, settings).to_json_dict()
        if (n + 1) ** k <= 100_000:
            rep["word_star"] = check_word_star(path, k, n, settings=settings).to_json_dict()
        reports.append(rep)
    out = {
        "k": k,
        "eps_k": eps,
        "concentration": reports,
        "standard_location": check_standard_location(path, k).to_json_dict(),
    }
    if k >= 2 and args.samples:
        rng = np.random.default_rng(args.seed)
        try:
            points = sample_violating_points(k, eps, args.samples, rng)
        except ValueError as exc:
            out["no_deviation"] = {"applicable": False, "reason": str(exc)}
        else:
            ratios = [check_no_deviation(path, k, u, eps).ratio for u in points]
            out["no_deviation"] = {
                "applicable": True,
                "samples": len(ratios),
                "max_ratio": max(ratios),
                "holds": bool(max(ratios) < np.exp(-1.0)),
            }
    return out


def random_polyline(rng: np.random.Generator, segments: int) -> np.ndarray:
    """Vertices uniform in ``[-1, 1]^2``, starting at the origin."""
    return np.vstack([np.zeros(2), rng.uniform(-1.0, 1.0, size=(segments, 2))])


def _relative_gap(a: LogSigned, b: LogSigned) -> float:
    if a.sign == 0 and b.sign == 0:
        return 0.0
    if b.sign == 0 or a.sign == 0:
        return float("inf")
    return abs(a.sign * b.sign * np.exp(a.logmag - b.logmag) - 1.0)


def oracle_report(seed: int, k: int, n: int, paths: int = 20, exact: bool = True, segments=(2, 3)) -> dict:
    """Largest relative gap between word sums and the integral form.

    With ``exact`` the word sums use a rational signature and the integral
    runs in multiprecision, so neither side loses digits to cancellation.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    cases = 0
    for _ in range(paths):
        verts = random_polyline(rng, int(rng.integers(segments[0], segments[-1] + 1)))
        path = PiecewiseLinearPath(verts)
        depth = 2 * n * k + k - 1
        sig = signature_of_pl_path(verts, depth, exact=exact)
        for word in all_words(k):
            spec = BlockSpec(k, n, word)
            for ell in spec.multi_indices():
                a = symmetrized_sum_wordsum(sig, spec, ell)
                b = symmetrized_sum_integral(path, spec, ell, precision=40 if exact else None)
                worst = max(worst, _relative_gap(a, b))
                cases += 1
    return {"seed": seed, "k": k, "n": n, "paths": paths, "cases": cases, "max_relative_discrepancy": worst}


def cmd_oracle_check(args) -> dict:
    report = oracle_report(args.seed, args.k, args.n, args.paths, args.precision == "exact")
    report["tolerance"] = 1e-8
    report["passed"] = report["max_relative_discrepancy"] <= 1e-8
    return report


COMMANDS = {
    "signature": cmd_signature,
    "symmetrize": cmd_symmetrize,
    "invert": cmd_invert,
    "diagnose": cmd_diagnose,
    "oracle-check": cmd_oracle_check,
}


def _fail(kind: str, exc: BaseException, code: int) -> int:
    print(json.dumps({"error": kind, "message": str(exc)}))
    return code


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr)
    threads = args.threads
    if threads is None and os.environ.get("SIGINVERT_THREADS"):
        threads = int(os.environ["SIGINVERT_THREADS"])
    try:
        with threadpool_limits(limits=threads):
            result = COMMANDS[args.command](args)
        io.write_json(result, args.output)
    except SigInvertError as exc:
        return _fail(type(exc).__name__, exc, 2)
    except (OSError, ValueError, KeyError, TypeError, json.JSONDecodeError) as exc:
        return _fail(type(exc).__name__, exc, 1)
    return 0


if __name__ == "__main__":
    sys.exit(main())
