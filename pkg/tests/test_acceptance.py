"""The eleven acceptance criteria, one test each.

Every test records a single PASS/FAIL line; the lines are printed in the
terminal summary of the run (and with ``-s`` as each test finishes).
"""

import math
import subprocess
import sys
import time

import numpy as np

from conftest import ACCEPTANCE_LINES
from siginvert.cli import oracle_report
from siginvert.curves import (
    closed_loop,
    direction_field_path,
    holder_path,
    quarter_arc,
    smoothed_corner,
    wavy_monotone,
)
from siginvert.diagnostics import (
    check_no_deviation,
    check_standard_location,
    concentration_ratio,
    sample_violating_points,
)
from siginvert.inversion import invert, recover_directions
from siginvert.path_model import (
    PiecewiseLinearPath,
    epsilon_k,
    eta_k,
    increments,
    modulus_of_continuity,
)
from siginvert.sources import PathSource
from siginvert.symmetrization import QuadratureSettings, enumerate_block_words, level_symmetrized_sum
from siginvert.tensor_algebra import (
    Word,
    chen_concat,
    signature_of_pl_path,
    signature_of_segment,
)


def record(num: int, name: str, ok: bool, detail: str) -> None:
    line = f"criterion {num:2d} [{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    ACCEPTANCE_LINES[num] = line
    print(line)
    assert ok, line


def rel(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = np.maximum(np.abs(b), 1e-300)
    return float(np.max(np.abs(a - b) / scale))


ORACLE_PAIRS = [(1, 1), (1, 2), (1, 3), (2, 1), (2, 2)]


def test_c01_oracle_equivalence():
    start = time.perf_counter()
    worst, cases = 0.0, 0
    for k, n in ORACLE_PAIRS:
        rep = oracle_report(seed=1000 + 10 * k + n, k=k, n=n, paths=20, exact=True)
        worst = max(worst, rep["max_relative_discrepancy"])
        cases += rep["cases"]
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-8 and elapsed < 60.0
    record(1, "oracle equivalence", ok, f"{cases} block sums, max rel gap {worst:.2e}, {elapsed:.1f}s")


def test_c02_word_sets():
    cases = [
        ("x", [(1, 2), (0, 2)], {"xyxyy", "yxxyy"}),
        ("x", [(1, 2), (2, 2)], {"xyxxx", "yxxxx"}),
        ("y", [(1, 2), (1, 2)], {"xyyxy", "xyyyx", "yxyxy", "yxyyx"}),
    ]
    got = [{str(w) for w in enumerate_block_words(sep, blocks)} for sep, blocks, _ in cases]
    ok = all(g == want for g, (_, _, want) in zip(got, cases))
    record(2, "block word sets", ok, "; ".join(",".join(sorted(g)) for g in got))


def test_c03_level_sums_closed_form():
    # exact rational signatures: in floating point the Chen products of a
    # back-and-forth path cancel, so the relative error is unbounded as an
    # increment tends to zero; the double route is reported alongside
    rng = np.random.default_rng(3)
    worst, worst_double = 0.0, 0.0
    for _ in range(12):
        verts = np.vstack([np.zeros(2), rng.uniform(-1, 1, size=(int(rng.integers(2, 6)), 2))])
        exact = signature_of_pl_path(verts, 6, exact=True)
        double = signature_of_pl_path(verts, 6)
        dx, dy = verts[-1] - verts[0]
        for n in range(7):
            for ell in range(n + 1):
                want = dx**ell * dy ** (n - ell) / (math.factorial(ell) * math.factorial(n - ell))
                worst = max(worst, rel(level_symmetrized_sum(exact, n, ell), want))
                worst_double = max(worst_double, rel(level_symmetrized_sum(double, n, ell), want))
    record(3, "level sums closed form", worst <= 1e-10,
           f"max rel err {worst:.2e} over n <= 6 (double-precision signature {worst_double:.1e})")


def test_c04_chen_and_segments():
    rng = np.random.default_rng(4)
    depth = 8
    errs = {}
    v = rng.uniform(-2, 2, size=2)
    seg = signature_of_segment(v, depth)
    err = 0.0
    for m in range(depth + 1):
        for idx in range(2**m):
            w = Word.from_index(idx, m, 2)
            want = np.prod([v[a] for a in w.letters]) / math.factorial(m)
            err = max(err, rel(seg.coefficient(w), want) if want != 0 else abs(seg.coefficient(w)))
    errs["segment"] = err
    a, b, c = (signature_of_segment(rng.uniform(-1, 1, 2), depth) for _ in range(3))
    left, right = chen_concat(a, chen_concat(b, c)), chen_concat(chen_concat(a, b), c)
    errs["assoc"] = max(
        float(np.max(np.abs(l - r) / np.maximum(np.abs(r), 1e-12)))
        for l, r in zip(left.levels, right.levels)
    )
    p0, p1 = rng.uniform(-1, 1, (2, 2))
    mid = signature_of_pl_path([p0, 0.3 * p0 + 0.7 * p1, p1], depth)
    direct = signature_of_segment(p1 - p0, depth)
    errs["midpoint"] = max(
        float(np.max(np.abs(l - r) / np.maximum(np.abs(r), 1e-12))) for l, r in zip(mid.levels, direct.levels)
    )
    sig = signature_of_pl_path(rng.uniform(-1, 1, (5, 2)), depth)
    x1 = sig.level(1)
    t2 = sig.tensor(2)
    errs["shuffle"] = rel(t2 + t2.T, np.outer(x1, x1))
    worst = max(errs.values())
    detail = ", ".join(f"{k} {v:.1e}" for k, v in errs.items())
    record(4, "Chen and segment invariants", worst <= 1e-10, detail)


def test_c05_direction_recovery():
    start = time.perf_counter()
    arc = quarter_arc()
    ok = True
    parts = []
    for k in (2, 3):
        eta = eta_k(arc, k)
        r = increments(arc, k).r
        errs = {}
        for n in (20, 40):
            est, _ = recover_directions(PathSource(arc), k, n, eta)
            errs[n] = float(np.max(np.abs(est.rho - r)))
            if n == 40:
                ok &= est.ratio > 0.5 and errs[n] < 3 * eta
        ok &= errs[40] < errs[20]
        parts.append(f"k={k} err n=20 {errs[20]:.3f} n=40 {errs[40]:.3f} (3eta {3 * eta:.2f})")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 300
    record(5, "direction recovery", ok, "; ".join(parts) + f"; {elapsed:.1f}s")


MONOTONE = {
    "wavy": lambda: wavy_monotone(),
    "arc": lambda: quarter_arc(),
    "polyline": lambda: PiecewiseLinearPath([[0, 0], [1.0, 0.2], [1.5, 1.5], [2.0, 1.7]]),
}
REFLECTIONS = [(1, 1), (-1, 1), (1, -1), (-1, -1)]


def test_c06_sign_recovery():
    k = 3
    bad, checked = [], 0
    for name, make in MONOTONE.items():
        for flips in REFLECTIONS:
            path = make().transformed(1.0, flips)
            res = invert(PathSource(path), k, n=12)
            inc = increments(path, k)
            signs = res.stages["signs"]
            for i in range(k):
                if not signs.x_degenerate[i]:
                    checked += 1
                    if res.ax[i] != np.sign(inc.dx[i]):
                        bad.append((name, flips, "x", i))
                if not signs.y_degenerate[i]:
                    checked += 1
                    if res.ay[i] != np.sign(inc.dy[i]):
                        bad.append((name, flips, "y", i))
    ok = not bad and checked > 0
    record(6, "sign recovery", ok, f"{checked} non-degenerate signs checked, {len(bad)} wrong")


def test_c07_length():
    seg = invert(PathSource(PiecewiseLinearPath([[0, 0], [3, 4]])), 1)
    seg_err = abs(seg.length - 7.0) / 7.0
    smooth = {}
    # the hook turns through 3pi/4, so its last piece runs back in x and the
    # length formula is not exact by construction as it is for monotone paths
    hook = direction_field_path(lambda t: 0.75 * math.pi * t, 2.0, name="hook")
    for name, path in (("arc", quarter_arc()), ("wavy", wavy_monotone()), ("hook", hook)):
        res = invert(PathSource(path), 4)
        smooth[name] = abs(res.length - path.length) / path.length
    ok = seg_err <= 1e-9 and max(smooth.values()) <= 0.02
    detail = f"segment rel err {seg_err:.1e}; " + ", ".join(f"{k} k=4 rel err {v:.4f}" for k, v in smooth.items())
    record(7, "length recovery", ok, detail)


def test_c08_zero_increment_fallback():
    loop = closed_loop()
    k = 8
    res = invert(PathSource(loop), k)
    r = increments(loop, k).r
    err = float(np.max(np.abs(res.rho - r)))
    ok = res.fallback_used and err < 3 * res.eta and res.mass_ratio > 0.5
    record(8, "zero-increment fallback", ok,
           f"fallback {res.fallback_used}, max |rho - r| {err:.3f} < 3eta {3 * res.eta:.3f}, L {res.length:.3f}")


def test_c09_concentration_diagnostics():
    settings = QuadratureSettings(tol=1e-6)
    line = PiecewiseLinearPath([[0, 0], [1, 1]])
    ratios = [concentration_ratio(line, 2, n, settings=settings).ratio for n in (5, 10, 20, 40)]
    conc_ok = all(b >= a for a, b in zip(ratios, ratios[1:])) and ratios[-1] > 0.99
    # at k=2 the default eps_k box covers the whole interval; a narrower box
    # shows the trend itself
    narrow = [concentration_ratio(line, 2, n, eps=0.1, settings=settings).ratio for n in (5, 10, 20, 40)]
    conc_ok &= all(b > a for a, b in zip(narrow, narrow[1:]))

    rng = np.random.default_rng(9)
    worst, count = 0.0, 0
    for path, k in ((quarter_arc(), 32), (wavy_monotone(), 32), (holder_path(1.0), 32)):
        eps = epsilon_k(modulus_of_continuity(path, k).value, path.length, k)
        per = 34 if count == 0 else 33
        for u in sample_violating_points(k, eps, per, rng):
            rep = check_no_deviation(path, k, u, eps)
            assert rep.applicable
            worst = max(worst, rep.ratio)
            count += 1
    nodev_ok = count == 100 and worst < np.exp(-1)

    paths = [line, quarter_arc(), wavy_monotone(), smoothed_corner(), closed_loop(), holder_path(1.0),
             PiecewiseLinearPath([[0, 0], [1, 0], [1, 1]])]
    loc = [check_standard_location(p, k).passed for p in paths for k in (4, 8, 16)]
    loc_ok = all(loc)
    ok = conc_ok and nodev_ok and loc_ok
    detail = (f"line k=2 ratios {', '.join(f'{r:.4f}' for r in ratios)} "
              f"(eps 0.1: {', '.join(f'{r:.3f}' for r in narrow)}); "
              f"no-deviation max {worst:.2e} over {count} points; "
              f"standard location {sum(loc)}/{len(loc)}")
    record(9, "concentration diagnostics", ok, detail)


def test_c10_scale_invariance():
    cases = [
        ("arc", quarter_arc(), 3, 20),
        ("polyline", PiecewiseLinearPath([[0, 0], [1, 0.5], [0.5, 2]]), 2, 10),
    ]
    worst, ok = 0.0, True
    for _, path, k, n in cases:
        base = invert(PathSource(path), k, n=n)
        for lam in (0.1, 10.0):
            res = invert(PathSource(path.scaled(lam)), k, n=n)
            ok &= np.array_equal(res.rho, base.rho) and np.array_equal(res.ax, base.ax)
            ok &= np.array_equal(res.ay, base.ay)
            worst = max(worst, abs(res.length - lam * base.length) / (lam * base.length))
    ok &= worst <= 1e-6
    record(10, "scale invariance", bool(ok), f"rho and signs identical, max rel length err {worst:.1e}")


def test_c11_determinism(tmp_path):
    src = tmp_path / "arc.json"
    src.write_text('{"curve": "quarter-arc"}')
    outs = []
    for i in range(2):
        out = tmp_path / f"run{i}.json"
        cmd = [sys.executable, "-m", "siginvert", "invert", "--input", str(src), "--k", "3", "--n", "12",
               "--output", str(out)]
        proc = subprocess.run(cmd, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stdout + proc.stderr
        outs.append(out.read_bytes())
    ok = outs[0] == outs[1] and len(outs[0]) > 0
    record(11, "determinism", ok, f"two invert runs, {len(outs[0])} bytes, identical {outs[0] == outs[1]}")
