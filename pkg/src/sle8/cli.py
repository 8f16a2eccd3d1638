"""Command-line front end: eval, sample, verify, map and loewner.

Exit codes: 0 success, 1 a check or computation failed, 2 bad usage.
CSV output has a header row; JSON output carries "schema": 1. Seeds and
thread counts are echoed into every output that depends on them.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field

import numpy as np

from . import linkpat as lp
from . import loewner, scmap, ust, verify
from .coulomb import F_det, PhaseError, Z, crossing_probs
from .quad import QuadratureError, check_config

SCHEMA = 1


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    patterns: dict = field(default_factory=dict)
    x: list | None = None
    options: dict = field(default_factory=dict)

    def to_dict(self):
        return {"subcommand": self.subcommand,
                "patterns": {k: str(v) for k, v in self.patterns.items()},
                "x": self.x, **self.options}


# -- parsing helpers -----------------------------------------------------------------

def _pattern(text, name="--beta"):
    try:
        return lp.parse_pattern(text)
    except lp.PatternError as e:
        raise UsageError(f"{name} {text!r}: {e}") from None


def _floats(text, name):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"{name}: cannot parse {text!r} as comma-separated numbers") from None


def _points(text, n2=None):
    x = _floats(text, "--x")
    try:
        x = check_config(x)
    except ValueError as e:
        raise UsageError(f"--x: {e}") from None
    if n2 is not None and len(x) != n2:
        raise UsageError(f"--x: expected {n2} points, got {len(x)}")
    return x


def _grid(text):
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise UsageError(f"--grid: expected WxH, got {text!r}") from None


def _write(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue()


def _json(obj):
    return json.dumps({"schema": SCHEMA, **obj}, indent=2, sort_keys=False, default=float) + "\n"


# -- subcommands -----------------------------------------------------------------------

def cmd_eval(a):
    beta = _pattern(a.beta)
    x = _points(a.x, 2 * beta.N)
    F = F_det(beta, x)
    probs = crossing_probs(beta, x)
    Zs = {str(al): Z(al, x, estimate=False).value for al in probs}
    out = {"beta": str(beta), "x": [float(v) for v in x], "F": F.value,
           "est_error": F.est_error, "Z": Zs, "p": {str(k): v for k, v in probs.items()}}
    if a.format == "csv":
        rows = [(str(al), Zs[str(al)], p) for al, p in probs.items()]
        _write(_csv(["alpha", "Z", "p"], rows), a.out)
    else:
        _write(_json(out), a.out)
    return 0


def _marks(text, N):
    if text is None:
        # evenly spaced, offset from the corners
        return [(k + 0.5) / (2 * N) for k in range(2 * N)]
    f = _floats(text, "--marks")
    if len(f) != 2 * N:
        raise UsageError(f"--marks: expected {2 * N} perimeter fractions, got {len(f)}")
    if any(not 0 <= v < 1 for v in f) or any(b <= c for c, b in zip(f, f[1:])):
        raise UsageError("--marks: fractions must increase within [0, 1)")
    return f


def cmd_sample(a):
    beta = _pattern(a.beta)
    W, H = _grid(a.grid)
    if a.n < 1:
        raise UsageError("--n must be positive")
    threads = a.threads or ust.default_threads()
    delta = 1.0 / max(W, H)
    f = _marks(a.marks, beta.N)
    try:
        poly = ust.build_polygon(W * delta, H * delta, [v * 2 * (W + H) * delta for v in f], delta)
    except ust.LatticeError as e:
        raise UsageError(f"lattice: {e}") from None
    res = ust.mc_crossing(poly, beta, a.n, a.seed, threads)
    rows = [(str(r.alpha), r.count, r.freq, r.ci_lo, r.ci_hi, r.exact, a.n, a.seed, threads)
            for r in res.rows]
    _write(_csv(["alpha", "count", "freq", "ci_lo", "ci_hi", "exact_p", "n", "seed", "threads"],
                rows), a.out)
    return 0


def cmd_verify(a):
    if a.N < 1:
        raise UsageError("--N must be >= 1")
    if a.suite != "all" and a.suite not in verify.SUITES:
        raise UsageError(f"--suite must be all or one of {', '.join(verify.SUITES)}")
    threads = a.threads or 1
    reports = verify.run_suite(a.suite, a.N, a.seed, threads)
    ok = all(r.passed for r in reports)
    text = verify.reports_to_json(reports, suite=a.suite, N=a.N, seed=a.seed, threads=threads) + "\n"
    if a.json:
        _write(text, a.json)
    n_fail = sum(not r.passed for r in reports)
    for r in reports:
        if not r.passed:
            print(f"FAIL {r.check} {json.dumps(r.inputs, default=float)} "
                  f"measured={r.measured!r} target={r.target!r} tol={r.tolerance!r}", file=sys.stderr)
    print(f"{len(reports) - n_fail}/{len(reports)} checks passed")
    return 0 if ok else 1


def cmd_map(a):
    beta = _pattern(a.beta)
    x = _points(a.x, 2 * beta.N)
    par = scmap.solve_Q(beta, x)
    H, K = scmap.expansion_HK(beta, x)
    span = x[-1] - x[0]
    re = np.linspace(x[0] - 0.25 * span, x[-1] + 0.25 * span, a.nx)
    im = np.linspace(0, 0.5 * span, a.ny + 1)[1:]
    phi = scmap.map_grid(par, re, im)
    rows = [(float(re[i]), float(im[k]), float(phi[k, i].real), float(phi[k, i].imag))
            for k in range(len(im)) for i in range(len(re))]
    _write(_csv(["re_z", "im_z", "re_phi", "im_phi"], rows), a.out)
    params = {"beta": str(beta), "x": [float(v) for v in x], "links": [list(l) for l in par.links],
              "nu": list(par.nu), "mu": list(par.mu), "H": [H.real, H.imag], "K": [K.real, K.imag],
              "closure": par.closure, "height": par.height}
    if a.json:
        _write(_json(params), a.json)
    return 0


def cmd_loewner(a):
    pat = _pattern(a.beta)
    x = _points(a.x, 2 * pat.N)
    if not 1 <= a.i <= len(x):
        raise UsageError(f"--i must lie in 1..{len(x)}")
    if a.dt <= 0 or a.horizon <= 0:
        raise UsageError("--dt and --horizon must be positive")
    if a.martingale:
        if a.alpha is None:
            raise UsageError("--martingale needs --alpha")
        alpha = _pattern(a.alpha, "--alpha")
        try:
            st = loewner.martingale_check(x, a.i, pat, alpha, a.paths, a.dt, a.horizon, a.seed)
        except ValueError as e:
            raise UsageError(str(e)) from None
        _write(_json({"beta": str(pat), "alpha": str(alpha), "x": [float(v) for v in x], "i": a.i,
                      "dt": a.dt, "horizon": a.horizon, "paths": a.paths, "seed": a.seed,
                      "mean_increment": st.mean, "sem": st.sem, "z": st.z, "M0": st.m0,
                      "near_swallow": st.near_swallow, "consistent": st.consistent}), a.out)
        return 0 if st.consistent else 1
    src = loewner.DriftSource(a.kind, pat)
    rows = []
    for k in range(a.paths):
        p = loewner.simulate(x, a.i, src, a.dt, a.horizon, a.seed + k)
        for t, row in zip(p.t, p.X):
            rows.append((k, a.seed + k, float(t), float(row[a.i - 1]),
                         *[float(v) for v in np.delete(row, a.i - 1)]))
    header = ["path", "seed", "t", "W"] + [f"V{j}" for j in range(1, len(x) + 1) if j != a.i]
    _write(_csv(header, rows), a.out)
    return 0


# -- parser ----------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(2)


def build_parser():
    p = _Parser(prog="sle8", description="SLE(8) partition functions, UST sampling and checks.")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    e = sub.add_parser("eval", help="F_beta, Z_alpha and crossing probabilities")
    e.add_argument("--beta", required=True)
    e.add_argument("--x", required=True)
    e.add_argument("--format", choices=["json", "csv"], default="json")
    e.add_argument("--out")
    e.set_defaults(func=cmd_eval)

    s = sub.add_parser("sample", help="Monte Carlo crossing frequencies on a lattice rectangle")
    s.add_argument("--beta", required=True)
    s.add_argument("--grid", default="50x50")
    s.add_argument("--marks", help="2N increasing perimeter fractions, counterclockwise from (0,0)")
    s.add_argument("--n", type=int, default=10000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--threads", type=int, default=0, help="default: $SLE8_THREADS or cpu count")
    s.add_argument("--out")
    s.set_defaults(func=cmd_sample)

    v = sub.add_parser("verify", help="run the identity checks")
    v.add_argument("--suite", default="all")
    v.add_argument("--N", type=int, default=2)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--threads", type=int, default=0)
    v.add_argument("--json")
    v.set_defaults(func=cmd_verify)

    m = sub.add_parser("map", help="slit-rectangle map on a grid")
    m.add_argument("--beta", required=True)
    m.add_argument("--x", required=True)
    m.add_argument("--nx", type=int, default=41)
    m.add_argument("--ny", type=int, default=20)
    m.add_argument("--out")
    m.add_argument("--json")
    m.set_defaults(func=cmd_map)

    lw = sub.add_parser("loewner", help="driving-process paths or martingale statistics")
    lw.add_argument("--beta", required=True, help="pattern of the drift source")
    lw.add_argument("--kind", choices=["F", "Z"], default="F")
    lw.add_argument("--x", required=True)
    lw.add_argument("--i", type=int, default=1)
    lw.add_argument("--dt", type=float, default=1e-3)
    lw.add_argument("--horizon", type=float, default=0.1)
    lw.add_argument("--paths", type=int, default=1)
    lw.add_argument("--seed", type=int, default=0)
    lw.add_argument("--martingale", action="store_true")
    lw.add_argument("--alpha")
    lw.add_argument("--out")
    lw.set_defaults(func=cmd_loewner)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"sle8 {args.cmd}: error: {e}", file=sys.stderr)
        return 2
    except (PhaseError, QuadratureError, scmap.SlitMapError, ust.WalkError,
            loewner.OrderingError, lp.PatternError, ValueError) as e:
        print(f"sle8 {args.cmd}: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
