"""Command-line harness: ``qmult <command> --key value ...``.

Results go to CSV (default) or JSON.  When written to a file, a sidecar
``<output>.meta.json`` records the resolved config, its hash, package
versions and the wall-clock runtime.  The results file itself holds no
timing unless ``--timing`` is given, so identical configs give identical
bytes.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

from . import expsums, gowers, patterns, pseudorandom
from .io import Table, metadata, write_results
from .numerics import DEFAULT_BUDGET, BudgetExceeded, resolve_threads
from .seqcore import QMultSeq, SeqSpec, SpecError, build, parse_spec

OUTPUT_DIR_ENV = "QMULT_OUTPUT_DIR"

EXIT_OK, EXIT_USAGE, EXIT_BUDGET, EXIT_IO = 0, 2, 3, 4

COMMANDS = ("norms", "supcorr", "gelfond", "patterns", "gamma", "cesaro", "ergodic-demo", "ledger")


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    seq: SeqSpec | None
    params: dict[str, Any] = field(default_factory=dict)
    output: str | None = None
    format: str = "csv"
    threads: int | str = 1
    budget: int | None = int(DEFAULT_BUDGET)
    seed: int = 0
    timing: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seq"] = None if self.seq is None else str(self.seq)
        return d


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def int_list(text: str) -> list[int]:
    """'8,10,12' or '8..18' (inclusive) or a mix of both."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            a, _, b = part.partition("..")
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError(f"empty list {text!r}")
    return out


def float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def intervals(text: str) -> list[tuple[float, float]]:
    """'0:0.5,0.5:1' -> [(0, 0.5), (0.5, 1)]."""
    out = []
    for part in text.split(","):
        a, sep, b = part.partition(":")
        if not sep:
            raise argparse.ArgumentTypeError(f"interval {part!r} is not of the form a:b")
        out.append((float(a), float(b)))
    return out


def _threads(text: str):
    if text == "auto":
        return "auto"
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1 or 'auto'")
    return n


def _budget(text: str):
    if text.lower() in ("none", "inf", "unlimited"):
        return None
    v = float(text)
    if v <= 0:
        raise argparse.ArgumentTypeError("budget must be positive")
    return int(v)


def _theta(text: str) -> float:
    return patterns.GOLDEN if text.lower() == "golden" else float(text)


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False, allow_abbrev=False)
    g = p.add_argument_group("run options")
    g.add_argument("--output", help=f"result file; default ${OUTPUT_DIR_ENV}/<command>.<format> or stdout")
    g.add_argument("--format", choices=("csv", "json"), help="default csv, or json for a .json output")
    g.add_argument("--threads", type=_threads, default=1, help="worker threads or 'auto' (default 1)")
    g.add_argument("--budget", type=_budget, default=int(DEFAULT_BUDGET),
                   help="max work units before refusing (default 1e9; 'none' disables)")
    g.add_argument("--seed", type=int, default=0, help="seed for random sequences without seed=")
    g.add_argument("--timing", action="store_true", help="fill the runtime_ms column")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = _Parser(prog="qmult", allow_abbrev=False,
                     description="Uniformity, correlation and pattern experiments for q-multiplicative sequences.")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    def cmd(name, help_):
        return sub.add_parser(name, help=help_, parents=[common], allow_abbrev=False)

    p = cmd("norms", "Gowers norms, parallelepiped and box averages")
    p.add_argument("--seq", required=True)
    p.add_argument("--s", type=int, required=True)
    p.add_argument("--L", type=int_list, required=True, help="level(s); N = q^L")
    p.add_argument("--mode", choices=("brute", "fft", "dp", "recursive"), default="brute")
    p.add_argument("--r", type=int_list, help="carry vector of length 2^s (default zeros)")
    p.add_argument("--l", type=int, default=1, help="split level for --mode recursive")
    p.add_argument("--condition", choices=("none", "sum-below-ql"), default="none",
                   help="box condition for --mode dp")

    p = cmd("supcorr", "sup over polynomial phases of the correlation at N = q^L")
    p.add_argument("--seq", required=True)
    p.add_argument("--deg", type=int, default=1)
    p.add_argument("--L", type=int_list, required=True)
    p.add_argument("--beam", type=int, default=64)
    p.add_argument("--grid-density", type=int, default=64)

    p = cmd("gelfond", "fitted Gelfond-type exponent over a range of levels")
    p.add_argument("--seq", required=True)
    p.add_argument("--Lmin", type=int, default=8)
    p.add_argument("--Lmax", type=int, default=18)
    p.add_argument("--deg", type=int, default=1)
    p.add_argument("--beam", type=int, default=64)
    p.add_argument("--grid-density", type=int, default=64)

    p = cmd("patterns", "count progressions with digit-sum constraints")
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--Q", type=int)
    p.add_argument("--residues", type=int_list)
    p.add_argument("--alpha", type=float)
    p.add_argument("--cells", type=intervals, help="a:b intervals, comma separated")

    p = cmd("gamma", "correlation coefficients gamma_r, or their mean-square density")
    p.add_argument("--seq", required=True)
    p.add_argument("--R", type=int, required=True)
    p.add_argument("--method", default="series:depth=30", help="series:depth=D or finite:N=M")
    p.add_argument("--density", action="store_true", help="emit the density ladder instead")

    p = cmd("cesaro", "Cesaro means at N = q^L with the Delange partial sum")
    p.add_argument("--seq", required=True)
    p.add_argument("--L", type=int_list, required=True)

    p = cmd("ergodic-demo", "weighted averages along a rotation by theta")
    p.add_argument("--seq", default="tm")
    p.add_argument("--poly", type=int_list, default=[0, 0, 1], help="integer coefficients, constant first")
    p.add_argument("--theta", type=_theta, default=patterns.GOLDEN, help="rotation number or 'golden'")
    p.add_argument("--x0", type=float, default=0.0)
    p.add_argument("--N", type=int, default=1 << 16)

    p = cmd("ledger", "uniformity deficits along a block decomposition")
    p.add_argument("--seq", required=True)
    p.add_argument("--s", type=int, default=2)
    p.add_argument("--block", type=int, required=True, help="block length L_i")
    p.add_argument("--blocks", type=int, required=True)
    p.add_argument("--l0", type=int, default=2)
    return parser


def _seq(text: str, seed: int) -> SeqSpec:
    name = text.strip().partition(":")[0].strip().lower()
    if name == "random" and "seed=" not in text:
        text = text + ("," if ":" in text else ":") + f"seed={seed}"
    try:
        return parse_spec(text)
    except SpecError as exc:
        raise UsageError(f"--seq: {exc}") from None


def _require(cond: bool, flag: str, msg: str):
    if not cond:
        raise UsageError(f"{flag}: {msg}")


def _validate(cmd: str, a: dict, seq: SeqSpec | None):
    if cmd == "norms":
        _require(1 <= a["s"] <= gowers.S_MAX, "--s", f"must be in 1..{gowers.S_MAX}")
        _require(all(L >= 0 for L in a["L"]), "--L", "levels must be >= 0")
        if a["r"] is None:
            a["r"] = [0] * (1 << a["s"])
        _require(len(a["r"]) == 1 << a["s"], "--r", f"needs 2^s = {1 << a['s']} entries")
        _require(all(0 <= x <= a["s"] for x in a["r"]), "--r", f"entries must lie in 0..{a['s']}")
        if a["mode"] == "recursive":
            _require(all(0 <= a["l"] <= L for L in a["L"]), "--l", "need 0 <= l <= L")
    elif cmd == "supcorr":
        _require(1 <= a["deg"] <= 4, "--deg", "must be in 1..4")
        _require(all(L >= 1 for L in a["L"]), "--L", "levels must be >= 1")
        _require(a["beam"] >= 1, "--beam", "must be >= 1")
        _require(a["grid_density"] >= 2, "--grid-density", "must be >= 2")
    elif cmd == "gelfond":
        _require(a["Lmin"] >= 1, "--Lmin", "must be >= 1")
        _require(a["Lmax"] - a["Lmin"] >= 2, "--Lmax", "need at least 3 levels")
        _require(1 <= a["deg"] <= 4, "--deg", "must be in 1..4")
        _require(a["beam"] >= 1, "--beam", "must be >= 1")
    elif cmd == "patterns":
        _require(a["q"] >= 2, "--q", "must be >= 2")
        _require(a["N"] >= 1, "--N", "must be >= 1")
        residue_mode = a["Q"] is not None or a["residues"] is not None
        cell_mode = a["alpha"] is not None or a["cells"] is not None
        _require(residue_mode != cell_mode, "--Q", "give either --Q/--residues or --alpha/--cells")
        if residue_mode:
            _require(a["Q"] is not None and a["residues"] is not None, "--residues", "needs --Q as well")
            _require(a["Q"] >= 1, "--Q", "must be >= 1")
            _require(math.gcd(a["Q"], a["q"] - 1) == 1, "--Q",
                     f"gcd(Q, q-1) = {math.gcd(a['Q'], a['q'] - 1)}; Q must be coprime to q-1")
            _require(all(0 <= x < a["Q"] for x in a["residues"]), "--residues", "entries must lie in [0, Q)")
            n = len(a["residues"])
        else:
            _require(a["alpha"] is not None and a["cells"] is not None, "--cells", "needs --alpha as well")
            _require(all(0 <= x < y <= 1 for x, y in a["cells"]), "--cells", "intervals must satisfy 0 <= a < b <= 1")
            n = len(a["cells"])
        if a["k"] is None:
            a["k"] = n
        _require(a["k"] == n, "--k", f"is {a['k']} but {n} constraints were given")
    elif cmd == "gamma":
        _require(a["R"] >= 1, "--R", "must be >= 1")
        try:
            name, _ = pseudorandom.parse_method(a["method"])
        except ValueError as exc:
            raise UsageError(f"--method: {exc}") from None
    elif cmd == "cesaro":
        _require(all(L >= 0 for L in a["L"]), "--L", "levels must be >= 0")
    elif cmd == "ergodic-demo":
        _require(a["N"] >= 1, "--N", "must be >= 1")
        try:
            patterns._check_integer_poly(a["poly"])
        except ValueError as exc:
            raise UsageError(f"--poly: {exc}") from None
    elif cmd == "ledger":
        _require(1 <= a["s"] <= gowers.S_MAX, "--s", f"must be in 1..{gowers.S_MAX}")
        _require(a["blocks"] >= 1, "--blocks", "must be >= 1")
        _require(a["block"] >= a["l0"], "--block", f"must be >= l0 = {a['l0']}")

    needs_table = {"cesaro", "ledger"}
    if cmd == "norms" and a["mode"] in ("dp", "recursive"):
        needs_table.add("norms")
    if cmd == "gamma" and a["method"].strip().lower().startswith("series"):
        needs_table.add("gamma")
    if cmd in needs_table and not isinstance(build(seq), QMultSeq):
        raise UsageError(f"--seq: {seq.name} is not q-multiplicative; this command/mode needs a table")


_RUN_KEYS = ("output", "format", "threads", "budget", "seed", "timing")


def parse_args(argv: list[str] | None = None) -> RunConfig:
    """Validate ``argv`` into a RunConfig; raises UsageError naming the offending flag."""
    ns = build_parser().parse_args(argv)
    a = vars(ns).copy()
    cmd = a.pop("command")
    run = {k: a.pop(k) for k in _RUN_KEYS}
    seq = _seq(a.pop("seq"), run["seed"]) if "seq" in a else None
    _validate(cmd, a, seq)

    out = run["output"]
    if out is None and os.environ.get(OUTPUT_DIR_ENV):
        out = os.path.join(os.environ[OUTPUT_DIR_ENV], f"{cmd}.{run['format'] or 'csv'}")
    fmt = run["format"] or ("json" if out and out.endswith(".json") else "csv")
    return RunConfig(cmd, seq, a, out, fmt, run["threads"], run["budget"], run["seed"], run["timing"])


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

class _Clock:
    def __init__(self, on: bool):
        self.on = on

    def __call__(self, fn: Callable, *args, **kw):
        t0 = time.perf_counter()
        out = fn(*args, **kw)
        ms = (time.perf_counter() - t0) * 1e3
        return out, (ms if self.on else None)


def run_norms(cfg: RunConfig, f, clock) -> Table:
    p = cfg.params
    s, r, mode = p["s"], tuple(p["r"]), p["mode"]
    t = Table(["s", "L", "method", "value", "error_bound", "runtime_ms", "value_im"])
    zero = not any(r)
    for L in p["L"]:
        bound = 0.0
        if mode in ("brute", "fft"):
            if zero:
                v, ms = clock(gowers.gowers_norm, f, s, f.q ** L, mode, cfg.threads, cfg.budget)
            else:
                v, ms = clock(gowers.parallelepiped_average, f, r, L, mode, cfg.threads, cfg.budget)
        elif mode == "dp":
            v, ms = clock(gowers.box_average_exact, f, r, L, p["condition"])
        else:
            (v, bound), ms = clock(gowers.recursive_average, f, r, L, p["l"], "auto", cfg.threads, cfg.budget)
        v = complex(v)
        t.add(s, L, mode, v.real, bound, ms, v.imag)
    return t


def run_supcorr(cfg: RunConfig, f, clock) -> Table:
    p = cfg.params
    t = Table(["L", "N", "value", "alpha_star", "runtime_ms"])
    for L in p["L"]:
        N = f.q ** L
        if p["deg"] == 1 and isinstance(f, QMultSeq):
            (a, v), ms = clock(expsums.sup_linear_correlation, f, L, p["beam"])
            arg = float(a)
        else:
            (poly, v), ms = clock(expsums.sup_poly_correlation, f, p["deg"], N, p["grid_density"],
                                  budget=cfg.budget)
            arg = [float(c) for c in poly.coeffs[1:]]
            arg = arg[0] if len(arg) == 1 else arg
        t.add(L, N, float(v), arg, ms)
    return t


def run_gelfond(cfg: RunConfig, f, clock) -> Table:
    p = cfg.params
    Ls = range(p["Lmin"], p["Lmax"] + 1)
    rep, ms = clock(expsums.fit_gelfond_exponent, f, Ls, p["deg"], p["beam"], p["grid_density"])
    t = Table(["L", "N", "value", "alpha_star", "exponent", "fit_residual", "method", "runtime_ms"])
    for L, (N, v), a in zip(Ls, rep.scales, rep.arguments):
        t.add(L, N, float(v), float(a), rep.fitted_exponent, rep.fit_residual, rep.method.value, ms)
    return t


def run_patterns(cfg: RunConfig, f, clock) -> Table:
    p = cfg.params
    if p["Q"] is not None:
        kind = patterns.ModResidues(p["Q"], tuple(p["residues"]))
    else:
        kind = patterns.IrrationalCells(p["alpha"], tuple(tuple(c) for c in p["cells"]))
    spec = patterns.PatternSpec(p["q"], kind)
    fn = patterns.count_ap_patterns if p["Q"] is not None else patterns.count_ap_cells
    rep, ms = clock(fn, spec, p["N"], cfg.threads, cfg.budget)
    t = Table(["N", "count", "density", "runtime_ms"])
    k = spec.k
    for n, c in rep.series:
        t.add(n, c, patterns._density(c, n, k), ms if n == rep.N else None)
    return t


def run_gamma(cfg: RunConfig, f, clock) -> Table:
    p = cfg.params
    if p["density"]:
        rep, ms = clock(pseudorandom.bertrandias_density, f, p["R"], p["method"])
        t = Table(["R", "density", "decay_exponent", "runtime_ms"])
        for R, d in rep.ladder:
            t.add(R, d, rep.decay_exponent, ms)
        if not rep.ladder or rep.ladder[-1][0] != p["R"]:
            t.add(p["R"], rep.value, rep.decay_exponent, ms)
        return t
    cs, ms = clock(pseudorandom.correlations, f, p["R"], p["method"])
    t = Table(["r", "re", "im", "err", "runtime_ms"])
    for r in range(p["R"]):
        g = complex(cs.gamma[r])
        t.add(r, g.real, g.imag, float(cs.errors[r]), ms if r == 0 else None)
    return t


def run_cesaro(cfg: RunConfig, f, clock) -> Table:
    t = Table(["L", "N", "re", "im", "abs", "delange", "runtime_ms"])
    for L in cfg.params["L"]:
        m, ms = clock(expsums.cesaro_mean, f, L)
        d = expsums.delange_criterion(f, L) if L >= 1 else 0.0
        t.add(L, f.q ** L, m.real, m.imag, abs(m), d, ms)
    return t


def run_ergodic(cfg: RunConfig, f, clock) -> Table:
    p = cfg.params
    rows, ms = clock(patterns.weighted_birkhoff_demo, f, p["poly"], p["theta"], p["x0"], p["N"], cfg.threads)
    t = Table(["N", "re", "im", "abs", "runtime_ms"])
    for n, v in rows:
        t.add(n, v.real, v.imag, abs(v), ms if n == p["N"] else None)
    return t


def run_ledger(cfg: RunConfig, f, clock) -> Table:
    p = cfg.params
    led, ms = clock(gowers.epsilon_ledger, f, p["s"], p["block"], p["blocks"], p["l0"], cfg.threads, cfg.budget)
    t = Table(["i", "K_i", "L_i", "eps_i", "cumulative", "average_re", "average_im", "runtime_ms"])
    for i, (K, Li, e, c) in enumerate(zip(led.breakpoints, led.lengths, led.deficits, led.cumulative)):
        t.add(i, K, Li, e, c, led.average.real, led.average.imag, ms)
    return t


RUNNERS = {
    "norms": run_norms,
    "supcorr": run_supcorr,
    "gelfond": run_gelfond,
    "patterns": run_patterns,
    "gamma": run_gamma,
    "cesaro": run_cesaro,
    "ergodic-demo": run_ergodic,
    "ledger": run_ledger,
}


def execute(cfg: RunConfig) -> Table:
    f = build(cfg.seq) if cfg.seq is not None else None
    resolve_threads(cfg.threads)
    return RUNNERS[cfg.command](cfg, f, _Clock(cfg.timing))


def emit_results(table: Table, cfg: RunConfig, runtime_ms: float, stream=None) -> None:
    meta = metadata(cfg.to_dict(), runtime_ms)
    write_results(table, cfg.command, cfg.format, cfg.output, meta, stream)


def main(argv: list[str] | None = None) -> int:
    try:
        cfg = parse_args(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    t0 = time.perf_counter()
    try:
        table = execute(cfg)
    except BudgetExceeded as exc:
        hint = ""
        if cfg.command == "norms" and cfg.params.get("mode") in ("brute", "fft"):
            hint = " (try --mode dp or --mode recursive for box or recursive averages)"
        print(f"budget exceeded: {exc}{hint}", file=sys.stderr)
        return EXIT_BUDGET
    except (ValueError, TypeError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    runtime = (time.perf_counter() - t0) * 1e3
    try:
        emit_results(table, cfg, runtime)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
