"""Command-line front end: ``jules check|run|infer|analyze|compile|stats|difftest``."""

from __future__ import annotations

import argparse
import json
import re
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .analysis import census, classify
from .fuzz import GenConfig, check_seed, diff_test, aot_test, gen_program, shrink
from .infer import InferenceCache, InferenceError
from .interp import StructVal, run
from .ir import BUILTIN, INT, MethodTable, TypeTable, originals, validate
from .jit import jit_compile
from .textio import ParseFailure, SourceProgram, parse_program, print_program, report_to_json, stability_dict, census_dict, verdict_dict
from .typesys import dispatch

EXIT_OK, EXIT_DIAG, EXIT_ERRED, EXIT_WRONG, EXIT_FUEL, EXIT_MISMATCH = 0, 1, 2, 3, 4, 5
EXIT_USAGE, EXIT_NOINPUT = 64, 66

OUTCOME_EXIT = {"finished": EXIT_OK, "erred": EXIT_ERRED, "wrong": EXIT_WRONG, "fuel": EXIT_FUEL}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(EXIT_USAGE, f"{self.prog}: error: {message}")


def _err(msg: str) -> None:
    print(msg, file=sys.stderr)


def _emit(obj) -> None:
    print(obj if isinstance(obj, str) else json.dumps(obj))


# -- loading ---------------------------------------------------------------------


def load(path: str, compiled: bool = False, check: bool = True) -> tuple[TypeTable, MethodTable]:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise CliError(EXIT_NOINPUT, f"{path}: {exc.strerror or exc}")
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError:
        raise CliError(EXIT_DIAG, f"{path}: not valid UTF-8")
    try:
        tytbl, mtbl = parse_program(SourceProgram(text, path), compiled=compiled)
    except ParseFailure as exc:
        raise CliError(EXIT_DIAG, "\n".join(str(e) for e in exc.errors))
    if check:
        diags = validate(tytbl, mtbl)
        if diags:
            raise CliError(EXIT_DIAG, "\n".join(f"{path}: {d}" for d in diags))
    return tytbl, mtbl


def _types(tytbl: TypeTable) -> dict:
    return {**BUILTIN, **{t.name: t for t in tytbl.all_types()}}


def parse_sig(tytbl: TypeTable, text: str) -> tuple:
    known = _types(tytbl)
    names = [s.strip() for s in text.split(",")] if text.strip() else []
    for n in names:
        if n not in known:
            raise CliError(EXIT_USAGE, f"unknown type {n!r}")
    return tuple(known[n] for n in names)


_ENTRY = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*\((.*)\)\s*$", re.S)
_VALUE_TOK = re.compile(r"\s*(-?\d+|[A-Za-z_][A-Za-z0-9_]*|[(),])")


def default_value(tytbl: TypeTable, t):
    """Zero value of a concrete type: 0 for Int, fields filled recursively."""
    if t == INT or not t.concrete:
        return 0
    decl = tytbl.decl(t.name)
    return StructVal(t, tuple(default_value(tytbl, f) for f in decl.fields))


def parse_entry(tytbl: TypeTable, text: str) -> tuple:
    """``name(args)`` where each argument is an integer, a concrete type name
    (its zero value) or a constructor such as ``Pt(1, 2)``."""
    m = _ENTRY.match(text)
    if not m:
        raise CliError(EXIT_USAGE, f"bad --entry {text!r}; expected name(arg, ...)")
    name, rest = m.groups()
    toks, pos = [], 0
    while pos < len(rest):
        if rest[pos:].strip() == "":
            break
        t = _VALUE_TOK.match(rest, pos)
        if not t:
            raise CliError(EXIT_USAGE, f"bad --entry argument near {rest[pos:]!r}")
        toks.append(t.group(1))
        pos = t.end()
    known = _types(tytbl)
    i = 0

    def value():
        nonlocal i
        if i >= len(toks):
            raise CliError(EXIT_USAGE, "truncated --entry arguments")
        tok = toks[i]
        i += 1
        if re.fullmatch(r"-?\d+", tok):
            return int(tok)
        t = known.get(tok)
        if t is None or not t.concrete:
            raise CliError(EXIT_USAGE, f"--entry argument {tok!r} is not a concrete type")
        if i < len(toks) and toks[i] == "(":
            i += 1
            fields = values(")")
            decl = tytbl.decl(t.name)
            if decl is None or len(fields) != len(decl.fields):
                raise CliError(EXIT_USAGE, f"wrong field count for {tok}")
            return StructVal(t, tuple(fields))
        return default_value(tytbl, t)

    def values(close):
        nonlocal i
        out = []
        if i < len(toks) and toks[i] == close:
            i += 1
            return out
        while True:
            out.append(value())
            if i < len(toks) and toks[i] == ",":
                i += 1
                continue
            if close is None and i == len(toks):
                return out
            if i < len(toks) and toks[i] == close:
                i += 1
                return out
            raise CliError(EXIT_USAGE, "malformed --entry arguments")

    args = values(None) if toks else []
    return name, tuple(args)


def parse_seeds(text: str) -> range:
    """``A..B`` is the half-open range [A, B); a lone ``N`` is [N, N+1)."""
    m = re.fullmatch(r"\s*(\d+)\s*(?:\.\.\s*(\d+)\s*)?", text)
    if not m:
        raise CliError(EXIT_USAGE, f"bad --seeds {text!r}; expected A..B")
    lo = int(m.group(1))
    hi = int(m.group(2)) if m.group(2) is not None else lo + 1
    if hi < lo:
        raise CliError(EXIT_USAGE, f"empty seed range {text!r}")
    return range(lo, hi)


# -- subcommands -------------------------------------------------------------------


def cmd_check(a) -> int:
    try:
        data = Path(a.file).read_bytes()
    except OSError as exc:
        raise CliError(EXIT_NOINPUT, f"{a.file}: {exc.strerror or exc}")
    try:
        tytbl, mtbl = parse_program(SourceProgram(data.decode("utf-8", "replace"), a.file), compiled=a.compiled)
    except ParseFailure as exc:
        for e in exc.errors:
            _err(str(e))
        return EXIT_DIAG
    diags = validate(tytbl, mtbl, allow_stubs=False)
    for d in diags:
        _err(f"{a.file}: {d}")
    return EXIT_DIAG if diags else EXIT_OK


def cmd_run(a) -> int:
    tytbl, mtbl = load(a.file, compiled=a.compiled)
    entry = parse_entry(tytbl, a.entry) if a.entry else ("main", ())
    trace = [] if a.trace else None
    out = run(tytbl, mtbl, entry, a.fuel, a.semantics, check_soundness=a.check_soundness, trace=trace)
    for line in out.trace:
        _err(line)
    report = out.summary()
    report["semantics"] = a.semantics
    if a.check_soundness:
        report["soundness_violations"] = list(out.soundness_violations)
    _emit(report)
    return OUTCOME_EXIT[out.kind]


def _method_sig(a, tytbl, mtbl):
    if not mtbl.has_name(a.method):
        raise CliError(EXIT_USAGE, f"no method named {a.method!r}")
    return parse_sig(tytbl, a.sig or "")


def cmd_infer(a) -> int:
    tytbl, mtbl = load(a.file)
    sig = _method_sig(a, tytbl, mtbl)
    try:
        typing = InferenceCache(tytbl, originals(mtbl)).infer_method(a.method, sig)
    except InferenceError as exc:
        _err(f"inference failed: {exc}")
        return EXIT_DIAG
    _emit({"method": a.method, "sig": [t.name for t in sig], "register_types": [t.name for t in typing]})
    return EXIT_OK


def cmd_analyze(a) -> int:
    tytbl, mtbl = load(a.file)
    cache = InferenceCache(tytbl, originals(mtbl))
    if a.method and not a.all:
        targets = [(a.method, _method_sig(a, tytbl, mtbl))]
    else:
        targets = [(m.name, m.params) for m in originals(mtbl)]
    reports, status = [], EXIT_OK
    for name, sig in targets:
        try:
            reports.append(stability_dict(classify(tytbl, mtbl, name, sig, cache)))
        except InferenceError as exc:
            _err(f"inference failed: {exc}")
            status = EXIT_DIAG
    _emit(reports[0] if len(targets) == 1 and reports else reports)
    return status


def cmd_compile(a) -> int:
    tytbl, mtbl = load(a.file)
    sig = _method_sig(a, tytbl, mtbl)
    if not all(t.concrete for t in sig):
        raise CliError(EXIT_USAGE, "compile needs concrete argument types")
    if not dispatch(tytbl, mtbl, a.method, sig):
        _err(f"no method to compile: {dispatch(tytbl, mtbl, a.method, sig).reason}")
        return EXIT_DIAG
    text = print_program(tytbl, jit_compile(tytbl, mtbl, a.method, sig))
    if a.output:
        try:
            Path(a.output).write_text(text, encoding="utf-8")
        except OSError as exc:
            raise CliError(EXIT_NOINPUT, f"{a.output}: {exc.strerror or exc}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_stats(a) -> int:
    tytbl, mtbl = load(a.file)
    out = run(tytbl, mtbl, ("main", ()), a.fuel, "jit")
    report = census_dict(census(tytbl, out.table))
    report["run"] = out.summary()
    _emit(report)
    return EXIT_OK


def _seed_job(args):
    seed, fuel, aot = args
    return check_seed(seed, fuel=fuel, aot=aot)


def _write_repro(out_dir: Path, seed: int, fuel: int, verdict) -> None:
    tytbl, mtbl = gen_program(GenConfig(seed=seed))
    test = aot_test if verdict.mode == "aot" else diff_test

    def still_fails(t, m):
        return not test(t, m, fuel=fuel).match

    st, sm = shrink(tytbl, mtbl, still_fails)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = f"seed-{seed}-{verdict.mode}"
    (out_dir / f"{stem}.jules").write_text(print_program(tytbl, mtbl), encoding="utf-8")
    (out_dir / f"{stem}.min.jules").write_text(print_program(st, sm), encoding="utf-8")
    (out_dir / f"{stem}.json").write_text(report_to_json(verdict, indent=2) + "\n", encoding="utf-8")


def cmd_difftest(a) -> int:
    seeds = parse_seeds(a.seeds)
    jobs = [(s, a.fuel, a.aot) for s in seeds]
    if a.jobs > 1:
        with ProcessPoolExecutor(a.jobs) as pool:
            results = list(pool.map(_seed_job, jobs, chunksize=16))
    else:
        results = [_seed_job(j) for j in jobs]
    mismatches = []
    kinds: dict = {}
    for r in results:
        for v in (r["diff"], r.get("aot")):
            if v is None:
                continue
            if v.mode == "jit":
                k = v.stats["kinds"][0]
                kinds[k] = kinds.get(k, 0) + 1
            if not v.match:
                mismatches.append(v)
                if a.out:
                    _write_repro(Path(a.out), v.seed, a.fuel, v)
    _emit({"seeds": len(seeds), "aot": a.aot, "fuel": a.fuel, "outcomes": kinds,
           "mismatches": [verdict_dict(v) for v in mismatches]})
    return EXIT_MISMATCH if mismatches else EXIT_OK


# -- argument parsing ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="jules", description="Jules abstract machine toolkit")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    c = sub.add_parser("check", help="parse and validate a program")
    c.add_argument("file")
    c.add_argument("--compiled", action="store_true", help="accept compiled tables (invoke, origin annotations)")

    r = sub.add_parser("run", help="execute a program")
    r.add_argument("file")
    r.add_argument("--semantics", choices=["dispatch", "jit"], default="dispatch")
    r.add_argument("--fuel", type=_nat, default=100_000)
    r.add_argument("--trace", action="store_true", help="print one line per step on stderr")
    r.add_argument("--check-soundness", action="store_true")
    r.add_argument("--entry", help="entry call, e.g. f(Pt(1, 2)) or f(Int)")
    r.add_argument("--compiled", action="store_true")

    for name, helptext in (("infer", "register typing of a method"), ("compile", "JIT one method instance")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("file")
        s.add_argument("--method", required=True)
        s.add_argument("--sig", default="", help="comma-separated argument types")
        if name == "compile":
            s.add_argument("-o", "--output")

    an = sub.add_parser("analyze", help="stability and groundedness reports")
    an.add_argument("file")
    an.add_argument("--method")
    an.add_argument("--sig", default="")
    an.add_argument("--all", action="store_true", help="every original at its declared signature")

    st = sub.add_parser("stats", help="JIT-run main, then census the compiled instances")
    st.add_argument("file")
    st.add_argument("--fuel", type=_nat, default=100_000)

    d = sub.add_parser("difftest", help="differential testing over generated programs")
    d.add_argument("--seeds", default="0..100", help="half-open range A..B")
    d.add_argument("--fuel", type=_nat, default=10_000)
    d.add_argument("--aot", action="store_true", help="also compare original and harvested tables")
    d.add_argument("--out", help="directory for repro files of mismatches")
    d.add_argument("--jobs", type=_nat, default=1)
    return p


def _nat(text: str) -> int:
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if n < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative: {text}")
    return n


COMMANDS = {"check": cmd_check, "run": cmd_run, "infer": cmd_infer, "analyze": cmd_analyze,
            "compile": cmd_compile, "stats": cmd_stats, "difftest": cmd_difftest}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.cmd](args)
    except CliError as exc:
        _err(str(exc))
        return exc.code
    except SystemExit as exc:  # --help
        return exc.code if isinstance(exc.code, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
