"""Seeded program generator and the dispatch-vs-JIT differential harness."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Callable, Optional

from .analysis import classify, fully_devirtualized, max_devirt_table, table_optimizes
from .infer import InferenceCache, InferenceError
from .interp import Outcome, run
from .ir import (
    ANY,
    INT,
    AssignConst,
    AssignReg,
    DirectCall,
    DispatchCall,
    GetField,
    Method,
    MethodTable,
    New,
    Type,
    TypeDecl,
    TypeTable,
    originals,
    sig_str,
    validate,
)
from .typesys import subtype


@dataclass
class GenConfig:
    seed: int = 0
    max_types: int = 4
    max_methods_per_name: int = 3
    max_body_len: int = 6
    max_arity: int = 2
    max_call_depth_bias: int = 1

    def __post_init__(self):
        for name in ("max_types", "max_methods_per_name", "max_body_len", "max_arity"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.max_call_depth_bias < 0:
            raise ValueError("max_call_depth_bias must be >= 0")


class _Gen:
    def __init__(self, cfg: GenConfig, rng: random.Random):
        self.cfg = cfg
        self.rng = rng

    def types(self) -> TypeTable:
        rng = self.rng
        roots = [Type(f"A{i}", False) for i in range(rng.randint(1, 3))]
        supers = [rng.choice(roots) for _ in range(rng.randint(1, self.cfg.max_types))]
        used = sorted(set(supers), key=lambda t: t.name)  # an abstract type exists only as a supertype
        entries: list[TypeDecl] = []
        for i, sup in enumerate(supers):
            pool = [INT, INT, ANY] + used + [Type(e.name, True) for e in entries]
            fields = tuple(rng.choice(pool) for _ in range(rng.randint(0, 2)))
            entries.append(TypeDecl(f"T{i}", fields, sup))
        return TypeTable(entries)

    def signatures(self, tytbl: TypeTable):
        rng = self.rng
        concretes = tytbl.concretes()
        abstracts = [Type(a, False) for a in sorted(tytbl.abstracts)] + [ANY]
        plan = []
        for i in range(rng.randint(2, 5)):
            arity = rng.randint(0, self.cfg.max_arity)
            if arity == 0:
                count = 1
            else:
                count = 1 if rng.random() < 0.4 else rng.randint(1, self.cfg.max_methods_per_name)
            sigs: list = []
            for _ in range(count * 3):
                if len(sigs) == count:
                    break
                sig = tuple(rng.choice(abstracts) if rng.random() < 0.45 else rng.choice(concretes)
                            for _ in range(arity))
                if sig not in sigs:
                    sigs.append(sig)
            plan.append((f"f{i}", sigs))
        return plan

    def body(self, tytbl: TypeTable, cache: InferenceCache, params, callees, back_edges, length,
             main=False) -> tuple:
        """Instructions whose types are tracked with ``cache`` as they are drawn."""
        rng = self.rng
        regs = list(params)
        body: list = []
        call_p = 0.55 if main else 0.35
        for _ in range(length):
            n = len(regs)
            options = ["const"] * 2 + (["reg"] if n else [])
            structs = [Type(e.name, True) for e in tytbl.entries]
            fillable = []
            for s in structs:
                d = tytbl.decl(s.name)
                picks = []
                for ft in d.fields:
                    cands = [r for r in range(n) if subtype(tytbl, regs[r], ft)]
                    if not cands:
                        break
                    picks.append(cands)
                else:
                    fillable.append((s, picks))
            if fillable:
                options += ["new"] * 2
            recvs = [r for r in range(n) if regs[r].concrete and tytbl.decl(regs[r].name)
                     and tytbl.decl(regs[r].name).fields]
            if recvs:
                options += ["field"] * 2
            targets = callees + (back_edges if rng.random() < 0.15 * self.cfg.max_call_depth_bias else [])
            if n and targets and rng.random() < call_p:
                kind = "call"
            else:
                kind = rng.choice(options)
            if kind == "const":
                instr = AssignConst(n, rng.choice([0, 1, 1, 1, 2, -3, 7]))
            elif kind == "reg":
                instr = AssignReg(n, rng.randrange(n))
            elif kind == "new":
                s, picks = rng.choice(fillable)
                instr = New(n, s, tuple(rng.choice(c) for c in picks))
            elif kind == "field":
                r = rng.choice(recvs)
                nf = len(tytbl.decl(regs[r].name).fields)
                instr = GetField(n, r, rng.randrange(nf))
            else:
                instr = self.call(tytbl, regs, targets)
            t = cache.infer_body(params, body + [instr])[-1]
            regs.append(t)
            body.append(instr)
        return tuple(body)

    def call(self, tytbl, regs, targets) -> DispatchCall:
        rng = self.rng
        n = len(regs)

        def cands(sig):
            return [[r for r in range(n) if subtype(tytbl, regs[r], pt)] for pt in sig]

        feasible = [(name, sig) for name, sigs in targets for sig in sigs if all(cands(sig))]
        if feasible and rng.random() < 0.97:
            name, want = rng.choice(feasible)
            args = [rng.choice(c) for c in cands(want)]
        else:
            # occasionally a call that may err at run time
            name, sigs = rng.choice(targets)
            args = [rng.randrange(n) for _ in rng.choice(sigs)]
        ints = [r for r in range(n) if regs[r] == INT]
        guard = rng.choice(ints) if ints and rng.random() < 0.7 else rng.randrange(n)
        alt = rng.randrange(n)
        return DispatchCall(n, guard, name, tuple(args), alt)


def gen_program(cfg: GenConfig) -> tuple[TypeTable, MethodTable]:
    """Deterministic well-formed program for ``cfg.seed``."""
    rng = random.Random(cfg.seed)
    g = _Gen(cfg, rng)
    for _attempt in range(50):
        tytbl = g.types()
        plan = g.signatures(tytbl)
        done: list[Method] = []
        for gi, (name, sigs) in enumerate(plan):
            cache = InferenceCache(tytbl, MethodTable(done))
            callees = plan[:gi]
            back = plan[gi:]
            for sig in sigs:
                length = rng.randint(1, cfg.max_body_len)
                body = g.body(tytbl, cache, sig, callees, back, length)
                done.append(Method(name, sig, body, sig))
        cache = InferenceCache(tytbl, MethodTable(done))
        main_len = rng.randint(2, cfg.max_body_len + 2)
        main_body = g.body(tytbl, cache, (), plan, [], main_len, main=True)
        done.append(Method("main", (), main_body, ()))
        mtbl = MethodTable(done)
        if not validate(tytbl, mtbl):
            return tytbl, mtbl
    raise RuntimeError(f"generator could not produce a well-formed program for seed {cfg.seed}")


# -- differential harness -----------------------------------------------------------


@dataclass
class DiffVerdict:
    match: bool
    mode: str  # "jit" (dispatch vs jit) or "aot" (original vs compiled table)
    left: dict
    right: dict
    step_counts: tuple
    property_failures: list = field(default_factory=list)
    seed: Optional[int] = None
    stats: dict = field(default_factory=dict)

    @property
    def outcome(self) -> str:
        return "Match" if self.match else "Mismatch"


def _same(a: Outcome, b: Outcome) -> bool:
    if a.kind != b.kind or a.steps != b.steps:
        return False
    if a.kind == "finished":
        return a.env == b.env
    return True


def check_compiled_table(tytbl: TypeTable, mtbl: MethodTable, final: MethodTable) -> tuple[list, dict]:
    """Property checks on a table produced by JIT runs; returns (failures, stats)."""
    failures = []
    stats = {"instances": 0, "grounded_instances": 0, "unstable_instances": 0, "grounded_multicall": 0}
    if final.stubs():
        failures.append("stubs: stub left in compiled table")
    if originals(final) != originals(mtbl):
        failures.append("originals: compilation changed original methods")
    diags = validate(tytbl, final)
    if diags:
        failures.append(f"well-formed: {diags[0]}")
    r = max_devirt_table(tytbl, final)
    if not r:
        failures.append(f"max-devirt: {r.witness}")
    r = table_optimizes(tytbl, originals(mtbl), final)
    if not r:
        failures.append(f"table-optimizes: {r.witness}")
    cache = InferenceCache(tytbl, originals(final))
    for m in final.instances():
        if m.is_stub:
            continue
        stats["instances"] += 1
        try:
            rep = classify(tytbl, final, m.name, m.params, cache)
        except InferenceError as exc:
            failures.append(f"classify: {sig_str(m.name, m.params)}: {exc}")
            continue
        stats["grounded_instances"] += rep.grounded
        stats["unstable_instances"] += not rep.stable
        calls = sum(isinstance(i, (DispatchCall, DirectCall)) for i in m.body)
        stats["grounded_multicall"] += rep.grounded and calls >= 2
        if rep.grounded and not fully_devirtualized(m):
            failures.append(f"grounded-devirt: {sig_str(m.name, m.params)} grounded but dispatches")
    return failures, stats


def _callee_stability(tytbl, mtbl, calls, cache) -> list:
    failures = []
    for callee, arg_types in dict.fromkeys(calls):
        try:
            rep = classify(tytbl, mtbl, callee, arg_types, cache)
        except InferenceError as exc:
            failures.append(f"callee-stability: {sig_str(callee, arg_types)}: {exc}")
            continue
        if not rep.stable:
            failures.append(f"callee-stability: {sig_str(callee, arg_types)} called from grounded code is unstable")
    return failures


def diff_test(tytbl: TypeTable, mtbl: MethodTable, entry=("main", ()), fuel: int = 10_000,
              seed: Optional[int] = None) -> DiffVerdict:
    """Run both semantics with soundness instrumentation and check the compiled table."""
    return _diff_runs(tytbl, mtbl, entry, fuel, seed)[0]


def _diff_runs(tytbl, mtbl, entry, fuel, seed):
    cache = InferenceCache(tytbl, originals(mtbl))
    d = run(tytbl, mtbl, entry, fuel, "dispatch", check_soundness=True, cache=cache)
    j = run(tytbl, mtbl, entry, fuel, "jit", check_soundness=True, cache=cache)
    failures = [f"soundness: {v}" for v in d.soundness_violations + j.soundness_violations]
    failures += _callee_stability(tytbl, mtbl, d.grounded_calls + j.grounded_calls, cache)
    table_failures, stats = check_compiled_table(tytbl, mtbl, j.table)
    failures += table_failures
    stats.update(grounded_calls=len(d.grounded_calls) + len(j.grounded_calls))
    ok = _same(d, j) and not failures
    verdict = DiffVerdict(ok, "jit", d.summary(), j.summary(), (d.steps, j.steps), failures, seed,
                          dict(stats, kinds=(d.kind, j.kind)))
    return verdict, d, j


def aot_test(tytbl: TypeTable, mtbl: MethodTable, entry=("main", ()), fuel: int = 10_000,
             seed: Optional[int] = None) -> DiffVerdict:
    """Harvest a compiled table from a JIT run, then run both tables with plain dispatch."""
    cache = InferenceCache(tytbl, originals(mtbl))
    harvested = run(tytbl, mtbl, entry, fuel, "jit", cache=cache).table
    return _aot(tytbl, run(tytbl, mtbl, entry, fuel, "dispatch"), harvested, entry, fuel, seed)


def _aot(tytbl, a, harvested, entry, fuel, seed):
    failures = []
    if harvested.stubs():
        failures.append("stubs: harvested table has stubs")
    b = run(tytbl, harvested, entry, fuel, "dispatch")
    ok = _same(a, b) and not failures
    return DiffVerdict(ok, "aot", a.summary(), b.summary(), (a.steps, b.steps), failures, seed,
                       {"kinds": (a.kind, b.kind), "instances": len(harvested.instances())})


# -- shrinking --------------------------------------------------------------------------


def _renumber(instr, removed: int, params: int):
    """Drop register ``removed``; later registers shift down by one."""
    def fix(r):
        if r < removed:
            return r
        if r == removed:
            return removed - 1
        return r - 1

    t = instr.target - 1
    if isinstance(instr, AssignConst):
        return AssignConst(t, instr.value)
    if isinstance(instr, AssignReg):
        return AssignReg(t, fix(instr.source))
    if isinstance(instr, New):
        return New(t, instr.struct, tuple(map(fix, instr.args)))
    if isinstance(instr, GetField):
        return GetField(t, fix(instr.receiver), instr.index)
    if isinstance(instr, DispatchCall):
        return DispatchCall(t, fix(instr.guard), instr.callee, tuple(map(fix, instr.args)), fix(instr.alt))
    return type(instr)(t, fix(instr.guard), instr.callee, instr.sig, tuple(map(fix, instr.args)), fix(instr.alt))


def shrink_candidates(tytbl: TypeTable, mtbl: MethodTable):
    """Smaller variants of a program; only well-formed ones are yielded."""
    for t2, m2 in _raw_candidates(tytbl, mtbl):
        try:
            if validate(t2, m2):
                continue
        except ValueError:
            continue
        yield t2, m2


def _raw_candidates(tytbl: TypeTable, mtbl: MethodTable):
    methods = list(mtbl)
    for i, m in enumerate(methods):
        if m.name != "main":
            yield tytbl, MethodTable(methods[:i] + methods[i + 1:])
    for i, m in enumerate(methods):
        n = len(m.params)
        for pos in range(len(m.body) - 1, -1, -1):
            if len(m.body) == 1:
                break
            removed = n + pos
            rest = tuple(_renumber(x, removed, n) for x in m.body[pos + 1:])
            body = m.body[:pos] + rest
            yield tytbl, MethodTable(methods[:i] + [Method(m.name, m.params, body, m.origin)] + methods[i + 1:])
    for i in range(len(tytbl.entries)):
        yield TypeTable(tytbl.entries[:i] + tytbl.entries[i + 1:]), mtbl


def shrink(tytbl: TypeTable, mtbl: MethodTable, still_fails: Callable, max_rounds: int = 200):
    """Greedy shrinking; every accepted candidate is well-formed and still fails."""
    for _ in range(max_rounds):
        for t2, m2 in shrink_candidates(tytbl, mtbl):
            if still_fails(t2, m2):
                tytbl, mtbl = t2, m2
                break
        else:
            break
    return tytbl, mtbl


def check_seed(seed: int, fuel: int = 10_000, aot: bool = True, cfg: Optional[GenConfig] = None) -> dict:
    """Generate, run both harnesses, and summarize one seed (picklable result)."""
    cfg = GenConfig(seed=seed) if cfg is None else GenConfig(**{**cfg.__dict__, "seed": seed})
    tytbl, mtbl = gen_program(cfg)
    entry = ("main", ())
    v, d, j = _diff_runs(tytbl, mtbl, entry, fuel, seed)
    out = {"seed": seed, "diff": v}
    if aot:
        # the instrumented runs above double as the reference run and the harvest
        out["aot"] = _aot(tytbl, d, j.table, entry, fuel, seed)
    return out
