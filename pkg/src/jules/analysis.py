"""Stability and groundedness classification, devirtualization checks, census."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .infer import InferenceCache, InferenceError
from .ir import (
    DirectCall,
    DispatchCall,
    Instruction,
    Method,
    MethodTable,
    Sig,
    Type,
    TypeTable,
    originals,
    sig_str,
)
from .typesys import dispatch


@dataclass
class StabilityReport:
    method: str
    arg_types: Sig
    stable: bool
    grounded: bool
    return_type: Type
    register_types: tuple
    per_register_concrete: list


@dataclass
class CensusReport:
    instance_count: int
    stable_fraction: float
    grounded_fraction: float
    zero_denominator: bool
    per_instance: list = field(default_factory=list)
    failed: list = field(default_factory=list)  # (name, sig, message)


def classify(tytbl: TypeTable, mtbl: MethodTable, name: str, arg_types,
             cache: Optional[InferenceCache] = None) -> StabilityReport:
    """Stability/groundedness of the original that ``name(arg_types)`` runs.

    Concrete ``arg_types`` go through dispatch over the originals, so an
    instance is judged by its original.  Non-concrete types name a declared
    original directly.  Raises ``InferenceError`` on ill-formed input.
    """
    cache = cache or InferenceCache(tytbl, originals(mtbl))
    typing = cache.infer_method(name, tuple(arg_types))
    concrete = [t.concrete for t in typing]
    return StabilityReport(name, tuple(arg_types), typing[-1].concrete, all(concrete),
                           typing[-1], typing, concrete)


# -- maximal devirtualization ---------------------------------------------------


def max_devirt_instr(typing, mtbl: MethodTable, instr: Instruction, tytbl: Optional[TypeTable] = None) -> bool:
    """True if ``instr`` holds no dispatched call that ``typing`` could resolve.

    With ``tytbl`` given, a dispatched call at concrete types whose dispatch is
    undefined in ``mtbl`` also counts: it errs at run time and cannot be
    devirtualized.
    """
    if isinstance(instr, DispatchCall):
        arg_types = tuple(typing[k] for k in instr.args)
        if not all(t.concrete for t in arg_types):
            return True
        if tytbl is not None and (instr.callee, arg_types) not in mtbl:
            return not dispatch(tytbl, mtbl, instr.callee, arg_types)
        return False
    if isinstance(instr, DirectCall):
        arg_types = tuple(typing[k] for k in instr.args)
        return arg_types == tuple(instr.sig) and (instr.callee, tuple(instr.sig)) in mtbl
    return True


@dataclass
class Witness:
    method: str
    arg_types: Sig
    index: int
    reason: str

    def __str__(self):
        return f"{sig_str(self.method, self.arg_types)} instruction {self.index}: {self.reason}"


class CheckResult:
    """Boolean verdict carrying the first failing location, if any."""

    def __init__(self, witness: Optional[Witness] = None):
        self.witness = witness

    def __bool__(self):
        return self.witness is None

    def __repr__(self):
        return "CheckResult(ok)" if self.witness is None else f"CheckResult({self.witness})"


def max_devirt_table(tytbl: TypeTable, mtbl: MethodTable) -> CheckResult:
    """Every non-stub instance is maximally devirtualized under freshly inferred types."""
    orig = originals(mtbl)
    cache = InferenceCache(tytbl, orig)
    for m in mtbl.instances():
        if m.is_stub:
            continue
        source = orig.get(m.name, m.origin)
        if source is None:
            return CheckResult(Witness(m.name, m.params, -1, "origin missing"))
        try:
            typing = cache.infer_body(m.params, source.body)
        except InferenceError as exc:
            return CheckResult(Witness(m.name, m.params, -1, f"inference failed: {exc}"))
        for i, instr in enumerate(m.body):
            if not max_devirt_instr(typing, mtbl, instr, tytbl):
                return CheckResult(Witness(m.name, m.params, i, "resolvable dispatched call"))
    return CheckResult()


def fully_devirtualized(method: Method) -> bool:
    return not any(isinstance(i, DispatchCall) for i in method.body)


# -- optimization relation -------------------------------------------------------


def _optimizes_instr(tytbl, orig: MethodTable, opt: MethodTable, typing, src: Instruction, dst: Instruction) -> bool:
    if src == dst:
        return True
    if not (isinstance(src, DispatchCall) and isinstance(dst, DirectCall)):
        return False
    if (src.target, src.guard, src.callee, src.args, src.alt) != (dst.target, dst.guard, dst.callee, dst.args, dst.alt):
        return False
    arg_types = tuple(typing[k] for k in src.args)
    if tuple(dst.sig) != arg_types or not all(t.concrete for t in arg_types):
        return False
    entry = opt.get(dst.callee, arg_types)
    if entry is None:
        return False
    resolved = dispatch(tytbl, orig, src.callee, arg_types)
    return bool(resolved) and resolved.params == entry.origin


def table_optimizes(tytbl: TypeTable, orig: MethodTable, opt: MethodTable) -> CheckResult:
    """``opt`` keeps exactly the originals of ``orig`` and its instances optimize them."""
    if originals(opt) != orig:
        return CheckResult(Witness("", (), -1, "original methods differ"))
    cache = InferenceCache(tytbl, orig)
    for m in opt.instances():
        if m.is_stub:
            continue
        source = orig.get(m.name, m.origin)
        if source is None:
            return CheckResult(Witness(m.name, m.params, -1, "origin missing"))
        try:
            typing = cache.infer_body(m.params, source.body)
        except InferenceError as exc:
            return CheckResult(Witness(m.name, m.params, -1, f"inference failed: {exc}"))
        if len(source.body) != len(m.body):
            return CheckResult(Witness(m.name, m.params, -1, "body length differs"))
        for i, (src, dst) in enumerate(zip(source.body, m.body)):
            if not _optimizes_instr(tytbl, orig, opt, typing, src, dst):
                return CheckResult(Witness(m.name, m.params, i, "instruction does not optimize original"))
    return CheckResult()


# -- census -----------------------------------------------------------------------


def census(tytbl: TypeTable, mtbl: MethodTable) -> CensusReport:
    cache = InferenceCache(tytbl, originals(mtbl))
    reports, failed = [], []
    for m in mtbl.instances():
        if m.is_stub:
            continue
        try:
            reports.append(classify(tytbl, mtbl, m.name, m.params, cache))
        except InferenceError as exc:
            failed.append((m.name, m.params, str(exc)))
    n = len(reports)
    if n == 0:
        return CensusReport(len(failed), 1.0, 1.0, True, reports, failed)
    return CensusReport(n + len(failed), sum(r.stable for r in reports) / n, sum(r.grounded for r in reports) / n,
                        False, reports, failed)
