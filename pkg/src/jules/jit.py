"""Specializing compiler: method instances at concrete types, with devirtualized calls."""

from __future__ import annotations

from typing import Optional

from .infer import InferenceCache
from .ir import DirectCall, DispatchCall, Instruction, Method, MethodTable, Sig, TypeTable, originals, sig_str
from .typesys import dispatch


class CompilationError(AssertionError):
    """An internal invariant of compilation broke; impossible on well-formed tables."""


def jit_compile(tytbl: TypeTable, mtbl: MethodTable, name: str, arg_types: Sig,
                cache: Optional[InferenceCache] = None) -> MethodTable:
    """Extend ``mtbl`` with an instance of ``name`` specialized to ``arg_types``.

    Returns ``mtbl`` itself when the key is already present (including when the
    dispatch target is an original declared at exactly these types).
    """
    arg_types = tuple(arg_types)
    if (name, arg_types) in mtbl:
        return mtbl
    target = dispatch(tytbl, mtbl, name, arg_types)
    if not target:
        raise CompilationError(f"jit of {sig_str(name, arg_types)} with undefined dispatch")
    if cache is None:
        cache = InferenceCache(tytbl, originals(mtbl))
    return _compile_instance(tytbl, mtbl, name, arg_types, target, cache)


def _compile_instance(tytbl, mtbl, name, arg_types, target: Method, cache) -> MethodTable:
    key = (name, arg_types)
    if key in mtbl or not target.is_original or target.params == arg_types:
        raise CompilationError(f"bad instance request {sig_str(*key)}")
    typing = cache.infer_body(arg_types, target.body)
    mtbl = mtbl.with_method(Method(name, arg_types, None, target.params))  # stub breaks cycles
    body = []
    for instr in target.body:
        new_instr, mtbl = translate_instr(tytbl, typing, instr, mtbl, cache)
        body.append(new_instr)
    return mtbl.with_method(Method(name, arg_types, tuple(body), target.params))


def translate_instr(tytbl: TypeTable, typing, instr: Instruction, mtbl: MethodTable,
                    cache: InferenceCache) -> tuple[Instruction, MethodTable]:
    """Rewrite one instruction of an instance body under ``typing``.

    Dispatched calls whose argument registers are all concretely typed become
    direct calls, compiling the callee instance first when needed.  A call
    that would err at these types stays dispatched.
    """
    if not isinstance(instr, DispatchCall):
        return instr, mtbl
    arg_types = tuple(typing[k] for k in instr.args)
    if not all(t.concrete for t in arg_types):
        return instr, mtbl
    direct = DirectCall(instr.target, instr.guard, instr.callee, arg_types, instr.args, instr.alt)
    if (instr.callee, arg_types) in mtbl:
        return direct, mtbl
    target = dispatch(tytbl, mtbl, instr.callee, arg_types)
    if not target:
        return instr, mtbl
    mtbl = _compile_instance(tytbl, mtbl, instr.callee, arg_types, target, cache)
    return direct, mtbl
