"""Subtyping, join, and multiple dispatch over a declared type hierarchy.

The hierarchy has three levels: concrete types, a flat layer of abstract
types, and Any on top.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from .ir import ANY, INT, Method, MethodTable, Sig, Type, TypeTable


class UndeclaredType(ValueError):
    pass


def _check(tytbl: TypeTable, t: Type) -> None:
    if not tytbl.is_declared(t):
        raise UndeclaredType(f"type {t.name} is not declared")


def supertype_of(tytbl: TypeTable, t: Type) -> Optional[Type]:
    """Declared parent of ``t`` (None for Any)."""
    if t == ANY:
        return None
    if t == INT or not t.concrete:
        return ANY
    d = tytbl.decl(t.name)
    if d is None:
        raise UndeclaredType(f"type {t.name} is not declared")
    return d.supertype


def subtype(tytbl: TypeTable, t1: Type, t2: Type) -> bool:
    _check(tytbl, t1)
    _check(tytbl, t2)
    if t1 == t2 or t2 == ANY:
        return True
    return t1.concrete and supertype_of(tytbl, t1) == t2


def subtype_sig(tytbl: TypeTable, s1: Sequence[Type], s2: Sequence[Type]) -> bool:
    return len(s1) == len(s2) and all(subtype(tytbl, a, b) for a, b in zip(s1, s2))


def join(tytbl: TypeTable, t1: Type, t2: Type) -> Type:
    """Least upper bound of two types."""
    _check(tytbl, t1)
    _check(tytbl, t2)
    if t1 == t2:
        return t1
    if t1 == ANY or t2 == ANY:
        return ANY
    if t1.concrete and t2.concrete:
        p1, p2 = supertype_of(tytbl, t1), supertype_of(tytbl, t2)
        return p1 if p1 == p2 else ANY
    if t1.concrete:
        t1, t2 = t2, t1
    # t1 abstract, t2 concrete or abstract (distinct)
    if t2.concrete and supertype_of(tytbl, t2) == t1:
        return t1
    return ANY


@dataclass(frozen=True)
class Undefined:
    """Dispatch failure; ``reason`` is ``"no-applicable"`` or ``"ambiguous"``."""

    reason: str
    candidates: tuple = ()

    def __bool__(self):
        return False


class NotConcrete(ValueError):
    pass


def dispatch(tytbl: TypeTable, mtbl: MethodTable, name: str, arg_types: Sig):
    """Most specific applicable method for concrete ``arg_types``, or ``Undefined``."""
    arg_types = tuple(arg_types)
    slot = mtbl._dispatch_cache.get(id(tytbl))
    if slot is None or slot[0] is not tytbl:
        slot = mtbl._dispatch_cache[id(tytbl)] = (tytbl, {})
    cache = slot[1]
    ck = (name, arg_types)
    hit = cache.get(ck)
    if hit is not None:
        return hit
    for t in arg_types:
        if not t.concrete:
            raise NotConcrete(f"dispatch on non-concrete type {t.name}")
    applicable = [m for m in mtbl.named(name) if subtype_sig(tytbl, arg_types, m.params)]
    if not applicable:
        result = Undefined("no-applicable")
    else:
        best = [m for m in applicable if all(subtype_sig(tytbl, m.params, o.params) for o in applicable)]
        if len(best) == 1:
            result = best[0]
        else:
            result = Undefined("ambiguous", tuple(m.params for m in applicable))
    cache[ck] = result
    return result


def is_applicable(tytbl: TypeTable, method: Method, arg_types: Sig) -> bool:
    return subtype_sig(tytbl, arg_types, method.params)
