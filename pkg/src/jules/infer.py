"""Forward type inference over straight-line method bodies.

Call results are typed from argument types alone.  Return types of concrete
call keys ``(name, concrete arg types)`` are the least solution of the
recursive system formed by all keys reachable from a query, so the answer for
a key never depends on which query first reached it.
"""

from __future__ import annotations

from collections import defaultdict, deque
from typing import Callable, Optional, Sequence

from .ir import (
    ANY,
    INT,
    AssignConst,
    AssignReg,
    DirectCall,
    DispatchCall,
    GetField,
    Key,
    MethodTable,
    New,
    Sig,
    Type,
    TypeTable,
    sig_str,
)
from .typesys import UndeclaredType, dispatch, join, subtype

RegisterTyping = tuple  # tuple[Type, ...]: parameters first, then one per instruction


class InferenceError(Exception):
    """Inference failed: the body is ill-typed (not a runtime error)."""


def _join(tytbl, a: Optional[Type], b: Optional[Type]) -> Optional[Type]:
    # None is the bottom element, only seen while solving recursive keys
    if a is None:
        return b
    if b is None:
        return a
    return join(tytbl, a, b)


class InferenceCache:
    """Memoized inference over a table of original methods.

    One cache per thread; entries are complete solutions and never change.
    """

    def __init__(self, tytbl: TypeTable, table: MethodTable):
        self.tytbl = tytbl
        self.table = table
        self._ret: dict[Key, Type] = {}
        self._failed: dict[Key, str] = {}
        self._typing: dict[Key, RegisterTyping] = {}
        self._bodies: dict = {}  # (arg types, id(body)) -> (body, typing or error message)

    # -- public API --------------------------------------------------------

    def infer_body(self, arg_types: Sequence[Type], body) -> RegisterTyping:
        """Register typing for ``body`` run with ``arg_types`` in registers 0..n-1."""
        arg_types = tuple(arg_types)
        slot = (arg_types, id(body))
        hit = self._bodies.get(slot)
        if hit is None or hit[0] is not body:
            try:
                res = arg_types + tuple(self._type_body(arg_types, body, self._solved_return, strict=True))
            except InferenceError as exc:
                res = str(exc)
            hit = self._bodies[slot] = (body, res)
        if isinstance(hit[1], str):
            raise InferenceError(hit[1])
        return hit[1]

    def infer_method(self, name: str, arg_types: Sequence[Type]) -> RegisterTyping:
        """Typing of the original that a call ``name(arg_types)`` runs.

        Concrete argument types resolve through dispatch; otherwise the
        original declared at exactly ``arg_types`` is used.
        """
        arg_types = tuple(arg_types)
        if all(t.concrete for t in arg_types):
            target = dispatch(self.tytbl, self.table, name, arg_types)
            if not target:
                raise InferenceError(f"no method to infer for {sig_str(name, arg_types)} ({target.reason})")
            key = (name, arg_types)
            self._solve(key)
            if key in self._failed:
                raise InferenceError(self._failed[key])
            return self._typing[key]
        m = self.table.get(name, arg_types)
        if m is None or not m.is_original:
            raise InferenceError(f"no original {sig_str(name, arg_types)}")
        return self.infer_body(arg_types, m.body)

    def return_type(self, name: str, arg_types: Sequence[Type]) -> Type:
        return self.infer_method(name, arg_types)[-1]

    # -- solving -------------------------------------------------------------

    def _solved_return(self, key: Key) -> Type:
        self._solve(key)
        if key in self._failed:
            raise InferenceError(self._failed[key])
        return self._ret[key]

    def _body_of(self, key: Key):
        return dispatch(self.tytbl, self.table, *key).body

    def _solve(self, root: Key) -> None:
        if root in self._ret or root in self._failed:
            return
        approx: dict[Key, Optional[Type]] = {root: None}
        callers: dict[Key, set] = defaultdict(set)
        work = deque([root])
        queued = {root}
        while work:
            key = work.popleft()
            queued.discard(key)

            def lookup(ck: Key, _caller=key) -> Optional[Type]:
                if ck in self._ret:
                    return self._ret[ck]
                if ck in self._failed:
                    return ANY
                callers[ck].add(_caller)
                if ck not in approx:
                    approx[ck] = None
                    work.append(ck)
                    queued.add(ck)
                return approx[ck]

            try:
                types = self._type_body(key[1], self._body_of(key), lookup, strict=False)
                new = types[-1] if types else None
            except InferenceError:
                new = ANY  # reported by the strict pass below
            if new != approx[key]:
                approx[key] = new
                for c in callers[key]:
                    if c not in queued:
                        work.append(c)
                        queued.add(c)

        for key, t in approx.items():
            self._ret[key] = t
        failed = {}
        for key in approx:
            try:
                types = self._type_body(key[1], self._body_of(key), self._checked_return, strict=True)
                self._typing[key] = key[1] + tuple(types)
            except InferenceError as exc:
                failed[key] = f"{sig_str(*key)}: {exc}"
        # a failing callee makes its callers fail too
        pending = list(failed)
        while pending:
            k = pending.pop()
            for c in callers.get(k, ()):
                if c not in failed:
                    failed[c] = f"{sig_str(*c)}: callee {failed[k]}"
                    pending.append(c)
        for key, msg in failed.items():
            self._ret.pop(key, None)
            self._typing.pop(key, None)
            self._failed[key] = msg

    def _checked_return(self, key: Key) -> Type:
        if key in self._failed:
            raise InferenceError(self._failed[key])
        if key not in self._ret:
            self._solve(key)
            return self._solved_return(key)
        return self._ret[key]

    # -- per-instruction rules ---------------------------------------------

    def _type_body(self, arg_types: Sig, body, callee_return: Callable, *, strict: bool) -> list:
        try:
            return self._type_instrs(arg_types, body, callee_return, strict)
        except UndeclaredType as exc:
            raise InferenceError(str(exc)) from None

    def _type_instrs(self, arg_types: Sig, body, callee_return: Callable, strict: bool) -> list:
        tytbl = self.tytbl
        regs: list = list(arg_types)
        out = []

        def read(r: int):
            if r < 0 or r >= len(regs):
                raise InferenceError(f"register %{r} read before assignment")
            return regs[r]

        for instr in body:
            if instr.target != len(regs):
                raise InferenceError(f"instruction assigns %{instr.target}, expected %{len(regs)}")
            if isinstance(instr, AssignConst):
                t = INT
            elif isinstance(instr, AssignReg):
                t = read(instr.source)
            elif isinstance(instr, New):
                t = instr.struct
                decl = tytbl.decl(t.name)
                if decl is None or not t.concrete:
                    raise InferenceError(f"new of undeclared struct {t.name}")
                if len(decl.fields) != len(instr.args):
                    raise InferenceError(f"new {t.name} with {len(instr.args)} args, expects {len(decl.fields)}")
                for k, ft in zip(instr.args, decl.fields):
                    at = read(k)
                    if strict and (at is None or not subtype(tytbl, at, ft)):
                        raise InferenceError(f"field of {t.name} expects {ft.name}, got {at}")
            elif isinstance(instr, GetField):
                rt = read(instr.receiver)
                t = self._field_type(rt, instr.index, strict)
            elif isinstance(instr, DispatchCall):
                for r in (instr.guard, instr.alt):
                    read(r)
                ats = tuple(read(k) for k in instr.args)
                if any(a is None for a in ats):
                    r = None
                elif all(a.concrete for a in ats) and dispatch(tytbl, self.table, instr.callee, ats):
                    r = callee_return((instr.callee, ats))
                else:
                    r = ANY
                t = _join(tytbl, r, read(instr.alt))
            elif isinstance(instr, DirectCall):
                read(instr.guard)
                for k in instr.args:
                    read(k)
                key = (instr.callee, tuple(instr.sig))
                if dispatch(tytbl, self.table, *key):
                    r = callee_return(key)
                elif strict:
                    raise InferenceError(f"direct call target {sig_str(*key)} has no original")
                else:
                    r = ANY
                t = _join(tytbl, r, read(instr.alt))
            else:  # pragma: no cover - closed union
                raise InferenceError(f"unknown instruction {instr!r}")
            regs.append(t)
            out.append(t)
        return out

    def _field_type(self, rt: Optional[Type], index: int, strict: bool) -> Optional[Type]:
        if rt is None:
            return None
        decl = self.tytbl.decl(rt.name) if rt.concrete else None
        if decl is None or not 0 <= index < len(decl.fields):
            if strict:
                if decl is None:
                    raise InferenceError(f"field access on non-struct type {rt.name}")
                raise InferenceError(f"field {index} out of bounds for {rt.name}")
            return ANY
        return decl.fields[index]


def infer_body(tytbl: TypeTable, orig_table: MethodTable, arg_types, body,
               memo: Optional[InferenceCache] = None) -> RegisterTyping:
    memo = memo or InferenceCache(tytbl, orig_table)
    return memo.infer_body(arg_types, body)


def infer_method(tytbl: TypeTable, orig_table: MethodTable, name: str, arg_types,
                 memo: Optional[InferenceCache] = None) -> RegisterTyping:
    memo = memo or InferenceCache(tytbl, orig_table)
    return memo.infer_method(name, arg_types)
