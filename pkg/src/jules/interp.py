"""Small-step semantics over configurations of frames and a method table.

The same machine runs both semantics; they differ only in the JIT strategy
applied at dispatched calls (identity for plain dispatch).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

from .infer import InferenceCache, InferenceError
from .ir import (
    ANY,
    INT,
    AssignConst,
    AssignReg,
    DirectCall,
    DispatchCall,
    GetField,
    MethodTable,
    New,
    Sig,
    Type,
    TypeTable,
    originals,
    sig_str,
)
from .typesys import dispatch, subtype


@dataclass(frozen=True)
class StructVal:
    type: Type
    fields: tuple

    def __str__(self):
        return f"{self.type.name}({', '.join(map(format_value, self.fields))})"


def format_value(v) -> str:
    return str(v)


def typeof(v) -> Type:
    return v.type if v.__class__ is StructVal else INT


typeof_value = typeof


@dataclass
class Frame:
    env: list
    body: tuple
    pc: int = 0
    name: str = ""
    origin: Sig = ()
    typing: Optional[tuple] = None  # inferred register types, when instrumented
    grounded: bool = False


@dataclass
class Configuration:
    stack: list  # bottom first; stack[-1] is the top frame
    table: MethodTable
    steps: int = 0


# -- step results ------------------------------------------------------------


@dataclass(slots=True)  # allocated every step; frozen init is slower
class Stepped:
    rule: str
    config: Configuration


@dataclass(frozen=True)
class Finished:
    env: tuple


@dataclass(frozen=True)
class Erred:
    callee: str
    arg_types: Sig
    reason: str


@dataclass(frozen=True)
class Wrong:
    reason: str


def identity_jit(tytbl, mtbl, name, arg_types):
    return mtbl


def _jit_compiler(cache: InferenceCache):
    from .jit import jit_compile

    def strategy(tytbl, mtbl, name, arg_types):
        return jit_compile(tytbl, mtbl, name, arg_types, cache)

    return strategy


@dataclass
class Outcome:
    kind: str  # "finished" | "erred" | "wrong" | "fuel"
    steps: int
    env: Optional[tuple] = None
    table: Optional[MethodTable] = None
    detail: str = ""
    soundness_violations: list = field(default_factory=list)
    grounded_calls: list = field(default_factory=list)  # (callee, arg types) made from grounded activations
    trace: list = field(default_factory=list)

    @property
    def value(self):
        return self.env[-1] if self.env else None

    def summary(self) -> dict:
        d = {"kind": self.kind, "steps": self.steps}
        if self.env is not None:
            d["env"] = [format_value(v) for v in self.env]
        if self.detail:
            d["detail"] = self.detail
        return d


class Machine:
    """Executes one program; owns its configuration exclusively."""

    def __init__(self, tytbl: TypeTable, mtbl: MethodTable, *, jit: Callable = identity_jit,
                 check_soundness: bool = False, cache: Optional[InferenceCache] = None,
                 trace: Optional[list] = None):
        self.tytbl = tytbl
        self.jit = jit
        self.check_soundness = check_soundness
        self.cache = cache
        self.config = Configuration([], mtbl)
        self.violations: list = []
        self.grounded_calls: list = []
        self.trace = trace
        self.rule = ""

    # -- frames -------------------------------------------------------------

    def _frame(self, method, args: list) -> Frame:
        f = Frame(list(args), method.body, 0, method.name, method.origin)
        if self.check_soundness:
            arg_types = tuple(typeof(v) for v in args)
            orig = self.cache.table.get(method.name, method.origin)
            try:
                f.typing = self.cache.infer_body(arg_types, orig.body)
            except InferenceError as exc:
                self.violations.append(f"{sig_str(method.name, arg_types)}: inference failed: {exc}")
                f.typing = None
            else:
                f.grounded = all(t.concrete for t in f.typing)
        return f

    def _check(self, frame: Frame, reg: int) -> None:
        if frame.typing is None:
            return
        v = frame.env[reg]
        want = frame.typing[reg]
        have = typeof(v)
        if have is want or want == ANY or have == want:
            return
        if not subtype(self.tytbl, have, want):
            self.violations.append(
                f"step {self.config.steps}: {sig_str(frame.name, frame.typing[:len(frame.origin)])} "
                f"%{reg}={format_value(v)} not <: {frame.typing[reg].name}")

    def start(self, name: str, args: list):
        """Push the entry frame.  Returns ``Erred``/``Wrong`` if the entry cannot be called."""
        cfg = self.config
        arg_types = tuple(typeof(v) for v in args)
        if not cfg.table.has_name(name):
            return Wrong(f"unknown entry {name}")
        if not dispatch(self.tytbl, cfg.table, name, arg_types):
            return Erred(name, arg_types, dispatch(self.tytbl, cfg.table, name, arg_types).reason)
        cfg.table = self.jit(self.tytbl, cfg.table, name, arg_types)
        target = dispatch(self.tytbl, cfg.table, name, arg_types)
        if target.is_stub:
            return Wrong(f"entry {sig_str(name, arg_types)} is a stub")
        frame = self._frame(target, args)
        cfg.stack.append(frame)
        if self.check_soundness:
            for r in range(len(args)):
                self._check(frame, r)
        return None

    # -- one step -------------------------------------------------------------

    def step(self):
        """One rule: ``Stepped``, or the terminal ``Finished``/``Erred``/``Wrong``."""
        r = self._step()
        return Stepped(self.rule, self.config) if r is None else r

    def _step(self):
        # None means a rule fired; self.rule names it
        cfg = self.config
        stack = cfg.stack
        frame = stack[-1]
        env = frame.env
        if frame.pc == len(frame.body):
            if len(stack) == 1:
                return Finished(tuple(env))
            stack.pop()
            caller = stack[-1]
            caller.env.append(env[-1])
            caller.pc += 1
            return self._assigned("Ret", caller)

        instr = frame.body[frame.pc]
        if instr.target != len(env):
            return Wrong(f"instruction assigns %{instr.target} but next register is %{len(env)}")
        kind = type(instr)
        try:
            if kind is AssignConst:
                env.append(instr.value)
                frame.pc += 1
                return self._assigned("Prim", frame)
            if kind is AssignReg:
                env.append(env[instr.source])
                frame.pc += 1
                return self._assigned("Reg", frame)
            if kind is New:
                env.append(StructVal(instr.struct, tuple(env[k] for k in instr.args)))
                frame.pc += 1
                return self._assigned("New", frame)
            if kind is GetField:
                v = env[instr.receiver]
                if not isinstance(v, StructVal):
                    return Wrong("field on non-struct")
                if not 0 <= instr.index < len(v.fields):
                    return Wrong("field index out of bounds")
                env.append(v.fields[instr.index])
                frame.pc += 1
                return self._assigned("Field", frame)
            guard = env[instr.guard]
            alt = env[instr.alt]
            args = [env[k] for k in instr.args]
        except IndexError:
            return Wrong("register read out of range")

        if guard.__class__ is int and guard == 0:
            env.append(alt)
            frame.pc += 1
            return self._assigned("False1" if kind is DispatchCall else "False2", frame)

        arg_types = tuple(typeof(v) for v in args)
        if kind is DispatchCall:
            if not cfg.table.has_name(instr.callee):
                return Wrong(f"unknown callee {instr.callee}")
            found = dispatch(self.tytbl, cfg.table, instr.callee, arg_types)
            if not found:
                return Erred(instr.callee, arg_types, found.reason)
            table = self.jit(self.tytbl, cfg.table, instr.callee, arg_types)
            if table is not cfg.table:
                cfg.table = table
                found = dispatch(self.tytbl, table, instr.callee, arg_types)
            target = found
            rule = "Disp"
        elif kind is DirectCall:
            target = cfg.table.get(instr.callee, instr.sig)
            if target is None:
                return Wrong(f"direct call target {sig_str(instr.callee, instr.sig)} absent")
            rule = "Direct"
        else:  # pragma: no cover
            return Wrong(f"unknown instruction {instr!r}")
        if target.is_stub:
            return Wrong(f"call into stub {sig_str(target.name, target.params)}")
        if self.check_soundness and frame.grounded:
            self.grounded_calls.append((instr.callee, arg_types))
        callee = self._frame(target, args)
        stack.append(callee)
        cfg.steps += 1
        if self.check_soundness:
            for r in range(len(args)):
                self._check(callee, r)
        if self.trace is not None:
            self.trace.append(f"step {cfg.steps} {rule} depth={len(stack)} -> {sig_str(target.name, target.params)}")
        self.rule = rule
        return None

    def _assigned(self, rule: str, frame: Frame):
        cfg = self.config
        cfg.steps += 1
        self.rule = rule
        if not self.check_soundness and self.trace is None:
            return None
        reg = len(frame.env) - 1
        if self.check_soundness:
            self._check(frame, reg)
        if self.trace is not None:
            self.trace.append(
                f"step {cfg.steps} {rule} depth={len(cfg.stack)} %{reg}={format_value(frame.env[reg])}")
        return None


def step(machine: Machine):
    """Advance ``machine`` by one rule; see ``Machine.step``."""
    return machine.step()


def run(tytbl: TypeTable, mtbl: MethodTable, entry=("main", ()), fuel: int = 100_000,
        semantics: str = "dispatch", check_soundness: bool = False,
        cache: Optional[InferenceCache] = None, trace: Optional[list] = None) -> Outcome:
    """Run ``entry`` = (name, argument values) for at most ``fuel`` steps.

    JIT compilation inside a dispatched call costs no fuel, so both semantics
    count steps identically.
    """
    if semantics not in ("dispatch", "jit"):
        raise ValueError(f"unknown semantics {semantics!r}")
    if cache is None and (check_soundness or semantics == "jit"):
        cache = InferenceCache(tytbl, originals(mtbl))
    strategy = identity_jit if semantics == "dispatch" else _jit_compiler(cache)
    m = Machine(tytbl, mtbl, jit=strategy, check_soundness=check_soundness, cache=cache, trace=trace)
    name, args = entry
    res = m.start(name, list(args))
    cfg, advance = m.config, m._step
    while res is None:
        if cfg.steps >= fuel:
            top = cfg.stack[-1]
            # a run that finishes exactly at the fuel limit still finishes
            if len(cfg.stack) == 1 and top.pc == len(top.body):
                res = Finished(tuple(top.env))
            else:
                res = "fuel"
            break
        res = advance()
    cfg = m.config
    out = Outcome("fuel", cfg.steps, table=cfg.table, soundness_violations=m.violations,
                  grounded_calls=m.grounded_calls, trace=trace if trace is not None else [])
    if isinstance(res, Finished):
        out.kind, out.env = "finished", res.env
    elif isinstance(res, Erred):
        out.kind = "erred"
        out.detail = f"{sig_str(res.callee, res.arg_types)}: {res.reason}"
    elif isinstance(res, Wrong):
        out.kind, out.detail = "wrong", res.reason
    return out
