"""Core data model: types, instructions, methods, tables, and the well-formedness check."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Tuple, Union


@dataclass(frozen=True)
class Type:
    name: str
    concrete: bool
    _hash: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_hash", hash((self.name, self.concrete)))

    def __hash__(self) -> int:  # types key every table and cache
        return self._hash

    def __str__(self) -> str:
        return self.name

    def __repr__(self) -> str:
        return f"{'C' if self.concrete else 'A'}:{self.name}"


INT = Type("Int", True)
ANY = Type("Any", False)
BUILTIN = {"Int": INT, "Any": ANY}

Sig = Tuple[Type, ...]
Key = Tuple[str, Sig]


@dataclass(frozen=True)
class TypeDecl:
    name: str
    fields: Tuple[Type, ...]
    supertype: Type


class TypeTable:
    """Immutable list of ``C(fields) <: A`` declarations.

    Abstract types are implicit: every supertype named by some entry, plus Any.
    """

    def __init__(self, entries: Iterable[TypeDecl] = ()):
        self.entries: Tuple[TypeDecl, ...] = tuple(entries)
        self._by_name = {}
        for e in self.entries:
            self._by_name.setdefault(e.name, e)
        self.abstracts = frozenset(e.supertype.name for e in self.entries if not e.supertype.concrete)

    def __eq__(self, other):
        return isinstance(other, TypeTable) and self.entries == other.entries

    def __hash__(self):
        return hash(self.entries)

    def __repr__(self):
        return f"TypeTable({list(self.entries)!r})"

    def __len__(self):
        return len(self.entries)

    def decl(self, name: str) -> Optional[TypeDecl]:
        return self._by_name.get(name)

    def is_declared(self, t: Type) -> bool:
        if t == INT or t == ANY:
            return True
        if t.concrete:
            return t.name in self._by_name
        return t.name in self.abstracts

    def concretes(self) -> list[Type]:
        return [INT] + [Type(e.name, True) for e in self.entries]

    def all_types(self) -> list[Type]:
        return self.concretes() + [Type(a, False) for a in sorted(self.abstracts)] + [ANY]


# --- instructions -----------------------------------------------------------


@dataclass(frozen=True)
class AssignConst:
    target: int
    value: int


@dataclass(frozen=True)
class AssignReg:
    target: int
    source: int


@dataclass(frozen=True)
class New:
    target: int
    struct: Type
    args: Tuple[int, ...]


@dataclass(frozen=True)
class GetField:
    target: int
    receiver: int
    index: int


@dataclass(frozen=True)
class DispatchCall:
    target: int
    guard: int
    callee: str
    args: Tuple[int, ...]
    alt: int


@dataclass(frozen=True)
class DirectCall:
    target: int
    guard: int
    callee: str
    sig: Sig
    args: Tuple[int, ...]
    alt: int


Instruction = Union[AssignConst, AssignReg, New, GetField, DispatchCall, DirectCall]


def reads(instr: Instruction) -> Tuple[int, ...]:
    """Registers an instruction reads, in operand order."""
    if isinstance(instr, AssignConst):
        return ()
    if isinstance(instr, AssignReg):
        return (instr.source,)
    if isinstance(instr, New):
        return instr.args
    if isinstance(instr, GetField):
        return (instr.receiver,)
    return (instr.guard, *instr.args, instr.alt)


def types_in(instr: Instruction) -> Tuple[Type, ...]:
    if isinstance(instr, New):
        return (instr.struct,)
    if isinstance(instr, DirectCall):
        return instr.sig
    return ()


# --- methods and tables -----------------------------------------------------


@dataclass(frozen=True)
class Method:
    name: str
    params: Sig
    body: Optional[Tuple[Instruction, ...]]  # None marks a compilation stub
    origin: Sig

    @property
    def key(self) -> Key:
        return (self.name, self.params)

    @property
    def is_original(self) -> bool:
        return self.params == self.origin

    @property
    def is_stub(self) -> bool:
        return self.body is None


def original(name: str, params: Iterable[Type], body: Iterable[Instruction]) -> Method:
    params = tuple(params)
    return Method(name, params, tuple(body), params)


def sig_str(name: str, sig: Iterable[Type]) -> str:
    return f"{name}({', '.join(t.name for t in sig)})"


class MethodTable:
    """A collection of methods keyed by ``(name, params)``.

    Tables are values: ``with_method`` returns a new table and leaves the
    receiver untouched.  Duplicate keys are representable so that ``validate``
    can report them; lookups see the first occurrence.
    """

    __slots__ = ("_methods", "_index", "_by_name", "_dispatch_cache")

    def __init__(self, methods: Iterable[Method] = ()):
        self._methods: Tuple[Method, ...] = tuple(methods)
        self._index: dict[Key, Method] = {}
        self._by_name: dict[str, list[Method]] = {}
        for m in self._methods:
            if m.key in self._index:
                continue
            self._index[m.key] = m
            self._by_name.setdefault(m.name, []).append(m)
        self._dispatch_cache: dict = {}

    def __iter__(self) -> Iterator[Method]:
        return iter(self._methods)

    def __len__(self) -> int:
        return len(self._methods)

    def __contains__(self, key: Key) -> bool:
        return key in self._index

    def __eq__(self, other):
        if not isinstance(other, MethodTable):
            return NotImplemented
        return sorted(self._methods, key=_method_order) == sorted(other._methods, key=_method_order)

    def __repr__(self):
        return f"MethodTable({len(self)} methods)"

    def get(self, name: str, sig: Sig) -> Optional[Method]:
        return self._index.get((name, tuple(sig)))

    def named(self, name: str) -> list[Method]:
        return self._by_name.get(name, [])

    def names(self) -> list[str]:
        return list(self._by_name)

    def has_name(self, name: str) -> bool:
        return name in self._by_name

    def duplicates(self) -> list[Method]:
        seen, dups = set(), []
        for m in self._methods:
            if m.key in seen:
                dups.append(m)
            seen.add(m.key)
        return dups

    def with_method(self, method: Method) -> "MethodTable":
        """Add ``method``, or replace the entry with the same key."""
        if method.key in self._index:
            return MethodTable(method if m.key == method.key else m for m in self._methods)
        return MethodTable(self._methods + (method,))

    def instances(self) -> list[Method]:
        return [m for m in self._methods if not m.is_original]

    def stubs(self) -> list[Method]:
        return [m for m in self._methods if m.is_stub]


def _method_order(m: Method):
    return (m.name, tuple(t.name for t in m.params), tuple(t.name for t in m.origin), repr(m.body))


def originals(mtbl: MethodTable) -> MethodTable:
    """The sub-table of source methods (signature equals origin signature)."""
    if all(m.is_original for m in mtbl):
        return mtbl
    return MethodTable(m for m in mtbl if m.is_original)


def lookup_exact(mtbl: MethodTable, name: str, sig: Iterable[Type]) -> Optional[Method]:
    return mtbl.get(name, tuple(sig))


# --- well-formedness --------------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    where: str = ""

    def __str__(self):
        return f"{self.where}: {self.message}" if self.where else self.message


def validate(tytbl: TypeTable, mtbl: MethodTable, *, allow_stubs: bool = False) -> list[Diagnostic]:
    """Check a program for well-formedness; an empty list means well-formed."""
    from .typesys import subtype_sig  # local: typesys imports ir

    diags: list[Diagnostic] = []

    def report(code, message, where=""):
        diags.append(Diagnostic(code, message, where))

    # type table
    seen = set()
    for e in tytbl.entries:
        where = f"type {e.name}"
        if e.name in BUILTIN:
            report("builtin-redeclared", f"predefined type {e.name} cannot be declared", where)
        if e.name in seen:
            report("duplicate-type", f"type {e.name} declared twice", where)
        seen.add(e.name)
        if e.supertype.concrete or e.supertype.name in seen or tytbl.decl(e.supertype.name):
            report("bad-supertype", f"supertype {e.supertype.name} must be abstract", where)
        for ft in e.fields:
            if not tytbl.is_declared(ft):
                report("undeclared-type", f"field type {ft.name} is not declared", where)

    # item 1
    main = mtbl.get("main", ())
    if main is None or not main.is_original:
        report("missing-main", "missing entry method main()")

    structural_ok = True
    for m in mtbl:
        where = sig_str(m.name, m.params)
        # item 2
        bad = [t for t in (*m.params, *m.origin) if not tytbl.is_declared(t)]
        for instr in m.body or ():
            for t in types_in(instr):
                if not tytbl.is_declared(t) or not t.concrete:
                    bad.append(t)
        for t in bad:
            report("undeclared-type", f"type {t.name} is not declared", where)
            structural_ok = False
        if m.is_stub:
            if not allow_stubs:
                report("stub", "stub method in table", where)
            continue
        # item 3
        n = len(m.params)
        for pos, instr in enumerate(m.body):
            expect = n + pos
            if instr.target != expect:
                report("register-numbering", f"instruction {pos} assigns %{instr.target}, expected %{expect}", where)
                structural_ok = False
            if any(r >= instr.target or r < 0 for r in reads(instr)):
                report("forward-reference", f"register refers forward in %{instr.target}", where)
                structural_ok = False
            if isinstance(instr, DispatchCall) and not mtbl.has_name(instr.callee):
                report("unknown-callee", f"call to undefined method name {instr.callee}", where)
            if isinstance(instr, DirectCall):
                if m.is_original:
                    report("direct-in-original", "original method contains a direct call", where)
                target = mtbl.get(instr.callee, instr.sig)
                if target is None:
                    report("missing-invoke-target", f"invoke target {sig_str(instr.callee, instr.sig)} not in table", where)
            if isinstance(instr, New):
                d = tytbl.decl(instr.struct.name)
                if d is not None and len(d.fields) != len(instr.args):
                    report("arity", f"new {instr.struct.name} expects {len(d.fields)} fields", where)
        if m.is_original and not m.body:
            report("empty-body", "original method has an empty body", where)

    # item 5
    for m in mtbl.duplicates():
        report("duplicate-signature", "two methods share this signature", sig_str(m.name, m.params))
        structural_ok = False

    if not structural_ok or any(d.code == "bad-supertype" for d in diags):
        return diags

    # item 6
    for m in mtbl.instances():
        where = sig_str(m.name, m.params)
        if not all(t.concrete for t in m.params):
            report("instance-not-concrete", "instance signature must be concrete", where)
            continue
        if len(m.params) != len(m.origin) or not subtype_sig(tytbl, m.params, m.origin):
            report("instance-not-subtype", "instance signature is not below its origin", where)
            continue
        orig = mtbl.get(m.name, m.origin)
        if orig is None or not orig.is_original:
            report("instance-orphan", f"origin {sig_str(m.name, m.origin)} is not an original", where)
            continue
        for other in mtbl.named(m.name):
            if (other.is_original and len(other.params) == len(m.params)
                    and subtype_sig(tytbl, m.params, other.params)
                    and not subtype_sig(tytbl, m.origin, other.params)):
                report("instance-not-most-specific",
                       f"instance not for most specific original ({sig_str(other.name, other.params)} is more specific)",
                       where)
                break

    # item 4
    from .infer import InferenceCache, InferenceError

    cache = InferenceCache(tytbl, originals(mtbl))
    for m in mtbl:
        if m.is_original and m.body:
            try:
                cache.infer_body(m.params, m.body)
            except InferenceError as exc:
                report("inference-failed", f"type inference fails: {exc}", sig_str(m.name, m.params))
    return diags
