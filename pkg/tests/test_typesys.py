import itertools

import pytest
from hypothesis import given, strategies as st

from jules import dispatch, join, subtype
from jules.ir import ANY, INT, AssignConst, Method, MethodTable, Type, TypeDecl, TypeTable, original
from jules.typesys import NotConcrete, UndeclaredType

from conftest import AMBIGUOUS, brute_dispatch, load

PT = Type("Pt", True)
APT = Type("APt", False)


def lattice(parents):
    """``parents`` maps concrete names to the index of their abstract parent."""
    abstracts = [Type(f"S{i}", False) for i in range(3)]
    return TypeTable([TypeDecl(f"C{i}", (), abstracts[p]) for i, p in enumerate(parents)])


def oracle_subtype(tytbl, a, b):
    # three levels: concrete, declared parent, Any
    if a == b or b == ANY:
        return True
    if a.concrete and a != INT:
        return tytbl.decl(a.name).supertype == b
    return False


def oracle_join(tytbl, a, b):
    uppers = [t for t in set(tytbl.all_types()) | {INT, ANY}
              if oracle_subtype(tytbl, a, t) and oracle_subtype(tytbl, b, t)]
    least = [u for u in uppers if all(oracle_subtype(tytbl, u, v) for v in uppers)]
    assert len(least) == 1
    return least[0]


parent_lists = st.lists(st.integers(0, 2), min_size=1, max_size=4)


@given(parent_lists, st.data())
def test_subtype_and_join_match_oracle(parents, data):
    tytbl = lattice(parents)
    everything = sorted(set(tytbl.all_types()) | {INT, ANY}, key=lambda t: t.name)
    a = data.draw(st.sampled_from(everything))
    b = data.draw(st.sampled_from(everything))
    assert subtype(tytbl, a, b) == oracle_subtype(tytbl, a, b)
    j = join(tytbl, a, b)
    assert j == oracle_join(tytbl, a, b)
    assert j == join(tytbl, b, a)


@given(parent_lists)
def test_subtype_is_a_partial_order(parents):
    tytbl = lattice(parents)
    ts = list(set(tytbl.all_types()) | {INT, ANY})
    for a, b, c in itertools.product(ts, repeat=3):
        if subtype(tytbl, a, b) and subtype(tytbl, b, c):
            assert subtype(tytbl, a, c)
        if subtype(tytbl, a, b) and subtype(tytbl, b, a):
            assert a == b


@pytest.mark.parametrize("a,b,want", [
    (INT, INT, True), (PT, APT, True), (APT, PT, False), (INT, ANY, True), (ANY, INT, False), (INT, APT, False),
])
def test_subtype_examples(pt, a, b, want):
    assert subtype(pt[0], a, b) is want


def test_join_examples(pt):
    tytbl = pt[0]
    assert join(tytbl, PT, PT) == PT
    assert join(tytbl, PT, INT) == ANY
    two = TypeTable([TypeDecl("A", (), Type("S", False)), TypeDecl("B", (), Type("S", False))])
    assert join(two, Type("A", True), Type("B", True)) == Type("S", False)


def test_undeclared_type_raises(pt):
    with pytest.raises(UndeclaredType):
        subtype(pt[0], Type("Nope", True), ANY)


def test_dispatch_examples(pt):
    tytbl, mtbl = pt
    assert dispatch(tytbl, mtbl, "f", (PT,)).params == (APT,)
    assert dispatch(tytbl, mtbl, "x", (INT,)).reason == "no-applicable"
    assert not dispatch(tytbl, mtbl, "nope", ())


def test_dispatch_ambiguous():
    tytbl, mtbl = load(AMBIGUOUS)
    r = dispatch(tytbl, mtbl, "g", (INT, INT))
    assert not r
    assert r.reason == "ambiguous"
    assert len(r.candidates) == 2


def test_dispatch_prefers_instance():
    body = (AssignConst(1, 0),)
    mtbl = MethodTable([original("f", (ANY,), body), Method("f", (INT,), body, (ANY,))])
    assert dispatch(TypeTable(), mtbl, "f", (INT,)).origin == (ANY,)
    assert not dispatch(TypeTable(), mtbl, "f", (INT,)).is_original


def test_dispatch_requires_concrete(pt):
    with pytest.raises(NotConcrete):
        dispatch(pt[0], pt[1], "f", (APT,))


@given(parent_lists, st.lists(st.lists(st.integers(0, 8), min_size=2, max_size=2), min_size=1, max_size=5, unique_by=tuple))
def test_dispatch_matches_brute_force(parents, sigs):
    tytbl = lattice(parents)
    pool = sorted(set(tytbl.all_types()) | {INT, ANY}, key=lambda t: t.name)
    seen, methods = set(), []
    for s in sigs:
        params = tuple(pool[i % len(pool)] for i in s)
        if params not in seen:
            seen.add(params)
            methods.append(original("g", params, (AssignConst(2, 0),)))
    mtbl = MethodTable(methods)
    concretes = tytbl.concretes() + [INT]
    for args in itertools.product(concretes, repeat=2):
        got = dispatch(tytbl, mtbl, "g", args)
        want = brute_dispatch(tytbl, mtbl, "g", args)
        assert (got or None) == want
