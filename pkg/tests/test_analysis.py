import pytest

from jules import census, classify, fully_devirtualized, jit_compile, max_devirt_instr, max_devirt_table, table_optimizes
from jules.infer import InferenceError
from jules.ir import ANY, INT, AssignConst, AssignReg, DirectCall, DispatchCall, Method, MethodTable, Type
from jules.textio import report_to_json

from conftest import FLAVORS, PT, QT, load

PT_T = Type("Pt", True)
APT = Type("APt", False)
S = Type("S", False)


def test_classify_f_at_pt(pt):
    r = classify(*pt, "f", (PT_T,))
    assert (r.stable, r.grounded, r.return_type) == (True, True, INT)
    assert r.register_types == (PT_T, INT, INT)


def test_classify_abstract_signature_is_unstable(pt):
    r = classify(*pt, "f", (APT,))
    assert not r.stable and not r.grounded
    assert r.per_register_concrete == [False, True, False]


def test_sibling_without_accessor_is_unstable():
    tytbl, mtbl = load(QT)
    r = classify(tytbl, mtbl, "f", (Type("Qt", True),))
    assert not r.stable
    assert r.register_types[-1] == ANY


def test_flavors_f1_stable_f0_unstable():
    tytbl, mtbl = load(FLAVORS)
    f1 = classify(tytbl, mtbl, "f1", (INT,))
    f0 = classify(tytbl, mtbl, "f0", (INT,))
    assert f1.stable and f1.grounded
    assert not f0.stable and f0.return_type == S


def test_classify_failure(pt):
    with pytest.raises(InferenceError):
        classify(*pt, "x", (INT,))


def test_max_devirt_instr(pt):
    tytbl, mtbl = pt
    call = DispatchCall(2, 1, "x", (0,), 1)
    assert max_devirt_instr((PT_T, INT), mtbl, AssignConst(1, 0))
    assert max_devirt_instr((APT, INT), mtbl, call)
    assert not max_devirt_instr((PT_T, INT), mtbl, call)
    direct = DirectCall(2, 1, "x", (PT_T,), (0,), 1)
    assert max_devirt_instr((PT_T, INT), mtbl, direct)


def test_max_devirt_table(pt):
    tytbl, mtbl = pt
    assert max_devirt_table(tytbl, mtbl)
    compiled = jit_compile(tytbl, mtbl, "f", (PT_T,))
    assert max_devirt_table(tytbl, compiled)
    # an instance that could have been devirtualized but was not
    lazy = Method("f", (PT_T,), mtbl.get("f", (APT,)).body, (APT,))
    r = max_devirt_table(tytbl, mtbl.with_method(lazy))
    assert not r
    assert r.witness.index == 1


def test_fully_devirtualized(pt):
    tytbl, mtbl = pt
    compiled = jit_compile(tytbl, mtbl, "f", (PT_T,))
    assert fully_devirtualized(compiled.get("f", (PT_T,)))
    assert not fully_devirtualized(mtbl.get("f", (APT,)))
    assert fully_devirtualized(Method("k", (), (AssignConst(0, 1), AssignReg(1, 0)), ()))


def test_table_optimizes(pt):
    tytbl, mtbl = pt
    assert table_optimizes(tytbl, mtbl, mtbl)
    compiled = jit_compile(tytbl, mtbl, "f", (PT_T,))
    assert table_optimizes(tytbl, mtbl, compiled)
    wrong_target = Method("f", (PT_T,), (AssignConst(1, 1), DirectCall(2, 1, "y", (PT_T,), (0,), 1)), (APT,))
    bad = MethodTable(list(mtbl) + [wrong_target])
    assert not table_optimizes(tytbl, mtbl, bad)
    assert not table_optimizes(tytbl, mtbl, MethodTable(list(mtbl)[1:]))


def test_census_original_only(pt):
    c = census(*pt)
    assert (c.instance_count, c.stable_fraction, c.grounded_fraction, c.zero_denominator) == (0, 1.0, 1.0, True)
    assert '"zero_denominator": true' in report_to_json(c)


def test_census_after_jit(pt):
    tytbl, mtbl = pt
    c = census(tytbl, jit_compile(tytbl, mtbl, "f", (PT_T,)))
    assert (c.instance_count, c.stable_fraction, c.grounded_fraction) == (1, 1.0, 1.0)


def test_census_mixed():
    both = PT + FLAVORS.replace("method main()", "method unused()").replace("method f0(Int)", "method f0(Any)")
    tytbl, mtbl = load(both)
    mtbl = jit_compile(tytbl, mtbl, "f", (PT_T,))
    mtbl = jit_compile(tytbl, mtbl, "f0", (INT,))
    c = census(tytbl, mtbl)
    assert (c.instance_count, c.stable_fraction, c.grounded_fraction) == (2, 0.5, 0.5)
