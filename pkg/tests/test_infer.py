import itertools

import pytest
from hypothesis import given, settings, strategies as st

from jules import InferenceCache, InferenceError, infer_body, infer_method
from jules.fuzz import GenConfig, gen_program
from jules.ir import ANY, INT, AssignConst, GetField, New, AssignReg, Type
from jules.typesys import join, subtype

from conftest import MUTUAL, SELF_REC, brute_dispatch, load

PT_T = Type("Pt", True)
APT = Type("APt", False)


def body(mtbl, name, sig):
    return mtbl.get(name, sig).body


@pytest.mark.parametrize("name,sig,want", [
    ("x", (PT_T,), (PT_T, INT)),
    ("f", (APT,), (APT, INT, ANY)),
    ("f", (PT_T,), (PT_T, INT, INT)),
])
def test_infer_body_examples(pt, name, sig, want):
    tytbl, mtbl = pt
    src = body(mtbl, name, (APT,) if name == "f" else sig)
    assert infer_body(tytbl, mtbl, sig, src) == want


def test_infer_method_dispatches(pt):
    tytbl, mtbl = pt
    assert infer_method(tytbl, mtbl, "f", (PT_T,)) == (PT_T, INT, INT)
    assert infer_method(tytbl, mtbl, "main", ()) == (INT, INT, PT_T, INT, INT)


def test_field_on_abstract_receiver_fails(pt):
    tytbl, mtbl = pt
    with pytest.raises(InferenceError):
        infer_body(tytbl, mtbl, (APT,), (GetField(1, 0, 0),))


def test_no_method_fails(pt):
    tytbl, mtbl = pt
    with pytest.raises(InferenceError):
        infer_method(tytbl, mtbl, "x", (INT,))
    with pytest.raises(InferenceError):
        infer_method(tytbl, mtbl, "f", (ANY,))


def test_self_recursion_is_least_fixpoint():
    # the recursive call contributes nothing beyond the Int alternative
    tytbl, mtbl = load(SELF_REC)
    assert infer_method(tytbl, mtbl, "r", (INT,)) == (INT, INT)


def test_mutual_recursion():
    tytbl, mtbl = load(MUTUAL)
    t = Type("T", True)
    assert infer_method(tytbl, mtbl, "m", (t,))[-1] == INT
    assert infer_method(tytbl, mtbl, "n", (t,))[-1] == INT


def test_inference_is_context_free(pt):
    tytbl, mtbl = pt
    a = InferenceCache(tytbl, mtbl)
    a.infer_method("main", ())
    fresh = InferenceCache(tytbl, mtbl)
    assert a.infer_method("f", (PT_T,)) == fresh.infer_method("f", (PT_T,))


def test_new_field_mismatch_fails():
    tytbl, mtbl = load("type P(Int) <: AP\nmethod main() { %0 = const 1 }")
    p = Type("P", True)
    with pytest.raises(InferenceError):
        infer_body(tytbl, mtbl, (p,), (New(1, p, (0,)),))


# -- independent oracle: naive Kleene iteration over every concrete call key --------


def kleene(tytbl, mtbl):
    concretes = tytbl.concretes() + [INT]
    keys = {(m.name, args) for m in mtbl for args in itertools.product(concretes, repeat=len(m.params))
            if brute_dispatch(tytbl, mtbl, m.name, args)}
    ret = {k: None for k in keys}
    bad = set()

    def lub(a, b):
        return b if a is None else a if b is None else join(tytbl, a, b)

    def type_body(params, instrs):
        regs = list(params)
        for i in instrs:
            if isinstance(i, AssignConst):
                t = INT
            elif isinstance(i, AssignReg):
                t = regs[i.source]
            elif isinstance(i, New):
                t = i.struct
            elif isinstance(i, GetField):
                rt = regs[i.receiver]
                if rt is None:
                    t = None
                elif rt == INT or not rt.concrete:
                    raise ValueError("field")
                else:
                    t = tytbl.decl(rt.name).fields[i.index]
            else:
                ats = tuple(regs[k] for k in i.args)
                if any(a is None for a in ats):
                    r = None
                elif all(a.concrete for a in ats):
                    r = ret.get((i.callee, ats), ANY)
                else:
                    r = ANY
                t = lub(r, regs[i.alt])
            regs.append(t)
        return regs

    changed = True
    while changed:
        changed = False
        for k in keys:
            if k in bad:
                continue
            target = brute_dispatch(tytbl, mtbl, *k)
            try:
                t = type_body(k[1], target.body)[-1]
            except ValueError:
                bad.add(k)
                continue
            if t != ret[k]:
                ret[k] = t
                changed = True
    return ret, bad


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_returns_match_kleene_oracle(seed):
    tytbl, mtbl = gen_program(GenConfig(seed=seed))
    ret, bad = kleene(tytbl, mtbl)
    cache = InferenceCache(tytbl, mtbl)
    for key, want in ret.items():
        if key in bad or want is None:
            continue
        try:
            got = cache.return_type(*key)
        except InferenceError:
            continue
        assert got == want, key


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_refined_arguments_give_refined_types(seed):
    tytbl, mtbl = gen_program(GenConfig(seed=seed))
    cache = InferenceCache(tytbl, mtbl)
    for m in mtbl:
        options = [[t for t in tytbl.concretes() + [INT] if subtype(tytbl, t, p)] for p in m.params]
        for refined in itertools.islice(itertools.product(*options), 4):
            coarse = cache.infer_body(m.params, m.body)
            fine = cache.infer_body(refined, m.body)
            assert all(subtype(tytbl, a, b) for a, b in zip(fine, coarse))
