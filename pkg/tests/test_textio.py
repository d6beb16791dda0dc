import json

import pytest
from hypothesis import given, settings, strategies as st

from jules import ParseFailure, SourceProgram, classify, jit_compile, parse_program, print_program, report_to_json
from jules.fuzz import DiffVerdict, GenConfig, gen_program
from jules.ir import INT, Type

from conftest import PT

PT_T = Type("Pt", True)


def test_parse_pt_example():
    tytbl, mtbl = parse_program(SourceProgram(PT, "pt.jules"))
    assert len(tytbl) == 1
    assert len(mtbl) == 4
    assert all(m.is_original for m in mtbl)


def test_grammar_accepts_what_validate_rejects():
    tytbl, mtbl = parse_program("method f() { %0 = const 1 }")
    assert mtbl.names() == ["f"]


def test_invoke_rejected_in_source():
    src = "type Pt(Int, Int) <: APt\nmethod f(Pt) { %1 = const 1\n %2 = if %1 invoke x[Pt](%0) else %1 }"
    with pytest.raises(ParseFailure) as exc:
        parse_program(src)
    assert exc.value.errors[0].message == "direct call in source"
    assert exc.value.errors[0].line == 3
    parse_program(src, compiled=True)


def test_bare_invoke_rejected():
    with pytest.raises(ParseFailure) as exc:
        parse_program("method f(Int) { %1 = invoke x[Int](%0) }")
    assert "direct call in source" in str(exc.value)


def test_errors_are_positioned_and_collected():
    src = "method main() {\n  %0 = cnst 1\n}\ntype lower() <: A\nmethod g() { %0 = const 1 }\n"
    with pytest.raises(ParseFailure) as exc:
        parse_program(SourceProgram(src, "bad.jules"))
    errs = exc.value.errors
    assert len(errs) >= 2
    assert str(errs[0]).startswith("bad.jules:2:")


def test_origin_annotation_only_in_compiled_mode():
    src = "method f(Int) {  # origin: f(Any)\n  %1 = const 1\n}\nmethod f(Any) { %1 = const 1 }\n"
    with pytest.raises(ParseFailure):
        parse_program(src)
    _, mtbl = parse_program(src, compiled=True)
    assert mtbl.get("f", (INT,)).origin == (Type("Any", False),)


def test_comments_and_whitespace():
    a = parse_program(PT)
    b = parse_program("# leading\n" + PT.replace("\n", "  # trailing\n").replace(" ", "\t"))
    assert a == b


def test_print_round_trip(pt):
    text = print_program(*pt)
    assert parse_program(text) == pt
    assert print_program(*parse_program(text)) == text


def test_empty_program():
    assert print_program(*parse_program("")) == ""


def test_compiled_dump_round_trip(pt):
    tytbl, mtbl = pt
    compiled = jit_compile(tytbl, mtbl, "f", (PT_T,))
    text = print_program(tytbl, compiled)
    assert "method f(Pt) {  # origin: f(APt)" in text
    assert "invoke x[Pt](%0)" in text
    assert parse_program(text, compiled=True) == (tytbl, compiled)


def test_stub_round_trip(pt):
    from jules.ir import Method

    tytbl, mtbl = pt
    stubbed = mtbl.with_method(Method("f", (PT_T,), None, (Type("APt", False),)))
    text = print_program(tytbl, stubbed)
    assert "stub" in text
    assert parse_program(text, compiled=True)[1] == stubbed
    with pytest.raises(ParseFailure):
        parse_program(text)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10**9))
def test_generated_programs_round_trip(seed):
    prog = gen_program(GenConfig(seed=seed))
    text = print_program(*prog)
    assert parse_program(text) == prog
    assert print_program(*parse_program(text)) == text


@settings(max_examples=300)
@given(st.binary(max_size=200))
def test_parser_total_on_bytes(data):
    try:
        parse_program(data)
    except ParseFailure as exc:
        assert exc.errors


@settings(max_examples=300)
@given(st.text(alphabet="%=(){}[],<:# \n0123456789-abcfilmnorstvxyPAInt", max_size=120))
def test_parser_total_on_token_soup(text):
    try:
        parse_program(text, compiled=True)
    except ParseFailure as exc:
        assert all(e.line >= 1 and e.col >= 1 for e in exc.errors)


def test_stability_json(pt):
    s = report_to_json(classify(*pt, "f", (PT_T,)))
    assert s.startswith('{"method": "f", "sig": ["Pt"], "stable": true, "grounded": true,')
    assert json.loads(s)["register_types"] == ["Pt", "Int", "Int"]


def test_verdict_json():
    v = DiffVerdict(True, "jit", {}, {}, (10, 10))
    d = json.loads(report_to_json(v))
    assert list(d)[:2] == ["verdict", "steps"]
    assert (d["verdict"], d["steps"]) == ("match", 10)
    bad = json.loads(report_to_json(DiffVerdict(False, "aot", {}, {}, (3, 4), ["x"], seed=7)))
    assert bad["steps"] == [3, 4] and bad["seed"] == 7
