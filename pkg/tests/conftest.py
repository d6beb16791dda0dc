import pytest

from jules import parse_program
from jules.typesys import subtype_sig

PT = """\
type Pt(Int, Int) <: APt
method x(Pt)  { %1 = field %0 0 }
method y(Pt)  { %1 = field %0 1 }
method f(APt) { %1 = const 1
                %2 = if %1 call x(%0) else %1 }
method main() { %0 = const 1
                %1 = const 2
                %2 = new Pt(%0, %1)
                %3 = const 1
                %4 = if %3 call f(%2) else %3 }
"""

# Qt is a second concrete child of APt with no accessor method.
QT = PT + "type Qt(Int) <: APt\n"

# f1 returns Int on both paths; f0 returns A or B, joined to S.
FLAVORS = """\
type A() <: S
type B() <: S
method one() { %0 = const 1 }
method mkA() { %0 = new A() }
method f1(Int) { %1 = const 0
                 %2 = if %0 call one() else %1 }
method f0(Int) { %1 = new B()
                 %2 = if %0 call mkA() else %1 }
method main() { %0 = const 1
                %1 = if %0 call f0(%0) else %0 }
"""

AMBIGUOUS = """\
method g(Int, Any) { %2 = const 1 }
method g(Any, Int) { %2 = const 2 }
method main() { %0 = const 1
                %1 = if %0 call g(%0, %0) else %0 }
"""

SELF_REC = """\
method r(Int) { %1 = if %0 call r(%0) else %0 }
method main() { %0 = const 1
                %1 = if %0 call r(%0) else %0 }
"""

MUTUAL = """\
type T(Int) <: A
method m(A) { %1 = const 1
              %2 = if %1 call n(%0) else %1 }
method n(A) { %1 = field %0 0
              %2 = if %1 call m(%0) else %1 }
method main() { %0 = const 0
                %1 = new T(%0)
                %2 = const 1
                %3 = if %2 call m(%1) else %2 }
"""


def load(text, compiled=False):
    return parse_program(text, compiled=compiled)


@pytest.fixture
def pt():
    return load(PT)


def brute_dispatch(tytbl, mtbl, name, args):
    app = [m for m in mtbl.named(name) if len(m.params) == len(args) and subtype_sig(tytbl, args, m.params)]
    best = [m for m in app if all(subtype_sig(tytbl, m.params, o.params) for o in app)]
    return best[0] if len(best) == 1 else None


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS, key=lambda k: (isinstance(k, str), k)):
        terminalreporter.write_line(RESULTS[key])
