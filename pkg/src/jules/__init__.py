"""Jules: an abstract machine for dispatch, JIT specialization and type stability."""

from .analysis import census, classify, fully_devirtualized, max_devirt_instr, max_devirt_table, table_optimizes
from .infer import InferenceCache, InferenceError, infer_body, infer_method
from .interp import StructVal, run, typeof
from .ir import (
    ANY,
    INT,
    AssignConst,
    AssignReg,
    DirectCall,
    DispatchCall,
    GetField,
    Method,
    MethodTable,
    New,
    Type,
    TypeDecl,
    TypeTable,
    lookup_exact,
    originals,
    validate,
)
from .jit import jit_compile, translate_instr
from .textio import ParseFailure, SourceProgram, parse_program, print_program, report_to_json
from .typesys import Undefined, dispatch, join, subtype

__version__ = "0.1.0"

__all__ = [
    "census",
    "classify",
    "fully_devirtualized",
    "max_devirt_instr",
    "max_devirt_table",
    "table_optimizes",
    "InferenceCache",
    "InferenceError",
    "infer_body",
    "infer_method",
    "StructVal",
    "run",
    "typeof",
    "ANY",
    "INT",
    "AssignConst",
    "AssignReg",
    "DirectCall",
    "DispatchCall",
    "GetField",
    "Method",
    "MethodTable",
    "New",
    "Type",
    "TypeDecl",
    "TypeTable",
    "lookup_exact",
    "originals",
    "validate",
    "jit_compile",
    "translate_instr",
    "ParseFailure",
    "SourceProgram",
    "parse_program",
    "print_program",
    "report_to_json",
    "Undefined",
    "dispatch",
    "join",
    "subtype",
]
