"""Compilation of expressions to stack programs and the double-tier evaluator.

Two interchangeable backends execute the same programs: the compiled
Cython kernel (bocher._kernel) and a pure-Python loop.  Selection happens
at import; set BOCHER_PURE_PYTHON=1 to force the fallback.  Status codes:
0 ok, 1 near-zero denominator, 2 branch-cut proximity, 3 non-finite.
"""

from __future__ import annotations

import cmath
import math
import os
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

from .expr import Expr

OP_CONST = 0
OP_VAR = 1
OP_ADD = 2
OP_MUL = 3
OP_POW_INT = 4
OP_POW_HALF = 5

DENOM_EPS = 1e-6
BRANCH_EPS = 1e-3


@dataclass(frozen=True)
class Program:
    code: Tuple[int, ...]
    consts: Tuple[complex, ...]
    var_names: Tuple[str, ...]
    max_stack: int


_PROGRAM_CACHE: Dict[tuple, Program] = {}


def compile_expr(e: Expr, var_names: Sequence[str]) -> Program:
    var_names = tuple(var_names)
    key = (e, var_names)
    prog = _PROGRAM_CACHE.get(key)
    if prog is not None:
        return prog
    code: list = []
    consts: list = []
    const_index: dict = {}
    var_index = {n: i for i, n in enumerate(var_names)}

    def emit(node: Expr) -> int:
        """Emit code for node, return stack depth used."""
        k = node.KIND
        if k == 0:
            v = node.qc.to_complex()
            idx = const_index.get(v)
            if idx is None:
                idx = len(consts)
                consts.append(v)
                const_index[v] = idx
            code.append(OP_CONST)
            code.append(idx)
            return 1
        if k == 1:
            code.append(OP_VAR)
            code.append(var_index[node.name])
            return 1
        if k == 2:
            d = emit(node.base)
            exp = node.exp
            if exp.denominator == 1:
                code.append(OP_POW_INT)
                code.append(int(exp))
            else:
                code.append(OP_POW_HALF)
                code.append(exp.numerator)
            return d
        # Add / Mul
        depth = 0
        for i, a in enumerate(node.args):
            depth = max(depth, i + emit(a))
        code.append(OP_ADD if k == 4 else OP_MUL)
        code.append(len(node.args))
        return depth

    depth = emit(e)
    prog = Program(tuple(code), tuple(consts), var_names, max(depth, 1))
    _PROGRAM_CACHE[key] = prog
    return prog


def _pow_int(b: complex, k: int) -> complex:
    if k >= 0:
        return b ** k
    return (1.0 / b) ** (-k)


def eval_many_py(prog: Program, vars_: np.ndarray):
    """Pure-Python execution over an (npoints, nvars) complex array."""
    npts = vars_.shape[0]
    out = np.empty(npts, dtype=np.complex128)
    status = np.zeros(npts, dtype=np.int32)
    code = prog.code
    consts = prog.consts
    ncode = len(code)
    for p in range(npts):
        row = vars_[p]
        stack: list = []
        st = 0
        ip = 0
        while ip < ncode:
            op = code[ip]
            arg = code[ip + 1]
            ip += 2
            if op == OP_CONST:
                stack.append(consts[arg])
            elif op == OP_VAR:
                stack.append(complex(row[arg]))
            elif op == OP_ADD:
                acc = 0.0 + 0.0j
                for _ in range(arg):
                    acc += stack.pop()
                stack.append(acc)
            elif op == OP_MUL:
                acc = 1.0 + 0.0j
                for _ in range(arg):
                    acc *= stack.pop()
                stack.append(acc)
            elif op == OP_POW_INT:
                b = stack.pop()
                if arg < 0 and abs(b) < DENOM_EPS:
                    st = 1
                    break
                stack.append(_pow_int(b, arg))
            else:  # OP_POW_HALF
                b = stack.pop()
                if abs(math.pi - abs(cmath.phase(b))) < BRANCH_EPS:
                    st = 2
                    break
                if arg < 0 and abs(b) < DENOM_EPS:
                    st = 1
                    break
                s = cmath.sqrt(b)
                stack.append(_pow_int(s, arg))
        if st == 0:
            v = stack[-1]
            if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                st = 3
                v = 0j
            out[p] = v
        else:
            out[p] = 0j
        status[p] = st
    return out, status


_kernel = None
if os.environ.get("BOCHER_PURE_PYTHON") != "1":
    try:
        from . import _kernel  # type: ignore
    except ImportError:
        _kernel = None


def backend_name() -> str:
    return "compiled" if _kernel is not None else "pure-python"


def eval_many(prog: Program, vars_: np.ndarray):
    """Evaluate a compiled program at many points; returns (values, status)."""
    vars_ = np.ascontiguousarray(vars_, dtype=np.complex128)
    if _kernel is not None:
        npts = vars_.shape[0]
        out = np.empty(npts, dtype=np.complex128)
        status = np.zeros(npts, dtype=np.int32)
        code = np.asarray(prog.code, dtype=np.int64)
        consts = np.asarray(prog.consts, dtype=np.complex128)
        stack = np.empty(prog.max_stack + 1, dtype=np.complex128)
        _kernel.run_program(code, consts, vars_, out, status, stack)
        return out, status
    return eval_many_py(prog, vars_)
