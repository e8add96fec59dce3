# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled stack-machine evaluator for expression programs.

Semantics mirror bocher.evalcore.eval_many_py exactly: same opcodes,
same rejection thresholds, same status codes.
"""

from libc.math cimport fabs, isfinite, M_PI

cdef extern from "complex.h" nogil:
    double complex csqrt(double complex)
    double carg(double complex)
    double cabs(double complex)
    double creal(double complex)
    double cimag(double complex)

DEF OP_CONST = 0
DEF OP_VAR = 1
DEF OP_ADD = 2
DEF OP_MUL = 3
DEF OP_POW_INT = 4
DEF OP_POW_HALF = 5

cdef double DENOM_EPS = 1e-6
cdef double BRANCH_EPS = 1e-3


cdef inline double complex _ipow(double complex b, long k) nogil:
    cdef double complex acc = 1.0
    cdef double complex base = b
    cdef long n = k
    if n < 0:
        base = 1.0 / b
        n = -n
    while n:
        if n & 1:
            acc = acc * base
        base = base * base
        n >>= 1
    return acc


def run_program(long[::1] code, double complex[::1] consts,
                double complex[:, ::1] vars, double complex[::1] out,
                int[::1] status, double complex[::1] stack):
    cdef Py_ssize_t npts = vars.shape[0]
    cdef Py_ssize_t ncode = code.shape[0]
    cdef Py_ssize_t p, ip
    cdef int sp, st
    cdef long op, arg, j
    cdef double complex b, acc, v
    with nogil:
        for p in range(npts):
            sp = 0
            st = 0
            ip = 0
            while ip < ncode:
                op = code[ip]
                arg = code[ip + 1]
                ip += 2
                if op == OP_CONST:
                    stack[sp] = consts[arg]
                    sp += 1
                elif op == OP_VAR:
                    stack[sp] = vars[p, arg]
                    sp += 1
                elif op == OP_ADD:
                    acc = 0.0
                    for j in range(arg):
                        sp -= 1
                        acc = acc + stack[sp]
                    stack[sp] = acc
                    sp += 1
                elif op == OP_MUL:
                    acc = 1.0
                    for j in range(arg):
                        sp -= 1
                        acc = acc * stack[sp]
                    stack[sp] = acc
                    sp += 1
                elif op == OP_POW_INT:
                    sp -= 1
                    b = stack[sp]
                    if arg < 0 and cabs(b) < DENOM_EPS:
                        st = 1
                        break
                    stack[sp] = _ipow(b, arg)
                    sp += 1
                else:
                    sp -= 1
                    b = stack[sp]
                    if fabs(M_PI - fabs(carg(b))) < BRANCH_EPS:
                        st = 2
                        break
                    if arg < 0 and cabs(b) < DENOM_EPS:
                        st = 1
                        break
                    stack[sp] = _ipow(csqrt(b), arg)
                    sp += 1
            if st == 0:
                v = stack[sp - 1]
                if not (isfinite(creal(v)) and isfinite(cimag(v))):
                    st = 3
                    v = 0.0
                out[p] = v
            else:
                out[p] = 0.0
            status[p] = st
