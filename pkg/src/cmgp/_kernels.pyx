# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batched program interpreter.

Same contract as ``cmgp._kernels_py.run_population``; the operator codes below
follow the order of ``cmgp.operators.OPERATORS``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, exp, sqrt, trunc, floor, fabs
from libc.stdlib cimport malloc, free

cnp.import_array()

cdef enum:
    STACK_REPEATS = 20
    NUM_OPS = 19

cdef double DBL_MAX = 1.7976931348623157e308

OP_NAMES = ("abs", "-abs", "sin", "-sin", "cos", "-cos", "exp", "-exp",
            "sqrt", "-sqrt", "neg", "+", "*", "select", "max", "min", "id",
            "reciprocal", "trunc")

cdef int[NUM_OPS] ARITY = [1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 2, 2, 3, 2, 2, 1, 1, 1]


cdef inline double _sat(double x) nogil:
    if x > DBL_MAX:
        return DBL_MAX
    if x < -DBL_MAX:
        return -DBL_MAX
    return x


cdef inline double _exp(double a) nogil:
    if a > 10.0:
        a = 10.0
    return exp(a)


cdef inline double _sqrt(double a) nogil:
    if a >= 0.0:
        return sqrt(a)
    return 0.0


cdef inline double _apply(int op, double a, double b, double c) nogil:
    # a is the first value popped
    if op == 0:
        return fabs(a)
    elif op == 1:
        return -fabs(a)
    elif op == 2:
        return sin(a)
    elif op == 3:
        return -sin(a)
    elif op == 4:
        return cos(a)
    elif op == 5:
        return -cos(a)
    elif op == 6:
        return _exp(a)
    elif op == 7:
        return -_exp(a)
    elif op == 8:
        return _sqrt(a)
    elif op == 9:
        return -_sqrt(a)
    elif op == 10:
        return -a
    elif op == 11:
        return _sat(a + b)
    elif op == 12:
        return _sat(a * b)
    elif op == 13:
        return b if a > 0.0 else c
    elif op == 14:
        return a if a >= b else b
    elif op == 15:
        return a if a <= b else b
    elif op == 16:
        return a
    elif op == 17:
        if fabs(a) <= 0.05:
            return 20.0
        return 1.0 / a
    else:
        return trunc(a)


def run_population(const double[:, ::1] genomes,
                   const double[:, ::1] states,
                   const double[:, :, :, ::1] offsets,
                   const unsigned char[:, :, :, ::1] negate):
    cdef Py_ssize_t n_pop = genomes.shape[0]
    cdef Py_ssize_t n_genes = genomes.shape[1]
    cdef Py_ssize_t n_states = states.shape[0]
    cdef Py_ssize_t state_dim = states.shape[1]
    cdef Py_ssize_t n_samples = offsets.shape[2]
    cdef Py_ssize_t depth = STACK_REPEATS * state_dim
    cdef Py_ssize_t p, n, s, j, r, sp, low
    cdef int op, arity, code
    cdef double g, acc, a, b, c
    cdef bint bad

    means_arr = np.zeros((n_pop, n_states), dtype=np.float64)
    invalid_arr = np.zeros(n_pop, dtype=np.uint8)
    cdef double[:, ::1] means = means_arr
    cdef unsigned char[::1] invalid = invalid_arr
    cdef double *stack = <double *> malloc((depth + n_genes + 1) * sizeof(double))
    if stack == NULL:
        raise MemoryError()

    try:
        with nogil:
            for p in range(n_pop):
                bad = False
                for n in range(n_states):
                    acc = 0.0
                    low = 0  # everything below ``low`` still holds the prefilled state
                    for s in range(n_samples):
                        for r in range(low, depth):
                            stack[r] = states[n, r % state_dim]
                        low = depth
                        sp = depth
                        for j in range(n_genes):
                            g = genomes[p, j]
                            code = <int> floor(g + offsets[p, n, s, j])
                            if code >= 0:
                                stack[sp] = -fabs(g) if negate[p, n, s, j] else fabs(g)
                                sp += 1
                                continue
                            op = -code - 1
                            if op >= NUM_OPS:
                                op = NUM_OPS - 1
                            arity = ARITY[op]
                            if sp < arity:
                                bad = True
                                break
                            a = stack[sp - 1]
                            b = stack[sp - 2] if arity > 1 else 0.0
                            c = stack[sp - 3] if arity > 2 else 0.0
                            sp -= arity
                            if sp < low:
                                low = sp
                            stack[sp] = _apply(op, a, b, c)
                            sp += 1
                        if bad or sp == 0:
                            bad = True
                            break
                        acc = acc + stack[sp - 1]
                    if bad:
                        break
                    means[p, n] = acc / n_samples
                if bad:
                    invalid[p] = 1
                    for n in range(n_states):
                        means[p, n] = 0.0
    finally:
        free(stack)
    return means_arr, invalid_arr
