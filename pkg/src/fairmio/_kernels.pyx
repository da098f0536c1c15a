# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled conjunction search kernels; see _kernels_py for the reference."""

import time

import numpy as np
cimport numpy as cnp

BACKEND = "cython"

cnp.import_array()


cdef struct SumState:
    Py_ssize_t out_pos


cdef void _sums_walk(const int[:, ::1] codes, const double[:, ::1] sw,
                     const long[::1] cards, int[:, ::1] stack, Py_ssize_t depth,
                     Py_ssize_t count, Py_ssize_t first, double[:, ::1] out,
                     SumState* st) noexcept nogil:
    cdef Py_ssize_t k = codes.shape[1]
    cdef Py_ssize_t q = sw.shape[1]
    cdef Py_ssize_t a, v, i, r, c, row, pos
    for a in range(first, k):
        for v in range(cards[a]):
            c = 0
            pos = st.out_pos
            st.out_pos += 1
            for r in range(q):
                out[pos, r] = 0.0
            for i in range(count):
                row = stack[depth, i]
                if codes[row, a] == v:
                    stack[depth + 1, c] = row
                    c += 1
                    for r in range(q):
                        out[pos, r] += sw[row, r]
            if c > 0 and a + 1 < k:
                _sums_walk(codes, sw, cards, stack, depth + 1, c, a + 1, out, st)
            elif a + 1 < k:
                # empty prefix: all extensions are empty too, fill zeros
                _zero_walk(cards, a + 1, k, q, out, st)


cdef void _zero_walk(const long[::1] cards, Py_ssize_t first, Py_ssize_t k, Py_ssize_t q,
                     double[:, ::1] out, SumState* st) noexcept nogil:
    cdef Py_ssize_t a, v, r
    for a in range(first, k):
        for v in range(cards[a]):
            for r in range(q):
                out[st.out_pos, r] = 0.0
            st.out_pos += 1
            _zero_walk(cards, a + 1, k, q, out, st)


def conjunction_sums(codes, sw, cards):
    cdef int[:, ::1] c_codes = np.ascontiguousarray(codes, dtype=np.int32)
    cdef double[:, ::1] c_sw = np.ascontiguousarray(sw, dtype=np.float64)
    cdef long[::1] c_cards = np.ascontiguousarray(cards, dtype=np.int64)
    cdef Py_ssize_t n = c_codes.shape[0]
    cdef Py_ssize_t k = c_codes.shape[1]
    cdef Py_ssize_t total = 1
    for a in range(k):
        total *= c_cards[a] + 1
    total -= 1
    out_arr = np.zeros((total, c_sw.shape[1]), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    stack_arr = np.zeros((k + 1, max(n, 1)), dtype=np.int32)
    cdef int[:, ::1] stack = stack_arr
    cdef Py_ssize_t i
    for i in range(n):
        stack[0, i] = <int>i
    cdef SumState st
    st.out_pos = 0
    if k > 0:
        with nogil:
            _sums_walk(c_codes, c_sw, c_cards, stack, 0, n, 0, out, &st)
    return out_arr


cdef class _Search:
    cdef int[:, ::1] codes
    cdef double[::1] sw
    cdef double[::1] counts
    cdef double min_count
    cdef long[::1] attr_order
    cdef long[:, ::1] value_order
    cdef long[::1] value_counts
    cdef int[:, ::1] stack
    cdef long[::1] path_attr
    cdef long[::1] path_val
    cdef public double best
    cdef public list best_lits
    cdef public long nodes
    cdef public bint done
    cdef bint stop
    cdef bint use_floor
    cdef double floor
    cdef double deadline

    cdef void walk(self, Py_ssize_t depth, Py_ssize_t count, Py_ssize_t first):
        cdef Py_ssize_t k = self.attr_order.shape[0]
        cdef Py_ssize_t p, r, i, c, row, a, v, j
        cdef double bound, value, w, size
        for p in range(first, k):
            a = self.attr_order[p]
            for r in range(self.value_counts[p]):
                if self.stop:
                    return
                v = self.value_order[p, r]
                self.nodes += 1
                if (self.nodes & 1023) == 0 and time.monotonic() > self.deadline:
                    self.done = False
                    self.stop = True
                    return
                c = 0
                bound = 0.0
                value = 0.0
                size = 0.0
                for i in range(count):
                    row = self.stack[depth, i]
                    if self.codes[row, a] == v:
                        self.stack[depth + 1, c] = row
                        c += 1
                        size += self.counts[row]
                        w = self.sw[row]
                        value += w
                        if w > 0:
                            bound += w
                if c == 0 or size < self.min_count:
                    continue
                if bound <= self.best or bound <= self.floor:
                    continue
                self.path_attr[depth] = a
                self.path_val[depth] = v
                if value > self.best:
                    self.best = value
                    self.best_lits = [(int(self.path_attr[j]), int(self.path_val[j]))
                                      for j in range(depth + 1)]
                    if self.use_floor and value > self.floor:
                        self.stop = True
                        return
                self.walk(depth + 1, c, p + 1)


def best_conjunction(codes, sw, attr_order, value_order, value_counts,
                     deadline=float("inf"), threshold=None, counts=None, min_count=0.0):
    cdef _Search s = _Search()
    s.codes = np.ascontiguousarray(codes, dtype=np.int32)
    s.sw = np.ascontiguousarray(sw, dtype=np.float64).reshape(-1)
    s.attr_order = np.ascontiguousarray(attr_order, dtype=np.int64)
    k = len(attr_order)
    width = max([len(v) for v in value_order] + [1])
    vo = np.zeros((max(k, 1), width), dtype=np.int64)
    for p, vals in enumerate(value_order):
        vo[p, :len(vals)] = vals
    s.value_order = vo
    s.value_counts = np.ascontiguousarray(value_counts, dtype=np.int64)
    n = s.codes.shape[0]
    s.counts = (np.ones(n) if counts is None
                else np.ascontiguousarray(counts, dtype=np.float64).reshape(-1))
    s.min_count = float(min_count)
    stack = np.zeros((k + 1, max(n, 1)), dtype=np.int32)
    stack[0, :n] = np.arange(n, dtype=np.int32)
    s.stack = stack
    s.path_attr = np.zeros(max(k, 1), dtype=np.int64)
    s.path_val = np.zeros(max(k, 1), dtype=np.int64)
    s.best = -np.inf
    s.best_lits = []
    s.nodes = 0
    s.done = True
    s.stop = False
    s.use_floor = threshold is not None
    s.floor = -np.inf if threshold is None else float(threshold)
    s.deadline = float(deadline)
    s.walk(0, n, 0)
    return s.best, s.best_lits, s.nodes, s.done
