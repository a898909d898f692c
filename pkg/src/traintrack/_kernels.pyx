# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled word kernels; same contract as ``_kernels_py``."""

from libc.stdlib cimport malloc, free


cdef long* _buffer(Py_ssize_t n) except NULL:
    cdef long* buf = <long*> malloc((n if n > 0 else 1) * sizeof(long))
    if buf == NULL:
        raise MemoryError()
    return buf


cdef tuple _to_tuple(long* buf, Py_ssize_t n):
    cdef Py_ssize_t i
    return tuple([buf[i] for i in range(n)])


def free_reduce(letters):
    cdef tuple seq = tuple(letters)
    cdef Py_ssize_t n = len(seq), top = 0, i
    cdef long x
    cdef long* buf = _buffer(n)
    try:
        for i in range(n):
            x = seq[i]
            if top > 0 and buf[top - 1] == -x:
                top -= 1
            else:
                buf[top] = x
                top += 1
        return _to_tuple(buf, top)
    finally:
        free(buf)


def substitute(word, images):
    cdef tuple w = tuple(word)
    cdef Py_ssize_t total = 0, top = 0, i, j, m
    cdef long x, y
    cdef tuple piece
    for x in w:
        total += len(images[x if x > 0 else -x])
    cdef long* buf = _buffer(total)
    try:
        for i in range(len(w)):
            x = w[i]
            if x > 0:
                piece = tuple(images[x])
                m = len(piece)
                for j in range(m):
                    y = piece[j]
                    if top > 0 and buf[top - 1] == -y:
                        top -= 1
                    else:
                        buf[top] = y
                        top += 1
            else:
                piece = tuple(images[-x])
                m = len(piece)
                for j in range(m - 1, -1, -1):
                    y = -<long> piece[j]
                    if top > 0 and buf[top - 1] == -y:
                        top -= 1
                    else:
                        buf[top] = y
                        top += 1
        return _to_tuple(buf, top)
    finally:
        free(buf)


def cyclic_reduce(word):
    cdef tuple w = tuple(word)
    cdef Py_ssize_t n = len(w), i = 0
    while i < n - 1 - i and <long> w[i] == -<long> w[n - 1 - i]:
        i += 1
    return w[i:n - i], w[:i]


def common_prefix(a, b):
    cdef tuple s = tuple(a), t = tuple(b)
    cdef Py_ssize_t n = min(len(s), len(t)), i = 0
    while i < n and <long> s[i] == <long> t[i]:
        i += 1
    return i
