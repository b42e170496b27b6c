# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of _kernels_py. Same contracts, same results."""

from libc.stdlib cimport free, malloc


def lcs_kernel(long[::1] a, long[::1] b):
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t m = b.shape[0]
    if n == 0 or m == 0:
        return 0
    cdef long *prev = <long *> malloc((m + 1) * sizeof(long))
    cdef long *cur = <long *> malloc((m + 1) * sizeof(long))
    if prev == NULL or cur == NULL:
        free(prev)
        free(cur)
        raise MemoryError()
    cdef Py_ssize_t i, j
    cdef long ai, x, y
    cdef long *tmp
    try:
        for j in range(m + 1):
            prev[j] = 0
            cur[j] = 0
        for i in range(1, n + 1):
            ai = a[i - 1]
            cur[0] = 0
            for j in range(1, m + 1):
                if ai == b[j - 1]:
                    cur[j] = prev[j - 1] + 1
                else:
                    x = prev[j]
                    y = cur[j - 1]
                    cur[j] = x if x >= y else y
            tmp = prev
            prev = cur
            cur = tmp
        return prev[m]
    finally:
        free(prev)
        free(cur)


def ted_kernel(long[::1] lmd1, long[::1] lab1, long[::1] kr1,
               long[::1] lmd2, long[::1] lab2, long[::1] kr2):
    cdef Py_ssize_t n1 = lab1.shape[0]
    cdef Py_ssize_t n2 = lab2.shape[0]
    cdef Py_ssize_t w = n2 + 1
    cdef long *td = <long *> malloc(n1 * n2 * sizeof(long))
    cdef long *fd = <long *> malloc((n1 + 1) * w * sizeof(long))
    if td == NULL or fd == NULL:
        free(td)
        free(fd)
        raise MemoryError()
    cdef Py_ssize_t ki, kj, i, j, x, y
    cdef long li, lj, ioff, joff, m, n, cost, best, alt, p, q
    cdef long result
    try:
        for x in range((n1 + 1) * w):
            fd[x] = 0
        for ki in range(kr1.shape[0]):
            i = kr1[ki]
            li = lmd1[i]
            ioff = li - 1
            m = i - li + 2
            for kj in range(kr2.shape[0]):
                j = kr2[kj]
                lj = lmd2[j]
                joff = lj - 1
                n = j - lj + 2
                for x in range(1, m):
                    fd[x * w] = fd[(x - 1) * w] + 1
                for y in range(1, n):
                    fd[y] = fd[y - 1] + 1
                for x in range(1, m):
                    for y in range(1, n):
                        if li == lmd1[x + ioff] and lj == lmd2[y + joff]:
                            cost = 0 if lab1[x + ioff] == lab2[y + joff] else 1
                            best = fd[(x - 1) * w + y] + 1
                            if fd[x * w + y - 1] + 1 < best:
                                best = fd[x * w + y - 1] + 1
                            if fd[(x - 1) * w + y - 1] + cost < best:
                                best = fd[(x - 1) * w + y - 1] + cost
                            fd[x * w + y] = best
                            td[(x + ioff) * n2 + y + joff] = best
                        else:
                            p = lmd1[x + ioff] - 1 - ioff
                            q = lmd2[y + joff] - 1 - joff
                            best = fd[(x - 1) * w + y] + 1
                            if fd[x * w + y - 1] + 1 < best:
                                best = fd[x * w + y - 1] + 1
                            alt = fd[p * w + q] + td[(x + ioff) * n2 + y + joff]
                            if alt < best:
                                best = alt
                            fd[x * w + y] = best
        result = td[(n1 - 1) * n2 + n2 - 1]
        return result
    finally:
        free(td)
        free(fd)
