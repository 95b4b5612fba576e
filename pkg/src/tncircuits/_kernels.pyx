# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled loops for materialization and index duplication.

Mirrors ``_kernels_py`` exactly (same signatures, same results).
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def dup_gather(const double[::1] flat, raw_shape, group_of, out_shape):
    cdef Py_ssize_t n_raw = len(raw_shape)
    cdef Py_ssize_t m = len(out_shape)
    if n_raw == 0:
        return np.array(flat, dtype=np.float64).reshape(-1)
    cdef Py_ssize_t[::1] rshape = np.asarray(raw_shape, dtype=np.intp)
    cdef Py_ssize_t[::1] grp = np.asarray(group_of, dtype=np.intp)
    cdef Py_ssize_t[::1] oshape = np.asarray(out_shape, dtype=np.intp)
    cdef Py_ssize_t[::1] ostride = np.zeros(m, dtype=np.intp)
    cdef Py_ssize_t[::1] idx = np.zeros(m, dtype=np.intp)
    cdef Py_ssize_t i, j, s = 1, total = 1, off = 0
    for i in range(n_raw - 1, -1, -1):
        ostride[grp[i]] += s
        s *= rshape[i]
    for j in range(m):
        total *= oshape[j]
    out = np.empty(total, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(total):
        o[i] = flat[off]
        # odometer increment, last index fastest
        j = m - 1
        while j >= 0:
            idx[j] += 1
            off += ostride[j]
            if idx[j] < oshape[j]:
                break
            off -= ostride[j] * idx[j]
            idx[j] = 0
            j -= 1
    return out


def conv_onehot(configs, weights, table, double pad):
    cdef Py_ssize_t[:, ::1] cfg = np.ascontiguousarray(configs, dtype=np.intp)
    cdef const double[:, :, ::1] W = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t[:, ::1] tab = np.ascontiguousarray(table, dtype=np.intp)
    cdef Py_ssize_t B = cfg.shape[0], n_out = tab.shape[0], K = tab.shape[1]
    cdef Py_ssize_t r = W.shape[1]
    out = np.empty((B, n_out, r), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    cdef Py_ssize_t b, p, k, i, src, s
    cdef double acc
    for b in range(B):
        for p in range(n_out):
            for i in range(r):
                acc = 1.0
                for k in range(K):
                    src = tab[p, k]
                    if src < 0:
                        acc *= pad
                    else:
                        s = cfg[b, src]
                        acc *= W[k, i, s]
                o[b, p, i] = acc
    return out


def conv(x, weights, table, double pad):
    cdef const double[:, :, ::1] X = np.ascontiguousarray(x, dtype=np.float64)
    cdef const double[:, :, ::1] W = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t[:, ::1] tab = np.ascontiguousarray(table, dtype=np.intp)
    cdef Py_ssize_t B = X.shape[0], r_in = X.shape[2]
    cdef Py_ssize_t n_out = tab.shape[0], K = tab.shape[1], r = W.shape[1]
    out = np.empty((B, n_out, r), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    cdef Py_ssize_t b, p, k, i, j, src
    cdef double acc, dot
    for b in range(B):
        for p in range(n_out):
            for i in range(r):
                acc = 1.0
                for k in range(K):
                    src = tab[p, k]
                    if src < 0:
                        acc *= pad
                    else:
                        dot = 0.0
                        for j in range(r_in):
                            dot += W[k, i, j] * X[b, src, j]
                        acc *= dot
                o[b, p, i] = acc
    return out


def pool(x, table, double pad):
    cdef const double[:, :, ::1] X = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t[:, ::1] tab = np.ascontiguousarray(table, dtype=np.intp)
    cdef Py_ssize_t B = X.shape[0], r = X.shape[2]
    cdef Py_ssize_t n_out = tab.shape[0], K = tab.shape[1]
    out = np.empty((B, n_out, r), dtype=np.float64)
    cdef double[:, :, ::1] o = out
    cdef Py_ssize_t b, p, k, i, src
    cdef double acc
    for b in range(B):
        for p in range(n_out):
            for i in range(r):
                acc = 1.0
                for k in range(K):
                    src = tab[p, k]
                    acc *= pad if src < 0 else X[b, src, i]
                o[b, p, i] = acc
    return out


def rac_amplitudes(hidden, inputs, h0, out_w, Py_ssize_t n_steps, Py_ssize_t m):
    cdef Py_ssize_t depth = len(hidden)
    cdef Py_ssize_t R = np.asarray(hidden[0]).shape[0]
    cdef Py_ssize_t B = 1, t, l, b, s, i, j, row, d_in
    cdef double acc
    cdef const double[:, ::1] WH
    cdef const double[:, ::1] WI
    cdef const double[:, ::1] prev
    cdef double[:, ::1] cur
    cdef const double[:, ::1] below
    cdef double[::1] tmp = np.empty(R, dtype=np.float64)
    states = [np.ascontiguousarray(np.asarray(h, dtype=np.float64)[None, :]) for h in h0]
    for t in range(n_steps):
        new_states = []
        for l in range(depth):
            WH = np.ascontiguousarray(hidden[l], dtype=np.float64)
            WI = np.ascontiguousarray(inputs[l], dtype=np.float64)
            prev = states[l]
            nxt = np.empty((B * m, R), dtype=np.float64)
            cur = nxt
            if l > 0:
                below = new_states[l - 1]
                d_in = WI.shape[1]
            for b in range(B):
                for i in range(R):
                    acc = 0.0
                    for j in range(R):
                        acc += WH[i, j] * prev[b, j]
                    tmp[i] = acc
                for s in range(m):
                    row = b * m + s
                    for i in range(R):
                        if l == 0:
                            cur[row, i] = tmp[i] * WI[i, s]
                        else:
                            acc = 0.0
                            for j in range(d_in):
                                acc += WI[i, j] * below[row, j]
                            cur[row, i] = tmp[i] * acc
            new_states.append(nxt)
        states = new_states
        B *= m
    cdef const double[::1] wo = np.ascontiguousarray(out_w, dtype=np.float64)
    out = np.empty(B, dtype=np.float64)
    cdef double[::1] o = out
    cdef const double[:, ::1] fin = states[depth - 1]
    for b in range(B):
        acc = 0.0
        for i in range(R):
            acc += wo[i] * fin[b, i]
        o[b] = acc
    return out
