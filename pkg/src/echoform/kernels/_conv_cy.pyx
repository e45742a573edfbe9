# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled 2D convolution kernels: forward, input gradient, weight gradient.

Same contracts as `conv_numpy`; plain C loops over float64 memoryviews.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def conv2d_forward(x, w, int stride=1, int pad=0):
    cdef double[:, :, :, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, :, :, ::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t b = xv.shape[0], ci = xv.shape[1], h = xv.shape[2], wd = xv.shape[3]
    cdef Py_ssize_t co = wv.shape[0], kh = wv.shape[2], kw = wv.shape[3]
    cdef Py_ssize_t oh = (h + 2 * pad - kh) // stride + 1
    cdef Py_ssize_t ow = (wd + 2 * pad - kw) // stride + 1
    out = np.zeros((b, co, oh, ow), dtype=np.float64)
    cdef double[:, :, :, ::1] ov = out
    cdef Py_ssize_t n, o, c, i, j, p, q, ii, jj
    cdef double acc
    for n in range(b):
        for o in range(co):
            for i in range(oh):
                for j in range(ow):
                    acc = 0.0
                    for c in range(ci):
                        for p in range(kh):
                            ii = i * stride + p - pad
                            if ii < 0 or ii >= h:
                                continue
                            for q in range(kw):
                                jj = j * stride + q - pad
                                if jj < 0 or jj >= wd:
                                    continue
                                acc += xv[n, c, ii, jj] * wv[o, c, p, q]
                    ov[n, o, i, j] = acc
    return out


def conv2d_grad_weight(x, gout, Py_ssize_t kh, Py_ssize_t kw, int stride=1, int pad=0):
    cdef double[:, :, :, ::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[:, :, :, ::1] gv = np.ascontiguousarray(gout, dtype=np.float64)
    cdef Py_ssize_t b = xv.shape[0], ci = xv.shape[1], h = xv.shape[2], wd = xv.shape[3]
    cdef Py_ssize_t co = gv.shape[1], oh = gv.shape[2], ow = gv.shape[3]
    gw = np.zeros((co, ci, kh, kw), dtype=np.float64)
    cdef double[:, :, :, ::1] gwv = gw
    cdef Py_ssize_t n, o, c, i, j, p, q, ii, jj
    cdef double g
    for n in range(b):
        for o in range(co):
            for i in range(oh):
                for j in range(ow):
                    g = gv[n, o, i, j]
                    if g == 0.0:
                        continue
                    for c in range(ci):
                        for p in range(kh):
                            ii = i * stride + p - pad
                            if ii < 0 or ii >= h:
                                continue
                            for q in range(kw):
                                jj = j * stride + q - pad
                                if jj < 0 or jj >= wd:
                                    continue
                                gwv[o, c, p, q] += xv[n, c, ii, jj] * g
    return gw


def conv2d_grad_input(w, gout, Py_ssize_t h, Py_ssize_t wd, int stride=1, int pad=0):
    cdef double[:, :, :, ::1] wv = np.ascontiguousarray(w, dtype=np.float64)
    cdef double[:, :, :, ::1] gv = np.ascontiguousarray(gout, dtype=np.float64)
    cdef Py_ssize_t co = wv.shape[0], ci = wv.shape[1], kh = wv.shape[2], kw = wv.shape[3]
    cdef Py_ssize_t b = gv.shape[0], oh = gv.shape[2], ow = gv.shape[3]
    gx = np.zeros((b, ci, h, wd), dtype=np.float64)
    cdef double[:, :, :, ::1] gxv = gx
    cdef Py_ssize_t n, o, c, i, j, p, q, ii, jj
    cdef double g
    for n in range(b):
        for o in range(co):
            for i in range(oh):
                for j in range(ow):
                    g = gv[n, o, i, j]
                    if g == 0.0:
                        continue
                    for c in range(ci):
                        for p in range(kh):
                            ii = i * stride + p - pad
                            if ii < 0 or ii >= h:
                                continue
                            for q in range(kw):
                                jj = j * stride + q - pad
                                if jj < 0 or jj >= wd:
                                    continue
                                gxv[n, c, ii, jj] += wv[o, c, p, q] * g
    return gx
