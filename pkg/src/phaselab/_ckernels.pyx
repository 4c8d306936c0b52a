# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels; see ``phaselab._pykernels`` for the reference semantics."""
import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

NAME = "compiled"


cdef void _gemm(char *ta, char *tb, int m, int n, int k, double alpha,
                const double *a, int lda, const double *b, int ldb, double beta,
                double *c, int ldc) noexcept nogil:
    # column-major dgemm with the row-major operands swapped: C = op(A) @ op(B)
    dgemm(tb, ta, &n, &m, &k, &alpha, <double *>b, &ldb, <double *>a, &lda, &beta, c, &ldc)


cdef void _im2col(const double[:, :, ::1] xpad, Py_ssize_t kh, Py_ssize_t kw,
                  Py_ssize_t H, Py_ssize_t W, double *cols) noexcept nogil:
    # cols[(c*kh + i)*kw + j, r*W + s] = xpad[c, r + i, s + j]
    cdef Py_ssize_t C = xpad.shape[0], c, i, j, r, s
    cdef double *dst
    cdef const double *src
    for c in range(C):
        for i in range(kh):
            for j in range(kw):
                dst = cols + ((c * kh + i) * kw + j) * H * W
                for r in range(H):
                    src = &xpad[c, r + i, j]
                    for s in range(W):
                        dst[r * W + s] = src[s]


cdef void _col2im(const double *cols, Py_ssize_t kh, Py_ssize_t kw, Py_ssize_t H,
                  Py_ssize_t W, double[:, :, ::1] dxpad) noexcept nogil:
    cdef Py_ssize_t C = dxpad.shape[0], c, i, j, r, s
    cdef const double *src
    cdef double *dst
    for c in range(C):
        for i in range(kh):
            for j in range(kw):
                src = cols + ((c * kh + i) * kw + j) * H * W
                for r in range(H):
                    dst = &dxpad[c, r + i, j]
                    for s in range(W):
                        dst[s] += src[r * W + s]


def conv2d_forward(x, weight, bias):
    """Same-size zero-padded 2-D cross-correlation (B,C,H,W) -> (B,O,H,W)."""
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t O = weight.shape[0], kh = weight.shape[2], kw = weight.shape[3]
    cdef Py_ssize_t ph = kh // 2, pw = kw // 2
    cdef double[:, :, :, ::1] xpad = np.ascontiguousarray(
        np.pad(np.asarray(x, dtype=np.float64), ((0, 0), (0, 0), (ph, ph), (pw, pw))))
    cdef double[:, ::1] wmat = np.ascontiguousarray(weight, dtype=np.float64).reshape(O, C * kh * kw)
    cdef double[::1] bvec = np.ascontiguousarray(bias, dtype=np.float64)
    out = np.empty((B, O, H, W), dtype=np.float64)
    cdef double[:, :, :, ::1] ov = out
    cdef double[:, ::1] cols = np.empty((C * kh * kw, H * W), dtype=np.float64)
    cdef Py_ssize_t b, o, p
    cdef int K = C * kh * kw, HW = H * W, Oi = O
    with nogil:
        for b in range(B):
            _im2col(xpad[b], kh, kw, H, W, &cols[0, 0])
            _gemm(b"N", b"N", Oi, HW, K, 1.0, &wmat[0, 0], K, &cols[0, 0], HW, 0.0,
                  &ov[b, 0, 0, 0], HW)
            for o in range(O):
                for p in range(HW):
                    (&ov[b, o, 0, 0])[p] += bvec[o]
    return out


def conv2d_backward(x, weight, dout, need_dx=True):
    """Gradients of ``conv2d_forward``: returns ``(dx, dw, db)``."""
    cdef Py_ssize_t B = x.shape[0], C = x.shape[1], H = x.shape[2], W = x.shape[3]
    cdef Py_ssize_t O = weight.shape[0], kh = weight.shape[2], kw = weight.shape[3]
    cdef Py_ssize_t ph = kh // 2, pw = kw // 2
    cdef double[:, :, :, ::1] xpad = np.ascontiguousarray(
        np.pad(np.asarray(x, dtype=np.float64), ((0, 0), (0, 0), (ph, ph), (pw, pw))))
    cdef double[:, ::1] wmat = np.ascontiguousarray(weight, dtype=np.float64).reshape(O, C * kh * kw)
    cdef double[:, :, :, ::1] d = np.ascontiguousarray(dout, dtype=np.float64)
    dw = np.zeros((O, C * kh * kw), dtype=np.float64)
    db = np.zeros(O, dtype=np.float64)
    cdef double[:, ::1] dwv = dw
    cdef double[::1] dbv = db
    cdef double[:, ::1] cols = np.empty((C * kh * kw, H * W), dtype=np.float64)
    cdef double[:, ::1] dcols = np.empty((C * kh * kw, H * W), dtype=np.float64)
    dxpad_arr = np.zeros((B, C, H + 2 * ph, W + 2 * pw), dtype=np.float64) if need_dx else None
    cdef double[:, :, :, ::1] dxpad
    if need_dx:
        dxpad = dxpad_arr
    cdef bint ndx = need_dx
    cdef Py_ssize_t b, o, p
    cdef int K = C * kh * kw, HW = H * W, Oi = O
    cdef double acc
    with nogil:
        for b in range(B):
            for o in range(O):
                acc = 0.0
                for p in range(HW):
                    acc = acc + (&d[b, o, 0, 0])[p]
                dbv[o] += acc
            _im2col(xpad[b], kh, kw, H, W, &cols[0, 0])
            # dw (O, K) += dout_b (O, HW) @ cols^T (HW, K)
            _gemm(b"N", b"T", Oi, K, HW, 1.0, &d[b, 0, 0, 0], HW, &cols[0, 0], HW, 1.0,
                  &dwv[0, 0], K)
            if ndx:
                # dcols (K, HW) = wmat^T (K, O) @ dout_b (O, HW)
                _gemm(b"T", b"N", K, HW, Oi, 1.0, &wmat[0, 0], K, &d[b, 0, 0, 0], HW, 0.0,
                      &dcols[0, 0], HW)
                _col2im(&dcols[0, 0], kh, kw, H, W, dxpad[b])
    dx = np.ascontiguousarray(dxpad_arr[:, :, ph:ph + H, pw:pw + W]) if need_dx else None
    return dx, dw.reshape(O, C, kh, kw), db


def magnitude_replace(spectrum, magnitude):
    """Return ``magnitude * spectrum / |spectrum|`` with phase 1 where the spectrum is 0."""
    cdef const double complex[::1] f = np.ascontiguousarray(spectrum, dtype=np.complex128).ravel()
    cdef const double[::1] y = np.ascontiguousarray(magnitude, dtype=np.float64).ravel()
    out = np.empty(f.shape[0], dtype=np.complex128)
    cdef double complex[::1] o = out
    cdef Py_ssize_t k, n = f.shape[0]
    cdef double re, im, a
    with nogil:
        for k in range(n):
            re = f[k].real
            im = f[k].imag
            a = sqrt(re * re + im * im)
            if a > 0.0:
                o[k] = (y[k] / a) * f[k]
            else:
                o[k] = y[k]
    return out.reshape(np.shape(spectrum))


def constraint_update(x, xp, support, beta, hard):
    """One space-domain HIO (``hard=False``) or ER (``hard=True``) update."""
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64).ravel()
    cdef const double[::1] pv = np.ascontiguousarray(xp, dtype=np.float64).ravel()
    cdef const cnp.npy_bool[::1] sv = np.ascontiguousarray(support, dtype=np.bool_).ravel()
    out = np.empty(xv.shape[0], dtype=np.float64)
    cdef double[::1] o = out
    cdef double bt = beta
    cdef bint hd = hard
    cdef Py_ssize_t k, n = xv.shape[0]
    with nogil:
        for k in range(n):
            if (not sv[k]) or pv[k] < 0.0:
                o[k] = 0.0 if hd else xv[k] - bt * pv[k]
            else:
                o[k] = pv[k]
    return out.reshape(np.shape(x))


def half_spectrum_residual(spectrum_half, magnitude):
    """``sum((y - |F|)**2)`` over the full plane, given the rfft2 half plane of a real field."""
    cdef const double complex[:, ::1] f = np.ascontiguousarray(spectrum_half, dtype=np.complex128)
    cdef const double[:, ::1] y = np.ascontiguousarray(magnitude, dtype=np.float64)
    cdef Py_ssize_t m = y.shape[0], h = f.shape[1], u, v, ur
    cdef double re, im, a, d, total = 0.0
    with nogil:
        for u in range(m):
            ur = (m - u) % m
            for v in range(h):
                re = f[u, v].real
                im = f[u, v].imag
                a = sqrt(re * re + im * im)
                d = y[u, v] - a
                total += d * d
                if 1 <= v <= m - h:
                    d = y[ur, m - v] - a
                    total += d * d
    return total
