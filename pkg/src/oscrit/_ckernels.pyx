# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled numerical kernels.

Same functions and semantics as :mod:`oscrit._pykernels`; see that module
for the bank layout.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport floor, exp, NAN, isfinite

cnp.import_array()

NAME = "cython"


cdef struct Bank:
    double* pre_lo
    double* pre_c
    double* pre_F
    long long* pre_off
    double* pat_lo
    double* pat_c
    double* pat_F
    long long* pat_off
    double* Tp
    double* P
    double* FTp
    double* IP


cdef class _BankRef:
    """Keeps contiguous copies of the bank arrays alive."""
    cdef object arrays
    cdef Bank b

    def __init__(self, bank):
        pre_lo, pre_c, pre_F, pre_off, pat_lo, pat_c, pat_F, pat_off, Tp, P, FTp, IP = bank
        arrs = [np.ascontiguousarray(pre_lo, dtype=np.float64),
                np.ascontiguousarray(pre_c, dtype=np.float64),
                np.ascontiguousarray(pre_F, dtype=np.float64),
                np.ascontiguousarray(pre_off, dtype=np.int64),
                np.ascontiguousarray(pat_lo, dtype=np.float64),
                np.ascontiguousarray(pat_c, dtype=np.float64),
                np.ascontiguousarray(pat_F, dtype=np.float64),
                np.ascontiguousarray(pat_off, dtype=np.int64),
                np.ascontiguousarray(Tp, dtype=np.float64),
                np.ascontiguousarray(P, dtype=np.float64),
                np.ascontiguousarray(FTp, dtype=np.float64),
                np.ascontiguousarray(IP, dtype=np.float64)]
        self.arrays = arrs
        self.b.pre_lo = <double*> cnp.PyArray_DATA(arrs[0])
        self.b.pre_c = <double*> cnp.PyArray_DATA(arrs[1])
        self.b.pre_F = <double*> cnp.PyArray_DATA(arrs[2])
        self.b.pre_off = <long long*> cnp.PyArray_DATA(arrs[3])
        self.b.pat_lo = <double*> cnp.PyArray_DATA(arrs[4])
        self.b.pat_c = <double*> cnp.PyArray_DATA(arrs[5])
        self.b.pat_F = <double*> cnp.PyArray_DATA(arrs[6])
        self.b.pat_off = <long long*> cnp.PyArray_DATA(arrs[7])
        self.b.Tp = <double*> cnp.PyArray_DATA(arrs[8])
        self.b.P = <double*> cnp.PyArray_DATA(arrs[9])
        self.b.FTp = <double*> cnp.PyArray_DATA(arrs[10])
        self.b.IP = <double*> cnp.PyArray_DATA(arrs[11])


cdef inline long long _search(double* a, long long lo, long long hi, double v, int left) nogil:
    # first index in [lo, hi) with a[i] > v (right) or a[i] >= v (left)
    cdef long long mid
    while lo < hi:
        mid = (lo + hi) >> 1
        if (a[mid] < v) if left else (a[mid] <= v):
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef inline int _locate(Bank* b, int fid, double t, int side,
                        double** coef, double* x, double* off) nogil:
    cdef double tp = b.Tp[fid]
    cdef double per, u, k
    cdef long long j, a0, a1, b0, b1
    cdef int in_pat
    if side:
        in_pat = t > tp
    else:
        in_pat = t >= tp
    if in_pat:
        b0 = b.pat_off[fid]
        b1 = b.pat_off[fid + 1]
        per = b.P[fid]
        u = t - tp
        k = floor(u / per)
        u = u - k * per
        if u < 0:
            u += per
            k -= 1
        elif u >= per:
            u -= per
            k += 1
        if side and u == 0:
            u = per
            k -= 1
        j = _search(b.pat_lo, b0, b1, u, side) - 1
        if j < b0:
            j = b0
        if j > b1 - 1:
            j = b1 - 1
        coef[0] = b.pat_c + 4 * j
        x[0] = u - b.pat_lo[j]
        off[0] = b.FTp[fid] + k * b.IP[fid] + b.pat_F[j]
        return 1
    a0 = b.pre_off[fid]
    a1 = b.pre_off[fid + 1]
    j = _search(b.pre_lo, a0, a1, t, side) - 1
    if j < a0:
        return 0
    coef[0] = b.pre_c + 4 * j
    x[0] = t - b.pre_lo[j]
    off[0] = b.pre_F[j]
    return 1


cdef inline double _eval1(Bank* b, int fid, double t, int side) nogil:
    cdef double* c
    cdef double x, off
    if not _locate(b, fid, t, side, &c, &x, &off):
        return NAN
    return c[0] + x * (c[1] + x * (c[2] + x * c[3]))


cdef inline double _anti1(Bank* b, int fid, double t) nogil:
    cdef double* c
    cdef double x, off
    if not _locate(b, fid, t, 0, &c, &x, &off):
        return NAN
    return off + x * (c[0] + x * (c[1] / 2 + x * (c[2] / 3 + x * c[3] / 4)))


def pw_eval(bank, int fid, t, int side=0):
    """Evaluate function ``fid`` at points ``t`` (left limits if side=1)."""
    cdef _BankRef ref = _BankRef(bank)
    cdef double[::1] tv = np.ascontiguousarray(t, dtype=np.float64).ravel()
    cdef Py_ssize_t i, n = tv.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    with nogil:
        for i in range(n):
            ov[i] = _eval1(&ref.b, fid, tv[i], side)
    return out.reshape(np.shape(t))


def pw_antideriv(bank, int fid, t):
    """Integral of function ``fid`` from its domain start to each ``t``."""
    cdef _BankRef ref = _BankRef(bank)
    cdef double[::1] tv = np.ascontiguousarray(t, dtype=np.float64).ravel()
    cdef Py_ssize_t i, n = tv.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    with nogil:
        for i in range(n):
            ov[i] = _anti1(&ref.b, fid, tv[i])
    return out.reshape(np.shape(t))


def hermite_eval(knots, y, sl, sr, q):
    """Cubic Hermite interpolation with per-interval end slopes."""
    cdef double[::1] kv = np.ascontiguousarray(knots, dtype=np.float64)
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef double[::1] lv = np.ascontiguousarray(sl, dtype=np.float64)
    cdef double[::1] rv = np.ascontiguousarray(sr, dtype=np.float64)
    cdef double[::1] qv = np.ascontiguousarray(q, dtype=np.float64).ravel()
    cdef Py_ssize_t n = kv.shape[0], nq = qv.shape[0], i
    cdef long long j
    cdef double h, s, s2, s3, v
    out = np.empty(nq, dtype=np.float64)
    cdef double[::1] ov = out
    with nogil:
        for i in range(nq):
            v = qv[i]
            if v < kv[0] or v > kv[n - 1]:
                ov[i] = NAN
                continue
            j = _search(&kv[0], 0, n, v, 0) - 1
            if j > n - 2:
                j = n - 2
            if j < 0:
                j = 0
            h = kv[j + 1] - kv[j]
            s = (v - kv[j]) / h
            s2 = s * s
            s3 = s2 * s
            ov[i] = ((2 * s3 - 3 * s2 + 1) * yv[j] + (s3 - 2 * s2 + s) * h * lv[j]
                     + (-2 * s3 + 3 * s2) * yv[j + 1] + (s3 - s2) * h * rv[j])
    return out.reshape(np.shape(q))


cdef struct March:
    Bank* b
    Bank* hb
    int hist_kind
    double c_h
    double rate_h
    double* g
    double* x
    double* dxl
    double* dxr
    long long* p_ids
    long long* d_ids
    long long* zero
    int m
    long long sign_viol
    long long instep


cdef inline double _hist(March* M, double s) nogil:
    if M.hist_kind == 0:
        return M.c_h
    if M.hist_kind == 1:
        return M.c_h * exp(-M.rate_h * s)
    return _eval1(M.hb, 0, s, 0)


cdef inline double _cubic(March* M, long long j, double s) nogil:
    cdef double h = M.g[j + 1] - M.g[j]
    cdef double u = (s - M.g[j]) / h
    cdef double u2 = u * u
    cdef double u3 = u2 * u
    return ((2 * u3 - 3 * u2 + 1) * M.x[j] + (u3 - 2 * u2 + u) * h * M.dxl[j]
            + (-2 * u3 + 3 * u2) * M.x[j + 1] + (u3 - u2) * h * M.dxr[j])


cdef inline double _lookup(March* M, double s, long long k) nogil:
    cdef long long j
    if s <= M.g[0]:
        return _hist(M, s)
    if s <= M.g[k]:
        j = _search(M.g, 0, k + 1, s, 1) - 1
        if j > k - 1:
            j = k - 1
        if j < 0:
            j = 0
        return _cubic(M, j, s)
    M.instep += 1
    if k == 0:
        return M.x[0]
    return _cubic(M, k - 1, s)


cdef inline double _rhs(March* M, double t, double xs, int side, long long k, int check) nogil:
    cdef double acc = 0.0, pi, v
    cdef int allpos = 1
    cdef int i
    for i in range(M.m):
        pi = _eval1(M.b, <int> M.p_ids[i], t, side)
        if M.zero[i]:
            v = xs
        else:
            v = _lookup(M, t - _eval1(M.b, <int> M.d_ids[i], t, side), k)
        if v <= 0:
            allpos = 0
        acc -= pi * v
    if check and allpos and acc > 1e-14 * (abs(xs) + 1e-300):
        M.sign_viol += 1
    return acc


def rk4_march(bank, p_ids, d_ids, zero_flags, int hist_kind, hist_params, hist_bank, grid):
    """Classical RK4 method-of-steps march; see the Python fallback."""
    cdef _BankRef ref = _BankRef(bank)
    cdef _BankRef href = _BankRef(hist_bank if hist_kind == 2 else bank)
    g_arr = np.ascontiguousarray(grid, dtype=np.float64)
    cdef Py_ssize_t n = g_arr.shape[0] - 1
    x = np.zeros(n + 1, dtype=np.float64)
    dxl = np.zeros(max(n, 1), dtype=np.float64)
    dxr = np.zeros(max(n, 1), dtype=np.float64)
    pid = np.ascontiguousarray(p_ids, dtype=np.int64)
    did = np.ascontiguousarray(d_ids, dtype=np.int64)
    zf = np.ascontiguousarray(zero_flags, dtype=np.int64)
    cdef March M
    M.b = &ref.b
    M.hb = &href.b
    M.hist_kind = hist_kind
    M.c_h = float(hist_params[0])
    M.rate_h = float(hist_params[1])
    M.g = <double*> cnp.PyArray_DATA(g_arr)
    M.x = <double*> cnp.PyArray_DATA(x)
    M.dxl = <double*> cnp.PyArray_DATA(dxl)
    M.dxr = <double*> cnp.PyArray_DATA(dxr)
    M.p_ids = <long long*> cnp.PyArray_DATA(pid)
    M.d_ids = <long long*> cnp.PyArray_DATA(did)
    M.zero = <long long*> cnp.PyArray_DATA(zf)
    M.m = <int> pid.shape[0]
    M.sign_viol = 0
    M.instep = 0
    cdef Py_ssize_t k
    cdef double tk, tk1, h, xk, k1, k2, k3, k4, tm
    with nogil:
        M.x[0] = _hist(&M, M.g[0])
        for k in range(n):
            tk = M.g[k]
            tk1 = M.g[k + 1]
            h = tk1 - tk
            xk = M.x[k]
            k1 = _rhs(&M, tk, xk, 0, k, 0)
            tm = tk + 0.5 * h
            k2 = _rhs(&M, tm, xk + 0.5 * h * k1, 0, k, 0)
            k3 = _rhs(&M, tm, xk + 0.5 * h * k2, 0, k, 0)
            k4 = _rhs(&M, tk1, xk + h * k3, 1, k, 0)
            M.x[k + 1] = xk + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            M.dxl[k] = k1
            M.dxr[k] = _rhs(&M, tk1, M.x[k + 1], 1, k, 1)
    return x, dxl[:n], dxr[:n], int(M.sign_viol), int(M.instep)
