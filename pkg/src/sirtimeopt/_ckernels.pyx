# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the routines in ``_pykernels``."""
from libc.math cimport fabs, isfinite, NAN

ERADICATED = 0
HORIZON = 1
STEP_FAILURE = 2
NEGATIVE_STATE = 3


cdef inline double _max3(double a, double b, double c) nogil:
    cdef double m = a
    if b > m:
        m = b
    if c > m:
        m = c
    return m


cdef int _cn_step(double b, double c1, double c2, double mu, double s, double i,
                  double dt, double tol, int max_iter,
                  double* out_s, double* out_i) noexcept nogil:
    cdef double h = 0.5 * dt
    cdef double fs0 = -b * s * i - c1 * s
    cdef double fi0 = b * s * i - (mu + c2) * i
    cdef double rs0 = s + h * fs0
    cdef double ri0 = i + h * fi0
    cdef double scale = tol * _max3(1.0, fabs(s), fabs(i))
    cdef double ys = s, yi = i, inf, gs, gi
    cdef double j11, j12, j21, j22, det, ns, ni
    cdef int it

    for it in range(max_iter):
        inf = b * ys * yi
        gs = ys - rs0 - h * (-inf - c1 * ys)
        gi = yi - ri0 - h * (inf - (mu + c2) * yi)
        if fabs(gs) <= scale and fabs(gi) <= scale:
            out_s[0] = ys
            out_i[0] = yi
            return 1
        j11 = 1.0 + h * (b * yi + c1)
        j12 = h * b * ys
        j21 = -h * b * yi
        j22 = 1.0 - h * (b * ys - mu - c2)
        det = j11 * j22 - j12 * j21
        if det == 0.0 or not isfinite(det):
            break
        ys -= (j22 * gs - j12 * gi) / det
        yi -= (j11 * gi - j21 * gs) / det
        if not (isfinite(ys) and isfinite(yi)):
            break

    ys = s
    yi = i
    for it in range(50 * max_iter):
        inf = b * ys * yi
        ns = rs0 + h * (-inf - c1 * ys)
        ni = ri0 + h * (inf - (mu + c2) * yi)
        if fabs(ns - ys) <= scale and fabs(ni - yi) <= scale:
            out_s[0] = ns
            out_i[0] = ni
            return 1
        ys = 0.5 * (ys + ns)
        yi = 0.5 * (yi + ni)
        if not (isfinite(ys) and isfinite(yi)):
            break
    out_s[0] = ys
    out_i[0] = yi
    return 0


cdef double _hermite_crossing(double b, double c2, double mu, double s0, double i0,
                              double s1, double i1, double dt, double eps) noexcept nogil:
    cdef double d0 = dt * (b * s0 * i0 - (mu + c2) * i0)
    cdef double d1 = dt * (b * s1 * i1 - (mu + c2) * i1)
    cdef double lo = 0.0, hi = 1.0, th, t2, t3, p
    cdef int it
    for it in range(60):
        th = 0.5 * (lo + hi)
        t2 = th * th
        t3 = t2 * th
        p = ((2.0 * t3 - 3.0 * t2 + 1.0) * i0 + (t3 - 2.0 * t2 + th) * d0
             + (-2.0 * t3 + 3.0 * t2) * i1 + (t3 - t2) * d1)
        if p > eps:
            lo = th
        else:
            hi = th
    return hi


def cn_step(double b, double c1, double c2, double mu, double s, double i,
            double dt, double tol, int max_iter):
    cdef double ns = 0.0, ni = 0.0
    cdef int ok = _cn_step(b, c1, c2, mu, s, i, dt, tol, max_iter, &ns, &ni)
    return bool(ok), ns, ni


def integrate(double b0, double c10, double c20, double b1, double c11, double c21,
              double mu, double s, double i, long k0, long k_switch, long k_max,
              double dt, double eps, double tol, int max_iter,
              double[::1] s_out=None, double[::1] i_out=None):
    cdef bint record = s_out is not None
    cdef double worst = 0.0, ns = 0.0, ni = 0.0, floor, b, c1, c2, th
    cdef long k = k0
    cdef int ok
    with nogil:
        while k < k_max:
            if k >= k_switch:
                b = b1
                c1 = c11
                c2 = c21
            else:
                b = b0
                c1 = c10
                c2 = c20
            ok = _cn_step(b, c1, c2, mu, s, i, dt, tol, max_iter, &ns, &ni)
            if not ok:
                with gil:
                    return STEP_FAILURE, k, s, i, NAN, worst
            if ns < 0.0 or ni < 0.0:
                floor = -tol * _max3(1.0, fabs(s), fabs(i))
                if ns < worst:
                    worst = ns
                if ni < worst:
                    worst = ni
                if ns < floor or ni < floor:
                    with gil:
                        return NEGATIVE_STATE, k, s, i, NAN, worst
                if ns < 0.0:
                    ns = 0.0
                if ni < 0.0:
                    ni = 0.0
            k += 1
            if record:
                s_out[k] = ns
                i_out[k] = ni
            if ni <= eps:
                th = _hermite_crossing(b, c2, mu, s, i, ns, ni, dt, eps)
                with gil:
                    return ERADICATED, k, ns, ni, (k - 1 + th) * dt, worst
            s = ns
            i = ni
    return HORIZON, k, s, i, NAN, worst


def adjoint(double[::1] s_arr, double[::1] i_arr, long k_switch,
            double b0, double c10, double c20, double b1, double c11, double c21,
            double mu, double dt, double ls_end, double li_end,
            double[::1] ls_out, double[::1] li_out):
    cdef Py_ssize_t n = s_arr.shape[0] - 1
    cdef Py_ssize_t k
    cdef double h = 0.5 * dt
    cdef double ls = ls_end, li = li_end
    cdef double b, c1, c2, sp, ip, sk, ik, r1, r2, m11, m12, m21, m22, det
    ls_out[n] = ls
    li_out[n] = li
    with nogil:
        for k in range(n - 1, -1, -1):
            if k >= k_switch:
                b = b1
                c1 = c11
                c2 = c21
            else:
                b = b0
                c1 = c10
                c2 = c20
            sp = s_arr[k + 1]
            ip = i_arr[k + 1]
            r1 = ls - h * ((b * ip + c1) * ls - b * ip * li)
            r2 = li - h * (b * sp * ls + (mu + c2 - b * sp) * li)
            sk = s_arr[k]
            ik = i_arr[k]
            m11 = 1.0 + h * (b * ik + c1)
            m12 = -h * b * ik
            m21 = h * b * sk
            m22 = 1.0 + h * (mu + c2 - b * sk)
            det = m11 * m22 - m12 * m21
            ls = (m22 * r1 - m12 * r2) / det
            li = (m11 * r2 - m21 * r1) / det
            ls_out[k] = ls
            li_out[k] = li
