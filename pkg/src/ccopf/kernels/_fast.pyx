# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled twin of ccopf.kernels.pure.

Same Cody erfc and Acklam+Halley quantile, evaluated per element in C. Keep
the arithmetic in the same order as the NumPy backend; the build sets
-ffp-contract=off so results match to within the exp() implementation.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log, sqrt, trunc, INFINITY, NAN

cnp.import_array()

cdef double SQRT2 = 1.4142135623730950488016887
cdef double INV_SQRT_PI = 0.56418958354775628695
cdef double INV_SQRT_2PI = 0.39894228040143267794
cdef double ERFC_THRESH = 0.46875
cdef double ERFC_XBIG = 26.543
cdef double AK_PLOW = 0.02425

cdef double[4] C1A = [3.16112374387056560e0, 1.13864154151050156e2,
                      3.77485237685302021e2, 3.20937758913846947e3]
cdef double C1A4 = 1.85777706184603153e-1
cdef double[4] C1B = [2.36012909523441209e1, 2.44024637934444173e2,
                      1.28261652607737228e3, 2.84423683343917062e3]

cdef double[8] C2C = [5.64188496988670089e-1, 8.88314979438837594e0,
                      6.61191906371416295e1, 2.98635138197400131e2,
                      8.81952221241769090e2, 1.71204761263407058e3,
                      2.05107837782607147e3, 1.23033935479799725e3]
cdef double C2C8 = 2.15311535474403846e-8
cdef double[8] C2D = [1.57449261107098347e1, 1.17693950891312499e2,
                      5.37181101862009858e2, 1.62138957456669019e3,
                      3.29079923573345963e3, 4.36261909014324716e3,
                      3.43936767414372164e3, 1.23033935480374942e3]

cdef double[5] C3P = [3.05326634961232344e-1, 3.60344899949804439e-1,
                      1.25781726111229246e-1, 1.60837851487422766e-2,
                      6.58749161529837803e-4]
cdef double C3P5 = 1.63153871373020978e-2
cdef double[5] C3Q = [2.56852019228982242e0, 1.87295284992346047e0,
                      5.27905102951428412e-1, 6.05183413124413191e-2,
                      2.33520497626869185e-3]

cdef double[6] AKA = [-3.969683028665376e+01, 2.209460984245205e+02,
                      -2.759285104469687e+02, 1.383577518672690e+02,
                      -3.066479806614716e+01, 2.506628277459239e+00]
cdef double[5] AKB = [-5.447609879822406e+01, 1.615858368580409e+02,
                      -1.556989798598866e+02, 6.680131188771972e+01,
                      -1.328068155288572e+01]
cdef double[6] AKC = [-7.784894002430293e-03, -3.223964580411365e-01,
                      -2.400758277161838e+00, -2.549732539343734e+00,
                      4.374664141464968e+00, 2.938163982698783e+00]
cdef double[4] AKD = [7.784695709041462e-03, 3.224671290700398e-01,
                      2.445134137142996e+00, 3.754408661907416e+00]


cdef inline double _erfc_pos(double y) noexcept nogil:
    cdef double ysq, num, den, r, dl, inv
    cdef int i
    if y <= ERFC_THRESH:
        ysq = y * y
        num = C1A4 * ysq
        den = ysq
        for i in range(3):
            num = (num + C1A[i]) * ysq
            den = (den + C1B[i]) * ysq
        return 1.0 - y * (num + C1A[3]) / (den + C1B[3])
    if y <= 4.0:
        num = C2C8 * y
        den = y
        for i in range(7):
            num = (num + C2C[i]) * y
            den = (den + C2D[i]) * y
        r = (num + C2C[7]) / (den + C2D[7])
        ysq = trunc(y * 16.0) / 16.0
        dl = (y - ysq) * (y + ysq)
        return exp(-ysq * ysq) * exp(-dl) * r
    if y >= ERFC_XBIG:
        return 0.0
    inv = 1.0 / (y * y)
    num = C3P5 * inv
    den = inv
    for i in range(4):
        num = (num + C3P[i]) * inv
        den = (den + C3Q[i]) * inv
    r = inv * (num + C3P[4]) / (den + C3Q[4])
    r = (INV_SQRT_PI - r) / y
    ysq = trunc(y * 16.0) / 16.0
    dl = (y - ysq) * (y + ysq)
    return exp(-ysq * ysq) * exp(-dl) * r


cdef inline double _erfc(double x) noexcept nogil:
    if x < 0.0:
        return 2.0 - _erfc_pos(-x)
    return _erfc_pos(x)


cdef inline double _cdf(double z) noexcept nogil:
    return 0.5 * _erfc(-z / SQRT2)


cdef inline double _sf(double z) noexcept nogil:
    return 0.5 * _erfc(z / SQRT2)


cdef inline double _pdf(double z) noexcept nogil:
    return INV_SQRT_2PI * exp(-0.5 * z * z)


cdef inline double _acklam(double p) noexcept nogil:
    cdef double q, r, num, den
    if p < AK_PLOW:
        q = sqrt(-2.0 * log(p))
        num = ((((AKC[0] * q + AKC[1]) * q + AKC[2]) * q + AKC[3]) * q + AKC[4]) * q + AKC[5]
        den = (((AKD[0] * q + AKD[1]) * q + AKD[2]) * q + AKD[3]) * q + 1.0
        return num / den
    if p > 1.0 - AK_PLOW:
        q = sqrt(-2.0 * log(1.0 - p))
        num = ((((AKC[0] * q + AKC[1]) * q + AKC[2]) * q + AKC[3]) * q + AKC[4]) * q + AKC[5]
        den = (((AKD[0] * q + AKD[1]) * q + AKD[2]) * q + AKD[3]) * q + 1.0
        return -num / den
    q = p - 0.5
    r = q * q
    num = ((((AKA[0] * r + AKA[1]) * r + AKA[2]) * r + AKA[3]) * r + AKA[4]) * r + AKA[5]
    den = ((((AKB[0] * r + AKB[1]) * r + AKB[2]) * r + AKB[3]) * r + AKB[4]) * r + 1.0
    return q * num / den


cdef inline double _ppf(double p) noexcept nogil:
    cdef double x, phi, err, u
    cdef int k
    if p <= 0.0:
        return -INFINITY if p == 0.0 else NAN
    if p >= 1.0:
        return INFINITY if p == 1.0 else NAN
    x = _acklam(p)
    for k in range(2):
        phi = _pdf(x)
        if phi <= 0.0:
            break
        if p <= 0.5:
            err = _cdf(x) - p
        else:
            err = (1.0 - p) - _sf(x)
        u = err / phi
        x = x - u / (1.0 + 0.5 * x * u)
    return x


def erfc(cnp.ndarray[cnp.float64_t, ndim=1] x not None):
    cdef Py_ssize_t i, n = x.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    for i in range(n):
        out[i] = _erfc(x[i])
    return out


def norm_pdf(cnp.ndarray[cnp.float64_t, ndim=1] z not None):
    cdef Py_ssize_t i, n = z.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    for i in range(n):
        out[i] = _pdf(z[i])
    return out


def norm_cdf(cnp.ndarray[cnp.float64_t, ndim=1] z not None):
    cdef Py_ssize_t i, n = z.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    for i in range(n):
        out[i] = _cdf(z[i])
    return out


def norm_sf(cnp.ndarray[cnp.float64_t, ndim=1] z not None):
    cdef Py_ssize_t i, n = z.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    for i in range(n):
        out[i] = _sf(z[i])
    return out


def norm_ppf(cnp.ndarray[cnp.float64_t, ndim=1] p not None):
    cdef Py_ssize_t i, n = p.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    for i in range(n):
        out[i] = _ppf(p[i])
    return out


def norm_isf(cnp.ndarray[cnp.float64_t, ndim=1] p not None):
    cdef Py_ssize_t i, n = p.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    for i in range(n):
        out[i] = -_ppf(p[i])
    return out


def tail_quantile(double beta, double p_tail,
                  cnp.ndarray[cnp.float64_t, ndim=1] u not None):
    cdef Py_ssize_t i, n = u.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double y
    for i in range(n):
        y = -_ppf(p_tail * u[i])
        out[i] = y if y > beta else beta
    return out
