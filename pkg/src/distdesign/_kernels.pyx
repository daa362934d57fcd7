# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled swap-search kernels.

Same contracts as ``_pykernels``; arithmetic mirrors it step for step so the
two backends agree bit for bit on identical random streams.
"""
from libc.math cimport exp, log, log1p, sqrt, pow, fabs, INFINITY
from libc.stdlib cimport malloc, free, qsort

NAME = "cython"

cdef double CF_TOL = 1e-12
cdef int CF_MAXIT = 300
cdef double FPMIN = 1e-300


cdef double _betacf(double a, double b, double x) noexcept nogil:
    cdef double qab = a + b
    cdef double qap = a + 1.0
    cdef double qam = a - 1.0
    cdef double c = 1.0
    cdef double d = 1.0 - qab * x / qap
    cdef double h, aa, delta
    cdef int m, m2
    if fabs(d) < FPMIN:
        d = FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, CF_MAXIT + 1):
        m2 = 2 * m
        aa = <double>m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if fabs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if fabs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if fabs(d) < FPMIN:
            d = FPMIN
        c = 1.0 + aa / c
        if fabs(c) < FPMIN:
            c = FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if fabs(delta - 1.0) < CF_TOL:
            break
    return h


cdef double _betainc(double a, double b, double x, double log_norm) noexcept nogil:
    cdef double front
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    front = exp(log_norm + a * log(x) + b * log1p(-x))
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def betainc_reg(double a, double b, double x, double log_norm):
    """Compiled ``I_x(a, b)``; exposed for backend parity tests."""
    return _betainc(a, b, x, log_norm)


cdef inline double _cdf(int code, double a, double b, double scale,
                        double log_norm, double x) noexcept nogil:
    cdef double u = x / scale
    if code == 0:
        if u < 0.0:
            return 0.0
        if u > 1.0:
            return 1.0
        return u
    return _betainc(a, b, u, log_norm)


cdef int _cmp(const void* p, const void* q) noexcept nogil:
    cdef double x = (<const double*>p)[0]
    cdef double y = (<const double*>q)[0]
    return (x > y) - (x < y)


cdef double _ks(const double* F, Py_ssize_t K) noexcept nogil:
    cdef double best_up = -INFINITY
    cdef double best_lo = -INFINITY
    cdef double v
    cdef Py_ssize_t k
    for k in range(K):
        v = <double>(k + 1) / <double>K - F[k]
        if v > best_up:
            best_up = v
        v = F[k] - <double>k / <double>K
        if v > best_lo:
            best_lo = v
    return best_up if best_up > best_lo else best_lo


cdef void _replace(const double* s, Py_ssize_t K, double* old, double* new,
                   Py_ssize_t m, double* out) noexcept nogil:
    # out <- s minus multiset old, plus multiset new; all sorted
    cdef Py_ssize_t k, p = 0, q = 0, o = 0
    cdef double v
    qsort(old, m, sizeof(double), _cmp)
    qsort(new, m, sizeof(double), _cmp)
    for k in range(K):
        v = s[k]
        if p < m and v == old[p]:
            p += 1
            continue
        while q < m and new[q] < v:
            out[o] = new[q]
            o += 1
            q += 1
        out[o] = v
        o += 1
    while q < m:
        out[o] = new[q]
        o += 1
        q += 1


cdef inline double _dist(const double* x, const double* y, Py_ssize_t d) noexcept nogil:
    cdef double diff = y[0] - x[0]
    cdef double s = diff * diff
    cdef Py_ssize_t k
    for k in range(1, d):
        diff = y[k] - x[k]
        s = s + diff * diff
    return sqrt(s)


cdef class _KsdState:
    """Pair-CDF matrix, sorted CDF vector and scratch space for one search."""
    cdef Py_ssize_t n, d, K
    cdef int code
    cdef double a, b, scale, log_norm
    cdef double* Fm
    cdef double* s
    cdef double* out
    cdef double* old
    cdef double* new
    cdef double* newF
    cdef int* is_moved
    cdef double value

    def __cinit__(self, double[:, ::1] X, int code, double a, double b,
                  double scale, double log_norm):
        cdef Py_ssize_t i, j, c = 0
        cdef double v
        self.n = X.shape[0]
        self.d = X.shape[1]
        self.K = self.n * (self.n - 1) // 2
        self.code = code
        self.a = a
        self.b = b
        self.scale = scale
        self.log_norm = log_norm
        self.Fm = <double*>malloc(self.n * self.n * sizeof(double))
        self.s = <double*>malloc(self.K * sizeof(double))
        self.out = <double*>malloc(self.K * sizeof(double))
        self.old = <double*>malloc(2 * self.n * sizeof(double))
        self.new = <double*>malloc(2 * self.n * sizeof(double))
        self.newF = <double*>malloc(2 * self.n * sizeof(double))
        self.is_moved = <int*>malloc(self.n * sizeof(int))
        if (self.Fm == NULL or self.s == NULL or self.out == NULL or self.old == NULL
                or self.new == NULL or self.newF == NULL or self.is_moved == NULL):
            raise MemoryError()
        for i in range(self.n):
            self.is_moved[i] = 0
            self.Fm[i * self.n + i] = 0.0
        for i in range(self.n - 1):
            for j in range(i + 1, self.n):
                v = _cdf(code, a, b, scale, log_norm, _dist(&X[i, 0], &X[j, 0], self.d))
                self.Fm[i * self.n + j] = v
                self.Fm[j * self.n + i] = v
                self.s[c] = v
                c += 1
        qsort(self.s, self.K, sizeof(double), _cmp)
        self.value = _ks(self.s, self.K)

    def __dealloc__(self):
        free(self.Fm)
        free(self.s)
        free(self.out)
        free(self.old)
        free(self.new)
        free(self.newF)
        free(self.is_moved)

    cdef double price(self, double[:, ::1] X, Py_ssize_t* moved, int nm,
                      const double* rows) noexcept nogil:
        # rows: nm x d proposed coordinates, moved ascending
        cdef Py_ssize_t pos, q, j, m = 0
        cdef Py_ssize_t n = self.n, d = self.d
        cdef double v
        for pos in range(nm):
            self.is_moved[moved[pos]] = 1
        for pos in range(nm):
            for j in range(n):
                if self.is_moved[j]:
                    continue
                v = _cdf(self.code, self.a, self.b, self.scale, self.log_norm,
                         _dist(&X[j, 0], &rows[pos * d], d))
                self.old[m] = self.Fm[moved[pos] * n + j]
                self.new[m] = v
                self.newF[pos * n + j] = v
                m += 1
            for q in range(pos + 1, nm):
                v = _cdf(self.code, self.a, self.b, self.scale, self.log_norm,
                         _dist(&rows[q * d], &rows[pos * d], d))
                self.old[m] = self.Fm[moved[pos] * n + moved[q]]
                self.new[m] = v
                self.newF[pos * n + moved[q]] = v
                m += 1
        for pos in range(nm):
            self.is_moved[moved[pos]] = 0
        _replace(self.s, self.K, self.old, self.new, m, self.out)
        return _ks(self.out, self.K)

    cdef void commit(self, Py_ssize_t* moved, int nm, double val) noexcept nogil:
        cdef Py_ssize_t pos, q, j, i
        cdef Py_ssize_t n = self.n
        cdef double* tmp
        for pos in range(nm):
            self.is_moved[moved[pos]] = 1
        for pos in range(nm):
            i = moved[pos]
            for j in range(n):
                if self.is_moved[j]:
                    continue
                self.Fm[i * n + j] = self.newF[pos * n + j]
                self.Fm[j * n + i] = self.newF[pos * n + j]
            for q in range(pos + 1, nm):
                j = moved[q]
                self.Fm[i * n + j] = self.newF[pos * n + j]
                self.Fm[j * n + i] = self.newF[pos * n + j]
        for pos in range(nm):
            self.is_moved[moved[pos]] = 0
        tmp = self.s
        self.s = self.out
        self.out = tmp
        self.value = val


def ksd_search(double[:, ::1] X, int code, double a, double b, double scale,
               double log_norm, const long[::1] idx, const double[:, ::1] props,
               double[::1] trace):
    cdef _KsdState st = _KsdState(X, code, a, b, scale, log_norm)
    cdef Py_ssize_t S = idx.shape[0], d = X.shape[1]
    cdef Py_ssize_t s, k
    cdef Py_ssize_t moved[1]
    cdef double val
    cdef long accepted = 0
    trace[0] = st.value
    with nogil:
        for s in range(S):
            moved[0] = idx[s]
            val = st.price(X, moved, 1, &props[s, 0])
            if val < st.value:
                for k in range(d):
                    X[moved[0], k] = props[s, k]
                st.commit(moved, 1, val)
                accepted += 1
            trace[s + 1] = st.value
    return accepted


def lhs_ksd_search(long[:, ::1] L, double[:, ::1] J, double[:, ::1] X, int code,
                   double a, double b, double scale, double log_norm,
                   const long[::1] pi, const long[::1] pj, const long[::1] pk,
                   const double[:, ::1] rejit, double[::1] trace):
    cdef _KsdState st = _KsdState(X, code, a, b, scale, log_norm)
    cdef Py_ssize_t S = pi.shape[0], n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t s, c, i, j, k
    cdef Py_ssize_t moved[2]
    cdef long Li_k, Lj_k, li, lj
    cdef double val
    cdef long accepted = 0
    cdef double* rows = <double*>malloc(2 * d * sizeof(double))
    cdef double* xi
    cdef double* xj
    if rows == NULL:
        raise MemoryError()
    trace[0] = st.value
    try:
        with nogil:
            for s in range(S):
                i = pi[s]
                j = pj[s]
                k = pk[s]
                if i < j:
                    moved[0] = i
                    moved[1] = j
                    xi = rows
                    xj = rows + d
                else:
                    moved[0] = j
                    moved[1] = i
                    xj = rows
                    xi = rows + d
                for c in range(d):
                    li = L[i, c]
                    lj = L[j, c]
                    if c == k:
                        li = L[j, c]
                        lj = L[i, c]
                    xi[c] = (<double>(li - 1) + rejit[s, c]) / n
                    xj[c] = (<double>(lj - 1) + rejit[s, d + c]) / n
                val = st.price(X, moved, 2, rows)
                if val < st.value:
                    Li_k = L[i, k]
                    L[i, k] = L[j, k]
                    L[j, k] = Li_k
                    for c in range(d):
                        J[i, c] = rejit[s, c]
                        J[j, c] = rejit[s, d + c]
                        X[i, c] = xi[c]
                        X[j, c] = xj[c]
                    st.commit(moved, 2, val)
                    accepted += 1
                trace[s + 1] = st.value
    finally:
        free(rows)
    return accepted


def maximin_search(double[:, ::1] X, const long[::1] idx, const double[:, ::1] props,
                   double[::1] trace):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t K = n * (n - 1) // 2
    cdef Py_ssize_t S = idx.shape[0]
    cdef Py_ssize_t i, j, s, k, m, c = 0
    cdef double v
    cdef long accepted = 0
    cdef bint better
    cdef double* Dm = <double*>malloc(n * n * sizeof(double))
    cdef double* cur = <double*>malloc(K * sizeof(double))
    cdef double* out = <double*>malloc(K * sizeof(double))
    cdef double* old = <double*>malloc(n * sizeof(double))
    cdef double* new = <double*>malloc(n * sizeof(double))
    cdef double* newD = <double*>malloc(n * sizeof(double))
    cdef double* tmp
    if Dm == NULL or cur == NULL or out == NULL or old == NULL or new == NULL or newD == NULL:
        free(Dm); free(cur); free(out); free(old); free(new); free(newD)
        raise MemoryError()
    with nogil:
        for i in range(n - 1):
            for j in range(i + 1, n):
                v = _dist(&X[i, 0], &X[j, 0], d)
                Dm[i * n + j] = v
                Dm[j * n + i] = v
                cur[c] = v
                c += 1
        qsort(cur, K, sizeof(double), _cmp)
        trace[0] = cur[0]
        for s in range(S):
            i = idx[s]
            m = 0
            for j in range(n):
                if j == i:
                    continue
                v = _dist(&X[j, 0], &props[s, 0], d)
                old[m] = Dm[i * n + j]
                new[m] = v
                newD[j] = v
                m += 1
            _replace(cur, K, old, new, m, out)
            better = False
            for k in range(K):
                if out[k] != cur[k]:
                    better = out[k] > cur[k]
                    break
            if better:
                for k in range(d):
                    X[i, k] = props[s, k]
                for j in range(n):
                    if j != i:
                        Dm[i * n + j] = newD[j]
                        Dm[j * n + i] = newD[j]
                tmp = cur
                cur = out
                out = tmp
                accepted += 1
            trace[s + 1] = cur[0]
    free(Dm); free(cur); free(out); free(old); free(new); free(newD)
    return accepted


cdef double _phi_sum(const double* Dm, Py_ssize_t n, double p) noexcept nogil:
    cdef double total = 0.0
    cdef double v
    cdef Py_ssize_t i, j
    for i in range(n - 1):
        for j in range(i + 1, n):
            v = Dm[i * n + j]
            if v == 0.0:
                total += INFINITY
            else:
                total += pow(v, -p)
    return total


def phip_search(double[:, ::1] X, double p, const long[::1] idx,
                const double[:, ::1] props, double[::1] trace):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t S = idx.shape[0]
    cdef Py_ssize_t i, j, s, k
    cdef double v, cur, val
    cdef long accepted = 0
    cdef double* Dm = <double*>malloc(n * n * sizeof(double))
    cdef double* old = <double*>malloc(n * sizeof(double))
    if Dm == NULL or old == NULL:
        free(Dm); free(old)
        raise MemoryError()
    with nogil:
        for i in range(n):
            Dm[i * n + i] = 0.0
        for i in range(n - 1):
            for j in range(i + 1, n):
                v = _dist(&X[i, 0], &X[j, 0], d)
                Dm[i * n + j] = v
                Dm[j * n + i] = v
        cur = _phi_sum(Dm, n, p)
        trace[0] = pow(cur, 1.0 / p)
        for s in range(S):
            i = idx[s]
            for j in range(n):
                if j == i:
                    continue
                old[j] = Dm[i * n + j]
                v = _dist(&X[j, 0], &props[s, 0], d)
                Dm[i * n + j] = v
                Dm[j * n + i] = v
            val = _phi_sum(Dm, n, p)
            if val < cur:
                for k in range(d):
                    X[i, k] = props[s, k]
                cur = val
                accepted += 1
            else:
                for j in range(n):
                    if j != i:
                        Dm[i * n + j] = old[j]
                        Dm[j * n + i] = old[j]
            trace[s + 1] = pow(cur, 1.0 / p)
    free(Dm); free(old)
    return accepted
