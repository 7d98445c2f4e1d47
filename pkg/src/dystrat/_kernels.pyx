# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Mirrors ``_kernels_py`` operation for operation."""
import numpy as np
cimport numpy as cnp
from libc.math cimport pow, sqrt
from libc.stdlib cimport malloc, free
from libc.string cimport memset

cnp.import_array()


def mackey_glass(double history, Py_ssize_t n_steps, Py_ssize_t delay_steps,
                 double dt, double beta, double gamma, double exponent):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n_steps + 1, dtype=np.float64)
    cdef double[::1] y = out
    cdef Py_ssize_t k, j
    cdef double d0, d1, dl, dr, dm, yk, k1, k2, k3, k4
    cdef double half = 0.5 * dt
    y[0] = history
    for k in range(n_steps):
        j = k - delay_steps
        d0 = y[j] if j >= 0 else history
        d1 = y[j + 1] if j + 1 >= 0 else history
        if delay_steps >= 2:
            dl = y[j - 1] if j - 1 >= 0 else history
            dr = y[j + 2] if j + 2 >= 0 else history
            dm = (9.0 * (d0 + d1) - (dl + dr)) / 16.0
        else:
            dm = 0.5 * (d0 + d1)
        yk = y[k]
        k1 = beta * d0 / (1.0 + pow(d0, exponent)) - gamma * yk
        k2 = beta * dm / (1.0 + pow(dm, exponent)) - gamma * (yk + half * k1)
        k3 = beta * dm / (1.0 + pow(dm, exponent)) - gamma * (yk + half * k2)
        k4 = beta * d1 / (1.0 + pow(d1, exponent)) - gamma * (yk + dt * k3)
        y[k + 1] = yk + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return out


def lorenz(double x0, double y0, double z0, Py_ssize_t n_steps, double dt,
           double sigma, double rho, double beta):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n_steps + 1, 3), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double x = x0, y = y0, z = z0
    cdef double a1, b1, c1, a2, b2, c2, a3, b3, c3, a4, b4, c4
    cdef double xs, ys, zs
    cdef double half = 0.5 * dt
    cdef Py_ssize_t k
    o[0, 0] = x
    o[0, 1] = y
    o[0, 2] = z
    for k in range(n_steps):
        a1 = sigma * (y - x)
        b1 = x * (rho - z) - y
        c1 = x * y - beta * z
        xs = x + half * a1
        ys = y + half * b1
        zs = z + half * c1
        a2 = sigma * (ys - xs)
        b2 = xs * (rho - zs) - ys
        c2 = xs * ys - beta * zs
        xs = x + half * a2
        ys = y + half * b2
        zs = z + half * c2
        a3 = sigma * (ys - xs)
        b3 = xs * (rho - zs) - ys
        c3 = xs * ys - beta * zs
        xs = x + dt * a3
        ys = y + dt * b3
        zs = z + dt * c3
        a4 = sigma * (ys - xs)
        b4 = xs * (rho - zs) - ys
        c4 = xs * ys - beta * zs
        x = x + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        y = y + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        z = z + dt / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
        o[k + 1, 0] = x
        o[k + 1, 1] = y
        o[k + 1, 2] = z
    return out


def interval_features(X, starts, ends):
    cdef const double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t n_int = len(starts)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((n, 3 * n_int), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef const Py_ssize_t[::1] st = np.asarray(starts, dtype=np.intp)
    cdef const Py_ssize_t[::1] en = np.asarray(ends, dtype=np.intp)
    cdef Py_ssize_t i, m, j, s, e, length
    cdef double total, mean, sq, d, tm, num, den, t
    for m in range(n_int):
        s = st[m]
        e = en[m]
        length = e - s
        tm = (length - 1) / 2.0
        den = 0.0
        for j in range(s, e):
            t = (j - s) - tm
            den += t * t
        for i in range(n):
            total = 0.0
            for j in range(s, e):
                total += x[i, j]
            mean = total / length
            sq = 0.0
            for j in range(s, e):
                d = x[i, j] - mean
                sq += d * d
            num = 0.0
            for j in range(s, e):
                t = (j - s) - tm
                num += t * (x[i, j] - mean)
            o[i, 3 * m] = mean
            o[i, 3 * m + 1] = sqrt(sq / length)
            o[i, 3 * m + 2] = num / den if den > 0 else 0.0
    return out


def build_tree(X, y, Py_ssize_t n_classes, Py_ssize_t max_depth=-1,
               Py_ssize_t min_samples_leaf=1):
    cdef const double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef const Py_ssize_t[::1] cls = np.ascontiguousarray(y, dtype=np.intp)
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t n_feat = x.shape[1]
    cdef Py_ssize_t f
    presorted = np.empty((n_feat, n), dtype=np.intp)
    xa = np.asarray(x)
    for f in range(n_feat):
        presorted[f] = np.argsort(xa[:, f], kind="stable")
    cdef Py_ssize_t[:, ::1] sidx = presorted

    cdef long long *cnt = <long long *> malloc(n_classes * sizeof(long long))
    cdef long long *lcnt = <long long *> malloc(n_classes * sizeof(long long))
    cdef Py_ssize_t *buf = <Py_ssize_t *> malloc(n * sizeof(Py_ssize_t))
    cdef char *go_left = <char *> malloc(n * sizeof(char))
    if cnt == NULL or lcnt == NULL or buf == NULL or go_left == NULL:
        free(cnt); free(lcnt); free(buf); free(go_left)
        raise MemoryError()

    feature, threshold, left, right, value = [], [], [], [], []
    cdef Py_ssize_t node, start, end, depth, i, c, s, nl, nr, n_node, nonzero
    cdef Py_ssize_t best_f, best_pos, n_l, a, b
    cdef long long sq_l, sq_r
    cdef double score, best_score, lo, hi, thr
    cdef cnp.ndarray[cnp.float64_t, ndim=1] counts_arr

    feature.append(-1); threshold.append(0.0); left.append(-1); right.append(-1); value.append(None)
    stack = [(0, 0, n, 0)]
    try:
        while stack:
            node, start, end, depth = stack.pop()
            n_node = end - start
            memset(cnt, 0, n_classes * sizeof(long long))
            for i in range(start, end):
                cnt[cls[sidx[0, i]]] += 1
            counts_arr = np.empty(n_classes, dtype=np.float64)
            nonzero = 0
            for c in range(n_classes):
                counts_arr[c] = <double> cnt[c]
                if cnt[c] > 0:
                    nonzero += 1
            value[node] = counts_arr
            if nonzero <= 1 or n_node < 2 * min_samples_leaf or depth == max_depth:
                continue

            best_f = -1
            best_pos = -1
            best_score = -1.0
            for f in range(n_feat):
                memset(lcnt, 0, n_classes * sizeof(long long))
                sq_l = 0
                sq_r = 0
                for c in range(n_classes):
                    sq_r += cnt[c] * cnt[c]
                for i in range(start, end - 1):
                    s = sidx[f, i]
                    c = cls[s]
                    sq_l += 2 * lcnt[c] + 1
                    sq_r -= 2 * (cnt[c] - lcnt[c]) - 1
                    lcnt[c] += 1
                    nl = i - start + 1
                    nr = n_node - nl
                    if nl < min_samples_leaf or nr < min_samples_leaf:
                        continue
                    if not (x[s, f] < x[sidx[f, i + 1], f]):
                        continue
                    score = (<double> sq_l) / (<double> nl) + (<double> sq_r) / (<double> nr)
                    if best_f < 0 or score > best_score:
                        best_f = f
                        best_pos = i - start
                        best_score = score
            if best_f < 0:
                continue

            lo = x[sidx[best_f, start + best_pos], best_f]
            hi = x[sidx[best_f, start + best_pos + 1], best_f]
            thr = (lo + hi) / 2.0
            if thr == hi:
                thr = lo
            n_l = best_pos + 1
            for i in range(start, end):
                go_left[sidx[best_f, i]] = 1 if i - start < n_l else 0
            for f in range(n_feat):
                a = 0
                b = n_l
                for i in range(start, end):
                    s = sidx[f, i]
                    if go_left[s]:
                        buf[a] = s
                        a += 1
                    else:
                        buf[b] = s
                        b += 1
                for i in range(n_node):
                    sidx[f, start + i] = buf[i]

            feature[node] = best_f
            threshold[node] = thr
            for _ in range(2):
                feature.append(-1); threshold.append(0.0); left.append(-1); right.append(-1); value.append(None)
            left[node] = len(feature) - 2
            right[node] = len(feature) - 1
            stack.append((len(feature) - 1, start + n_l, end, depth + 1))
            stack.append((len(feature) - 2, start, start + n_l, depth + 1))
    finally:
        free(cnt); free(lcnt); free(buf); free(go_left)

    return (
        np.array(feature, dtype=np.intp),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.intp),
        np.array(right, dtype=np.intp),
        np.array(value, dtype=np.float64).reshape(len(feature), n_classes),
    )


def apply_tree(X, feature, threshold, left, right):
    cdef const double[:, ::1] x = np.ascontiguousarray(X, dtype=np.float64)
    cdef const Py_ssize_t[::1] feat = np.ascontiguousarray(feature, dtype=np.intp)
    cdef const double[::1] thr = np.ascontiguousarray(threshold, dtype=np.float64)
    cdef const Py_ssize_t[::1] lft = np.ascontiguousarray(left, dtype=np.intp)
    cdef const Py_ssize_t[::1] rgt = np.ascontiguousarray(right, dtype=np.intp)
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.ndarray[cnp.intp_t, ndim=1] out = np.empty(n, dtype=np.intp)
    cdef Py_ssize_t i, nd
    for i in range(n):
        nd = 0
        while lft[nd] >= 0:
            if x[i, feat[nd]] <= thr[nd]:
                nd = lft[nd]
            else:
                nd = rgt[nd]
        out[i] = nd
    return out
