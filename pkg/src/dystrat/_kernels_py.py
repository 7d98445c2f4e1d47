"""Pure-Python/numpy implementations of the hot kernels.

Each function here has a compiled twin in ``_kernels.pyx`` with the same
signature and the same floating-point operation order, so both backends
return identical results. ``dystrat.kernels`` picks one at import.
"""
import math

import numpy as np


def mackey_glass(history, n_steps, delay_steps, dt, beta, gamma, exponent):
    """RK4 on the delay equation with constant history for t <= 0.

    Returns the ``n_steps + 1`` grid values starting at ``history``. The
    delayed value at half steps is the mean of the two neighbouring grid
    values.
    """
    y = [0.0] * (n_steps + 1)
    y[0] = float(history)
    h = float(history)
    half = 0.5 * dt
    for k in range(n_steps):
        j = k - delay_steps
        d0 = y[j] if j >= 0 else h
        d1 = y[j + 1] if j + 1 >= 0 else h
        if delay_steps >= 2:
            dl = y[j - 1] if j - 1 >= 0 else h
            dr = y[j + 2] if j + 2 >= 0 else h
            dm = (9.0 * (d0 + d1) - (dl + dr)) / 16.0
        else:
            dm = 0.5 * (d0 + d1)
        yk = y[k]
        k1 = beta * d0 / (1.0 + math.pow(d0, exponent)) - gamma * yk
        k2 = beta * dm / (1.0 + math.pow(dm, exponent)) - gamma * (yk + half * k1)
        k3 = beta * dm / (1.0 + math.pow(dm, exponent)) - gamma * (yk + half * k2)
        k4 = beta * d1 / (1.0 + math.pow(d1, exponent)) - gamma * (yk + dt * k3)
        y[k + 1] = yk + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return np.array(y, dtype=np.float64)


def _lorenz_rhs(x, y, z, sigma, rho, beta):
    return sigma * (y - x), x * (rho - z) - y, x * y - beta * z


def lorenz(x0, y0, z0, n_steps, dt, sigma, rho, beta):
    out = np.empty((n_steps + 1, 3), dtype=np.float64)
    x, y, z = float(x0), float(y0), float(z0)
    out[0] = (x, y, z)
    half = 0.5 * dt
    for k in range(n_steps):
        a1, b1, c1 = _lorenz_rhs(x, y, z, sigma, rho, beta)
        a2, b2, c2 = _lorenz_rhs(x + half * a1, y + half * b1, z + half * c1, sigma, rho, beta)
        a3, b3, c3 = _lorenz_rhs(x + half * a2, y + half * b2, z + half * c2, sigma, rho, beta)
        a4, b4, c4 = _lorenz_rhs(x + dt * a3, y + dt * b3, z + dt * c3, sigma, rho, beta)
        x = x + dt / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
        y = y + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
        z = z + dt / 6.0 * (c1 + 2.0 * c2 + 2.0 * c3 + c4)
        out[k + 1] = (x, y, z)
    return out


def interval_features(X, starts, ends):
    """(mean, std, slope) per interval, sequential sums left to right."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    n = X.shape[0]
    out = np.empty((n, 3 * len(starts)), dtype=np.float64)
    for m, (s, e) in enumerate(zip(starts, ends)):
        length = e - s
        total = np.zeros(n)
        for j in range(s, e):
            total += X[:, j]
        mean = total / length
        sq = np.zeros(n)
        for j in range(s, e):
            d = X[:, j] - mean
            sq += d * d
        tm = (length - 1) / 2.0
        num = np.zeros(n)
        den = 0.0
        for j in range(s, e):
            t = (j - s) - tm
            num += t * (X[:, j] - mean)
            den += t * t
        out[:, 3 * m] = mean
        out[:, 3 * m + 1] = np.sqrt(sq / length)
        out[:, 3 * m + 2] = num / den if den > 0 else 0.0
    return out


def build_tree(X, y, n_classes, max_depth=-1, min_samples_leaf=1):
    """Grow a gini classification tree with presorted feature columns.

    Returns ``(feature, threshold, left, right, value)``; leaves have
    ``left == right == -1`` and ``value`` holds per-class counts.
    Split candidates are scanned feature by feature, position by position,
    and only a strictly better score replaces the incumbent.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.intp)
    n, n_feat = X.shape
    sorted_idx = np.empty((n_feat, n), dtype=np.intp)
    for f in range(n_feat):
        sorted_idx[f] = np.argsort(X[:, f], kind="stable")
    onehot = np.zeros((n, n_classes), dtype=np.int64)
    onehot[np.arange(n), y] = 1
    feat_cols = np.arange(n_feat)[:, None]

    feature, threshold, left, right, value = [], [], [], [], []

    def new_node():
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(None)
        return len(feature) - 1

    stack = [(new_node(), 0, n, 0)]
    while stack:
        node, start, end, depth = stack.pop()
        seg = sorted_idx[:, start:end]
        counts = onehot[seg[0]].sum(axis=0)
        value[node] = counts.astype(np.float64)
        n_node = end - start
        if (
            np.count_nonzero(counts) <= 1
            or n_node < 2 * min_samples_leaf
            or depth == max_depth
        ):
            continue
        vals = X[seg, feat_cols]
        cum = np.cumsum(onehot[seg], axis=1)[:, :-1, :]
        n_left = np.arange(1, n_node)
        n_right = n_node - n_left
        sq_left = np.sum(cum * cum, axis=2)
        right_counts = counts - cum
        sq_right = np.sum(right_counts * right_counts, axis=2)
        score = sq_left / n_left + sq_right / n_right
        valid = (vals[:, :-1] < vals[:, 1:])
        valid &= (n_left >= min_samples_leaf) & (n_right >= min_samples_leaf)
        if not valid.any():
            continue
        score = np.where(valid, score, -np.inf)
        best_f, best_pos, best_score = -1, -1, -np.inf
        for f in range(n_feat):
            pos = int(np.argmax(score[f]))
            if score[f, pos] > best_score:
                best_f, best_pos, best_score = f, pos, score[f, pos]
        lo = vals[best_f, best_pos]
        hi = vals[best_f, best_pos + 1]
        thr = (lo + hi) / 2.0
        if thr == hi:
            thr = lo
        n_l = best_pos + 1
        go_left = np.zeros(n, dtype=bool)
        go_left[seg[best_f, :n_l]] = True
        mask = go_left[seg]
        sorted_idx[:, start:end] = np.concatenate(
            [seg[mask].reshape(n_feat, n_l), seg[~mask].reshape(n_feat, n_node - n_l)],
            axis=1,
        )
        feature[node] = best_f
        threshold[node] = thr
        lchild = new_node()
        rchild = new_node()
        left[node] = lchild
        right[node] = rchild
        stack.append((rchild, start + n_l, end, depth + 1))
        stack.append((lchild, start, start + n_l, depth + 1))

    return (
        np.array(feature, dtype=np.intp),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.intp),
        np.array(right, dtype=np.intp),
        np.array(value, dtype=np.float64).reshape(len(feature), n_classes),
    )


def apply_tree(X, feature, threshold, left, right):
    """Index of the leaf reached by each row."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    node = np.zeros(X.shape[0], dtype=np.intp)
    rows = np.arange(X.shape[0])
    active = left[node] >= 0
    while active.any():
        r = rows[active]
        nd = node[r]
        goes_left = X[r, feature[nd]] <= threshold[nd]
        node[r] = np.where(goes_left, left[nd], right[nd])
        active = left[node] >= 0
    return node
