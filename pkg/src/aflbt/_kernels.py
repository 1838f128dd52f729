"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Set ``AFLBT_DISABLE_NUMBA=1`` before import to force the numpy path.  Both
paths are always importable as ``nb_<name>`` / ``np_<name>`` so they can be
compared directly; the unprefixed names are the selected implementation.
"""

import math
import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

__all__ = [
    "USE_NUMBA",
    "exclusive_cumsum",
    "rolling_sum",
    "loglik",
    "loglik_score_info",
    "univariate_newton",
    "grid_loglik",
]

USE_NUMBA = numba is not None and os.environ.get("AFLBT_DISABLE_NUMBA", "") not in ("1", "true", "yes")

# coefficient movement below which a Newton sequence may stop
STEP_TOL = 1e-8
# relative log-likelihood drop treated as rounding noise by the line search
LL_NOISE = 1e-13


def _jit(f):
    if numba is None:
        return f
    return numba.njit(cache=True, nogil=True)(f)


# --- sequential sums -------------------------------------------------------
# Both paths add left to right so results are bit-identical to a plain
# python ``sum`` over the same slice.


def np_exclusive_cumsum(values):
    values = np.asarray(values, dtype=np.float64)
    out = np.zeros(values.shape[0], dtype=np.float64)
    if values.shape[0] > 1:
        out[1:] = np.add.accumulate(values[:-1])
    return out


def _exclusive_cumsum_loop(values):
    n = values.shape[0]
    out = np.zeros(n, dtype=np.float64)
    acc = 0.0
    for k in range(1, n):
        acc = acc + values[k - 1]
        out[k] = acc
    return out


def np_rolling_sum(values, window):
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    out = np.zeros(n, dtype=np.float64)
    # oldest term first: ((v[k-w] + v[k-w+1]) + ...) + v[k-1]
    for lag in range(window, 0, -1):
        shifted = np.zeros(n, dtype=np.float64)
        if lag < n:
            shifted[lag:] = values[: n - lag]
        out = out + shifted
    return out


def _rolling_sum_loop(values, window):
    n = values.shape[0]
    out = np.zeros(n, dtype=np.float64)
    for k in range(n):
        acc = 0.0
        for j in range(k - window, k):
            if j >= 0:
                acc = acc + values[j]
        out[k] = acc
    return out


# --- logistic likelihood ---------------------------------------------------


def _softplus_scalar(eta):
    if eta > 0.0:
        return eta + math.log1p(math.exp(-eta))
    return math.log1p(math.exp(eta))


def _sigmoid_scalar(eta):
    if eta >= 0.0:
        return 1.0 / (1.0 + math.exp(-eta))
    e = math.exp(eta)
    return e / (1.0 + e)


def np_loglik(X, y, w, beta):
    eta = X @ beta
    softplus = np.logaddexp(0.0, eta)
    return float(np.sum(w * (y * eta - softplus)))


def _loglik_loop(X, y, w, beta):
    n, p = X.shape
    total = 0.0
    for i in range(n):
        eta = 0.0
        for j in range(p):
            eta += X[i, j] * beta[j]
        total += w[i] * (y[i] * eta - _softplus_scalar(eta))
    return total


def np_loglik_score_info(X, y, w, beta):
    """Log-likelihood, score vector and observed information at ``beta``."""
    eta = X @ beta
    ll = float(np.sum(w * (y * eta - np.logaddexp(0.0, eta))))
    mu = np.where(eta >= 0, 1.0 / (1.0 + np.exp(-np.abs(eta))), np.exp(-np.abs(eta)) / (1.0 + np.exp(-np.abs(eta))))
    score = X.T @ (w * (y - mu))
    info = (X * (w * mu * (1.0 - mu))[:, None]).T @ X
    return ll, score, info


def _loglik_score_info_loop(X, y, w, beta):
    n, p = X.shape
    ll = 0.0
    score = np.zeros(p)
    info = np.zeros((p, p))
    for i in range(n):
        if w[i] == 0.0:
            continue
        eta = 0.0
        for j in range(p):
            eta += X[i, j] * beta[j]
        ll += w[i] * (y[i] * eta - _softplus_scalar(eta))
        mu = _sigmoid_scalar(eta)
        r = w[i] * (y[i] - mu)
        v = w[i] * mu * (1.0 - mu)
        for j in range(p):
            xij = X[i, j]
            score[j] += r * xij
            vx = v * xij
            for k in range(j + 1):
                info[j, k] += vx * X[i, k]
    for j in range(p):
        for k in range(j):
            info[k, j] = info[j, k]
    return ll, score, info


# --- batched one-column fits (feature screening) ---------------------------


def _univariate_newton_loop(X, y, w, max_iter, tol, max_halvings):
    """Fit ``y ~ x_j`` (no intercept) for every column j independently.

    Returns (beta, info, loglik, iterations, converged) arrays of length p.
    Mirrors the multivariate Newton iteration used by ``fit_logistic``.
    """
    n, p = X.shape
    beta_out = np.zeros(p)
    info_out = np.zeros(p)
    ll_out = np.zeros(p)
    it_out = np.zeros(p, dtype=np.int64)
    conv_out = np.zeros(p, dtype=np.bool_)
    for j in range(p):
        b = 0.0
        ll = 0.0
        for i in range(n):
            ll += w[i] * (-_softplus_scalar(0.0))
        converged = False
        it = 0
        while it < max_iter:
            it += 1
            g = 0.0
            h = 0.0
            for i in range(n):
                eta = X[i, j] * b
                mu = _sigmoid_scalar(eta)
                g += w[i] * (y[i] - mu) * X[i, j]
                h += w[i] * mu * (1.0 - mu) * X[i, j] * X[i, j]
            if h <= 0.0 or not math.isfinite(h):
                break
            step = g / h
            t = 1.0
            new_b = b
            new_ll = ll
            accepted = False
            for _ in range(max_halvings + 1):
                cand = b + t * step
                cll = 0.0
                for i in range(n):
                    eta = X[i, j] * cand
                    cll += w[i] * (y[i] * eta - _softplus_scalar(eta))
                if cll >= ll - LL_NOISE * (1.0 + abs(ll)) or not math.isfinite(ll):
                    new_b = cand
                    new_ll = cll
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                converged = abs(step) < 1e-12 or abs(g) < 1e-12
                break
            delta = abs(new_ll - ll)
            moved = abs(new_b - b)
            b = new_b
            ll = new_ll
            if delta < tol and moved < STEP_TOL:
                converged = True
                break
        h = 0.0
        for i in range(n):
            mu = _sigmoid_scalar(X[i, j] * b)
            h += w[i] * mu * (1.0 - mu) * X[i, j] * X[i, j]
        beta_out[j] = b
        info_out[j] = h
        ll_out[j] = ll
        it_out[j] = it
        conv_out[j] = converged
    return beta_out, info_out, ll_out, it_out, conv_out


def np_univariate_newton(X, y, w, max_iter, tol, max_halvings):
    """Vectorised over columns: every column runs its own Newton sequence."""
    n, p = X.shape
    b = np.zeros(p)
    ll = np.full(p, float(np.sum(w * -np.log(2.0))))
    it = np.zeros(p, dtype=np.int64)
    converged = np.zeros(p, dtype=bool)
    active = np.ones(p, dtype=bool)

    def column_ll(beta):
        eta = X * beta[None, :]
        return np.sum(w[:, None] * (y[:, None] * eta - np.logaddexp(0.0, eta)), axis=0)

    def grad_hess(beta):
        eta = X * beta[None, :]
        mu = 0.5 * (1.0 + np.tanh(0.5 * eta))
        g = np.sum((w * 1.0)[:, None] * (y[:, None] - mu) * X, axis=0)
        h = np.sum(w[:, None] * mu * (1.0 - mu) * X * X, axis=0)
        return g, h

    for _ in range(max_iter):
        if not active.any():
            break
        it[active] += 1
        g, h = grad_hess(b)
        bad = active & ~((h > 0) & np.isfinite(h))
        active &= ~bad
        step = np.where(active, g / np.where(h > 0, h, 1.0), 0.0)
        t = np.ones(p)
        pending = active.copy()
        new_b = b.copy()
        new_ll = ll.copy()
        for _ in range(max_halvings + 1):
            if not pending.any():
                break
            cand = b + t * step
            cll = column_ll(cand)
            ok = pending & ((cll >= ll - LL_NOISE * (1.0 + np.abs(ll))) | ~np.isfinite(ll))
            new_b[ok] = cand[ok]
            new_ll[ok] = cll[ok]
            pending &= ~ok
            t[pending] *= 0.5
        # columns that never found an ascent step stop here
        stuck = pending
        converged[stuck] = (np.abs(step[stuck]) < 1e-12) | (np.abs(g[stuck]) < 1e-12)
        active &= ~stuck
        delta = np.abs(new_ll - ll)
        moved = np.abs(new_b - b)
        b = np.where(active, new_b, b)
        ll = np.where(active, new_ll, ll)
        done = active & (delta < tol) & (moved < STEP_TOL)
        converged[done] = True
        active &= ~done
    _, h = grad_hess(b)
    return b, h, ll, it, converged


# --- grid oracle -----------------------------------------------------------


def np_grid_loglik(X, y, w, grid):
    """Log-likelihood at every point of the tensor grid ``grid`` x ``grid``.

    Supports one or two free parameters; returns an array of shape
    (len(grid),) or (len(grid), len(grid)).
    """
    p = X.shape[1]
    if p == 1:
        eta = np.outer(grid, X[:, 0])
        return np.sum(w * (y * eta - np.logaddexp(0.0, eta)), axis=1)
    out = np.empty((grid.shape[0], grid.shape[0]))
    for a, ga in enumerate(grid):
        eta = ga * X[:, 0][None, :] + np.outer(grid, X[:, 1])
        out[a] = np.sum(w * (y * eta - np.logaddexp(0.0, eta)), axis=1)
    return out


def _grid_loglik2_loop(X, y, w, grid):
    m = grid.shape[0]
    n = X.shape[0]
    out = np.empty((m, m))
    for a in range(m):
        for b in range(m):
            total = 0.0
            for i in range(n):
                eta = grid[a] * X[i, 0] + grid[b] * X[i, 1]
                total += w[i] * (y[i] * eta - _softplus_scalar(eta))
            out[a, b] = total
    return out


if numba is not None:
    _softplus_scalar = _jit(_softplus_scalar)
    _sigmoid_scalar = _jit(_sigmoid_scalar)
    nb_exclusive_cumsum = _jit(_exclusive_cumsum_loop)
    nb_rolling_sum = _jit(_rolling_sum_loop)
    nb_loglik = _jit(_loglik_loop)
    nb_loglik_score_info = _jit(_loglik_score_info_loop)
    nb_univariate_newton = _jit(_univariate_newton_loop)
    nb_grid_loglik2 = _jit(_grid_loglik2_loop)
else:  # pragma: no cover
    nb_exclusive_cumsum = _exclusive_cumsum_loop
    nb_rolling_sum = _rolling_sum_loop
    nb_loglik = _loglik_loop
    nb_loglik_score_info = _loglik_score_info_loop
    nb_univariate_newton = _univariate_newton_loop
    nb_grid_loglik2 = _grid_loglik2_loop


def nb_grid_loglik(X, y, w, grid):
    if X.shape[1] == 1:
        return np_grid_loglik(X, y, w, grid)
    return nb_grid_loglik2(X, y, w, grid)


def _contig(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def exclusive_cumsum(values):
    values = _contig(values)
    if USE_NUMBA:
        return nb_exclusive_cumsum(values)
    return np_exclusive_cumsum(values)


def rolling_sum(values, window=4):
    values = _contig(values)
    if USE_NUMBA:
        return nb_rolling_sum(values, int(window))
    return np_rolling_sum(values, int(window))


def loglik(X, y, w, beta):
    if USE_NUMBA:
        return float(nb_loglik(_contig(X), _contig(y), _contig(w), _contig(beta)))
    return np_loglik(X, y, w, beta)


def loglik_score_info(X, y, w, beta):
    if USE_NUMBA:
        return nb_loglik_score_info(_contig(X), _contig(y), _contig(w), _contig(beta))
    return np_loglik_score_info(X, y, w, beta)


def univariate_newton(X, y, w, max_iter=50, tol=1e-10, max_halvings=30):
    if USE_NUMBA:
        return nb_univariate_newton(_contig(X), _contig(y), _contig(w), int(max_iter), float(tol), int(max_halvings))
    return np_univariate_newton(_contig(X), _contig(y), _contig(w), int(max_iter), float(tol), int(max_halvings))


def grid_loglik(X, y, w, grid):
    if USE_NUMBA:
        return nb_grid_loglik(_contig(X), _contig(y), _contig(w), _contig(grid))
    return np_grid_loglik(_contig(X), _contig(y), _contig(w), _contig(grid))
