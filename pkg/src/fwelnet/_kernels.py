"""Compiled coordinate-descent kernels.

Both kernels minimise, for each lambda in a decreasing sequence,

    loss(b0, beta) + lam * sum_j w_j * (alpha*|beta_j| + (1-alpha)/2 * beta_j**2)

where loss is half the residual sum of squares (Gaussian) or the binomial
negative log-likelihood. The intercept is unpenalized and updated exactly
each pass. ``x`` should be Fortran-ordered for column access.
"""

import numpy as np
from numba import njit

PROB_EPS = 1e-5


@njit(cache=True, nogil=True)
def _soft(u, t):
    if u > t:
        return u - t
    if u < -t:
        return u + t
    return 0.0


@njit(cache=True, nogil=True)
def _gauss_pass(x, r, beta, b0, xx, w, lam, alpha, skip, active_only):
    """One coordinate sweep. Returns (max |change|, new intercept)."""
    n, p = x.shape
    maxd = 0.0
    # intercept
    s = 0.0
    for i in range(n):
        s += r[i]
    d0 = s / n
    if d0 != 0.0:
        for i in range(n):
            r[i] -= d0
        b0 += d0
        if abs(d0) > maxd:
            maxd = abs(d0)
    for j in range(p):
        if skip[j]:
            continue
        bj = beta[j]
        if active_only and bj == 0.0:
            continue
        g = 0.0
        for i in range(n):
            g += x[i, j] * r[i]
        g += xx[j] * bj
        new = _soft(g, lam * alpha * w[j]) / (xx[j] + lam * (1.0 - alpha) * w[j])
        if new != bj:
            d = new - bj
            for i in range(n):
                r[i] -= d * x[i, j]
            beta[j] = new
            if abs(d) > maxd:
                maxd = abs(d)
    return maxd, b0


@njit(cache=True, nogil=True)
def _eliminate(a, b, rel_tol):
    """Solve a x = b by Gaussian elimination with partial pivoting.

    Overwrites ``a``; the result is left in ``b``. Returns True when
    solved. If some column has no pivot above ``rel_tol`` times the largest
    entry, that column depends on the earlier ones: ``b`` then holds the
    corresponding unit null vector and False is returned.
    """
    k = b.shape[0]
    scale = 0.0
    for i in range(k):
        for j in range(k):
            if abs(a[i, j]) > scale:
                scale = abs(a[i, j])
    if scale == 0.0:
        b[:] = 0.0
        b[0] = 1.0
        return False
    for c in range(k):
        piv = c
        for i in range(c + 1, k):
            if abs(a[i, c]) > abs(a[piv, c]):
                piv = i
        if abs(a[piv, c]) <= rel_tol * scale:
            # a[:c, :c] is upper triangular; solve it against -a[:c, c]
            x = np.zeros(k)
            x[c] = 1.0
            for i in range(c - 1, -1, -1):
                s = -a[i, c]
                for j in range(i + 1, c):
                    s -= a[i, j] * x[j]
                x[i] = s / a[i, i]
            nrm = np.sqrt(np.sum(x * x))
            for i in range(k):
                b[i] = x[i] / nrm
            return False
        if piv != c:
            for j in range(k):
                tmp = a[c, j]
                a[c, j] = a[piv, j]
                a[piv, j] = tmp
            tmp = b[c]
            b[c] = b[piv]
            b[piv] = tmp
        for i in range(c + 1, k):
            f = a[i, c] / a[c, c]
            if f != 0.0:
                for j in range(c, k):
                    a[i, j] -= f * a[c, j]
                b[i] -= f * b[c]
    for i in range(k - 1, -1, -1):
        s = b[i]
        for j in range(i + 1, k):
            s -= a[i, j] * b[j]
        b[i] = s / a[i, i]
    return True


@njit(cache=True, nogil=True)
def _gauss_objective(r, beta, w, lam, alpha):
    s = 0.0
    for i in range(r.shape[0]):
        s += r[i] * r[i]
    pen = 0.0
    for j in range(beta.shape[0]):
        b = beta[j]
        if b != 0.0:
            pen += w[j] * (alpha * abs(b) + 0.5 * (1.0 - alpha) * b * b)
    return 0.5 * s + lam * pen


@njit(cache=True, nogil=True)
def _null_step(d, beta, idx, sgn, k, w, lam, alpha):
    """Slide (intercept, beta[idx]) along the null direction ``d``.

    On a face the objective is the quadratic part plus a linear penalty
    term, so along a null direction only the linear term moves; ``d`` is
    oriented so it does not increase. The step stops at the first
    coefficient reaching zero. Returns (position in ``idx`` of that
    coefficient or -1, intercept shift).
    """
    slope = 0.0
    for u in range(k):
        slope += lam * alpha * w[idx[u]] * sgn[u] * d[u + 1]
    sign = -1.0 if slope > 0.0 else 1.0
    for attempt in range(2):
        t = np.inf
        hit = -1
        for u in range(k):
            du = sign * d[u + 1]
            if du * sgn[u] < 0.0:
                tu = -beta[idx[u]] / du
                if tu < t:
                    t = tu
                    hit = u
        if hit >= 0:
            for u in range(k):
                beta[idx[u]] += t * sign * d[u + 1]
            return hit, t * sign * d[0]
        if slope != 0.0:
            break
        sign = -sign
    return -1, 0.0


@njit(cache=True, nogil=True)
def _drop(idx, sgn, k, pos):
    for u in range(pos, k - 1):
        idx[u] = idx[u + 1]
        sgn[u] = sgn[u + 1]
    return k - 1


@njit(cache=True, nogil=True)
def _polish(x, y, r, beta, b0, gram, csum, xty, ysum, w, lam, alpha, skip):
    """Active-set refinement on the current support.

    Solves the reduced normal equations for (intercept, nonzero
    coefficients) with their signs held fixed, then moves toward that face
    minimizer, stopping at the first coefficient that would change sign;
    that coefficient is set to zero and the solve repeated. The objective
    is a convex quadratic on each face, so no step increases it. A
    singular face (more active columns than the data can support) is
    handled by sliding along a null direction instead. Zero coefficients
    are left to the next coordinate pass. Returns the new intercept.
    """
    n, p = x.shape
    k = 0
    for j in range(p):
        if beta[j] != 0.0 and not skip[j]:
            k += 1
    if k == 0:
        return b0
    idx = np.empty(k, dtype=np.int64)
    sgn = np.empty(k)
    k = 0
    for j in range(p):
        if beta[j] != 0.0 and not skip[j]:
            idx[k] = j
            sgn[k] = 1.0 if beta[j] > 0 else -1.0
            k += 1
    start = _gauss_objective(r, beta, w, lam, alpha)
    old_b0 = b0
    old_beta = beta.copy()
    old_r = r.copy()
    while k > 0:
        a = np.empty((k + 1, k + 1))
        sol = np.empty(k + 1)
        a[0, 0] = n
        sol[0] = ysum
        for u in range(k):
            ju = idx[u]
            a[0, u + 1] = csum[ju]
            a[u + 1, 0] = csum[ju]
            for v in range(k):
                a[u + 1, v + 1] = gram[ju, idx[v]]
            a[u + 1, u + 1] += lam * (1.0 - alpha) * w[ju]
            sol[u + 1] = xty[ju] - lam * alpha * w[ju] * sgn[u]
        if not _eliminate(a, sol, 1e-10):
            # loss is flat along sol: slide until a coefficient reaches zero
            hit, shift = _null_step(sol, beta, idx, sgn, k, w, lam, alpha)
            if hit < 0:
                break
            b0 += shift
            beta[idx[hit]] = 0.0
            k = _drop(idx, sgn, k, hit)
            continue
        if not np.all(np.isfinite(sol)):
            break
        # largest step in (0, 1] keeping every sign
        t = 1.0
        hit = -1
        for u in range(k):
            cur = beta[idx[u]]
            if sol[u + 1] * sgn[u] <= 0.0:
                tu = cur / (cur - sol[u + 1])
                if tu < t:
                    t = tu
                    hit = u
        b0 = b0 + t * (sol[0] - b0)
        for u in range(k):
            ju = idx[u]
            beta[ju] = beta[ju] + t * (sol[u + 1] - beta[ju])
        if hit < 0:
            break
        beta[idx[hit]] = 0.0
        k = _drop(idx, sgn, k, hit)
    for i in range(n):
        s = y[i] - b0
        for j in range(p):
            if beta[j] != 0.0:
                s -= x[i, j] * beta[j]
        r[i] = s
    if not _gauss_objective(r, beta, w, lam, alpha) <= start:
        # round-off guard: keep the coordinate-descent iterate
        for i in range(n):
            r[i] = old_r[i]
        for j in range(p):
            beta[j] = old_beta[j]
        return old_b0
    return b0


@njit(cache=True, nogil=True)
def gaussian_path(x, y, w, alpha, lambdas, init_b0, init_beta, use_init,
                  skip, zero_upto, tol, max_passes, polish_every):
    """Warm-started path by cyclic coordinate descent with active-set cycling.

    Lambda indices below ``zero_upto`` are known to have the all-zero
    solution and are not iterated. ``use_init`` selects per-lambda
    initial values from ``init_b0``/``init_beta`` instead of the previous
    path point. Every ``polish_every`` active-set passes the current
    support is polished by an exact reduced solve (0 disables this).
    """
    n, p = x.shape
    m = lambdas.shape[0]
    betas = np.zeros((p, m))
    b0s = np.zeros(m)
    passes = np.zeros(m, dtype=np.int64)
    converged = np.ones(m, dtype=np.bool_)
    xx = np.zeros(p)
    for j in range(p):
        s = 0.0
        for i in range(n):
            s += x[i, j] * x[i, j]
        xx[j] = s
    gram = np.zeros((1, 1))
    csum = np.zeros(p)
    xty = np.zeros(p)
    ysum = 0.0
    for i in range(n):
        ysum += y[i]
    if polish_every > 0:
        gram = x.T @ x
        for j in range(p):
            s = 0.0
            t = 0.0
            for i in range(n):
                s += x[i, j]
                t += x[i, j] * y[i]
            csum[j] = s
            xty[j] = t
    beta = np.zeros(p)
    b0 = 0.0
    ymean = ysum / n
    r = np.empty(n)
    for k in range(m):
        if k < zero_upto:
            b0s[k] = ymean
            b0 = ymean
            continue
        if use_init:
            for j in range(p):
                beta[j] = init_beta[j, k]
            b0 = init_b0[k]
        for i in range(n):
            s = y[i] - b0
            for j in range(p):
                if beta[j] != 0.0:
                    s -= x[i, j] * beta[j]
            r[i] = s
        lam = lambdas[k]
        npass = 0
        done = False
        while not done:
            maxd, b0 = _gauss_pass(x, r, beta, b0, xx, w, lam, alpha, skip, False)
            npass += 1
            if maxd < tol:
                break
            if npass >= max_passes:
                converged[k] = False
                break
            inner = 0
            while True:
                maxd, b0 = _gauss_pass(x, r, beta, b0, xx, w, lam, alpha, skip, True)
                npass += 1
                inner += 1
                if maxd < tol:
                    break
                if npass >= max_passes:
                    converged[k] = False
                    done = True
                    break
                if polish_every > 0 and inner % polish_every == 0:
                    b0 = _polish(x, y, r, beta, b0, gram, csum, xty, ysum, w, lam, alpha, skip)
        passes[k] = npass
        b0s[k] = b0
        for j in range(p):
            betas[j, k] = beta[j]
    return b0s, betas, passes, converged


@njit(cache=True, nogil=True)
def binomial_nll(y, eta):
    s = 0.0
    for i in range(y.shape[0]):
        e = eta[i]
        if e > 0:
            s += e + np.log1p(np.exp(-e)) - y[i] * e
        else:
            s += np.log1p(np.exp(e)) - y[i] * e
    return s


@njit(cache=True, nogil=True)
def _weighted_pass(x, r, v, beta, b0, xwx, sumv, w, lam, alpha, skip, active_only):
    n, p = x.shape
    maxd = 0.0
    s = 0.0
    for i in range(n):
        s += v[i] * r[i]
    d0 = s / sumv
    if d0 != 0.0:
        for i in range(n):
            r[i] -= d0
        b0 += d0
        if abs(d0) > maxd:
            maxd = abs(d0)
    for j in range(p):
        if skip[j]:
            continue
        bj = beta[j]
        if active_only and bj == 0.0:
            continue
        g = 0.0
        for i in range(n):
            g += v[i] * x[i, j] * r[i]
        g += xwx[j] * bj
        new = _soft(g, lam * alpha * w[j]) / (xwx[j] + lam * (1.0 - alpha) * w[j])
        if new != bj:
            d = new - bj
            for i in range(n):
                r[i] -= d * x[i, j]
            beta[j] = new
            if abs(d) > maxd:
                maxd = abs(d)
    return maxd, b0


@njit(cache=True, nogil=True)
def binomial_path(x, y, w, alpha, lambdas, init_b0, init_beta, use_init,
                  skip, zero_upto, tol, max_passes, max_outer, dev_tol,
                  null_dev, max_coef):
    """Penalized logistic path by iteratively reweighted coordinate descent.

    Returns (intercepts, betas, passes, converged, saturated). Once the
    fit saturates (deviance explained > 0.999 or a coefficient exceeds
    ``max_coef``), the remaining path points repeat the last solution and
    are flagged.
    """
    n, p = x.shape
    m = lambdas.shape[0]
    betas = np.zeros((p, m))
    b0s = np.zeros(m)
    passes = np.zeros(m, dtype=np.int64)
    converged = np.ones(m, dtype=np.bool_)
    saturated = np.zeros(m, dtype=np.bool_)
    ybar = 0.0
    for i in range(n):
        ybar += y[i]
    ybar /= n
    pb = min(max(ybar, PROB_EPS), 1.0 - PROB_EPS)
    logit0 = np.log(pb / (1.0 - pb))
    beta = np.zeros(p)
    b0 = logit0
    eta = np.empty(n)
    r = np.empty(n)
    v = np.empty(n)
    xwx = np.zeros(p)
    sat = False
    for k in range(m):
        if k < zero_upto:
            b0s[k] = logit0
            b0 = logit0
            continue
        if sat:
            b0s[k] = b0
            for j in range(p):
                betas[j, k] = beta[j]
            saturated[k] = True
            converged[k] = False
            continue
        if use_init:
            for j in range(p):
                beta[j] = init_beta[j, k]
            b0 = init_b0[k]
        lam = lambdas[k]
        npass = 0
        for i in range(n):
            s = b0
            for j in range(p):
                if beta[j] != 0.0:
                    s += x[i, j] * beta[j]
            eta[i] = s
        dev_old = binomial_nll(y, eta)
        outer_ok = False
        for outer in range(max_outer):
            sumv = 0.0
            for i in range(n):
                pr = 1.0 / (1.0 + np.exp(-eta[i]))
                pr = min(max(pr, PROB_EPS), 1.0 - PROB_EPS)
                v[i] = pr * (1.0 - pr)
                r[i] = (y[i] - pr) / v[i]
                sumv += v[i]
            for j in range(p):
                s = 0.0
                for i in range(n):
                    s += v[i] * x[i, j] * x[i, j]
                xwx[j] = s
            inner_ok = False
            while npass < max_passes:
                maxd, b0 = _weighted_pass(x, r, v, beta, b0, xwx, sumv, w, lam, alpha, skip, False)
                npass += 1
                if maxd < tol:
                    inner_ok = True
                    break
                while npass < max_passes:
                    maxd, b0 = _weighted_pass(x, r, v, beta, b0, xwx, sumv, w, lam, alpha, skip, True)
                    npass += 1
                    if maxd < tol:
                        break
            for i in range(n):
                s = b0
                for j in range(p):
                    if beta[j] != 0.0:
                        s += x[i, j] * beta[j]
                eta[i] = s
            dev = binomial_nll(y, eta)
            big = abs(b0) > max_coef
            for j in range(p):
                if abs(beta[j]) > max_coef:
                    big = True
            if big or dev < 1e-3 * null_dev:
                sat = True
                saturated[k] = True
                break
            if not inner_ok:
                break
            if abs(dev_old - dev) < dev_tol:
                outer_ok = True
                break
            dev_old = dev
        passes[k] = npass
        converged[k] = outer_ok
        b0s[k] = b0
        for j in range(p):
            betas[j, k] = beta[j]
    return b0s, betas, passes, converged, saturated
