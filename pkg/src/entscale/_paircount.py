"""Numba kernels for max-norm fixed-radius pair counting.

For every radius the points are binned into square cells of side slightly
above ``eps`` on their first two coordinates and each reference point only
visits the 3x3 block of cells around it. A pair is recorded by the number of
leading coordinates that lie strictly within ``eps``; the count for order m is
then the number of pairs with at least m such coordinates, so all prefix
orders share one pass. Order 1 is counted separately by binary search on the
sorted first coordinate because the two-dimensional cells miss pairs whose
second coordinate is far apart.

Two modes:

* exact: every point is a reference and only partners ``j > i`` are visited,
  giving the same integer counts as the O(N^2) double loop;
* sampled: references are taken in a fixed pseudo-random order and all
  partners ``j != i`` are visited until enough pairs at the highest order were
  seen (or the work budget is spent).
"""
import numpy as np
from numba import njit


@njit(cache=True)
def _lower(v, x, eps):
    # first p with v[p] >= x or x - v[p] < eps
    lo, hi = 0, v.size
    while lo < hi:
        mid = (lo + hi) >> 1
        if v[mid] >= x or x - v[mid] < eps:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True)
def _upper(v, x, eps):
    # first p with v[p] > x and v[p] - x >= eps
    lo, hi = 0, v.size
    while lo < hi:
        mid = (lo + hi) >> 1
        if v[mid] > x and v[mid] - x >= eps:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True)
def _searchsorted_left(a, x):
    lo, hi = 0, a.size
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] < x:
            lo = mid + 1
        else:
            hi = mid
    return lo


@njit(cache=True)
def _searchsorted_right(a, x):
    lo, hi = 0, a.size
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] <= x:
            lo = mid + 1
        else:
            hi = mid
    return lo


@njit(cache=True)
def _admissible(origin, i, theiler, exact):
    n = origin.size
    hi = _searchsorted_right(origin, origin[i] + theiler)
    if exact:
        return n - hi
    lo = _searchsorted_left(origin, origin[i] - theiler)
    return n - (hi - lo)


@njit(cache=True)
def count_pairs(X, origin, eps_values, theiler, refs, exact,
                min_pairs, min_refs, max_ops):
    """Pair counts for all prefix orders.

    Returns ``counts[e, m-1]``, ``totals[e]`` (admissible pairs) and
    ``used[e]`` (reference points visited) for each radius.
    """
    n, M = X.shape
    E = eps_values.size
    counts = np.zeros((E, M), dtype=np.int64)
    totals = np.zeros(E, dtype=np.int64)
    used = np.zeros(E, dtype=np.int64)

    order0 = np.argsort(X[:, 0], kind="mergesort")
    v0 = X[order0, 0].copy()
    maxabs = 0.0
    for i in range(n):
        for c in range(min(M, 2)):
            a = abs(X[i, c])
            if a > maxabs:
                maxabs = a

    hist = np.zeros(M + 1, dtype=np.int64)
    for e in range(E):
        eps = eps_values[e]
        for k in range(M + 1):
            hist[k] = 0
        m1 = 0
        total = 0
        nref = 0
        ops = 0

        if M >= 2:
            side = eps * (1.0 + 1e-9 + 1e-15 * maxabs / eps)
            cx = np.empty(n, dtype=np.int64)
            cy = np.empty(n, dtype=np.int64)
            for i in range(n):
                cx[i] = np.int64(np.floor(X[i, 0] / side))
                cy[i] = np.int64(np.floor(X[i, 1] / side))
            cxmin = cx.min()
            cymin = cy.min()
            ny = cy.max() - cymin + 3
            keys = np.empty(n, dtype=np.int64)
            for i in range(n):
                keys[i] = (cx[i] - cxmin + 1) * ny + (cy[i] - cymin + 1)
            perm = np.argsort(keys, kind="mergesort")
            skeys = keys[perm]
            Xs = np.empty((n, M))
            for p in range(n):
                for c in range(M):
                    Xs[p, c] = X[perm[p], c]

        for r in range(refs.size):
            i = refs[r]
            xi0 = X[i, 0]
            oi = origin[i]
            # order 1: binary search on the sorted first coordinate
            c_all = _upper(v0, xi0, eps) - _lower(v0, xi0, eps)
            win = 0
            j = i + 1
            while j < n and origin[j] - oi <= theiler:
                if abs(X[j, 0] - xi0) < eps:
                    win += 1
                j += 1
            if exact:
                m1 += c_all - 1  # halved after the loop
                m1 -= 2 * win
            else:
                j = i - 1
                while j >= 0 and oi - origin[j] <= theiler:
                    if abs(X[j, 0] - xi0) < eps:
                        win += 1
                    j -= 1
                m1 += c_all - 1 - win
            total += _admissible(origin, i, theiler, exact)

            if M >= 2:
                key = keys[i]
                for dx in range(-1, 2):
                    base = key + dx * ny
                    lo = _searchsorted_left(skeys, base - 1)
                    hi = _searchsorted_right(skeys, base + 1)
                    ops += hi - lo
                    for p in range(lo, hi):
                        jj = perm[p]
                        if exact:
                            if jj <= i or origin[jj] - oi <= theiler:
                                continue
                        else:
                            if jj == i or abs(origin[jj] - oi) <= theiler:
                                continue
                        kk = 0
                        while kk < M and abs(Xs[p, kk] - X[i, kk]) < eps:
                            kk += 1
                        if kk >= 2:
                            hist[kk] += 1
            nref += 1
            if not exact:
                top = 0
                if M >= 2:
                    top = hist[M]
                else:
                    top = m1
                if nref >= min_refs and top >= min_pairs:
                    break
                if ops >= max_ops:
                    break

        if exact:
            m1 //= 2
        counts[e, 0] = m1
        acc = 0
        for k in range(M, 1, -1):
            acc += hist[k]
            counts[e, k - 1] = acc
        totals[e] = total
        used[e] = nref
    return counts, totals, used


@njit(cache=True)
def naive_counts(X, origin, eps_values, theiler):
    """Reference O(N^2) double loop over pairs ``i < j``.

    Each pair's max-norm distance at every order is located in the radius
    grid by bisection; counts follow from a cumulative sum over radii.
    """
    n, M = X.shape
    E = eps_values.size
    start = np.zeros((E + 1, M), dtype=np.int64)
    total = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            if origin[j] - origin[i] <= theiler:
                continue
            total += 1
            d = 0.0
            for k in range(M):
                a = abs(X[i, k] - X[j, k])
                if a > d:
                    d = a
                # first radius strictly above d
                start[_searchsorted_right(eps_values, d), k] += 1
    counts = np.zeros((E, M), dtype=np.int64)
    for k in range(M):
        acc = 0
        for e in range(E):
            acc += start[e, k]
            counts[e, k] = acc
    totals = np.full(E, total, dtype=np.int64)
    return counts, totals
