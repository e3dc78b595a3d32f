"""Kraskov-Stoegbauer-Grassberger mutual information and predictive information.

The estimator is KSG algorithm 1 with the maximum norm in joint and marginal
spaces::

    I = psi(k) + psi(N) - <psi(n_x + 1)> - <psi(n_y + 1)>

where ``n_x`` (``n_y``) counts the other points whose marginal distance is
strictly below the joint-space distance to the ``k``-th neighbour. Scale is
controlled by adding uniform noise of amplitude ``eta`` before embedding.
"""
from __future__ import annotations

import math
import os
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import digamma

from .corrsum import CurveFamily
from .errors import MisalignedClouds, SeriesTooShort, TooFewPoints, UsageError
from .series import PointCloud, add_uniform_noise

THREADS_ENV = "ENTSCALE_THREADS"


def _workers():
    v = os.environ.get(THREADS_ENV)
    if v is None:
        return 1
    try:
        n = int(v)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {v!r}") from None
    return -1 if n <= 0 else n


@dataclass(frozen=True)
class KsgConfig:
    k: int = 4
    eta: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise UsageError(f"k must be a positive integer, got {self.k}")
        if not self.eta >= 0:
            raise UsageError(f"eta must be non-negative, got {self.eta}")


@dataclass(frozen=True)
class MiEstimate:
    """Mutual information in nats, with the first-half-of-data value."""

    value: float
    half_data_value: float
    n_used: int
    enlarged: int = 0

    @property
    def half_data_error(self):
        return abs(self.value - self.half_data_value)


def _as_points(c):
    if isinstance(c, PointCloud):
        return c.points, c.origin_indices
    a = np.asarray(c, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    return a, None


def _kth_distances(tree, Z, k, workers):
    """Distance to the k-th neighbour (self excluded); zero distances enlarge k."""
    d, _ = tree.query(Z, k=k + 1, p=np.inf, workers=workers)
    d = d[:, -1] if d.ndim == 2 else d
    kk = np.full(Z.shape[0], k, dtype=np.int64)
    bad = np.flatnonzero(d <= 0)
    n = Z.shape[0]
    kq = k
    while bad.size:
        if kq >= n - 1:
            raise TooFewPoints("all points coincide; mutual information is undefined")
        kq = min(2 * kq, n - 1)
        dd, _ = tree.query(Z[bad], k=kq + 1, p=np.inf, workers=workers)
        for row, i in enumerate(bad):
            pos = np.flatnonzero(dd[row, 1:] > 0)
            if pos.size:
                kk[i] = pos[0] + 1
                d[i] = dd[row, 1 + pos[0]]
        bad = bad[d[bad] <= 0]
    return d, kk


def _marginal_counts(P, radius, workers):
    tree = cKDTree(P)
    # strict inequality: shrink the closed ball radius by one ulp
    r = np.nextafter(radius, 0.0)
    return tree.query_ball_point(P, r, p=np.inf, return_length=True, workers=workers) - 1


def _ksg(X, Y, k, workers):
    n = X.shape[0]
    Z = np.hstack([X, Y])
    d, kk = _kth_distances(cKDTree(Z), Z, k, workers)
    nx = _marginal_counts(X, d, workers)
    ny = _marginal_counts(Y, d, workers)
    a = math.fsum(digamma(nx + 1.0)) / n
    b = math.fsum(digamma(ny + 1.0)) / n
    psi_k = math.fsum(digamma(kk.astype(float))) / n
    enlarged = int(np.count_nonzero(kk != k))
    return psi_k + float(digamma(n)) - (a + b), enlarged


def ksg_mi(x_points, y_points, cfg=KsgConfig()):
    """KSG (algorithm 1) estimate of I(X; Y) in nats.

    ``cfg.eta`` is not applied here; noise enters at the series level in
    :func:`predictive_information`.
    """
    X, ox = _as_points(x_points)
    Y, oy = _as_points(y_points)
    if X.shape[0] != Y.shape[0]:
        raise MisalignedClouds(f"clouds have {X.shape[0]} and {Y.shape[0]} points")
    if ox is not None and oy is not None and not np.array_equal(ox, oy):
        raise MisalignedClouds("clouds have different origin indices")
    n = X.shape[0]
    if n <= cfg.k:
        raise TooFewPoints(f"need more than k={cfg.k} points, got {n}")
    workers = _workers()
    value, enlarged = _ksg(X, Y, cfg.k, workers)
    h = n // 2
    half = _ksg(X[:h], Y[:h], cfg.k, workers)[0] if h > cfg.k else float("nan")
    if enlarged:
        warnings.warn(f"{enlarged} points had zero k-th neighbour distance; k enlarged locally",
                      RuntimeWarning, stacklevel=2)
    return MiEstimate(float(value), float(half), n, enlarged)


def ksg_mi_bruteforce(X, Y, k):
    """Exhaustive-scan KSG estimate, for validation on small samples."""
    X = np.asarray(X, dtype=float).reshape(len(X), -1)
    Y = np.asarray(Y, dtype=float).reshape(len(Y), -1)
    n = X.shape[0]
    dx = np.abs(X[:, None, :] - X[None, :, :]).max(axis=2)
    dy = np.abs(Y[:, None, :] - Y[None, :, :]).max(axis=2)
    dz = np.maximum(dx, dy)
    np.fill_diagonal(dz, np.inf)
    eps = np.sort(dz, axis=1)[:, k - 1]
    np.fill_diagonal(dx, np.inf)
    np.fill_diagonal(dy, np.inf)
    nx = (dx < eps[:, None]).sum(axis=1)
    ny = (dy < eps[:, None]).sum(axis=1)
    a = math.fsum(digamma(nx + 1.0)) / n
    b = math.fsum(digamma(ny + 1.0)) / n
    return float(digamma(k)) + float(digamma(n)) - (a + b)


def past_future_blocks(series, m, tau):
    """Past ``(x_t, ..., x_{t-(m-1)tau})`` and future ``(x_{t+tau}, ..., x_{t+m tau})``."""
    y = series.samples
    span = (2 * m - 1) * tau
    n = y.size - span
    if n < 2:
        raise SeriesTooShort(f"{y.size} samples cannot hold a {2 * m}-block at tau={tau}")
    t0 = (m - 1) * tau
    origin = np.arange(t0, t0 + n)
    past = np.column_stack([y[t0 - j * tau: t0 - j * tau + n] for j in range(m)])
    future = np.column_stack([y[t0 + j * tau: t0 + j * tau + n] for j in range(1, m + 1)])
    return PointCloud(past, origin), PointCloud(future, origin)


def predictive_information(series, orders, tau, cfg=KsgConfig(), etas=(0.0,)):
    """PI_m(eta) for every order in ``orders`` and noise level in ``etas``.

    Noise for the ``j``-th eta is drawn from the stream ``(cfg.seed, j)`` and
    shared by all orders. Returns a ``PI`` curve family over the eta grid.
    """
    orders = [int(m) for m in np.atleast_1d(orders)]
    etas = np.asarray(etas, dtype=float)
    if etas.ndim != 1 or etas.size == 0:
        raise UsageError("eta grid must be a non-empty list")
    if np.any(etas < 0):
        raise UsageError("eta values must be non-negative")
    values = np.full((len(orders), etas.size), np.nan)
    half = np.full_like(values, np.nan)
    for j, eta in enumerate(etas):
        noisy = add_uniform_noise(series, float(eta), cfg.seed, j)
        for r, m in enumerate(orders):
            past, future = past_future_blocks(noisy, m, tau)
            est = ksg_mi(past, future, cfg)
            values[r, j], half[r, j] = est.value, est.half_data_value
    meta = {"k": cfg.k, "tau": tau, "seed": cfg.seed}
    return CurveFamily("PI", orders, etas, values, half=half, meta=meta)


def write_pi_csv(pi, path, header=(), bits=False):
    scale = 1.0 / math.log(2.0) if bits else 1.0
    with open(path, "w") as fh:
        if bits:
            fh.write("# unit=bits\n")
        for h in header:
            fh.write(f"# {h}\n")
        unit = "bits" if bits else "nats"
        fh.write(f"m,eta,pi_{unit},pi_half_{unit}\n")
        for r, m in enumerate(pi.orders):
            for j, eta in enumerate(pi.grid):
                fh.write(f"{m},{float(eta)!r},{float(pi.values[r, j] * scale)!r},"
                         f"{float(pi.half[r, j] * scale)!r}\n")
