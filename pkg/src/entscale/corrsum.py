"""Correlation sums and the curve families derived from them.

All block quantities use the maximum norm. Orders ``1..M`` are always computed
from one embedding of order ``M`` (lower orders are coordinate prefixes), so
every order sees the same set of reference times and the block correlation
sums are nested: ``C_{m+1}(eps) <= C_m(eps)``.

Undefined entries (zero pair count) are stored as NaN and stay NaN through
every derived quantity.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import _paircount
from .errors import (EmptyGrid, GridTooSmall, InvalidSeries, MissingOrder,
                     TooFewPoints, UsageError)
from .series import EmbeddingSpec, PointCloud, delay_embed, make_rng

QUANTITIES = ("C2", "H2", "h2", "deltaH", "D2", "E2", "PI")

#: tolerance of the telescoping identity check in :func:`excess_entropy_curves`
IDENTITY_TOL = 1e-9


@dataclass(frozen=True)
class EpsGrid:
    """Strictly increasing, geometrically spaced radii."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if v.size == 0:
            raise EmptyGrid("radius grid is empty")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise UsageError("radii must be positive and finite")
        if v.size > 1:
            if np.any(np.diff(v) <= 0):
                raise UsageError("radii must be strictly increasing")
            ratios = v[1:] / v[:-1]
            if np.max(np.abs(ratios / ratios[0] - 1.0)) > 1e-12:
                raise UsageError("radii must be geometrically spaced")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def geometric(cls, lo, hi, n):
        if not (0 < lo < hi) or n < 2:
            raise UsageError(f"bad grid bounds lo={lo}, hi={hi}, n={n}")
        return cls(np.geomspace(lo, hi, int(n)))

    @classmethod
    def for_series(cls, series, n=64, rel_min=1e-3):
        """Default grid: ``n`` radii over ``[rel_min * A, A]``, A the peak-to-peak amplitude."""
        a = series.amplitude
        if a <= 0:
            raise InvalidSeries("constant series has no amplitude")
        return cls.geometric(rel_min * a, a, n)

    def __len__(self):
        return self.values.size

    def __iter__(self):
        return iter(self.values)

    @property
    def log_step(self):
        return math.log(self.values[1] / self.values[0]) if self.values.size > 1 else 0.0


@dataclass(frozen=True)
class PairCountConfig:
    """Pair counting options.

    ``theiler``: pairs whose origin indices differ by at most this many samples
    are excluded. ``exact_limit``: clouds up to this size are counted exactly
    over all pairs; larger clouds use a reproducible subset of reference points
    per radius, stopping once ``min_pairs`` pairs are seen at the highest order
    (after at least ``min_refs`` references) or after ``max_ops`` candidate
    checks.
    """

    theiler: int = 0
    exact_limit: int = 10_000
    min_pairs: int = 20_000
    min_refs: int = 1_000
    max_ops: int = 100_000_000
    seed: int = 0

    def __post_init__(self):
        if int(self.theiler) != self.theiler or self.theiler < 0:
            raise UsageError(f"theiler window must be a non-negative integer, got {self.theiler}")
        if self.min_refs < 1 or self.min_pairs < 0 or self.max_ops < 1:
            raise UsageError("sampling limits must be positive")


@dataclass(frozen=True)
class CurveFamily:
    """Values of one quantity over a radius grid, one row per order ``m``.

    ``counts`` holds the pair counts backing each entry, ``half`` optional
    values of the same quantity recomputed on the first half of the data.
    """

    quantity: str
    orders: tuple
    grid: np.ndarray
    values: np.ndarray
    counts: np.ndarray = None
    half: np.ndarray = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.quantity not in QUANTITIES:
            raise UsageError(f"unknown quantity {self.quantity!r}")
        orders = tuple(int(m) for m in self.orders)
        grid = np.array(self.grid, dtype=float)
        values = np.array(self.values, dtype=float).reshape(len(orders), grid.size)
        for name, arr in (("grid", grid), ("values", values)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "orders", orders)
        for name in ("counts", "half"):
            arr = getattr(self, name)
            if arr is not None:
                arr = np.array(arr).reshape(values.shape)
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)

    def __contains__(self, m):
        return int(m) in self.orders

    def index(self, m):
        try:
            return self.orders.index(int(m))
        except ValueError:
            raise MissingOrder(f"{self.quantity} has no order m={m} "
                               f"(available: {self.orders[0]}..{self.orders[-1]})") from None

    def row(self, m):
        return self.values[self.index(m)]

    def count_row(self, m):
        return None if self.counts is None else self.counts[self.index(m)]

    def to_csv(self, path, header=(), bits=False):
        """Long format ``m,epsilon,value,count``; missing values are empty fields."""
        scale = 1.0 / math.log(2.0) if bits and self.quantity in ("H2", "h2", "deltaH", "E2", "PI") else 1.0
        with open(path, "w", newline="") as fh:
            fh.write(f"# quantity={self.quantity}\n")
            if bits and scale != 1.0:
                fh.write("# unit=bits\n")
            for h in header:
                fh.write(f"# {h}\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["m", "epsilon", "value", "count"])
            for r, m in enumerate(self.orders):
                for e, eps in enumerate(self.grid):
                    v = self.values[r, e]
                    c = "" if self.counts is None else int(self.counts[r, e])
                    w.writerow([m, repr(float(eps)), "" if np.isnan(v) else repr(float(v * scale)), c])

    @classmethod
    def from_csv(cls, path):
        quantity = None
        rows = []
        with open(path) as fh:
            for line in fh:
                if line.startswith("#"):
                    if line.startswith("# quantity="):
                        quantity = line.split("=", 1)[1].strip()
                    continue
                rows.append(line.rstrip("\n"))
        reader = csv.DictReader(rows)
        recs = list(reader)
        orders = sorted({int(r["m"]) for r in recs})
        grid = sorted({float(r["epsilon"]) for r in recs})
        values = np.full((len(orders), len(grid)), np.nan)
        counts = np.zeros((len(orders), len(grid)), dtype=np.int64)
        has_counts = True
        gi = {g: i for i, g in enumerate(grid)}
        for r in recs:
            i, j = orders.index(int(r["m"])), gi[float(r["epsilon"])]
            if r["value"] != "":
                values[i, j] = float(r["value"])
            if r.get("count", "") == "":
                has_counts = False
            else:
                counts[i, j] = int(r["count"])
        return cls(quantity, orders, grid, values, counts if has_counts else None)


def _grid_values(grid):
    if isinstance(grid, EpsGrid):
        return grid.values
    return EpsGrid(grid).values


def _check_cloud(cloud, cfg):
    n = len(cloud)
    o = cloud.origin_indices
    if n < 2 or o[-1] - o[0] <= cfg.theiler:
        raise TooFewPoints(f"{n} points leave no admissible pair with theiler={cfg.theiler}")


def _pair_counts(cloud, eps, cfg, exact=None):
    X = np.ascontiguousarray(cloud.points, dtype=float)
    origin = np.ascontiguousarray(cloud.origin_indices, dtype=np.int64)
    n = X.shape[0]
    if exact is None:
        exact = n <= cfg.exact_limit
    if exact:
        refs = np.arange(n, dtype=np.int64)
    else:
        refs = make_rng(cfg.seed, 0x5eed).permutation(n).astype(np.int64)
    counts, totals, used = _paircount.count_pairs(
        X, origin, np.ascontiguousarray(eps), int(cfg.theiler), refs, bool(exact),
        int(cfg.min_pairs), int(cfg.min_refs), int(cfg.max_ops))
    return counts.T, totals, used, exact


def correlation_sum(cloud, grid, cfg=PairCountConfig(), exact=None):
    """Correlation sums of ``cloud`` and of all its lower-order prefixes.

    Returns a ``C2`` family with orders ``1..cloud.m``. ``C2[m](eps)`` is the
    fraction of admissible pairs whose max-norm distance in the first ``m``
    coordinates is strictly below ``eps``.
    """
    eps = _grid_values(grid)
    _check_cloud(cloud, cfg)
    counts, totals, used, exact = _pair_counts(cloud, eps, cfg, exact)
    with np.errstate(invalid="ignore", divide="ignore"):
        c2 = np.where(totals > 0, counts / np.maximum(totals, 1), np.nan)
    meta = {"exact": exact, "totals": totals.tolist(), "references": used.tolist(),
            "theiler": cfg.theiler, "n_points": len(cloud)}
    return CurveFamily("C2", range(1, cloud.m + 1), eps, c2, counts, meta=meta)


def correlation_sum_naive(cloud, grid, cfg=PairCountConfig()):
    """O(N^2) reference implementation of :func:`correlation_sum` (exact mode)."""
    eps = _grid_values(grid)
    _check_cloud(cloud, cfg)
    X = np.ascontiguousarray(cloud.points, dtype=float)
    counts, totals = _paircount.naive_counts(
        X, np.ascontiguousarray(cloud.origin_indices, dtype=np.int64), eps, int(cfg.theiler))
    c2 = counts.T / totals
    return CurveFamily("C2", range(1, cloud.m + 1), eps, c2, counts.T)


def block_correlation_sums(series, m_max, tau, grid, cfg=PairCountConfig(), exact=None):
    """``C2`` for orders ``1..m_max`` on the common index range of order ``m_max``."""
    cloud = delay_embed(series, EmbeddingSpec(m_max, tau))
    fam = correlation_sum(cloud, grid, cfg, exact)
    fam.meta.update(tau=tau)
    return fam


def entropy_curves(c2):
    """``H2 = -ln C2`` in nats; NaN where ``C2 == 0``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        h = np.where(c2.values > 0, -np.log(np.where(c2.values > 0, c2.values, 1.0)), np.nan)
    return CurveFamily("H2", c2.orders, c2.grid, h, c2.counts, meta=dict(c2.meta))


def conditional_entropy_curves(H2, orders=None):
    """``h_m = H_{m+1} - H_m`` and ``h_0 = H_1``."""
    if orders is None:
        orders = [0] + [m for m in H2.orders if m + 1 in H2]
    rows, counts = [], []
    for m in orders:
        if m == 0:
            rows.append(H2.row(1))
            counts.append(H2.count_row(1))
        else:
            rows.append(H2.row(m + 1) - H2.row(m))
            counts.append(H2.count_row(m + 1))
    cnt = None if H2.counts is None else np.array(counts)
    return CurveFamily("h2", orders, H2.grid, np.array(rows), cnt, meta=dict(H2.meta))


def delta_h_curves(h2, orders=None):
    """``dh_m = h_{m-1} - h_m`` for ``m >= 1``."""
    if orders is None:
        orders = [m for m in h2.orders if m >= 1 and m - 1 in h2]
    rows, counts = [], []
    for m in orders:
        if m < 1:
            raise MissingOrder(f"deltaH is defined for m >= 1, got {m}")
        rows.append(h2.row(m - 1) - h2.row(m))
        counts.append(h2.count_row(m))
    cnt = None if h2.counts is None else np.array(counts)
    return CurveFamily("deltaH", orders, h2.grid, np.array(rows), cnt, meta=dict(h2.meta))


def dimension_curve(c2, delta_steps=1):
    """Scale-dependent dimension by the difference quotient over ``delta_steps`` radii.

    ``D(eps_i) = ln(C(eps_{i+d}) / C(eps_i)) / ln(eps_{i+d} / eps_i)``; the last
    ``delta_steps`` radii are undefined.
    """
    d = int(delta_steps)
    eps = c2.grid
    if d < 1:
        raise UsageError("delta_steps must be positive")
    if eps.size < d + 1:
        raise GridTooSmall(f"need at least {d + 1} radii, have {eps.size}")
    c = c2.values
    out = np.full(c.shape, np.nan)
    with np.errstate(divide="ignore", invalid="ignore"):
        num = np.log(c[:, d:]) - np.log(c[:, :-d])
        den = np.log(eps[d:] / eps[:-d])
        ok = (c[:, d:] > 0) & (c[:, :-d] > 0)
        out[:, :-d] = np.where(ok, num / den, np.nan)
    return CurveFamily("D2", c2.orders, eps, out, c2.counts, meta=dict(c2.meta, delta_steps=d))


def excess_entropy_from_delta_h(dh, m):
    """``sum_{k=1}^{m-1} k dh_k``; zero for ``m = 1``."""
    total = np.zeros(dh.grid.size)
    for k in range(1, m):
        total = total + k * dh.row(k)
    return total


def excess_entropy_curves(H2, h2, orders=None, check=True):
    """``E_m = H_m - m h_{m-1}``.

    With ``check`` the result is compared with the telescoped form
    ``sum_{k<m} k dh_k`` and an ``ArithmeticError`` is raised if they differ by
    more than :data:`IDENTITY_TOL` nats anywhere both are defined.
    """
    if orders is None:
        orders = [m for m in H2.orders if m >= 1 and m - 1 in h2]
    rows, counts = [], []
    for m in orders:
        rows.append(H2.row(m) - m * h2.row(m - 1))
        counts.append(H2.count_row(m))
    values = np.array(rows)
    if check:
        dh = delta_h_curves(h2, [k for k in range(1, max(orders)) if k in h2 and k - 1 in h2])
        for r, m in enumerate(orders):
            alt = excess_entropy_from_delta_h(dh, m)
            ok = np.isfinite(alt) & np.isfinite(values[r])
            if np.any(np.abs(alt[ok] - values[r][ok]) > IDENTITY_TOL):
                raise ArithmeticError(f"telescoping identity violated at m={m}")
    cnt = None if H2.counts is None else np.array(counts)
    return CurveFamily("E2", orders, H2.grid, values, cnt, meta=dict(H2.meta))


def half_data_error(op, cloud, *args, **kwargs):
    """Recompute ``op(cloud, ...)`` on the first half of the points."""
    n = len(cloud) // 2
    if n < 2:
        raise TooFewPoints(f"first half of {len(cloud)} points has fewer than 2 points")
    return op(cloud.head(n), *args, **kwargs)


@dataclass
class CurveSet:
    """All correlation-sum curve families of one analysis run."""

    C2: CurveFamily
    H2: CurveFamily
    h2: CurveFamily
    deltaH: CurveFamily
    D2: CurveFamily
    E2: CurveFamily

    def families(self):
        return {q: getattr(self, q) for q in ("C2", "H2", "h2", "deltaH", "D2", "E2")}


def analyze(series, m_max, tau, grid=None, cfg=PairCountConfig(), delta_steps=1, exact=None):
    """Compute C2, H2 for orders ``1..m_max`` and everything derived from them.

    ``h2`` covers orders ``0..m_max-1``, ``deltaH`` orders ``1..m_max-1`` and
    ``E2`` orders ``1..m_max``.
    """
    if grid is None:
        grid = EpsGrid.for_series(series)
    c2 = block_correlation_sums(series, m_max, tau, grid, cfg, exact)
    H2 = entropy_curves(c2)
    h2 = conditional_entropy_curves(H2)
    dh = delta_h_curves(h2)
    E2 = excess_entropy_curves(H2, h2)
    D2 = dimension_curve(c2, delta_steps)
    return CurveSet(c2, H2, h2, dh, D2, E2)
