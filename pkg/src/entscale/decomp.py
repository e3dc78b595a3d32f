"""Decomposition of the excess entropy into state, scale and memory parts.

Given preprocessed delta-h curves (see :mod:`entscale.scalefit`) the excess
entropy ``E = sum_k k dh_k`` is split at every radius by the range of orders
``m_l..m_u`` whose slope exceeds ``s_min`` (the middle term):

* ``E_state = sum_{k<m_l} k dh_k + sum_{m_l<=k<=m_u} k c_k``
* ``E_eps   = sum_{m_l<=k<=m_u} k (dh_k - c_k)``
* ``E_mem   = sum_{k>m_u} k dh_k``

``c_k`` are plateau constants read off at larger scales. Radii where the
middle-term slopes sum to less than ``1 - kappa_max`` are treated as
stochastic and inherit their order range from the nearest larger radius that
is deterministic.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import NoPlateau, NoUnitSlopeRange, UsageError, WindowTooSmall
from .scalefit import fit_curve


@dataclass(frozen=True)
class DecompConfig:
    s_min: float = 0.1
    kappa_max: float = 0.5
    m_max: int = None

    def __post_init__(self):
        if not 0 < self.s_min < 1:
            raise UsageError(f"s_min must lie in (0, 1), got {self.s_min}")
        if not 0 < self.kappa_max <= 1:
            raise UsageError(f"kappa_max must lie in (0, 1], got {self.kappa_max}")
        if self.m_max is not None and self.m_max < 2:
            raise UsageError("m_max must be at least 2")


@dataclass(frozen=True)
class MTRanges:
    """Per-radius middle-term order range.

    An empty range is encoded as ``(1, 0)``. ``source[e]`` is the grid index
    the range was taken from (``e`` itself unless inherited, -1 if none).
    """

    m_l: np.ndarray
    m_u: np.ndarray
    kappa: np.ndarray
    kappa_raw: np.ndarray
    stochastic: np.ndarray
    source: np.ndarray

    @property
    def empty(self):
        return self.m_u < self.m_l


def _orders(pre, cfg):
    orders = [m for m in pre.orders if m >= 1]
    if cfg.m_max is not None:
        orders = [m for m in orders if m <= cfg.m_max]
    if orders != list(range(1, len(orders) + 1)):
        raise UsageError("delta-h orders must be contiguous from 1")
    return orders


def _own_range(slopes, s_min):
    """Longest run of consecutive orders with slope above ``s_min``.

    Ties go to the larger slope sum, then the lower orders. Returns 1-based
    ``(m_l, m_u)`` or ``(1, 0)``.
    """
    best = (0, 0.0, 1, 0)
    k = 0
    n = len(slopes)
    while k < n:
        if slopes[k] > s_min:
            j = k
            while j + 1 < n and slopes[j + 1] > s_min:
                j += 1
            length, total = j - k + 1, float(np.sum(slopes[k:j + 1]))
            if length > best[0] or (length == best[0] and total > best[1]):
                best = (length, total, k + 1, j + 1)
            k = j + 1
        else:
            k += 1
    return best[2], best[3], best[1]


def mt_range(pre, cfg=DecompConfig()):
    orders = _orders(pre, cfg)
    S = np.asarray(pre.slope_field)[[pre.delta_h.index(m) for m in orders]]
    S = np.where(np.isfinite(S), S, -np.inf)
    E = S.shape[1]
    m_l = np.ones(E, dtype=int)
    m_u = np.zeros(E, dtype=int)
    raw = np.ones(E)
    for e in range(E):
        lo, hi, total = _own_range(S[:, e], cfg.s_min)
        m_l[e], m_u[e] = lo, hi
        raw[e] = 1.0 - total
    kappa = np.clip(raw, 0.0, 1.0)
    stoch = kappa >= cfg.kappa_max
    source = np.arange(E)
    out_l, out_u = m_l.copy(), m_u.copy()
    for e in np.flatnonzero(stoch):
        above = np.flatnonzero(~stoch[e + 1:])
        if above.size:
            src = e + 1 + above[0]
            out_l[e], out_u[e], source[e] = m_l[src], m_u[src], src
        else:
            out_l[e], out_u[e], source[e] = 1, 0, -1
    return MTRanges(out_l, out_u, kappa, raw, stoch, source)


def mt_constants(pre, mt=None, cfg=DecompConfig()):
    """Plateau constants ``c[m][e] = min dh_m`` over ``(eps_e, eps*]``.

    ``eps*`` is the smallest radius above ``eps_e`` whose slope is below
    ``s_min``; without one the constant is 0. Negative minima are floored at 0.
    Rows follow ``pre.delta_h.orders``.
    """
    values = pre.delta_h.values
    slopes = pre.slope_field
    R, E = values.shape
    c = np.zeros((R, E))
    for r in range(R):
        flat = np.flatnonzero(np.isfinite(slopes[r]) & (slopes[r] < cfg.s_min))
        for e in range(E):
            nxt = flat[flat > e]
            if nxt.size == 0:
                continue
            seg = values[r, e + 1:nxt[0] + 1]
            seg = seg[np.isfinite(seg)]
            if seg.size:
                c[r, e] = max(0.0, float(seg.min()))
    return c


@dataclass
class WindowSummary:
    eps_lo: float
    eps_hi: float
    n_points: int
    E_state: tuple
    E_mem: tuple
    E_core: tuple
    D: float
    const: float

    def as_dict(self):
        return asdict(self)


@dataclass
class DecompositionReport:
    """Per-radius decomposition, quality measures and window summaries (nats)."""

    grid: np.ndarray
    E_state: np.ndarray
    E_eps: np.ndarray
    E_mem: np.ndarray
    E_total: np.ndarray
    m_l: np.ndarray
    m_u: np.ndarray
    kappa: np.ndarray
    stochastic: np.ndarray
    quality: dict
    config: dict = field(default_factory=dict)
    windows: list = field(default_factory=list)

    @property
    def E_core(self):
        return self.E_state + self.E_mem

    def per_eps(self):
        recs = []
        for e, eps in enumerate(self.grid):
            recs.append({
                "epsilon": float(eps),
                "E_state": _num(self.E_state[e]), "E_eps": _num(self.E_eps[e]),
                "E_mem": _num(self.E_mem[e]), "E_total": _num(self.E_total[e]),
                "m_l": int(self.m_l[e]), "m_u": int(self.m_u[e]),
                "kappa": float(self.kappa[e]), "stochastic": bool(self.stochastic[e]),
            })
        return recs

    def to_json(self, path=None):
        q = [{"epsilon": float(eps), **{k: float(v[e]) for k, v in self.quality.items()}}
             for e, eps in enumerate(self.grid)]
        doc = {"config": self.config, "per_eps": self.per_eps(), "quality": q,
               "windows": [w.as_dict() for w in self.windows]}
        text = json.dumps(doc, indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    def to_csv(self, path, header=()):
        cols = "epsilon,E_state,E_eps,E_mem,E_total,m_l,m_u,kappa,stochastic,neg,nofit,extrap"
        with open(path, "w") as fh:
            for h in header:
                fh.write(f"# {h}\n")
            fh.write(cols + "\n")
            for e, rec in enumerate(self.per_eps()):
                vals = [repr(rec["epsilon"])]
                vals += ["" if rec[k] is None else repr(rec[k])
                         for k in ("E_state", "E_eps", "E_mem", "E_total")]
                vals += [str(rec["m_l"]), str(rec["m_u"]), repr(rec["kappa"]),
                         str(int(rec["stochastic"]))]
                vals += [repr(float(self.quality[k][e])) for k in ("neg", "nofit", "extrap")]
                fh.write(",".join(vals) + "\n")


def _num(v):
    v = float(v)
    return None if math.isnan(v) else v


def quality_report(pre, mt, cfg=DecompConfig()):
    """Table of per-radius quality measures, each in [0, 1] (0 is best)."""
    orders = _orders(pre, cfg)
    rows = [pre.delta_h.index(m) for m in orders]
    n = len(rows)
    if n == 0:
        E = pre.grid.size
        return {"kappa": np.ones(E), "neg": np.zeros(E), "nofit": np.ones(E), "extrap": np.zeros(E)}
    return {
        "kappa": np.asarray(mt.kappa, dtype=float),
        "neg": pre.negative[rows].sum(axis=0) / n,
        "nofit": pre.raw_flag[rows].sum(axis=0) / n,
        "extrap": pre.extrapolated[rows].sum(axis=0) / n,
    }


def decompose(pre, mt=None, c_mt=None, cfg=DecompConfig()):
    if mt is None:
        mt = mt_range(pre, cfg)
    if c_mt is None:
        c_mt = mt_constants(pre, mt, cfg)
    orders = _orders(pre, cfg)
    rows = [pre.delta_h.index(m) for m in orders]
    dh = pre.delta_h.values[rows]
    c = np.asarray(c_mt)[rows]
    k = np.array(orders, dtype=float)[:, None]
    E = dh.shape[1]
    lo = mt.m_l[None, :]
    hi = mt.m_u[None, :]
    below = k < lo
    middle = (k >= lo) & (k <= hi)
    above = k > hi
    kdh = k * dh
    kc = k * c
    E_state = np.where(below, kdh, 0.0).sum(0) + np.where(middle, kc, 0.0).sum(0)
    E_eps = np.where(middle, kdh - kc, 0.0).sum(0)
    E_mem = np.where(above, kdh, 0.0).sum(0)
    E_total = kdh.sum(0)
    undefined = ~np.isfinite(dh).all(axis=0)
    for arr in (E_state, E_eps, E_mem, E_total):
        arr[undefined] = np.nan
    quality = quality_report(pre, mt, cfg)
    config = {"s_min": cfg.s_min, "kappa_max": cfg.kappa_max, "m_max": max(orders) if orders else 0}
    stochastic = mt.stochastic | mt.empty
    return DecompositionReport(np.array(pre.grid), E_state, E_eps, E_mem, E_total,
                               mt.m_l.copy(), mt.m_u.copy(), mt.kappa.copy(), stochastic,
                               quality, config)


def _window_index(grid, eps_lo, eps_hi):
    g = np.asarray(grid)
    tol = 1e-9
    return np.flatnonzero((g >= eps_lo * (1 - tol)) & (g <= eps_hi * (1 + tol)))


def _mean_std(v):
    v = v[np.isfinite(v)]
    if v.size == 0:
        return (float("nan"), float("nan"))
    return (float(v.mean()), float(v.std()))


def summarize_window(report, eps_lo, eps_hi):
    """Mean and (population) std of the complexities over ``[eps_lo, eps_hi]``.

    ``D`` and ``const`` come from a least-squares line ``E_total = const - D ln eps``.
    """
    idx = _window_index(report.grid, eps_lo, eps_hi)
    if idx.size < 3:
        raise WindowTooSmall(f"window [{eps_lo}, {eps_hi}] holds {idx.size} radii, need 3")
    x = -np.log(report.grid[idx])
    y = report.E_total[idx]
    ok = np.isfinite(y)
    if ok.sum() >= 2:
        D, const = np.polyfit(x[ok], y[ok], 1)
    else:
        D = const = float("nan")
    s = WindowSummary(float(eps_lo), float(eps_hi), int(idx.size),
                      _mean_std(report.E_state[idx]), _mean_std(report.E_mem[idx]),
                      _mean_std(report.E_core[idx]), float(D), float(const))
    return s


@dataclass(frozen=True)
class Crossover:
    eps_star: float
    h_ks: float
    h_c: float
    plateau: object
    unit: object


def crossover_scale(h2, m, fits=None, s_min=0.1, unit_tol=0.2):
    """Noise crossover radius ``eps* = exp(h_c - h_KS)`` from the h-curve of order ``m``.

    ``h_KS`` is the mean of the plateau fit (|slope| < ``s_min``) and ``h_c``
    the mean of ``h + ln eps`` over the closest unit-slope fit
    (|slope - 1| < ``unit_tol``) below it.
    """
    values = h2.row(m)
    grid = h2.grid
    if fits is None:
        fits, _ = fit_curve(values, grid, m=m)
    plateaus = [f for f in fits if abs(f.slope) < s_min]
    if not plateaus:
        raise NoPlateau(f"h_{m} has no plateau fit")
    plateau = max(plateaus, key=lambda f: (f.n_points, -f.q))
    units = [f for f in fits if abs(f.slope - 1.0) < unit_tol and f.i_u <= plateau.i_l + 1]
    if not units:
        raise NoUnitSlopeRange(f"h_{m} has no unit-slope range below its plateau")
    unit = max(units, key=lambda f: f.i_u)
    x = np.log(grid)
    sl = slice(plateau.i_l, plateau.i_u + 1)
    h_ks = float(np.mean(values[sl]))
    su = slice(unit.i_l, unit.i_u + 1)
    h_c = float(np.mean(values[su] + x[su]))
    return Crossover(math.exp(h_c - h_ks), h_ks, h_c, plateau, unit)


@dataclass
class Decomposition:
    """Everything produced by :func:`run_decomposition`."""

    pre: object
    mt: MTRanges
    c_mt: np.ndarray
    report: DecompositionReport


def run_decomposition(delta_h, cfg=DecompConfig(), windows=()):
    from .scalefit import preprocess

    if cfg.m_max is not None:
        keep = [m for m in delta_h.orders if 1 <= m <= cfg.m_max]
        if len(keep) < cfg.m_max:
            raise UsageError(f"delta-h curves cover orders up to {max(delta_h.orders)}, "
                             f"m_max={cfg.m_max} requested")
    pre = preprocess(delta_h)
    mt = mt_range(pre, cfg)
    c = mt_constants(pre, mt, cfg)
    report = decompose(pre, mt, c, cfg)
    for lo, hi in windows:
        report.windows.append(summarize_window(report, lo, hi))
    return Decomposition(pre, mt, c, report)
