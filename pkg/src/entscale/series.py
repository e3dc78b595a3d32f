"""Scalar time series: loading, rescaling, delay embedding and noise.

Randomness is drawn from numpy's PCG64 bit generator. A stream is identified
by a 64-bit base seed plus an optional tuple of integer keys (e.g. the index
of a noise level in a grid); the pair is fed to :class:`numpy.random.SeedSequence`
so derived streams are independent and reproducible.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (EmptySeries, InvalidFactor, InvalidSeries, NegativeEta,
                     ParseError, SeriesTooShort, UsageError)

_DT_DIRECTIVE = re.compile(r"^#\s*dt\s*=\s*(\S+)\s*$")

SEED_MAX = 2**64 - 1


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def make_rng(seed, *keys):
    """Return a ``numpy.random.Generator`` for ``seed`` and stream ``keys``."""
    seed = int(seed)
    if not 0 <= seed <= SEED_MAX:
        raise UsageError(f"seed must be a 64-bit unsigned integer, got {seed}")
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True)
class ScalarSeries:
    """Uniformly sampled scalar series. ``dt`` is informational only."""

    samples: np.ndarray
    dt: float = 1.0
    label: str = ""

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=float)
        if x.ndim != 1:
            raise InvalidSeries("samples must be one-dimensional")
        if x.size < 2:
            raise EmptySeries(f"need at least 2 samples, got {x.size}")
        if not np.all(np.isfinite(x)):
            raise InvalidSeries("samples must be finite")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise InvalidSeries(f"dt must be positive, got {self.dt}")
        object.__setattr__(self, "samples", _readonly(x))

    def __len__(self):
        return self.samples.size

    def replace(self, samples, label=None):
        return ScalarSeries(samples, self.dt, self.label if label is None else label)

    @property
    def amplitude(self):
        return float(self.samples.max() - self.samples.min())


@dataclass(frozen=True)
class EmbeddingSpec:
    m: int
    tau: int = 1

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 1:
            raise UsageError(f"embedding order m must be a positive integer, got {self.m}")
        if int(self.tau) != self.tau or self.tau < 1:
            raise UsageError(f"delay tau must be a positive integer, got {self.tau}")

    @property
    def span(self):
        """Number of samples lost at the start of the series."""
        return (self.m - 1) * self.tau

    def n_points(self, n_samples):
        return n_samples - self.span


@dataclass(frozen=True)
class PointCloud:
    """Delay vectors, newest coordinate first.

    ``origin_indices[i]`` is the sample index of coordinate 0 of point ``i``.
    """

    points: np.ndarray
    origin_indices: np.ndarray = field(default=None)

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim == 1:
            p = p[:, None]
        if p.ndim != 2:
            raise InvalidSeries("points must be a 2-d array")
        idx = self.origin_indices
        idx = np.arange(p.shape[0]) if idx is None else np.asarray(idx, dtype=np.int64)
        if idx.shape != (p.shape[0],):
            raise InvalidSeries("one origin index per point required")
        if idx.size > 1 and np.any(np.diff(idx) <= 0):
            raise InvalidSeries("origin indices must be strictly increasing")
        p = np.ascontiguousarray(p)
        p.setflags(write=False)
        idx = np.array(idx)
        idx.setflags(write=False)
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "origin_indices", idx)

    def __len__(self):
        return self.points.shape[0]

    @property
    def m(self):
        return self.points.shape[1]

    def head(self, n):
        """First ``n`` points."""
        return PointCloud(self.points[:n], self.origin_indices[:n])

    def prefix(self, m):
        """Lower-order embedding on the same index range (first ``m`` coordinates)."""
        return PointCloud(self.points[:, :m], self.origin_indices)


def load_series(path, column=0, label=None):
    """Read one column of a comma separated file.

    Lines starting with ``#`` are comments; ``# dt=<value>`` sets the sampling
    interval. Blank lines are skipped.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    if column < 0:
        raise UsageError("column must be non-negative")
    dt = 1.0
    values = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            s = line.strip()
            if not s:
                continue
            if s.startswith("#"):
                m = _DT_DIRECTIVE.match(s)
                if m:
                    dt = float(m.group(1))
                continue
            cells = s.split(",")
            if column >= len(cells):
                raise ParseError(lineno, column, None)
            cell = cells[column].strip()
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(lineno, column, cell) from None
            if not math.isfinite(v):
                raise ParseError(lineno, column, cell)
            values.append(v)
    if len(values) < 2:
        raise EmptySeries(f"{path}: need at least 2 data rows, found {len(values)}")
    return ScalarSeries(np.array(values), dt=dt, label=label or path.stem)


def save_series(series, path, header=None, columns=None):
    """Write ``series`` (and optional extra columns) in the loadable CSV format."""
    cols = [series.samples] + [np.asarray(c, dtype=float) for c in (columns or [])]
    data = np.column_stack(cols)
    lines = [f"# dt={series.dt!r}"]
    for h in header or []:
        lines.append(f"# {h}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
        np.savetxt(fh, data, delimiter=",", fmt="%.17g")


def rescale(series, factor):
    if not (math.isfinite(factor) and factor > 0):
        raise InvalidFactor(f"factor must be positive and finite, got {factor}")
    return series.replace(series.samples * factor)


def delay_embed(series, spec):
    """Delay vectors ``(y_t, y_{t-tau}, ..., y_{t-(m-1)tau})``."""
    y = series.samples if isinstance(series, ScalarSeries) else np.asarray(series, dtype=float)
    n = y.size - spec.span
    if n < 2:
        raise SeriesTooShort(
            f"{y.size} samples cannot hold 2 points at m={spec.m}, tau={spec.tau}")
    start = spec.span
    cols = [y[start - k * spec.tau: start - k * spec.tau + n] for k in range(spec.m)]
    return PointCloud(np.column_stack(cols), np.arange(start, start + n))


def add_uniform_noise(series, eta, seed, *keys):
    """Add i.i.d. U[0, eta] noise to every sample (eta=0 returns ``series``)."""
    if not eta >= 0:
        raise NegativeEta(f"eta must be non-negative, got {eta}")
    if eta == 0:
        return series
    rng = make_rng(seed, *keys)
    return series.replace(series.samples + rng.uniform(0.0, eta, size=len(series)))
