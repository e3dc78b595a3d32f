"""Synthetic generators and exact Gaussian oracles.

Generators
    * Lorenz flow integrated with classical RK4, optionally with dynamic
      noise: before every integration step each state component receives an
      independent ``U(-a, a)`` kick, ``a = noise_amp``.
    * AR(2) process ``x[n+1] = a1 x[n] + a2 x[n-1] + xi[n]`` with Gaussian
      innovations.

Oracles
    The AR(2) autocorrelations ``r_k`` are evaluated in exact rational
    arithmetic, block entropies of Gaussian vectors from their covariance
    determinant, and the one- and two-step mutual informations as differences
    of block entropies. All information values are in nats.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import mpmath
import numpy as np
from numba import njit
from scipy.signal import lfilter

from .errors import (InvalidParams, NonStationaryParams, NotPositiveDefinite,
                     NumericalBlowup)
from .series import ScalarSeries, make_rng

BLOWUP = 1e6
_CHUNK = 20_000


@dataclass(frozen=True)
class LorenzParams:
    n_samples: int = 100_000
    s: float = 10.0
    r: float = 28.0
    b: float = 8.0 / 3.0
    integration_step: float = 5e-4
    sampling_dt: float = 0.01
    noise_amp: float = 0.0
    seed: int = 0
    initial_state: tuple = (1.0, 1.0, 1.0)
    transient_steps: int = 10_000

    @property
    def steps_per_sample(self):
        return int(round(self.sampling_dt / self.integration_step))

    def validate(self):
        if not self.integration_step > 0:
            raise InvalidParams("integration_step must be positive")
        k = self.sampling_dt / self.integration_step
        if self.sampling_dt <= 0 or abs(k - round(k)) > 1e-9 * max(1.0, k) or round(k) < 1:
            raise InvalidParams("sampling_dt must be a positive integer multiple of integration_step")
        if self.n_samples < 1:
            raise InvalidParams("n_samples must be at least 1")
        if not self.noise_amp >= 0:
            raise InvalidParams("noise_amp must be non-negative")
        if self.transient_steps < 0:
            raise InvalidParams("transient_steps must be non-negative")
        if len(self.initial_state) != 3:
            raise InvalidParams("initial_state must have three components")


@njit(cache=True)
def _rk4_run(state, n_out, every, h, s, r, b, kicks, out):
    """Advance ``state`` in place, storing every ``every``-th state into ``out``.

    ``kicks`` has one row per integration step (or zero rows for no noise).
    Returns False on blow-up.
    """
    x, y, z = state[0], state[1], state[2]
    noisy = kicks.shape[0] > 0
    store = out.shape[0] > 0
    step = 0
    for i in range(n_out):
        for _ in range(every):
            if noisy:
                x += kicks[step, 0]
                y += kicks[step, 1]
                z += kicks[step, 2]
            step += 1
            k1x = s * (y - x)
            k1y = x * (r - z) - y
            k1z = x * y - b * z
            x2, y2, z2 = x + 0.5 * h * k1x, y + 0.5 * h * k1y, z + 0.5 * h * k1z
            k2x = s * (y2 - x2)
            k2y = x2 * (r - z2) - y2
            k2z = x2 * y2 - b * z2
            x3, y3, z3 = x + 0.5 * h * k2x, y + 0.5 * h * k2y, z + 0.5 * h * k2z
            k3x = s * (y3 - x3)
            k3y = x3 * (r - z3) - y3
            k3z = x3 * y3 - b * z3
            x4, y4, z4 = x + h * k3x, y + h * k3y, z + h * k3z
            k4x = s * (y4 - x4)
            k4y = x4 * (r - z4) - y4
            k4z = x4 * y4 - b * z4
            x += h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x)
            y += h / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
            z += h / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
        if not (abs(x) < 1e6 and abs(y) < 1e6 and abs(z) < 1e6):
            return False
        if store:
            out[i, 0] = x
            out[i, 1] = y
            out[i, 2] = z
    state[0], state[1], state[2] = x, y, z
    return True


def amplitude_for_noise_std(std):
    """Half-width of the uniform kick whose standard deviation is ``std``.

    Noise levels quoted as an absolute level (TISEAN convention) are standard
    deviations; ``U(-a, a)`` has standard deviation ``a / sqrt(3)``.
    """
    if not std >= 0:
        raise InvalidParams("noise level must be non-negative")
    return math.sqrt(3.0) * std


def lorenz_generate(params):
    """Integrate the Lorenz system and return the sampled x, y, z series."""
    p = params
    p.validate()
    every = p.steps_per_sample
    h = p.integration_step
    rng = make_rng(p.seed, 0x10)
    state = np.array(p.initial_state, dtype=float)
    empty = np.empty((0, 3))
    dummy = np.empty((0, 3))

    def kicks(n):
        if p.noise_amp == 0:
            return empty
        return rng.uniform(-p.noise_amp, p.noise_amp, size=(n, 3))

    # transient, in chunks of integration steps
    left = p.transient_steps
    while left > 0:
        n = min(left, _CHUNK * every)
        if not _rk4_run(state, n, 1, h, p.s, p.r, p.b, kicks(n), dummy):
            raise NumericalBlowup("Lorenz state exceeded 1e6 during transient")
        left -= n

    out = np.empty((p.n_samples, 3))
    done = 0
    while done < p.n_samples:
        n = min(_CHUNK, p.n_samples - done)
        buf = out[done:done + n]
        if not _rk4_run(state, n, every, h, p.s, p.r, p.b, kicks(n * every), buf):
            raise NumericalBlowup(f"Lorenz state exceeded 1e6 near sample {done}")
        done += n
    dt = p.sampling_dt
    return tuple(ScalarSeries(out[:, c].copy(), dt=dt, label=f"lorenz_{name}")
                 for c, name in enumerate("xyz"))


# -- AR(2) ------------------------------------------------------------------

@dataclass(frozen=True)
class Ar2Params:
    a1: float
    a2: float
    sigma: float = 1.0
    n_samples: int = 100_000
    seed: int = 0
    transient: int = 1_000

    def validate(self):
        a1, a2 = self.a1, self.a2
        if not (a2 > -1 and a1 + a2 < 1 and a2 - a1 < 1):
            raise NonStationaryParams(
                f"(a1, a2) = ({a1}, {a2}) is outside the stationarity triangle")
        if not self.sigma > 0:
            raise InvalidParams("sigma must be positive")
        if self.n_samples < 1:
            raise InvalidParams("n_samples must be at least 1")


def ar2_generate(params):
    p = params
    p.validate()
    rng = make_rng(p.seed, 0xA2)
    xi = p.sigma * rng.standard_normal(p.n_samples + p.transient)
    x = lfilter([1.0], [1.0, -p.a1, -p.a2], xi)
    return ScalarSeries(x[p.transient:], dt=1.0, label="ar2")


@dataclass(frozen=True)
class Ar2Oracle:
    """Exact second-order statistics of a stationary AR(2) process."""

    params: Ar2Params
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.params.validate()

    @cached_property
    def _a(self):
        return Fraction(self.params.a1), Fraction(self.params.a2)

    def r(self, k):
        """Autocorrelation at lag ``k`` as an exact fraction."""
        k = abs(int(k))
        rs = self._cache.setdefault("r", [])
        if not rs:
            a1, a2 = self._a
            rs.extend([Fraction(1), a1 / (1 - a2)])
        a1, a2 = self._a
        while len(rs) <= k:
            rs.append(a1 * rs[-1] + a2 * rs[-2])
        return rs[k]

    @property
    def variance(self):
        """Stationary variance from the Yule-Walker equations."""
        a1, a2, s2 = self.params.a1, self.params.a2, self.params.sigma ** 2
        return s2 * (1 - a2) / ((1 + a2) * ((1 - a2) ** 2 - a1 ** 2))

    @property
    def beta_without_cross_term(self):
        """``sigma^2 / (1 - a1^2 - a2^2)``; drops the lag-1 cross term, kept for reference only."""
        a1, a2 = self.params.a1, self.params.a2
        return self.params.sigma ** 2 / (1 - a1 ** 2 - a2 ** 2)

    def correlation_matrix(self, n, delay=1):
        """``n x n`` Toeplitz matrix of ``r_{delay*|i-j|}`` (exact fractions)."""
        return [[self.r(delay * abs(i - j)) for j in range(n)] for i in range(n)]


def ar2_autocorr(oracle, k):
    return float(oracle.r(k))


def gaussian_block_entropy(covariance, dps=None):
    """Differential entropy ``0.5 ln((2 pi e)^n det K)`` of a Gaussian vector.

    The determinant comes from a Cholesky factorisation, in double precision
    or, with ``dps``, in ``dps``-digit arithmetic (entries may then be
    fractions).
    """
    if dps is None:
        K = np.atleast_2d(np.asarray(covariance, dtype=float))
        n = K.shape[0]
        if K.shape != (n, n) or not np.allclose(K, K.T, rtol=0, atol=1e-14 * np.abs(K).max()):
            raise NotPositiveDefinite("covariance must be a symmetric square matrix")
        try:
            L = np.linalg.cholesky(K)
        except np.linalg.LinAlgError:
            raise NotPositiveDefinite("covariance is not positive definite") from None
        logdet = 2.0 * np.sum(np.log(np.diag(L)))
        return 0.5 * (n * math.log(2 * math.pi * math.e) + logdet)
    with mpmath.workdps(dps):
        rows = [[_mpf(v) for v in row] for row in covariance]
        n = len(rows)
        K = mpmath.matrix(rows)
        try:
            L = mpmath.cholesky(K)
        except ValueError:
            raise NotPositiveDefinite("covariance is not positive definite") from None
        logdet = 2 * mpmath.fsum(mpmath.log(L[i, i]) for i in range(n))
        return float(0.5 * (n * mpmath.log(2 * mpmath.pi * mpmath.e) + logdet))


def _mpf(v):
    if isinstance(v, Fraction):
        return mpmath.mpf(v.numerator) / v.denominator
    return mpmath.mpf(v)


_DPS = 60


def _block_entropy_exact(oracle, n, delay):
    with mpmath.workdps(_DPS):
        rows = [[_mpf(v) for v in row] for row in oracle.correlation_matrix(n, delay)]
        L = mpmath.cholesky(mpmath.matrix(rows))
        logdet = 2 * mpmath.fsum(mpmath.log(L[i, i]) for i in range(n))
        return 0.5 * (n * mpmath.log(2 * mpmath.pi * mpmath.e) + logdet)


def ar2_mi(oracle, horizon=1, delay=1):
    """Mutual information between consecutive blocks of the delayed process.

    ``horizon=1``: ``I(y[n+1] : y[n])``; ``horizon=2``:
    ``I(y[n+1] y[n] : y[n-1] y[n-2])`` with ``y[n] = x[delay*n]``. The
    stationary variance cancels, so only correlations enter.
    """
    if horizon not in (1, 2):
        raise InvalidParams("horizon must be 1 or 2")
    if int(delay) != delay or delay < 1:
        raise InvalidParams("delay must be a positive integer")
    with mpmath.workdps(_DPS):
        if horizon == 1:
            mi = 2 * _block_entropy_exact(oracle, 1, delay) - _block_entropy_exact(oracle, 2, delay)
        else:
            mi = 2 * _block_entropy_exact(oracle, 2, delay) - _block_entropy_exact(oracle, 4, delay)
        return float(mi)


def ar2_theoretical_pi_excess(oracle, delay=1):
    """Theoretical predictive information and excess entropies (Markov order 2)."""
    one = ar2_mi(oracle, 1, delay)
    two = ar2_mi(oracle, 2, delay)
    return {"PI_1": one, "PI_inf": two, "E_1": 0.0, "E_2": one, "E_inf": two}
