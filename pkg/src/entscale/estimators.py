"""scikit-learn style wrappers around the analysis pipeline.

The estimators take a scalar series as a 1-D array (or an ``(n, 1)`` column)
in ``fit`` and expose results through fitted attributes ending in ``_``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .corrsum import EpsGrid, PairCountConfig, analyze
from .decomp import DecompConfig, run_decomposition
from .ksg import KsgConfig, ksg_mi
from .series import EmbeddingSpec, ScalarSeries, delay_embed


def _series(X, dt=1.0):
    X = check_array(X, ensure_2d=False, dtype=float, ensure_min_samples=2)
    if X.ndim == 2:
        if X.shape[1] != 1:
            raise ValueError(f"expected a single column, got shape {X.shape}")
        X = X[:, 0]
    return ScalarSeries(X, dt=dt)


def _grid(series, n_eps, eps_min, eps_max):
    if eps_min is None and eps_max is None:
        return EpsGrid.for_series(series, n_eps)
    auto = EpsGrid.for_series(series, n_eps)
    lo = auto.values[0] if eps_min is None else eps_min
    hi = auto.values[-1] if eps_max is None else eps_max
    return EpsGrid.geometric(lo, hi, n_eps)


class DelayEmbedding(TransformerMixin, BaseEstimator):
    """Delay vectors ``(y_t, y_{t-tau}, ...)``, newest coordinate first."""

    def __init__(self, m=3, tau=1):
        self.m = m
        self.tau = tau

    def fit(self, X, y=None):
        self.spec_ = EmbeddingSpec(self.m, self.tau)
        self.n_samples_in_ = _series(X).samples.size
        return self

    def transform(self, X):
        check_is_fitted(self, "spec_")
        cloud = delay_embed(_series(X), self.spec_)
        return np.array(cloud.points)


class CorrelationEntropy(BaseEstimator):
    """Correlation-sum curve families for orders ``1..m_max``.

    After ``fit``: ``curves_`` (a :class:`~entscale.corrsum.CurveSet`) and
    ``grid_``.
    """

    def __init__(self, m_max=10, tau=1, n_eps=64, eps_min=None, eps_max=None,
                 theiler=0, delta_steps=1, seed=0):
        self.m_max = m_max
        self.tau = tau
        self.n_eps = n_eps
        self.eps_min = eps_min
        self.eps_max = eps_max
        self.theiler = theiler
        self.delta_steps = delta_steps
        self.seed = seed

    def fit(self, X, y=None):
        s = _series(X)
        self.grid_ = _grid(s, self.n_eps, self.eps_min, self.eps_max)
        cfg = PairCountConfig(theiler=self.theiler, seed=self.seed)
        self.curves_ = analyze(s, self.m_max, self.tau, self.grid_, cfg, self.delta_steps)
        return self

    def excess_entropy(self):
        check_is_fitted(self, "curves_")
        return np.array(self.curves_.E2.values)


class ExcessEntropyDecomposition(TransformerMixin, BaseEstimator):
    """Split of the excess entropy into state, scale-dependent and memory parts.

    ``m_max`` is the highest delta-h order entering the sums (correlation sums
    up to order ``m_max + 1`` are computed). ``transform`` returns an
    ``(n_eps, 3)`` array of ``E_state, E_eps, E_mem`` for the fitted series;
    the input is only validated.
    """

    def __init__(self, m_max=10, tau=1, n_eps=64, eps_min=None, eps_max=None,
                 theiler=0, s_min=0.1, kappa_max=0.5, seed=0):
        self.m_max = m_max
        self.tau = tau
        self.n_eps = n_eps
        self.eps_min = eps_min
        self.eps_max = eps_max
        self.theiler = theiler
        self.s_min = s_min
        self.kappa_max = kappa_max
        self.seed = seed

    def fit(self, X, y=None):
        s = _series(X)
        dcfg = DecompConfig(self.s_min, self.kappa_max, self.m_max)
        self.grid_ = _grid(s, self.n_eps, self.eps_min, self.eps_max)
        cfg = PairCountConfig(theiler=self.theiler, seed=self.seed)
        self.curves_ = analyze(s, self.m_max + 1, self.tau, self.grid_, cfg)
        self.decomposition_ = run_decomposition(self.curves_.deltaH, dcfg)
        self.report_ = self.decomposition_.report
        return self

    def transform(self, X):
        check_is_fitted(self, "report_")
        _series(X)
        r = self.report_
        return np.column_stack([r.E_state, r.E_eps, r.E_mem])

    def summarize(self, eps_lo, eps_hi):
        check_is_fitted(self, "report_")
        from .decomp import summarize_window
        return summarize_window(self.report_, eps_lo, eps_hi)


class KSGMutualInformation(BaseEstimator):
    """KSG estimate of I(X; y); ``X`` and ``y`` may be multi-column."""

    def __init__(self, k=4):
        self.k = k

    def fit(self, X, y):
        X = check_array(X, ensure_2d=False, dtype=float)
        y = check_array(y, ensure_2d=False, dtype=float)
        self.estimate_ = ksg_mi(X, y, KsgConfig(k=self.k))
        self.mi_ = self.estimate_.value
        return self
