import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entscale.errors import InvalidParams, NonStationaryParams, NotPositiveDefinite
from entscale.models import (Ar2Oracle, Ar2Params, LorenzParams, amplitude_for_noise_std, ar2_autocorr,
                             ar2_generate, ar2_mi, ar2_theoretical_pi_excess, gaussian_block_entropy,
                             lorenz_generate)

FIT = Ar2Params(1.991843, -0.994793)


def test_r_k_simple_and_invariants():
    o = Ar2Oracle(Ar2Params(0.5, 0.0))
    assert ar2_autocorr(o, 3) == 0.125
    assert o.r(0) == 1
    o = Ar2Oracle(FIT)
    for k in range(60):
        assert abs(o.r(k)) <= 1


def test_r_k_closed_forms():
    o = Ar2Oracle(FIT)
    a1, a2 = Fraction(FIT.a1), Fraction(FIT.a2)
    r1 = a1 / (1 - a2)
    closed = {
        1: r1,
        2: a1 ** 2 / (1 - a2) + a2,
        3: a1 * (a1 ** 2 / (1 - a2) + a2) + a2 * r1,
    }
    for k, v in closed.items():
        assert o.r(k) == v
    assert float(closed[2]) == pytest.approx(ar2_autocorr(o, 2), abs=1e-12)


def test_r_k_float_recursion_drift_bounded():
    o = Ar2Oracle(FIT)
    r = [1.0, FIT.a1 / (1 - FIT.a2)]
    for k in range(2, 31):
        r.append(FIT.a1 * r[-1] + FIT.a2 * r[-2])
    for k in range(31):
        assert abs(r[k] - ar2_autocorr(o, k)) < 1e-10


def test_oracle_values():
    o = Ar2Oracle(FIT)
    assert ar2_mi(o, 1, 1) == pytest.approx(2.91, abs=0.005)
    assert ar2_mi(o, 2, 1) == pytest.approx(7.48, abs=0.005)
    assert ar2_mi(o, 1, 10) == pytest.approx(0.67, abs=0.005)
    assert ar2_mi(o, 2, 10) == pytest.approx(3.36, abs=0.005)
    t = ar2_theoretical_pi_excess(o, 1)
    assert t["E_2"] == t["PI_1"] and t["E_inf"] == t["PI_inf"]


def test_one_step_closed_form_sign():
    o = Ar2Oracle(Ar2Params(0.6, 0.2))
    r = float(o.r(1))
    assert ar2_mi(o, 1) == pytest.approx(-0.5 * math.log(1 - r * r), abs=1e-12)


def test_block_entropy_precision_paths_agree():
    o = Ar2Oracle(Ar2Params(0.6, 0.2))
    K = o.correlation_matrix(4)
    exact = gaussian_block_entropy(K, dps=50)
    fast = gaussian_block_entropy(np.array(K, dtype=float))
    assert fast == pytest.approx(exact, abs=1e-12)
    assert gaussian_block_entropy([[1.0]]) == pytest.approx(0.5 * math.log(2 * math.pi * math.e))


def test_block_entropy_rejects_singular():
    with pytest.raises(NotPositiveDefinite):
        gaussian_block_entropy([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(NotPositiveDefinite):
        gaussian_block_entropy([[1.0, 1.0], [1.0, 1.0]], dps=30)


def test_two_step_via_block_entropies():
    o = Ar2Oracle(FIT)
    K2 = o.correlation_matrix(2)
    K4 = o.correlation_matrix(4)
    direct = 2 * gaussian_block_entropy(K2, dps=60) - gaussian_block_entropy(K4, dps=60)
    assert direct == pytest.approx(ar2_mi(o, 2, 1), abs=1e-9)


def _stationary_grid(n=50):
    for a2 in np.linspace(-0.98, 0.98, n):
        for a1 in np.linspace(-1.98, 1.98, n):
            if a2 > -1 and a1 + a2 < 1 and a2 - a1 < 1:
                yield float(a1), float(a2)


def test_mi_nonnegative_and_two_step_dominates():
    for a1, a2 in _stationary_grid():
        o = Ar2Oracle(Ar2Params(a1, a2))
        for tau in (1, 3, 10):
            one, two = ar2_mi(o, 1, tau), ar2_mi(o, 2, tau)
            assert one >= -1e-12
            assert two >= one - 1e-9


@settings(max_examples=50, deadline=None)
@given(st.floats(-0.95, 0.95), st.floats(0, 1))
def test_mi_nonnegative_random(a2, u):
    lo, hi = a2 - 1, 1 - a2
    a1 = lo + (hi - lo) * (0.02 + 0.96 * u)
    o = Ar2Oracle(Ar2Params(a1, a2))
    assert ar2_mi(o, 1) >= -1e-12
    assert ar2_mi(o, 2) >= -1e-12


def test_ar2_params_validation():
    with pytest.raises(NonStationaryParams):
        Ar2Oracle(Ar2Params(1.2, 0.0))
    with pytest.raises(InvalidParams):
        ar2_generate(Ar2Params(0.5, 0.0, sigma=0))
    with pytest.raises(InvalidParams):
        ar2_mi(Ar2Oracle(FIT), 3)


def test_ar2_sample_statistics():
    p = Ar2Params(0.6, 0.2, n_samples=400_000, seed=3)
    x = ar2_generate(p).samples
    o = Ar2Oracle(p)
    assert x.var() == pytest.approx(o.variance, rel=0.03)
    xc = x - x.mean()
    for k in (1, 2, 5):
        rk = np.dot(xc[:-k], xc[k:]) / np.dot(xc, xc)
        assert rk == pytest.approx(float(o.r(k)), abs=0.01)


def test_ar2_reproducible():
    p = Ar2Params(0.6, 0.2, n_samples=1000, seed=5)
    np.testing.assert_array_equal(ar2_generate(p).samples, ar2_generate(p).samples)


def test_lorenz_deterministic_and_seeded():
    base = dict(n_samples=2000, transient_steps=2000)
    a = lorenz_generate(LorenzParams(seed=1, **base))
    b = lorenz_generate(LorenzParams(seed=2, **base))
    np.testing.assert_array_equal(a[0].samples, b[0].samples)
    n1 = lorenz_generate(LorenzParams(seed=1, noise_amp=0.01, **base))
    n2 = lorenz_generate(LorenzParams(seed=1, noise_amp=0.01, **base))
    n3 = lorenz_generate(LorenzParams(seed=2, noise_amp=0.01, **base))
    np.testing.assert_array_equal(n1[0].samples, n2[0].samples)
    assert not np.array_equal(n1[0].samples, n3[0].samples)


def test_lorenz_attractor_bounds():
    x, y, z = lorenz_generate(LorenzParams(n_samples=20_000))
    assert len(x) == 20_000 and x.dt == pytest.approx(0.01)
    assert np.abs(x.samples).max() < 25 and np.abs(y.samples).max() < 35
    assert 0 < z.samples.min() and z.samples.max() < 55


def test_lorenz_validation():
    with pytest.raises(InvalidParams):
        lorenz_generate(LorenzParams(sampling_dt=0.0123))
    with pytest.raises(InvalidParams):
        lorenz_generate(LorenzParams(integration_step=0))


def test_lorenz_noise_continuity():
    base = dict(n_samples=1000, transient_steps=2000, seed=4)
    a = lorenz_generate(LorenzParams(**base))[0].samples
    b = lorenz_generate(LorenzParams(noise_amp=1e-12, **base))[0].samples
    assert np.max(np.abs(a - b)) < 1e-6


def test_uniform_amplitude_for_std():
    a = amplitude_for_noise_std(0.01)
    u = np.random.default_rng(0).uniform(-a, a, 400_000)
    assert u.std() == pytest.approx(0.01, rel=0.01)
    with pytest.raises(InvalidParams):
        amplitude_for_noise_std(-1)
