import numpy as np
import pytest
from hypothesis import given, strategies as st

from bridgescan.emd import dominant_frequency, emd, local_extrema


@pytest.fixture(scope="module")
def two_tones():
    dt = 1e-3
    t = dt * np.arange(10_000)
    return dt, np.sin(2 * np.pi * 1.0 * t) + 0.5 * np.sin(2 * np.pi * 10.0 * t)


class TestEmd:
    def test_separates_two_tones(self, two_tones):
        dt, x = two_tones
        res = emd(x, dt)
        f = res.dominant_omega / (2 * np.pi)
        assert f[0] == pytest.approx(10.0, rel=0.02)
        slow = np.argmin(np.abs(f - 1.0))
        assert f[slow] == pytest.approx(1.0, rel=0.02)
        t = dt * np.arange(x.size)
        core = slice(1000, -1000)
        fast = 0.5 * np.sin(2 * np.pi * 10.0 * t)
        assert np.sqrt(np.mean((res.imfs[0] - fast)[core] ** 2)) < 0.05 * 0.5

    def test_single_tone_is_one_imf(self):
        dt = 1e-3
        x = np.sin(2 * np.pi * 5.0 * dt * np.arange(4000))
        res = emd(x, dt)
        energy = np.sum(res.imfs**2, axis=1)
        assert energy[0] > 0.99 * energy.sum()
        assert res.dominant_omega[0] == pytest.approx(2 * np.pi * 5.0, rel=0.01)

    @given(st.integers(0, 10_000))
    def test_reconstruction_is_exact(self, seed):
        x = np.random.default_rng(seed).normal(size=600)
        res = emd(x, 0.01)
        np.testing.assert_allclose(res.reconstruct(), x, atol=1e-8)

    @pytest.mark.parametrize("x", [np.linspace(0, 1, 50), np.sin(np.linspace(0, 1.5 * np.pi, 50)), np.zeros(30)])
    def test_too_few_extrema(self, x):
        with pytest.raises(ValueError):
            emd(x)


def test_local_extrema():
    x = np.array([0.0, 1.0, 0.0, -1.0, 0.0, 2.0, 0.0])
    imax, imin = local_extrema(x)
    assert list(imax) == [1, 5] and list(imin) == [3]


def test_dominant_frequency():
    dt = 0.01
    x = np.cos(2 * np.pi * 4.0 * dt * np.arange(1000))
    assert dominant_frequency(x, dt) == pytest.approx(2 * np.pi * 4.0)
    assert dominant_frequency(np.ones(10), dt) == 0.0
