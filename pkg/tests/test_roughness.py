import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.signal import welch

from bridgescan.roughness import RoughnessProfile, evaluate, evaluate_track, flat_profile, generate_profile


def test_amplitude_at_reference_wavenumber(rng):
    p = generate_profile(0.25e-6, rng, kappa_min=0.1, kappa_max=0.1)
    assert p.amplitudes[0] == pytest.approx(1.414e-4, rel=1e-3)


def test_zero_class_gives_flat_road(rng):
    p = generate_profile(0.0, rng)
    r, dr = evaluate(p, np.linspace(0, 30, 7))
    assert np.all(r == 0) and np.all(dr == 0)


def test_quadrupled_class_doubles_amplitudes():
    a = generate_profile(1e-6, np.random.default_rng(1))
    b = generate_profile(4e-6, np.random.default_rng(1))
    np.testing.assert_allclose(b.amplitudes, 2 * a.amplitudes)


def test_harmonic_count_and_phases(rng):
    p = generate_profile(1e-6, rng)
    assert p.kappas.size == 2476
    assert np.all(np.diff(p.kappas) > 0)
    assert np.all((p.phases >= 0) & (p.phases < 2 * np.pi))


def test_single_harmonic():
    p = RoughnessProfile(np.array([1e-3]), np.array([1.0]), np.array([0.0]), 1e-6)
    r, dr = evaluate(p, 0.0)
    assert r == pytest.approx(1e-3) and dr == pytest.approx(0.0)
    r, dr = evaluate(p, 0.25)
    assert r == pytest.approx(0.0, abs=1e-15) and dr == pytest.approx(-2 * np.pi * 1e-3)


def test_flat_profile():
    r, dr = evaluate(flat_profile(), [0.0, 1.0])
    assert np.all(r == 0) and np.all(dr == 0)


def test_sample_variance_parseval():
    p = generate_profile(1e-6, np.random.default_rng(5))
    x = np.linspace(0, 1000, 400_001)
    r, _ = evaluate_track(p, 0.0, x[1] - x[0], x.size)
    assert np.var(r) == pytest.approx(p.variance, rel=0.05)


def test_empirical_psd_follows_class():
    p = generate_profile(1e-6, np.random.default_rng(2))
    dx = 1 / 400
    r, _ = evaluate_track(p, 0.0, dx, 400_000)
    f, s = welch(r, fs=1 / dx, nperseg=2**14)
    # each harmonic carries variance G_d dkappa, so the one-sided PSD is G_d itself
    edges = np.logspace(0, np.log10(50), 8)
    for lo, hi in zip(edges, edges[1:]):
        sel = (f >= lo) & (f < hi)
        ratio = np.mean(s[sel]) / np.mean(p.psd(f[sel]))
        assert 0.5 <= ratio <= 2.0


@given(st.floats(0, 50), st.floats(1e-3, 0.5), st.integers(1, 40))
def test_track_matches_pointwise(x0, dx, n):
    p = generate_profile(1e-6, np.random.default_rng(9), kappa_max=5.0)
    r, dr = evaluate_track(p, x0, dx, n)
    r2, dr2 = evaluate(p, x0 + dx * np.arange(n))
    np.testing.assert_allclose(r, r2, atol=1e-12)
    np.testing.assert_allclose(dr, dr2, atol=1e-10)


def test_evaluation_repeatable(rng):
    p = generate_profile(1e-6, rng)
    x = np.array([0.3, 12.7])
    assert np.array_equal(evaluate(p, x)[0], evaluate(p, x)[0])
