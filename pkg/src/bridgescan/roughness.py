"""Harmonic road-roughness profiles from a power-law displacement PSD."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import czt


@dataclass(frozen=True)
class RoughnessProfile:
    amplitudes: np.ndarray      # m
    kappas: np.ndarray          # cycle/m
    phases: np.ndarray          # rad
    gd0: float                  # PSD level at kappa0, m^3
    kappa0: float = 0.1
    exponent: float = 2.0

    def psd(self, kappa):
        return self.gd0 * (np.asarray(kappa, dtype=float) / self.kappa0) ** (-self.exponent)

    @property
    def variance(self) -> float:
        return float(np.sum(self.amplitudes**2) / 2)


def generate_profile(gd0: float, rng: np.random.Generator, kappa_min: float = 1.0,
                     kappa_max: float = 100.0, dkappa: float = 0.04, kappa0: float = 0.1,
                     exponent: float = 2.0) -> RoughnessProfile:
    if dkappa <= 0 or kappa_min <= 0 or kappa_max < kappa_min:
        raise ValueError("invalid spatial frequency range")
    n = int(round((kappa_max - kappa_min) / dkappa)) + 1
    kappas = kappa_min + dkappa * np.arange(n)
    psd = gd0 * (kappas / kappa0) ** (-exponent)
    amps = np.sqrt(2.0 * psd * dkappa)
    phases = rng.uniform(0.0, 2 * np.pi, size=n)
    return RoughnessProfile(amps, kappas, phases, gd0, kappa0, exponent)


def flat_profile() -> RoughnessProfile:
    z = np.zeros(0)
    return RoughnessProfile(z, z, z, 0.0)


def evaluate(profile: RoughnessProfile, x):
    """Elevation ``r`` and slope ``dr/dx`` at positions ``x``.

    The phase argument is ``2 pi kappa x + theta`` (kappa in cycle/m).
    """
    x = np.asarray(x, dtype=float)
    if profile.amplitudes.size == 0:
        return np.zeros_like(x), np.zeros_like(x)
    k2 = 2 * np.pi * profile.kappas
    arg = np.multiply.outer(x, k2) + profile.phases
    r = np.cos(arg) @ profile.amplitudes
    dr = -(np.sin(arg) @ (profile.amplitudes * k2))
    return r, dr


def evaluate_track(profile: RoughnessProfile, x0: float, dx: float, n: int):
    """``evaluate`` at the uniform points ``x0 + k dx``, ``k = 0..n-1``.

    The harmonic spatial frequencies are equally spaced, so the whole track
    is one chirp-z transform of the complex amplitudes.
    """
    if n <= 0:
        return np.zeros(0), np.zeros(0)
    if profile.amplitudes.size == 0:
        return np.zeros(n), np.zeros(n)
    kap = profile.kappas
    dk = kap[1] - kap[0] if kap.size > 1 else 1.0
    if kap.size > 1 and not np.allclose(np.diff(kap), dk, rtol=1e-9, atol=0):
        x = x0 + dx * np.arange(n)
        return evaluate(profile, x)
    c = profile.amplitudes * np.exp(1j * (profile.phases + 2 * np.pi * kap * x0))
    w = np.exp(2j * np.pi * dk * dx)
    base = np.exp(2j * np.pi * kap[0] * dx * np.arange(n))
    z = czt(c, n, w, 1.0) * base
    zd = czt(c * (2j * np.pi * kap), n, w, 1.0) * base
    return z.real, zd.real
