"""Stationary variance of modal accelerations under a Poisson stream of
moving forces.

A single force of unit amplitude crossing the span in time ``T`` drives mode
``n`` with ``sin(beta s)``, ``beta = n pi / T``, for ``0 <= s <= T``. Its
generalised acceleration splits into an on-span part (forced plus start-up
transient) and a post-departure free vibration. For Poisson arrivals with
rate ``lambda`` the variance at any time is the Campbell integral

    var = lambda E[A^2] sum_k p_k ( int_0^T_k g_on^2 ds + int_0^inf g_off^2 ds ),

which does not depend on t.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beam import ModalModel


@dataclass(frozen=True)
class StationaryStreamSpec:
    rate: float
    mean_amplitude: float
    mean_square_amplitude: float
    crossing_times: tuple[float, ...]
    probabilities: tuple[float, ...]

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        if len(p) != len(self.crossing_times):
            raise ValueError("one probability per crossing time")
        if np.any(p < 0) or not np.isclose(p.sum(), 1.0):
            raise ValueError("probabilities must be non-negative and sum to one")
        if self.mean_square_amplitude < self.mean_amplitude**2 * (1 - 1e-12):
            raise ValueError("E[A^2] must be at least E[A]^2")
        if self.rate < 0 or any(T <= 0 for T in self.crossing_times):
            raise ValueError("rate must be non-negative and crossing times positive")


@dataclass(frozen=True)
class CrossingCoefficients:
    """Closed-form coefficients of one crossing for one mode."""

    omega: float
    zeta: float
    omega_d: float
    beta: float
    T: float
    upsilon: float
    a1: float
    a2: float
    a3: float
    b1: float
    b2: float
    scale: float  # 1 / (M_n * upsilon)


def crossing_coefficients(modal: ModalModel, n: int, T: float) -> CrossingCoefficients:
    w = modal.omegas[n - 1]
    z = modal.zetas[n - 1]
    wd = w * np.sqrt(1 - z**2)
    beta = n * np.pi / T
    ups = (w**2 - beta**2) ** 2 + 4 * z**2 * w**2 * beta**2
    a1 = w**2 - beta**2
    a2 = -2 * z * w * beta
    a3 = beta / wd * (2 * z**2 * w**2 - (w**2 - beta**2))
    e = np.exp(-z * w * T)
    sgn = (-1) ** n
    b1 = sgn / wd * (a1 * beta + a2 * z * w) + e * (a3 * np.cos(wd * T) + a2 * np.sin(wd * T))
    b2 = sgn * a2 + e * (a3 * np.sin(wd * T) - a2 * np.cos(wd * T))
    return CrossingCoefficients(w, z, wd, beta, T, ups, a1, a2, a3, b1, b2,
                                1.0 / (modal.modal_masses[n - 1] * ups))


def _homogeneous_dd(p, wd, A, B):
    """Sine/cosine coefficients of d2/ds2 [exp(-p s)(A sin wd s + B cos wd s)]."""
    D = p**2 - wd**2
    return D * A + 2 * p * wd * B, D * B - 2 * p * wd * A


def crossing_q(c: CrossingCoefficients, s):
    """Generalised displacement after a unit-amplitude arrival, ``s`` = time since arrival."""
    s = np.asarray(s, dtype=float)
    p = c.zeta * c.omega
    on = c.a1 * np.sin(c.beta * s) + c.a2 * np.cos(c.beta * s) + np.exp(-p * s) * (
        c.a3 * np.sin(c.omega_d * s) - c.a2 * np.cos(c.omega_d * s))
    r = s - c.T
    off = np.exp(-p * r) * (c.b1 * np.sin(c.omega_d * r) + c.b2 * np.cos(c.omega_d * r))
    return c.scale * np.where(s < 0, 0.0, np.where(s <= c.T, on, off))


def crossing_qddot(c: CrossingCoefficients, s):
    """Generalised acceleration after a unit-amplitude arrival."""
    s = np.asarray(s, dtype=float)
    p = c.zeta * c.omega
    hs, hc = _homogeneous_dd(p, c.omega_d, c.a3, -c.a2)
    on = -c.beta**2 * (c.a1 * np.sin(c.beta * s) + c.a2 * np.cos(c.beta * s)) + np.exp(-p * s) * (
        hs * np.sin(c.omega_d * s) + hc * np.cos(c.omega_d * s))
    r = s - c.T
    us, uc = _homogeneous_dd(p, c.omega_d, c.b1, c.b2)
    off = np.exp(-p * r) * (us * np.sin(c.omega_d * r) + uc * np.cos(c.omega_d * r))
    return c.scale * np.where(s < 0, 0.0, np.where(s <= c.T, on, off))


def _exp_cos(a: float, k: float, T: float) -> complex:
    """``int_0^T exp(-a s) exp(i k s) ds``."""
    z = complex(a, -k)
    if abs(z) * T < 1e-8:
        return complex(T)
    return (1 - np.exp(-z * T)) / z


def window_integral(kind: str, decay: float, c: float, d: float, t: float, T: float) -> float:
    """``int_{t-T}^{t} exp(-decay (t - tau)) k(c (t - tau), d (t - tau)) dtau``
    for a sine/cosine product ``k`` named by ``kind`` (ss, sc, cs or cc).

    With ``s = t - tau`` the window maps onto ``[0, T]`` and the products
    split into single harmonics, so the result is closed form and
    independent of ``t``.
    """
    lo = _exp_cos(decay, c - d, T)
    hi = _exp_cos(decay, c + d, T)
    if kind == "ss":
        return 0.5 * (lo.real - hi.real)
    if kind == "cc":
        return 0.5 * (lo.real + hi.real)
    if kind == "sc":
        return 0.5 * (hi.imag + lo.imag)
    if kind == "cs":
        return 0.5 * (hi.imag - lo.imag)
    raise ValueError(f"unknown kernel {kind!r}")


def _on_span_energy(c: CrossingCoefficients, t: float) -> float:
    """``int_0^T g_on(s)^2 ds`` expanded into windowed trig integrals."""
    p = c.zeta * c.omega
    hs, hc = _homogeneous_dd(p, c.omega_d, c.a3, -c.a2)
    b, wd, T = c.beta, c.omega_d, c.T
    forced = b**4 * c.upsilon * T / 2
    cross = -2 * b**2 * (
        c.a1 * hs * window_integral("ss", p, b, wd, t, T)
        + c.a1 * hc * window_integral("sc", p, b, wd, t, T)
        + c.a2 * hs * window_integral("cs", p, b, wd, t, T)
        + c.a2 * hc * window_integral("cc", p, b, wd, t, T)
    )
    free = (hs**2 * window_integral("ss", 2 * p, wd, wd, t, T)
            + 2 * hs * hc * window_integral("sc", 2 * p, wd, wd, t, T)
            + hc**2 * window_integral("cc", 2 * p, wd, wd, t, T))
    return c.scale**2 * (forced + cross + free)


def _off_span_energy(c: CrossingCoefficients) -> float:
    """``int_0^inf g_off(r)^2 dr`` in closed form."""
    p = c.zeta * c.omega
    us, uc = _homogeneous_dd(p, c.omega_d, c.b1, c.b2)
    a, bb = 2 * p, 2 * c.omega_d
    den = a**2 + bb**2
    i_ss = 0.5 * (1 / a - a / den)
    i_cc = 0.5 * (1 / a + a / den)
    i_sc = 0.5 * bb / den
    return c.scale**2 * (us**2 * i_ss + 2 * us * uc * i_sc + uc**2 * i_cc)


def qddot_variance_parts(spec: StationaryStreamSpec, modal: ModalModel, n: int, t: float = 0.0):
    """(on-span, post-departure) contributions to the stationary variance of q''_n."""
    if not 0 < modal.zetas[n - 1] < 1:
        raise ValueError("damping ratio must lie in (0, 1)")
    if spec.rate <= 0:
        raise ValueError("rate must be positive")
    on = off = 0.0
    for T, p in zip(spec.crossing_times, spec.probabilities):
        c = crossing_coefficients(modal, n, T)
        on += p * _on_span_energy(c, t)
        off += p * _off_span_energy(c)
    k = spec.rate * spec.mean_square_amplitude
    return k * on, k * off


def sigma_ss_qddot(spec: StationaryStreamSpec, modal: ModalModel, n: int, t: float = 0.0) -> float:
    """Stationary variance of ``q''_n`` for a Poisson stream of moving forces."""
    on, off = qddot_variance_parts(spec, modal, n, t)
    return on + off


def windowed_sd_cov(ensemble, window: int) -> float:
    """Coefficient of variation across time windows of the ensemble SD.

    ``ensemble`` is (runs, samples). The variance in each window pools the
    deviations from the per-sample ensemble mean over the window; a partial
    trailing window is dropped.
    """
    e = np.asarray(ensemble, dtype=float)
    if e.ndim != 2 or e.shape[0] < 2:
        raise ValueError("ensemble must be (runs >= 2, samples)")
    if window < 1 or e.shape[1] // window < 2:
        raise ValueError("need at least two full windows")
    n_win = e.shape[1] // window
    d = e[:, :n_win * window] - e[:, :n_win * window].mean(axis=0)
    var = (d**2).reshape(e.shape[0], n_win, window).sum(axis=(0, 2)) / ((e.shape[0] - 1) * window)
    sd = np.sqrt(var)
    return float(sd.std() / sd.mean())
