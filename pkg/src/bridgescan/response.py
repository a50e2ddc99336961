"""Closed-form modal responses seen by a moving sensor.

Every modal response is built from the Duhamel convolutions

    Ic(t) + i Is(t) = int_0^t F(tau) exp((-zeta w + i wd)(t - tau)) dtau,

evaluated exactly for a forcing that is linear between samples. The
recursion is a first-order complex IIR filter, so a whole record costs one
``lfilter`` call per mode.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import lfilter

from .beam import G, ModalModel
from .traffic import TrafficRealization


@dataclass(frozen=True)
class SensorTrajectory:
    velocity: float
    dt: float
    n_samples: int
    entry_time: float = 0.0

    def __post_init__(self):
        if self.velocity <= 0 or self.dt <= 0 or self.n_samples < 1:
            raise ValueError("velocity, dt and n_samples must be positive")

    @classmethod
    def spanning(cls, length: float, velocity: float, dt: float, entry_time: float = 0.0) -> "SensorTrajectory":
        """Trajectory sampled from entry until the sensor reaches the far support."""
        n = int(np.floor(length / (velocity * dt) + 1e-9)) + 1
        return cls(velocity, dt, n, entry_time)

    @property
    def times(self) -> np.ndarray:
        return self.entry_time + self.dt * np.arange(self.n_samples)

    @property
    def positions(self) -> np.ndarray:
        return self.velocity * self.dt * np.arange(self.n_samples)

    @property
    def exit_time(self) -> float:
        return self.entry_time + self.dt * (self.n_samples - 1)


@dataclass
class SensorRecord:
    times: np.ndarray
    positions: np.ndarray
    acc: np.ndarray
    modal: np.ndarray | None = None  # shape (n_modes, n_samples)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (len(self.times) == len(self.positions) == len(self.acc)):
            raise ValueError("record vectors must have equal length")

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def __len__(self):
        return len(self.acc)


def modal_convolution(force, dt: float, omega: float, zeta: float) -> np.ndarray:
    """Complex convolution ``Ic + i Is`` of a sampled force with the damped kernel.

    ``force`` may be 2-D, in which case the last axis is time. The system
    starts at rest at the first sample.
    """
    f = np.asarray(force, dtype=float)
    s = complex(-zeta * omega, omega * np.sqrt(1 - zeta**2))
    h = dt
    E = np.exp(s * h)
    a0 = (E - 1) / s
    a1 = a0 - E / s + (E - 1) / (s * s * h)  # weight of the sample at the step end
    b = np.array([a1, a0 - a1])
    a = np.array([1.0, -E])
    zi = -a1 * f[..., :1].astype(complex)
    y, _ = lfilter(b, a, f, axis=-1, zi=zi)
    return y


def qddot_from_force(force, dt: float, omega: float, zeta: float, modal_mass: float):
    """Generalised acceleration for a generalised force history."""
    Z = modal_convolution(force, dt, omega, zeta)
    c1 = (1 - 2 * zeta**2) / np.sqrt(1 - zeta**2)
    return (np.asarray(force) - c1 * omega * Z.imag - 2 * zeta * omega * Z.real) / modal_mass


def q_from_force(force, dt: float, omega: float, zeta: float, modal_mass: float):
    Z = modal_convolution(force, dt, omega, zeta)
    return Z.imag / (modal_mass * omega * np.sqrt(1 - zeta**2))


def duhamel_fixed_force(modal: ModalModel, force, location: float, traj: SensorTrajectory,
                        meta: dict | None = None) -> SensorRecord:
    """Sensor record for a point force at ``location``.

    ``force`` is sampled at ``traj.dt`` starting at t = 0 from rest; the
    sensor enters at ``traj.entry_time`` (a multiple of dt).
    """
    f = np.asarray(force, dtype=float)
    if not 0 < location < modal.length:
        raise ValueError("force location must lie strictly inside the span")
    k0 = int(round(traj.entry_time / traj.dt))
    if f.size < k0 + traj.n_samples:
        raise ValueError("force series shorter than the sensor trajectory")
    f = f[:k0 + traj.n_samples]
    x = traj.positions
    channels = np.empty((modal.n_modes, traj.n_samples))
    for i in range(modal.n_modes):
        n = i + 1
        qdd = qddot_from_force(f * modal.shape(n, location), traj.dt, modal.omegas[i],
                               modal.zetas[i], modal.modal_masses[i])
        channels[i] = modal.shape(n, x) * qdd[k0:]
    return SensorRecord(traj.times, x, channels.sum(axis=0), channels, dict(meta or {}))


def traffic_force(traffic: TrafficRealization, shapes, length: float, times: np.ndarray,
                  g: float = G) -> np.ndarray:
    """Generalised gravity forcing ``-sum_i m_i g shape(x_i(t))``.

    ``shapes`` maps span positions to an ``(len(x), n_shapes)`` array. The
    result has shape ``(n_shapes, len(times))``; vehicles contribute only
    while on the span.
    """
    times = np.asarray(times, dtype=float)
    out = None
    for v in traffic.vehicles:
        t_in, t_out = v.window(length)
        i0 = np.searchsorted(times, t_in, side="left")
        i1 = np.searchsorted(times, t_out, side="right")
        if i1 <= i0:
            continue
        x = np.clip(v.velocity * (times[i0:i1] - v.arrival), 0.0, length)
        vals = np.asarray(shapes(x))
        if out is None:
            out = np.zeros((vals.shape[1], times.size))
        out[:, i0:i1] -= v.mass * g * vals.T
    if out is None:
        n_shapes = np.asarray(shapes(np.zeros(1))).shape[1]
        out = np.zeros((n_shapes, times.size))
    return out


def _extended_grid(traffic: TrafficRealization, times: np.ndarray) -> tuple[np.ndarray, int]:
    """Grid reaching back to the earliest arrival, aligned with ``times``."""
    dt = times[1] - times[0]
    first = min((v.arrival for v in traffic.vehicles), default=times[0])
    k = max(0, int(np.ceil((times[0] - first) / dt)) + 1)
    ext = times[0] + dt * np.arange(-k, times.size)
    return ext, k


def _sine_shapes(modal: ModalModel):
    n = np.arange(1, modal.n_modes + 1)
    return lambda x: np.sin(np.multiply.outer(x, n) * np.pi / modal.length)


def modal_qddot(modal: ModalModel, traffic: TrafficRealization, times, g: float = G) -> np.ndarray:
    """Generalised accelerations ``q''_n(t)`` under a stream of moving loads.

    ``times`` must be uniform. Loads that arrived before ``times[0]`` are
    integrated from their arrival, so free-vibration tails are included.
    """
    times = np.asarray(times, dtype=float)
    if times.size < 2:
        raise ValueError("times must hold at least two samples to define the step")
    ext, k = _extended_grid(traffic, times)
    F = traffic_force(traffic, _sine_shapes(modal), modal.length, ext, g)
    dt = ext[1] - ext[0]
    out = np.empty((modal.n_modes, times.size))
    for i in range(modal.n_modes):
        out[i] = qddot_from_force(F[i], dt, modal.omegas[i], modal.zetas[i], modal.modal_masses[i])[k:]
    return out


def duhamel_moving_masses(modal: ModalModel, traffic: TrafficRealization, traj: SensorTrajectory,
                          g: float = G, meta: dict | None = None) -> SensorRecord:
    """Sensor record under massless moving loads (vehicle weight only)."""
    qdd = modal_qddot(modal, traffic, traj.times, g)
    x = traj.positions
    n = np.arange(1, modal.n_modes + 1)
    phi = np.sin(np.multiply.outer(n, x) * np.pi / modal.length)
    channels = phi * qdd
    return SensorRecord(traj.times, x, channels.sum(axis=0), channels, dict(meta or {}))


def add_noise(record: SensorRecord, rms_fraction: float, rng: np.random.Generator) -> SensorRecord:
    """Additive white Gaussian noise with SD ``rms_fraction * RMS(acc)``."""
    if rms_fraction < 0:
        raise ValueError("rms_fraction must be non-negative")
    if rms_fraction == 0:
        return replace(record, meta=dict(record.meta))
    rms = np.sqrt(np.mean(record.acc**2))
    noisy = record.acc + rng.normal(0.0, rms_fraction * rms, size=record.acc.shape)
    meta = dict(record.meta, noise_rms_fraction=rms_fraction)
    return replace(record, acc=noisy, meta=meta)
