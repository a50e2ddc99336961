"""Empirical mode decomposition by cubic-spline sifting."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

MAX_IMFS = 12
MAX_SIFTS = 10
SD_STOP = 0.2
ENERGY_STOP = 1e-5  # residual energy, relative to the input, below which sifting ends


@dataclass
class ImfSet:
    imfs: np.ndarray          # (n_imfs, n)
    residual: np.ndarray
    dominant_omega: np.ndarray  # rad/s, one per IMF
    dt: float

    @property
    def n_imfs(self) -> int:
        return self.imfs.shape[0]

    def reconstruct(self) -> np.ndarray:
        return self.imfs.sum(axis=0) + self.residual


def local_extrema(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Indices of interior local maxima and minima (plateaus at their centre)."""
    d = np.diff(x)
    nz = np.flatnonzero(d)
    if nz.size < 2:
        return np.zeros(0, dtype=int), np.zeros(0, dtype=int)
    s = np.sign(d[nz])
    turn = np.flatnonzero(s[1:] != s[:-1])
    # a turn sits between the last rise and the first fall (or vice versa)
    pos = (nz[turn] + 1 + nz[turn + 1]) // 2
    is_max = s[turn] > 0
    return pos[is_max], pos[~is_max]


def _end_value(pos, val, at, x_end, upper):
    """Envelope value at a record end: the line through the two nearest
    extrema, kept on the correct side of the signal end sample."""
    if pos.size < 2:
        y = val[0]
    else:
        y = val[0] + (val[1] - val[0]) * (at - pos[0]) / (pos[1] - pos[0])
    return max(y, x_end) if upper else min(y, x_end)


def _with_ends(x, pos, upper):
    n = x.size
    val = x[pos]
    left = _end_value(pos, val, 0, x[0], upper)
    right = _end_value(pos[::-1], val[::-1], n - 1, x[-1], upper)
    p = np.concatenate([[0], pos, [n - 1]])
    v = np.concatenate([[left], val, [right]])
    p, keep = np.unique(p, return_index=True)
    return p, v[keep]


def envelope_mean(x: np.ndarray) -> np.ndarray | None:
    """Mean of the upper and lower spline envelopes, or None when the signal
    has too few extrema to build them."""
    imax, imin = local_extrema(x)
    if imax.size < 2 or imin.size < 2:
        return None
    t = np.arange(x.size)
    pu, vu = _with_ends(x, imax, upper=True)
    pl, vl = _with_ends(x, imin, upper=False)
    upper = CubicSpline(pu, vu)(t)
    lower = CubicSpline(pl, vl)(t)
    return 0.5 * (upper + lower)


def sift(x: np.ndarray, max_sifts: int = MAX_SIFTS, sd_stop: float = SD_STOP) -> np.ndarray | None:
    h = x.copy()
    for i in range(max_sifts):
        m = envelope_mean(h)
        if m is None:
            return None if i == 0 else h
        h_new = h - m
        sd = np.sum((h - h_new) ** 2) / max(np.sum(h**2), np.finfo(float).tiny)
        h = h_new
        if sd < sd_stop:
            break
    return h


def dominant_frequency(x: np.ndarray, dt: float) -> float:
    """Angular frequency of the largest periodogram bin."""
    spec = np.abs(np.fft.rfft(x - x.mean())) ** 2
    if spec.size < 2 or not np.any(spec[1:]):
        return 0.0
    k = 1 + int(np.argmax(spec[1:]))
    return 2 * np.pi * k / (x.size * dt)


def emd(series, dt: float = 1.0, max_imfs: int = MAX_IMFS, max_sifts: int = MAX_SIFTS,
        sd_stop: float = SD_STOP) -> ImfSet:
    """Decompose ``series`` into intrinsic mode functions plus a residual.

    Extraction stops when the residual has too few extrema for envelopes
    (it is then monotone or a single swing), when its energy is negligible,
    or when ``max_imfs`` is reached.
    """
    x = np.asarray(series, dtype=float)
    imax, imin = local_extrema(x)
    if imax.size + imin.size < 4:
        raise ValueError("series needs at least four extrema")
    imfs = []
    r = x.copy()
    e0 = np.sum(x**2)
    while len(imfs) < max_imfs and np.sum(r**2) > ENERGY_STOP * e0:
        h = sift(r, max_sifts, sd_stop)
        if h is None:
            break
        imfs.append(h)
        r = r - h
    if not imfs:
        raise ValueError("series needs at least four extrema")
    imfs = np.array(imfs)
    residual = x - imfs.sum(axis=0)
    doms = np.array([dominant_frequency(f, dt) for f in imfs])
    return ImfSet(imfs, residual, doms, dt)
