"""Spectral estimation, single-channel EFDD, modal isolation and the
evolutionary power spectrum of an ensemble of moving-sensor records."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.signal import butter, find_peaks, peak_prominences, peak_widths, sosfiltfilt, welch
from scipy.signal.windows import hann

from .emd import ImfSet, emd

BAND = (0.7, 1.3)
UNEXCITED_FRACTION = 0.01


@dataclass
class PsdEstimate:
    """One-sided PSD on an angular-frequency grid.

    ``power`` is a density per hertz, so ``sum(power) * domega / (2 pi)``
    is the variance.
    """

    omega: np.ndarray
    power: np.ndarray
    nperseg: int
    noverlap: int
    dt: float

    @property
    def domega(self) -> float:
        return float(self.omega[1] - self.omega[0])

    def variance(self) -> float:
        return float(np.sum(self.power) * self.domega / (2 * np.pi))


def welch_psd(series, dt: float, nperseg: int | None = None, overlap: float = 0.5,
              nfft: int | None = None) -> PsdEstimate:
    """Hann-windowed Welch average of modified periodograms."""
    x = np.asarray(series, dtype=float)
    if x.size == 0:
        raise ValueError("empty series")
    nperseg = min(x.size, nperseg or min(x.size, 1024))
    noverlap = int(overlap * nperseg)
    f, p = welch(x, fs=1.0 / dt, window="hann", nperseg=nperseg, noverlap=noverlap, nfft=nfft,
                 detrend="constant", scaling="density")
    return PsdEstimate(2 * np.pi * f, p, nperseg, noverlap, dt)


def smooth_3pt(series) -> np.ndarray:
    """Weights (1/4, 1/2, 1/4); the two end samples are kept."""
    x = np.asarray(series, dtype=float)
    if x.shape[-1] < 3:
        raise ValueError("need at least three samples")
    y = x.copy()
    y[..., 1:-1] = 0.25 * x[..., :-2] + 0.5 * x[..., 1:-1] + 0.25 * x[..., 2:]
    return y


# -- EFDD ------------------------------------------------------------------

@dataclass
class EfddMode:
    omega: float        # undamped, rad/s
    zeta: float
    peak_omega: float   # PSD peak, rad/s
    band: tuple[float, float]
    n_extrema: int


@dataclass
class EfddResult:
    modes: list[EfddMode]
    psd: PsdEstimate
    complete: bool      # False when fewer peaks than requested were resolvable

    @property
    def omegas(self) -> np.ndarray:
        return np.array([m.omega for m in self.modes])

    @property
    def zetas(self) -> np.ndarray:
        return np.array([m.zeta for m in self.modes])


def pick_peaks(psd: PsdEstimate, n_peaks: int, hints=None, search: float = 0.25,
               band: tuple[float, float] | None = None) -> list[int]:
    """Indices of the ``n_peaks`` most prominent spectral peaks, ascending.

    With ``hints`` (approximate angular frequencies) the highest local
    maximum within ``hint * (1 +- search)`` is taken for each hint instead.
    """
    logp = _log_power(psd.power)
    cand, props = find_peaks(logp, prominence=0.0)
    if hints is not None:
        out = []
        for w in hints:
            sel = (psd.omega[cand] >= w * (1 - search)) & (psd.omega[cand] <= w * (1 + search))
            if np.any(sel):
                c = cand[sel]
                out.append(int(c[np.argmax(psd.power[c])]))
        return sorted(set(out))
    lo, hi = band if band is not None else (0.0, np.inf)
    keep = (psd.omega[cand] > lo) & (psd.omega[cand] < hi)
    cand, prom = cand[keep], props["prominences"][keep]
    order = np.argsort(prom)[::-1][:n_peaks]
    return sorted(int(i) for i in cand[order])


def _log_power(p: np.ndarray) -> np.ndarray:
    top = p.max() if p.size else 0.0
    floor = top * 1e-16 if top > 0 else 1e-300
    return np.log10(np.maximum(p, floor))


def bell_bounds(psd: PsdEstimate, k: int, drop_db: float = 20.0, max_fraction: float = 0.5) -> tuple[int, int]:
    """Bins of the spectral bell around peak ``k``.

    The bell ends where the PSD falls ``drop_db`` below the peak, capped at
    ``max_fraction`` of the peak prominence so that it never reaches into a
    neighbouring mode. Ripples shallower than that do not end the bell.
    """
    logp = _log_power(psd.power)
    prom = peak_prominences(logp, [k])[0][0]
    if prom <= 0:
        return k, k
    rel = min(drop_db / 10.0 / prom, max_fraction)
    _, _, left, right = peak_widths(logp, [k], rel_height=rel)
    return int(np.ceil(left[0])), int(np.floor(right[0]))


def _lag_window(nperseg: int, n: int) -> np.ndarray:
    """Normalised autocorrelation of the Hann segment window (zero beyond nperseg)."""
    w = hann(nperseg, sym=False)
    full = np.correlate(w, w, mode="full")[nperseg - 1:]
    out = np.zeros(n)
    m = min(n, full.size)
    out[:m] = full[:m] / full[0]
    return out


def modal_autocorrelation(psd: PsdEstimate, lo: int, hi: int, correct_window: bool = True) -> np.ndarray:
    """Inverse transform of the isolated spectral bell, normalised to one at zero lag.

    With ``correct_window`` (and a Welch estimate) the lags are divided by
    the Hann lag window and cut where it falls below 0.05.
    """
    bell = np.zeros_like(psd.power)
    bell[lo:hi + 1] = psd.power[lo:hi + 1]
    r = np.fft.irfft(bell)
    n = r.size // 2
    r = r[:n]
    if correct_window and psd.nperseg > 0:
        lw = _lag_window(psd.nperseg, n)
        m = int(np.argmax(lw < 0.05)) if np.any(lw < 0.05) else n
        r = r[:max(m, 2)] / lw[:max(m, 2)]
    return r / r[0] if r[0] != 0 else r


def _extrema(r: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Times and magnitudes of the extrema between zero crossings, and the
    interpolated zero crossings themselves (all in samples)."""
    sgn = np.sign(r)
    zc = np.flatnonzero(sgn[1:] * sgn[:-1] < 0)
    bounds = np.concatenate([[0], zc + 1])
    ext_t, ext_a = [], []
    a = np.abs(r)
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        i = lo + int(np.argmax(a[lo:hi]))
        if 0 < i < r.size - 1:
            den = a[i - 1] - 2 * a[i] + a[i + 1]
            d = 0.5 * (a[i - 1] - a[i + 1]) / den if den != 0 else 0.0
            ext_t.append(i + d)
            ext_a.append(a[i] - 0.25 * (a[i - 1] - a[i + 1]) * d)
        else:
            ext_t.append(float(i))
            ext_a.append(a[i])
    tz = zc + r[zc] / (r[zc] - r[zc + 1])
    return np.array(ext_t), np.array(ext_a), tz


def log_decrement(r: np.ndarray, dt: float, amplitude=(0.5, 0.95), min_extrema: int = 3):
    """Damping ratio and damped frequency of a decaying correlation function.

    The log-envelope is fitted over the run of extrema whose normalised
    magnitude lies in ``amplitude``; the damped frequency comes from the
    mean spacing of zero crossings over the same span. Returns
    ``(zeta, omega_d, n_extrema)``.
    """
    t, a, tz = _extrema(np.asarray(r, dtype=float))
    inside = (a >= amplitude[0]) & (a <= amplitude[1])
    inside[0] = False
    idx = np.flatnonzero(inside)
    if idx.size:
        run = idx[0] + np.argmax(~np.append(inside[idx[0]:], False))
        idx = np.arange(idx[0], run)
    if idx.size < min_extrema:
        idx = np.arange(1, min(t.size, 1 + 2 * min_extrema))
    if idx.size < min_extrema or np.any(a[idx] <= 0):
        raise ArithmeticError("too few extrema for a decrement fit")
    tt = t[idx]
    slope = np.polyfit(tt, np.log(a[idx]), 1)[0]
    span = tz[(tz >= tt[0] - 1) & (tz <= tt[-1] + 1)]
    half = (span[-1] - span[0]) / (span.size - 1) if span.size >= 2 else np.mean(np.diff(tt))
    wd = np.pi / (half * dt)
    decay = -slope / dt
    zeta = decay / np.hypot(wd, decay)
    return float(zeta), float(wd), int(idx.size)


def _sdof_power(omega: np.ndarray, w: float, z: float) -> np.ndarray:
    """Acceleration spectrum of a white-noise driven SDOF oscillator."""
    return omega**4 / ((omega**2 - w**2) ** 2 + (2 * z * w * omega) ** 2)


def truncation_corrected(psd: PsdEstimate, lo: int, hi: int, zeta_apparent: float, wd_apparent: float,
                         amplitude=(0.5, 0.95), n_iter: int = 4) -> tuple[float, float]:
    """Undamped frequency and damping whose exact SDOF acceleration spectrum,
    cut to the same bins and run through the same decrement fit, reproduces
    the apparent values.

    A hard-edged bell shortens the apparent decay and shifts the zero
    crossings; this inverts both. Falls back to the apparent values when no
    bracketing damping exists.
    """
    model = PsdEstimate(psd.omega, np.zeros_like(psd.omega), 0, 0, psd.dt)

    def fit(w, z):
        model.power = _sdof_power(psd.omega, w, z)
        r = modal_autocorrelation(model, lo, hi, correct_window=False)
        return log_decrement(r, psd.dt, amplitude)[:2]

    z = zeta_apparent
    w = wd_apparent / np.sqrt(1 - z**2)
    try:
        for _ in range(n_iter):
            za, zb = 1e-4, 0.5
            if (fit(w, za)[0] - zeta_apparent) * (fit(w, zb)[0] - zeta_apparent) > 0:
                return wd_apparent / np.sqrt(1 - zeta_apparent**2), zeta_apparent
            z = float(brentq(lambda q: fit(w, q)[0] - zeta_apparent, za, zb, xtol=1e-7))
            w *= wd_apparent / fit(w, z)[1]
    except (ArithmeticError, ValueError):
        return wd_apparent / np.sqrt(1 - zeta_apparent**2), zeta_apparent
    return float(w), z


def efdd_from_psd(psd: PsdEstimate, n_peaks: int, hints=None, drop_db: float = 20.0,
                  amplitude=(0.5, 0.95), correct_truncation: bool = True,
                  band: tuple[float, float] | None = None) -> EfddResult:
    """EFDD on an existing PSD estimate (see :func:`efdd_identify`)."""
    peaks = pick_peaks(psd, n_peaks, hints=hints, band=band)
    modes = []
    for k in peaks:
        lo, hi = bell_bounds(psd, k, drop_db)
        if hi - lo < 2:
            continue
        r = modal_autocorrelation(psd, lo, hi)
        try:
            zeta, wd, n_ext = log_decrement(r, psd.dt, amplitude)
        except ArithmeticError:
            continue
        zeta = min(max(zeta, 1e-6), 0.5)
        if correct_truncation:
            w, zeta = truncation_corrected(psd, lo, hi, zeta, wd, amplitude)
        else:
            w = wd / np.sqrt(1 - zeta**2)
        modes.append(EfddMode(float(w), float(zeta), float(psd.omega[k]),
                              (float(psd.omega[lo]), float(psd.omega[hi])), n_ext))
    modes.sort(key=lambda m: m.omega)
    return EfddResult(modes, psd, complete=len(modes) == n_peaks)


def efdd_identify(series, dt: float, n_peaks: int, hints=None, nperseg: int | None = None,
                  drop_db: float = 20.0, nfft_factor: int = 4, amplitude=(0.5, 0.95),
                  correct_truncation: bool = True, band: tuple[float, float] | None = None) -> EfddResult:
    """Single-channel enhanced frequency domain decomposition.

    Peaks are picked on a Hann-windowed Welch PSD, each bell is cut at
    ``drop_db`` below its peak and transformed back to a modal correlation
    function. Damping follows from a logarithmic-decrement fit and the
    damped frequency from zero crossings, ``omega = omega_d / sqrt(1 - zeta^2)``.
    """
    x = np.asarray(series, dtype=float)
    if nperseg is None:
        nperseg = min(x.size, max(256, x.size // 4))
    psd = welch_psd(x, dt, nperseg=nperseg, nfft=nfft_factor * nperseg)
    return efdd_from_psd(psd, n_peaks, hints, drop_db, amplitude, correct_truncation, band)


# -- modal isolation -------------------------------------------------------

def bandpass(series, dt: float, lo: float, hi: float, order: int = 4) -> np.ndarray:
    """Zero-phase Butterworth band-pass between angular frequencies ``lo`` and ``hi``."""
    nyq = np.pi / dt
    lo = max(lo, 1e-6 * nyq)
    if hi >= nyq:
        sos = butter(order, lo / nyq, btype="highpass", output="sos")
    else:
        sos = butter(order, [lo / nyq, hi / nyq], btype="bandpass", output="sos")
    return sosfiltfilt(sos, np.asarray(series, dtype=float), axis=-1)


def band_powers(x: np.ndarray, dt: float, omegas, band=BAND) -> tuple[np.ndarray, float]:
    """Periodogram power of ``x`` inside each band ``omega_n * band`` and in total."""
    spec = np.abs(np.fft.rfft(x)) ** 2
    w = 2 * np.pi * np.fft.rfftfreq(x.size, dt)
    out = np.array([spec[(w >= o * band[0]) & (w <= o * band[1])].sum() for o in omegas])
    return out, float(spec.sum())


def resonant_power(psd: PsdEstimate, omega: float, band=BAND, edge: float = 0.1) -> float:
    """Variance carried by a spectral bump at ``omega`` above the local floor.

    The floor is the log-linear interpolation (in log frequency) between the
    median PSD levels just inside the band edges ``omega * band``, each over
    a relative width ``edge``. Broadband content (measurement noise, the
    direct feed-through of a white input) is thereby excluded. Bins are not
    clipped at the floor, so estimation scatter averages out.
    """
    w, p = psd.omega, psd.power
    lo, hi = omega * band[0], omega * band[1]
    inside = (w >= lo) & (w <= hi) & (w > 0)
    if inside.sum() < 3:
        return 0.0
    e_lo = inside & (w <= lo * (1 + edge))
    e_hi = inside & (w >= hi * (1 - edge))
    if not e_lo.any():
        e_lo = inside & (w == w[inside][0])
    if not e_hi.any():
        e_hi = inside & (w == w[inside][-1])
    tiny = np.finfo(float).tiny
    y0, y1 = np.log(max(np.median(p[e_lo]), tiny)), np.log(max(np.median(p[e_hi]), tiny))
    x0, x1 = np.log(lo), np.log(hi)
    floor = np.exp(y0 + (y1 - y0) * (np.log(w[inside]) - x0) / (x1 - x0))
    excess = np.sum(p[inside] - floor) * psd.domega / (2 * np.pi)
    return float(max(excess, 0.0))


@dataclass
class ModalChannels:
    channels: np.ndarray          # (n_modes, n)
    excited: np.ndarray           # bool per mode
    resonant_fraction: np.ndarray  # resonant power per mode over the record variance
    assignment: list = field(default_factory=list)  # per component: ("whole", n) | ("split", [n..]) | None
    imfs: ImfSet | None = None

    @property
    def unexcited(self) -> list[int]:
        return [i + 1 for i, e in enumerate(self.excited) if not e]


def modal_decompose(series, dt: float, omegas, band=BAND, dominance: float = 0.9,
                    share: float = 0.05, unexcited_fraction: float = UNEXCITED_FRACTION) -> ModalChannels:
    """Split a record into per-mode series with EMD and band-pass refinement.

    Every IMF (and the residual) is examined in the bands ``omega_n * band``.
    An IMF whose in-band power is at least ``dominance`` in one mode and
    which keeps most of its power in that band is assigned whole; otherwise
    each mode holding at least ``share`` of its in-band power receives the
    band-passed part.

    A mode is flagged unexcited when its resonant power (the in-band spectral
    bump above the broadband floor, see :func:`resonant_power`) is below
    ``unexcited_fraction`` of the record variance. The flag is informational:
    weak channels are kept so that ensemble estimators can pool them.
    """
    x = np.asarray(series, dtype=float)
    omegas = np.asarray(omegas, dtype=float)
    if omegas.size > 1 and np.any(omegas[1:] / omegas[:-1] <= 1.2):
        raise ValueError("identified frequencies must be separated by more than 20%")
    imfs = emd(x, dt)
    comps = list(imfs.imfs) + [imfs.residual]
    ch = np.zeros((omegas.size, x.size))
    assignment = []
    for comp in comps:
        bp, total = band_powers(comp, dt, omegas, band)
        inband = bp.sum()
        if inband <= 0 or total <= 0:
            assignment.append(None)
            continue
        frac = bp / inband
        best = int(np.argmax(frac))
        if frac[best] >= dominance and bp[best] >= 0.5 * total:
            ch[best] += comp
            assignment.append(("whole", best + 1))
            continue
        used = []
        for n in np.flatnonzero(frac >= share):
            ch[n] += bandpass(comp, dt, omegas[n] * band[0], omegas[n] * band[1])
            used.append(int(n) + 1)
        assignment.append(("split", used))
    psd = welch_psd(x, dt, nperseg=max(256, x.size // 4), nfft=4 * max(256, x.size // 4))
    total_var = max(np.var(x), np.finfo(float).tiny)
    frac = np.array([resonant_power(psd, o, band) for o in omegas]) / total_var
    excited = frac >= unexcited_fraction
    return ModalChannels(ch, excited, frac, assignment, imfs)


# -- evolutionary power spectrum -------------------------------------------

@dataclass
class EpsMatrix:
    R: np.ndarray        # (N_T, N_T)
    S: np.ndarray        # (N_omega, N_T)
    omega: np.ndarray    # rad/s
    dt: float
    n_half: int

    @property
    def domega(self) -> float:
        return float(self.omega[1] - self.omega[0])


def ensemble_covariance(ensemble) -> np.ndarray:
    """Centred ensemble autocorrelation ``E[u(p) u(q)] - E[u(p)] E[u(q)]``."""
    X = np.asarray(ensemble, dtype=float)
    if X.ndim != 2:
        raise ValueError("ensemble must be a (runs, samples) array")
    Xc = X - X.mean(axis=0)
    return Xc.T @ Xc / X.shape[0]


def build_eps(ensemble, dt: float, decimate: int = 1) -> EpsMatrix:
    """Autocorrelation matrix and its column-windowed Fourier magnitude.

    Column ``j`` uses ``N_h = floor(N_T/2)`` rows starting at ``j`` in the
    first half of the record and ending at ``j`` in the second half.
    """
    try:
        X = np.asarray(ensemble, dtype=float)
    except ValueError as exc:
        raise ValueError("ragged ensemble") from exc
    if X.ndim != 2:
        raise ValueError("ragged ensemble")
    if X.shape[0] < 2:
        raise ValueError("need at least two runs")
    if decimate > 1:
        X = X[:, ::decimate]
        dt = dt * decimate
    R = ensemble_covariance(X)
    nt = R.shape[0]
    nh = nt // 2
    j = np.arange(nt)
    start = np.where(j < nh, j, j - nh + 1)
    rows = start[None, :] + np.arange(nh)[:, None]
    win = R[rows, j[None, :]]
    S = dt * np.abs(np.fft.rfft(win, axis=0))
    omega = 2 * np.pi * np.arange(S.shape[0]) / (nh * dt)
    return EpsMatrix(R, S, omega, dt, nh)
