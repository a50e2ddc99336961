"""Mode-shape estimators.

Known input: BOP weights fitted by Levenberg-Marquardt so that the
simulated moving-sensor record matches the measurement. Unknown input:
ensemble standard deviation or evolutionary-spectrum rows of the modal
channels, which are proportional to ``|phi_n|`` along the sensor path.
"""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .beam import G
from .bop import BopBasis, eval_basis
from .response import SensorRecord, _extended_grid, qddot_from_force, traffic_force
from .sigproc import EpsMatrix, smooth_3pt
from .traffic import TrafficRealization

ESTIMATORS = ("NLS", "SD", "EPS")


# -- comparison helpers ----------------------------------------------------

def mac(a, b) -> float:
    """Modal assurance criterion ``(a.b)^2 / ((a.a)(b.b))``."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError("shapes must share a grid")
    na, nb = a @ a, b @ b
    if na == 0 or nb == 0:
        raise ValueError("zero-norm shape")
    return float((a @ b) ** 2 / (na * nb))


def correlation(a, b) -> float:
    """Pearson correlation of two sampled curves."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError("curves must share a grid")
    return float(np.corrcoef(a, b)[0, 1])


def normalize(shape) -> np.ndarray:
    """Scale to unit maximum magnitude, the largest-magnitude sample positive."""
    s = np.asarray(shape, dtype=float)
    k = int(np.argmax(np.abs(s)))
    if s[k] == 0:
        return s.copy()
    return s / s[k]


# -- identified shapes container ------------------------------------------

@dataclass
class IdentifiedModes:
    omegas: np.ndarray          # rad/s
    zetas: np.ndarray
    x: np.ndarray               # m
    shapes: np.ndarray          # (n_modes, len(x))
    estimator: str
    excited: np.ndarray = None  # bool per mode
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.omegas = np.asarray(self.omegas, dtype=float)
        self.zetas = np.asarray(self.zetas, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        self.shapes = np.atleast_2d(np.asarray(self.shapes, dtype=float))
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}")
        if self.shapes.shape != (self.omegas.size, self.x.size):
            raise ValueError("shapes must be (n_modes, len(x))")
        if self.excited is None:
            self.excited = np.ones(self.omegas.size, dtype=bool)
        self.excited = np.asarray(self.excited, dtype=bool)

    @property
    def n_modes(self) -> int:
        return self.omegas.size

    def normalized(self) -> "IdentifiedModes":
        shapes = np.array([normalize(s) for s in self.shapes])
        return IdentifiedModes(self.omegas, self.zetas, self.x, shapes, self.estimator,
                               self.excited.copy(), dict(self.meta))

    def compare(self, truth) -> dict:
        """MAC and Pearson r of each shape (and of its magnitude) against ``truth``
        sampled on ``x`` (array of shape ``(n_modes, len(x))``)."""
        truth = np.atleast_2d(truth)
        out = {"mac": [], "r": [], "r_abs": []}
        for s, t in zip(self.shapes, truth):
            ok = np.any(s != 0)
            out["mac"].append(mac(s, t) if ok else 0.0)
            out["r"].append(correlation(s, t) if ok else 0.0)
            out["r_abs"].append(correlation(np.abs(s), np.abs(t)) if ok else 0.0)
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x"] + [f"phi{n + 1}" for n in range(self.n_modes)])
            for i, xi in enumerate(self.x):
                w.writerow([repr(float(xi))] + [repr(float(v)) for v in self.shapes[:, i]])

    def summary(self, truth=None) -> dict:
        out = {
            "estimator": self.estimator,
            "omega": self.omegas.tolist(),
            "zeta": self.zetas.tolist(),
            "excited": self.excited.tolist(),
        }
        if truth is not None:
            out.update(self.compare(truth))
        out.update(self.meta)
        return out

    def write_summary(self, path, truth=None) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(truth), fh, indent=2, sort_keys=True)


# -- BOP weights -----------------------------------------------------------

def shapes_from_weights(w, basis: BopBasis, x, length: float) -> np.ndarray:
    """``phi_n(x) = sum_i w_i^n Pbar_i(x / L)``; one row per mode."""
    w = np.atleast_2d(np.asarray(w, dtype=float))
    return w @ eval_basis(basis, np.atleast_1d(x), length).T


@dataclass(frozen=True)
class FixedForce:
    """Point force sampled at the record step from t = 0 (system at rest)."""

    force: np.ndarray
    location: float


@dataclass(frozen=True)
class KnownTraffic:
    traffic: TrafficRealization
    g: float = G


@dataclass
class ForwardTerms:
    """Precomputed pieces of the forward model.

    ``B[t, i] = Pbar_i(x_I(t)/L)`` along the sensor path and ``F[i]`` is
    the generalised force of basis function i on a grid that starts
    ``offset`` samples before the record. With ``Q_n`` the unit-mass modal
    accelerations driven by ``F`` the record is
    ``sum_n (B w_n)(Q_n w_n) / (m L |w_n|^2)``.
    """

    B: np.ndarray
    F: np.ndarray
    offset: int
    dt: float
    mass_length: float  # m L

    def modal(self, omega: float, zeta: float) -> np.ndarray:
        """``Q_n`` for one mode, shape ``(n_samples, n_basis)``."""
        return qddot_from_force(self.F, self.dt, omega, zeta, 1.0)[:, self.offset:].T


def forward_terms(record: SensorRecord, excitation, basis: BopBasis, length: float,
                  mass_per_length: float) -> ForwardTerms:
    dt = record.dt
    B = eval_basis(basis, record.positions, length)
    if isinstance(excitation, FixedForce):
        if not 0 < excitation.location < length:
            raise ValueError("force location must lie strictly inside the span")
        f = np.asarray(excitation.force, dtype=float)
        k0 = int(round(record.times[0] / dt))
        if f.size < k0 + len(record):
            raise ValueError("force series shorter than the record")
        F = np.outer(eval_basis(basis, excitation.location, length), f[:k0 + len(record)])
    elif isinstance(excitation, KnownTraffic):
        ext, k0 = _extended_grid(excitation.traffic, record.times)
        F = traffic_force(excitation.traffic, lambda x: eval_basis(basis, x, length), length, ext, excitation.g)
    else:
        raise TypeError("excitation must be FixedForce or KnownTraffic")
    return ForwardTerms(B, F, k0, dt, mass_per_length * length)


def _mode_record(terms: ForwardTerms, wn: np.ndarray, Qn: np.ndarray) -> np.ndarray:
    return (terms.B @ wn) * (Qn @ wn) / (terms.mass_length * (wn @ wn))


def forward_record(terms: ForwardTerms, w, omegas, zetas) -> np.ndarray:
    """Simulated sensor record for weights ``w`` (one row per mode)."""
    w = np.atleast_2d(w)
    out = np.zeros(terms.B.shape[0])
    for wn, om, z in zip(w, omegas, zetas):
        out += _mode_record(terms, wn, terms.modal(om, z))
    return out


def _weight_jacobian(terms: ForwardTerms, wn: np.ndarray, Qn: np.ndarray) -> np.ndarray:
    """Analytic derivative of one mode's record with respect to its weights."""
    s = terms.mass_length * (wn @ wn)
    a = terms.B @ wn
    c = Qn @ wn
    d = (terms.B * c[:, None] + Qn * a[:, None]) / s
    d -= np.outer(2 * a * c / (s * (wn @ wn)), wn)
    return d


@dataclass
class NlsFit:
    weights: np.ndarray     # (n_modes, n_basis)
    omegas: np.ndarray      # rad/s, refined when requested
    zetas: np.ndarray
    history: list           # objective after each accepted step (first = start)
    converged: bool
    n_iter: int
    message: str

    @property
    def objective(self) -> float:
        return self.history[-1]


def _canonical(w: np.ndarray) -> np.ndarray:
    w = w / np.linalg.norm(w, axis=1, keepdims=True)
    k = np.argmax(np.abs(w), axis=1)
    return w * np.sign(w[np.arange(w.shape[0]), k])[:, None]


class _Model:
    """Parameter vector ``[w (row-major), omega, log zeta]`` and its record."""

    def __init__(self, terms, n_modes, nb, refine):
        self.terms, self.n_modes, self.nb, self.refine = terms, n_modes, nb, refine

    def unpack(self, theta, omegas, zetas):
        nw = self.n_modes * self.nb
        w = theta[:nw].reshape(self.n_modes, self.nb)
        if self.refine:
            return w, theta[nw:nw + self.n_modes], np.exp(np.clip(theta[nw + self.n_modes:], -20.0, 0.0))
        return w, omegas, zetas

    def pack(self, w, omegas, zetas):
        parts = [w.ravel()]
        if self.refine:
            parts += [np.asarray(omegas, dtype=float), np.log(zetas)]
        return np.concatenate(parts)

    def evaluate(self, w, omegas, zetas, with_jacobian):
        Qs = [self.terms.modal(om, z) for om, z in zip(omegas, zetas)]
        parts = [_mode_record(self.terms, wn, Qn) for wn, Qn in zip(w, Qs)]
        f = np.sum(parts, axis=0)
        if not with_jacobian:
            return f, None
        cols = [_weight_jacobian(self.terms, wn, Qn) for wn, Qn in zip(w, Qs)]
        if self.refine:
            dom, dz = [], []
            for n, (wn, om, z) in enumerate(zip(w, omegas, zetas)):
                h = 1e-6 * om
                dom.append((_mode_record(self.terms, wn, self.terms.modal(om + h, z)) - parts[n]) / h)
                hz = 1e-5  # step in log zeta
                dz.append((_mode_record(self.terms, wn, self.terms.modal(om, z * np.exp(hz))) - parts[n]) / hz)
            cols += [np.array(dom).T, np.array(dz).T]
        return f, np.hstack(cols)


def fit_bop_weights(record: SensorRecord, omegas, zetas, excitation, basis: BopBasis, *,
                    length: float, mass_per_length: float, w0=None, max_iter: int = 200,
                    rtol: float = 1e-8, noise_rms: float | None = None, refine_modal: bool = True,
                    omega_box: float = 0.05, zeta_box: float = 10.0,
                    terms: ForwardTerms | None = None) -> NlsFit:
    """Levenberg-Marquardt fit of BOP weights to a known-input record.

    Starts from ``w_n = e_n`` unless ``w0`` is given. With ``refine_modal``
    the supplied frequencies and damping ratios are refined in the same fit,
    kept within ``omega * (1 +- omega_box)`` and ``zeta / zeta_box`` to
    ``zeta * zeta_box``. The damping factor is multiplied by 10 on a
    rejected step and divided by 10 on an accepted one; iteration ends when
    an accepted step lowers the objective by less than ``rtol`` relative, or
    after ``max_iter`` iterations. With ``noise_rms`` a final residual above
    ten times the noise floor is reported as non-convergence.
    """
    om0 = np.asarray(omegas, dtype=float)
    z0 = np.asarray(zetas, dtype=float)
    n_modes, nb = om0.size, basis.n_basis
    if n_modes > nb:
        raise ValueError("more modes than basis functions")
    if np.any(z0 <= 0) or np.any(z0 >= 1):
        raise ValueError("damping ratios must lie in (0, 1)")
    if terms is None:
        terms = forward_terms(record, excitation, basis, length, mass_per_length)
    y = np.asarray(record.acc, dtype=float)
    model = _Model(terms, n_modes, nb, refine_modal)
    w = _canonical(np.eye(n_modes, nb) if w0 is None else np.array(w0, dtype=float))
    om, ze = om0.copy(), z0.copy()

    def inside(o, z):
        return (np.all(np.abs(o / om0 - 1) <= omega_box)
                and np.all(z >= z0 / zeta_box) and np.all(z <= np.minimum(z0 * zeta_box, 0.99)))

    f, J = model.evaluate(w, om, ze, True)
    r = f - y
    obj = float(r @ r)
    if not np.isfinite(obj):
        raise ArithmeticError("non-finite objective at the starting point")
    history = [obj]
    lam = 1e-3
    converged = False
    message = "iteration limit reached"
    it = 0
    for it in range(1, max_iter + 1):
        A = J.T @ J
        gvec = J.T @ r
        diag = np.diag(A).copy()
        top = diag.max() if diag.max() > 0 else 1.0
        diag = np.maximum(diag, top * 1e-12)
        theta = model.pack(w, om, ze)
        accepted = False
        while lam < 1e16:
            try:
                step = np.linalg.solve(A + lam * np.diag(diag), -gvec)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            w_new, om_new, ze_new = model.unpack(theta + step, om, ze)
            if np.any(np.linalg.norm(w_new, axis=1) == 0) or not inside(om_new, ze_new):
                lam *= 10
                continue
            f_new, _ = model.evaluate(w_new, om_new, ze_new, False)
            r_new = f_new - y
            obj_new = float(r_new @ r_new)
            if np.isfinite(obj_new) and obj_new < obj:
                accepted = True
                break
            lam *= 10
        if not accepted:
            converged = True
            message = "no further decrease"
            break
        lam = max(lam / 10, 1e-12)
        decrease = (obj - obj_new) / obj if obj > 0 else 0.0
        w, om, ze, r, obj = _canonical(w_new), om_new, ze_new, r_new, obj_new
        history.append(obj)
        if decrease < rtol:
            converged = True
            message = "relative decrease below tolerance"
            break
        _, J = model.evaluate(w, om, ze, True)
    if noise_rms is not None and np.sqrt(obj / y.size) > 10 * noise_rms:
        converged = False
        message = "stagnated above ten times the noise floor"
    return NlsFit(w, om, ze, history, converged, it, message)


# -- statistical estimators ------------------------------------------------

def _ensemble(ensemble) -> np.ndarray:
    try:
        X = np.asarray(ensemble, dtype=float)
    except ValueError as exc:
        raise ValueError("ragged ensemble") from exc
    if X.ndim != 2:
        raise ValueError("ragged ensemble")
    return X


def sd_modeshape(ensemble, min_runs: int = 10) -> np.ndarray:
    """Smoothed ensemble standard deviation of one modal channel, ``~ |phi_n|``."""
    X = _ensemble(ensemble)
    if X.shape[0] < max(min_runs, 2):
        raise ValueError(f"need at least {max(min_runs, 2)} runs")
    return smooth_3pt(X.std(axis=0, ddof=1))


def eps_modeshape(eps: EpsMatrix, omega: float, neighbours: int = 1, half_band: float | None = None) -> np.ndarray:
    """Square root of the EPS row nearest ``omega`` (averaged with
    ``neighbours`` rows either side), smoothed; ``~ |phi_n|``.

    ``half_band`` (rad/s, typically ``zeta * omega``) widens the average to
    cover the modal half-power band when that spans more rows.
    """
    if not eps.omega[0] <= omega <= eps.omega[-1]:
        raise ValueError("frequency outside the EPS grid")
    if half_band is not None:
        neighbours = max(neighbours, int(np.ceil(half_band / eps.domega)))
    k = int(np.argmin(np.abs(eps.omega - omega)))
    lo, hi = max(0, k - neighbours), min(eps.omega.size, k + neighbours + 1)
    row = eps.S[lo:hi].mean(axis=0)
    return smooth_3pt(np.sqrt(np.maximum(row, 0.0)))


def node_indices(abs_shape, threshold: float = 0.1) -> list[int]:
    """Interior nodes: the lowest sample of each interior run below
    ``threshold * max``."""
    s = np.asarray(abs_shape, dtype=float)
    top = s.max()
    if top <= 0:
        return []
    low = s < threshold * top
    nodes = []
    i, n = 0, s.size
    while i < n:
        if not low[i]:
            i += 1
            continue
        j = i
        while j < n and low[j]:
            j += 1
        if i > 0 and j < n:
            nodes.append(i + int(np.argmin(s[i:j])))
        i = j
    return nodes


def assign_signs(abs_shape, threshold: float = 0.1) -> np.ndarray:
    """Signed shape from a magnitude profile by alternating sign at nodes.

    The first segment is positive. A node sample keeps the sign of the
    segment before it. Without nodes the profile is returned unchanged, with
    a warning when it has a deep interior dip (an ambiguous sign pattern).
    """
    s = np.asarray(abs_shape, dtype=float)
    if np.any(s < 0):
        raise ValueError("magnitude profile must be non-negative")
    nodes = node_indices(s, threshold)
    if not nodes:
        interior = s[1:-1]
        if interior.size and np.any(
                (interior < 0.5 * s.max()) & (interior < s[:-2]) & (interior <= s[2:])):
            warnings.warn("no near-zero node found; keeping a single sign", stacklevel=2)
        return s.copy()
    sign = np.ones_like(s)
    for k in nodes:
        sign[k + 1:] *= -1
    return s * sign
