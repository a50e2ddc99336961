"""Vehicle-bridge interaction with sprung-mass vehicles on a Hermite FE beam.

Vehicle displacements are measured from static equilibrium on a rigid road,
so the suspension carries no gravity term and each vehicle presses on the
beam with ``-m g`` plus its spring and damper forces. Vehicles that have not
arrived or have left keep their DOF; their coupling column is zero and they
vibrate freely on the suspension.

Unknowns are ordered ``[y_v (N_v), y_b (N)]``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.signal import butter, sosfiltfilt

from .beam import G, FeBeam, hermite_shape
from .response import SensorRecord
from .roughness import RoughnessProfile, evaluate, evaluate_track, flat_profile
from .traffic import TrafficRealization

GAMMA = 0.5
BETA = 0.25


class VbiDivergenceError(ArithmeticError):
    """Raised when the coupled response grows beyond any physical bound."""


@dataclass(frozen=True)
class VbiScenario:
    fe: FeBeam
    traffic: TrafficRealization
    roughness: RoughnessProfile = field(default_factory=flat_profile)
    instrumented: int = 0
    h: float = 1e-3
    sensor_dt: float = 2e-3
    inertia_factor: float = 1.0
    g: float = G
    n_channels: int = 4
    offset_roughness: bool = True  # measure r from its value at the entry support
    roughness_cutoff: float | None = None  # Hz; default is the sensor Nyquist frequency
    anti_alias: bool = True

    def __post_init__(self):
        nv = self.traffic.n_vehicles
        if not 0 <= self.instrumented < nv:
            raise ValueError("instrumented vehicle index out of range")
        if any(v.stiffness is None or v.damping is None for v in self.traffic.vehicles):
            raise ValueError("VBI vehicles need suspension stiffness and damping")
        if self.h <= 0 or self.sensor_dt <= 0:
            raise ValueError("time steps must be positive")
        sub = self.sensor_dt / self.h
        if abs(sub - round(sub)) > 1e-6 * sub:
            raise ValueError("sensor_dt must be an integer multiple of h")
        if self.inertia_factor < 0:
            raise ValueError("inertia_factor must be non-negative")
        f_max = self.bandwidth_hz
        if self.h > 1.0 / (20.0 * f_max) * (1 + 1e-9):
            raise ValueError(f"h={self.h:g} s resolves fewer than 20 steps per period at {f_max:.2f} Hz")

    @property
    def n_vehicles(self) -> int:
        return self.traffic.n_vehicles

    @property
    def n_dof(self) -> int:
        return self.n_vehicles + self.fe.n_dof

    @cached_property
    def _arrays(self):
        vs = self.traffic.vehicles
        m = np.array([v.mass for v in vs])
        return (m, np.array([v.velocity for v in vs]), np.array([v.arrival for v in vs]),
                np.array([v.stiffness for v in vs]), np.array([v.damping for v in vs]))

    def _vehicle_arrays(self):
        return self._arrays

    @property
    def bandwidth_hz(self) -> float:
        """Highest frequency the record retains: the last identified mode or
        the anti-alias passband edge, whichever is higher."""
        return bandwidth(self.fe, self.sensor_dt, self.n_channels, self.anti_alias)

    @property
    def cutoff_hz(self) -> float:
        return 0.5 / self.sensor_dt if self.roughness_cutoff is None else self.roughness_cutoff

    @cached_property
    def _profiles(self):
        """Roughness seen by each vehicle: harmonics above the cutoff frequency
        ``v kappa`` are dropped, together with the entry offset ``r(0)``."""
        out = []
        p = self.roughness
        for v in self.traffic.vehicles:
            keep = p.kappas * v.velocity <= self.cutoff_hz
            q = RoughnessProfile(p.amplitudes[keep], p.kappas[keep], p.phases[keep], p.gd0, p.kappa0, p.exponent)
            r0 = float(evaluate(q, 0.0)[0]) if self.offset_roughness else 0.0
            out.append((q, r0))
        return out


AA_FRACTION = 0.8  # anti-alias passband edge as a fraction of the sensor Nyquist frequency


def bandwidth(fe: FeBeam, sensor_dt: float, n_channels: int = 4, anti_alias: bool = True) -> float:
    w, _ = fe.eigen(n_channels)
    f = w[-1] / (2 * np.pi)
    return max(f, AA_FRACTION * 0.5 / sensor_dt) if anti_alias else f


def step_for(fe: FeBeam, sensor_dt: float, n_channels: int = 4, steps_per_period: int = 20,
             anti_alias: bool = True) -> float:
    """Largest integration step that divides ``sensor_dt`` and spends
    ``steps_per_period`` steps on a period of the retained bandwidth."""
    f_max = bandwidth(fe, sensor_dt, n_channels, anti_alias)
    return sensor_dt / int(np.ceil(sensor_dt * steps_per_period * f_max - 1e-9))


@dataclass
class CoupledState:
    yv: np.ndarray
    vv: np.ndarray
    av: np.ndarray
    yb: np.ndarray
    vb: np.ndarray
    ab: np.ndarray
    t: float

    def __post_init__(self):
        if not (len(self.yv) == len(self.vv) == len(self.av)
                and len(self.yb) == len(self.vb) == len(self.ab)):
            raise ValueError("state vectors have inconsistent lengths")

    @classmethod
    def zeros(cls, n_vehicles: int, n_bridge: int, t: float = 0.0) -> "CoupledState":
        z, zb = np.zeros(n_vehicles), np.zeros(n_bridge)
        return cls(z.copy(), z.copy(), z.copy(), zb.copy(), zb.copy(), zb.copy(), t)

    def stacked(self):
        return (np.concatenate([self.yv, self.yb]), np.concatenate([self.vv, self.vb]),
                np.concatenate([self.av, self.ab]))


def _hermite_pair(xi: np.ndarray, le: float) -> tuple[np.ndarray, np.ndarray]:
    """Hermite values and slopes without argument checks (hot loop)."""
    s = xi / le
    s2 = s * s
    s3 = s2 * s
    vals = np.empty((s.size, 4))
    vals[:, 0] = 1 - 3 * s2 + 2 * s3
    vals[:, 1] = le * (s - 2 * s2 + s3)
    vals[:, 2] = 3 * s2 - 2 * s3
    vals[:, 3] = le * (s3 - s2)
    d = np.empty((s.size, 4))
    d[:, 0] = (6 * s2 - 6 * s) / le
    d[:, 1] = 1 - 4 * s + 3 * s2
    d[:, 2] = -d[:, 0]
    d[:, 3] = 3 * s2 - 2 * s
    return vals, d


def _contact(scenario: VbiScenario, t: float):
    """Positions, on-span mask and Hermite data of all contact points."""
    fe = scenario.fe
    _, vel, arr, _, _ = scenario._vehicle_arrays()
    x = vel * (t - arr)
    on = (x >= 0.0) & (x <= fe.beam.length)
    idx = np.flatnonzero(on)
    e, xi = fe.locate(x[idx])
    vals = hermite_shape(xi, fe.le)
    dvals = hermite_shape(xi, fe.le, derivative=True)
    dofs = fe.global_to_active[2 * e[:, None] + np.arange(4)]
    return x, idx, dofs, vals, dvals


def contact_shape_matrix(scenario: VbiScenario, t: float) -> tuple[np.ndarray, np.ndarray]:
    """``N_G`` and ``N_G'`` (each ``N x N_v``); off-span columns are zero."""
    _, idx, dofs, vals, dvals = _contact(scenario, t)
    N = np.zeros((scenario.fe.n_dof, scenario.n_vehicles))
    dN = np.zeros_like(N)
    cols = np.broadcast_to(idx[:, None], dofs.shape)
    keep = dofs >= 0
    N[dofs[keep], cols[keep]] = vals[keep]
    dN[dofs[keep], cols[keep]] = dvals[keep]
    return N, dN


def contact_roughness(scenario: VbiScenario, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Roughness ``r_G`` and slope ``r'_G`` under every vehicle (zero off span)."""
    x, idx, *_ = _contact(scenario, t)
    r = np.zeros(scenario.n_vehicles)
    dr = np.zeros(scenario.n_vehicles)
    for j in idx:
        q, r0 = scenario._profiles[j]
        rv, drv = evaluate(q, x[j])
        r[j], dr[j] = rv - r0, drv
    return r, dr


def assemble_coupled(scenario: VbiScenario, t: float):
    """Coupled ``(M, C, K, F)`` at time ``t``."""
    fe = scenario.fe
    m, vel, _, k, c = scenario._vehicle_arrays()
    nv, nb = scenario.n_vehicles, fe.n_dof
    N, dN = contact_shape_matrix(scenario, t)
    r, dr = contact_roughness(scenario, t)
    cv = c * vel
    n = nv + nb
    M = np.zeros((n, n))
    C = np.zeros((n, n))
    K = np.zeros((n, n))
    iv = np.arange(nv)
    M[iv, iv] = m * scenario.inertia_factor
    M[nv:, nv:] = fe.M
    C[iv, iv] = c
    C[:nv, nv:] = -(c[:, None] * N.T)
    C[nv:, :nv] = -(N * c)
    C[nv:, nv:] = fe.C + (N * c) @ N.T
    K[iv, iv] = k
    K[:nv, nv:] = -(cv[:, None] * dN.T) - k[:, None] * N.T
    K[nv:, :nv] = -(N * k)
    K[nv:, nv:] = fe.K + (N * cv) @ dN.T + (N * k) @ N.T
    road = cv * dr + k * r
    F = np.concatenate([road, -N @ road - N @ (m * scenario.g)])
    return M, C, K, F


def contact_force(state: CoupledState, scenario: VbiScenario, j: int, t: float | None = None) -> float:
    """Force exerted on vehicle ``j`` by the deck (negative = pressing down on the beam)."""
    t = state.t if t is None else t
    v = scenario.traffic.vehicles[j]
    x = v.velocity * (t - v.arrival)
    if not 0.0 <= x <= scenario.fe.beam.length:
        raise ValueError(f"vehicle {j} is not on the span at t={t:g}")
    N, dN = contact_shape_matrix(scenario, t)
    r, dr = contact_roughness(scenario, t)
    rel = state.yv[j] - N[:, j] @ state.yb - r[j]
    rel_dot = state.vv[j] - N[:, j] @ state.vb - v.velocity * (dN[:, j] @ state.yb) - v.velocity * dr[j]
    return -v.mass * scenario.g + v.damping * rel_dot + v.stiffness * rel


@dataclass
class VbiResult:
    times: np.ndarray
    bridge_disp: np.ndarray     # (n_samples, N)
    bridge_acc: np.ndarray      # (n_samples, N)
    vehicle_disp: np.ndarray    # (n_samples, N_v)
    vehicle_acc: np.ndarray     # (n_samples, N_v)
    record: SensorRecord
    final: CoupledState


def _sensor_grid(scenario: VbiScenario):
    """Integration start, step count and sample stride aligned with the sensor."""
    inst = scenario.traffic.vehicles[scenario.instrumented]
    t_in, t_out = inst.window(scenario.fe.beam.length)
    n_samples = int(np.floor((t_out - t_in) / scenario.sensor_dt + 1e-9)) + 1
    sub = int(round(scenario.sensor_dt / scenario.h))
    first = min(v.arrival for v in scenario.traffic.vehicles)
    k0 = int(np.ceil((t_in - first) / scenario.h - 1e-9))
    t0 = t_in - k0 * scenario.h
    n_steps = k0 + (n_samples - 1) * sub
    return t0, n_steps, k0, sub, n_samples


def _bound(scenario: VbiScenario) -> float:
    b = scenario.fe.beam
    m, *_ = scenario._vehicle_arrays()
    static = m.sum() * scenario.g * b.length**3 / (48 * b.flexural_rigidity)
    return 1e3 * (static + np.abs(scenario.roughness.amplitudes).sum() + 1e-6)


def _tracks(scenario: VbiScenario, t0: float, n_steps: int):
    """Per-vehicle on-span step range and roughness along the track."""
    L = scenario.fe.beam.length
    h = scenario.h
    out = []
    for v, (q, r0) in zip(scenario.traffic.vehicles, scenario._profiles):
        k_first = max(0, int(np.ceil((v.arrival - t0) / h - 1e-9)))
        k_last = min(n_steps, int(np.floor((v.arrival + L / v.velocity - t0) / h + 1e-9)))
        if k_last < k_first:
            out.append((k_first, k_last, np.zeros(0), np.zeros(0)))
            continue
        x0 = v.velocity * (t0 + k_first * h - v.arrival)
        r, dr = evaluate_track(q, x0, v.velocity * h, k_last - k_first + 1)
        out.append((k_first, k_last, r - r0, dr))
    return out


def integrate(scenario: VbiScenario, t_end: float | None = None) -> VbiResult:
    """Newmark average-acceleration integration with per-step reassembly.

    Integration starts at rest just before the first arrival and samples the
    sensor from the instrumented vehicle's entry to its exit (or ``t_end``).
    Each step solves the bridge together with the vehicles currently on the
    span; the others are uncoupled oscillators and advance on their own with
    the same scheme.
    """
    fe = scenario.fe
    L = fe.beam.length
    nv, nb = scenario.n_vehicles, fe.n_dof
    t0, n_steps, k0, sub, n_samples = _sensor_grid(scenario)
    if t_end is not None:
        n_samples = min(n_samples, int(np.floor((t_end - (t0 + k0 * scenario.h)) / scenario.sensor_dt + 1e-9)) + 1)
        n_steps = k0 + (n_samples - 1) * sub
    h = scenario.h
    gh, bh2 = GAMMA * h, BETA * h * h
    m, vel, arr, k, c = scenario._vehicle_arrays()
    mi = m * scenario.inertia_factor
    weight = m * scenario.g
    tracks = _tracks(scenario, t0, n_steps)
    bound = _bound(scenario)
    Ab = fe.M + gh * fe.C + bh2 * fe.K
    a_free = mi + gh * c + bh2 * k
    g2a = fe.global_to_active
    lane4 = np.arange(4)

    uv, vv, av = np.zeros(nv), np.zeros(nv), np.zeros(nv)
    ub, vb, ab = np.zeros(nb), np.zeros(nb), np.zeros(nb)

    ts = np.empty(n_samples)
    yb_h = np.empty((n_samples, nb))
    ab_h = np.empty((n_samples, nb))
    yv_h = np.empty((n_samples, nv))
    av_h = np.empty((n_samples, nv))
    # sensor channels at every step from the entry of the instrumented vehicle
    inst = scenario.traffic.vehicles[scenario.instrumented]
    _, phi = fe.eigen(scenario.n_channels)
    phi = phi * np.sign(phi[1])  # positive next to the left support
    proj = phi.T @ fe.M
    n_fine = n_steps - k0 + 1
    fine = np.zeros((1 + scenario.n_channels, n_fine))

    def store(i, t):
        ts[i] = t
        yb_h[i], ab_h[i], yv_h[i], av_h[i] = ub, ab, uv, av

    k_first = np.array([tr[0] for tr in tracks])
    k_last = np.array([tr[1] for tr in tracks])
    j_inst = scenario.instrumented
    if k0 == 0:
        store(0, t0)
        sense0 = fe.shape_vector(0.0)
        fine[0, 0] = sense0 @ ab
        fine[1:, 0] = (sense0 @ phi) * (proj @ ab)
    for step in range(1, n_steps + 1):
        t = t0 + step * h
        on = np.flatnonzero((k_first <= step) & (step <= k_last))
        uv_p = uv + h * vv + (0.5 - BETA) * h * h * av
        vv_p = vv + (1 - GAMMA) * h * av
        ub_p = ub + h * vb + (0.5 - BETA) * h * h * ab
        vb_p = vb + (1 - GAMMA) * h * ab
        av = -(c * vv_p + k * uv_p) / a_free
        rhs_b = -(fe.C @ vb_p) - fe.K @ ub_p
        sens = None
        if on.size:
            idx = on
            no = idx.size
            x = np.clip(vel[idx] * (t - arr[idx]), 0.0, L)
            e = np.minimum((x / fe.le).astype(int), fe.n_elements - 1)
            hv, hd = _hermite_pair(x - e * fe.le, fe.le)
            dofs = g2a[2 * e[:, None] + lane4]
            keep = dofs >= 0
            cols = np.broadcast_to(np.arange(no)[:, None], dofs.shape)
            N = np.zeros((nb, no))
            dN = np.zeros((nb, no))
            N[dofs[keep], cols[keep]] = hv[keep]
            dN[dofs[keep], cols[keep]] = hd[keep]
            hit = np.flatnonzero(idx == j_inst)
            if hit.size:
                sens = N[:, hit[0]]
            r = np.array([tracks[j][2][step - tracks[j][0]] for j in on])
            dr = np.array([tracks[j][3][step - tracks[j][0]] for j in on])
            ci, ki, vi = c[idx], k[idx], vel[idx]
            cvi = ci * vi
            # predicted suspension force of each on-span vehicle
            s = (ki * (uv_p[idx] - N.T @ ub_p - r)
                 + ci * (vv_p[idx] - N.T @ vb_p - vi * (dN.T @ ub_p) - vi * dr))
            A = np.empty((no + nb, no + nb))
            A[:no, :no] = np.diag(a_free[idx])
            A[:no, no:] = -(gh * ci)[:, None] * N.T - bh2 * (cvi[:, None] * dN.T + ki[:, None] * N.T)
            A[no:, :no] = -N * (gh * ci + bh2 * ki)
            A[no:, no:] = Ab + (N * (gh * ci + bh2 * ki)) @ N.T + (N * (bh2 * cvi)) @ dN.T
            rhs = np.concatenate([-s, rhs_b + N @ (s - weight[idx])])
            sol = np.linalg.solve(A, rhs)
            av[idx] = sol[:no]
            ab = sol[no:]
        else:
            ab = np.linalg.solve(Ab, rhs_b)
        uv = uv_p + bh2 * av
        vv = vv_p + gh * av
        ub = ub_p + bh2 * ab
        vb = vb_p + gh * ab
        if step >= k0 and (step - k0) % sub == 0:
            if not (np.all(np.isfinite(ub)) and np.all(np.isfinite(uv))) or np.abs(ub).max() > bound:
                raise VbiDivergenceError(f"response exceeded {bound:.3g} at t={t:.4f} s")
            store((step - k0) // sub, t)
        if step >= k0:
            i = step - k0
            if sens is None:
                sens = fe.shape_vector(min(max(inst.velocity * (t - inst.arrival), 0.0), L))
            fine[0, i] = sens @ ab
            fine[1:, i] = (sens @ phi) * (proj @ ab)

    if scenario.anti_alias and sub > 1 and n_fine > 27:
        sos = butter(8, AA_FRACTION * 0.5 / scenario.sensor_dt, fs=1.0 / h, output="sos")
        fine = sosfiltfilt(sos, fine, axis=-1)
    fine = fine[:, ::sub]
    x = np.clip(inst.velocity * (ts - inst.arrival), 0.0, L)
    record = SensorRecord(ts, x, fine[0], fine[1:], {"scenario": "vbi"})
    final = CoupledState(uv, vv, av, ub, vb, ab, t0 + n_steps * h)
    return VbiResult(ts, yb_h, ab_h, yv_h, av_h, record, final)
