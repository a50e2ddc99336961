"""Quick property suites on synthetic oracles (``bridgescan selftest``)."""
from __future__ import annotations

import filecmp
import tempfile
from pathlib import Path

import numpy as np
from scipy.integrate import quad

from .beam import BeamSpec, fe_assemble, hermite_shape, modal_model
from .bop import make_basis
from .emd import emd
from .modeshape import mac
from .response import SensorTrajectory, duhamel_moving_masses, modal_convolution
from .traffic import TrafficRealization, Vehicle
from .vbi import VbiScenario, integrate

Result = tuple[str, bool, str]


def bop_orthonormality(n_basis: int = 8) -> Result:
    basis = make_basis(n_basis)
    xg, wg = np.polynomial.legendre.leggauss(32)
    xi = 0.5 * (xg + 1)
    P = basis(xi)
    gram = (P * (0.5 * wg)[:, None]).T @ P
    err = float(np.abs(gram - np.eye(n_basis)).max())
    return "BOP orthonormality", err < 1e-10, f"max |G - I| = {err:.2e} (tol 1e-10)"


def hermite_partition(le: float = 0.7) -> Result:
    s = np.linspace(0, le, 101)
    N = hermite_shape(s, le)
    err = float(np.abs(N[:, 0] + N[:, 2] - 1).max())
    return "Hermite partition of unity", err < 1e-12, f"max error {err:.2e}"


def fe_static_midspan(n_elements: int = 30) -> Result:
    beam = BeamSpec(30.0, 1000.0, 27.5e9 * 0.175, 4)
    fe = fe_assemble(beam, n_elements)
    P = 1e5
    u = fe.static(P * fe.shape_vector(beam.length / 2))
    w = float(fe.shape_vector(beam.length / 2) @ u)
    exact = P * beam.length**3 / (48 * beam.flexural_rigidity)
    err = abs(w / exact - 1)
    return "FE static midspan deflection", err < 1e-3, f"relative error {err:.2e} (tol 1e-3)"


def duhamel_quadrature(omega: float = 20.0, zeta: float = 0.05, dt: float = 0.01) -> Result:
    t = dt * np.arange(201)
    f = np.sin(3 * t) + 0.5 * np.cos(11 * t) + 0.2
    Z = modal_convolution(f, dt, omega, zeta)
    s = complex(-zeta * omega, omega * np.sqrt(1 - zeta**2))
    errs = []
    for k in (50, 120, 200):
        tk = t[k]
        kern = lambda tau, part: (np.interp(tau, t, f) * np.exp(s * (tk - tau))).__getattribute__(part)
        re = quad(kern, 0, tk, args=("real",), limit=400, epsabs=1e-13, epsrel=1e-12, points=t[1:k])[0]
        im = quad(kern, 0, tk, args=("imag",), limit=400, epsabs=1e-13, epsrel=1e-12, points=t[1:k])[0]
        errs.append(abs(Z[k] - complex(re, im)) / abs(complex(re, im)))
    err = float(max(errs))
    return "Duhamel convolution vs quadrature", err < 1e-6, f"max relative error {err:.2e} (tol 1e-6)"


def vbi_massless_limit() -> Result:
    """Coupled solution with vehicle inertia switched off against the
    closed-form moving-load record."""
    beam = BeamSpec(30.0, 1000.0, 27.5e9 * 0.175, 4, zetas=(0.01,) * 6)
    fe = fe_assemble(beam, 30)
    m, k = 1500.0, 170e3
    veh = Vehicle(m, 20.0, 0.0, k, 2 * 0.2 * np.sqrt(k * m))
    sensor_dt = 0.002
    # a fine step keeps Newmark period elongation of mode 4 well below the tolerance
    sc = VbiScenario(fe, TrafficRealization((veh,)), instrumented=0, h=sensor_dt / 32,
                     sensor_dt=sensor_dt, inertia_factor=0.0)
    rec = integrate(sc).record
    traj = SensorTrajectory(veh.velocity, sensor_dt, len(rec), float(rec.times[0]))
    # the reference carries the modal damping the FE Rayleigh matrix implies
    w, phi = fe.eigen(6)
    zetas = np.diag(phi.T @ fe.C @ phi) / (2 * w * np.diag(phi.T @ fe.M @ phi))
    ref_beam = BeamSpec(beam.length, beam.mass_per_length, beam.flexural_rigidity, 6, zetas=tuple(zetas))
    ref = duhamel_moving_masses(modal_model(ref_beam, 6), TrafficRealization((Vehicle(m, 20.0, 0.0),)), traj)
    err = float(np.sqrt(np.mean((rec.acc - ref.acc) ** 2)) / np.sqrt(np.mean(ref.acc**2)))
    return "VBI massless limit vs moving load", err < 0.02, f"relative RMS difference {err:.3f} (tol 0.02)"


def emd_two_tone(dt: float = 1e-3) -> Result:
    t = dt * np.arange(8000)
    a, b = np.sin(2 * np.pi * 40 * t), 0.5 * np.sin(2 * np.pi * 5 * t)
    imfs = emd(a + b, dt).imfs
    ra = max(abs(np.corrcoef(f, a)[0, 1]) for f in imfs)
    rb = max(abs(np.corrcoef(f, b)[0, 1]) for f in imfs)
    ok = min(ra, rb) > 0.99
    return "EMD two-tone separation", ok, f"correlations {ra:.4f}, {rb:.4f} (min 0.99)"


def mac_invariance(seed: int = 0) -> Result:
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=50), rng.normal(size=50)
    base = mac(a, b)
    vals = [mac(-3.0 * a, b), mac(a, 0.01 * b), mac(-a, -b)]
    err = max(abs(v - base) for v in vals)
    ok = err < 1e-12 and abs(mac(a, a) - 1) < 1e-12
    return "MAC sign/scale invariance", ok, f"max deviation {err:.1e}"


def seed_determinism(seed: int = 0) -> Result:
    from .cli import run_simulate
    from .config import preset

    cfg = preset("stat-mass").replace(runs=2, seed=seed)
    cfg.traffic.n_vehicles = 5
    with tempfile.TemporaryDirectory() as tmp:
        a, b = Path(tmp, "a"), Path(tmp, "b")
        run_simulate(cfg, a)
        run_simulate(cfg, b)
        names = sorted(p.name for p in a.glob("run_*"))
        same = all(filecmp.cmp(a / n, b / n, shallow=False) for n in names)
    return "seed determinism", same and bool(names), f"{len(names)} run files byte-identical: {same}"


def run_all(seed: int = 0) -> list[Result]:
    return [bop_orthonormality(), hermite_partition(), fe_static_midspan(), duhamel_quadrature(),
            vbi_massless_limit(), emd_two_tone(), mac_invariance(seed), seed_determinism(seed)]
