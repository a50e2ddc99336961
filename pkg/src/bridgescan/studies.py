"""Scenario builders and identification pipelines for the reference studies."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .beam import BeamSpec, FeBeam, fe_assemble, modal_model, mode_shape_analytic
from .bop import make_basis
from .modeshape import (FixedForce, IdentifiedModes, KnownTraffic, fit_bop_weights, forward_terms, sd_modeshape,
                        eps_modeshape, shapes_from_weights)
from .response import SensorRecord, SensorTrajectory, add_noise, duhamel_fixed_force, duhamel_moving_masses
from .roughness import generate_profile
from .sigproc import PsdEstimate, build_eps, efdd_from_psd, efdd_identify, modal_decompose, welch_psd
from .traffic import TrafficRealization, Vehicle, sample_vehicles, scripted_stream
from .vbi import VbiScenario, integrate, step_for


def beam_10m(zeta: float = 0.02, n_modes: int = 4) -> BeamSpec:
    return BeamSpec(10.0, 6.1, 152.67e3, n_modes, zetas=(zeta,) * n_modes)


def bridge_30m(zeta: float = 0.01, damped_modes: int = 6) -> BeamSpec:
    return BeamSpec(30.0, 1000.0, 27.5e9 * 0.175, 4, zetas=(zeta,) * damped_modes)


def fe_bridge(n_elements: int = 30, beam: BeamSpec | None = None) -> FeBeam:
    return fe_assemble(beam or bridge_30m(), n_elements)


def centred_entry(traffic: TrafficRealization, length: float, sensor_velocity: float, dt: float) -> float:
    """Sensor entry time that centres its crossing inside the traffic stream,
    rounded to the sampling grid."""
    arr = np.array([v.arrival for v in traffic.vehicles])
    vbar = np.mean([v.velocity for v in traffic.vehicles])
    t0 = 0.5 * (arr.min() + arr.max() + length / vbar - length / sensor_velocity)
    return max(0.0, dt * np.round(t0 / dt))


# -- simulation ------------------------------------------------------------

def simulate_fixed_force(beam: BeamSpec, location: float, rng: np.random.Generator, *,
                         velocity: float = 1.0, dt: float = 1e-3, noise: float = 0.05,
                         force_sd: float = 1.0) -> tuple[SensorRecord, np.ndarray]:
    """Gaussian white-noise point force; the sensor enters at t = 0."""
    traj = SensorTrajectory.spanning(beam.length, velocity, dt)
    force = rng.normal(0.0, force_sd, size=traj.n_samples)
    rec = duhamel_fixed_force(modal_model(beam), force, location, traj,
                              meta={"scenario": "fixed-force", "location": location})
    return add_noise(rec, noise, rng), force


def five_mass_traffic() -> tuple[TrafficRealization, int]:
    """Five 1 kg masses one second apart; the second carries the sensor."""
    return scripted_stream([1.0] * 5, [1.0, 0.5, 2.0, 1.5, 4.0], [1.0] * 5), 1


def simulate_moving_masses(beam: BeamSpec, traffic: TrafficRealization, sensor_velocity: float,
                           entry_time: float, *, dt: float = 1e-3, noise: float = 0.0,
                           rng: np.random.Generator | None = None) -> SensorRecord:
    traj = SensorTrajectory.spanning(beam.length, sensor_velocity, dt, entry_time=entry_time)
    rec = duhamel_moving_masses(modal_model(beam), traffic, traj, meta={"scenario": "moving-mass"})
    if noise > 0:
        rec = add_noise(rec, noise, rng if rng is not None else np.random.default_rng())
    return rec


def statistical_traffic(rng: np.random.Generator, *, length: float = 10.0, n_vehicles: int = 25,
                        rate: float = 1.0, mean_mass: float = 1.0, mean_velocity: float = 2.0,
                        sensor_velocity: float = 0.5, sensor_mass: float = 1.0,
                        dt: float = 2e-3) -> tuple[TrafficRealization, float]:
    """Poisson/LHS stream plus the sensor carrier (a moving mass itself),
    placed so that traffic flows throughout its crossing."""
    tr = sample_vehicles(n_vehicles, mean_mass=mean_mass, mean_velocity=mean_velocity, rng=rng, rate=rate)
    t0 = centred_entry(tr, length, sensor_velocity, dt)
    if sensor_mass > 0:
        tr = tr.merged(TrafficRealization((Vehicle(sensor_mass, sensor_velocity, t0),)))
    return tr, t0


@dataclass(frozen=True)
class VbiCase:
    n_vehicles: int
    mean_mass: float
    mean_velocity: float
    sensor_velocity: float
    gd0: float
    rate: float = 2.0
    stiffness: float = 170e3
    damping_ratio: float = 0.2


TR_I = VbiCase(25, 1500.0, 20.0, 4.0, 0.25e-6)
TR_II = VbiCase(20, 500.0, 30.0, 20.0, 1e-6)


def vbi_scenario(case: VbiCase, rng: np.random.Generator, fe: FeBeam | None = None, *,
                 sensor_dt: float = 2e-3, h: float | None = None) -> VbiScenario:
    """Traffic, roughness and an instrumented vehicle of the mean traffic mass."""
    fe = fe or fe_bridge()
    L = fe.beam.length
    tr = sample_vehicles(case.n_vehicles, mean_mass=case.mean_mass, mean_velocity=case.mean_velocity,
                         rng=rng, rate=case.rate, stiffness=case.stiffness, damping_ratio=case.damping_ratio)
    t0 = centred_entry(tr, L, case.sensor_velocity, sensor_dt)
    c = 2 * case.damping_ratio * np.sqrt(case.stiffness * case.mean_mass)
    inst = Vehicle(case.mean_mass, case.sensor_velocity, t0, case.stiffness, float(c))
    merged = tr.merged(TrafficRealization((inst,)))
    idx = next(i for i, v in enumerate(merged.vehicles) if v is inst)
    profile = generate_profile(case.gd0, rng)
    h = h or step_for(fe, sensor_dt)
    return VbiScenario(fe, merged, profile, idx, h, sensor_dt)


def simulate_vbi(case: VbiCase, rng: np.random.Generator, fe: FeBeam | None = None, **kw) -> SensorRecord:
    res = integrate(vbi_scenario(case, rng, fe, **kw))
    rec = res.record
    rec.meta.update(scenario="vbi")
    return rec


# -- identification --------------------------------------------------------

def truth_shapes(length: float, x, n_modes: int = 4) -> np.ndarray:
    return np.array([mode_shape_analytic(n, x, length) for n in range(1, n_modes + 1)])


def identify_known(record: SensorRecord, excitation, beam: BeamSpec, *, n_modes: int = 4,
                   n_basis: int = 8, band=None, hints=None, n_grid: int = 101,
                   refine_modal: bool = True) -> IdentifiedModes:
    """EFDD frequencies and damping, then BOP weights by least squares.

    ``hints`` (rad/s, e.g. model frequencies) steer the peak search; the
    excitation flags are then evaluated at the hinted frequencies, so a mode
    without a spectral peak is judged where it should appear. Every mode is
    fitted whatever its flag.
    """
    efdd = efdd_identify(record.acc, record.dt, n_modes, band=band, hints=hints)
    if not efdd.complete:
        raise ArithmeticError(f"EFDD resolved {len(efdd.modes)} of {n_modes} modes")
    flag_at = efdd.omegas if hints is None else np.asarray(hints, dtype=float)
    excited = modal_decompose(record.acc, record.dt, flag_at).excited
    basis = make_basis(n_basis)
    terms = forward_terms(record, excitation, basis, beam.length, beam.mass_per_length)
    # A single outlying EFDD damping value can trap the joint fit in a local
    # minimum; a second start from the common median damping guards that.
    starts = [efdd.zetas, np.full(n_modes, np.median(efdd.zetas))]
    fits = [fit_bop_weights(record, efdd.omegas, z0, excitation, basis, length=beam.length,
                            mass_per_length=beam.mass_per_length, refine_modal=refine_modal, terms=terms)
            for z0 in starts]
    fit = min(fits, key=lambda f: f.history[-1])
    x = np.linspace(0.0, beam.length, n_grid)
    shapes = shapes_from_weights(fit.weights, basis, x, beam.length)
    meta = {"efdd_omega": efdd.omegas.tolist(), "efdd_zeta": efdd.zetas.tolist(),
            "nls_converged": fit.converged, "nls_iterations": fit.n_iter, "nls_message": fit.message}
    return IdentifiedModes(fit.omegas, fit.zetas, x, shapes, "NLS", excited, meta).normalized()


def fixed_force_excitation(force, location: float) -> FixedForce:
    return FixedForce(np.asarray(force, dtype=float), location)


def known_traffic_excitation(traffic: TrafficRealization) -> KnownTraffic:
    return KnownTraffic(traffic)


@dataclass
class EnsembleEfdd:
    omegas: np.ndarray  # (runs, n_modes), NaN where a mode was not resolved
    zetas: np.ndarray
    pooled_omega: np.ndarray  # EFDD of the ensemble-averaged spectrum, NaN if unresolved
    pooled_zeta: np.ndarray
    min_fraction: float = 0.5

    @property
    def resolved(self) -> np.ndarray:
        return np.sum(np.isfinite(self.omegas), axis=0)

    @property
    def per_run(self) -> np.ndarray:
        """Modes resolved in at least ``min_fraction`` of the runs."""
        return self.resolved >= self.min_fraction * self.omegas.shape[0]

    def _pick(self, runs: np.ndarray, pooled: np.ndarray) -> np.ndarray:
        with np.errstate(all="ignore"), warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            mean = np.nanmean(runs, axis=0)
        return np.where(self.per_run, mean, pooled)

    @property
    def mean_omega(self) -> np.ndarray:
        """Ensemble-mean frequency, or the pooled one for sparsely resolved modes."""
        return self._pick(self.omegas, self.pooled_omega)

    @property
    def mean_zeta(self) -> np.ndarray:
        return self._pick(self.zetas, self.pooled_zeta)

    @property
    def std_omega(self) -> np.ndarray:
        sd = np.full(self.omegas.shape[1], np.nan)
        for k in range(sd.size):
            v = self.omegas[:, k][np.isfinite(self.omegas[:, k])]
            if v.size > 1:
                sd[k] = v.std(ddof=1)
        return sd


def _match(modes, ref, om_row, ze_row) -> None:
    for m in modes:
        k = int(np.argmin(np.abs(np.log(m.omega / ref))))
        if abs(np.log(m.omega / ref[k])) < 0.2 and np.isnan(om_row[k]):
            om_row[k], ze_row[k] = m.omega, m.zeta


def pooled_efdd(records, n_modes: int = 4, band=None, hints=None):
    """EFDD of the ensemble-mean spectrum, one full-length segment per run.

    Averaging over runs instead of over segments keeps the frequency
    resolution of the whole record, which short crossings need.
    """
    n = min(len(r) for r in records)
    psds = [welch_psd(r.acc[:n], r.dt, nperseg=n, nfft=4 * n) for r in records]
    p = psds[0]
    mean = PsdEstimate(p.omega, np.mean([q.power for q in psds], axis=0), p.nperseg, p.noverlap, p.dt)
    return efdd_from_psd(mean, n_modes, hints=hints, band=band)


def ensemble_efdd(records, n_modes: int = 4, band=None, hints=None, min_fraction: float = 0.5) -> EnsembleEfdd:
    """Per-run EFDD plus a pooled estimate for modes that too few runs resolve.

    Peaks are matched to ``hints`` (or to the pooled peaks) so that the mode
    order is consistent across runs.
    """
    pooled = pooled_efdd(records, n_modes, band=band, hints=hints)
    p_om = np.full(n_modes, np.nan)
    p_ze = np.full(n_modes, np.nan)
    if hints is not None:
        ref = np.asarray(hints, dtype=float)
    elif pooled.complete:
        ref = pooled.omegas
    else:
        ref = None
    om = np.full((len(records), n_modes), np.nan)
    ze = np.full((len(records), n_modes), np.nan)
    results = [efdd_identify(rec.acc, rec.dt, n_modes, band=band, hints=hints) for rec in records]
    if ref is None:
        ref = next((r.omegas for r in results if r.complete), None)
    if ref is None:
        raise ArithmeticError(f"no run resolved {n_modes} modes")
    _match(pooled.modes, ref, p_om, p_ze)
    for i, res in enumerate(results):
        _match(res.modes, ref, om[i], ze[i])
    return EnsembleEfdd(om, ze, p_om, p_ze, min_fraction)


def eps_step(dt: float, omega_max: float) -> int:
    """Largest decimation keeping ``omega_max`` below 2/3 of Nyquist."""
    return max(1, int(np.pi / (1.5 * omega_max * dt)))


@dataclass
class StatisticalResult:
    sd: IdentifiedModes
    eps: IdentifiedModes
    channels: np.ndarray  # (n_modes, runs, samples)
    efdd: EnsembleEfdd


def identify_statistical(records, *, length: float, n_modes: int = 4, band=None, hints=None,
                         omegas=None, eps_decimate: int | None = None, min_runs: int = 10) -> StatisticalResult:
    """Ensemble SD and EPS shape magnitudes from decomposed modal channels.

    Every record must share the sampling grid (same sensor speed). The
    frequencies are the ensemble-mean EFDD estimates unless ``omegas`` is
    given. The EPS is built on a decimated grid (by default the coarsest
    that keeps the top mode below two thirds of Nyquist) and each row is
    averaged over the modal half-power band.
    """
    n = {len(r) for r in records}
    if len(n) != 1:
        raise ValueError("ragged ensemble: records differ in length")
    if len(records) < 2:
        raise ValueError("need at least two runs")
    efdd = ensemble_efdd(records, n_modes, band=band, hints=hints)
    om = np.asarray(omegas, dtype=float) if omegas is not None else efdd.mean_omega
    ze = efdd.mean_zeta
    if np.any(~np.isfinite(om)):
        raise ArithmeticError("a mode was not resolved in any run")
    dt = records[0].dt
    channels = np.empty((n_modes, len(records), n.pop()))
    excited_votes = np.zeros(n_modes)
    for i, rec in enumerate(records):
        md = modal_decompose(rec.acc, dt, om)
        channels[:, i] = md.channels
        excited_votes += md.excited
    excited = excited_votes >= 0.5 * len(records)
    x = records[0].positions
    sd = np.array([sd_modeshape(channels[k], min_runs=min_runs) for k in range(n_modes)])
    if eps_decimate is None:
        eps_decimate = eps_step(dt, om.max())
    eps_rows = []
    x_eps = x[::eps_decimate]
    for k in range(n_modes):
        eps = build_eps(channels[k], dt, decimate=eps_decimate)
        eps_rows.append(eps_modeshape(eps, min(om[k], eps.omega[-1]), half_band=ze[k] * om[k] if np.isfinite(ze[k]) else None))
    meta = {"runs": len(records), "efdd_omega_mean": efdd.mean_omega.tolist(),
            "efdd_omega_std": efdd.std_omega.tolist(), "efdd_zeta_mean": efdd.mean_zeta.tolist(),
            "efdd_resolved_runs": efdd.resolved.tolist(), "efdd_pooled": (~efdd.per_run).tolist()}
    sd_modes = IdentifiedModes(om, ze, x, sd, "SD", excited, dict(meta)).normalized()
    eps_modes = IdentifiedModes(om, ze, x_eps, np.array(eps_rows), "EPS", excited, dict(meta)).normalized()
    return StatisticalResult(sd_modes, eps_modes, channels, efdd)
