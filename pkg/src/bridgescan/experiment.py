"""Config-driven simulation and identification of one experiment."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .beam import BeamSpec, fe_assemble, natural_frequency
from .config import ConfigError, ExperimentConfig
from .modeshape import FixedForce, IdentifiedModes, KnownTraffic
from .response import SensorRecord
from .studies import (VbiCase, identify_known, identify_statistical, simulate_fixed_force,
                      simulate_moving_masses, simulate_vbi, statistical_traffic, truth_shapes)
from .traffic import TrafficRealization, run_rng, scripted_stream


class PreconditionError(ValueError):
    """The requested identification does not fit the available runs."""


def beam_spec(cfg: ExperimentConfig) -> BeamSpec:
    b = cfg.beam
    return BeamSpec(b.length, b.mass_per_length, b.flexural_rigidity, b.n_modes,
                    zetas=(b.zeta,) * b.damped_modes)


def true_omegas(cfg: ExperimentConfig) -> np.ndarray:
    """Reference angular frequencies: analytic, or FE eigenvalues for VBI."""
    beam = beam_spec(cfg)
    if cfg.scenario == "vbi":
        w, _ = fe_assemble(beam, cfg.beam.n_elements).eigen(beam.n_modes)
        return np.asarray(w)
    return np.array([natural_frequency(beam, n) for n in range(1, beam.n_modes + 1)])


def vbi_case(cfg: ExperimentConfig) -> VbiCase:
    t = cfg.traffic
    return VbiCase(t.n_vehicles, t.mean_mass, t.mean_velocity, cfg.sensor.velocity, cfg.vbi.gd0,
                   rate=t.rate, stiffness=cfg.vbi.stiffness, damping_ratio=cfg.vbi.damping_ratio)


@dataclass
class RunOutput:
    index: int
    record: SensorRecord
    force: np.ndarray | None = None
    traffic: TrafficRealization | None = None


def simulate_run(cfg: ExperimentConfig, index: int) -> RunOutput:
    """Simulate run ``index``; its generator is split from the master seed."""
    rng = run_rng(cfg.seed, index)
    beam = beam_spec(cfg)
    s = cfg.sensor
    if cfg.scenario == "fixed-force":
        rec, force = simulate_fixed_force(beam, cfg.force.location, rng, velocity=s.velocity, dt=s.dt,
                                          noise=s.noise, force_sd=cfg.force.sd)
        return RunOutput(index, rec, force=force)
    if cfg.scenario == "moving-mass":
        t = cfg.traffic
        if cfg.scripted:
            traffic = scripted_stream(t.masses, t.velocities, t.lags)
            carrier = traffic.vehicles[t.sensor_vehicle]
            if abs(carrier.velocity - s.velocity) > 1e-12:
                raise ConfigError("sensor.velocity", "must equal the carrier vehicle's velocity")
            entry = carrier.arrival
        else:
            traffic, entry = statistical_traffic(
                rng, length=beam.length, n_vehicles=t.n_vehicles, rate=t.rate, mean_mass=t.mean_mass,
                mean_velocity=t.mean_velocity, sensor_velocity=s.velocity, sensor_mass=s.carrier_mass,
                dt=s.dt)
        rec = simulate_moving_masses(beam, traffic, s.velocity, entry, dt=s.dt, noise=s.noise, rng=rng)
        return RunOutput(index, rec, traffic=traffic)
    fe = fe_assemble(beam, cfg.beam.n_elements)
    rec = simulate_vbi(vbi_case(cfg), rng, fe, sensor_dt=s.dt, h=cfg.vbi.step)
    return RunOutput(index, rec)


def identify(cfg: ExperimentConfig, runs: list[RunOutput], estimator: str | None = None) -> IdentifiedModes:
    """Identify frequencies, damping and shapes with the chosen estimator.

    ``nls`` needs the known input of a single run (the first is used);
    ``sd`` and ``eps`` need an ensemble of at least two runs.
    """
    est = estimator or cfg.resolved_estimator
    band = tuple(cfg.identify.band) if cfg.identify.band is not None else None
    hints = true_omegas(cfg) if cfg.identify.model_hints else None
    if not runs:
        raise PreconditionError("no runs to identify")
    if est == "nls":
        run = runs[0]
        if run.force is not None:
            excitation = FixedForce(run.force, cfg.force.location)
        elif run.traffic is not None:
            excitation = KnownTraffic(run.traffic)
        else:
            raise PreconditionError("nls needs a known excitation (fixed force or moving masses)")
        return identify_known(run.record, excitation, beam_spec(cfg), n_modes=cfg.beam.n_modes,
                              n_basis=cfg.identify.n_basis, band=band, hints=hints, n_grid=cfg.identify.grid_points,
                              refine_modal=cfg.identify.refine_modal)
    if est not in ("sd", "eps"):
        raise PreconditionError(f"unknown estimator {est!r}")
    if len(runs) < 2:
        raise PreconditionError(f"{est} needs an ensemble of at least two runs")
    res = identify_statistical([r.record for r in runs], length=cfg.beam.length, n_modes=cfg.beam.n_modes,
                               band=band, hints=hints, eps_decimate=cfg.identify.eps_decimate,
                               min_runs=min(10, len(runs)))
    return res.sd if est == "sd" else res.eps


def truth_table(cfg: ExperimentConfig, modes: IdentifiedModes) -> dict:
    """Comparison of identified modes with the analytic reference."""
    x = modes.x
    ref = truth_shapes(cfg.beam.length, x, cfg.beam.n_modes)
    if modes.estimator != "NLS":
        ref = np.abs(ref)
    out = modes.compare(ref)
    out["omega_true"] = true_omegas(cfg).tolist()
    out["omega_error"] = (np.asarray(modes.omegas) / true_omegas(cfg) - 1).tolist()
    return out
