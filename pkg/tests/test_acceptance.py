"""End-to-end acceptance criteria at their stated tolerances, seed 0.

Each test prints one ``CRITERION n: PASS|FAIL`` line with its measured
values before asserting.
"""
import numpy as np
import pytest

from bridgescan.beam import modal_model, natural_frequency
from bridgescan.config import preset
from bridgescan.experiment import beam_spec, identify, simulate_run, true_omegas, truth_table
from bridgescan.modeshape import correlation
from bridgescan.response import modal_qddot
from bridgescan.selftest import run_all
from bridgescan.stationary import StationaryStreamSpec, sigma_ss_qddot, windowed_sd_cov
from bridgescan.studies import beam_10m, fe_bridge, identify_statistical, truth_shapes
from bridgescan.traffic import TrafficRealization, Vehicle, run_rng, sample_arrivals


def _verdict(capsys, n, checks):
    """Print the criterion line; ``checks`` holds (label, ok, detail) triples."""
    ok = all(c[1] for c in checks)
    failed = [f"{label} {detail}" for label, good, detail in checks if not good]
    with capsys.disabled():
        print(f"\nCRITERION {n}: {'PASS' if ok else 'FAIL'}")
        for label, good, detail in checks:
            print(f"    {'ok  ' if good else 'FAIL'} {label}: {detail}")
    return ok, "; ".join(failed)


def _rel(est, ref):
    return np.asarray(est, dtype=float) / np.asarray(ref, dtype=float) - 1


def _statistical(cfg):
    runs = [simulate_run(cfg, i) for i in range(cfg.runs)]
    res = identify_statistical([r.record for r in runs], length=cfg.beam.length, n_modes=cfg.beam.n_modes,
                               band=tuple(cfg.identify.band))
    return runs, res


def _shape_r(modes, length):
    ref = np.abs(truth_shapes(length, modes.x, modes.n_modes))
    return [correlation(s, t) for s, t in zip(modes.shapes, ref)]


def test_criterion_1_frequencies(capsys):
    beam = beam_10m()
    w = np.array([natural_frequency(beam, n) for n in range(1, 5)])
    err10 = _rel(w, [15.61, 62.46, 140.53, 249.82])
    w30, _ = fe_bridge(30).eigen(4)
    err30 = _rel(w30 / (2 * np.pi), [3.83, 15.32, 34.46, 61.26])
    checks = [(f"10 m mode {k + 1}", abs(e) <= 1e-3, f"{w[k]:.3f} rad/s ({e:+.5f}, tol 0.001)")
              for k, e in enumerate(err10)]
    checks += [(f"30 m FE mode {k + 1}", abs(e) <= 5e-3, f"{w30[k] / (2 * np.pi):.3f} Hz ({e:+.5f}, tol 0.005)")
               for k, e in enumerate(err30)]
    ok, why = _verdict(capsys, 1, checks)
    assert ok, why


@pytest.mark.slow
def test_criterion_2_gwn_l5(capsys):
    cfg = preset("gwn-l5")
    modes = identify(cfg, [simulate_run(cfg, 0)])
    table = truth_table(cfg, modes)
    w0 = np.asarray(table["omega_true"])
    efdd_err = _rel(modes.meta["efdd_omega"], w0)
    ratio = modes.zetas / cfg.beam.zeta
    efdd_ratio = np.asarray(modes.meta["efdd_zeta"]) / cfg.beam.zeta
    checks = [(f"EFDD frequency mode {k + 1}", abs(e) <= 0.02, f"{e:+.4f} (tol 0.02)")
              for k, e in enumerate(efdd_err)]
    checks += [(f"NLS MAC mode {k + 1}", m >= (0.90 if k == 0 else 0.95),
                f"{m:.4f} (min {0.90 if k == 0 else 0.95})") for k, m in enumerate(table["mac"])]
    checks.append(("damping mode 1", 0.2 <= ratio[0] <= 5.0,
                   f"zeta/true {ratio[0]:.2f} (EFDD stage {efdd_ratio[0]:.2f}), within factor 5"))
    checks += [(f"damping mode {k + 1}", abs(ratio[k] - 1) <= 0.5,
                f"zeta/true {ratio[k]:.2f} (EFDD stage {efdd_ratio[k]:.2f}), within 50%") for k in range(1, 4)]
    ok, why = _verdict(capsys, 2, checks)
    assert ok, why


@pytest.mark.slow
def test_criterion_3_gwn_midspan(capsys):
    cfg = preset("gwn-mid")
    modes = identify(cfg, [simulate_run(cfg, 0)])
    checks = [(f"mode {n} unexcited", not modes.excited[n - 1], f"flagged {not modes.excited[n - 1]}")
              for n in (2, 4)]
    checks += [(f"mode {n} excited", bool(modes.excited[n - 1]), f"flagged {not modes.excited[n - 1]}")
               for n in (1, 3)]
    ok, why = _verdict(capsys, 3, checks)
    assert ok, why


@pytest.mark.slow
def test_criterion_4_five_masses(capsys):
    cfg = preset("five-mass")
    modes = identify(cfg, [simulate_run(cfg, 0)])
    table = truth_table(cfg, modes)
    checks = [(f"NLS MAC mode {k + 1}", m >= 0.95, f"{m:.4f} (min 0.95)") for k, m in enumerate(table["mac"])]
    ok, why = _verdict(capsys, 4, checks)
    assert ok, why


@pytest.mark.slow
def test_criterion_5_statistical_masses(capsys):
    cfg = preset("stat-mass")
    runs, res = _statistical(cfg)
    mm = modal_model(beam_spec(cfg))
    Q = np.array([modal_qddot(mm, r.traffic, r.record.times) for r in runs])
    cov = [windowed_sd_cov(Q[:, k], 500) for k in range(4)]
    checks = [(f"SD r mode {k + 1}", r >= 0.90, f"{r:.4f} (min 0.90)") for k, r in enumerate(_shape_r(res.sd, 10))]
    checks += [(f"EPS r mode {k + 1}", r >= 0.90, f"{r:.4f} (min 0.90)")
               for k, r in enumerate(_shape_r(res.eps, 10))]
    checks += [(f"q'' SD CoV mode {k + 1}", c < 0.15, f"{c:.4f} (max 0.15)") for k, c in enumerate(cov)]
    ok, why = _verdict(capsys, 5, checks)
    assert ok, why


@pytest.mark.slow
def test_criterion_6_stationary_variance(capsys):
    mm = modal_model(beam_10m(), 1)
    v, rate, n_runs = 2.0, 1.0, 10_000
    T = mm.length / v
    spec = StationaryStreamSpec(rate, 1.0, 1.0, (T,), (1.0,))
    closed = sigma_ss_qddot(spec, mm, 1)
    other = sigma_ss_qddot(spec, mm, 1, t=3.7)
    # arrivals far enough back that earlier crossings have decayed to e^-3
    horizon = 3 / (mm.zetas[0] * mm.omegas[0]) + T
    times = np.array([0.0, 2e-3])  # the second sample only sets the integration step
    samples = np.empty(n_runs)
    for i in range(n_runs):
        a = sample_arrivals(rate, horizon, run_rng(0, i), start=-horizon)
        tr = TrafficRealization(tuple(Vehicle(1.0, v, float(x)) for x in a))
        samples[i] = modal_qddot(mm, tr, times, g=1.0)[0, 0] if len(a) else 0.0
    mc = samples.var()
    checks = [("Monte Carlo variance", abs(mc / closed - 1) <= 0.10,
               f"closed {closed:.5g}, MC {mc:.5g} ({mc / closed - 1:+.4f}, tol 0.10)"),
              ("time independence", abs(other / closed - 1) <= 1e-9, f"{other / closed - 1:+.1e} (tol 1e-9)")]
    ok, why = _verdict(capsys, 6, checks)
    assert ok, why


@pytest.fixture(scope="module")
def tr1():
    return _statistical(preset("tr1"))


@pytest.fixture(scope="module")
def tr2():
    return _statistical(preset("tr2"))


@pytest.mark.slow
def test_criterion_7_vbi_tr1(capsys, tr1):
    _, res = tr1
    w0 = true_omegas(preset("tr1"))
    mean = res.efdd.mean_omega
    err = _rel(mean, w0)
    checks = [(f"EFDD mean frequency mode {k + 1}", abs(e) <= 0.02,
               f"{mean[k] / (2 * np.pi):.3f} Hz vs {w0[k] / (2 * np.pi):.3f} ({e:+.4f}, tol 0.02)")
              for k, e in enumerate(err)]
    checks += [(f"SD r mode {k + 1}", r >= 0.90, f"{r:.4f} (min 0.90)") for k, r in enumerate(_shape_r(res.sd, 30))]
    checks += [(f"EPS r mode {k + 1}", r >= 0.85, f"{r:.4f} (min 0.85)")
               for k, r in enumerate(_shape_r(res.eps, 30))]
    ok, why = _verdict(capsys, 7, checks)
    assert ok, why


@pytest.mark.slow
def test_criterion_8_vbi_tr2(capsys, tr2):
    _, res = tr2
    checks = [(f"SD r mode {k + 1}", r >= 0.85, f"{r:.4f} (min 0.85)") for k, r in enumerate(_shape_r(res.sd, 30))]
    # EPS mode 1 may degrade at this speed; reported, not judged
    checks += [(f"EPS r mode {k + 1} (reported)", True, f"{r:.4f}") for k, r in enumerate(_shape_r(res.eps, 30))]
    ok, why = _verdict(capsys, 8, checks)
    assert ok, why


def test_criterion_9_selftest(capsys):
    checks = [(name, ok, detail) for name, ok, detail in run_all(seed=0)]
    ok, why = _verdict(capsys, 9, checks)
    assert ok, why
