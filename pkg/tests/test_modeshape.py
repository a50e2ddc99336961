import json
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bridgescan.beam import BeamSpec, modal_model
from bridgescan.bop import eval_basis, make_basis
from bridgescan.response import SensorTrajectory, duhamel_fixed_force, q_from_force
from bridgescan.sigproc import build_eps
from bridgescan.modeshape import (FixedForce, IdentifiedModes, assign_signs, correlation, eps_modeshape,
                                  fit_bop_weights, mac, node_indices, normalize, sd_modeshape,
                                  shapes_from_weights)

from conftest import sine_truth


class TestComparison:
    def test_mac_identity_and_scale(self, rng):
        a = rng.normal(size=50)
        assert mac(a, a) == pytest.approx(1.0)
        assert mac(a, -3.0 * a) == pytest.approx(1.0)

    def test_mac_of_orthogonal_sines(self):
        x = np.linspace(0, 10, 501)
        s = sine_truth(10, x)
        for i in range(4):
            for j in range(i + 1, 4):
                assert mac(s[i], s[j]) < 0.01

    @given(st.lists(st.floats(-10, 10), min_size=3, max_size=20), st.floats(0.1, 5))
    def test_mac_bounds(self, a, c):
        a = np.array(a)
        b = c * a[::-1] + 1.0
        if a @ a > 1e-9:
            assert 0.0 <= mac(a, b) <= 1.0 + 1e-12

    def test_mac_errors(self):
        with pytest.raises(ValueError):
            mac([1, 2], [1, 2, 3])
        with pytest.raises(ValueError):
            mac([0, 0], [1, 2])

    def test_correlation_and_normalize(self):
        x = np.linspace(0, 1, 20)
        assert correlation(x, 2 * x + 1) == pytest.approx(1.0)
        np.testing.assert_allclose(normalize([1.0, -4.0, 2.0]), [-0.25, 1.0, -0.5])


class TestIdentifiedModes:
    def _modes(self):
        x = np.linspace(0, 10, 11)
        return IdentifiedModes([15.0, 60.0], [0.02, 0.02], x, 3 * sine_truth(10, x, 2), "SD")

    def test_normalized_and_compare(self):
        m = self._modes().normalized()
        assert np.abs(m.shapes).max(axis=1) == pytest.approx([1.0, 1.0])
        cmp = m.compare(sine_truth(10, m.x, 2))
        assert cmp["mac"] == pytest.approx([1.0, 1.0])

    def test_summary_and_csv(self, tmp_path):
        m = self._modes()
        m.write_summary(tmp_path / "s.json", truth=sine_truth(10, m.x, 2))
        data = json.loads((tmp_path / "s.json").read_text())
        assert data["estimator"] == "SD" and len(data["mac"]) == 2
        m.to_csv(tmp_path / "s.csv")
        rows = (tmp_path / "s.csv").read_text().splitlines()
        assert rows[0] == "x,phi1,phi2" and len(rows) == 12

    def test_validation(self):
        with pytest.raises(ValueError):
            IdentifiedModes([1.0], [0.1], [0, 1], [[1, 2]], "FFT")
        with pytest.raises(ValueError):
            IdentifiedModes([1.0, 2.0], [0.1, 0.1], [0, 1], [[1, 2]], "SD")


class TestNls:
    def test_shapes_from_weights(self):
        basis = make_basis(8)
        x = np.linspace(0, 10, 21)
        w = np.zeros((1, 8))
        w[0, 2] = 2.0
        np.testing.assert_allclose(shapes_from_weights(w, basis, x, 10)[0], 2 * eval_basis(basis, x, 10)[:, 2])

    def test_single_mode_fit(self, rng):
        beam = BeamSpec(10.0, 6.1, 152.67e3, 1, zetas=(0.02,))
        mm = modal_model(beam)
        traj = SensorTrajectory.spanning(10.0, 1.0, 2e-3, entry_time=2.0)
        force = rng.normal(size=traj.n_samples + 1000)
        rec = duhamel_fixed_force(mm, force, 3.3, traj)
        fit = fit_bop_weights(rec, mm.omegas * 1.01, [0.03], FixedForce(force, 3.3), make_basis(8),
                              length=10.0, mass_per_length=6.1)
        shape = shapes_from_weights(fit.weights, make_basis(8), rec.positions, 10.0)[0]
        assert mac(shape, np.sin(np.pi * rec.positions / 10)) > 0.999
        assert fit.omegas[0] == pytest.approx(mm.omegas[0], rel=1e-4)
        assert fit.zetas[0] == pytest.approx(0.02, rel=1e-3)
        assert np.all(np.diff(fit.history) <= 0)

    def test_invalid_inputs(self, rng):
        mm = modal_model(BeamSpec(10.0, 6.1, 152.67e3, 1, zetas=(0.02,)))
        traj = SensorTrajectory.spanning(10.0, 1.0, 2e-3)
        force = rng.normal(size=traj.n_samples)
        rec = duhamel_fixed_force(mm, force, 3.3, traj)
        kw = dict(length=10.0, mass_per_length=6.1)
        with pytest.raises(ValueError):
            fit_bop_weights(rec, [15.0], [0.0], FixedForce(force, 3.3), make_basis(8), **kw)
        with pytest.raises(ValueError):
            fit_bop_weights(rec, np.arange(1, 10.0), [0.02] * 9, FixedForce(force, 3.3), make_basis(8), **kw)
        with pytest.raises(ValueError):
            fit_bop_weights(rec, [15.0], [0.02], FixedForce(force[:10], 3.3), make_basis(8), **kw)
        with pytest.raises(TypeError):
            fit_bop_weights(rec, [15.0], [0.02], object(), make_basis(8), **kw)


class TestStatisticalShapes:
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_sd_of_separable_ensemble(self, rng, n):
        x = np.linspace(0, 10, 400)
        phi = np.sin(n * np.pi * x / 10)
        X = rng.normal(size=(200, x.size)) * phi
        assert correlation(sd_modeshape(X), np.abs(phi)) > 0.95

    def test_sd_needs_runs(self, rng):
        with pytest.raises(ValueError):
            sd_modeshape(rng.normal(size=(5, 50)))

    @pytest.mark.parametrize("n", [1, 2])
    def test_eps_of_separable_ensemble(self, rng, n):
        dt, w0 = 0.01, 30.0
        x = np.linspace(0, 10, 600)
        phi = np.sin(n * np.pi * x / 10)
        q = np.array([q_from_force(rng.normal(size=x.size + 500), dt, w0, 0.05, 1.0)[500:] for _ in range(60)])
        eps = build_eps(q * phi, dt)
        assert correlation(eps_modeshape(eps, w0, half_band=0.05 * w0), np.abs(phi)) > 0.9

    def test_eps_outside_grid(self, rng):
        eps = build_eps(rng.normal(size=(3, 20)), 0.01)
        with pytest.raises(ValueError):
            eps_modeshape(eps, 1e6)


class TestSigns:
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_recovers_sine_signs(self, n):
        x = np.linspace(0, 10, 201)
        phi = np.sin(n * np.pi * x / 10)
        signed = assign_signs(np.abs(phi))
        assert len(node_indices(np.abs(phi))) == n - 1
        assert mac(signed, phi) > 0.999

    def test_ambiguous_dip_warns(self):
        x = np.linspace(0, 1, 101)
        s = 1.0 - 0.7 * np.exp(-((x - 0.5) / 0.05) ** 2)
        with pytest.warns(UserWarning):
            out = assign_signs(s)
        np.testing.assert_array_equal(out, s)

    def test_plain_profile_is_silent(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            assign_signs(np.sin(np.linspace(0, np.pi, 50)))

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            assign_signs([1.0, -0.1, 1.0])
