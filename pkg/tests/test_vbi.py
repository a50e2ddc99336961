import numpy as np
import pytest
from scipy.signal import find_peaks

from bridgescan.beam import fe_assemble
from bridgescan.roughness import generate_profile
from bridgescan.traffic import TrafficRealization, Vehicle
from bridgescan.vbi import (CoupledState, VbiScenario, assemble_coupled, contact_force, contact_shape_matrix,
                            integrate, step_for)


@pytest.fixture(scope="module")
def fe10(beam10):
    return fe_assemble(beam10, 20)


def _car(mass=1.0, velocity=10.0, arrival=0.0, freq=3.0, zeta=0.1):
    k = mass * (2 * np.pi * freq) ** 2
    return Vehicle(mass, velocity, arrival, k, 2 * zeta * np.sqrt(k * mass))


def _scenario(fe, vehicles, **kw):
    kw.setdefault("h", step_for(fe, 2e-3))
    return VbiScenario(fe, TrafficRealization(tuple(vehicles)), **kw)


class TestContactMatrix:
    def test_off_span_columns_zero(self, fe10):
        sc = _scenario(fe10, [_car(arrival=0.0), _car(arrival=5.0)])
        N, dN = contact_shape_matrix(sc, 0.3)
        assert np.any(N[:, 0]) and not np.any(N[:, 1]) and not np.any(dN[:, 1])

    def test_node_gives_unit_vector(self, fe10):
        sc = _scenario(fe10, [_car()])
        N, _ = contact_shape_matrix(sc, 0.25)  # x = 2.5 m, an interior node
        np.testing.assert_allclose(N[:, 0], fe10.shape_vector(2.5), atol=1e-14)
        assert np.isclose(N[:, 0].max(), 1.0) and np.count_nonzero(np.abs(N[:, 0]) > 1e-12) == 1

    @pytest.mark.parametrize("t", [0.13, 0.41, 0.777])
    def test_translation_weights_sum_to_one(self, fe10, t):
        sc = _scenario(fe10, [_car()])
        N, _ = contact_shape_matrix(sc, t)
        e, _ = fe10.locate(10.0 * t)
        trans = fe10.element_dofs(int(e))[[0, 2]]
        assert N[trans, 0].sum() == pytest.approx(1.0)


class TestCoupledMatrices:
    def test_static_midspan(self, fe10, beam10):
        m = 2000.0
        sc = _scenario(fe10, [_car(mass=m)])
        M, C, K, F = assemble_coupled(sc, 0.5)
        y = np.linalg.solve(K, F)
        mid = fe10.shape_vector(5.0) @ y[1:]
        expected = -m * sc.g * 10.0**3 / (48 * beam10.flexural_rigidity)
        assert mid == pytest.approx(expected, rel=1e-9)
        # displacements are measured from equilibrium on a rigid road, so the car rides the deck
        assert y[0] == pytest.approx(mid, rel=1e-9)

    def test_contact_force_is_weight_at_rest(self, fe10):
        m = 1500.0
        sc = _scenario(fe10, [_car(mass=m)])
        _, _, K, F = assemble_coupled(sc, 0.5)
        y = np.linalg.solve(K, F)
        st = CoupledState.zeros(1, fe10.n_dof, t=0.5)
        st.yv[:] = y[:1]
        st.yb[:] = y[1:]
        assert contact_force(st, sc, 0) == pytest.approx(-m * sc.g, rel=1e-9)

    def test_contact_force_off_span(self, fe10):
        sc = _scenario(fe10, [_car()])
        with pytest.raises(ValueError):
            contact_force(CoupledState.zeros(1, fe10.n_dof, t=2.0), sc, 0)

    def test_mass_and_damping_symmetric(self, fe10):
        sc = _scenario(fe10, [_car(), _car(arrival=0.3, mass=3.0)])
        M, C, K, _ = assemble_coupled(sc, 0.6)
        np.testing.assert_allclose(M, M.T)
        np.testing.assert_allclose(C, C.T)

    def test_inconsistent_state(self):
        with pytest.raises(ValueError):
            CoupledState(np.zeros(1), np.zeros(2), np.zeros(1), np.zeros(3), np.zeros(3), np.zeros(3), 0.0)


class TestScenarioValidation:
    def test_needs_suspension(self, fe10):
        with pytest.raises(ValueError):
            VbiScenario(fe10, TrafficRealization((Vehicle(1.0, 1.0, 0.0),)), h=1e-4)

    def test_coarse_step(self, fe10):
        with pytest.raises(ValueError):
            _scenario(fe10, [_car()], h=2e-3)

    def test_incommensurate_step(self, fe10):
        with pytest.raises(ValueError):
            _scenario(fe10, [_car()], h=0.3e-3)

    def test_instrumented_index(self, fe10):
        with pytest.raises(ValueError):
            _scenario(fe10, [_car()], instrumented=1)


class TestIntegration:
    def test_free_decay_after_exit(self, fe10):
        f, z = 3.0, 0.05
        sc = _scenario(fe10, [_car(mass=500.0, velocity=20.0, freq=f, zeta=z), _car(velocity=2.0, arrival=0.2)],
                       instrumented=1)
        res = integrate(sc)
        t = res.times
        y = res.vehicle_disp[:, 0][t > 0.5 + 0.2]
        tt = t[t > 0.7]
        peaks, _ = find_peaks(y)
        rate = -np.polyfit(tt[peaks], np.log(y[peaks]), 1)[0]
        assert rate == pytest.approx(z * 2 * np.pi * f, rel=0.02)

    def test_step_halving_converges(self, fe10):
        prof = generate_profile(16e-6, np.random.default_rng(3), kappa_min=0.1, kappa_max=10.0)
        cars = [_car(mass=800.0, velocity=5.0), _car(mass=1200.0, velocity=8.0, arrival=0.4)]
        h = step_for(fe10, 2e-3)
        a = integrate(_scenario(fe10, cars, roughness=prof, h=h)).record.acc
        b = integrate(_scenario(fe10, cars, roughness=prof, h=h / 2)).record.acc
        assert np.sqrt(np.mean((a - b) ** 2) / np.mean(b**2)) < 5e-3

    def test_record_spans_instrumented_crossing(self, fe10):
        res = integrate(_scenario(fe10, [_car(velocity=5.0, arrival=0.1)]))
        assert res.times[0] == pytest.approx(0.1) and res.times[-1] == pytest.approx(2.1)
        assert res.record.positions[-1] == pytest.approx(10.0)
        assert res.record.modal.shape == (4, res.times.size)

    def test_slow_crossing_is_quasi_static(self, fe10, beam10):
        m = 1.0
        res = integrate(_scenario(fe10, [_car(mass=m, velocity=2.0, freq=20.0)]))
        mid = np.argmin(np.abs(res.record.positions - 5.0))
        y = res.bridge_disp[mid] @ fe10.shape_vector(5.0)
        static = -m * 9.81 * 10.0**3 / (48 * beam10.flexural_rigidity)
        assert y == pytest.approx(static, rel=0.05)
