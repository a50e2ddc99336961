import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from bridgescan.traffic import (TrafficRealization, Vehicle, latin_hypercube, run_rng, sample_arrivals,
                                sample_vehicles, scripted_stream)


class TestArrivals:
    def test_zero_rate_is_empty(self, rng):
        assert sample_arrivals(0.0, 100.0, rng).size == 0

    def test_mean_count(self):
        counts = [sample_arrivals(1.0, 1000.0, run_rng(7, i)).size for i in range(200)]
        assert 950 <= np.mean(counts) <= 1050

    def test_gaps_exponential(self):
        a = sample_arrivals(1.0, 0.0, run_rng(3, 0), n=10_000)
        gaps = np.diff(np.concatenate([[0.0], a]))
        assert stats.kstest(gaps, "expon").pvalue > 0.01

    def test_sorted_and_inside_horizon(self, rng):
        a = sample_arrivals(2.0, 50.0, rng, start=-10.0)
        assert np.all(np.diff(a) >= 0)
        assert a.min() >= -10.0 and a.max() < 40.0

    def test_negative_rate(self, rng):
        with pytest.raises(ValueError):
            sample_arrivals(-1.0, 10.0, rng)


class TestVehicles:
    def test_mass_bounds(self):
        tr = sample_vehicles(25, mean_mass=1.0, mean_velocity=2.0, rng=run_rng(0, 0))
        m = np.array([v.mass for v in tr.vehicles])
        v = np.array([v.velocity for v in tr.vehicles])
        assert np.all((m >= 0.8) & (m <= 1.2))
        assert np.all((v >= 1.95) & (v <= 2.05))

    def test_zero_spread(self, rng):
        tr = sample_vehicles(10, mean_mass=3.0, mean_velocity=5.0, rng=rng, mass_spread=0, velocity_spread=0)
        assert {v.mass for v in tr.vehicles} == {3.0}
        assert {v.velocity for v in tr.vehicles} == {5.0}

    @given(st.integers(1, 60), st.integers(0, 2**32 - 1))
    def test_latin_hypercube_strata(self, n, seed):
        u = latin_hypercube(n, 2, np.random.default_rng(seed))
        for d in range(2):
            assert sorted(np.floor(u[:, d] * n).astype(int)) == list(range(n))

    def test_vehicle_damping_from_ratio(self, rng):
        tr = sample_vehicles(3, mean_mass=1500.0, mean_velocity=20.0, rng=rng, stiffness=170e3, damping_ratio=0.2)
        for v in tr.vehicles:
            assert v.damping == pytest.approx(2 * 0.2 * np.sqrt(170e3 * v.mass))

    def test_same_seed_same_stream(self):
        a = sample_vehicles(20, mean_mass=1.0, mean_velocity=2.0, rng=run_rng(11, 4))
        b = sample_vehicles(20, mean_mass=1.0, mean_velocity=2.0, rng=run_rng(11, 4))
        assert a == b

    def test_runs_differ(self):
        a = sample_vehicles(20, mean_mass=1.0, mean_velocity=2.0, rng=run_rng(11, 0))
        b = sample_vehicles(20, mean_mass=1.0, mean_velocity=2.0, rng=run_rng(11, 1))
        assert a != b

    @pytest.mark.parametrize("kw", [dict(mean_mass=0.0), dict(mean_velocity=-1.0), dict(mass_spread=1.0)])
    def test_invalid_parameters(self, rng, kw):
        args = dict(mean_mass=1.0, mean_velocity=2.0) | kw
        with pytest.raises(ValueError):
            sample_vehicles(5, rng=rng, **args)


class TestScripted:
    def test_five_mass_script(self):
        tr = scripted_stream([1] * 5, [1, 0.5, 2, 1.5, 4], [1] * 5)
        assert [v.velocity for v in tr.vehicles] == [1, 0.5, 2, 1.5, 4]
        assert [v.arrival for v in tr.vehicles] == [1, 2, 3, 4, 5]
        assert {v.mass for v in tr.vehicles} == {1.0}

    def test_empty(self):
        assert scripted_stream([], [], []).n_vehicles == 0

    def test_single_mass_position(self):
        v = scripted_stream([2.0], [3.0], [0.0]).vehicles[0]
        assert v.position(1.5) == pytest.approx(4.5)
        assert np.isnan(v.position(5.0, length=10.0))
        assert v.window(10.0) == pytest.approx((0.0, 10 / 3))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            scripted_stream([1, 1], [1], [1, 1])

    def test_csv_round_trip(self, tmp_path, rng):
        tr = sample_vehicles(6, mean_mass=1500.0, mean_velocity=20.0, rng=rng, stiffness=1e5, damping_ratio=0.2)
        tr.to_csv(tmp_path / "t.csv")
        assert TrafficRealization.from_csv(tmp_path / "t.csv") == tr

    def test_unsorted_rejected(self):
        with pytest.raises(ValueError):
            TrafficRealization((Vehicle(1, 1, 2.0), Vehicle(1, 1, 1.0)))

    def test_merged_is_sorted(self):
        a = scripted_stream([1, 1], [1, 1], [1, 2])
        b = scripted_stream([2], [1], [2])
        assert [v.arrival for v in a.merged(b).vehicles] == [1, 2, 3]
