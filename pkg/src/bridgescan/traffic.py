"""Vehicle streams: Poisson arrivals, Latin hypercube mass/velocity draws,
and scripted deterministic streams."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np


@dataclass(frozen=True)
class Vehicle:
    mass: float
    velocity: float
    arrival: float
    stiffness: float | None = None
    damping: float | None = None

    def __post_init__(self):
        if self.mass <= 0 or self.velocity <= 0:
            raise ValueError("vehicle mass and velocity must be positive")
        if self.stiffness is not None and self.stiffness <= 0:
            raise ValueError("suspension stiffness must be positive")
        if self.damping is not None and self.damping < 0:
            raise ValueError("suspension damping must be non-negative")

    def position(self, t, length: float | None = None):
        """Distance travelled onto the span, ``v (t - a)``.

        With ``length`` given, positions off the span are returned as NaN.
        """
        x = self.velocity * (np.asarray(t, dtype=float) - self.arrival)
        if length is None:
            return x
        return np.where((x >= 0) & (x <= length), x, np.nan)

    def window(self, length: float) -> tuple[float, float]:
        """Time interval during which the vehicle is on the span."""
        return self.arrival, self.arrival + length / self.velocity


@dataclass(frozen=True)
class TrafficRealization:
    vehicles: tuple[Vehicle, ...] = ()
    seed: int | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        arr = [v.arrival for v in self.vehicles]
        if any(b < a for a, b in zip(arr, arr[1:])):
            raise ValueError("vehicles must be sorted by arrival")

    @property
    def n_vehicles(self) -> int:
        return len(self.vehicles)

    def __len__(self):
        return len(self.vehicles)

    def shifted(self, dt: float) -> "TrafficRealization":
        return replace(self, vehicles=tuple(replace(v, arrival=v.arrival + dt) for v in self.vehicles))

    def merged(self, other: "TrafficRealization") -> "TrafficRealization":
        vs = sorted(self.vehicles + other.vehicles, key=lambda v: v.arrival)
        return TrafficRealization(tuple(vs), seed=self.seed)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["mass", "velocity", "arrival", "k", "c"])
            for v in self.vehicles:
                w.writerow([repr(v.mass), repr(v.velocity), repr(v.arrival),
                            "" if v.stiffness is None else repr(v.stiffness),
                            "" if v.damping is None else repr(v.damping)])

    @classmethod
    def from_csv(cls, path) -> "TrafficRealization":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        vs = [Vehicle(float(r["mass"]), float(r["velocity"]), float(r["arrival"]),
                      float(r["k"]) if r["k"] else None, float(r["c"]) if r["c"] else None)
              for r in rows]
        return cls(tuple(vs))


def run_rng(master_seed: int, run_index: int) -> np.random.Generator:
    """Independent generator for one Monte Carlo run.

    Streams are split with ``SeedSequence(master_seed, spawn_key=(run_index,))``,
    so every run is reproducible on its own.
    """
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(run_index,)))


def sample_arrivals(rate: float, horizon: float, rng: np.random.Generator, start: float = 0.0,
                    n: int | None = None) -> np.ndarray:
    """Homogeneous Poisson arrivals on ``[start, start + horizon)``.

    If ``n`` is given, exactly ``n`` arrivals are drawn from cumulative
    exponential gaps (the horizon is then ignored).
    """
    if rate < 0:
        raise ValueError("rate must be non-negative")
    if rate == 0:
        return np.empty(0)
    if n is not None:
        return start + np.cumsum(rng.exponential(1.0 / rate, size=n))
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    out = []
    t = start
    # draw gaps in blocks until the horizon is passed
    block = max(16, int(rate * horizon * 1.2) + 16)
    while True:
        gaps = rng.exponential(1.0 / rate, size=block)
        times = t + np.cumsum(gaps)
        inside = times[times < start + horizon]
        out.append(inside)
        if inside.size < block:
            break
        t = times[-1]
    return np.concatenate(out)


def latin_hypercube(n: int, dims: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` points in the unit cube, one per stratum in every dimension."""
    u = (rng.random((n, dims)) + np.arange(n)[:, None]) / n
    for d in range(dims):
        u[:, d] = u[rng.permutation(n), d]
    return u


def sample_vehicles(n: int | None = None, *, mean_mass: float, mean_velocity: float,
                    rng: np.random.Generator, mass_spread: float = 0.20, velocity_spread: float = 0.025,
                    rate: float = 1.0, horizon: float | None = None, start: float = 0.0,
                    stiffness: float | None = None, damping_ratio: float | None = None,
                    seed: int | None = None) -> TrafficRealization:
    """Random stream with uniform mass/velocity marginals drawn by LHS.

    Give either a fixed count ``n`` or a ``horizon`` for a Poisson count.
    Suspension damping follows ``c = 2 zeta sqrt(k m)`` when a stiffness and
    damping ratio are supplied.
    """
    if mean_mass <= 0 or mean_velocity <= 0:
        raise ValueError("mean mass and velocity must be positive")
    if not (0 <= mass_spread < 1 and 0 <= velocity_spread < 1):
        raise ValueError("spreads must lie in [0, 1)")
    if n is None:
        if horizon is None:
            raise ValueError("give a vehicle count or a horizon")
        arrivals = sample_arrivals(rate, horizon, rng, start=start)
    else:
        arrivals = sample_arrivals(rate, 0.0, rng, start=start, n=n) if n else np.empty(0)
    k = len(arrivals)
    u = latin_hypercube(k, 2, rng) if k else np.empty((0, 2))
    masses = mean_mass * (1 - mass_spread + 2 * mass_spread * u[:, 0])
    velocities = mean_velocity * (1 - velocity_spread + 2 * velocity_spread * u[:, 1])
    vs = []
    for m, v, a in zip(masses, velocities, arrivals):
        c = None
        if stiffness is not None and damping_ratio is not None:
            c = 2 * damping_ratio * np.sqrt(stiffness * m)
        vs.append(Vehicle(float(m), float(v), float(a), stiffness, None if c is None else float(c)))
    return TrafficRealization(tuple(vs), seed=seed)


def scripted_stream(masses, velocities, lags, start: float = 0.0) -> TrafficRealization:
    """Deterministic stream; ``lags[i]`` is the delay of vehicle i after vehicle i-1
    (the first lag is measured from ``start``)."""
    if not (len(masses) == len(velocities) == len(lags)):
        raise ValueError("masses, velocities and lags must have equal length")
    arrivals = start + np.cumsum(np.asarray(lags, dtype=float))
    return TrafficRealization(tuple(
        Vehicle(float(m), float(v), float(a)) for m, v, a in zip(masses, velocities, arrivals)
    ))
