"""Simply supported Euler-Bernoulli beam: analytic modes and a Hermite FE model.

Sign convention used throughout the package: transverse displacement is
positive upward, so gravity loads are negative.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

G = 9.81


@dataclass(frozen=True)
class BeamSpec:
    """Uniform simply supported beam.

    Damping is given either as per-mode ratios (``zetas``) or as a Rayleigh
    pair (``rayleigh = (alpha, beta)``).
    """

    length: float
    mass_per_length: float
    flexural_rigidity: float
    n_modes: int = 4
    zetas: tuple[float, ...] | None = None
    rayleigh: tuple[float, float] | None = None

    def __post_init__(self):
        if self.length <= 0 or self.mass_per_length <= 0 or self.flexural_rigidity <= 0:
            raise ValueError("length, mass_per_length and flexural_rigidity must be positive")
        if self.n_modes < 1:
            raise ValueError("n_modes must be >= 1")
        if self.zetas is not None:
            object.__setattr__(self, "zetas", tuple(float(z) for z in self.zetas))
            if any(not 0.0 <= z < 1.0 for z in self.zetas):
                raise ValueError("damping ratios must lie in [0, 1)")
        if self.zetas is not None and self.rayleigh is not None:
            raise ValueError("give either zetas or rayleigh, not both")

    def damping_ratio(self, n: int) -> float:
        if self.zetas is not None:
            return self.zetas[min(n, len(self.zetas)) - 1]
        if self.rayleigh is not None:
            alpha, beta = self.rayleigh
            w = natural_frequency(self, n)
            return alpha / (2 * w) + beta * w / 2
        return 0.0


def natural_frequency(beam: BeamSpec, n: int) -> float:
    """Circular natural frequency (rad/s) of mode ``n`` (1-based)."""
    if n < 1:
        raise ValueError("mode index must be >= 1")
    return (n * np.pi / beam.length) ** 2 * np.sqrt(beam.flexural_rigidity / beam.mass_per_length)


def mode_shape_analytic(n: int, x, length: float):
    """sin(n pi x / L); raises for positions off the span."""
    x = np.asarray(x, dtype=float)
    tol = 1e-9 * length
    if np.any(x < -tol) or np.any(x > length + tol):
        raise ValueError("position outside the span")
    return np.sin(n * np.pi * x / length)


def modal_mass(beam: BeamSpec, n: int = 1) -> float:
    """Modal mass of a sine mode on a uniform beam, m L / 2."""
    return beam.mass_per_length * beam.length / 2.0


@dataclass(frozen=True)
class ModalModel:
    length: float
    omegas: np.ndarray
    zetas: np.ndarray
    modal_masses: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.omegas) <= 0):
            raise ValueError("natural frequencies must be strictly increasing")
        if np.any(self.modal_masses <= 0):
            raise ValueError("modal masses must be positive")

    @property
    def n_modes(self) -> int:
        return len(self.omegas)

    @property
    def omega_d(self) -> np.ndarray:
        return self.omegas * np.sqrt(1.0 - self.zetas**2)

    def shape(self, n: int, x):
        return np.sin(n * np.pi * np.asarray(x, dtype=float) / self.length)


def modal_model(beam: BeamSpec, n_modes: int | None = None) -> ModalModel:
    n_modes = beam.n_modes if n_modes is None else n_modes
    idx = range(1, n_modes + 1)
    return ModalModel(
        length=beam.length,
        omegas=np.array([natural_frequency(beam, n) for n in idx]),
        zetas=np.array([beam.damping_ratio(n) for n in idx]),
        modal_masses=np.array([modal_mass(beam, n) for n in idx]),
    )


def rayleigh_from_targets(frequencies, target_zeta) -> tuple[float, float]:
    """Least-squares Rayleigh pair matching ``zeta(w) = a/(2w) + b w/2``.

    ``target_zeta`` may be a scalar (same ratio for every mode) or one value
    per frequency.
    """
    w = np.asarray(frequencies, dtype=float)
    if len(np.unique(w)) < 2:
        raise ValueError("need at least two distinct frequencies")
    z = np.broadcast_to(np.asarray(target_zeta, dtype=float), w.shape)
    A = np.column_stack([1.0 / (2.0 * w), w / 2.0])
    (alpha, beta), *_ = np.linalg.lstsq(A, z, rcond=None)
    return float(alpha), float(beta)


def hermite_shape(xi, le: float, derivative: bool = False) -> np.ndarray:
    """Cubic Hermite shape functions on an element of length ``le``.

    Returns an array of shape ``(..., 4)`` ordered (w_i, theta_i, w_j,
    theta_j). With ``derivative=True`` the spatial derivative is returned.
    """
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < -1e-12 * le) or np.any(xi > le * (1 + 1e-12)):
        raise ValueError("local coordinate outside the element")
    s = xi / le
    if derivative:
        return np.stack([
            (-6 * s + 6 * s**2) / le,
            1 - 4 * s + 3 * s**2,
            (6 * s - 6 * s**2) / le,
            -2 * s + 3 * s**2,
        ], axis=-1)
    return np.stack([
        1 - 3 * s**2 + 2 * s**3,
        le * (s - 2 * s**2 + s**3),
        3 * s**2 - 2 * s**3,
        le * (s**3 - s**2),
    ], axis=-1)


def element_matrices(beam: BeamSpec, le: float) -> tuple[np.ndarray, np.ndarray]:
    """Consistent mass and stiffness matrices of one beam element."""
    m = beam.mass_per_length * le / 420.0
    me = m * np.array([
        [156, 22 * le, 54, -13 * le],
        [22 * le, 4 * le**2, 13 * le, -3 * le**2],
        [54, 13 * le, 156, -22 * le],
        [-13 * le, -3 * le**2, -22 * le, 4 * le**2],
    ])
    k = beam.flexural_rigidity / le**3
    ke = k * np.array([
        [12, 6 * le, -12, 6 * le],
        [6 * le, 4 * le**2, -6 * le, 2 * le**2],
        [-12, -6 * le, 12, -6 * le],
        [6 * le, 2 * le**2, -6 * le, 4 * le**2],
    ])
    return me, ke


def assemble_global(beam: BeamSpec, n_elements: int) -> tuple[np.ndarray, np.ndarray]:
    """Unconstrained global (M, K) with DOFs (w0, th0, w1, th1, ...)."""
    le = beam.length / n_elements
    me, ke = element_matrices(beam, le)
    ndof = 2 * (n_elements + 1)
    M = np.zeros((ndof, ndof))
    K = np.zeros((ndof, ndof))
    for e in range(n_elements):
        sl = slice(2 * e, 2 * e + 4)
        M[sl, sl] += me
        K[sl, sl] += ke
    return M, K


@dataclass(frozen=True)
class FeBeam:
    """Simply supported Hermite FE beam restricted to its active DOFs."""

    beam: BeamSpec
    n_elements: int
    M: np.ndarray
    K: np.ndarray
    C: np.ndarray
    active: np.ndarray  # global DOF numbers kept after constraints
    rayleigh: tuple[float, float]
    global_to_active: np.ndarray = field(repr=False)

    @property
    def le(self) -> float:
        return self.beam.length / self.n_elements

    @property
    def n_dof(self) -> int:
        return len(self.active)

    def element_dofs(self, e: int) -> np.ndarray:
        """Active indices of element ``e``'s four DOFs (-1 where constrained)."""
        return self.global_to_active[2 * e:2 * e + 4]

    def locate(self, x):
        """Element index and local coordinate for span positions ``x``."""
        x = np.asarray(x, dtype=float)
        e = np.clip(np.floor(x / self.le).astype(int), 0, self.n_elements - 1)
        return e, x - e * self.le

    def shape_vector(self, x: float, derivative: bool = False) -> np.ndarray:
        """Hermite interpolation vector over active DOFs at position ``x``."""
        e, xi = self.locate(x)
        vals = hermite_shape(xi, self.le, derivative=derivative)
        out = np.zeros(self.n_dof)
        dofs = self.element_dofs(int(e))
        keep = dofs >= 0
        out[dofs[keep]] = vals[keep]
        return out

    def eigen(self, n_modes: int | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Circular frequencies and mass-normalised mode vectors, ascending."""
        w2, vecs = scipy.linalg.eigh(self.K, self.M)
        order = np.argsort(w2)
        w2, vecs = w2[order], vecs[:, order]
        if n_modes is not None:
            w2, vecs = w2[:n_modes], vecs[:, :n_modes]
        return np.sqrt(np.clip(w2, 0.0, None)), vecs

    def static(self, load: np.ndarray) -> np.ndarray:
        return np.linalg.solve(self.K, load)


def fe_assemble(beam: BeamSpec, n_elements: int, rayleigh: tuple[float, float] | None = None) -> FeBeam:
    """Assemble the simply supported FE beam with ``C = alpha M + beta K``.

    Without an explicit Rayleigh pair, the beam's own pair is used, or one is
    fitted to its per-mode ratios over the analytic frequencies.
    """
    if n_elements < 4:
        raise ValueError("n_elements must be >= 4")
    M, K = assemble_global(beam, n_elements)
    ndof = M.shape[0]
    constrained = [0, ndof - 2]
    active = np.array([i for i in range(ndof) if i not in constrained])
    g2a = -np.ones(ndof, dtype=int)
    g2a[active] = np.arange(len(active))
    Ma = M[np.ix_(active, active)]
    Ka = K[np.ix_(active, active)]
    if np.linalg.cond(Ka) > 1e14:
        raise np.linalg.LinAlgError("constrained stiffness matrix is singular")
    if rayleigh is None:
        if beam.rayleigh is not None:
            rayleigh = beam.rayleigh
        elif beam.zetas is not None:
            n = max(2, len(beam.zetas))
            freqs = [natural_frequency(beam, i) for i in range(1, n + 1)]
            zs = [beam.damping_ratio(i) for i in range(1, n + 1)]
            rayleigh = rayleigh_from_targets(freqs, zs)
        else:
            rayleigh = (0.0, 0.0)
    alpha, beta = rayleigh
    return FeBeam(
        beam=beam, n_elements=n_elements, M=Ma, K=Ka, C=alpha * Ma + beta * Ka,
        active=active, rayleigh=(float(alpha), float(beta)), global_to_active=g2a,
    )
