"""Basic orthonormal polynomials (BOPs) for a simply supported span.

Polynomials live on the unit domain xi in [0, 1] and are stored as ascending
monomial coefficients. Construction runs in exact rational arithmetic so the
Gram matrix is the identity up to the final square-root normalisation.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np

N_CONSTRAINTS = 4


def _solve_exact(A, b):
    """Gaussian elimination over the rationals."""
    n = len(A)
    M = [list(map(Fraction, row)) + [Fraction(v)] for row, v in zip(A, b)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular constraint matrix")
        M[col], M[piv] = M[piv], M[col]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col] / M[col][col]
                M[r] = [a - f * c for a, c in zip(M[r], M[col])]
    return [M[i][n] / M[i][i] for i in range(n)]


def _ss_constraints(x0=Fraction(0), x1=Fraction(1)):
    # rows: value and second derivative at both supports
    return [
        [1, x0, x0**2, x0**3],
        [0, 0, 2, 6 * x0],
        [1, x1, x1**2, x1**3],
        [0, 0, 2, 6 * x1],
    ]


def _ss_rhs(k: int, x0=Fraction(0), x1=Fraction(1)):
    def pw(x, e):
        return Fraction(0) if e < 0 else Fraction(x) ** e
    return [
        -pw(x0, k),
        -k * (k - 1) * pw(x0, k - 2),
        -pw(x1, k),
        -k * (k - 1) * pw(x1, k - 2),
    ]


def basic_polynomials(n_basis: int) -> list[list[Fraction]]:
    """Raw basic polynomials ``P_i = T p_i + xi^(m+i-1)`` as exact coefficients."""
    if n_basis < 1:
        raise ValueError("n_basis must be >= 1")
    m = N_CONSTRAINTS
    C = _ss_constraints()
    out = []
    for i in range(1, n_basis + 1):
        k = m + i - 1
        p = _solve_exact(C, _ss_rhs(k))
        coeffs = [Fraction(0)] * (k + 1)
        coeffs[:m] = p
        coeffs[k] += 1
        out.append(coeffs)
    return out


def _inner(a, b) -> Fraction:
    """Exact integral over [0, 1] of the product of two monomial series."""
    return sum(
        (ca * cb / (i + j + 1) for i, ca in enumerate(a) if ca for j, cb in enumerate(b) if cb),
        Fraction(0),
    )


def _axpy(alpha, x, y):
    n = max(len(x), len(y))
    x = list(x) + [Fraction(0)] * (n - len(x))
    y = list(y) + [Fraction(0)] * (n - len(y))
    return [alpha * xi + yi for xi, yi in zip(x, y)]


@dataclass(frozen=True)
class BopBasis:
    """Orthonormal basis ``Pbar_i = exact_i / norms_i`` on [0, 1]."""

    exact: tuple[tuple[Fraction, ...], ...]
    norms: np.ndarray
    coeffs: np.ndarray  # float, shape (n_basis, max_degree + 1), ascending powers
    centered: np.ndarray  # same polynomials in powers of u = 2 xi - 1

    @property
    def n_basis(self) -> int:
        return len(self.exact)

    def gram(self) -> np.ndarray:
        """Gram matrix of the normalised basis from exact monomial integrals."""
        n = self.n_basis
        G = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                G[i, j] = G[j, i] = float(_inner(self.exact[i], self.exact[j])) / (self.norms[i] * self.norms[j])
        return G

    def __call__(self, xi, derivative: int = 0) -> np.ndarray:
        """Values (or derivatives) at unit-domain points, shape ``(len(xi), n_basis)``."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        # the centred form is far better conditioned than raw monomials
        u = 2.0 * xi - 1.0
        c = self.centered
        for _ in range(derivative):
            c = 2.0 * c[:, 1:] * np.arange(1, c.shape[1])
        out = np.zeros((xi.size, self.n_basis))
        for k in range(c.shape[1] - 1, -1, -1):
            out = out * u[:, None] + c[:, k]
        return out


def _to_centered(coeffs):
    """Exact re-expansion of sum c_a xi^a in powers of u = 2 xi - 1."""
    out = [Fraction(0)] * len(coeffs)
    for a, c in enumerate(coeffs):
        if c:
            for b in range(a + 1):
                out[b] += c * comb(a, b) / Fraction(2) ** a
    return out


def orthonormalize(raw: list[list[Fraction]]) -> BopBasis:
    """Recursive Gram-Schmidt with the exact inner product on [0, 1]."""
    ortho: list[list[Fraction]] = []
    sq_norms: list[Fraction] = []
    for p in raw:
        v = list(p)
        for q, nq in zip(ortho, sq_norms):
            v = _axpy(-_inner(p, q) / nq, q, v)
        nv = _inner(v, v)
        if nv <= 0 or float(nv) < 1e-24:
            raise ValueError("basic polynomials are linearly dependent")
        ortho.append(v)
        sq_norms.append(nv)
    norms = np.sqrt(np.array([float(n) for n in sq_norms]))
    deg = max(len(v) for v in ortho)
    coeffs = np.zeros((len(ortho), deg))
    centered = np.zeros((len(ortho), deg))
    for i, v in enumerate(ortho):
        coeffs[i, :len(v)] = [float(c) for c in v]
        centered[i, :len(v)] = [float(c) for c in _to_centered(v)]
    coeffs /= norms[:, None]
    centered /= norms[:, None]
    return BopBasis(exact=tuple(tuple(v) for v in ortho), norms=norms, coeffs=coeffs, centered=centered)


@lru_cache(maxsize=16)
def make_basis(n_basis: int = 8) -> BopBasis:
    return orthonormalize(basic_polynomials(n_basis))


def eval_basis(basis: BopBasis, x, length: float) -> np.ndarray:
    """Basis values at physical positions ``x`` on a span of ``length``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < -1e-9 * length) or np.any(x > length * (1 + 1e-9)):
        raise ValueError("position outside the span")
    vals = basis(np.clip(x / length, 0.0, 1.0))
    return vals[0] if x.ndim == 0 else vals


def project(basis: BopBasis, func, n_quad: int = 64) -> np.ndarray:
    """L2 projection weights ``w_i = int_0^1 f Pbar_i`` by Gauss-Legendre quadrature."""
    nodes, weights = np.polynomial.legendre.leggauss(n_quad)
    xi = 0.5 * (nodes + 1.0)
    return 0.5 * (weights * func(xi)) @ basis(xi)
