"""Neumann eigenbasis of ``A = -d^2/dx^2 + lambda_d(x)`` on [0, 1].

Two constructions are provided: the closed form for a constant degradation
rate (cosines, unit-normalised) and a finite-difference Sturm-Liouville solve
for general continuous rates. Both return an :class:`EigenBasis` whose modes
are orthonormal under the trapezoid rule on the basis grid.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.linalg import LinAlgError, eigh_tridiagonal

from .rates import RateFunction, RateFunctions

__all__ = [
    "EigenBasis",
    "SpectralCoefficients",
    "build_constant_basis",
    "build_numeric_basis",
    "build_basis",
    "project_function",
    "spectral_coefficients",
    "check_assumption2",
    "trapezoid_weights",
]

log = logging.getLogger(__name__)

DEFAULT_GRID = 1024


def trapezoid_weights(grid: np.ndarray) -> np.ndarray:
    h = grid[1] - grid[0]
    w = np.full(grid.size, h)
    w[0] = w[-1] = h / 2
    return w


@dataclass(frozen=True)
class EigenBasis:
    """First ``N`` eigenpairs of the Neumann operator.

    Attributes
    ----------
    alphas : ndarray, shape (N,)
        Eigenvalues, ascending.
    grid : ndarray, shape (M,)
        Uniform quadrature grid on [0, 1] including both end points.
    values : ndarray, shape (N, M)
        Mode values on ``grid``.
    masses : ndarray, shape (N,)
        Integrals ``m_k`` of each mode over [0, 1].
    closed_form : bool
        True for the cosine basis of a constant degradation rate.
    """

    alphas: np.ndarray
    grid: np.ndarray
    values: np.ndarray
    masses: np.ndarray
    closed_form: bool
    lambda_d_const: float | None = None

    @property
    def N(self) -> int:
        return self.alphas.size

    @property
    def weights(self) -> np.ndarray:
        return trapezoid_weights(self.grid)

    def __call__(self, k: int, x) -> np.ndarray:
        """Evaluate mode ``k`` (0-based) at points ``x``."""
        x = np.asarray(x, dtype=float)
        if self.closed_form:
            if k == 0:
                return np.ones_like(x)
            return np.sqrt(2.0) * np.cos(k * np.pi * x)
        return np.interp(x, self.grid, self.values[k])

    def evaluate(self, x) -> np.ndarray:
        """All modes at points ``x``; returns shape ``x.shape + (N,)``."""
        x = np.asarray(x, dtype=float)
        return np.stack([self(k, x) for k in range(self.N)], axis=-1)

    def gram(self) -> np.ndarray:
        return (self.values * self.weights) @ self.values.T

    def to_rows(self) -> list[dict]:
        return [
            {"k": k + 1, "alpha_k": float(a), "m_k": float(m)}
            for k, (a, m) in enumerate(zip(self.alphas, self.masses))
        ]


def build_constant_basis(lambda_d_const: float, N: int, grid_size: int = DEFAULT_GRID) -> EigenBasis:
    """Cosine eigenbasis for a constant degradation rate.

    ``xi_1 = 1`` and ``xi_k = sqrt(2) cos((k-1) pi x)``, with eigenvalues
    ``(k-1)^2 pi^2 + lambda_d``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if lambda_d_const < 0:
        raise ValueError("lambda_d must be nonnegative")
    if grid_size < 16:
        raise ValueError("grid_size must be >= 16")
    k = np.arange(N)
    alphas = (k * np.pi) ** 2 + float(lambda_d_const)
    grid = np.linspace(0.0, 1.0, grid_size)
    values = np.cos(np.outer(k, grid) * np.pi)
    values[1:] *= np.sqrt(2.0)
    masses = np.zeros(N)
    masses[0] = 1.0
    return EigenBasis(alphas, grid, values, masses, True, float(lambda_d_const))


def _fd_eigenpairs(potential: np.ndarray, h: float, count: int):
    """Eigenpairs of the ghost-node Neumann discretisation.

    The row-wise scheme is ``W^{-1} S`` with ``S`` symmetric tridiagonal and
    ``W`` the trapezoid weights (in units of ``h``). Solving the symmetric
    similarity transform ``W^{-1/2} S W^{-1/2}`` gives vectors that are
    orthonormal in the trapezoid inner product after rescaling.
    """
    M = potential.size
    w = np.ones(M)
    w[0] = w[-1] = 0.5
    s_diag = 2.0 / h**2 + potential
    s_diag[0] = 1.0 / h**2 + 0.5 * potential[0]
    s_diag[-1] = 1.0 / h**2 + 0.5 * potential[-1]
    s_off = np.full(M - 1, -1.0 / h**2)
    sw = 1.0 / np.sqrt(w)
    d = s_diag * sw * sw
    e = s_off * sw[:-1] * sw[1:]
    vals, vecs = eigh_tridiagonal(d, e, select="i", select_range=(0, count - 1))
    vecs = vecs * sw[:, None] / np.sqrt(h)
    return vals, vecs.T


def build_numeric_basis(lambda_d, N: int, grid_size: int = 2048) -> EigenBasis:
    """Finite-difference eigenbasis for a continuous degradation rate.

    The three-point eigenvalues carry an ``O(k^4 h^2)`` bias; it is removed with
    the asymptotic correction ``(k pi)^2 - (4/h^2) sin^2(k pi h / 2)``, which is
    exact for constant potentials. Eigenvectors are the discrete ones, signed
    so that ``xi_k(0) > 0``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    if grid_size < 8 * N:
        raise ValueError("grid_size must be >= 8 N")
    if N > grid_size // 4:
        raise ValueError("requested modes are under-resolved on this grid")
    grid = np.linspace(0.0, 1.0, grid_size)
    h = grid[1] - grid[0]
    pot = np.asarray(lambda_d(grid), dtype=float)
    pot = np.broadcast_to(pot, grid.shape).astype(float)
    if np.any(pot < 0):
        raise ValueError("lambda_d must be nonnegative")
    try:
        vals, vecs = _fd_eigenpairs(pot, h, N)
    except LinAlgError as exc:  # pragma: no cover - LAPACK failure
        raise RuntimeError(f"eigen-solve did not converge: {exc}") from exc
    k = np.arange(N)
    vals = vals + (k * np.pi) ** 2 - (4.0 / h**2) * np.sin(k * np.pi * h / 2) ** 2
    signs = np.where(vecs[:, 0] < 0, -1.0, 1.0)
    vecs = vecs * signs[:, None]
    order = np.argsort(vals, kind="stable")
    vals, vecs = vals[order], vecs[order]
    masses = vecs @ trapezoid_weights(grid)
    return EigenBasis(vals, grid, vecs, masses, False, None)


def build_basis(lambda_d: RateFunction, N: int, grid_size: int | None = None) -> EigenBasis:
    """Closed-form basis when ``lambda_d`` is constant, numeric otherwise."""
    if lambda_d.is_constant:
        return build_constant_basis(lambda_d.value, N, grid_size or DEFAULT_GRID)
    return build_numeric_basis(lambda_d, N, grid_size or 2048)


def project_function(f, basis: EigenBasis) -> np.ndarray:
    """Coefficients ``<f, xi_k>`` by trapezoid quadrature on the basis grid."""
    fx = np.broadcast_to(np.asarray(f(basis.grid), dtype=float), basis.grid.shape)
    return basis.values @ (fx * basis.weights)


@dataclass(frozen=True)
class SpectralCoefficients:
    d: np.ndarray
    c: np.ndarray
    gamma: float
    zeta_hat: np.ndarray
    N0_residual: float

    def to_dict(self) -> dict:
        return {
            "d": self.d.tolist(),
            "c": self.c.tolist(),
            "gamma": self.gamma,
            "zeta_hat": self.zeta_hat.tolist(),
            "N0_residual": self.N0_residual,
        }


def _projection_residual(f, basis: EigenBasis) -> float:
    coef = project_function(f, basis)
    fx = np.broadcast_to(np.asarray(f(basis.grid), dtype=float), basis.grid.shape)
    r = fx - coef @ basis.values
    return float(np.sqrt(trapezoid(r * r, basis.grid)))


def spectral_coefficients(rates: RateFunctions, basis: EigenBasis) -> SpectralCoefficients:
    d = project_function(rates.lambda_d, basis)
    c = project_function(rates.lambda_c, basis)
    zeta_hat = project_function(rates.zeta, basis)
    residual = _projection_residual(rates.lambda_d, basis)
    return SpectralCoefficients(d, c, rates.gamma, zeta_hat, residual)


def check_assumption2(rates: RateFunctions, basis: EigenBasis, tol: float = 1e-8) -> dict:
    """Does the degradation rate lie in the span of the first ``N`` modes?"""
    residual = spectral_coefficients(rates, basis).N0_residual
    satisfied = residual <= tol
    if not satisfied:
        log.warning("lambda_d is not in the span of %d modes (residual %.3e)", basis.N, residual)
    return {"satisfied": bool(satisfied), "residual": residual}
