"""Direct Galerkin integration of the projected hierarchy.

The state holds, for each particle number ``n <= n_max``, the coefficients
``r_n(j) = <rho_n(t), xi_{j_1} x ... x xi_{j_n}>`` on sorted multi-indices.
Testing the hierarchy against basis tensors gives the linear system

    dr_0/dt   = sum_k d_k r_1(k) - gamma r_0
    dr_n(j)/dt = -(sum_i alpha_{j_i} + gamma) r_n(j)
                 + (n+1) sum_k d_k r_{n+1}(j, k)
                 + (1/n) sum_i c_{j_i} r_{n-1}(j without slot i)

closed by ``r_{n_max+1} = 0``. The well-mixed chemical master equation and
its closed-form transient law live here too; they are the reference for the
level masses.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu
from scipy.stats import poisson

from .basis import EigenBasis, SpectralCoefficients
from .chaos import ChaosVector, SymmetricKernel, multi_indices, multiplicities
from .errors import NumericalAbort

__all__ = [
    "ProjectedState",
    "BirthDeathState",
    "initial_state",
    "hierarchy_matrix",
    "hierarchy_rhs",
    "integrate_hierarchy",
    "level_mass",
    "cme_generator",
    "cme_integrate",
    "immigration_death_analytic",
    "DEFAULT_N_MAX",
]

log = logging.getLogger(__name__)

DEFAULT_N_MAX = 12


@lru_cache(maxsize=None)
def _offsets(N: int, n_max: int) -> tuple:
    sizes = [len(multi_indices(N, n)) for n in range(n_max + 1)]
    return tuple(np.concatenate([[0], np.cumsum(sizes)]).tolist())


@dataclass(frozen=True)
class ProjectedState:
    """Galerkin coefficients of every level at time ``t``."""

    N: int
    n_max: int
    t: float
    levels: tuple

    def __post_init__(self):
        levels = tuple(self.levels)
        if len(levels) != self.n_max + 1:
            raise ValueError("need one level per particle number 0..n_max")
        for n, lv in enumerate(levels):
            if lv.order != n or lv.dim != self.N:
                raise ValueError(f"level {n} has order {lv.order}, dim {lv.dim}")
        object.__setattr__(self, "levels", levels)

    @classmethod
    def zeros(cls, N: int, n_max: int, t: float = 0.0) -> "ProjectedState":
        return cls(N, n_max, t, tuple(SymmetricKernel.zeros(n, N) for n in range(n_max + 1)))

    @classmethod
    def from_vector(cls, N: int, n_max: int, t: float, vec) -> "ProjectedState":
        off = _offsets(N, n_max)
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (off[-1],):
            raise ValueError("state vector has the wrong length")
        return cls(N, n_max, t, tuple(SymmetricKernel(n, N, vec[off[n]:off[n + 1]].copy()) for n in range(n_max + 1)))

    @classmethod
    def from_chaos(cls, a: ChaosVector, n_max: int, t: float = 0.0) -> "ProjectedState":
        return cls(a.dim, n_max, t, tuple(a.kernel(n) for n in range(n_max + 1)))

    def to_vector(self) -> np.ndarray:
        return np.concatenate([lv.values for lv in self.levels])

    def to_chaos(self) -> ChaosVector:
        return ChaosVector(self.N, self.levels)

    def scaled(self, s: float) -> "ProjectedState":
        return ProjectedState(self.N, self.n_max, self.t, tuple(lv * s for lv in self.levels))

    def rows(self):
        """``(t, n, multi_index, value)`` rows with 1-based indices."""
        for lv in self.levels:
            for key, v in zip(lv.keys.tolist(), lv.values):
                yield self.t, lv.order, tuple(i + 1 for i in key), float(v)


def initial_state(zeta_hat, n_max: int = DEFAULT_N_MAX) -> ProjectedState:
    """``r_1 = zeta_hat``, every other level zero."""
    zeta_hat = np.asarray(zeta_hat, dtype=float)
    N = zeta_hat.size
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    st = ProjectedState.zeros(N, n_max)
    levels = list(st.levels)
    levels[1] = SymmetricKernel(1, N, zeta_hat.copy())
    return ProjectedState(N, n_max, 0.0, tuple(levels))


def _check_dims(N, coeffs: SpectralCoefficients, alphas):
    if len(alphas) != N or coeffs.d.size != N or coeffs.c.size != N:
        raise ValueError(f"coefficient lengths do not match N = {N}")


def hierarchy_matrix(N: int, n_max: int, coeffs: SpectralCoefficients, alphas) -> sparse.csr_matrix:
    """Sparse generator of the projected hierarchy on the flattened state."""
    alphas = np.asarray(alphas, dtype=float)
    _check_dims(N, coeffs, alphas)
    off = _offsets(N, n_max)
    lookup = [{k: i for i, k in enumerate(map(tuple, multi_indices(N, n).tolist()))} for n in range(n_max + 1)]
    rows, cols, vals = [], [], []
    for n in range(n_max + 1):
        for key, i in lookup[n].items():
            row = off[n] + i
            rows.append(row)
            cols.append(row)
            vals.append(-(alphas[list(key)].sum() + coeffs.gamma))
            if n < n_max:
                for k in range(N):
                    if coeffs.d[k] != 0.0:
                        rows.append(row)
                        cols.append(off[n + 1] + lookup[n + 1][tuple(sorted(key + (k,)))])
                        vals.append((n + 1) * coeffs.d[k])
            if n >= 1:
                for slot in range(n):
                    c = coeffs.c[key[slot]]
                    if c != 0.0:
                        rows.append(row)
                        cols.append(off[n - 1] + lookup[n - 1][key[:slot] + key[slot + 1:]])
                        vals.append(c / n)
    size = off[-1]
    return sparse.csr_matrix((vals, (rows, cols)), shape=(size, size))


def hierarchy_rhs(state: ProjectedState, coeffs: SpectralCoefficients, alphas) -> ProjectedState:
    """Time derivative of every level (returned in state shape, same ``t``)."""
    A = hierarchy_matrix(state.N, state.n_max, coeffs, alphas)
    return ProjectedState.from_vector(state.N, state.n_max, state.t, A @ state.to_vector())


def _rk4_step(A, y, h):
    k1 = A @ y
    k2 = A @ (y + 0.5 * h * k1)
    k3 = A @ (y + 0.5 * h * k2)
    k4 = A @ (y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _segments(t0: float, checkpoints, dt: float):
    """Yield ``(t_target, steps, h)`` so each checkpoint is hit exactly."""
    t = t0
    for tc in checkpoints:
        span = tc - t
        steps = int(math.ceil(span / dt - 1e-9)) if span > 0 else 0
        yield tc, steps, (span / steps if steps else 0.0)
        t = tc


def integrate_hierarchy(
    initial: ProjectedState,
    coeffs: SpectralCoefficients,
    alphas,
    t_end: float,
    dt: float,
    scheme: str = "rk4",
    checkpoints=None,
) -> list[ProjectedState]:
    """March the projected hierarchy and return states at the checkpoints.

    Parameters
    ----------
    initial : ProjectedState
    coeffs, alphas
        Spectral data from the same basis.
    t_end : float
        Final time; included as the last checkpoint.
    dt : float
        Maximal step; each checkpoint interval is split evenly.
    scheme : {"rk4", "backward_euler"}
    checkpoints : sequence of float, optional
        Output times in ``[initial.t, t_end]``. Defaults to ``[t_end]``.

    Returns
    -------
    list of ProjectedState
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if scheme not in ("rk4", "backward_euler"):
        raise ValueError(f"unknown scheme {scheme!r}")
    alphas = np.asarray(alphas, dtype=float)
    cps = sorted(set([float(t) for t in (checkpoints or [])] + [float(t_end)]))
    if cps[0] < initial.t - 1e-15:
        raise ValueError("checkpoints precede the initial time")
    stiff = initial.n_max * float(np.max(alphas))
    if scheme == "rk4" and dt * stiff > 0.5:
        raise NumericalAbort(
            f"rk4 stability guard: dt * max(sum alpha) = {dt * stiff:.3g} > 0.5; use backward_euler or a smaller dt"
        )
    A = hierarchy_matrix(initial.N, initial.n_max, coeffs, alphas)
    y = initial.to_vector()
    out = []
    lu_cache = {}
    for tc, steps, h in _segments(initial.t, cps, dt):
        if scheme == "backward_euler" and steps:
            key = round(h, 15)
            if key not in lu_cache:
                lu_cache[key] = splu(sparse.identity(A.shape[0], format="csc") - h * A.tocsc())
            lu = lu_cache[key]
        for _ in range(steps):
            y = _rk4_step(A, y, h) if scheme == "rk4" else lu.solve(y)
        if not np.all(np.isfinite(y)):
            raise NumericalAbort(f"non-finite hierarchy state at t = {tc}")
        out.append(ProjectedState.from_vector(initial.N, initial.n_max, tc, y))
    return out


def level_mass(state: ProjectedState, basis: EigenBasis | np.ndarray) -> np.ndarray:
    """``P_n = integral of Pi_N rho_n`` for ``n = 0..n_max``.

    ``basis`` may be an :class:`EigenBasis` or the vector of mode integrals.
    """
    m = np.asarray(basis.masses if isinstance(basis, EigenBasis) else basis, dtype=float)
    out = np.empty(state.n_max + 1)
    for n, lv in enumerate(state.levels):
        if n == 0:
            out[0] = lv.values[0]
            continue
        w = multiplicities(state.N, n) * np.prod(m[lv.keys], axis=1)
        out[n] = float(np.dot(w, lv.values))
    return out


# ---------------------------------------------------------------------------
# well-mixed reduction


@dataclass(frozen=True)
class BirthDeathState:
    t: float
    p: np.ndarray
    lambda_d: float
    lambda_c: float

    @property
    def n_max(self) -> int:
        return self.p.size - 1


def cme_generator(lambda_d: float, lambda_c: float, n_max: int) -> sparse.csr_matrix:
    """Generator of the immigration-death chain with a reflecting cap at ``n_max``."""
    n = np.arange(n_max + 1, dtype=float)
    birth = np.full(n_max + 1, float(lambda_c))
    birth[-1] = 0.0
    death = lambda_d * n
    diag = -(birth + death)
    return sparse.diags([birth[:-1], diag, death[1:]], [-1, 0, 1], format="csr")


def cme_integrate(lambda_d: float, lambda_c: float, p0, t_end: float, dt: float, checkpoints=None) -> list[BirthDeathState]:
    """RK4 integration of the chemical master equation.

    ``p0`` fixes the truncation ``n_max = len(p0) - 1``.
    """
    if lambda_d < 0 or lambda_c < 0:
        raise ValueError("rates must be nonnegative")
    p = np.asarray(p0, dtype=float).copy()
    if abs(p.sum() - 1.0) > 1e-12:
        raise ValueError("initial distribution must sum to 1")
    Q = cme_generator(lambda_d, lambda_c, p.size - 1)
    cps = sorted(set([float(t) for t in (checkpoints or [])] + [float(t_end)]))
    out = []
    for tc, steps, h in _segments(0.0, cps, dt):
        for _ in range(steps):
            p = _rk4_step(Q, p, h)
        out.append(BirthDeathState(tc, p.copy(), float(lambda_d), float(lambda_c)))
    return out


def immigration_death_analytic(lambda_d: float, lambda_c: float, t: float, n) -> np.ndarray:
    """``P(N(t) = n)`` starting from one particle.

    The initial particle survives with probability ``exp(-lambda_d t)``;
    immigrants still present form an independent Poisson variable with mean
    ``(lambda_c / lambda_d)(1 - exp(-lambda_d t))`` (``lambda_c t`` when
    ``lambda_d = 0``).
    """
    n = np.asarray(n)
    if lambda_d < 0 or lambda_c < 0 or t < 0:
        raise ValueError("rates and time must be nonnegative")
    if lambda_d == 0:
        s, mu = 1.0, lambda_c * t
    else:
        s = math.exp(-lambda_d * t)
        mu = lambda_c * -math.expm1(-lambda_d * t) / lambda_d
    if mu == 0:
        return np.where(n == 1, s, 0.0) + np.where(n == 0, 1.0 - s, 0.0)
    return (1.0 - s) * poisson.pmf(n, mu) + s * poisson.pmf(n - 1, mu)
