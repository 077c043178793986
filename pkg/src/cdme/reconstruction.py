"""Projected densities from Gaussian expectations of the OU-type PDE.

For ``n >= 1`` the kernel of the projected density is

    kappa_n(j) = E[d_{j_1} ... d_{j_n} u(t, Z)] / n!,     Z ~ N(0, I_N),

and ``rho_0(t) = E[u(t, Z)]``. This module turns those expectations into
:class:`DensityField` objects, evaluates them on ``[0, 1]^n`` and compares
them with the direct Galerkin coefficients.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import oup
from .basis import EigenBasis, SpectralCoefficients
from .chaos import SymmetricKernel, multi_indices
from .errors import BudgetExceeded
from .galerkin import DEFAULT_N_MAX, initial_state, integrate_hierarchy

__all__ = [
    "DensityField",
    "BACKENDS",
    "reconstruct_rho0",
    "reconstruct_kernel",
    "evaluate_density",
    "compare_with_direct",
    "write_field_csv",
    "write_density_grid",
    "dump_report",
]

log = logging.getLogger(__name__)

BACKENDS = ("fk", "hermite", "fd", "gaussian")
DEFAULT_BUDGET = 2000


@dataclass(frozen=True)
class DensityField:
    """Kernel of ``Pi_N^{(x)n} rho_n(t)`` with per-entry standard errors."""

    n: int
    t: float
    kernel: SymmetricKernel
    std_err: np.ndarray
    backend: str = "fk"
    paths: int = 0

    def rows(self):
        for key, v, s in zip(self.kernel.keys.tolist(), self.kernel.values, self.std_err):
            yield tuple(i + 1 for i in key), float(v), float(s)


@dataclass
class _Backend:
    params: oup.OUParams
    t: float
    name: str
    paths: int = 100_000
    seed: int = 0
    threads: int = 1
    inner_paths: int = 1
    fd_options: dict = field(default_factory=dict)
    _fd: oup.FDSolution | None = None

    def expectations(self, indices) -> tuple[np.ndarray, np.ndarray]:
        if self.name == "fk":
            est = oup.fk_derivative_expectations(self.params, indices, self.t, self.paths, self.seed, self.threads)
        elif self.name == "hermite":
            est = oup.hermite_weighted_expectations(
                self.params, indices, self.t, self.paths, self.seed, self.inner_paths, self.threads
            )
        elif self.name == "fd":
            if self._fd is None:
                self._fd = oup.fd_solve(self.params, self.t, **self.fd_options)
            vals = [oup.fd_expectation(self._fd, j) for j in indices]
            return np.array(vals), np.zeros(len(vals))
        else:
            vals = [oup.closed_form_expectation(self.params, j, self.t) for j in indices]
            return np.array(vals), np.zeros(len(vals))
        return np.array([e.value for e in est]), np.array([e.std_err for e in est])


def _backend(params, t, backend, **options) -> _Backend:
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}; choose from {BACKENDS}")
    if backend == "fd" and params.N > 2:
        raise ValueError("the fd backend needs N <= 2")
    return _Backend(params, float(t), backend, **options)


def reconstruct_rho0(params: oup.OUParams, t: float, backend: str = "fk", **options) -> oup.FKEstimate:
    """``rho_0(t) = E[u(t, Z)]`` with its standard error (zero for deterministic backends)."""
    be = _backend(params, t, backend, **options)
    v, s = be.expectations([()])
    return oup.FKEstimate(float(v[0]), float(s[0]), be.paths if backend in ("fk", "hermite") else 0, be.seed)


def reconstruct_kernel(
    params: oup.OUParams, n: int, t: float, backend: str = "fk", budget: int = DEFAULT_BUDGET, **options
) -> DensityField:
    """Kernel ``kappa_n`` on every sorted multi-index.

    Parameters
    ----------
    budget : int
        Maximum number of expectation targets (sorted multi-indices).
    options
        ``paths``, ``seed``, ``threads``, ``inner_paths`` or ``fd_options``
        forwarded to the backend.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    keys = multi_indices(params.N, n)
    if len(keys) > budget:
        raise BudgetExceeded(f"{len(keys)} targets for n = {n}, N = {params.N} exceed the budget of {budget}")
    be = _backend(params, t, backend, **options)
    vals, errs = be.expectations([tuple(k) for k in keys.tolist()])
    scale = 1.0 / math.factorial(n)
    return DensityField(
        n=n,
        t=float(t),
        kernel=SymmetricKernel(n, params.N, vals * scale),
        std_err=errs * scale,
        backend=backend,
        paths=be.paths if backend in ("fk", "hermite") else 0,
    )


def evaluate_density(field: DensityField, basis: EigenBasis, points) -> np.ndarray:
    """``sum_j kappa_n(j) prod_i xi_{j_i}(x_i)`` at each point of ``[0, 1]^n``.

    Coordinates are sorted before evaluation, which makes the result exactly
    symmetric under permutations of a point.
    """
    n = field.n
    pts = np.asarray(points, dtype=float)
    if n == 0:
        return np.full(pts.shape[0] if pts.ndim else 1, float(field.kernel.values[0]))
    pts = pts.reshape(-1, n)
    if np.any(pts < 0) or np.any(pts > 1):
        raise ValueError("points must lie in [0, 1]^n")
    pts = np.sort(pts, axis=1)
    T = field.kernel.to_dense()
    phi = basis.evaluate(pts)  # (P, n, N)
    acc = np.broadcast_to(T, (pts.shape[0],) + T.shape)
    for i in range(n - 1, -1, -1):
        acc = np.einsum("p...k,pk->p...", acc, phi[:, i, :])
    return np.asarray(acc, dtype=float)


def compare_with_direct(
    params: oup.OUParams,
    basis: EigenBasis,
    coeffs: SpectralCoefficients,
    t_checkpoints,
    n_list,
    tolerances: dict | None = None,
) -> dict:
    """Galerkin coefficients versus reconstructed kernels at each checkpoint.

    ``tolerances`` keys (all optional): ``atol`` (1e-4), ``dt`` (1e-4),
    ``n_max`` (12), ``scheme`` ("rk4"), ``backend`` ("fk"), ``paths``,
    ``seed``, ``threads``, ``budget``, ``inner_paths``, ``fd_options``.
    An entry passes when ``|kappa - r| <= max(atol, 4 std_err)``.
    """
    tol = dict(tolerances or {})
    atol = float(tol.pop("atol", 1e-4))
    dt = float(tol.pop("dt", 1e-4))
    n_max = int(tol.pop("n_max", DEFAULT_N_MAX))
    scheme = tol.pop("scheme", "rk4")
    backend = tol.pop("backend", "fk")
    budget = int(tol.pop("budget", DEFAULT_BUDGET))
    cps = sorted(float(t) for t in t_checkpoints)
    if coeffs.gamma > 0 and cps and cps[-1] > 1.0 / coeffs.gamma:
        log.warning("comparison horizon %.3g exceeds 1/gamma = %.3g; truncation tails may matter", cps[-1], 1 / coeffs.gamma)
    init = initial_state(coeffs.zeta_hat, n_max)
    states = {s.t: s for s in integrate_hierarchy(init, coeffs, basis.alphas, cps[-1] if cps else 0.0, dt, scheme, cps)}
    entries = []
    for t in cps:
        st = states[t]
        for n in n_list:
            fieldn = reconstruct_kernel(params, n, t, backend, budget, **tol)
            direct = st.levels[n]
            for key, kap, se, r in zip(fieldn.kernel.keys.tolist(), fieldn.kernel.values, fieldn.std_err, direct.values):
                diff = abs(float(kap) - float(r))
                bound = max(atol, 4.0 * float(se))
                entries.append(
                    {
                        "t": t,
                        "n": int(n),
                        "indices": [i + 1 for i in key],
                        "direct": float(r),
                        "reconstructed": float(kap),
                        "std_err": float(se),
                        "abs_diff": diff,
                        "tolerance": bound,
                        "pass": bool(diff <= bound),
                    }
                )
    failures = [e for e in entries if not e["pass"]]
    return {
        "backend": backend,
        "atol": atol,
        "galerkin": {"dt": dt, "n_max": n_max, "scheme": scheme},
        "entries": entries,
        "failures": failures,
        "all_pass": not failures,
    }


def write_field_csv(field: DensityField, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["multi_index", "kappa", "std_err"])
        for idx, v, s in field.rows():
            w.writerow([" ".join(map(str, idx)), repr(v), repr(s)])
    return path


def write_density_grid(field: DensityField, basis: EigenBasis, path, points_per_axis: int = 51) -> Path:
    """Dump ``(x_1..x_n, value)`` on a tensor grid; only sensible for small ``n``."""
    path = Path(path)
    x = np.linspace(0.0, 1.0, points_per_axis)
    if field.n == 0:
        pts = np.zeros((1, 0))
    else:
        pts = np.stack(np.meshgrid(*([x] * field.n), indexing="ij"), axis=-1).reshape(-1, field.n)
    vals = evaluate_density(field, basis, pts)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i + 1}" for i in range(field.n)] + ["value"])
        for p, v in zip(pts, vals):
            w.writerow([repr(float(c)) for c in p] + [repr(float(v))])
    return path


def dump_report(report: dict, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(report, indent=2, sort_keys=True))
    return path
