"""Rate and density functions on [0, 1].

Every function used by the solvers (degradation propensity, creation
intensity, initial density) is a :class:`RateFunction`: a vectorised callable
that also knows an upper bound (needed by rejection samplers) and whether it
is constant (needed by the well-mixed reductions).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid

__all__ = [
    "RateFunction",
    "RateFunctions",
    "constant",
    "cosine_series",
    "polynomial",
    "grid_samples",
    "from_callable",
    "rate_from_config",
    "RateValidationError",
]


class RateValidationError(ValueError):
    """Raised when a rate function violates its sign or normalisation contract."""


@dataclass(frozen=True)
class RateFunction:
    """A real function on [0, 1] with metadata.

    Parameters
    ----------
    func : callable
        Vectorised ``x -> f(x)``.
    kind : str
        One of ``"constant"``, ``"cosine_series"``, ``"polynomial"``,
        ``"grid_samples"`` or ``"callable"``.
    sup : float
        An upper bound of ``f`` on [0, 1].
    value : float or None
        The constant value when ``kind == "constant"``.
    params : dict
        The parameters the function was built from (for manifests).
    """

    func: Callable[[np.ndarray], np.ndarray]
    kind: str
    sup: float
    value: float | None = None
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(np.asarray(self.func(x), dtype=float), x.shape).copy()

    @property
    def is_constant(self) -> bool:
        return self.value is not None

    def integral(self, grid_size: int = 4097) -> float:
        if self.value is not None:
            return float(self.value)
        if self.kind == "cosine_series":
            return float(self.params["coefficients"][0])
        if self.kind == "polynomial":
            anti = np.polynomial.Polynomial(self.params["coefficients"]).integ()
            return float(anti(1.0) - anti(0.0))
        if self.kind == "grid_samples":
            return float(trapezoid(self.params["values"], self.params["x"]))
        x = np.linspace(0.0, 1.0, grid_size)
        return float(trapezoid(self(x), x))


def constant(value: float) -> RateFunction:
    value = float(value)
    return RateFunction(lambda x: np.full_like(x, value), "constant", value, value, {"value": value})


def cosine_series(coefficients) -> RateFunction:
    """``f(x) = sum_k a_k cos(k pi x)`` for ``k = 0, 1, ...``."""
    a = np.asarray(coefficients, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise RateValidationError("cosine_series needs a non-empty coefficient list")
    if np.all(a[1:] == 0.0):
        return constant(a[0])
    k = np.arange(a.size)

    def f(x):
        return np.cos(np.multiply.outer(x, k) * np.pi) @ a

    # |cos| <= 1 gives a rigorous bound
    sup = float(a[0] + np.abs(a[1:]).sum())
    return RateFunction(f, "cosine_series", sup, None, {"coefficients": a.tolist()})


def polynomial(coefficients) -> RateFunction:
    """``f(x) = sum_k p_k x**k`` (increasing powers)."""
    p = np.asarray(coefficients, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise RateValidationError("polynomial needs a non-empty coefficient list")
    if np.all(p[1:] == 0.0):
        return constant(p[0])
    poly = np.polynomial.Polynomial(p)
    crit = poly.deriv().roots()
    crit = crit[np.isreal(crit)].real
    cand = np.concatenate([[0.0, 1.0], crit[(crit >= 0.0) & (crit <= 1.0)]])
    sup = float(np.max(poly(cand)))
    return RateFunction(lambda x: poly(x), "polynomial", sup, None, {"coefficients": p.tolist()})


def grid_samples(x, values) -> RateFunction:
    """Piecewise-linear interpolant of samples on a uniform grid."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(values, dtype=float)
    if x.shape != v.shape or x.ndim != 1 or x.size < 2:
        raise RateValidationError("grid samples need matching 1-D x and value arrays")
    if abs(x[0]) > 1e-12 or abs(x[-1] - 1.0) > 1e-12:
        raise RateValidationError("grid samples must span [0, 1]")
    if not np.allclose(np.diff(x), x[1] - x[0], rtol=1e-6, atol=1e-12):
        raise RateValidationError("grid samples must be uniformly spaced")
    if np.all(v == v[0]):
        return constant(v[0])
    return RateFunction(
        lambda y: np.interp(y, x, v), "grid_samples", float(v.max()), None,
        {"x": x.tolist(), "values": v.tolist()},
    )


def from_callable(func, sup: float | None = None, grid_size: int = 4097) -> RateFunction:
    """Wrap an arbitrary vectorised callable; ``sup`` defaults to a padded grid maximum."""
    if sup is None:
        x = np.linspace(0.0, 1.0, grid_size)
        sup = float(np.max(func(x)))
        sup = sup + 1e-6 * max(1.0, abs(sup))
    return RateFunction(func, "callable", float(sup))


def _read_csv_samples(path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    try:
        data = np.array([[float(r[0]), float(r[1])] for r in rows])
    except ValueError:
        # header row
        data = np.array([[float(r[0]), float(r[1])] for r in rows[1:]])
    return data[:, 0], data[:, 1]


def rate_from_config(spec: dict, base_dir: str | Path | None = None) -> RateFunction:
    """Build a :class:`RateFunction` from a ``{"kind": ..., ...}`` mapping."""
    kind = spec.get("kind")
    if kind == "constant":
        return constant(spec["value"])
    if kind == "cosine_series":
        return cosine_series(spec["coefficients"])
    if kind == "polynomial":
        return polynomial(spec["coefficients"])
    if kind == "grid_samples":
        if "path" in spec:
            path = Path(spec["path"])
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            return grid_samples(*_read_csv_samples(path))
        return grid_samples(spec["x"], spec["values"])
    raise RateValidationError(f"unknown rate kind {kind!r}")


@dataclass(frozen=True)
class RateFunctions:
    """Degradation propensity, creation intensity and initial density."""

    lambda_d: RateFunction
    lambda_c: RateFunction
    zeta: RateFunction

    def validate(self, grid_size: int = 4097) -> None:
        x = np.linspace(0.0, 1.0, grid_size)
        for name in ("lambda_d", "lambda_c", "zeta"):
            if np.any(getattr(self, name)(x) < 0.0):
                raise RateValidationError(f"{name} takes negative values on [0, 1]")
        sampled = self.zeta.kind in ("grid_samples", "callable")
        tol = 1e-6 if sampled else 1e-10
        mass = self.zeta.integral(grid_size)
        if abs(mass - 1.0) > tol:
            raise RateValidationError(f"zeta integrates to {mass:.12g}, expected 1")

    @property
    def gamma(self) -> float:
        """Total creation rate, the integral of ``lambda_c``."""
        return self.lambda_c.integral()

    @classmethod
    def constant_rates(cls, lambda_d: float, lambda_c: float, zeta: RateFunction | None = None):
        return cls(constant(lambda_d), constant(lambda_c), zeta if zeta is not None else constant(1.0))
