"""Randomised identity checks for the chaos algebra.

Used by ``cdme selftest`` and by the acceptance suite. Each instance draws a
basis size, chaos orders and random kernels, then measures the deviation of
four identities:

* duality between the Malliavin derivative and its adjoint,
* ``D*_l a + D_l a = a * I_1(l)`` (Hu-Meyer product with a first-order term),
* the Hermite isomorphism turning Hu-Meyer products into polynomial products,
* kernel extraction through iterated derivatives and the expectation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .chaos import (
    ChaosVector,
    SymmetricKernel,
    hu_meyer_product,
    malliavin_d,
    malliavin_d_star,
    multi_indices,
    pairing,
    to_hermite,
)

__all__ = ["random_chaos", "IdentityReport", "chaos_identity_suite"]

IDENTITIES = ("duality", "commutation", "hermite_product", "stroock_taylor")


def random_chaos(rng: np.random.Generator, dim: int, order: int) -> ChaosVector:
    ks = [SymmetricKernel(n, dim, rng.uniform(-1.0, 1.0, len(multi_indices(dim, n)))) for n in range(order + 1)]
    return ChaosVector(dim, tuple(ks))


def _pad_diff(x: np.ndarray, y: np.ndarray) -> float:
    shape = tuple(max(a, b) for a, b in zip(x.shape, y.shape))
    X, Y = np.zeros(shape), np.zeros(shape)
    X[tuple(slice(0, s) for s in x.shape)] = x
    Y[tuple(slice(0, s) for s in y.shape)] = y
    return float(np.max(np.abs(X - Y)))


@dataclass
class IdentityReport:
    instances: int
    max_deviation: dict
    tol: float

    @property
    def passed(self) -> bool:
        return all(v <= self.tol for v in self.max_deviation.values())

    def to_dict(self) -> dict:
        return {"instances": self.instances, "tol": self.tol, "max_deviation": dict(self.max_deviation), "passed": self.passed}


def _stroock_taylor_deviation(a: ChaosVector) -> float:
    worst = 0.0
    eye = np.eye(a.dim)
    for n in range(1, a.order + 1):
        for key, val in zip(a.kernels[n].keys.tolist(), a.kernels[n].values):
            b = a
            for j in key:
                b = malliavin_d(b, eye[j])
            worst = max(worst, abs(b.expectation / math.factorial(n) - val))
    return worst


def chaos_identity_suite(instances: int = 500, seed: int = 0, max_dim: int = 4, max_order: int = 4, tol: float = 1e-10) -> IdentityReport:
    """Run ``instances`` random checks; deviations are absolute coefficient errors
    (relative to the pairing magnitude for the scalar duality identity)."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xC4A05]))
    worst = dict.fromkeys(IDENTITIES, 0.0)
    for _ in range(instances):
        dim = int(rng.integers(1, max_dim + 1))
        a = random_chaos(rng, dim, int(rng.integers(0, max_order + 1)))
        b = random_chaos(rng, dim, int(rng.integers(0, max_order + 1)))
        l = rng.uniform(-1.0, 1.0, dim)

        lhs = pairing(malliavin_d(a, l), b)
        rhs = pairing(a, malliavin_d_star(b, l))
        worst["duality"] = max(worst["duality"], abs(lhs - rhs) / max(1.0, abs(lhs)))

        comm = malliavin_d_star(a, l) + malliavin_d(a, l)
        worst["commutation"] = max(worst["commutation"], comm.max_abs_diff(hu_meyer_product(a, ChaosVector.first_order(l))))

        prod = to_hermite(hu_meyer_product(a, b)).coeffs
        poly = (to_hermite(a) * to_hermite(b)).coeffs
        worst["hermite_product"] = max(worst["hermite_product"], _pad_diff(prod, poly))

        worst["stroock_taylor"] = max(worst["stroock_taylor"], float(_stroock_taylor_deviation(a)))
    return IdentityReport(instances, worst, tol)
