"""Finite Wiener chaos over an ``N``-mode orthonormal basis.

A multiple integral ``I_n(h)`` with ``h`` in the span of ``xi_{j_1} x ... x
xi_{j_n}`` is stored through its symmetric coefficient tensor. Only sorted
multi-indices are kept: the stored value at ``(j_1 <= ... <= j_n)`` is the
entry of the dense symmetric tensor at that position (and hence at every
permutation of it). Orthonormality of the basis turns every integral over
``[0, 1]`` into a sum over mode indices, so the algebra below is plain finite
linear algebra.

Indices are 0-based throughout; exports add one.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.polynomial import hermite_e

__all__ = [
    "multi_indices",
    "multiplicities",
    "SymmetricKernel",
    "ChaosVector",
    "symmetrize",
    "contract",
    "hu_meyer_product",
    "malliavin_d",
    "malliavin_d_star",
    "dgamma_diagonal",
    "pairing",
    "HermitePolynomial",
    "to_hermite",
    "from_hermite",
    "eval_hermite",
    "stroock_taylor_kernel",
    "stochastic_exponential",
]


# ---------------------------------------------------------------------------
# index bookkeeping


@lru_cache(maxsize=None)
def multi_indices(dim: int, order: int) -> np.ndarray:
    """Sorted multi-indices of length ``order`` over ``range(dim)``, lexicographic."""
    keys = list(itertools.combinations_with_replacement(range(dim), order))
    arr = np.array(keys, dtype=np.intp).reshape(len(keys), order)
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=None)
def _position(dim: int, order: int) -> np.ndarray:
    """Dense ``(dim,)*order`` array mapping every ordered tuple to its sorted key row."""
    keys = multi_indices(dim, order)
    if order == 0:
        return np.zeros((), dtype=np.intp)
    # rank of a sorted key in lexicographic combinations_with_replacement order
    lookup = {tuple(k): i for i, k in enumerate(keys.tolist())}
    pos = np.empty((dim,) * order, dtype=np.intp)
    for idx in itertools.product(range(dim), repeat=order):
        pos[idx] = lookup[tuple(sorted(idx))]
    pos.setflags(write=False)
    return pos


@lru_cache(maxsize=None)
def multiplicities(dim: int, order: int) -> np.ndarray:
    """Number of ordered tuples represented by each sorted key, ``n!/prod(m_k!)``."""
    keys = multi_indices(dim, order)
    out = np.empty(len(keys))
    for i, k in enumerate(keys):
        counts = np.bincount(k, minlength=dim)
        out[i] = math.factorial(order) / math.prod(math.factorial(c) for c in counts)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _exponents(dim: int, order: int) -> np.ndarray:
    """Per-key mode multiplicities ``(m_1, ..., m_dim)``."""
    keys = multi_indices(dim, order)
    out = np.zeros((len(keys), dim), dtype=np.intp)
    for i, k in enumerate(keys):
        out[i] = np.bincount(k, minlength=dim)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def _shuffles(dim: int, p1: int, p2: int) -> np.ndarray:
    """Gather indices for symmetrising a tensor symmetric in two blocks of axes.

    For each sorted key of length ``p1 + p2`` this lists every split of its
    positions into a ``p1``-subset and the complement; averaging the dense
    tensor over those splits equals the full permutation average.
    """
    p = p1 + p2
    keys = multi_indices(dim, p)
    splits = [
        list(a) + [i for i in range(p) if i not in a]
        for a in itertools.combinations(range(p), p1)
    ]
    idx = keys[:, np.array(splits, dtype=np.intp).reshape(len(splits), p)]
    idx.setflags(write=False)
    return idx  # shape (K, S, p)


# ---------------------------------------------------------------------------
# kernels


@dataclass(frozen=True)
class SymmetricKernel:
    """Symmetric coefficient tensor of order ``order`` over ``dim`` modes."""

    order: int
    dim: int
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        expected = len(multi_indices(self.dim, self.order))
        if values.shape != (expected,):
            raise ValueError(f"order-{self.order} kernel over {self.dim} modes needs {expected} values")
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, order: int, dim: int) -> "SymmetricKernel":
        return cls(order, dim, np.zeros(len(multi_indices(dim, order))))

    @classmethod
    def scalar(cls, value: float, dim: int) -> "SymmetricKernel":
        return cls(0, dim, np.array([float(value)]))

    @classmethod
    def from_dict(cls, order: int, dim: int, coeffs: dict) -> "SymmetricKernel":
        k = cls.zeros(order, dim)
        pos = _position(dim, order)
        for key, v in coeffs.items():
            key = tuple(key)
            if len(key) != order:
                raise ValueError(f"multi-index {key} does not have length {order}")
            k.values[pos[key] if order else 0] = v
        return k

    @classmethod
    def from_dense(cls, tensor) -> "SymmetricKernel":
        """Read the sorted entries of an already symmetric dense tensor."""
        tensor = np.asarray(tensor, dtype=float)
        order, dim = tensor.ndim, (tensor.shape[0] if tensor.ndim else None)
        if order == 0:
            raise ValueError("use SymmetricKernel.scalar for order 0")
        keys = multi_indices(dim, order)
        return cls(order, dim, tensor[tuple(keys.T)])

    @property
    def keys(self) -> np.ndarray:
        return multi_indices(self.dim, self.order)

    @property
    def coeffs(self) -> dict:
        return {tuple(k): float(v) for k, v in zip(self.keys.tolist(), self.values) if v != 0.0}

    def __getitem__(self, index) -> float:
        index = tuple(sorted(index))
        if self.order == 0:
            return float(self.values[0])
        return float(self.values[_position(self.dim, self.order)[index]])

    def to_dense(self) -> np.ndarray:
        if self.order == 0:
            return np.array(self.values[0])
        return self.values[_position(self.dim, self.order)]

    def inner(self, other: "SymmetricKernel") -> float:
        """``L^2`` inner product of the dense tensors."""
        self._check(other)
        return float(np.dot(multiplicities(self.dim, self.order) * self.values, other.values))

    def norm2(self) -> float:
        return self.inner(self)

    def _check(self, other):
        if (self.order, self.dim) != (other.order, other.dim):
            raise ValueError("kernels differ in order or dimension")

    def __add__(self, other):
        self._check(other)
        return SymmetricKernel(self.order, self.dim, self.values + other.values)

    def __sub__(self, other):
        self._check(other)
        return SymmetricKernel(self.order, self.dim, self.values - other.values)

    def __mul__(self, s: float):
        return SymmetricKernel(self.order, self.dim, self.values * float(s))

    __rmul__ = __mul__

    def __neg__(self):
        return SymmetricKernel(self.order, self.dim, -self.values)


def symmetrize(tensor) -> SymmetricKernel:
    """Average a dense tensor over all permutations of its axes."""
    tensor = np.asarray(tensor, dtype=float)
    n = tensor.ndim
    if n == 0:
        return SymmetricKernel(0, 1, np.array([float(tensor)]))
    if len(set(tensor.shape)) != 1:
        raise ValueError("all tensor axes must have the same length")
    acc = np.zeros_like(tensor)
    for perm in itertools.permutations(range(n)):
        acc += np.transpose(tensor, perm)
    return SymmetricKernel.from_dense(acc / math.factorial(n))


def _product_kernel(h: SymmetricKernel, g: SymmetricKernel, r: int) -> np.ndarray:
    """Sorted-key values of the symmetrised ``r``-th contraction, as an array."""
    dim = h.dim
    p1, p2 = h.order - r, g.order - r
    if h.order == 0:
        return float(h.values[0]) * g.values
    if g.order == 0:
        return float(g.values[0]) * h.values
    H, G = h.to_dense(), g.to_dense()
    T = np.tensordot(H, G, axes=(list(range(p1, h.order)), list(range(r))))
    if p1 + p2 == 0:
        return np.array([float(T)])
    if p1 == 0 or p2 == 0:
        # one side fully contracted: result is already symmetric
        return T[tuple(multi_indices(dim, p1 + p2).T)]
    idx = _shuffles(dim, p1, p2)
    return T[tuple(np.moveaxis(idx, -1, 0))].mean(axis=1)


def contract(h: SymmetricKernel, g: SymmetricKernel, r: int) -> SymmetricKernel:
    """Symmetrised ``r``-th order contraction of two kernels."""
    if h.dim != g.dim:
        raise ValueError("kernels live over different bases")
    if not 0 <= r <= min(h.order, g.order):
        raise ValueError(f"contraction order {r} outside [0, {min(h.order, g.order)}]")
    return SymmetricKernel(h.order + g.order - 2 * r, h.dim, _product_kernel(h, g, r))


# ---------------------------------------------------------------------------
# chaos vectors


@dataclass(frozen=True)
class ChaosVector:
    """Finite chaos expansion ``sum_n I_n(h_n)``.

    ``max_order`` caps the representable order; operations that would
    produce higher orders drop them and set ``truncated``.
    """

    dim: int
    kernels: tuple
    max_order: int | None = None
    truncated: bool = field(default=False, compare=False)

    def __post_init__(self):
        kernels = tuple(self.kernels)
        for n, k in enumerate(kernels):
            if k.order != n or k.dim != self.dim:
                raise ValueError(f"kernel {n} has order {k.order} and dim {k.dim}")
        if self.max_order is not None and len(kernels) > self.max_order + 1:
            if any(np.any(k.values) for k in kernels[self.max_order + 1:]):
                object.__setattr__(self, "truncated", True)
            kernels = kernels[: self.max_order + 1]
        object.__setattr__(self, "kernels", kernels)

    @classmethod
    def from_kernels(cls, kernels, max_order=None) -> "ChaosVector":
        kernels = list(kernels)
        return cls(kernels[0].dim, tuple(kernels), max_order)

    @classmethod
    def constant(cls, value: float, dim: int, max_order=None) -> "ChaosVector":
        return cls(dim, (SymmetricKernel.scalar(value, dim),), max_order)

    @classmethod
    def first_order(cls, coeffs, max_order=None) -> "ChaosVector":
        """``I_1(sum_k l_k xi_k)``."""
        l = np.asarray(coeffs, dtype=float)
        dim = l.size
        return cls(dim, (SymmetricKernel.zeros(0, dim), SymmetricKernel(1, dim, l)), max_order)

    @classmethod
    def zeros(cls, dim: int, order: int = 0, max_order=None) -> "ChaosVector":
        return cls(dim, tuple(SymmetricKernel.zeros(n, dim) for n in range(order + 1)), max_order)

    @property
    def order(self) -> int:
        return len(self.kernels) - 1

    def kernel(self, n: int) -> SymmetricKernel:
        if n < len(self.kernels):
            return self.kernels[n]
        return SymmetricKernel.zeros(n, self.dim)

    @property
    def expectation(self) -> float:
        """Generalised expectation: the order-0 coefficient."""
        return float(self.kernels[0].values[0]) if self.kernels else 0.0

    def padded(self, order: int) -> "ChaosVector":
        return ChaosVector(self.dim, tuple(self.kernel(n) for n in range(order + 1)), self.max_order, self.truncated)

    def _cap(self, other) -> int | None:
        caps = [c for c in (self.max_order, getattr(other, "max_order", None)) if c is not None]
        return min(caps) if caps else None

    def __add__(self, other: "ChaosVector") -> "ChaosVector":
        if self.dim != other.dim:
            raise ValueError("chaos vectors over different bases")
        top = max(self.order, other.order)
        ks = tuple(self.kernel(n) + other.kernel(n) for n in range(top + 1))
        return ChaosVector(self.dim, ks, self._cap(other), self.truncated or other.truncated)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __mul__(self, s: float) -> "ChaosVector":
        return ChaosVector(self.dim, tuple(k * s for k in self.kernels), self.max_order, self.truncated)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def max_abs_diff(self, other: "ChaosVector") -> float:
        top = max(self.order, other.order)
        return max(
            (float(np.max(np.abs(self.kernel(n).values - other.kernel(n).values))) for n in range(top + 1)),
            default=0.0,
        )

    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "kernels": [
                {
                    "order": k.order,
                    "entries": [[[i + 1 for i in key], float(v)] for key, v in zip(k.keys.tolist(), k.values)],
                }
                for k in self.kernels
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, doc) -> "ChaosVector":
        if isinstance(doc, str):
            doc = json.loads(doc)
        dim = int(doc["dim"])
        kernels = []
        for entry in sorted(doc["kernels"], key=lambda e: e["order"]):
            coeffs = {tuple(i - 1 for i in key): v for key, v in entry["entries"]}
            kernels.append(SymmetricKernel.from_dict(entry["order"], dim, coeffs))
        for n, k in enumerate(kernels):
            if k.order != n:
                raise ValueError("kernel orders must be contiguous from 0")
        return cls(dim, tuple(kernels))


def _assemble(dim, pieces: dict, cap) -> ChaosVector:
    top = max(pieces, default=0)
    ks = [SymmetricKernel(n, dim, pieces[n]) if n in pieces else SymmetricKernel.zeros(n, dim) for n in range(top + 1)]
    return ChaosVector(dim, tuple(ks), cap)


def hu_meyer_product(a: ChaosVector, b: ChaosVector) -> ChaosVector:
    """Pointwise product of two finite chaos expansions.

    ``I_n(h) I_m(g) = sum_r r! C(n,r) C(m,r) I_{n+m-2r}(h ~x_r g)``.
    """
    if a.dim != b.dim:
        raise ValueError("chaos vectors over different bases")
    cap = a._cap(b)
    pieces: dict[int, np.ndarray] = {}
    for n, h in enumerate(a.kernels):
        if not np.any(h.values):
            continue
        for m, g in enumerate(b.kernels):
            if not np.any(g.values):
                continue
            for r in range(min(n, m) + 1):
                p = n + m - 2 * r
                w = math.factorial(r) * math.comb(n, r) * math.comb(m, r)
                vals = w * _product_kernel(h, g, r)
                pieces[p] = pieces[p] + vals if p in pieces else vals
    return _assemble(a.dim, pieces, cap)


def malliavin_d(a: ChaosVector, l) -> ChaosVector:
    """Directional Malliavin derivative along ``sum_k l_k xi_k``."""
    l = np.asarray(l, dtype=float)
    if l.shape != (a.dim,):
        raise ValueError("direction has the wrong length")
    lk = SymmetricKernel(1, a.dim, l)
    pieces = {n - 1: n * _product_kernel(h, lk, 1) for n, h in enumerate(a.kernels) if n >= 1}
    if not pieces:
        return ChaosVector.zeros(a.dim, 0, a.max_order)
    return _assemble(a.dim, pieces, a.max_order)


def malliavin_d_star(a: ChaosVector, l) -> ChaosVector:
    """Adjoint of the directional derivative: ``I_n(g) -> I_{n+1}(l ~x g)``."""
    l = np.asarray(l, dtype=float)
    if l.shape != (a.dim,):
        raise ValueError("direction has the wrong length")
    lk = SymmetricKernel(1, a.dim, l)
    pieces = {n + 1: _product_kernel(lk, g, 0) for n, g in enumerate(a.kernels)}
    pieces[0] = np.zeros(1)
    return _assemble(a.dim, pieces, a.max_order)


def dgamma_diagonal(a: ChaosVector, alphas) -> ChaosVector:
    """Differential second quantisation of the diagonal operator ``xi_k -> alpha_k xi_k``."""
    alphas = np.asarray(alphas, dtype=float)
    if alphas.shape != (a.dim,):
        raise ValueError("alphas has the wrong length")
    ks = []
    for n, h in enumerate(a.kernels):
        weight = alphas[h.keys].sum(axis=1) if n else np.zeros(1)
        ks.append(SymmetricKernel(n, a.dim, weight * h.values))
    return ChaosVector(a.dim, tuple(ks), a.max_order, a.truncated)


def pairing(a: ChaosVector, b: ChaosVector) -> float:
    """``sum_n n! <h_n, g_n>``; equals ``E[a b]`` for square-integrable inputs."""
    if a.dim != b.dim:
        raise ValueError("chaos vectors over different bases")
    top = min(a.order, b.order)
    terms = [math.factorial(n) * a.kernel(n).inner(b.kernel(n)) for n in range(top + 1)]
    return math.fsum(terms)


def stroock_taylor_kernel(a: ChaosVector, n: int) -> SymmetricKernel:
    """Order-``n`` kernel of ``a``; ``(1/n!) E[D^n a]``."""
    if not 0 <= n <= a.order:
        raise ValueError(f"order {n} outside [0, {a.order}]")
    return a.kernels[n]


def stochastic_exponential(f, max_order: int) -> ChaosVector:
    """Truncated ``sum_{n <= M} I_n(f^{x n} / n!)``."""
    f = np.asarray(f, dtype=float)
    dim = f.size
    ks = []
    for n in range(max_order + 1):
        keys = multi_indices(dim, n)
        vals = np.prod(f[keys], axis=1) / math.factorial(n) if n else np.ones(1)
        ks.append(SymmetricKernel(n, dim, vals))
    return ChaosVector(dim, tuple(ks))


# ---------------------------------------------------------------------------
# Hermite isomorphism


@lru_cache(maxsize=None)
def _herme_to_mono(degree: int) -> np.ndarray:
    P = np.zeros((degree + 1, degree + 1))
    for m in range(degree + 1):
        e = np.zeros(m + 1)
        e[m] = 1.0
        c = hermite_e.herme2poly(e)
        P[: c.size, m] = c
    P.setflags(write=False)
    return P


@lru_cache(maxsize=None)
def _mono_to_herme(degree: int) -> np.ndarray:
    M = np.linalg.inv(_herme_to_mono(degree))
    # the triangular inverse has integer entries
    M = np.round(M)
    M.setflags(write=False)
    return M


def _apply_each_axis(mat: np.ndarray, c: np.ndarray) -> np.ndarray:
    for axis in range(c.ndim):
        c = np.moveaxis(np.tensordot(mat, c, axes=([1], [axis])), 0, axis)
    return c


@dataclass(frozen=True)
class HermitePolynomial:
    """Polynomial in ``dim`` variables stored in the probabilists' Hermite basis.

    ``coeffs[m_1, ..., m_dim]`` multiplies ``prod_k He_{m_k}(z_k)``.
    """

    coeffs: np.ndarray

    @property
    def dim(self) -> int:
        return self.coeffs.ndim

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    def monomial(self) -> np.ndarray:
        """Coefficients in the monomial basis ``prod_k z_k^{m_k}``."""
        return _apply_each_axis(_herme_to_mono(self.degree), self.coeffs)

    @classmethod
    def from_monomial(cls, mono) -> "HermitePolynomial":
        mono = np.asarray(mono, dtype=float)
        return cls(_apply_each_axis(_mono_to_herme(mono.shape[0] - 1), mono))

    def __mul__(self, other: "HermitePolynomial") -> "HermitePolynomial":
        a, b = self.monomial(), other.monomial()
        out = np.zeros((a.shape[0] + b.shape[0] - 1,) * self.dim)
        for idx in zip(*np.nonzero(a)):
            sl = tuple(slice(i, i + b.shape[0]) for i in idx)
            out[sl] += a[idx] * b
        return HermitePolynomial.from_monomial(out)

    def __call__(self, z) -> np.ndarray:
        return eval_hermite(self, z)


def to_hermite(a: ChaosVector) -> HermitePolynomial:
    """Map ``I_n(xi_{j_1} ~x ... ~x xi_{j_n})`` to ``prod_k He_{m_k}(z_k)``."""
    deg = max(a.order, 0)
    c = np.zeros((deg + 1,) * a.dim)
    for n, h in enumerate(a.kernels):
        ex = _exponents(a.dim, n)
        np.add.at(c, tuple(ex.T), h.values * multiplicities(a.dim, n))
    return HermitePolynomial(c)


def from_hermite(poly: HermitePolynomial) -> ChaosVector:
    dim, deg = poly.dim, poly.degree
    for idx in zip(*np.nonzero(poly.coeffs)):
        if sum(idx) > deg:
            raise ValueError("polynomial total degree exceeds its per-variable degree bound")
    ks = []
    for n in range(deg + 1):
        ex = _exponents(dim, n)
        vals = poly.coeffs[tuple(ex.T)] / multiplicities(dim, n)
        ks.append(SymmetricKernel(n, dim, vals))
    return ChaosVector(dim, tuple(ks))


def eval_hermite(poly: HermitePolynomial, z) -> np.ndarray:
    """Evaluate at points ``z`` of shape ``(..., dim)``."""
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != poly.dim:
        raise ValueError("points have the wrong dimension")
    flat = z.reshape(-1, poly.dim)
    V = np.stack([hermite_e.hermevander(flat[:, k], poly.degree) for k in range(poly.dim)], axis=1)
    nz = np.array(np.nonzero(poly.coeffs)).T
    if nz.size == 0:
        return np.zeros(z.shape[:-1])
    terms = np.prod(V[:, np.arange(poly.dim), nz], axis=-1)  # (S, T)
    vals = terms @ poly.coeffs[tuple(nz.T)]
    return vals.reshape(z.shape[:-1])
