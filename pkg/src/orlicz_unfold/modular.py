"""Modular integrals, Luxemburg norms and pairings of grid-sampled functions.

All integrals are midpoint sums ``sum f(x_i) * h^d`` accumulated with a fixed
pairwise tree, so a given array always reduces to the same bits.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._validation import DomainError, ShapeError, check_finite_array, check_positive
from .cells import Grid
from .nfunc import eval_B

__all__ = [
    "pairwise_sum",
    "SampledFunction",
    "ModularValue",
    "modular_value",
    "luxemburg_norm",
    "dual_pairing",
    "modular_of_samples",
    "norm_of_samples",
]

DEFAULT_REL_TOL = 1e-10


def pairwise_sum(values):
    """Sum with a balanced binary tree over the flattened array."""
    a = np.asarray(values, dtype=float).ravel()
    if a.size == 0:
        return 0.0
    while a.size > 1:
        if a.size % 2:
            a = np.append(a, 0.0)
        a = a[0::2] + a[1::2]
    return float(a[0])


class SampledFunction:
    """A function sampled at the grid midpoints of a box-union domain.

    ``values`` is the dense array over the grid's bounding index box; entries
    outside ``grid.mask`` are kept at zero and never read.
    """

    __slots__ = ("grid", "values")

    def __init__(self, grid, values):
        values = np.array(values, dtype=float)
        if values.shape != grid.shape:
            raise ShapeError(f"values of shape {values.shape} do not match grid {grid.shape}")
        values[~grid.mask] = 0.0
        values.setflags(write=False)
        self.grid = grid
        self.values = values

    @classmethod
    def from_callable(cls, grid, fn):
        """Sample ``fn(x_0, ..., x_{d-1})`` (vectorised over coordinate arrays)."""
        vals = np.broadcast_to(np.asarray(fn(*grid.midpoints()), dtype=float), grid.shape)
        return cls(grid, np.where(grid.mask, vals, 0.0))

    @classmethod
    def constant(cls, grid, c):
        return cls(grid, np.where(grid.mask, float(c), 0.0))

    @classmethod
    def from_inside_values(cls, grid, flat):
        flat = np.asarray(flat, dtype=float).ravel()
        if flat.size != grid.size:
            raise ShapeError(f"expected {grid.size} inside values, got {flat.size}")
        dense = np.zeros(grid.shape)
        dense[grid.mask] = flat
        return cls(grid, dense)

    @classmethod
    def on_domain(cls, domain, h, fn):
        return cls.from_callable(Grid(domain, h), fn)

    def inside_values(self):
        """Samples inside the domain in row-major grid order."""
        return self.values[self.grid.mask]

    def restrict(self, mask):
        """Zero the samples outside ``mask`` (a dense boolean array)."""
        return SampledFunction(self.grid, np.where(mask, self.values, 0.0))

    def _coerce(self, other):
        if isinstance(other, SampledFunction):
            if not self.grid.same_as(other.grid):
                raise ShapeError("functions are sampled on different grids")
            return other.values
        return float(other)

    def __add__(self, other):
        return SampledFunction(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return SampledFunction(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other):
        return SampledFunction(self.grid, self._coerce(other) - self.values)

    def __mul__(self, other):
        return SampledFunction(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self):
        return SampledFunction(self.grid, -self.values)

    def __abs__(self):
        return SampledFunction(self.grid, np.abs(self.values))

    def integral(self):
        return pairwise_sum(self.values) * self.grid.cell_volume

    def __repr__(self):
        return f"SampledFunction(d={self.grid.d}, h={self.grid.h}, n={self.grid.size})"


@dataclass(frozen=True)
class ModularValue:
    value: float
    k: float


def modular_of_samples(values, weight, nf, k):
    """``weight * sum B(|v|/k)`` over an arbitrary sample array."""
    a = np.abs(np.asarray(values, dtype=float))
    with np.errstate(over="ignore"):
        return pairwise_sum(eval_B(nf, a / k)) * weight


def norm_of_samples(values, weight, nf, rel_tol=DEFAULT_REL_TOL):
    """Luxemburg norm of samples that each carry measure ``weight``.

    Brackets the root of ``modular(k) = 1`` by doubling or halving from
    ``max|v|`` and then bisects until the bracket's relative width is at most
    ``rel_tol``. The upper end is returned, so the modular there is <= 1.
    """
    rel_tol = float(rel_tol)
    if not 0.0 < rel_tol < 1.0:
        raise DomainError(f"rel_tol must lie in (0, 1), got {rel_tol}")
    a = np.abs(check_finite_array(values)).ravel()
    a = a[a > 0]
    if a.size == 0 or weight == 0:
        return 0.0

    def fits(k):
        return modular_of_samples(a, weight, nf, k) <= 1.0

    k0 = float(a.max())
    if fits(k0):
        hi, lo = k0, 0.5 * k0
        while fits(lo):
            hi, lo = lo, 0.5 * lo
            if lo == 0.0:
                raise DomainError("modular stays below 1 as k -> 0; B is not an N-function")
    else:
        lo, hi = k0, 2.0 * k0
        while not fits(hi):
            lo, hi = hi, 2.0 * hi
            if math.isinf(hi):
                raise DomainError("modular never drops below 1")
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if fits(mid):
            hi = mid
        else:
            lo = mid
    return hi


def modular_value(u, nf, k):
    """Midpoint approximation of the modular integral of ``B(|u|/k)`` over the domain."""
    k = check_positive(k, "k")
    return ModularValue(modular_of_samples(u.inside_values(), u.grid.cell_volume, nf, k), k)


def luxemburg_norm(u, nf, rel_tol=DEFAULT_REL_TOL):
    """``inf{k > 0 : modular(u, k) <= 1}`` up to relative ``rel_tol``."""
    return norm_of_samples(u.inside_values(), u.grid.cell_volume, nf, rel_tol)


def dual_pairing(u, v):
    """Midpoint approximation of the integral of ``u * v``."""
    if not u.grid.same_as(v.grid):
        raise ShapeError("dual_pairing needs both functions on the same grid")
    return pairwise_sum(u.values * v.values) * u.grid.cell_volume
