"""Periodic unfolding as an exact re-indexing of grid samples.

With the grid spacing dividing ``eps * l_k`` on every axis, the unfolded
value at cell ``xi`` and y-node ``j`` is the sample at global grid index
``xi * m + j`` where ``m = eps * l / h`` is the number of grid cells per
epsilon-cell. Nothing is interpolated, so every change-of-variables identity
holds up to summation order.
"""

import math

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import ShapeError, check_positive
from .cells import Grid, ReferenceCell, decompose
from .modular import (
    DEFAULT_REL_TOL,
    SampledFunction,
    modular_of_samples,
    norm_of_samples,
    pairwise_sum,
)

__all__ = [
    "UnfoldedFunction",
    "TwoScaleFunction",
    "UnfoldingOperator",
    "unfold",
    "mean_Y",
    "oscillate",
    "unfold_product_check",
    "y_grid",
]


def _cells_per_eps(dec):
    m = dec.cell_sizes()
    if m is None:
        need = ", ".join(f"{dec.eps * lk!r}/n" for lk in dec.cell.lengths)
        raise ShapeError(
            f"grid spacing {dec.grid.h if dec.grid else None} is not commensurate with "
            f"eps={dec.eps!r}; h must equal ({need}) for integer n"
        )
    return m


def _y_multi_index(m):
    mesh = np.meshgrid(*(np.arange(n) for n in m), indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def _gather_index(dec):
    """Flat dense-grid positions, shape ``(K, prod(m))``, of each (cell, y-node)."""
    m = np.asarray(_cells_per_eps(dec))
    grid = dec.grid
    idx = dec.xi[:, None, :] * m + _y_multi_index(m)[None, :, :] - np.asarray(grid.index_lo)
    if idx.size and (idx.min() < 0 or np.any(idx.max(axis=(0, 1)) >= np.asarray(grid.shape))):
        raise ShapeError("decomposition cells fall outside the grid")
    flat = np.ravel_multi_index(tuple(np.moveaxis(idx, -1, 0)), grid.shape)
    return flat.reshape(dec.xi.shape[0], -1)


def y_grid(cell, m):
    """Midpoint grid on the reference cell with ``m[k]`` nodes along axis ``k``."""
    return Grid(cell.as_domain(), tuple(lk / n for lk, n in zip(cell.lengths, m)))


class UnfoldedFunction:
    """Values of an unfolded function on (cell, y-node) pairs, y fastest.

    Only cells in the decomposition are stored; on the boundary remainder
    the function is zero. Each stored value represents the product measure
    ``|eps*(xi+Y)| * |y-cell| = |Y| * h^d``.
    """

    __slots__ = ("decomposition", "y_nodes", "values")

    def __init__(self, decomposition, y_nodes, values):
        values = np.asarray(values, dtype=float)
        expected = (decomposition.n_cells, math.prod(y_nodes))
        if values.shape != expected:
            raise ShapeError(f"unfolded values must have shape {expected}, got {values.shape}")
        self.decomposition = decomposition
        self.y_nodes = tuple(y_nodes)
        self.values = values

    @property
    def weight(self):
        dec = self.decomposition
        return dec.cell.measure * dec.grid.cell_volume

    def y_coordinates(self):
        """``(prod(m), d)`` array of y-node midpoints."""
        lengths = np.asarray(self.decomposition.cell.lengths)
        return (_y_multi_index(self.y_nodes) + 0.5) * lengths / np.asarray(self.y_nodes)

    def integral(self):
        return pairwise_sum(self.values) * self.weight

    def modular(self, nf, k):
        return modular_of_samples(self.values, self.weight, nf, check_positive(k, "k"))

    def norm(self, nf, rel_tol=DEFAULT_REL_TOL):
        return norm_of_samples(self.values, self.weight, nf, rel_tol)

    def _coerce(self, other):
        if isinstance(other, UnfoldedFunction):
            if other.values.shape != self.values.shape:
                raise ShapeError("unfolded functions come from different decompositions")
            return other.values
        return float(other)

    def _new(self, values):
        return UnfoldedFunction(self.decomposition, self.y_nodes, values)

    def __add__(self, other):
        return self._new(self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._new(self.values - self._coerce(other))

    def __mul__(self, other):
        return self._new(self.values * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self):
        return self._new(-self.values)

    def __repr__(self):
        return f"UnfoldedFunction(cells={self.values.shape[0]}, y_nodes={self.y_nodes})"


def unfold(phi, dec):
    """Unfold ``phi`` over the cells of ``dec`` by an exact gather."""
    if dec.grid is None or not dec.grid.same_as(phi.grid):
        raise ShapeError("decomposition must be built on the grid of phi")
    m = _cells_per_eps(dec)
    flat = _gather_index(dec)
    return UnfoldedFunction(dec, m, phi.values.ravel()[flat])


def mean_Y(w):
    """Average over y on each cell; piecewise constant on cells, zero elsewhere."""
    dec = w.decomposition
    out = np.zeros(dec.grid.shape)
    if w.values.shape[0]:
        means = w.values.mean(axis=1)
        flat = _gather_index(dec)
        out.ravel()[flat.ravel()] = np.repeat(means, flat.shape[1])
    return SampledFunction(dec.grid, out)


def oscillate(f, eps, omega, h, cell=None):
    """Sample ``f(x/eps)`` on the grid of ``omega`` with spacing ``h``.

    ``f`` must be sampled on the reference cell with spacing ``h/eps``; each
    grid point then reads the y-node ``i mod m``, with no interpolation.
    """
    eps = check_positive(eps, "eps")
    if cell is None:
        cell = ReferenceCell(tuple(b for b in f.grid.domain.bounds[1]))
    grid = Grid(omega, h)
    m = []
    for hk, lk in zip(grid.h, cell.lengths):
        n = round(eps * lk / hk)
        if n < 1 or abs(eps * lk / hk - n) > 1e-9 * n:
            raise ShapeError(f"h={hk!r} does not divide eps*l={eps * lk!r}")
        m.append(n)
    if f.grid.shape != tuple(m):
        raise ShapeError(f"f has {f.grid.shape} y-nodes, oscillation needs {tuple(m)}")
    sel = [np.mod(grid.axis_indices(k), m[k]) for k in range(grid.d)]
    vals = f.values[np.ix_(*sel)]
    return SampledFunction(grid, np.where(grid.mask, vals, 0.0))


def unfold_product_check(v, w, dec):
    """True iff unfolding commutes with the pointwise product, bit for bit."""
    return bool(np.array_equal(unfold(v * w, dec).values, unfold(v, dec).values * unfold(w, dec).values))


class TwoScaleFunction:
    """Function on ``Omega x Y`` sampled on (x grid midpoint, y-node) pairs.

    Rows follow the inside x-samples in row-major order; columns follow the
    y-nodes. Used for quantities that are not constant in x on cells, such
    as ``T_eps(w) - w``.
    """

    __slots__ = ("grid", "cell", "y_nodes", "values")

    def __init__(self, grid, cell, y_nodes, values):
        values = np.asarray(values, dtype=float)
        expected = (grid.size, math.prod(y_nodes))
        if values.shape != expected:
            raise ShapeError(f"two-scale values must have shape {expected}, got {values.shape}")
        self.grid = grid
        self.cell = cell
        self.y_nodes = tuple(y_nodes)
        self.values = values

    @property
    def weight(self):
        return self.grid.cell_volume * math.prod(lk / n for lk, n in zip(self.cell.lengths, self.y_nodes))

    def y_coordinates(self):
        lengths = np.asarray(self.cell.lengths)
        return (_y_multi_index(self.y_nodes) + 0.5) * lengths / np.asarray(self.y_nodes)

    @classmethod
    def lift_x(cls, u, cell, y_nodes):
        """``(x, y) -> u(x)``."""
        col = u.inside_values()[:, None]
        return cls(u.grid, cell, y_nodes, np.broadcast_to(col, (col.shape[0], math.prod(y_nodes))))

    @classmethod
    def lift_y(cls, f, grid, cell):
        """``(x, y) -> f(y)`` for ``f`` sampled on the y-grid of ``cell``."""
        row = f.inside_values()[None, :]
        return cls(grid, cell, f.grid.shape, np.broadcast_to(row, (grid.size, row.shape[1])))

    @classmethod
    def from_callable(cls, grid, cell, y_nodes, fn):
        """Sample ``fn(xs, ys)`` where ``xs``/``ys`` are lists of coordinate columns/rows."""
        xs = [c[grid.mask][:, None] for c in grid.midpoints()]
        yc = (_y_multi_index(y_nodes) + 0.5) * np.asarray(cell.lengths) / np.asarray(y_nodes)
        ys = [yc[:, k][None, :] for k in range(grid.d)]
        vals = np.broadcast_to(np.asarray(fn(xs, ys), dtype=float), (grid.size, math.prod(y_nodes)))
        return cls(grid, cell, y_nodes, vals)

    @classmethod
    def from_unfolded(cls, w):
        """Spread unfolded values over every x-sample of their cell; zero rows on the remainder."""
        dec = w.decomposition
        grid = dec.grid
        dense = np.zeros((math.prod(grid.shape), w.values.shape[1]))
        if w.values.shape[0]:
            flat = _gather_index(dec)
            dense[flat.ravel()] = np.repeat(w.values, flat.shape[1], axis=0)
        return cls(grid, dec.cell, w.y_nodes, dense[grid.mask.ravel()])

    def restrict_rows(self, mask):
        """Zero the rows whose x-sample lies outside the dense boolean ``mask``."""
        keep = mask[self.grid.mask]
        return self._new(np.where(keep[:, None], self.values, 0.0))

    def _coerce(self, other):
        if isinstance(other, TwoScaleFunction):
            if other.values.shape != self.values.shape or not self.grid.same_as(other.grid):
                raise ShapeError("two-scale functions live on different grids")
            return other.values
        return float(other)

    def _new(self, values):
        return TwoScaleFunction(self.grid, self.cell, self.y_nodes, values)

    def __add__(self, other):
        return self._new(self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self._new(self.values - self._coerce(other))

    def __mul__(self, other):
        return self._new(self.values * self._coerce(other))

    __rmul__ = __mul__

    def __neg__(self):
        return self._new(-self.values)

    def integral(self):
        return pairwise_sum(self.values) * self.weight

    def pairing(self, other):
        return pairwise_sum(self.values * self._coerce(other)) * self.weight

    def modular(self, nf, k):
        return modular_of_samples(self.values, self.weight, nf, check_positive(k, "k"))

    def norm(self, nf, rel_tol=DEFAULT_REL_TOL):
        return norm_of_samples(self.values, self.weight, nf, rel_tol)

    def mean_y(self):
        dense = np.zeros(self.grid.shape)
        dense[self.grid.mask] = self.values.mean(axis=1)
        return SampledFunction(self.grid, dense)


class UnfoldingOperator(TransformerMixin, BaseEstimator):
    """Unfolding operator as a scikit-learn style transformer.

    ``fit`` builds the epsilon-cell decomposition for the grid of the given
    sampled function; ``transform`` maps sampled functions on that grid to
    :class:`UnfoldedFunction` objects. ``mean_value`` applies the cell-wise
    average that maps two-scale functions back to the domain.

    Parameters
    ----------
    eps : float
        Cell scale.
    cell : tuple of float, optional
        Reference cell edge lengths; the unit cube when omitted.

    Examples
    --------
    >>> from orlicz_unfold.cells import Domain, Grid
    >>> grid = Grid(Domain.box(0.0, 1.0), 1 / 16)
    >>> phi = SampledFunction.from_callable(grid, lambda x: x)
    >>> op = UnfoldingOperator(eps=0.25).fit(phi)
    >>> op.transform(phi).values.shape
    (4, 4)
    """

    def __init__(self, eps=0.5, cell=None):
        self.eps = eps
        self.cell = cell

    def _reference_cell(self, d):
        return ReferenceCell.unit(d) if self.cell is None else ReferenceCell(tuple(self.cell))

    def fit(self, X, y=None):
        grid = X if isinstance(X, Grid) else X.grid
        check_positive(self.eps, "eps")
        dec = decompose(grid.domain, self.eps, self._reference_cell(grid.d), grid)
        self.y_nodes_ = _cells_per_eps(dec)
        self.decomposition_ = dec
        self.lambda_measure_ = dec.lambda_measure
        return self

    def transform(self, X):
        check_is_fitted(self, "decomposition_")
        return unfold(X, self.decomposition_)

    def mean_value(self, W):
        check_is_fitted(self, "decomposition_")
        if isinstance(W, TwoScaleFunction):
            return W.mean_y()
        return mean_Y(W)
