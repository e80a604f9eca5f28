"""Box-union domains, uniform midpoint grids and the epsilon-cell decomposition.

A domain is a finite union of pairwise disjoint open axis-aligned boxes.
Grids are anchored at the origin: grid cell ``i`` along axis ``k`` is
``[i*h_k, (i+1)*h_k]`` and carries its midpoint ``(i + 1/2)*h_k``. Every box
corner must sit on a grid line, which is what makes the decomposition masks
and the unfolding gather exact.
"""

import itertools
import math
from fractions import Fraction
from dataclasses import dataclass, field

import numpy as np

from ._validation import DomainError, ParseError, ShapeError, check_positive, nearest_integer

__all__ = [
    "Domain",
    "ReferenceCell",
    "Grid",
    "CellDecomposition",
    "parse_domain",
    "parse_cell",
    "cell_index",
    "decompose",
    "lambda_vanishes",
    "boundary_layer_measure",
]


@dataclass(frozen=True)
class Domain:
    """Union of disjoint open boxes, each given as ``(lower, upper)`` corner tuples."""

    boxes: tuple

    def __post_init__(self):
        boxes = tuple((tuple(map(float, lo)), tuple(map(float, hi))) for lo, hi in self.boxes)
        if not boxes:
            raise DomainError("a domain needs at least one box")
        d = len(boxes[0][0])
        for lo, hi in boxes:
            if len(lo) != d or len(hi) != d:
                raise DomainError("all box corners must have the same dimension")
            if not all(math.isfinite(a) and math.isfinite(b) and b > a for a, b in zip(lo, hi)):
                raise DomainError(f"box {lo}-{hi} must have finite, positive edges")
        for (lo1, hi1), (lo2, hi2) in itertools.combinations(boxes, 2):
            if all(a1 < b2 and a2 < b1 for a1, b1, a2, b2 in zip(lo1, hi1, lo2, hi2)):
                raise DomainError(f"boxes {lo1}-{hi1} and {lo2}-{hi2} overlap")
        object.__setattr__(self, "boxes", boxes)

    @classmethod
    def box(cls, lower, upper):
        return cls(((tuple(np.atleast_1d(lower)), tuple(np.atleast_1d(upper))),))

    @property
    def d(self):
        return len(self.boxes[0][0])

    @property
    def measure(self):
        return math.fsum(math.prod(b - a for a, b in zip(lo, hi)) for lo, hi in self.boxes)

    @property
    def bounds(self):
        lo = tuple(min(box[0][k] for box in self.boxes) for k in range(self.d))
        hi = tuple(max(box[1][k] for box in self.boxes) for k in range(self.d))
        return lo, hi

    @property
    def diameter(self):
        lo, hi = self.bounds
        return math.dist(lo, hi)

    def union(self, other):
        return Domain(self.boxes + other.boxes)

    @property
    def spec(self):
        parts = []
        for lo, hi in self.boxes:
            parts.append("box:" + ",".join(map(repr, lo)) + ";" + ",".join(map(repr, hi)))
        return "+".join(parts)


@dataclass(frozen=True)
class ReferenceCell:
    """Axis-aligned reference cell ``Y = (0, l_1) x ... x (0, l_d)``."""

    lengths: tuple

    def __post_init__(self):
        lengths = tuple(check_positive(v, "cell edge") for v in self.lengths)
        if not lengths:
            raise DomainError("reference cell needs at least one edge")
        object.__setattr__(self, "lengths", lengths)

    @classmethod
    def unit(cls, d):
        return cls((1.0,) * d)

    @property
    def d(self):
        return len(self.lengths)

    @property
    def measure(self):
        return math.prod(self.lengths)

    @property
    def diameter(self):
        return math.hypot(*self.lengths)

    def as_domain(self):
        return Domain.box((0.0,) * self.d, self.lengths)


def parse_domain(text):
    """Parse ``box:0,0;1,1+box:...`` (lower corner ``;`` upper corner, ``+`` joins)."""
    boxes = []
    offset = 0
    for part in text.split("+"):
        stripped = part.strip()
        if not stripped.startswith("box:"):
            raise ParseError(f"domain part {stripped!r} must start with 'box:'", offset)
        corners = stripped[4:].split(";")
        if len(corners) != 2:
            raise ParseError(f"box {stripped!r} needs 'lower;upper'", offset)
        try:
            lo, hi = ([float(v) for v in c.split(",")] for c in corners)
        except ValueError:
            raise ParseError(f"non-numeric coordinate in {stripped!r}", offset) from None
        if len(lo) != len(hi):
            raise ParseError(f"corner dimensions differ in {stripped!r}", offset)
        boxes.append((tuple(lo), tuple(hi)))
        offset += len(part) + 1
    return Domain(tuple(boxes))


def parse_cell(text):
    try:
        return ReferenceCell(tuple(float(v) for v in text.split(",")))
    except ValueError:
        raise ParseError(f"bad reference cell {text!r}") from None


@dataclass(frozen=True, eq=False)
class Grid:
    """Conforming uniform midpoint grid over a domain.

    Values live on the dense bounding array ``shape``; ``mask`` marks the
    grid cells whose midpoints lie in the domain. Global index along axis
    ``k`` is ``index_lo[k] + local index``.
    """

    domain: Domain
    h: tuple
    index_lo: tuple = field(init=False)
    shape: tuple = field(init=False)
    mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        d = self.domain.d
        h = np.broadcast_to(np.asarray(self.h, dtype=float), (d,))
        h = tuple(check_positive(v, "grid spacing") for v in h)
        object.__setattr__(self, "h", h)
        box_idx = [(self._to_index(lo), self._to_index(hi)) for lo, hi in self.domain.boxes]
        lo_idx = tuple(min(b[0][k] for b in box_idx) for k in range(d))
        hi_idx = tuple(max(b[1][k] for b in box_idx) for k in range(d))
        shape = tuple(b - a for a, b in zip(lo_idx, hi_idx))
        mask = np.zeros(shape, dtype=bool)
        for lo, hi in box_idx:
            mask[tuple(slice(a - o, b - o) for a, b, o in zip(lo, hi, lo_idx))] = True
        mask.setflags(write=False)
        object.__setattr__(self, "index_lo", lo_idx)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "mask", mask)

    def _to_index(self, corner):
        out = []
        for c, hk in zip(corner, self.h):
            n = nearest_integer(c / hk)
            if n is None:
                raise ShapeError(
                    f"grid spacing {hk!r} does not divide coordinate {c!r}; "
                    "box corners must lie on multiples of h"
                )
            out.append(n)
        return tuple(out)

    @property
    def d(self):
        return self.domain.d

    @property
    def cell_volume(self):
        return math.prod(self.h)

    @property
    def size(self):
        return int(self.mask.sum())

    def axis_indices(self, k):
        return self.index_lo[k] + np.arange(self.shape[k])

    def axis_midpoints(self, k):
        return (self.axis_indices(k) + 0.5) * self.h[k]

    def midpoints(self):
        """Coordinate arrays (``ij`` meshgrid) of all dense-grid midpoints."""
        return np.meshgrid(*(self.axis_midpoints(k) for k in range(self.d)), indexing="ij")

    def same_as(self, other):
        return self.domain == other.domain and np.allclose(self.h, other.h, rtol=1e-12, atol=0)


def cell_index(z, cell):
    """Split ``z`` into lattice index ``[z]_Y`` and remainder ``{z}_Y``.

    Uses the componentwise floor, so ``0 <= {z}_Y < l`` even for negative
    coordinates and ``[z]_Y * l + {z}_Y == z`` up to rounding.
    """
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise DomainError("cell_index needs finite coordinates")
    lengths = np.asarray(cell.lengths)
    idx = np.floor(z / lengths)
    frac = z - idx * lengths
    # z / l can round up onto an integer for tiny negative z
    over = frac >= lengths
    if np.any(over):
        frac = np.where(over, np.nextafter(lengths, 0.0) + 0.0 * frac, frac)
    frac = np.maximum(frac, 0.0)
    return idx.astype(np.int64), frac


@dataclass(frozen=True, eq=False)
class CellDecomposition:
    """Cells ``eps*(xi + Y)`` contained in the domain, with optional grid masks.

    ``xi`` is a ``(K, d)`` integer array sorted lexicographically. The masks
    are only present when the decomposition was built against a grid.
    """

    domain: Domain
    eps: float
    cell: ReferenceCell
    xi: np.ndarray = field(repr=False)
    lambda_measure: float
    grid: Grid = field(default=None, repr=False)
    hat_mask: np.ndarray = field(default=None, repr=False)
    lambda_mask: np.ndarray = field(default=None, repr=False)

    @property
    def n_cells(self):
        return int(self.xi.shape[0])

    @property
    def hat_measure(self):
        return self.domain.measure - self.lambda_measure

    def cell_sizes(self):
        """Grid cells per epsilon-cell along each axis, or None if not an integer."""
        if self.grid is None:
            return None
        out = []
        for hk, lk in zip(self.grid.h, self.cell.lengths):
            n = nearest_integer(self.eps * lk / hk)
            if n is None or n < 1:
                return None
            out.append(n)
        return tuple(out)


def _xi_ranges(lo, hi, eps, cell):
    ranges = []
    for a, b, lk in zip(lo, hi, cell.lengths):
        step = eps * lk
        tol_a = 1e-12 * max(eps, abs(a))
        tol_b = 1e-12 * max(eps, abs(b))
        first = math.ceil((a - tol_a) / step)
        last = math.floor((b + tol_b) / step) - 1
        ranges.append(range(first, last + 1))
    return ranges


def decompose(omega, eps, cell=None, grid=None):
    """Enumerate the epsilon-cells inside ``omega``.

    A lattice cell is kept when its closure lies in the closure of a single
    box; cells straddling two touching boxes are not inside the open union.
    Corner comparisons carry a ``1e-12 * eps`` slack (scaled up for corners
    far from the origin). With ``grid`` the masks of the cell union and of
    its complement are built as well.
    """
    eps = check_positive(eps, "eps")
    if cell is None:
        cell = ReferenceCell.unit(omega.d)
    if cell.d != omega.d:
        raise ShapeError(f"cell dimension {cell.d} differs from domain dimension {omega.d}")

    blocks = []
    for lo, hi in omega.boxes:
        ranges = _xi_ranges(lo, hi, eps, cell)
        if any(len(r) == 0 for r in ranges):
            continue
        mesh = np.meshgrid(*(np.arange(r.start, r.stop) for r in ranges), indexing="ij")
        blocks.append(np.stack([m.ravel() for m in mesh], axis=1))
    if blocks:
        xi = np.concatenate(blocks).astype(np.int64)
        xi = xi[np.lexsort(xi.T[::-1])]
    else:
        xi = np.zeros((0, omega.d), dtype=np.int64)

    lam = _remainder_measure(omega, eps, cell, xi.shape[0])

    hat_mask = lambda_mask = None
    if grid is not None:
        if grid.domain != omega:
            raise ShapeError("grid was built for a different domain")
        hat_mask = _hat_mask(grid, xi, eps, cell)
        lambda_mask = grid.mask & ~hat_mask
        hat_mask.setflags(write=False)
        lambda_mask.setflags(write=False)
    xi.setflags(write=False)
    return CellDecomposition(omega, eps, cell, xi, lam, grid, hat_mask, lambda_mask)


def _decimal(x):
    # shortest round-trip decimal, so 0.3 is read as 3/10
    return Fraction(repr(float(x)))


def _remainder_measure(omega, eps, cell, n_cells):
    """``|Omega| - |Y| eps^d n_cells`` in exact rationals over the decimal inputs."""
    total = sum(
        (math.prod((_decimal(b) - _decimal(a) for a, b in zip(lo, hi)), start=Fraction(1)) for lo, hi in omega.boxes),
        Fraction(0),
    )
    covered = math.prod((_decimal(v) for v in cell.lengths), start=Fraction(1)) * _decimal(eps) ** omega.d * n_cells
    return float(max(total - covered, Fraction(0)))


def _hat_mask(grid, xi, eps, cell):
    if xi.shape[0] == 0:
        return np.zeros(grid.shape, dtype=bool)
    xi_lo = xi.min(axis=0)
    xi_hi = xi.max(axis=0)
    table = np.zeros(tuple(xi_hi - xi_lo + 1), dtype=bool)
    table[tuple((xi - xi_lo).T)] = True
    sel = []
    valid = []
    for k in range(grid.d):
        owner = np.floor(grid.axis_midpoints(k) / (eps * cell.lengths[k])).astype(np.int64)
        local = owner - xi_lo[k]
        ok = (local >= 0) & (local < table.shape[k])
        sel.append(np.clip(local, 0, table.shape[k] - 1))
        valid.append(ok)
    hat = table[np.ix_(*sel)]
    for k, ok in enumerate(valid):
        shape = [1] * grid.d
        shape[k] = -1
        hat = hat & ok.reshape(shape)
    return hat & grid.mask


def lambda_vanishes(omega, eps_seq, cell=None):
    """Measure of the boundary remainder for each epsilon in ``eps_seq``."""
    eps_seq = list(eps_seq)
    if not eps_seq:
        raise DomainError("eps_seq must not be empty")
    return [decompose(omega, eps, cell).lambda_measure for eps in eps_seq]


def boundary_layer_measure(grid, width):
    """Mask-counted measure of grid cells whose midpoint is within ``width`` of the boundary.

    For disjoint open boxes the boundary of the union is the union of the box
    boundaries, so the distance is taken to the faces of the containing box.
    """
    width = float(width)
    near = np.zeros(grid.shape, dtype=bool)
    coords = grid.midpoints()
    for lo, hi in grid.domain.boxes:
        inside = np.ones(grid.shape, dtype=bool)
        dist = np.full(grid.shape, np.inf)
        for k in range(grid.d):
            x = coords[k]
            inside &= (x > lo[k]) & (x < hi[k])
            dist = np.minimum(dist, np.minimum(x - lo[k], hi[k] - x))
        near |= inside & (dist <= width)
    return int((near & grid.mask).sum()) * grid.cell_volume
