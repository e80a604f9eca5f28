import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from orlicz_unfold import DomainError, ParseError, ShapeError
from orlicz_unfold.cells import (
    Domain,
    Grid,
    ReferenceCell,
    boundary_layer_measure,
    cell_index,
    decompose,
    lambda_vanishes,
    parse_cell,
    parse_domain,
)

UNIT_Y = ReferenceCell.unit(1)


def test_parse_domain_union():
    omega = parse_domain("box:0,0;1,1+box:1,0;2,0.5")
    assert omega.d == 2
    assert omega.measure == 1.5
    assert omega.boxes[1] == ((1.0, 0.0), (2.0, 0.5))


@pytest.mark.parametrize("text", ["0;1", "box:0;1;2", "box:a;1", "box:0,0;1", "box:0;1+cube:1;2"])
def test_parse_domain_errors(text):
    with pytest.raises(ParseError):
        parse_domain(text)


def test_parse_domain_error_offset():
    with pytest.raises(ParseError) as info:
        parse_domain("box:0;1+bad")
    assert info.value.offset == 8


def test_overlapping_boxes_rejected():
    with pytest.raises(DomainError):
        parse_domain("box:0;1+box:0.5;2")
    with pytest.raises(DomainError):
        parse_domain("box:1;0")


def test_touching_boxes_allowed():
    assert parse_domain("box:0;1+box:1;2").measure == 2.0


def test_reference_cell():
    cell = parse_cell("2,0.5")
    assert cell.measure == 1.0
    assert cell.diameter == pytest.approx(np.hypot(2, 0.5))
    with pytest.raises(ParseError):
        parse_cell("1,x")
    with pytest.raises(DomainError):
        ReferenceCell((1.0, 0.0))


@pytest.mark.parametrize(
    "z, idx, frac",
    [(2.7, 2, 0.7), (-1.3, -2, 0.7), (0.0, 0, 0.0)],
)
def test_cell_index_examples(z, idx, frac):
    i, f = cell_index([z], UNIT_Y)
    assert i[0] == idx
    assert f[0] == pytest.approx(frac, abs=1e-15)


def test_cell_index_any_cell_at_origin():
    i, f = cell_index([0.0, 0.0], ReferenceCell((0.3, 2.0)))
    assert list(i) == [0, 0] and list(f) == [0.0, 0.0]


def test_cell_index_rejects_nonfinite():
    with pytest.raises(DomainError):
        cell_index([np.inf], UNIT_Y)


def test_cell_index_reconstruction_million():
    rng = np.random.default_rng(7)
    z = rng.uniform(-50, 50, size=1_000_000)
    eps = 0.37
    cell = ReferenceCell((1.3,))
    i, f = cell_index(z[:, None] / eps, cell)
    rebuilt = eps * (i[:, 0] * 1.3 + f[:, 0])
    assert np.all((f >= 0) & (f < 1.3))
    assert np.all(np.abs(rebuilt - z) <= 4 * np.spacing(np.abs(z)) + 4 * np.spacing(50.0))


@settings(max_examples=200, deadline=None)
@given(z=st.floats(-1e6, 1e6, allow_nan=False), length=st.floats(0.1, 10.0))
def test_cell_index_fraction_in_cell(z, length):
    i, f = cell_index([z], ReferenceCell((length,)))
    assert 0.0 <= f[0] < length
    assert i[0] * length + f[0] == pytest.approx(z, abs=4 * np.spacing(max(abs(z), length)))


def test_decompose_nontiling_interval():
    dec = decompose(parse_domain("box:0;1"), 0.3)
    assert dec.xi[:, 0].tolist() == [0, 1, 2]
    assert dec.lambda_measure == 0.1


def test_decompose_square_tiles():
    dec = decompose(parse_domain("box:0,0;1,1"), 0.5)
    assert dec.xi.tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]
    assert dec.lambda_measure == 0.0


def test_decompose_large_eps_empty():
    omega = parse_domain("box:0,0;1,1")
    dec = decompose(omega, 2.0)
    assert dec.n_cells == 0
    assert dec.lambda_measure == omega.measure


def test_decompose_validation():
    with pytest.raises(DomainError):
        decompose(parse_domain("box:0;1"), 0.0)
    with pytest.raises(ShapeError):
        decompose(parse_domain("box:0;1"), 0.5, ReferenceCell.unit(2))


def test_decompose_cells_stay_in_one_box():
    # (0,0.9) and (1,1.9) with eps=0.3 -> 3 + 2 cells; (0.9,1.2) straddles the gap
    omega = parse_domain("box:0;0.9+box:1;1.9")
    dec = decompose(omega, 0.3)
    assert dec.xi[:, 0].tolist() == [0, 1, 2, 4, 5]
    assert dec.lambda_measure == pytest.approx(0.3, abs=1e-15)


def test_decompose_touching_boxes_do_not_share_cells():
    omega = parse_domain("box:0;0.45+box:0.45;1")
    dec = decompose(omega, 0.3)
    # [0,0.3] fits in box one; [0.6,0.9] fits in box two; [0.3,0.6] straddles
    assert dec.xi[:, 0].tolist() == [0, 2]


def test_decompose_tolerance_absorbs_rounding():
    # 0.1 * 3 != 0.3 in binary but the corner still lies on the lattice
    dec = decompose(parse_domain("box:0;0.3"), 0.1)
    assert dec.n_cells == 3
    assert dec.lambda_measure == 0.0


def test_decompose_lexicographic_and_deterministic():
    omega = parse_domain("box:1,0;2,1+box:0,0;1,1")
    a = decompose(omega, 0.25)
    b = decompose(omega, 0.25)
    assert np.array_equal(a.xi, b.xi)
    keys = [tuple(r) for r in a.xi.tolist()]
    assert keys == sorted(keys)


def test_cell_containment_invariant():
    omega = parse_domain("box:0,0;1,0.7+box:1.2,0;2,1")
    eps = 0.15
    dec = decompose(omega, eps)
    for xi in dec.xi:
        lo, hi = eps * xi, eps * (xi + 1)
        assert any(
            np.all(lo >= np.array(bl) - 1e-12) and np.all(hi <= np.array(bh) + 1e-12) for bl, bh in omega.boxes
        )


def test_lambda_measure_formula():
    omega = parse_domain("box:0,0;1,0.7+box:1.2,0;2,1")
    for eps in (0.3, 0.15, 0.1, 0.05):
        dec = decompose(omega, eps)
        assert dec.lambda_measure == pytest.approx(omega.measure - eps**2 * dec.n_cells, abs=1e-12)


def test_masks_partition_grid():
    omega = parse_domain("box:0,0;1,0.6+box:1,0;2,1")
    grid = Grid(omega, 0.05)
    dec = decompose(omega, 0.3, grid=grid)
    assert not np.any(dec.hat_mask & dec.lambda_mask)
    assert np.array_equal(dec.hat_mask | dec.lambda_mask, grid.mask)
    counted = dec.lambda_mask.sum() * grid.cell_volume
    assert counted == pytest.approx(dec.lambda_measure, abs=1e-12)


def test_lambda_vanishes_examples():
    omega = parse_domain("box:0;1")
    assert lambda_vanishes(omega, [0.5, 0.25, 0.125]) == [0.0, 0.0, 0.0]
    assert lambda_vanishes(omega, [0.3, 0.15, 0.075]) == [0.1, 0.1, 0.025]
    with pytest.raises(DomainError):
        lambda_vanishes(omega, [])


def test_lambda_vanishes_union_sums_boxes():
    omega = parse_domain("box:0;0.9+box:1;1.9")
    parts = [decompose(parse_domain(b), 0.2).lambda_measure for b in ("box:0;0.9", "box:1;1.9")]
    assert lambda_vanishes(omega, [0.2])[0] == pytest.approx(sum(parts), abs=1e-15)


@pytest.mark.parametrize("eps", [0.3, 0.15, 0.1, 0.05])
def test_lambda_bounded_by_boundary_layer(eps):
    omega = parse_domain("box:0,0;1,1")
    grid = Grid(omega, 0.0125)
    dec = decompose(omega, eps, grid=grid)
    layer = boundary_layer_measure(grid, eps * ReferenceCell.unit(2).diameter)
    assert 0.0 <= dec.lambda_measure <= omega.measure
    assert dec.lambda_measure <= layer


def test_grid_requires_conforming_corners():
    with pytest.raises(ShapeError):
        Grid(parse_domain("box:0;1"), 0.3)
    grid = Grid(parse_domain("box:0.5;1.5"), 0.25)
    assert grid.index_lo == (2,)
    assert grid.axis_midpoints(0).tolist() == [0.625, 0.875, 1.125, 1.375]


def test_grid_midpoints_inside_domain():
    omega = parse_domain("box:0,0;1,1+box:1,0;2,0.5")
    grid = Grid(omega, 0.25)
    xs, ys = grid.midpoints()
    inside = np.zeros(grid.shape, dtype=bool)
    for (a, b), (c, d) in ((bx[0], bx[1]) for bx in omega.boxes):
        inside |= (xs > a) & (xs < c) & (ys > b) & (ys < d)
    assert np.array_equal(inside, grid.mask)
    assert grid.size == 24


def test_domain_helpers():
    omega = Domain.box((0.0, 0.0), (3.0, 4.0))
    assert omega.diameter == 5.0
    assert parse_domain(omega.spec).boxes == omega.boxes
