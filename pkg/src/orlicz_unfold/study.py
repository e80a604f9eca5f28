"""Epsilon sweeps that turn the unfolding limit theorems into checkable tables.

Each ``run_*_study`` returns a :class:`StudyReport` with one row per
epsilon. The five CSV columns carry a per-study meaning:

========  ===========================  ==========================  ====================
kind      error                        bound                       norm
========  ===========================  ==========================  ====================
strong    ||T(w) - w||  on Omega x Y   modulus bound + Lambda part ||w||
periodic  ||T(f_eps) - f||             ||f|| over Lambda x Y       ||f|| on Y
uci       |int B(w) - int B(T(w))|     int over Lambda of B(w)     ||w_eps||
weak      max_v |<w_eps - M(w^), v>|   max_V |<T(w_eps) - w^, V>|  ||w_eps||
liminf    ||w^|| on Omega x Y          (1 + |Y|) ||w_eps||         ||w_eps||
========  ===========================  ==========================  ====================

Assertions that fail are collected in ``StudyReport.failures`` rather than
raised, so a sweep always produces its full table.
"""

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import maximum_filter1d, minimum_filter1d

from ._validation import DomainError, ParseError, ShapeError
from .cells import Grid, ReferenceCell, decompose, parse_cell, parse_domain
from .expr import parse_expression
from .modular import (
    DEFAULT_REL_TOL,
    SampledFunction,
    dual_pairing,
    luxemburg_norm,
    modular_value,
    norm_of_samples,
)
from .nfunc import from_spec
from .unfold import TwoScaleFunction, oscillate, unfold, y_grid

__all__ = [
    "StudyConfig",
    "StudyRow",
    "StudyReport",
    "load_config",
    "run_study",
    "run_strong_study",
    "run_periodic_study",
    "run_uci_study",
    "run_weak_study",
    "run_liminf_study",
    "emit_report",
    "read_report",
    "modulus_of_continuity",
]

KINDS = ("strong", "periodic", "uci", "weak", "liminf")
CONFIG_KEYS = ("nfunction", "domain", "cell", "kind", "eps", "m", "f", "g", "w", "out", "rel_tol")
CSV_HEADER = ("eps", "error", "bound", "norm", "lambda_measure")

WEAK_THRESHOLD = 1e-2
UCI_THRESHOLD = 1e-3
FLOOR = 1e-12


@dataclass(frozen=True)
class StudyConfig:
    nfunction: str
    domain: str
    kind: str
    eps: tuple
    m: int = 8
    cell: str = None
    f: str = None
    g: str = None
    w: str = None
    out: str = None
    rel_tol: float = DEFAULT_REL_TOL

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParseError(f"kind must be one of {', '.join(KINDS)}, got {self.kind!r}")
        eps = tuple(float(e) for e in self.eps)
        if not eps or any(not math.isfinite(e) or e <= 0 for e in eps):
            raise DomainError("eps must be a nonempty list of positive numbers")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise DomainError("eps must be strictly decreasing")
        object.__setattr__(self, "eps", eps)
        if int(self.m) != self.m or self.m < 2:
            raise DomainError(f"m must be an integer >= 2, got {self.m!r}")
        object.__setattr__(self, "m", int(self.m))

        nf = from_spec(self.nfunction)
        omega = parse_domain(self.domain)
        cell = ReferenceCell.unit(omega.d) if self.cell is None else parse_cell(self.cell)
        if cell.d != omega.d:
            raise ShapeError("cell and domain dimensions differ")
        object.__setattr__(self, "_nf", nf)
        object.__setattr__(self, "_omega", omega)
        object.__setattr__(self, "_cell", cell)

        exprs = {}
        for key, forbidden in (("f", "x"), ("g", "y"), ("w", "y")):
            src = getattr(self, key)
            if src is None:
                continue
            ex = parse_expression(src, omega.d)
            if ex.uses(forbidden):
                raise ParseError(f"{key} may not depend on {forbidden}")
            exprs[key] = ex
        object.__setattr__(self, "_exprs", exprs)
        needs = {"strong": ("w",), "periodic": ("f",)}.get(self.kind)
        if needs and needs[0] not in exprs:
            raise ParseError(f"{self.kind} study needs '{needs[0]}'")
        if self.kind in ("uci", "weak", "liminf") and not ({"f", "w"} & exprs.keys()):
            raise ParseError(f"{self.kind} study needs 'f' (with optional 'g') or 'w'")
        for e in eps:
            self.grid_for(e)

    @property
    def nf(self):
        return self._nf

    @property
    def omega(self):
        return self._omega

    @property
    def reference_cell(self):
        return self._cell

    def expr(self, key):
        return self._exprs.get(key)

    def spacing(self, eps):
        return tuple(eps * lk / self.m for lk in self._cell.lengths)

    def grid_for(self, eps):
        try:
            return Grid(self._omega, self.spacing(eps))
        except ShapeError as exc:
            raise ShapeError(f"eps={eps!r} with m={self.m} is not commensurate with the domain: {exc}") from None

    def echo(self):
        return {k: getattr(self, k) for k in CONFIG_KEYS if getattr(self, k) is not None}


def load_config(path):
    """Read a ``key = value`` study config; ``#`` starts a comment."""
    raw = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not sep or not key:
                raise ParseError(f"{path}:{lineno}: expected 'key = value'")
            if key not in CONFIG_KEYS:
                raise ParseError(f"{path}:{lineno}: unknown key {key!r}")
            raw[key] = value
    for key in ("nfunction", "domain", "kind", "eps"):
        if key not in raw:
            raise ParseError(f"{path}: missing key {key!r}")
    try:
        raw["eps"] = tuple(float(v) for v in raw["eps"].split(","))
        if "m" in raw:
            raw["m"] = int(raw["m"])
        if "rel_tol" in raw:
            raw["rel_tol"] = float(raw["rel_tol"])
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if "out" in raw:
        out = Path(raw["out"])
        if not out.is_absolute():
            raw["out"] = str(Path(path).parent / out)
    return StudyConfig(**raw)


@dataclass
class StudyRow:
    eps: float
    error: float
    bound: float
    norm: float
    lambda_measure: float
    extra: dict = field(default_factory=dict)

    def as_tuple(self):
        return (self.eps, self.error, self.bound, self.norm, self.lambda_measure)


@dataclass
class StudyReport:
    kind: str
    rows: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def passed(self):
        return not self.failures

    def column(self, name):
        if name in CSV_HEADER:
            return np.array([getattr(r, name) for r in self.rows])
        return np.array([r.extra[name] for r in self.rows])

    def fail(self, row, message):
        self.failures.append((row, message))


# -- sampling helpers ------------------------------------------------------


def _sample_x(expr, grid):
    return SampledFunction.from_callable(grid, lambda *xs: expr(x=xs))


def _sample_y(expr, cell, m):
    return SampledFunction.from_callable(y_grid(cell, m), lambda *ys: expr(y=ys))


def _sequence_member(cfg, eps, grid):
    """``w_eps``: ``f(x/eps) * g(x)`` when ``f`` is configured, else the fixed ``w``."""
    f, g = cfg.expr("f"), cfg.expr("g")
    if f is None:
        return _sample_x(cfg.expr("w"), grid)
    m = (cfg.m,) * grid.d
    member = oscillate(_sample_y(f, cfg.reference_cell, m), eps, cfg.omega, grid.h, cfg.reference_cell)
    if g is not None:
        member = member * _sample_x(g, grid)
    return member


def _limit_object(cfg, grid):
    """The two-scale limit: ``f(y) g(x)``, or ``w(x)`` lifted constant in ``y``."""
    f, g, w = cfg.expr("f"), cfg.expr("g"), cfg.expr("w")
    m = (cfg.m,) * grid.d
    if f is None:
        return TwoScaleFunction.lift_x(_sample_x(w, grid), cfg.reference_cell, m)

    def fn(xs, ys):
        val = f(y=ys)
        return val * g(x=xs) if g is not None else val

    return TwoScaleFunction.from_callable(grid, cfg.reference_cell, m, fn)


def _setup(cfg, eps):
    grid = cfg.grid_for(eps)
    return grid, decompose(cfg.omega, eps, cfg.reference_cell, grid)


def _ones_norm(cfg):
    measure = cfg.omega.measure * cfg.reference_cell.measure
    return norm_of_samples(np.ones(1), measure, cfg.nf, cfg.rel_tol)


def modulus_of_continuity(fn, domain, delta, h, refine=3):
    """Over-estimate ``sup |w(a) - w(b)|`` over pairs in one box with ``|a - b| <= delta``.

    ``fn`` is sampled on each box at midpoints of a grid ``refine`` times
    finer than ``h`` (odd ``refine`` keeps the original midpoints). Moving
    one axis at a time stays inside the box, so the sum of the per-axis
    sliding-window ranges bounds the modulus over all sampled pairs.
    """
    if refine < 1 or refine % 2 == 0:
        raise DomainError("refine must be a positive odd integer")
    h = np.broadcast_to(np.asarray(h, dtype=float), (domain.d,))
    best = 0.0
    for lo, hi in domain.boxes:
        axes = []
        for a, b, hk in zip(lo, hi, h):
            hr = hk / refine
            n = max(1, round((b - a) / hr))
            axes.append(a + (np.arange(n) + 0.5) * hr)
        vals = np.broadcast_to(np.asarray(fn(*np.meshgrid(*axes, indexing="ij")), dtype=float),
                               tuple(len(a) for a in axes))
        total = 0.0
        for k, (hk, ax) in enumerate(zip(h, axes)):
            width = min(int(math.floor(delta / (hk / refine) + 1e-9)), len(ax) - 1) + 1
            if width < 2:
                continue
            spread = maximum_filter1d(vals, width, axis=k, mode="nearest") - minimum_filter1d(
                vals, width, axis=k, mode="nearest"
            )
            total += float(spread.max())
        best = max(best, total)
    return best


# -- studies ----------------------------------------------------------------


def run_strong_study(cfg):
    """Strong convergence of ``T_eps(w)`` to ``w`` with a modulus-of-continuity bound."""
    rep = StudyReport("strong", config=cfg.echo())
    w = cfg.expr("w")
    nf, tol = cfg.nf, cfg.rel_tol
    ones = _ones_norm(cfg)
    for i, eps in enumerate(cfg.eps):
        grid, dec = _setup(cfg, eps)
        ws = _sample_x(w, grid)
        lifted = TwoScaleFunction.lift_x(ws, cfg.reference_cell, (cfg.m,) * grid.d)
        diff = TwoScaleFunction.from_unfolded(unfold(ws, dec)) - lifted
        error = diff.norm(nf, tol)
        mod = modulus_of_continuity(lambda *xs: w(x=xs), cfg.omega, eps * cfg.reference_cell.diameter, grid.h)
        boundary = lifted.restrict_rows(dec.lambda_mask).norm(nf, tol)
        bound = mod * ones + boundary
        rep.rows.append(StudyRow(eps, error, bound, luxemburg_norm(ws, nf, tol), dec.lambda_measure,
                                 {"modulus": mod, "boundary_norm": boundary}))
        if error > bound * (1 + 1e-6):
            rep.fail(i, f"error {error!r} exceeds modulus bound {bound!r}")
        if i and error > rep.rows[i - 1].error * (1 + 2 * tol):
            rep.fail(i, f"error increased from {rep.rows[i - 1].error!r} to {error!r}")
    return rep


def run_periodic_study(cfg):
    """Unfolded oscillating functions versus their periodic profile."""
    rep = StudyReport("periodic", config=cfg.echo())
    f = cfg.expr("f")
    nf, tol, cell = cfg.nf, cfg.rel_tol, cfg.reference_cell
    for i, eps in enumerate(cfg.eps):
        grid, dec = _setup(cfg, eps)
        m = (cfg.m,) * grid.d
        fy = _sample_y(f, cell, m)
        f_eps = oscillate(fy, eps, cfg.omega, grid.h, cell)
        diff = TwoScaleFunction.from_unfolded(unfold(f_eps, dec)) - TwoScaleFunction.lift_y(fy, grid, cell)
        error = diff.norm(nf, tol)
        # independent route: modular = |Lambda| * int_Y B(|f|/k) dy
        lam_counted = int(dec.lambda_mask.sum()) * grid.cell_volume
        remainder = norm_of_samples(fy.inside_values(), lam_counted * fy.grid.cell_volume, nf, tol)
        profile = luxemburg_norm(fy, nf, tol)
        rep.rows.append(StudyRow(eps, error, remainder, profile, dec.lambda_measure))
        if abs(error - remainder) > 1e-10 * remainder:
            rep.fail(i, f"error {error!r} differs from remainder norm {remainder!r}")
    return rep


def run_uci_study(cfg):
    """Integral and modular gaps between a sequence and its unfolding."""
    rep = StudyReport("uci", config=cfg.echo())
    nf, tol, ymeas = cfg.nf, cfg.rel_tol, cfg.reference_cell.measure
    for i, eps in enumerate(cfg.eps):
        grid, dec = _setup(cfg, eps)
        ws = _sequence_member(cfg, eps, grid)
        tw = unfold(ws, dec)
        gap_l1 = abs(ws.integral() - tw.integral() / ymeas)
        full_B = modular_value(ws, nf, 1.0).value
        gap_B = abs(full_B - tw.modular(nf, 1.0) / ymeas)
        rest = ws.restrict(dec.lambda_mask)
        lam_B = modular_value(rest, nf, 1.0).value
        lam_l1 = abs(rest).integral()
        rep.rows.append(StudyRow(eps, gap_B, lam_B, luxemburg_norm(ws, nf, tol), dec.lambda_measure,
                                 {"gap_l1": gap_l1, "lambda_l1": lam_l1}))
        if gap_B > lam_B + FLOOR:
            rep.fail(i, f"modular gap {gap_B!r} exceeds remainder modular {lam_B!r}")
    first, last = rep.rows[0], rep.rows[-1]
    if last.extra["lambda_l1"] <= UCI_THRESHOLD * first.extra["lambda_l1"] + FLOOR:
        for name, a, b in (("gap_l1", first.extra["gap_l1"], last.extra["gap_l1"]), ("gap_B", first.error, last.error)):
            if b > UCI_THRESHOLD * (a + FLOOR):
                rep.fail(None, f"{name} did not decay: {a!r} -> {b!r}")
    return rep


def _x_family():
    two_pi = 2 * math.pi
    return {
        "1": lambda xs: np.ones_like(xs[0]),
        "x": lambda xs: xs[0],
        "sin": lambda xs: np.sin(two_pi * xs[0]),
        "cos": lambda xs: np.cos(two_pi * xs[0]),
    }


def _y_family():
    two_pi = 2 * math.pi
    return {
        "1": lambda ys: np.ones_like(ys[0]),
        "sin": lambda ys: np.sin(two_pi * ys[0]),
        "cos": lambda ys: np.cos(two_pi * ys[0]),
    }


def run_weak_study(cfg):
    """Pairings of ``w_eps`` and ``T_eps(w_eps)`` against a fixed test family."""
    rep = StudyReport("weak", config=cfg.echo())
    nf, tol, cell = cfg.nf, cfg.rel_tol, cfg.reference_cell
    xfam, yfam = _x_family(), _y_family()
    for i, eps in enumerate(cfg.eps):
        grid, dec = _setup(cfg, eps)
        m = (cfg.m,) * grid.d
        ws = _sequence_member(cfg, eps, grid)
        tw = unfold(ws, dec)
        tw2 = TwoScaleFunction.from_unfolded(tw)
        limit = _limit_object(cfg, grid)
        mean = limit.mean_y()
        extra = {}
        for name, v in xfam.items():
            vs = SampledFunction.from_callable(grid, lambda *xs: v(xs))
            extra[f"omega_{name}"] = abs(dual_pairing(ws, vs) - dual_pairing(mean, vs))
            both = (tw * unfold(vs, dec)).integral() / cell.measure
            extra[f"prop5_{name}"] = abs(dual_pairing(ws, vs) - both)
            for yname, phi in yfam.items():
                test = TwoScaleFunction.from_callable(grid, cell, m, lambda xs, ys: v(xs) * phi(ys))
                extra[f"unfolded_{name}_{yname}"] = abs(tw2.pairing(test) - limit.pairing(test))
        omega_gap = max(v for k, v in extra.items() if k.startswith("omega_"))
        unf_gap = max(v for k, v in extra.items() if k.startswith("unfolded_"))
        extra["prop5"] = max(v for k, v in extra.items() if k.startswith("prop5_"))
        rep.rows.append(StudyRow(eps, omega_gap, unf_gap, luxemburg_norm(ws, nf, tol), dec.lambda_measure, extra))
        if dec.n_cells and int(dec.lambda_mask.sum()) == 0 and extra["prop5"] > 1e-10:
            rep.fail(i, f"pairing equivalence gap {extra['prop5']!r} on an exactly tiled row")
    first, last = rep.rows[0], rep.rows[-1]
    for key in first.extra:
        a, b = first.extra[key], last.extra[key]
        if b > WEAK_THRESHOLD * (a + FLOOR):
            rep.fail(None, f"{key} gap did not shrink below {WEAK_THRESHOLD} x initial: {a!r} -> {b!r}")
    return rep


def run_liminf_study(cfg):
    """Norm of the two-scale limit against ``(1 + |Y|)`` times the sequence norms."""
    rep = StudyReport("liminf", config=cfg.echo())
    nf, tol = cfg.nf, cfg.rel_tol
    factor = 1.0 + cfg.reference_cell.measure
    for eps in cfg.eps:
        grid, dec = _setup(cfg, eps)
        ws = _sequence_member(cfg, eps, grid)
        norm = luxemburg_norm(ws, nf, tol)
        limit_norm = _limit_object(cfg, grid).norm(nf, tol)
        rep.rows.append(StudyRow(eps, limit_norm, factor * norm, norm, dec.lambda_measure))
    tail = rep.rows[len(rep.rows) // 2:]
    target = rep.rows[-1].error
    floor = min(r.bound for r in tail)
    if target > floor + 1e-6:
        rep.fail(None, f"limit norm {target!r} exceeds liminf proxy {floor!r}")
    return rep


_RUNNERS = {
    "strong": run_strong_study,
    "periodic": run_periodic_study,
    "uci": run_uci_study,
    "weak": run_weak_study,
    "liminf": run_liminf_study,
}


def run_study(cfg):
    return _RUNNERS[cfg.kind](cfg)


# -- output -----------------------------------------------------------------


def _fmt(x):
    return repr(float(x))


def emit_report(rep, path):
    """Write the CSV table and, for two or more rows, a log-log SVG next to it."""
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in rep.rows:
            writer.writerow([_fmt(v) for v in row.as_tuple()])
    if len(rep.rows) >= 2:
        _plot(rep, path.with_suffix(".svg"))


def _plot(rep, svg_path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    eps = rep.column("eps")
    with matplotlib.rc_context({"svg.hashsalt": "orlicz-unfold"}):
        fig, ax = plt.subplots(figsize=(5, 4))
        for name in ("error", "bound"):
            y = rep.column(name)
            keep = y > 0
            if keep.any():
                ax.plot(eps[keep], y[keep], marker="o", label=name)
        ax.set_xscale("log")
        if ax.lines:
            ax.set_yscale("log")
            ax.legend()
        ax.set_xlabel("eps")
        ax.set_title(f"{rep.kind} study")
        fig.savefig(svg_path, format="svg", metadata={"Date": None})
        plt.close(fig)


def read_report(path):
    """Parse an emitted CSV back into a list of float tuples."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_HEADER:
            raise ParseError(f"{path}: unexpected header {header}")
        return [tuple(float(v) for v in row) for row in reader]
