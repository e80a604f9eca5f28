"""N-functions, their numerical Young conjugates, and doubling-growth checks.

An N-function ``B`` is convex and continuous on ``[0, inf)`` with ``B(0) = 0``,
``B(t)/t -> 0`` at the origin and ``B(t)/t -> inf`` at infinity. Three closed
forms are built in, plus a tabulated family defined by samples of the density
``b = B'``::

    power(p)      B(t) = t**p
    power_log(p)  B(t) = t**p * log(e + t)
    exp           B(t) = exp(t) - t - 1     (fails the doubling condition)
    table         B(t) = integral of the piecewise-linear density
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from ._validation import DomainError, ParseError, check_nonnegative_array, check_positive

__all__ = [
    "NFunction",
    "Delta2Certificate",
    "power",
    "power_log",
    "exp_type",
    "tabulated",
    "from_spec",
    "eval_B",
    "complementary",
    "check_delta2",
    "check_nabla2",
]

FAMILIES = ("power", "power_log", "exp", "table")
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class NFunction:
    """An N-function of one of the built-in families.

    Instances are immutable and callable: ``nf(t)`` evaluates ``B(t)``
    elementwise for ``t >= 0``.

    Parameters
    ----------
    family : {'power', 'power_log', 'exp', 'table'}
    p : float, optional
        Exponent for the ``power`` and ``power_log`` families, ``p > 1``.
    table_t, table_b : ndarray, optional
        Nodes (strictly increasing, starting at 0) and density samples for the
        ``table`` family. The density is interpolated linearly and extended
        past the last node with the slope of the final segment.
    table_B : ndarray, optional
        Exact values of ``B`` at the nodes. When omitted they are obtained by
        the trapezoid rule; when given, each segment carries a linear
        correction so that the reconstruction passes through them.
    """

    family: str
    p: float = None
    table_t: np.ndarray = field(default=None, repr=False)
    table_b: np.ndarray = field(default=None, repr=False)
    table_B: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown N-function family {self.family!r}")
        if self.family in ("power", "power_log"):
            if self.p is None or not math.isfinite(self.p) or self.p <= 1:
                raise DomainError(f"{self.family} needs an exponent p > 1, got {self.p!r}")
            object.__setattr__(self, "p", float(self.p))
        if self.family == "table":
            self._init_table()

    def _init_table(self):
        t = np.asarray(self.table_t, dtype=float)
        b = np.asarray(self.table_b, dtype=float)
        if t.ndim != 1 or t.shape != b.shape or t.size < 2:
            raise DomainError("density table needs matching 1-d t and b with at least 2 rows")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(b))):
            raise DomainError("density table has non-finite entries")
        if t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise DomainError("density table t must start at 0 and be strictly increasing")
        if b[0] != 0.0 or np.any(np.diff(b) < 0) or np.any(b[1:] <= 0):
            raise DomainError("density table b must start at 0, be nondecreasing and positive after 0")
        dt = np.diff(t)
        trap = 0.5 * dt * (b[:-1] + b[1:])
        if self.table_B is None:
            values = np.concatenate([[0.0], np.cumsum(trap)])
            corr = np.zeros_like(dt)
        else:
            values = np.asarray(self.table_B, dtype=float)
            if values.shape != t.shape or values[0] != 0.0:
                raise DomainError("table_B must match table_t and start at 0")
            corr = np.diff(values) - trap
        for name, arr in (("table_t", t), ("table_b", b), ("table_B", values)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        corr.setflags(write=False)
        object.__setattr__(self, "_corr", corr)

    def __call__(self, t):
        return eval_B(self, t)

    def density(self, t):
        """Right derivative ``b(t)`` of ``B``."""
        t = check_nonnegative_array(t)
        if self.family == "power":
            return self.p * t ** (self.p - 1.0)
        if self.family == "power_log":
            return self.p * t ** (self.p - 1.0) * np.log(math.e + t) + t**self.p / (math.e + t)
        if self.family == "exp":
            return np.expm1(t)
        tt, bb = self.table_t, self.table_b
        j = np.clip(np.searchsorted(tt, t, side="right") - 1, 0, tt.size - 2)
        slope = (bb[j + 1] - bb[j]) / (tt[j + 1] - tt[j])
        return bb[j] + slope * (t - tt[j])

    @property
    def spec(self):
        if self.family in ("power", "power_log"):
            return f"{self.family}:{self.p!r}"
        if self.family == "exp":
            return "exp"
        return "table"

    def __repr__(self):
        if self.family == "table":
            return f"NFunction(table, {self.table_t.size} nodes up to t={self.table_t[-1]:.6g})"
        return f"NFunction({self.spec})"


@dataclass(frozen=True)
class Delta2Certificate:
    alpha: float
    t0: float
    t_max: float
    satisfied: bool


def power(p):
    return NFunction("power", p)


def power_log(p):
    return NFunction("power_log", p)


def exp_type():
    return NFunction("exp")


def tabulated(t, b, values=None):
    return NFunction("table", table_t=t, table_b=b, table_B=values)


def read_density_csv(path):
    """Load a two-column ``t,b(t)`` CSV; a non-numeric first row is a header."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].lstrip().startswith("#"):
                continue
            if len(row) != 2:
                raise ParseError(f"{path}:{lineno}: expected 2 columns, got {len(row)}")
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                if rows:
                    raise ParseError(f"{path}:{lineno}: non-numeric entry") from None
    if not rows:
        raise ParseError(f"{path}: no data rows")
    t, b = np.array(rows).T
    return tabulated(t, b)


def from_spec(text):
    """Build an N-function from ``power:P``, ``power_log:P``, ``exp`` or ``table:PATH``."""
    text = text.strip()
    name, _, arg = text.partition(":")
    name = name.strip()
    if name == "exp" and not arg:
        return exp_type()
    if name == "table" and arg:
        return read_density_csv(arg.strip())
    if name in ("power", "power_log") and arg:
        try:
            p = float(arg)
        except ValueError:
            raise ParseError(f"bad exponent in N-function spec {text!r}") from None
        return NFunction(name, p)
    raise ParseError(f"unrecognised N-function spec {text!r}")


def eval_B(nf, t):
    """Evaluate ``B(t)``; returns a float for scalar input, else an array."""
    scalar = np.ndim(t) == 0
    t = check_nonnegative_array(t)
    if nf.family == "power":
        out = t**nf.p
    elif nf.family == "power_log":
        out = t**nf.p * np.log(math.e + t)
    elif nf.family == "exp":
        with np.errstate(over="ignore"):
            out = np.expm1(t) - t
    else:
        out = _eval_table(nf, t)
    return float(out) if scalar else out


def _eval_table(nf, t):
    tt, bb, vv, corr = nf.table_t, nf.table_b, nf.table_B, nf._corr
    last = tt.size - 1
    j = np.minimum(np.searchsorted(tt, t, side="right") - 1, last)
    seg = np.minimum(j, last - 1)
    dt = tt[seg + 1] - tt[seg]
    slope = (bb[seg + 1] - bb[seg]) / dt
    tau = t - tt[j]
    inside = j < last
    c = np.where(inside, corr[seg] / dt, 0.0)
    return np.maximum(vv[j] + bb[j] * tau + 0.5 * slope * tau * tau + c * tau, 0.0)


def _golden_max(fun, lo, hi, iterations=90):
    """Vectorised golden-section search for the max of concave ``fun`` on ``[lo, hi]``."""
    a, b = lo.copy(), hi.copy()
    for _ in range(iterations):
        c = b - _GOLDEN * (b - a)
        d = a + _GOLDEN * (b - a)
        left = fun(c) >= fun(d)
        a, b = np.where(left, a, c), np.where(left, d, b)
    x = 0.5 * (a + b)
    return x, fun(x)


def complementary(nf, s_max, grid_size=4096, s_min=None):
    """Tabulate the Young conjugate ``sup_s (s*t - B(s))``.

    The supremum is first located on a log-spaced ``s`` grid over
    ``[s_min, s_max]`` (plus ``s = 0``) and then refined by golden-section
    search inside the neighbouring grid cells. The conjugate is tabulated at
    ``grid_size`` log-spaced ``t`` nodes up to ``B(s_max)/s_max``; beyond that
    value the maximiser would leave the searched range, so the returned
    function is only reliable below it.

    Returns
    -------
    NFunction
        A ``table`` N-function whose density samples are the maximisers and
        whose node values are the computed suprema.
    """
    s_max = check_positive(s_max, "s_max")
    grid_size = int(grid_size)
    if grid_size < 2:
        raise DomainError("grid_size must be at least 2")
    if s_min is None:
        s_min = s_max * 1e-12
    s_min = check_positive(s_min, "s_min")
    if s_min >= s_max:
        raise DomainError("s_min must be below s_max")

    s = np.concatenate([[0.0], np.geomspace(s_min, s_max, grid_size)])
    Bs = eval_B(nf, s)
    chord = np.diff(Bs) / np.diff(s)
    ratio = Bs[1:] / s[1:]
    positive = ratio[ratio > 0]
    if positive.size < 2:
        raise DomainError("B vanishes on the whole s grid; raise s_max")
    t = np.geomspace(positive[0], positive[-1], grid_size)

    # the objective is concave in s, so the grid argmax is where chords cross t
    k = np.clip(np.searchsorted(chord, t, side="left"), 0, s.size - 1)
    lo = s[np.maximum(k - 1, 0)]
    hi = s[np.minimum(k + 1, s.size - 1)]

    def objective(x):
        return x * t - eval_B(nf, x)

    s_star, val = _golden_max(objective, lo, hi)
    grid_val = s[k] * t - Bs[k]
    use_grid = grid_val > val
    s_star = np.where(use_grid, s[k], s_star)
    val = np.where(use_grid, grid_val, val)

    s_star = np.maximum.accumulate(np.maximum(s_star, 0.0))
    val = np.maximum(val, 0.0)
    keep = np.concatenate([[True], np.diff(t) > 0])
    return tabulated(
        np.concatenate([[0.0], t[keep]]),
        np.concatenate([[0.0], s_star[keep]]),
        np.concatenate([[0.0], val[keep]]),
    )


def check_delta2(nf, t0, t_max, grid_size=512):
    """Estimate the doubling constant ``max B(2t)/B(t)`` on ``[t0, t_max]``.

    The ratio is sampled on a log grid. The condition is reported as
    satisfied when the maximum is finite and the largest ratio over the last
    tenth of the grid stays within ten times the median ratio; a finite
    range can never prove the limiting statement, but the exponential family
    blows through this test long before ``t = 50``.
    """
    t0 = float(t0)
    t_max = float(t_max)
    if not (math.isfinite(t0) and math.isfinite(t_max)) or t0 < 0:
        raise DomainError("t0 and t_max must be finite with t0 >= 0")
    if t0 >= t_max:
        raise DomainError(f"need t0 < t_max, got t0={t0}, t_max={t_max}")
    start = max(t0, 1e-12 * t_max)
    t = np.geomspace(start, t_max, int(grid_size))
    with np.errstate(over="ignore", invalid="ignore"):
        ratio = eval_B(nf, 2.0 * t) / eval_B(nf, t)
    ratio = np.where(np.isnan(ratio), np.inf, ratio)
    alpha = float(np.max(ratio))
    tail = float(np.max(ratio[-max(1, ratio.size // 10):]))
    median = float(np.median(ratio))
    satisfied = math.isfinite(alpha) and tail <= 10.0 * median
    return Delta2Certificate(alpha=alpha, t0=t0, t_max=t_max, satisfied=bool(satisfied))


def check_nabla2(nf, t0, t_max, grid_size=512, conj_grid_size=4096):
    """Run :func:`check_delta2` on the conjugate of ``nf``."""
    t_max = float(t_max)
    s_max = 1.0
    # the conjugate is tabulated up to B(s_max)/s_max; cover the doubled range
    while eval_B(nf, s_max) / s_max < 2.0 * t_max:
        s_max *= 2.0
        if s_max > 1e300:
            raise DomainError("could not bracket the conjugate range")
    conj = complementary(nf, s_max, conj_grid_size)
    return check_delta2(conj, t0, t_max, grid_size)
