"""Extremes of expectations under ``P`` over all ``Y`` whose ``Q``-law is fixed.

``H`` is the quantile function of ``dP/dQ`` under ``Q`` and ``G`` the
quantile function of the prescribed law. Pairing the two quantile
functions comonotonically gives the largest value of ``E^P[Y]`` and
pairing them antitonically the smallest; every other objective here is
reduced to one of those two pairings, possibly after pushing ``G``
through a transform.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np
from scipy import integrate

from .compatibility import PointMap, RefinedSpace, refine_space
from .errors import (
    BracketError,
    Divergent,
    InvalidProbability,
    NotDominated,
    NotSingular,
    NumericFailure,
    SpaceMismatch,
)
from .lp import snap
from .measure import FiniteMeasure, MeasureTuple
from .quantiles import (
    ChiSquare1Quantile,
    ComposedQuantile,
    ConstantQuantile,
    LogNormalQuantile,
    NormalQuantile,
    QuantileFunction,
    TabulatedQuantile,
)

CLIP = 1e-10
CLIP_CHECK = 1e-12
GRID_POINTS = 10**6
GRID_REL_TOL = 1e-4
SEARCH_GRID = 1 << 18
COARSE_GRID = 1 << 12
COARSE_POINTS = 1000
X_TOL = 1e-8


# quadrature -----------------------------------------------------------------


def _quad(f, a: float, b: float) -> tuple[float, float]:
    if b <= a:
        return 0.0, 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(f, a, b, limit=400, epsabs=1e-13, epsrel=1e-11)
    return val, err


def _clipped(f, a: float, b: float, clip: float) -> tuple[float, float]:
    lo, hi = max(a, clip), min(b, 1.0 - clip)
    if lo < 0.5 < hi:
        v1, e1 = _quad(f, lo, 0.5)
        v2, e2 = _quad(f, 0.5, hi)
        return v1 + v2, e1 + e2
    return _quad(f, lo, hi)


def quad_unit_interval(f: Callable, a: float = 0.0, b: float = 1.0) -> tuple[float, float]:
    """Integrate ``f`` over ``[a, b]`` inside (0, 1), clipping the endpoints.

    Returns ``(value, tail)`` where ``tail`` is the change observed when the
    clip shrinks from 1e-10 to 1e-12, an estimate of the neglected mass.
    A change that is large in absolute and relative terms means the
    integral does not converge, and ``Divergent`` is raised.
    """
    g = lambda t: float(f(t))  # noqa: E731
    val, err = _clipped(g, a, b, CLIP)
    val2, _ = _clipped(g, a, b, CLIP_CHECK)
    tail = abs(val2 - val)
    if not math.isfinite(val) or not math.isfinite(val2) or tail > max(1e-6, 1e-4 * abs(val)):
        raise Divergent(f"integral unstable under endpoint clipping (change {tail:.3g})")
    return val, tail + err


# pairings of two quantile functions ------------------------------------------


def _pair(H: QuantileFunction, G: QuantileFunction, antitone: bool):
    """``int_0^1 H^-1(t) G^-1(t) dt`` (or with ``G^-1(1 - t)`` when antitone)."""
    if G.tabulated:
        cells = G.reversed_cells() if antitone else G.cells()
        return sum((v * H.integral(s, e) for s, e, v in cells), Fraction(0) if G.exact else 0.0)
    if isinstance(H, ConstantQuantile):
        return H.value * G.mean()
    if H.tabulated:
        total = Fraction(0) if H.exact else 0.0
        for s, e, h in H.cells():
            total = total + h * (G.integral(1 - e, 1 - s) if antitone else G.integral(s, e))
        return total
    if antitone:
        return quad_unit_interval(lambda t: H.ppf(t) * G.ppf(1.0 - t))[0]
    return quad_unit_interval(lambda t: H.ppf(t) * G.ppf(t))[0]


def frechet_hoeffding(H: QuantileFunction, G: QuantileFunction):
    """Largest ``E^P[Y]`` over ``Y`` with ``Q``-quantile ``G``.

    Exact when either side is a rational step function; closed-form pairs
    go through clipped adaptive quadrature.
    """
    return _pair(H, G, antitone=False)


def antitone_pairing(H: QuantileFunction, G: QuantileFunction):
    """Smallest ``E^P[Y]``: ``int H^-1(t) G^-1(1 - t) dt``."""
    return _pair(H, G, antitone=True)


@dataclass(frozen=True)
class NeymanPearsonResult:
    value: object
    level: object
    threshold: object
    rule: str


def neyman_pearson(H: QuantileFunction, q) -> NeymanPearsonResult:
    """Largest ``P(A)`` over events with ``Q(A) = q``.

    The optimal test is the indicator of ``U >= 1 - q`` where ``U`` is the
    (split) uniform rank of the likelihood ratio; on a discrete space the
    boundary atom is taken fractionally.
    """
    if isinstance(q, float) and not math.isfinite(q):
        raise InvalidProbability("q must be a finite number")
    if q < 0 or q > 1:
        raise InvalidProbability(f"q must lie in [0, 1], got {q}")
    exact = isinstance(q, (Fraction, int)) and (not H.tabulated or H.exact)
    one = Fraction(1) if exact else 1.0
    q = Fraction(q) if exact else float(q)
    lo = one - q
    value = H.integral(lo, one)
    return NeymanPearsonResult(value, q, lo, f"reject when U >= {lo}")


def neyman_pearson_curve(H: QuantileFunction, levels) -> list[tuple]:
    return [(q, neyman_pearson(H, q).value) for q in levels]


# transforms -----------------------------------------------------------------


class Transform:
    """Named real function; subclasses advertise structure used by fast paths."""

    name = "custom"
    monotone = False

    def __init__(self, func: Callable | None = None, name: str | None = None):
        self.func = func
        if name:
            self.name = name

    def __call__(self, x):
        return self.func(x)


class Identity(Transform):
    name = "identity"
    monotone = True

    def __call__(self, x):
        return x


class ShiftedSquare(Transform):
    """``x -> (x - shift)**2``."""

    name = "square"

    def __init__(self, shift=0):
        self.shift = shift

    def __call__(self, x):
        return (x - self.shift) ** 2


def _as_transform(v) -> Transform:
    if v is None:
        return Identity()
    if isinstance(v, Transform):
        return v
    return Transform(v)


def _is_standard_normal(G: QuantileFunction) -> bool:
    return isinstance(G, NormalQuantile) and G.loc == 0 and G.scale == 1


def _push_tabulated(G: TabulatedQuantile, v: Callable) -> TabulatedQuantile:
    return TabulatedQuantile([v(x) for x in G.values], list(G.probs))


def _check_monotone_on(G: QuantileFunction, u: Callable) -> None:
    from .errors import NotMonotone

    if G.tabulated:
        xs = list(G.values)
    else:
        grid = (np.arange(COARSE_POINTS) + 0.5) / COARSE_POINTS
        xs = list(np.asarray(G.ppf(grid), dtype=np.float64))
    vals = [u(x) for x in xs]
    for a, b in zip(vals, vals[1:]):
        if float(b) < float(a) - 1e-12:
            raise NotMonotone("utility decreases on the support grid; use transform_objective")


def robust_utility(H: QuantileFunction, G: QuantileFunction, u: Callable | None = None):
    """Worst-case ``E^P[u(Y)]`` for nondecreasing ``u``, attained at ``G^-1(1 - U)``."""
    t = _as_transform(u)
    if isinstance(t, Identity):
        return antitone_pairing(H, G)
    _check_monotone_on(G, t)
    if G.tabulated:
        return antitone_pairing(H, _push_tabulated(G, t))
    return antitone_pairing(H, ComposedQuantile(G, t))


def _grid_pushforward(G: QuantileFunction, v: Callable, points: int) -> np.ndarray:
    mid = (np.arange(points, dtype=np.float64) + 0.5) / points
    return np.sort(np.asarray(v(np.asarray(G.ppf(mid))), dtype=np.float64), kind="stable")


def _cell_weights(H: QuantileFunction, points: int) -> np.ndarray:
    edges = np.arange(points + 1, dtype=np.float64) / points
    return np.diff(np.asarray(H.cumint(edges), dtype=np.float64))


def _grid_objective(H, G, v, points: int, sense: str) -> float:
    vals = _grid_pushforward(G, v, points)
    w = _cell_weights(H, points)
    if sense == "min":
        vals = vals[::-1]
    return float(np.dot(w, vals))


def transform_objective(H: QuantileFunction, G: QuantileFunction, v=None, sense: str = "max", points: int = GRID_POINTS):
    """Extreme of ``E^P[v(Y)]`` over ``Y`` with ``Q``-quantile ``G``.

    ``G`` is first pushed through ``v``: exactly for step functions,
    analytically for the square of a standard normal, and otherwise on a
    sorted grid of ``points`` midpoints, cross-checked against half the
    grid.
    """
    if sense not in ("max", "min"):
        raise ValueError("sense must be 'max' or 'min'")
    t = _as_transform(v)
    antitone = sense == "min"
    if isinstance(t, Identity):
        return _pair(H, G, antitone)
    if G.tabulated:
        return _pair(H, _push_tabulated(G, t), antitone)
    if isinstance(t, ShiftedSquare) and t.shift == 0 and _is_standard_normal(G):
        return _pair(H, ChiSquare1Quantile(), antitone)
    fine = _grid_objective(H, G, t, points, sense)
    coarse = _grid_objective(H, G, t, points // 2, sense)
    if abs(fine - coarse) > GRID_REL_TOL * max(1.0, abs(fine)):
        raise NumericFailure(f"grid pushforward unstable: {coarse!r} vs {fine!r}")
    return fine


# robust variance --------------------------------------------------------------


@dataclass(frozen=True)
class VarianceResult:
    max_value: object
    min_value: object
    argmin_x_max: object
    argmin_x_min: object
    saddle_gap: object
    method: str


def _tabulated_variance(H: QuantileFunction, G: TabulatedQuantile) -> VarianceResult:
    vals, probs = list(G.values), list(G.probs)
    exact = G.exact and (not H.tabulated or H.exact)
    if len(vals) == 1:
        zero = Fraction(0) if exact else 0.0
        return VarianceResult(zero, zero, vals[0], vals[0], zero, "exact")
    two = 2
    cuts = sorted({(a + b) / two for i, a in enumerate(vals) for b in vals[i + 1:]})
    bounds = [None] + cuts + [None]
    pieces = []  # (lo, hi, a, b, s, orientation)
    for lo, hi in zip(bounds, bounds[1:]):
        if lo is None:
            rep = hi - 1
        elif hi is None:
            rep = lo + 1
        else:
            rep = (lo + hi) / two
        order = sorted(range(len(vals)), key=lambda k: ((vals[k] - rep) ** 2, k))
        for label, seq in (("max", order), ("min", order[::-1])):
            zero = Fraction(0) if exact else 0.0
            a = b = s = zero
            start = zero
            for k in seq:
                end = start + probs[k]
                w = H.integral(start, end)
                a, b, s = a + vals[k] ** 2 * w, b + vals[k] * w, s + w
                start = end
            pieces.append((lo, hi, a, b, s, label))

    def best(label):
        top = None
        for lo, hi, a, b, s, lab in pieces:
            if lab != label:
                continue
            x = b / s
            if lo is not None and x < lo:
                x = lo
            if hi is not None and x > hi:
                x = hi
            r = a - 2 * b * x + s * x * x
            if top is None or r < top[0]:
                top = (r, x)
        return top

    vmax, xmax = best("max")
    vmin, xmin = best("min")
    means = [
        b / s
        for lo, hi, a, b, s, lab in pieces
        if lab == "max" and (lo is None or lo <= xmax) and (hi is None or xmax <= hi)
    ]
    if min(means) <= xmax <= max(means):
        gap = Fraction(0) if exact else 0.0
    else:
        gap = min((m - xmax) ** 2 for m in means)
    return VarianceResult(vmax, vmin, xmax, xmin, gap, "exact")


class _VarianceGrid:
    """Sorted quantile grid of ``G`` with ``H`` cell weights at one resolution."""

    def __init__(self, H: QuantileFunction, G: QuantileFunction, points: int):
        mid = (np.arange(points, dtype=np.float64) + 0.5) / points
        self.y = np.asarray(G.ppf(mid), dtype=np.float64)
        self.w = _cell_weights(H, points)

    def evaluate(self, x: float, sense: str) -> tuple[float, float]:
        """Return ``(R(x), E^P[Y])`` for the optimal pairing at ``x``."""
        y = self.y
        s = int(np.searchsorted(y, x))
        ys = np.concatenate((y[:s][::-1], y[s:]))
        d = (ys - x) ** 2
        order = np.argsort(d, kind="stable")
        if sense == "min":
            order = order[::-1]
        return float(np.dot(self.w, d[order])), float(np.dot(self.w, ys[order]))


def _golden(f, lo: float, hi: float, tol: float = X_TOL) -> float:
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - inv * (b - a), a + inv * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - inv * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _grid_variance(H: QuantileFunction, G: QuantileFunction, points: int) -> VarianceResult:
    lo, hi = float(G.ppf(1e-6)), float(G.ppf(1.0 - 1e-6))
    if not hi > lo:
        c = float(G.ppf(0.5))
        return VarianceResult(0.0, 0.0, c, c, 0.0, "grid")
    width = hi - lo
    search = _VarianceGrid(H, G, SEARCH_GRID)

    xmax = _golden(lambda x: search.evaluate(x, "max")[0], lo, hi)
    if min(xmax - lo, hi - xmax) < 1e-6 * width:
        raise BracketError("robust variance minimiser sits on the bracket edge")

    coarse = _VarianceGrid(H, G, COARSE_GRID)
    xs = np.linspace(lo, hi, COARSE_POINTS)
    vals = [coarse.evaluate(x, "min")[0] for x in xs]
    k = int(np.argmin(vals))
    if k in (0, len(xs) - 1):
        raise BracketError("robust variance (min side) minimiser sits on the bracket edge")
    xmin = _golden(lambda x: search.evaluate(x, "min")[0], float(xs[k - 1]), float(xs[k + 1]))

    results = {}
    for sense, x in (("max", xmax), ("min", xmin)):
        fine = _VarianceGrid(H, G, points).evaluate(x, sense)
        half = _VarianceGrid(H, G, points // 2).evaluate(x, sense)[0]
        if abs(fine[0] - half) > GRID_REL_TOL * max(1.0, abs(fine[0])):
            raise NumericFailure(f"robust variance grid unstable: {half!r} vs {fine[0]!r}")
        results[sense] = fine
    gap = (results["max"][1] - xmax) ** 2
    return VarianceResult(results["max"][0], results["min"][0], xmax, xmin, gap, "grid")


def robust_variance(H: QuantileFunction, G: QuantileFunction, points: int = GRID_POINTS) -> VarianceResult:
    """Largest and smallest ``Var^P(Y)`` over ``Y`` with ``Q``-quantile ``G``.

    Both are computed as ``min_x`` of the extreme value of ``E^P[(Y - x)^2]``.
    For step functions the dependence on ``x`` is piecewise quadratic and
    is minimised exactly piece by piece; otherwise a golden-section
    search (max side, convex) and a coarse scan plus local refinement
    (min side) run on a quantile grid. ``saddle_gap`` is ``(E^P Y - x)^2``
    for the best mixture of optimal pairings at the max-side minimiser;
    zero means the exchange of min and max is certified.
    """
    if G.tabulated:
        return _tabulated_variance(H, G)
    # finite second moment check
    quad_unit_interval(lambda t: float(G.ppf(t)) ** 2)
    return _grid_variance(H, G, points)


# singular tuples ------------------------------------------------------------


@dataclass(frozen=True)
class ComonotoneWitness:
    """Extreme map on a refined space; ``direction`` is "upper" or "lower"."""

    direction: str
    refined: RefinedSpace
    point_map: PointMap

    def expectation(self, P: FiniteMeasure):
        vals = self.point_map.codomain.values
        if vals is None:
            raise SpaceMismatch("codomain atoms carry no numeric values")
        lifted = self.refined.lift(P)
        return sum((w * vals[t] for w, t in zip(lifted.weights, self.point_map.assignment)), Fraction(0) if lifted.exact else 0.0)

    def survival(self, P: FiniteMeasure, t):
        vals = self.point_map.codomain.values
        lifted = self.refined.lift(P)
        return sum((w for w, a in zip(lifted.weights, self.point_map.assignment) if vals[a] > t), Fraction(0) if lifted.exact else 0.0)


def _exact_weights(m: FiniteMeasure) -> tuple:
    return m.weights if m.exact else tuple(snap(w) for w in m.weights)


def _block_assignment(order, q, levels, targets, reverse: bool):
    """Split each atom so that the quantile map is constant on every child."""
    splits, assign = {}, {}
    start = Fraction(0)
    for w in order:
        length = q[w]
        cuts = []
        for lev in levels:
            b = 1 - lev if reverse else lev
            if start < b < start + length:
                cuts.append((b - start) / length)
        m = 1
        for c in cuts:
            m = math.lcm(m, c.denominator)
        kids = []
        for k in range(m):
            mid = start + length * (2 * k + 1) / (2 * m)
            u = 1 - mid if reverse else mid
            kids.append(next(t for lev, t in zip(levels, targets) if u <= lev))
        splits[w] = m
        assign[w] = kids
        start += length
    return splits, assign


def _extreme(Q: MeasureTuple, F: MeasureTuple, P: FiniteMeasure, reverse: bool) -> ComonotoneWitness:
    space, cod = Q.space, F.space
    n_atoms = space.size
    keys = cod.values if cod.values is not None else tuple(range(cod.size))
    ranked = sorted(range(cod.size), key=lambda t: (keys[t], t))
    pw = _exact_weights(P)
    splits = [1] * n_atoms
    kids: dict[int, list[int]] = {}
    for Qi, Fi in zip(Q, F):
        q = _exact_weights(Qi)
        f = _exact_weights(Fi)
        block = [w for w in range(n_atoms) if q[w] > 0]
        order = sorted(block, key=lambda w: (pw[w] / q[w], w))
        levels, targets, acc = [], [], Fraction(0)
        for t in ranked:
            if f[t] > 0:
                acc += f[t]
                levels.append(acc)
                targets.append(t)
        s, a = _block_assignment(order, q, levels, targets, reverse)
        for w in block:
            splits[w] = s[w]
            kids[w] = a[w]
    assignment = []
    for w in range(n_atoms):
        assignment.extend(kids.get(w, [ranked[0]] * splits[w]))
    rs = refine_space(space, splits)
    return ComonotoneWitness("lower" if reverse else "upper", rs, PointMap(rs.space, cod, tuple(assignment)))


def singular_extremes(Qtuple: MeasureTuple, Ftuple: MeasureTuple, P: FiniteMeasure):
    """Stochastically largest and smallest compatible maps for a singular tuple.

    Within each support the atoms are ranked by ``dP/dQ_i`` (ties by atom
    order) and laid on ``[0, 1]`` with lengths ``Q_i``; atoms straddling a
    quantile step of ``F_i`` are split just enough for the map to be
    constant on each child. Returns ``(upper, lower)``.
    """
    if Qtuple.n != Ftuple.n:
        from .errors import ArityMismatch

        raise ArityMismatch("Qtuple and Ftuple must have the same length")
    if P.space != Qtuple.space:
        raise SpaceMismatch("P must live on the space of Qtuple")
    owner: dict[int, int] = {}
    for i, Qi in enumerate(Qtuple):
        for w in Qi.support():
            if w in owner:
                raise NotSingular(f"atom {Qtuple.space.atoms[w]!r} is charged by Q{owner[w] + 1} and Q{i + 1}")
            owner[w] = i
    for w in P.support():
        if w not in owner:
            raise NotDominated(f"P charges atom {P.space.atoms[w]!r} outside every support")
    return _extreme(Qtuple, Ftuple, P, False), _extreme(Qtuple, Ftuple, P, True)


# worked example ---------------------------------------------------------------


@dataclass(frozen=True)
class NormalExample:
    max_mean: float
    min_mean: float
    max_second_moment: float
    min_second_moment: float
    variance: VarianceResult


def normal_example(points: int = GRID_POINTS) -> NormalExample:
    """Lognormal(-1/2, 1) likelihood ratio against a standard normal target."""
    H = LogNormalQuantile(-0.5, 1.0)
    G = NormalQuantile()
    sq = ShiftedSquare(0)
    return NormalExample(
        frechet_hoeffding(H, G),
        robust_utility(H, G),
        transform_objective(H, G, sq, "max", points),
        transform_objective(H, G, sq, "min", points),
        robust_variance(H, G, points),
    )
