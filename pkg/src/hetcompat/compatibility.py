"""Checking, deciding and constructing compatibility on finite spaces.

A tuple ``Q = (Q_1..Q_n)`` on atoms is compatible with targets
``F = (F_1..F_n)`` on a finite codomain when one map ``X`` pushes every
``Q_i`` to ``F_i``. Splitting atoms into equally weighted children plays the
role of an independent uniform variable; with enough splitting, the order
check on density clouds is both necessary and sufficient.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from ._kernels import backend as kernel_backend
from .convex_order import ConvexCertificate, OrderVerdict, het_order
from .divergences import kl_divergence, total_variation
from .errors import (
    CodomainMismatch,
    Incompatible,
    InvalidRefinement,
    ModeError,
    OracleViolation,
    SpaceMismatch,
    TooLarge,
)
from .lp import lp_feasible, snap
from .measure import (
    FiniteMeasure,
    FiniteSpace,
    MeasureTuple,
    average_reference,
    density_profile,
)

MAX_CHILDREN = 10**4
SEARCH_CAP = 10**7
FLOAT_TOL = 1e-10


@dataclass(frozen=True)
class PointMap:
    """Deterministic map from source atoms to codomain atoms (by index)."""

    source: FiniteSpace
    codomain: FiniteSpace
    assignment: tuple[int, ...]

    def __post_init__(self):
        if len(self.assignment) != self.source.size:
            raise InvalidRefinement("a point map must assign every source atom")
        if any(not 0 <= a < self.codomain.size for a in self.assignment):
            raise CodomainMismatch("assignment points outside the codomain")

    def pushforward(self, measure: FiniteMeasure) -> FiniteMeasure:
        if measure.space != self.source:
            raise SpaceMismatch("measure does not live on the map's source")
        zero = Fraction(0) if measure.exact else 0.0
        out = [zero] * self.codomain.size
        for a, w in zip(self.assignment, measure.weights):
            out[a] = out[a] + w
        return FiniteMeasure(self.codomain, tuple(out))

    def pushforward_tuple(self, tup: MeasureTuple) -> MeasureTuple:
        return MeasureTuple(tuple(self.pushforward(m) for m in tup))

    def as_labels(self) -> dict[str, str]:
        return {s: self.codomain.atoms[a] for s, a in zip(self.source.atoms, self.assignment)}


@dataclass(frozen=True)
class MarkovKernel:
    """Row-stochastic matrix ``matrix[source atom][codomain atom]``."""

    source: FiniteSpace
    codomain: FiniteSpace
    matrix: tuple

    def pushforward(self, measure: FiniteMeasure) -> FiniteMeasure:
        if measure.space != self.source:
            raise SpaceMismatch("measure does not live on the kernel's source")
        exact = measure.exact and all(isinstance(v, Fraction) for row in self.matrix for v in row)
        zero = Fraction(0) if exact else 0.0
        out = []
        for t in range(self.codomain.size):
            out.append(sum((w * row[t] for w, row in zip(measure.weights, self.matrix)), zero))
        return FiniteMeasure(self.codomain, tuple(out))

    def row_residual(self) -> float:
        return max(abs(float(sum(row)) - 1.0) for row in self.matrix)

    def denominator(self) -> int:
        """LCM of the denominators of all rational entries."""
        out = 1
        for row in self.matrix:
            for v in row:
                out = math.lcm(out, Fraction(v).denominator)
        return out


@dataclass(frozen=True)
class RefinedSpace:
    """Atoms split into children; child ``(w, k)`` gets ``1/split[w]`` of atom w."""

    parent: FiniteSpace
    splits: tuple[int, ...]
    space: FiniteSpace
    parent_of: tuple[int, ...]

    def lift(self, measure: FiniteMeasure) -> FiniteMeasure:
        if measure.space != self.parent:
            raise SpaceMismatch("measure does not live on the parent space")
        w = []
        for a, m in enumerate(self.splits):
            x = measure.weights[a]
            share = x / m if isinstance(x, Fraction) else float(x) / m
            w.extend([share] * m)
        return FiniteMeasure(self.space, tuple(w))

    def lift_tuple(self, tup: MeasureTuple) -> MeasureTuple:
        return MeasureTuple(tuple(self.lift(m) for m in tup))

    @property
    def uniform_split(self) -> int | None:
        return self.splits[0] if len(set(self.splits)) == 1 else None


def refine_space(space: FiniteSpace, m) -> RefinedSpace:
    splits = (m,) * space.size if isinstance(m, (int, np.integer)) else tuple(m)
    if len(splits) != space.size:
        raise InvalidRefinement("one split factor per atom is required")
    if any(int(s) != s or s < 1 for s in splits):
        raise InvalidRefinement(f"split factors must be positive integers, got {splits}")
    splits = tuple(int(s) for s in splits)
    labels, parents = [], []
    for a, (atom, s) in enumerate(zip(space.atoms, splits)):
        if s == 1:
            labels.append(atom)
        else:
            labels.extend(f"{atom}/{k}" for k in range(s))
        parents.extend([a] * s)
    return RefinedSpace(space, splits, FiniteSpace(tuple(labels)), tuple(parents))


def refine(tup: MeasureTuple, m) -> tuple[RefinedSpace, MeasureTuple]:
    """Split every atom of the tuple's space ``m`` ways (or per-atom factors)."""
    rs = refine_space(tup.space, m)
    return rs, rs.lift_tuple(tup)


# verification ---------------------------------------------------------------


def _check_spaces(X: PointMap, Q: MeasureTuple, F: MeasureTuple | None) -> None:
    if Q.space != X.source:
        raise SpaceMismatch("Qtuple does not live on the map's source space")
    if F is not None:
        if F.space != X.codomain:
            raise CodomainMismatch("Ftuple does not live on the map's codomain")
        if F.n != Q.n:
            raise CodomainMismatch(f"tuple sizes differ: {Q.n} vs {F.n}")


def verify_map(X: PointMap, Qtuple: MeasureTuple, Ftuple: MeasureTuple) -> bool:
    """True when ``Q_i`` pushed through ``X`` equals ``F_i`` for every i.

    Equality is exact for rational inputs and within 1e-10 otherwise.
    """
    _check_spaces(X, Qtuple, Ftuple)
    exact = Qtuple.exact and Ftuple.exact
    for q, f in zip(Qtuple, Ftuple):
        push = X.pushforward(q)
        if exact:
            if push.weights != f.weights:
                return False
        elif any(abs(float(a) - float(b)) > FLOAT_TOL for a, b in zip(push.weights, f.weights)):
            return False
    return True


def conditional_identity_check(X: PointMap, Qtuple: MeasureTuple, Ftuple: MeasureTuple | None = None) -> tuple:
    """Per codomain point, the sup-norm gap between target and conditional densities.

    With ``F = Q o X^-1`` for the average ``Q``, the residual at ``x`` is
    ``max_i |F_i(x) / F(x) - Q_i(X = x) / Q(X = x)|``. Points outside the
    support of ``F`` get 0 when no target charges them and ``inf``
    otherwise. Without ``Ftuple`` the pushforwards themselves are used.
    """
    _check_spaces(X, Qtuple, Ftuple)
    ref = average_reference(Qtuple)
    F = X.pushforward(ref)
    pushed = X.pushforward_tuple(Qtuple)
    targets = pushed if Ftuple is None else Ftuple
    exact = Qtuple.exact and targets.exact
    out = []
    for x in range(X.codomain.size):
        fx = F.weights[x]
        if fx == 0:
            out.append(0.0 if all(t.weights[x] == 0 for t in targets) else math.inf)
            continue
        worst = Fraction(0) if exact else 0.0
        for t, p in zip(targets, pushed):
            if exact:
                gap = abs(t.weights[x] / fx - p.weights[x] / fx)
            else:
                gap = abs(float(t.weights[x]) / float(fx) - float(p.weights[x]) / float(fx))
            worst = max(worst, gap)
        out.append(worst if exact else float(worst))
    return tuple(out)


# kernels --------------------------------------------------------------------


def _target_support(F: MeasureTuple) -> list[int]:
    return [t for t in range(F.space.size) if any(f.weights[t] != 0 for f in F)]


def _allowed_targets(Q: MeasureTuple, F: MeasureTuple) -> dict[int, list[int]]:
    """Targets each charged atom may use without breaking absolute continuity."""
    ref = average_reference(Q)
    out = {}
    for w in range(Q.space.size):
        if ref.weights[w] == 0:
            continue
        out[w] = [
            t
            for t in range(F.space.size)
            if all(not (q.weights[w] != 0 and f.weights[t] == 0) for q, f in zip(Q, F))
        ]
    return out


def _complete_kernel(Q: MeasureTuple, F: MeasureTuple, rows: dict[int, list], exact: bool) -> MarkovKernel:
    """Fill rows of uncharged atoms with a point mass and wrap the matrix."""
    zero, one = (Fraction(0), Fraction(1)) if exact else (0.0, 1.0)
    support = _target_support(F) or [0]
    matrix = []
    for w in range(Q.space.size):
        if w in rows:
            matrix.append(tuple(rows[w]))
        else:
            row = [zero] * F.space.size
            row[support[0]] = one
            matrix.append(tuple(row))
    return MarkovKernel(Q.space, F.space, tuple(matrix))


def kernel_compat(Qtuple: MeasureTuple, Ftuple: MeasureTuple, exact: bool | None = None) -> MarkovKernel | None:
    """Find a Markov kernel with ``Q_i K = F_i`` for all i, or None.

    This is a direct LP on the kernel entries, independent of the order
    check on density clouds.
    """
    if Qtuple.n != Ftuple.n:
        raise CodomainMismatch(f"tuple sizes differ: {Qtuple.n} vs {Ftuple.n}")
    if exact is None:
        exact = Qtuple.exact and Ftuple.exact
    allowed = _allowed_targets(Qtuple, Ftuple)
    cols = [(w, t) for w in sorted(allowed) for t in allowed[w]]
    zero = Fraction(0) if exact else 0.0
    conv = Fraction if exact else float
    rows, rhs = [], []
    for w in sorted(allowed):
        rows.append([1 if cw == w else 0 for cw, _ in cols])
        rhs.append(1)
    for q, f in zip(Qtuple, Ftuple):
        for t in range(Ftuple.space.size):
            row = [conv(q.weights[cw]) if ct == t else zero for cw, ct in cols]
            if all(v == 0 for v in row) and f.weights[t] == 0:
                continue
            rows.append(row)
            rhs.append(conv(f.weights[t]))
    if not cols:
        return None
    res = lp_feasible(rows, rhs, exact=exact)
    if not res.feasible:
        return None
    kernel_rows = {w: [zero] * Ftuple.space.size for w in allowed}
    for (w, t), v in zip(cols, res.x):
        kernel_rows[w][t] = v
    return _complete_kernel(Qtuple, Ftuple, kernel_rows, res.exact)


def transplant_kernel(Qtuple: MeasureTuple, Ftuple: MeasureTuple, verdict: OrderVerdict) -> MarkovKernel:
    """Kernel built from a martingale coupling of the two density clouds.

    With ``pi`` coupling the target cloud point ``z_i`` (mass ``p_i``) to
    the source cloud point ``y_j`` (mass ``q_j``), atom ``w`` with density
    ``y_j`` sends ``pi_ij / q_j * F(t) / p_i`` to each target ``t`` whose
    density is ``z_i``. The martingale rows make every ``Q_i K`` equal
    ``F_i``.
    """
    if not verdict.holds:
        raise Incompatible("no coupling: the order check failed")
    coupling = verdict.witness
    exact = verdict.exact
    dens_q, cloud_q = density_profile(Qtuple.as_exact() if exact else Qtuple)
    dens_f, cloud_f = density_profile(Ftuple.as_exact() if exact else Ftuple)
    Fref = dens_f.reference
    src_idx = {p: k for k, p in enumerate(coupling.target.points)}
    tgt_idx = {p: k for k, p in enumerate(coupling.source.points)}

    def lookup(table, point):
        if point in table:
            return table[point]
        # float clouds merge nearby points; match by tolerance
        for p, k in table.items():
            if all(abs(float(a) - float(b)) <= 1e-9 for a, b in zip(p, point)):
                return k
        raise OracleViolation("density point missing from its cloud")

    zero = Fraction(0) if exact else 0.0
    rows = {}
    for w, y in enumerate(dens_q.values):
        if y is None:
            continue
        j = lookup(src_idx, y)
        qj = coupling.target.weights[j]
        row = [zero] * Ftuple.space.size
        for t, z in enumerate(dens_f.values):
            if z is None:
                continue
            i = lookup(tgt_idx, z)
            pij = coupling.matrix[i][j]
            if pij != 0:
                row[t] = pij / qj * Fref.weights[t] / coupling.source.weights[i]
        rows[w] = row
    return _complete_kernel(Qtuple, Ftuple, rows, exact)


def het_equiv_kernel_test(Qtuple: MeasureTuple, Ftuple: MeasureTuple) -> bool:
    """Run the order check and the kernel LP; raise if they disagree."""
    het = het_order(Ftuple, Qtuple).holds
    ker = kernel_compat(Qtuple, Ftuple) is not None
    if het != ker:
        raise OracleViolation(f"order check says {het}, kernel LP says {ker}")
    return True


# construction ---------------------------------------------------------------


@dataclass(frozen=True)
class Construction:
    refined: RefinedSpace
    point_map: PointMap
    kernel: MarkovKernel
    split: int
    snap_distance: float = 0.0
    lifted: MeasureTuple | None = field(default=None, compare=False)

    def __iter__(self):
        return iter((self.refined, self.point_map))


def _snap_tuple(tup: MeasureTuple) -> tuple[MeasureTuple, float]:
    measures, dist = [], 0.0
    for m in tup:
        w = [snap(v) for v in m.weights]
        total = sum(w)
        w = [v / total for v in w]
        dist = max(dist, max(abs(float(a) - float(b)) for a, b in zip(w, m.weights)))
        measures.append(FiniteMeasure(m.space, tuple(w)))
    return MeasureTuple(tuple(measures)), dist


def _require_exact(Q: MeasureTuple, F: MeasureTuple, snap_floats: bool):
    if Q.exact and F.exact:
        return Q, F, 0.0
    if not snap_floats:
        raise ModeError("exact pushforward equality needs rational inputs; pass snap_floats=True")
    Q2, d1 = _snap_tuple(Q.as_exact() if Q.exact else Q)
    F2, d2 = _snap_tuple(F.as_exact() if F.exact else F)
    return Q2, F2, max(d1, d2)


def _counts_from_kernel(kernel: MarkovKernel, m: int) -> list[list[int]]:
    counts = []
    for row in kernel.matrix:
        c = [v * m for v in row]
        if any(Fraction(v).denominator != 1 for v in c):
            raise OracleViolation("kernel entry is not a multiple of 1/m")
        counts.append([int(v) for v in c])
    return counts


def _realize(Q: MeasureTuple, F: MeasureTuple, counts, m: int) -> tuple[RefinedSpace, PointMap]:
    """Children of atom w go, in order, ``counts[w][t]`` at a time to target t."""
    rs = refine_space(Q.space, m)
    assignment = []
    for w in range(Q.space.size):
        row = counts[w]
        if sum(row) != m:
            raise OracleViolation("child counts do not add up to the split factor")
        for t, c in enumerate(row):
            assignment.extend([t] * c)
    return rs, PointMap(rs.space, F.space, tuple(assignment))


def _grid_counts(Q: MeasureTuple, F: MeasureTuple, m: int, time_limit: float = 20.0):
    """Integer child counts on the ``1/m`` grid minimising weighted target deviation.

    Solved as a small mixed-integer program; the result is only a
    candidate and callers re-check it exactly. Returns None when the
    solver gives nothing usable.
    """
    from scipy.optimize import Bounds, LinearConstraint, milp

    allowed = _allowed_targets(Q, F)
    cols = [(w, t) for w in sorted(allowed) for t in allowed[w]]
    if not cols:
        return None
    ncnt = len(cols)
    eq_rows = []
    for w in sorted(allowed):
        eq_rows.append(([k for k, (cw, _) in enumerate(cols) if cw == w], [1.0] * len(allowed[w]), float(m)))
    dev_rows = []
    for i, (q, f) in enumerate(zip(Q, F)):
        for t in range(F.space.size):
            ks = [k for k, (cw, ct) in enumerate(cols) if ct == t and q.weights[cw] != 0]
            if not ks and f.weights[t] == 0:
                continue
            dev_rows.append((ks, [float(q.weights[cols[k][0]]) for k in ks], float(m * f.weights[t]), f.weights[t]))
    nv = ncnt + 2 * len(dev_rows)
    A = np.zeros((len(eq_rows) + len(dev_rows), nv))
    b = np.zeros(len(eq_rows) + len(dev_rows))
    cost = np.zeros(nv)
    for r, (ks, vals, rhs) in enumerate(eq_rows):
        A[r, ks] = vals
        b[r] = rhs
    for r, (ks, vals, rhs, fw) in enumerate(dev_rows):
        row = len(eq_rows) + r
        A[row, ks] = vals
        A[row, ncnt + 2 * r] = 1.0
        A[row, ncnt + 2 * r + 1] = -1.0
        b[row] = rhs
        weight = 1.0 / float(fw) if fw != 0 else 1e6
        cost[ncnt + 2 * r] = cost[ncnt + 2 * r + 1] = weight
    integrality = np.r_[np.ones(ncnt), np.zeros(nv - ncnt)]
    upper = np.r_[np.full(ncnt, float(m)), np.full(nv - ncnt, np.inf)]
    res = milp(
        cost,
        constraints=[LinearConstraint(A, b, b)],
        integrality=integrality,
        bounds=Bounds(np.zeros(nv), upper),
        options={"time_limit": time_limit, "presolve": True},
    )
    if res.x is None:
        return None
    counts = [[0] * F.space.size for _ in range(Q.space.size)]
    support = _target_support(F) or [0]
    for w in range(Q.space.size):
        if w not in allowed:
            counts[w][support[0]] = m
    for k, (w, t) in enumerate(cols):
        counts[w][t] = int(round(res.x[k]))
    if any(sum(counts[w]) != m for w in allowed):
        return None
    return counts


def _pushforward_counts(Q: MeasureTuple, F: MeasureTuple, counts, m: int) -> list[tuple]:
    out = []
    for q in Q:
        row = [Fraction(0)] * F.space.size
        for w, c in enumerate(counts):
            qw = q.weights[w]
            if qw == 0:
                continue
            for t, k in enumerate(c):
                if k:
                    row[t] += qw * k / m
        out.append(tuple(row))
    return out


def construct_map(
    Qtuple: MeasureTuple,
    Ftuple: MeasureTuple,
    snap_floats: bool = False,
    max_children: int = MAX_CHILDREN,
    minimize_split: bool = True,
) -> Construction:
    """Build a refined space and a point map pushing each ``Q_i`` to ``F_i``.

    The order check supplies a martingale coupling, the coupling a rational
    kernel, and the kernel a split factor: the LCM ``L`` of its
    denominators always works. With ``minimize_split`` smaller divisors of
    ``L`` are tried first through an integer program, and the first one
    that reproduces the targets exactly is used.

    Raises
    ------
    ModeError
        Float inputs without ``snap_floats``.
    Incompatible
        The order check fails; the exception carries the verdict.
    TooLarge
        No admissible split factor up to ``max_children``.
    """
    Q, F, dist = _require_exact(Qtuple, Ftuple, snap_floats)
    if Q.n != F.n:
        raise CodomainMismatch(f"tuple sizes differ: {Q.n} vs {F.n}")
    verdict = het_order(F, Q, exact=True)
    if not verdict.holds:
        exc = Incompatible("targets are more heterogeneous than the source tuple")
        exc.verdict = verdict
        raise exc
    kernel = transplant_kernel(Q, F, verdict)
    L = kernel.denominator()
    targets = [f.weights for f in F]
    chosen = None
    if minimize_split:
        for d in range(1, min(L, max_children + 1)):
            if L % d:
                continue
            counts = _grid_counts(Q, F, d)
            if counts is not None and _pushforward_counts(Q, F, counts, d) == targets:
                chosen = (d, counts)
                break
    if chosen is None:
        if L > max_children:
            raise TooLarge(f"split factor {L} exceeds {max_children}; use almost_compat_sequence")
        chosen = (L, _counts_from_kernel(kernel, L))
    m, counts = chosen
    rs, X = _realize(Q, F, counts, m)
    lifted = rs.lift_tuple(Q)
    if not verify_map(X, lifted, F):
        raise OracleViolation("constructed map fails verification")
    return Construction(rs, X, kernel, m, dist, lifted)


def point_compat_exhaustive(
    Qtuple: MeasureTuple,
    Ftuple: MeasureTuple,
    cap: int = SEARCH_CAP,
    backend: str | None = None,
) -> PointMap | None:
    """Search every map from charged atoms into the target support.

    Atoms no tuple member charges are sent to the first support point.
    The first hit in lexicographic order of assignments is returned.
    """
    if not (Qtuple.exact and Ftuple.exact):
        raise ModeError("exhaustive search compares masses exactly; rational inputs required")
    if Qtuple.n != Ftuple.n:
        raise CodomainMismatch(f"tuple sizes differ: {Qtuple.n} vs {Ftuple.n}")
    ref = average_reference(Qtuple)
    charged = [w for w in range(Qtuple.space.size) if ref.weights[w] != 0]
    support = _target_support(Ftuple)
    size = len(support) ** len(charged)
    if size > cap:
        raise TooLarge(f"{len(support)}^{len(charged)} = {size} maps exceed the cap {cap}")
    L = 1
    for tup in (Qtuple, Ftuple):
        for m in tup:
            for v in m.weights:
                L = math.lcm(L, v.denominator)
    if L > 2**60 // max(1, Qtuple.space.size):
        raise TooLarge("common denominator too large for 64-bit search")
    qint = np.array([[int(q.weights[w] * L) for w in charged] for q in Qtuple], dtype=np.int64)
    fint = np.array([[int(f.weights[t] * L) for t in support] for f in Ftuple], dtype=np.int64)
    assign, found = kernel_backend(backend).search_maps(qint, fint)
    if not found:
        return None
    full = [support[0]] * Qtuple.space.size
    for w, a in zip(charged, assign):
        full[w] = support[int(a)]
    X = PointMap(Qtuple.space, Ftuple.space, tuple(full))
    if not verify_map(X, Qtuple, Ftuple):
        raise OracleViolation("search kernel returned a non-solution")
    return X


# almost compatibility -------------------------------------------------------


@dataclass(frozen=True)
class AlmostStep:
    split: int
    refined: RefinedSpace
    point_map: PointMap
    pushforwards: MeasureTuple
    kl: tuple[float, ...]
    tv: tuple


def _largest_remainder(kernel: MarkovKernel, m: int) -> list[list[int]]:
    counts = []
    for row in kernel.matrix:
        scaled = [Fraction(v) * m for v in row]
        base = [math.floor(v) for v in scaled]
        rest = m - sum(base)
        order = sorted(
            (k for k in range(len(row)) if row[k] != 0), key=lambda k: (-(scaled[k] - base[k]), k)
        )
        for k in order[:rest]:
            base[k] += 1
        counts.append(base)
    return counts


def doubling_splits(denominator: int) -> list[int]:
    top = max(0, math.ceil(math.log2(denominator))) if denominator > 1 else 0
    return [2**k for k in range(top + 1)]


def almost_compat_sequence(
    Qtuple: MeasureTuple,
    Ftuple: MeasureTuple,
    splits: Sequence[int] | None = None,
    use_integer_program: bool = True,
) -> list[AlmostStep]:
    """Maps on ``m``-fold refinements whose pushforwards approach the targets.

    For every split ``m`` the child counts are chosen among: the integer
    program optimum on the ``1/m`` grid, the largest-remainder rounding of
    the coupling kernel, and (when the previous split divides ``m``) the
    previous choice. The pick never increases any per-member KL relative
    to the previous split when such a candidate exists, which is always
    the case along divisor chains. Pushforwards stay absolutely
    continuous with respect to the targets.
    """
    Q, F, _ = _require_exact(Qtuple, Ftuple, snap_floats=True)
    verdict = het_order(F, Q, exact=True)
    if not verdict.holds:
        exc = Incompatible("targets are more heterogeneous than the source tuple")
        exc.verdict = verdict
        raise exc
    kernel = transplant_kernel(Q, F, verdict)
    if splits is None:
        splits = doubling_splits(kernel.denominator())
    targets = [f.weights for f in F]
    steps: list[AlmostStep] = []
    prev_counts, prev_m, prev_kl = None, None, None
    for m in splits:
        if int(m) != m or m < 1:
            raise InvalidRefinement(f"split factors must be positive integers, got {m}")
        m = int(m)
        candidates = []
        if prev_counts is not None and m % prev_m == 0:
            candidates.append([[c * (m // prev_m) for c in row] for row in prev_counts])
        if use_integer_program:
            grid = _grid_counts(Q, F, m)
            if grid is not None:
                candidates.append(grid)
        candidates.append(_largest_remainder(kernel, m))
        scored = []
        for counts in candidates:
            push = _pushforward_counts(Q, F, counts, m)
            kl = tuple(kl_divergence(p, f) for p, f in zip(push, targets))
            scored.append((counts, push, kl))
        eligible = [s for s in scored if prev_kl is None or all(a <= b for a, b in zip(s[2], prev_kl))]
        pool = eligible or scored
        counts, push, kl = min(pool, key=lambda s: (math.fsum(s[2]), max(s[2])))
        rs, X = _realize(Q, F, counts, m)
        pushed = MeasureTuple(tuple(FiniteMeasure(F.space, p) for p in push))
        tv = tuple(total_variation(p, f) for p, f in zip(push, targets))
        steps.append(AlmostStep(m, rs, X, pushed, kl, tv))
        prev_counts, prev_m, prev_kl = counts, m, kl
    return steps


# reports --------------------------------------------------------------------


@dataclass(frozen=True)
class CompatibilityReport:
    verdict: str  # "map" | "kernel-only" | "kernel-unrealized" | "incompatible"
    witness_kind: str  # "map" | "kernel" | "none"
    refinement_m: int | None
    kl_per_i: tuple | None
    certificate: ConvexCertificate | None
    point_map: PointMap | None = None
    kernel: MarkovKernel | None = None
    snap_distance: float = 0.0
    notes: tuple[str, ...] = ()


def check_compat(
    Qtuple: MeasureTuple,
    Ftuple: MeasureTuple,
    cap: int = SEARCH_CAP,
    max_children: int = MAX_CHILDREN,
) -> CompatibilityReport:
    """Classify a pair of tuples and attach the matching witness.

    Float inputs are snapped to rationals first; the snap distance is part
    of the report.
    """
    Q, F, dist = _require_exact(Qtuple, Ftuple, snap_floats=True)
    if Q.n != F.n:
        raise CodomainMismatch(f"tuple sizes differ: {Q.n} vs {F.n}")
    verdict = het_order(F, Q, exact=True)
    if not verdict.holds:
        return CompatibilityReport("incompatible", "none", None, None, verdict.violation, snap_distance=dist)
    notes = []
    try:
        X = point_compat_exhaustive(Q, F, cap)
    except TooLarge as exc:
        X = None
        notes.append(f"point-map search skipped: {exc}")
    if X is not None:
        zeros = tuple(0.0 for _ in range(Q.n))
        return CompatibilityReport("map", "map", 1, zeros, None, point_map=X, snap_distance=dist, notes=tuple(notes))
    try:
        c = construct_map(Q, F, max_children=max_children)
    except TooLarge as exc:
        kernel = transplant_kernel(Q, F, verdict)
        notes.append(str(exc))
        return CompatibilityReport(
            "kernel-unrealized", "kernel", None, None, None, kernel=kernel, snap_distance=dist, notes=tuple(notes)
        )
    zeros = tuple(0.0 for _ in range(Q.n))
    verdict_name = "kernel-only" if not notes else "kernel"
    if c.split == 1:
        return CompatibilityReport("map", "map", 1, zeros, None, point_map=c.point_map, kernel=c.kernel,
                                   snap_distance=dist, notes=tuple(notes))
    return CompatibilityReport(
        verdict_name, "kernel", c.split, zeros, None, point_map=c.point_map, kernel=c.kernel,
        snap_distance=dist, notes=tuple(notes),
    )

