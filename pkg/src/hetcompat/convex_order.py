"""Convex order between finite clouds and the heterogeneity order of tuples.

``A`` precedes ``B`` in convex order iff there is a coupling of the two
clouds under which the conditional mean of the ``B`` point given the ``A``
point is that ``A`` point. On finite clouds that is a transportation
problem with extra linear (barycenter) rows, solved here by the simplex
code in :mod:`hetcompat.lp`.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import ArityMismatch, DimMismatch
from .lp import FEAS_TOL, lp_feasible, snap
from .measure import MeasureTuple, WeightedCloud, density_profile


@dataclass(frozen=True)
class MartingaleCoupling:
    """Joint weights ``matrix[i][j]`` on (A point i, B point j)."""

    source: WeightedCloud
    target: WeightedCloud
    matrix: tuple

    def residual(self) -> float:
        """Largest violation of the marginal and barycenter equations."""
        A, B, pi = self.source, self.target, self.matrix
        worst = 0.0
        for i, (x, p) in enumerate(zip(A.points, A.weights)):
            worst = max(worst, abs(float(sum(pi[i]) - p)))
            for k in range(A.dim):
                s = sum(pi[i][j] * B.points[j][k] for j in range(B.size))
                worst = max(worst, abs(float(s - p * x[k])))
        for j, q in enumerate(B.weights):
            worst = max(worst, abs(float(sum(pi[i][j] for i in range(A.size)) - q)))
        if any(v < 0 for row in pi for v in row):
            worst = max(worst, -float(min(v for row in pi for v in row)))
        return worst

    def compose(self, other: "MartingaleCoupling") -> "MartingaleCoupling":
        """Chain ``A -> B`` with ``B -> C`` into a coupling ``A -> C``."""
        if other.source != self.target:
            raise DimMismatch("couplings do not share the middle cloud")
        mid = self.target.weights
        rows = []
        for i in range(self.source.size):
            rows.append(
                tuple(
                    sum(self.matrix[i][j] * other.matrix[j][k] / mid[j] for j in range(len(mid)))
                    for k in range(other.target.size)
                )
            )
        return MartingaleCoupling(self.source, other.target, tuple(rows))


@dataclass(frozen=True)
class ConvexCertificate:
    """Piecewise-affine convex ``f(x) = max_k (slopes[k] . x + intercepts[k])``.

    ``gap = E_A f - E_B f`` is positive, which rules out ``A <=cx B``.
    """

    slopes: tuple
    intercepts: tuple
    mean_source: object
    mean_target: object
    gap: object

    def __call__(self, x):
        return max(sum(s * c for s, c in zip(sl, x)) + d for sl, d in zip(self.slopes, self.intercepts))

    def evaluate_gap(self, A: WeightedCloud, B: WeightedCloud):
        return A.expectation(self) - B.expectation(self)


@dataclass(frozen=True)
class OrderVerdict:
    holds: bool
    witness: MartingaleCoupling | None
    violation: ConvexCertificate | None
    exact: bool
    source: WeightedCloud | None = None
    target: WeightedCloud | None = None


def _as_exact_cloud(cloud: WeightedCloud) -> WeightedCloud:
    if cloud.exact:
        return cloud
    return WeightedCloud.from_pairs(
        [tuple(snap(c) for c in p) for p in cloud.points], [snap(w) for w in cloud.weights]
    )


def strassen_system(A: WeightedCloud, B: WeightedCloud):
    """Equality system whose nonnegative solutions are martingale couplings.

    Variable ``i * |B| + j`` is the mass on (A point i, B point j).
    Rows: A marginals, then B marginals, then the barycenter rows (i, k).
    """
    a, b, d = A.size, B.size, A.dim
    nv = a * b
    rows, rhs = [], []
    zero = Fraction(0) if A.exact and B.exact else 0.0
    for i in range(a):
        row = [zero] * nv
        for j in range(b):
            row[i * b + j] = 1
        rows.append(row)
        rhs.append(A.weights[i])
    for j in range(b):
        row = [zero] * nv
        for i in range(a):
            row[i * b + j] = 1
        rows.append(row)
        rhs.append(B.weights[j])
    for i in range(a):
        for k in range(d):
            row = [zero] * nv
            for j in range(b):
                row[i * b + j] = B.points[j][k]
            rows.append(row)
            rhs.append(A.weights[i] * A.points[i][k])
    return rows, rhs


def _certificate(A: WeightedCloud, B: WeightedCloud, y) -> ConvexCertificate:
    a, b, d = A.size, B.size, A.dim
    u = y[:a]
    w = [y[a + b + i * d: a + b + (i + 1) * d] for i in range(a)]
    slopes = [tuple(-c for c in w[i]) for i in range(a)]
    intercepts = [-u[i] for i in range(a)]
    # keep only pieces that attain the maximum at some cloud point
    pts = list(A.points) + list(B.points)
    active = set()
    for x in pts:
        vals = [sum(s * c for s, c in zip(slopes[i], x)) + intercepts[i] for i in range(a)]
        top = max(vals)
        active.add(vals.index(top))
    keep = sorted(active)
    cert = ConvexCertificate(tuple(slopes[i] for i in keep), tuple(intercepts[i] for i in keep), None, None, None)
    ea, eb = A.expectation(cert), B.expectation(cert)
    return ConvexCertificate(cert.slopes, cert.intercepts, ea, eb, ea - eb)


def convex_order(A: WeightedCloud, B: WeightedCloud, exact: bool | None = None) -> OrderVerdict:
    """Decide whether ``A`` precedes ``B`` in convex order.

    Parameters
    ----------
    A, B : WeightedCloud
        Clouds of the same dimension.
    exact : bool, optional
        Rational arithmetic. Defaults to True when both clouds are exact.
        Float clouds are snapped to nearby rationals when exactness is
        forced.

    Returns
    -------
    OrderVerdict
        With a martingale coupling when the order holds, otherwise a convex
        piecewise-affine function separating the two clouds.
    """
    if A.dim != B.dim:
        raise DimMismatch(f"cloud dimensions differ: {A.dim} vs {B.dim}")
    if exact is None:
        exact = A.exact and B.exact
    if exact:
        A, B = _as_exact_cloud(A), _as_exact_cloud(B)
    else:
        A, B = A.as_float(), B.as_float()
    rows, rhs = strassen_system(A, B)
    res = lp_feasible(rows, rhs, exact=exact)
    if res.exact and not exact:
        # float solve escalated to rational arithmetic
        exact = True
        A, B = _as_exact_cloud(A), _as_exact_cloud(B)
    b = B.size
    if res.feasible:
        x = res.x
        matrix = tuple(tuple(x[i * b + j] for j in range(b)) for i in range(A.size))
        return OrderVerdict(True, MartingaleCoupling(A, B, matrix), None, exact, A, B)
    cert = _certificate(A, B, res.farkas)
    if not exact and cert.gap <= FEAS_TOL:
        # float certificate too weak to be meaningful; confirm exactly
        return convex_order(A, B, exact=True)
    return OrderVerdict(False, None, cert, exact, A, B)


def het_order(Ptuple: MeasureTuple, Qtuple: MeasureTuple, exact: bool | None = None) -> OrderVerdict:
    """Heterogeneity order: ``Ptuple`` is less heterogeneous than ``Qtuple``.

    Both tuples are read through their equal-weight average references;
    the verdict compares the laws of the two density vectors.
    """
    if Ptuple.n != Qtuple.n:
        raise ArityMismatch(f"tuple sizes differ: {Ptuple.n} vs {Qtuple.n}")
    _, cloud_p = density_profile(Ptuple)
    _, cloud_q = density_profile(Qtuple)
    return convex_order(cloud_p, cloud_q, exact)
