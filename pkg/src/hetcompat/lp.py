"""Two-phase primal simplex for standard-form programs ``A x = b, x >= 0``.

The same code runs in exact rational arithmetic (``Fraction`` entries,
zero tolerance) and in float arithmetic (small pivot tolerance). Bland's
rule picks both the entering and the leaving variable, so the pivot
sequence is deterministic and cannot cycle.

When phase one ends with a positive residual the program is infeasible
and the phase-one duals give a Farkas vector ``y`` with ``y @ A >= 0`` and
``y @ b < 0``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import NumericFailure

FEAS_TOL = 1e-9
ESCALATE_TOL = 1e-7
PIVOT_TOL = 1e-11
SNAP_DENOMINATOR = 10**6


@dataclass(frozen=True)
class LPResult:
    status: str  # "optimal" | "infeasible" | "unbounded"
    x: tuple | None
    farkas: tuple | None
    objective: object
    phase1_value: object
    exact: bool
    iterations: int

    @property
    def feasible(self) -> bool:
        return self.status != "infeasible"


class _Tableau:
    def __init__(self, rows, basis, ncols, tol):
        self.rows = rows
        self.basis = basis
        self.ncols = ncols
        self.tol = tol
        self.iterations = 0

    def is_zero(self, v) -> bool:
        return v == 0 if self.tol == 0 else abs(v) <= self.tol

    def pivot(self, r: int, j: int, obj: list) -> None:
        prow = self.rows[r]
        piv = prow[j]
        nz = [k for k, v in enumerate(prow) if v != 0]
        for k in nz:
            prow[k] = prow[k] / piv
        prow[j] = 1 if self.tol == 0 else 1.0
        for row in self.rows + [obj]:
            if row is prow:
                continue
            f = row[j]
            if f == 0:
                continue
            for k in nz:
                row[k] = row[k] - f * prow[k]
            row[j] = 0 if self.tol == 0 else 0.0
        self.basis[r] = j
        self.iterations += 1

    def run(self, obj: list, allowed: int, max_iter: int) -> str:
        """Bland iterations on ``obj`` (reduced costs, rhs holds -value)."""
        rhs = self.ncols
        tol = self.tol
        while True:
            if self.iterations > max_iter:
                raise NumericFailure("simplex iteration guard exceeded")
            enter = -1
            for j in range(allowed):
                if obj[j] < -tol:
                    enter = j
                    break
            if enter < 0:
                return "optimal"
            best_r = -1
            best_ratio = None
            for r, row in enumerate(self.rows):
                a = row[enter]
                if a > tol:
                    ratio = row[rhs] / a
                    if (
                        best_r < 0
                        or ratio < best_ratio
                        or (ratio == best_ratio and self.basis[r] < self.basis[best_r])
                    ):
                        best_r, best_ratio = r, ratio
            if best_r < 0:
                return "unbounded"
            self.pivot(best_r, enter, obj)


def _convert(A, b, exact: bool):
    if exact:
        conv = Fraction
    else:
        conv = float
    A2 = [[conv(v) for v in row] for row in A]
    b2 = [conv(v) for v in b]
    return A2, b2


def solve_lp(
    A: Sequence[Sequence],
    b: Sequence,
    c: Sequence | None = None,
    exact: bool = True,
    max_iter: int | None = None,
) -> LPResult:
    """Minimise ``c @ x`` over ``A x = b, x >= 0`` (feasibility only if ``c`` is None).

    Parameters
    ----------
    A : m x n matrix as nested sequences
    b : length-m right-hand side
    c : optional length-n cost vector
    exact : rational arithmetic when True, float otherwise

    Returns
    -------
    LPResult
        ``x`` on success, ``farkas`` when infeasible.
    """
    A, b = _convert(A, b, exact)
    m = len(A)
    n = len(A[0]) if m else (len(c) if c is not None else 0)
    tol = 0 if exact else PIVOT_TOL
    zero = Fraction(0) if exact else 0.0
    one = Fraction(1) if exact else 1.0
    if max_iter is None:
        max_iter = 50 * (m + n) + 1000

    if m == 0:
        x = tuple(zero for _ in range(n))
        return LPResult("optimal", x, None, zero, zero, exact, 0)

    signs = []
    rows = []
    for i in range(m):
        s = -1 if b[i] < 0 else 1
        signs.append(s)
        row = [s * v for v in A[i]] + [zero] * m + [s * b[i]]
        row[n + i] = one
        rows.append(row)
    ncols = n + m
    tab = _Tableau(rows, [n + i for i in range(m)], ncols, tol)

    # phase one: minimise the sum of artificials
    obj = [zero] * (ncols + 1)
    for row in rows:
        for k in range(n):
            obj[k] = obj[k] - row[k]
        obj[ncols] = obj[ncols] - row[ncols]
    tab.run(obj, ncols, max_iter)
    w = -obj[ncols]
    infeasible = w > 0 if exact else w > FEAS_TOL
    if infeasible:
        y_phase = [one - obj[n + i] for i in range(m)]
        farkas = tuple(-signs[i] * y_phase[i] for i in range(m))
        return LPResult("infeasible", None, farkas, None, w, exact, tab.iterations)

    # move artificials out of the basis where possible, drop redundant rows
    keep = []
    for r in range(m):
        if tab.basis[r] >= n:
            row = tab.rows[r]
            j = next((k for k in range(n) if not tab.is_zero(row[k])), -1)
            if j >= 0:
                tab.pivot(r, j, obj)
                keep.append(r)
        else:
            keep.append(r)
    tab.rows = [tab.rows[r] for r in keep]
    tab.basis = [tab.basis[r] for r in keep]

    status = "optimal"
    value = zero
    if c is not None:
        cc = [Fraction(v) if exact else float(v) for v in c]
        obj2 = cc + [zero] * m + [zero]
        for r, j in enumerate(tab.basis):
            cb = cc[j]
            if cb != 0:
                row = tab.rows[r]
                for k in range(ncols + 1):
                    if row[k] != 0:
                        obj2[k] = obj2[k] - cb * row[k]
        status = tab.run(obj2, n, max_iter)
        value = -obj2[ncols]
    x = [zero] * n
    for r, j in enumerate(tab.basis):
        if j < n:
            v = tab.rows[r][ncols]
            x[j] = v if exact or v > 0 else 0.0
    return LPResult(status, tuple(x), None, value if status == "optimal" else None, w, exact, tab.iterations)


def snap(value, max_denominator: int = SNAP_DENOMINATOR) -> Fraction:
    """Nearest rational with bounded denominator."""
    return Fraction(value).limit_denominator(max_denominator)


def lp_feasible(A: Sequence[Sequence], b: Sequence, exact: bool = True) -> LPResult:
    """Decide feasibility of ``A x = b, x >= 0``.

    In float mode a phase-one residual inside the grey zone
    ``(FEAS_TOL, ESCALATE_TOL]`` triggers a rational re-solve on data
    snapped to denominators of at most ``SNAP_DENOMINATOR``.
    """
    res = solve_lp(A, b, exact=exact)
    if exact:
        return res
    w = res.phase1_value
    if FEAS_TOL < w <= ESCALATE_TOL:
        A2 = [[snap(v) for v in row] for row in A]
        b2 = [snap(v) for v in b]
        return solve_lp(A2, b2, exact=True)
    return res


def check_farkas(A, b, y) -> bool:
    """Exact check of ``y @ A >= 0`` and ``y @ b < 0``."""
    yA_ok = all(sum((yi * Fraction(row[j]) for yi, row in zip(y, A)), Fraction(0)) >= 0 for j in range(len(A[0])))
    yb = sum((yi * Fraction(bi) for yi, bi in zip(y, b)), Fraction(0))
    return yA_ok and yb < 0
