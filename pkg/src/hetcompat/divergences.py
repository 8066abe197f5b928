"""f-divergences on finite spaces and the screens built on them.

A generator ``f`` is convex on ``[0, inf)``. It is stored together with
its value at 0 and its asymptotic slope ``lim f(x)/x``; the slope prices
the part of ``P1`` that ``P2`` does not charge. Generators are centered,
``f <- f - f(1)``, so every divergence is nonnegative.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

from .errors import InputError, SpaceMismatch
from .measure import FiniteMeasure, absolutely_continuous

SCREEN_TOL = 1e-10
DEFAULT_LAMBDAS = tuple(Fraction(k, 10) for k in range(11))


@dataclass(frozen=True)
class FGenerator:
    """Convex generator with its boundary conventions.

    Parameters
    ----------
    kind : registry name ("KL", "TotalVariation", "Hellinger", "ChiSquare")
        or "Custom"
    func : raw generator on ``(0, inf)``
    at_zero : ``lim_{x -> 0} func(x)``
    slope_at_infinity : ``lim_{x -> inf} func(x) / x`` (may be ``inf``)
    exact_func : optional rational evaluator used when both measures are exact
    """

    kind: str
    func: Callable[[float], float] = field(compare=False)
    at_zero: float
    slope_at_infinity: float
    exact_func: Callable | None = field(default=None, compare=False)

    def __post_init__(self):
        if not math.isfinite(self.func(1.0)):
            raise InputError(f"generator {self.kind}: f(1) must be finite")
        if self.kind == "Custom":
            check_convexity(self)

    @property
    def shift(self) -> float:
        return self.func(1.0)

    def __call__(self, x):
        """Centered value ``f(x) - f(1)``."""
        if x == 0:
            return self.at_zero - self.shift
        return self.func(float(x)) - self.shift

    def exact(self, x: Fraction) -> Fraction:
        return self.exact_func(x) - self.exact_func(Fraction(1))


def check_convexity(f: FGenerator, points: int = 200, tol: float = 1e-12) -> None:
    xs = [0.0] + [math.exp(-8 + 16 * k / (points - 1)) for k in range(points)]
    for a, b in zip(xs, xs[2:]):
        mid = 0.5 * (a + b)
        fa = f.at_zero if a == 0 else f.func(a)
        if f.func(mid) > 0.5 * (fa + f.func(b)) + tol * (1 + abs(fa) + abs(f.func(b))):
            raise InputError(f"generator {f.kind} fails the midpoint convexity check near x={mid:.3g}")


def _xlogx(x: float) -> float:
    return x * math.log(x)


KL = FGenerator("KL", _xlogx, 0.0, math.inf)
TOTAL_VARIATION = FGenerator(
    "TotalVariation", lambda x: max(x - 1.0, 0.0), 0.0, 1.0, lambda x: max(x - 1, Fraction(0))
)
HELLINGER = FGenerator("Hellinger", lambda x: (math.sqrt(x) - 1.0) ** 2, 1.0, 1.0)
CHI_SQUARE = FGenerator("ChiSquare", lambda x: x * x - 1.0, -1.0, math.inf, lambda x: x * x - 1)

REGISTRY = {
    "KL": KL,
    "TotalVariation": TOTAL_VARIATION,
    "TV": TOTAL_VARIATION,
    "Hellinger": HELLINGER,
    "ChiSquare": CHI_SQUARE,
    "chi2": CHI_SQUARE,
}
DEFAULT_FAMILY = (KL, TOTAL_VARIATION, HELLINGER, CHI_SQUARE)


def generator(name: str) -> FGenerator:
    try:
        return REGISTRY[name]
    except KeyError:
        raise InputError(f"unknown f-divergence generator {name!r}; known: {sorted(REGISTRY)}") from None


def custom_generator(func: Callable[[float], float], at_zero: float, slope_at_infinity: float) -> FGenerator:
    return FGenerator("Custom", func, at_zero, slope_at_infinity)


def divergence_weights(p: Sequence, q: Sequence, f: FGenerator, exact: bool = False):
    """``sum_{q>0} q f(p/q) + slope * p(q=0)`` for raw weight vectors."""
    singular = 0
    if exact and f.exact_func is not None:
        total = Fraction(0)
        for a, b in zip(p, q):
            if b == 0:
                singular += a
            else:
                total += b * f.exact(Fraction(a) / b)
    else:
        terms = []
        for a, b in zip(p, q):
            if b == 0:
                singular += a
            else:
                terms.append(float(b) * f(float(a) / float(b)))
        total = math.fsum(terms)
    if singular:
        if math.isinf(f.slope_at_infinity):
            return math.inf
        total = total + (Fraction(singular) * Fraction(f.slope_at_infinity) if exact and f.exact_func else float(singular) * f.slope_at_infinity)
    return total


def f_divergence(P1: FiniteMeasure, P2: FiniteMeasure, f: FGenerator):
    """``d_f(P1, P2)``; rational when both measures and the generator allow it."""
    if P1.space != P2.space:
        raise SpaceMismatch("divergence of measures on different spaces")
    return divergence_weights(P1.weights, P2.weights, f, exact=P1.exact and P2.exact)


def kl_divergence(p: Sequence, q: Sequence) -> float:
    """KL(p || q) with ``0 log 0 = 0``; exactly 0.0 when ``p == q``."""
    if list(p) == list(q):
        return 0.0
    return float(divergence_weights(p, q, KL))


def total_variation(p: Sequence, q: Sequence):
    exact = all(isinstance(v, Fraction) for v in list(p) + list(q))
    half = sum((abs(a - b) for a, b in zip(p, q)), Fraction(0) if exact else 0.0)
    return half / 2


@dataclass(frozen=True)
class ScreenReport:
    """Outcome of a divergence screen; it can refute, never certify."""

    passed: bool
    label: str
    target_values: dict
    source_values: dict
    reason: str = ""


def divergence_screen(
    F: FiniteMeasure,
    G: FiniteMeasure,
    P: FiniteMeasure,
    Q: FiniteMeasure,
    family: Sequence[FGenerator] = DEFAULT_FAMILY,
    tol: float = SCREEN_TOL,
) -> ScreenReport:
    """Check ``d_f(F, G) <= d_f(P, Q) + tol`` for every generator.

    If ``P << Q`` but not ``F << G`` the pair cannot be compatible and the
    screen fails without evaluating anything. When ``P`` is not dominated
    the comparison still uses the full divergences with singular parts
    priced by the generator slopes, which keeps the screen sound.
    """
    label = "necessary-only"
    if F.space != G.space or P.space != Q.space:
        raise SpaceMismatch("screen needs F, G on one space and P, Q on another")
    if absolutely_continuous(P, Q) and not absolutely_continuous(F, G):
        return ScreenReport(False, label, {}, {}, "F is not absolutely continuous w.r.t. G")
    tv, sv = {}, {}
    passed = True
    for f in family:
        a = f_divergence(F, G, f)
        b = f_divergence(P, Q, f)
        tv[f.kind], sv[f.kind] = a, b
        if math.isinf(b):
            continue
        if math.isinf(a) or float(a) > float(b) + tol:
            passed = False
    return ScreenReport(passed, label, tv, sv, "" if passed else "some target divergence exceeds its source value")


def divergence_necessary(F, G, P, Q, family: Sequence[FGenerator] = DEFAULT_FAMILY) -> bool:
    """Necessary condition for (P, Q) -> (F, G) compatibility (two-member case)."""
    return divergence_screen(F, G, P, Q, family).passed


def mix(F1: FiniteMeasure, F2: FiniteMeasure, lam) -> FiniteMeasure:
    if F1.space != F2.space:
        raise SpaceMismatch("cannot mix measures on different spaces")
    if F1.exact and F2.exact:
        lam = Fraction(lam)
        w = tuple(lam * a + (1 - lam) * b for a, b in zip(F1.weights, F2.weights))
    else:
        lam = float(lam)
        w = tuple(lam * float(a) + (1 - lam) * float(b) for a, b in zip(F1.weights, F2.weights))
    return FiniteMeasure(F1.space, w)


def mixture_screen(
    F1: FiniteMeasure,
    F2: FiniteMeasure,
    lambdas,
    G: FiniteMeasure,
    P: FiniteMeasure,
    Q: FiniteMeasure,
    family: Sequence[FGenerator] = DEFAULT_FAMILY,
) -> bool:
    """Screen every mixture ``lam F1 + (1 - lam) F2`` against ``(P, Q)``.

    ``lambdas`` may be a single number or an iterable; None means the grid
    0, 0.1, ..., 1. Compatible targets for a fixed ``G`` form a convex set,
    so a failure on a mixture of two passing inputs flags a problem.
    """
    if lambdas is None:
        lambdas = DEFAULT_LAMBDAS
    elif isinstance(lambdas, (int, float, Fraction)):
        lambdas = (lambdas,)
    return all(divergence_necessary(mix(F1, F2, lam), G, P, Q, family) for lam in lambdas)
