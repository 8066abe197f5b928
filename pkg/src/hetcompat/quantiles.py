"""Quantile functions (generalised inverses) of one-dimensional laws.

Every quantile function exposes ``ppf(u)`` and the cumulative integral
``cumint(u) = int_0^u ppf``; cell integrals, means and the
Neyman-Pearson function are differences of ``cumint``. Closed forms are
available for the normal, lognormal and chi-square(1) families; step
functions from finite laws are exact in rational arithmetic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np
from scipy.special import erfc, ndtr

from .errors import DomainError, InputError, NotDominated, NotMonotone
from .measure import FiniteMeasure, absolutely_continuous

SQRT2 = math.sqrt(2.0)
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)

# rational approximation of the normal quantile (relative error ~1e-9)
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def _lower_half(p: np.ndarray) -> np.ndarray:
    """Quantile for ``p`` in (0, 0.5]: rational start plus one Halley step."""
    x = np.empty_like(p)
    tail = p < _P_LOW
    if np.any(tail):
        q = np.sqrt(-2.0 * np.log(p[tail]))
        num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
        den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        x[tail] = num / den
    mid = ~tail
    if np.any(mid):
        q = p[mid] - 0.5
        r = q * q
        num = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        x[mid] = num / den
    # Halley step on Phi(x) - p, written relative to p to stay finite in the tail
    cdf = 0.5 * erfc(-x / SQRT2)
    scale = np.exp(np.log(p) + 0.5 * x * x + LOG_SQRT_2PI)
    u = (cdf / p - 1.0) * scale
    return x - u / (1.0 + 0.5 * x * u)


def normal_quantile(u):
    """Standard normal quantile, absolute error below 1e-10 on (0, 1).

    Accepts a scalar or an array; raises ``DomainError`` outside (0, 1).
    Upper-half inputs are reflected, so ``q(u) = -q(1 - u)`` holds to
    rounding.
    """
    arr = np.asarray(u, dtype=np.float64)
    if np.any(~((arr > 0.0) & (arr < 1.0))):
        raise DomainError("normal_quantile needs 0 < u < 1")
    flat = np.atleast_1d(arr).ravel()
    out = np.empty_like(flat)
    upper = flat > 0.5
    lo = ~upper
    if np.any(lo):
        out[lo] = _lower_half(flat[lo])
    if np.any(upper):
        out[upper] = -_lower_half(1.0 - flat[upper])
    out = out.reshape(np.shape(arr))
    return float(out) if np.ndim(arr) == 0 else out


def normal_cdf(x):
    return ndtr(x)


def normal_pdf(x):
    x = np.asarray(x, dtype=np.float64)
    return np.exp(-0.5 * x * x - LOG_SQRT_2PI)


def _clip_unit(u):
    return np.clip(np.asarray(u, dtype=np.float64), 0.0, 1.0)


class QuantileFunction:
    """Base class; subclasses define ``ppf`` and ``cumint``."""

    kind = "abstract"
    tabulated = False

    def ppf(self, u):
        raise NotImplementedError

    def cumint(self, u):
        raise NotImplementedError

    def integral(self, a, b):
        """``int_a^b ppf(t) dt``."""
        return self.cumint(b) - self.cumint(a)

    def mean(self):
        return self.cumint(1.0 if not self.tabulated else Fraction(1))

    def describe(self) -> dict:
        return {"kind": self.kind}

    def check_monotone(self, points: int = 1000, slack: float = 1e-12) -> None:
        grid = (np.arange(points) + 0.5) / points
        vals = np.asarray(self.ppf(grid), dtype=np.float64)
        if np.any(np.diff(vals) < -slack):
            raise NotMonotone(f"{self.kind} quantile decreases on the check grid")


@dataclass(frozen=True, eq=False)
class NormalQuantile(QuantileFunction):
    loc: float = 0.0
    scale: float = 1.0
    kind = "normal"

    def ppf(self, u):
        return self.loc + self.scale * normal_quantile(u)

    def cumint(self, u):
        u = _clip_unit(u)
        inner = np.clip(u, 1e-300, 1 - 1e-16)
        q = normal_quantile(inner)
        val = self.loc * u - self.scale * normal_pdf(q)
        val = np.where((u <= 0) | (u >= 1), self.loc * u, val)
        return float(val) if np.ndim(val) == 0 else val

    def describe(self) -> dict:
        return {"kind": self.kind, "loc": self.loc, "scale": self.scale}


@dataclass(frozen=True, eq=False)
class LogNormalQuantile(QuantileFunction):
    """Law of ``exp(mu + sigma Z)``."""

    mu: float = 0.0
    sigma: float = 1.0
    kind = "lognormal"

    def ppf(self, u):
        return np.exp(self.mu + self.sigma * np.asarray(normal_quantile(u)))

    def cumint(self, u):
        u = _clip_unit(u)
        inner = np.clip(u, 1e-300, 1 - 1e-16)
        q = normal_quantile(inner)
        c = math.exp(self.mu + 0.5 * self.sigma**2)
        val = c * ndtr(q - self.sigma)
        val = np.where(u <= 0, 0.0, np.where(u >= 1, c, val))
        return float(val) if np.ndim(val) == 0 else val

    def describe(self) -> dict:
        return {"kind": self.kind, "mu": self.mu, "sigma": self.sigma}


@dataclass(frozen=True, eq=False)
class ChiSquare1Quantile(QuantileFunction):
    """Law of ``Z**2`` for standard normal ``Z``."""

    kind = "chi2_1"

    def ppf(self, u):
        u = np.asarray(u, dtype=np.float64)
        return np.asarray(normal_quantile(0.5 * (1.0 + u))) ** 2

    def cumint(self, u):
        u = _clip_unit(u)
        inner = np.clip(0.5 * (1.0 + u), 0.5, 1 - 1e-16)
        s = np.where(inner > 0.5, normal_quantile(np.maximum(inner, 0.5 + 1e-17)), 0.0)
        val = 2.0 * ndtr(s) - 2.0 * s * normal_pdf(s) - 1.0
        val = np.where(u <= 0, 0.0, np.where(u >= 1, 1.0, val))
        return float(val) if np.ndim(val) == 0 else val


@dataclass(frozen=True, eq=False)
class ConstantQuantile(QuantileFunction):
    value: object = 1.0
    kind = "constant"

    def ppf(self, u):
        return np.full(np.shape(u), float(self.value)) if np.ndim(u) else float(self.value)

    def cumint(self, u):
        if isinstance(u, Fraction) and isinstance(self.value, Fraction):
            return self.value * u
        return float(self.value) * _clip_unit(u) if np.ndim(u) else float(self.value) * float(u)

    def describe(self) -> dict:
        return {"kind": self.kind, "value": str(self.value) if isinstance(self.value, Fraction) else self.value}


class TabulatedQuantile(QuantileFunction):
    """Quantile of a finitely supported law; ``F^-1(t) = inf{x : F(x) >= t}``.

    ``values`` are merged and sorted; ``probs`` must be positive after
    merging and sum to one. Rational inputs keep every integral exact.
    """

    kind = "tabulated"
    tabulated = True

    def __init__(self, values: Sequence, probs: Sequence):
        if len(values) != len(probs) or not values:
            raise InputError("tabulated quantile needs matching, non-empty values and probs")
        exact = all(isinstance(v, (Fraction, int)) for v in list(values) + list(probs))
        conv = Fraction if exact else float
        merged: dict = {}
        for v, p in zip(values, probs):
            v, p = conv(v), conv(p)
            if p < 0:
                raise InputError("negative probability in tabulated quantile")
            if p == 0:
                continue
            merged[v] = merged.get(v, conv(0)) + p
        if not merged:
            raise InputError("tabulated quantile has no mass")
        vals = sorted(merged)
        ps = [merged[v] for v in vals]
        total = sum(ps, conv(0))
        if (exact and total != 1) or (not exact and abs(total - 1.0) > 1e-12):
            raise InputError(f"tabulated probabilities sum to {total}")
        self.exact = exact
        self.values = tuple(vals)
        self.probs = tuple(ps)
        cum, acc = [], conv(0)
        for p in ps:
            acc = acc + p
            cum.append(acc)
        cum[-1] = conv(1)
        self.cum = tuple(cum)
        cint, acc = [conv(0)], conv(0)
        for v, p in zip(vals, ps):
            acc = acc + v * p
            cint.append(acc)
        self.cumint_knots = tuple(cint)
        self._cum_arr = np.array([0.0] + [float(c) for c in cum])
        self._cint_arr = np.array([float(c) for c in cint])
        self._val_arr = np.array([float(v) for v in vals])

    def ppf(self, u):
        idx = np.searchsorted(self._cum_arr[1:], np.asarray(u, dtype=np.float64), side="left")
        idx = np.minimum(idx, len(self.values) - 1)
        out = self._val_arr[idx]
        return float(out) if np.ndim(out) == 0 else out

    def cumint(self, u):
        if isinstance(u, (Fraction, int)) and self.exact:
            u = Fraction(u)
            if u <= 0:
                return Fraction(0)
            if u >= 1:
                return self.cumint_knots[-1]
            prev = Fraction(0)
            for k, c in enumerate(self.cum):
                if u <= c:
                    return self.cumint_knots[k] + self.values[k] * (u - prev)
                prev = c
        return np.interp(np.asarray(u, dtype=np.float64), self._cum_arr, self._cint_arr) if np.ndim(u) else float(
            np.interp(float(u), self._cum_arr, self._cint_arr)
        )

    def reversed_cells(self):
        """Cells of ``t -> F^-1(1 - t)``: (start, end, value) in increasing t."""
        out, start = [], (Fraction(0) if self.exact else 0.0)
        for v, p in zip(reversed(self.values), reversed(self.probs)):
            out.append((start, start + p, v))
            start = start + p
        return out

    def cells(self):
        out, start = [], (Fraction(0) if self.exact else 0.0)
        for v, p in zip(self.values, self.probs):
            out.append((start, start + p, v))
            start = start + p
        return out

    def describe(self) -> dict:
        fmt = (lambda x: str(x)) if self.exact else float
        return {"kind": self.kind, "values": [fmt(v) for v in self.values], "probs": [fmt(p) for p in self.probs]}


class ComposedQuantile(QuantileFunction):
    """``u -> transform(base.ppf(u))`` for a nondecreasing transform."""

    kind = "composed"

    def __init__(self, base: QuantileFunction, transform: Callable):
        self.base = base
        self.transform = transform

    def ppf(self, u):
        return self.transform(np.asarray(self.base.ppf(u)))

    def cumint(self, u):
        from .optimize import quad_unit_interval

        return quad_unit_interval(lambda t: self.ppf(t), 0.0, float(u))[0]


def quantile_of_density(P: FiniteMeasure, Q: FiniteMeasure) -> TabulatedQuantile:
    """Law of the likelihood ratio ``dP/dQ`` under ``Q``."""
    if not absolutely_continuous(P, Q):
        raise NotDominated("P must be absolutely continuous with respect to Q")
    exact = P.exact and Q.exact
    vals, probs = [], []
    for p, q in zip(P.weights, Q.weights):
        if q == 0:
            continue
        vals.append(p / q if exact else float(p) / float(q))
        probs.append(q)
    return TabulatedQuantile(vals, probs)


def from_spec(spec: dict) -> QuantileFunction:
    """Build a quantile function from its CLI description."""
    from .measure import parse_number

    kind = spec.get("kind")
    if kind == "normal":
        return NormalQuantile(float(spec.get("loc", 0.0)), float(spec.get("scale", 1.0)))
    if kind == "lognormal":
        return LogNormalQuantile(float(spec.get("mu", 0.0)), float(spec.get("sigma", 1.0)))
    if kind == "chi2_1":
        return ChiSquare1Quantile()
    if kind == "constant":
        return ConstantQuantile(parse_number(spec.get("value", 1)))
    if kind == "tabulated":
        return TabulatedQuantile([parse_number(v) for v in spec["values"]], [parse_number(p) for p in spec["probs"]])
    raise InputError(f"unknown quantile kind {kind!r}")
