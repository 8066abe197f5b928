"""Drift compatibility for Brownian motion under exponential changes of measure.

Under ``Q_theta`` with ``dQ_theta/dP = exp(int theta dB - 1/2 int theta^2 dt)``
the path ``B`` is a Brownian motion with drift ``theta``. A process ``W``
built from ``B`` has drift ``mu`` under ``Q_theta`` (and is a Brownian
motion under ``P``) whenever the energy of ``mu`` does not exceed that of
``theta``. The construction runs ``B`` on a clock ``alpha`` that matches
energies and rescales increments by ``beta = theta(alpha) / mu``.

Drifts are piecewise constant, so every energy integral and the clock
itself are exact piecewise-linear functions.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._kernels import backend as kernel_backend
from ._kernels import default_backend_name
from .errors import (
    GridError,
    HorizonMismatch,
    HypothesisViolated,
    Incompatible,
    InputError,
    TooLarge,
)

ENERGY_TOL = 1e-12
RESIDUAL_TOL = 1e-10
MAX_DRAWS = 2 * 10**9
VOLATILITY_NOTE = (
    "laws with different volatilities are mutually singular on path space, "
    "so no drift change can make them compatible"
)


@dataclass(frozen=True)
class DriftProcess:
    """Piecewise-constant drift on ``[0, horizon]``.

    Piece ``k`` covers ``(ends[k-1], ends[k]]`` (with ``ends[-1] = 0``) and
    carries ``values[k]``; ``ends[-1]`` is the horizon.
    """

    ends: tuple
    values: tuple
    volatility: float = 1.0
    energy_knots: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ends = tuple(float(e) for e in self.ends)
        vals = tuple(float(v) for v in self.values)
        if not ends or len(ends) != len(vals):
            raise InputError("a drift needs one value per piece")
        if any(not math.isfinite(x) for x in ends + vals):
            raise InputError("drift breakpoints and values must be finite")
        prev = 0.0
        for e in ends:
            if e <= prev:
                raise InputError("drift breakpoints must be positive and strictly increasing")
            prev = e
        if not self.volatility > 0:
            raise InputError("volatility must be positive")
        object.__setattr__(self, "ends", ends)
        object.__setattr__(self, "values", vals)
        knots, acc, start = [0.0], 0.0, 0.0
        for e, v in zip(ends, vals):
            acc += v * v * (e - start)
            knots.append(acc)
            start = e
        object.__setattr__(self, "energy_knots", tuple(knots))

    @classmethod
    def constant(cls, value: float, horizon: float = 1.0) -> "DriftProcess":
        return cls((horizon,), (value,))

    @classmethod
    def from_spec(cls, spec: dict) -> "DriftProcess":
        pieces = spec.get("pieces")
        if not pieces:
            raise InputError("drift spec needs a non-empty 'pieces' list")
        horizon = float(spec["T"])
        ends = [float(p["until"]) for p in pieces]
        if abs(ends[-1] - horizon) > 1e-12:
            raise InputError(f"last piece ends at {ends[-1]}, horizon is {horizon}")
        ends[-1] = horizon
        return cls(tuple(ends), tuple(float(p["value"]) for p in pieces), float(spec.get("volatility", 1.0)))

    def to_spec(self) -> dict:
        return {"T": self.horizon, "pieces": [{"until": e, "value": v} for e, v in zip(self.ends, self.values)]}

    @property
    def horizon(self) -> float:
        return self.ends[-1]

    @property
    def starts(self) -> tuple:
        return (0.0,) + self.ends[:-1]

    def value_at(self, t):
        """Drift on the piece containing ``t`` (right-open convention at breakpoints)."""
        idx = np.searchsorted(np.asarray(self.ends), np.asarray(t, dtype=np.float64), side="right")
        idx = np.minimum(idx, len(self.values) - 1)
        out = np.asarray(self.values)[idx]
        return float(out) if np.ndim(out) == 0 else out

    def energy(self, t):
        """``int_0^t drift^2 ds``."""
        return np.interp(t, (0.0,) + self.ends, self.energy_knots)

    def total_energy(self) -> float:
        return self.energy_knots[-1]

    def energy_inverse(self, e):
        """``inf{r >= 0 : energy(r) >= e}``, left end of any plateau."""
        e = np.asarray(e, dtype=np.float64)
        knots = np.asarray(self.energy_knots)
        grid = np.asarray((0.0,) + self.ends)
        k = np.searchsorted(knots, e, side="left")
        k = np.clip(k, 1, len(knots) - 1)
        lo_e, hi_e = knots[k - 1], knots[k]
        lo_t, hi_t = grid[k - 1], grid[k]
        span = hi_e - lo_e
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(span > 0, (e - lo_e) / np.where(span > 0, span, 1.0), 0.0)
        out = np.where(e <= 0, 0.0, lo_t + frac * (hi_t - lo_t))
        return float(out) if out.ndim == 0 else out

    def has_zero_piece(self) -> bool:
        return any(v == 0 for v in self.values)


def _same_horizon(theta: DriftProcess, mu: DriftProcess) -> None:
    if abs(theta.horizon - mu.horizon) > 1e-12:
        raise HorizonMismatch(f"horizons differ: {theta.horizon} vs {mu.horizon}")


def _identical(theta: DriftProcess, mu: DriftProcess) -> bool:
    return theta.ends == mu.ends and theta.values == mu.values


def _check_hypothesis(theta: DriftProcess, mu: DriftProcess) -> None:
    if mu.has_zero_piece() and not _identical(theta, mu):
        raise HypothesisViolated(
            "the construction needs the target drift to be nonzero almost everywhere; "
            "a zero piece was found"
        )


def drift_compat(theta: DriftProcess, mu: DriftProcess) -> bool:
    """True iff a process with drift ``mu`` under ``Q_theta`` can be built from ``B``.

    The test is ``energy(mu) <= energy(theta) + 1e-12`` on the common horizon.
    """
    _same_horizon(theta, mu)
    if theta.volatility != mu.volatility:
        return False
    _check_hypothesis(theta, mu)
    return mu.total_energy() <= theta.total_energy() + ENERGY_TOL


@dataclass(frozen=True)
class TimeChange:
    """The clock ``alpha = energy_theta^-1 o energy_mu`` and scale ``beta``.

    ``knots`` are times where ``mu`` or ``theta(alpha)`` changes value; on
    each piece between knots both are constant, ``alpha`` is affine and
    ``beta = theta(alpha) / mu`` is constant. Where ``theta`` vanishes the
    clock jumps over the flat stretch of its energy: the knot then appears
    twice, carrying the left and right limits of ``alpha``, and the
    zero-length piece between them has ``beta = 0``.
    """

    theta: DriftProcess
    mu: DriftProcess
    knots: tuple
    alpha_knots: tuple
    beta: tuple
    identity: bool = False

    def alpha(self, t):
        """Left-continuous clock value."""
        if self.identity:
            return np.asarray(t, dtype=np.float64) if np.ndim(t) else float(t)
        t = np.asarray(t, dtype=np.float64)
        xs, ys = np.asarray(self.knots), np.asarray(self.alpha_knots)
        k = np.clip(np.searchsorted(xs, t, side="left"), 1, xs.size - 1)
        lo, hi = xs[k - 1], xs[k]
        span = hi - lo
        with np.errstate(invalid="ignore", divide="ignore"):
            frac = np.where(span > 0, (t - lo) / np.where(span > 0, span, 1.0), 1.0)
        out = ys[k - 1] + np.clip(frac, 0.0, 1.0) * (ys[k] - ys[k - 1])
        return float(out) if out.ndim == 0 else out

    def beta_at(self, t):
        k = np.searchsorted(np.asarray(self.knots[1:]), np.asarray(t, dtype=np.float64), side="right")
        k = np.minimum(k, len(self.beta) - 1)
        out = np.asarray(self.beta)[k]
        return float(out) if np.ndim(out) == 0 else out

    def residuals(self) -> list[float]:
        """Per-piece ``|theta^2 d(alpha) - mu^2 dt|``."""
        out = []
        for a, b, aa, ab in zip(self.knots, self.knots[1:], self.alpha_knots, self.alpha_knots[1:]):
            th = self.theta.value_at(aa + 0.5 * (ab - aa)) if ab > aa else 0.0
            m = self.mu.value_at(0.5 * (a + b)) if b > a else 0.0
            out.append(abs(th * th * (ab - aa) - m * m * (b - a)))
        return out

    def clock_check(self) -> list[float]:
        """Per-knot ``|int_0^t beta^2 d(alpha) - t|``; the covariance of ``W``."""
        acc, out = 0.0, []
        for k, (a, b) in enumerate(zip(self.knots, self.knots[1:])):
            acc += self.beta[k] ** 2 * (self.alpha_knots[k + 1] - self.alpha_knots[k])
            out.append(abs(acc - b))
        return out


def _clock_points(theta: DriftProcess, mu: DriftProcess) -> list[tuple[float, float]]:
    """(time, alpha) pairs at every knot, with both limits at jumps."""
    grid = (0.0,) + theta.ends
    levels: dict[float, list[float]] = {}
    for g, e in zip(grid, theta.energy_knots):
        levels.setdefault(e, []).append(g)
    top = mu.total_energy()
    scale = max(1.0, top)
    points = []
    for e, gs in levels.items():
        if e > top + ENERGY_TOL:
            continue
        t = float(mu.energy_inverse(min(e, top)))
        points.append((t, gs[0]))
        if gs[-1] > gs[0]:
            points.append((t, gs[-1]))
    level_list = sorted(levels)
    for m in (0.0,) + mu.ends:
        e = float(mu.energy(m))
        k = int(np.searchsorted(level_list, e))
        near = [level_list[j] for j in (k - 1, k) if 0 <= j < len(level_list)]
        if any(abs(e - lv) <= 1e-14 * scale for lv in near):
            continue  # already placed with the matching theta knot
        points.append((m, float(theta.energy_inverse(e))))
    return sorted(set(points))


def time_change(theta: DriftProcess, mu: DriftProcess) -> TimeChange:
    """Exact piecewise clock matching the energies of ``theta`` and ``mu``.

    Raises ``Incompatible`` when ``mu`` carries more energy than ``theta``.
    """
    if not drift_compat(theta, mu):
        raise Incompatible("the target drift carries more energy than the source drift")
    T = theta.horizon
    if _identical(theta, mu):
        return TimeChange(theta, mu, (0.0, T), (0.0, T), (1.0,), identity=True)
    points = _clock_points(theta, mu)
    knots = [p[0] for p in points]
    alpha = [p[1] for p in points]
    beta = []
    for a, b, aa, ab in zip(knots, knots[1:], alpha, alpha[1:]):
        if b == a:
            beta.append(0.0)
            continue
        m = mu.value_at(0.5 * (a + b))
        th = theta.value_at(aa + 0.5 * (ab - aa)) if ab > aa else 0.0
        beta.append(th / m)
    tc = TimeChange(theta, mu, tuple(knots), tuple(alpha), tuple(beta))
    worst = max(tc.residuals(), default=0.0)
    if worst > RESIDUAL_TOL:
        raise GridError(f"time change residual {worst:.3g} exceeds {RESIDUAL_TOL}")
    return tc


@dataclass(frozen=True)
class PathGrid:
    """Path values at increasing times; ``values`` is (steps+1,) or (paths, steps+1)."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        if t.ndim != 1 or t.size < 2 or t[0] != 0.0 or np.any(np.diff(t) <= 0):
            raise GridError("grid times must start at 0 and increase strictly")
        if v.shape[-1] != t.size or not np.all(np.isfinite(v)):
            raise GridError("path values must be finite, one per grid time")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def at(self, s):
        """Linear interpolation of the path(s) at times ``s``."""
        s = np.asarray(s, dtype=np.float64)
        if np.any(s > self.horizon + 1e-12) or np.any(s < 0):
            raise GridError("requested time lies outside the sampled grid")
        if self.values.ndim == 1:
            return np.interp(s, self.times, self.values)
        return np.stack([np.interp(s, self.times, row) for row in self.values])

    def quadratic_variation(self):
        return np.sum(np.diff(self.values, axis=-1) ** 2, axis=-1)


def uniform_times(T: float, dt: float) -> np.ndarray:
    n = int(round(T / dt))
    if n < 1 or abs(n * dt - T) > 1e-9 * max(1.0, T):
        raise GridError(f"dt={dt} does not divide the horizon {T}")
    return np.linspace(0.0, T, n + 1)


def sample_brownian(times: Sequence[float], seed: int, paths: int = 1, backend: str | None = None) -> PathGrid:
    """Brownian paths at the given times; path ``p`` depends only on ``(seed, p)``."""
    times = np.asarray(times, dtype=np.float64)
    z = kernel_backend(backend).normals(seed, np.arange(paths), times.size - 1)
    inc = z * np.sqrt(np.diff(times))[None, :]
    vals = np.concatenate((np.zeros((paths, 1)), np.cumsum(inc, axis=1)), axis=1)
    return PathGrid(times, vals[0] if paths == 1 else vals)


def construct_process(theta: DriftProcess, mu: DriftProcess, B: PathGrid) -> PathGrid:
    """``W`` on ``B``'s grid: ``dW = beta(t) dB(alpha(t))``.

    Each output step is cut at the clock knots so ``beta`` is constant on
    every piece; ``B`` is read at the clock times by linear interpolation,
    which is exact when those times are grid points of ``B``.
    """
    _same_horizon(theta, mu)
    tc = time_change(theta, mu)
    t = B.times
    if tc.identity:
        return PathGrid(t, B.values)
    pts = sorted(set([(float(x), float(tc.alpha(x))) for x in t] + list(zip(tc.knots, tc.alpha_knots))))
    s = np.array([p[0] for p in pts])
    a = np.array([p[1] for p in pts])
    if np.any(a > B.horizon + 1e-12):
        raise GridError("the clock runs past the sampled horizon of B")
    b_at = B.at(np.minimum(a, B.horizon))
    ds = np.diff(s)
    beta = np.where(ds > 0, tc.beta_at(s[:-1]), 0.0)
    inc = np.diff(b_at, axis=-1) * beta
    step = np.clip(np.searchsorted(t, s[:-1], side="right") - 1, 0, t.size - 2)
    dw = np.zeros(inc.shape[:-1] + (t.size - 1,))
    for j in range(inc.shape[-1]):
        dw[..., step[j]] += inc[..., j]
    w = np.concatenate((np.zeros(dw.shape[:-1] + (1,)), np.cumsum(dw, axis=-1)), axis=-1)
    return PathGrid(t, w)


@dataclass(frozen=True)
class SimulationPlan:
    """Brownian sub-intervals on ``[0, T]`` and how each feeds ``W`` and the likelihood."""

    times: np.ndarray  # output grid for W
    dtau: np.ndarray
    theta: np.ndarray
    step_of: np.ndarray
    beta: np.ndarray


def simulation_plan(theta: DriftProcess, mu: DriftProcess, dt: float) -> SimulationPlan:
    """Merge clock images of the output grid with every breakpoint.

    Each Brownian sub-interval lies inside one piece of ``theta`` and, when
    it lies in the clock's image, inside one output step and one piece of
    ``mu``; increments are then sampled exactly, with no interpolation.
    """
    tc = time_change(theta, mu)
    T = theta.horizon
    times = uniform_times(T, dt)
    src = np.unique(np.concatenate((times, np.asarray(tc.knots))))
    tau = np.unique(np.concatenate((tc.alpha(src), np.asarray((0.0,) + theta.ends))))
    tau = tau[(tau >= 0) & (tau <= T)]
    dtau = np.diff(tau)
    keep = dtau > 0
    lo, dtau = tau[:-1][keep], dtau[keep]
    mid = lo + 0.5 * dtau
    th = np.asarray(theta.value_at(mid), dtype=np.float64)
    alpha_T = float(tc.alpha(T))
    step_of = np.full(dtau.size, -1, dtype=np.int64)
    beta = np.zeros(dtau.size)
    inside = (mid < alpha_T) & (th != 0)
    if tc.identity:
        s = mid
    else:
        s = np.asarray(mu.energy_inverse(theta.energy(mid)), dtype=np.float64)
    k = np.clip(np.searchsorted(times, s, side="right") - 1, 0, times.size - 2)
    step_of[inside] = k[inside]
    if tc.identity:
        beta[inside] = 1.0
    else:
        m = np.asarray(mu.value_at(s), dtype=np.float64)
        beta[inside] = th[inside] / m[inside]
    return SimulationPlan(times, dtau, th, step_of, beta)


def _mean_stderr(x: np.ndarray) -> tuple[float, float]:
    return float(np.mean(x)), float(np.std(x, ddof=1) / math.sqrt(x.size))


def _var_stderr(x: np.ndarray) -> tuple[float, float]:
    c = x - np.mean(x)
    v = float(np.mean(c * c) * x.size / (x.size - 1))
    m4 = float(np.mean(c**4))
    return v, math.sqrt(max(m4 - v * v, 0.0) / x.size)


@dataclass(frozen=True)
class MCReport:
    paths: int
    dt: float
    seed: int
    backend: str
    target_mean: float
    mean_W_T_under_Q: float
    stderr: float
    variance_W_T_under_Q: float
    mean_W_T_under_P: float
    mean_W_T_under_P_stderr: float
    variance_W_T_under_P: float
    variance_W_T_under_P_stderr: float
    qv_mean: float
    lr_mass: float
    lr_mass_stderr: float
    ks_statistic: float
    max_time_change_residual: float
    horizon: float = 1.0

    @staticmethod
    def within(value: float, target: float, stderr: float, k: float = 3.0) -> bool:
        return abs(value - target) <= k * stderr

    def checks(self) -> dict:
        return {
            "mean_under_Q": self.within(self.mean_W_T_under_Q, self.target_mean, self.stderr),
            "mean_under_P": self.within(self.mean_W_T_under_P, 0.0, self.mean_W_T_under_P_stderr),
            "variance_under_P": self.within(self.variance_W_T_under_P, self.horizon, self.variance_W_T_under_P_stderr),
            "lr_mass": self.within(self.lr_mass, 1.0, self.lr_mass_stderr),
            "time_change_residual": self.max_time_change_residual <= RESIDUAL_TOL,
        }

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["checks"] = self.checks()
        return d


def mc_verify(
    theta: DriftProcess,
    mu: DriftProcess,
    paths: int,
    dt: float,
    seed: int = 0,
    backend: str | None = None,
) -> MCReport:
    """Simulate ``B`` under ``P``, build ``W`` and test it under both measures.

    Reweighting by the exact likelihood ratio on the merged grid turns
    ``P``-averages into ``Q_theta``-averages. Reported: the reweighted mean
    of ``W_T`` (target ``int mu``), its variance (target ``T``), the
    ``P``-mean and variance of ``W_T`` (targets 0 and ``T``), the mean
    quadratic variation on the output grid, the mass of the likelihood
    ratio (target 1) and a Kolmogorov-Smirnov statistic of ``W_T`` under
    ``P`` against the normal law.
    """
    from scipy import stats

    _same_horizon(theta, mu)
    if paths < 2:
        raise InputError("at least two paths are needed for standard errors")
    plan = simulation_plan(theta, mu, dt)
    draws = paths * plan.dtau.size
    if draws > MAX_DRAWS:
        raise TooLarge(f"{draws} normal draws requested; the cap is {MAX_DRAWS}")
    name = backend or default_backend_name()
    w_t, log_lr, qv = kernel_backend(name).girsanov_paths(
        seed, paths, plan.dtau, plan.theta, plan.step_of, plan.beta, plan.times.size - 1
    )
    T = theta.horizon
    lr = np.exp(log_lr)
    mq, se = _mean_stderr(w_t * lr)
    second = float(np.mean(w_t * w_t * lr))
    mp, mp_se = _mean_stderr(w_t)
    vp, vp_se = _var_stderr(w_t)
    lm, lm_se = _mean_stderr(lr)
    ks = float(stats.kstest(w_t / math.sqrt(T), "norm").statistic)
    tc = time_change(theta, mu)
    target = sum(v * (e - s) for v, s, e in zip(mu.values, mu.starts, mu.ends))
    return MCReport(
        paths=paths,
        dt=dt,
        seed=seed,
        backend=name,
        target_mean=target,
        mean_W_T_under_Q=mq,
        stderr=se,
        variance_W_T_under_Q=second - mq * mq,
        mean_W_T_under_P=mp,
        mean_W_T_under_P_stderr=mp_se,
        variance_W_T_under_P=vp,
        variance_W_T_under_P_stderr=vp_se,
        qv_mean=float(np.mean(qv)),
        lr_mass=lm,
        lr_mass_stderr=lm_se,
        ks_statistic=ks,
        max_time_change_residual=max(tc.residuals(), default=0.0),
        horizon=T,
    )


def write_paths_csv(path: str, grid: PathGrid, limit: int | None = None) -> None:
    """One row per (path, t, value)."""
    vals = grid.values if grid.values.ndim == 2 else grid.values[None, :]
    if limit is not None:
        vals = vals[:limit]
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["path", "t", "value"])
        for p, row in enumerate(vals):
            for t, v in zip(grid.times, row):
                out.writerow([p, repr(float(t)), repr(float(v))])
