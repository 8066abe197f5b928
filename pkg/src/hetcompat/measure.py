"""Finite sample spaces, probability measures on them, and density profiles.

Two arithmetic modes coexist. A measure whose weights are all ``Fraction``
objects is *exact*; anything else is stored as ``float``. Operations that
combine measures stay exact only when every input is exact.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Sequence

from .errors import (
    InputError,
    InvalidMeasure,
    NotDominated,
    NotNormalized,
    SpaceMismatch,
)

NORMALIZATION_TOL = 1e-12
MERGE_TOL = 1e-12


def parse_number(value, exact: bool | None = None):
    """Turn ``value`` into a ``Fraction`` (exact) or ``float``.

    Strings of the form ``"p/q"`` or decimal literals are parsed exactly.
    When ``exact`` is None the mode follows the input type.
    """
    if isinstance(value, bool):
        raise InvalidMeasure(f"boolean is not a number: {value!r}")
    if isinstance(value, Fraction):
        out = value
    elif isinstance(value, int):
        out = Fraction(value)
    elif isinstance(value, str):
        try:
            out = Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidMeasure(f"cannot parse number {value!r}") from exc
    elif isinstance(value, float):
        if exact:
            return Fraction(value)
        return value
    else:
        try:
            return parse_number(float(value), exact)
        except (TypeError, ValueError) as exc:
            raise InvalidMeasure(f"cannot parse number {value!r}") from exc
    if exact is False:
        return float(out)
    return out


def is_exact(value) -> bool:
    return isinstance(value, Fraction)


def format_number(value) -> str | float:
    """Serialisable form: ``"p/q"`` strings for rationals, floats as is."""
    if isinstance(value, Fraction):
        return str(value)
    return float(value)


def to_float(value) -> float:
    return float(value)


@dataclass(frozen=True)
class FiniteSpace:
    """Ordered atom labels, optionally carrying a numeric value per atom."""

    atoms: tuple[str, ...]
    values: tuple | None = None

    def __post_init__(self):
        atoms = tuple(str(a) for a in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if not atoms:
            raise InvalidMeasure("a finite space needs at least one atom")
        if len(set(atoms)) != len(atoms):
            raise InvalidMeasure("atom identifiers must be unique")
        if self.values is not None:
            vals = tuple(self.values)
            if len(vals) != len(atoms):
                raise InvalidMeasure("one numeric value per atom is required")
            object.__setattr__(self, "values", vals)

    @property
    def size(self) -> int:
        return len(self.atoms)

    def index(self, atom: str) -> int:
        return self.atoms.index(atom)

    def __len__(self) -> int:
        return len(self.atoms)


@dataclass(frozen=True)
class FiniteMeasure:
    space: FiniteSpace
    weights: tuple

    @property
    def exact(self) -> bool:
        return all(isinstance(w, Fraction) for w in self.weights)

    def support(self) -> tuple[int, ...]:
        return tuple(k for k, w in enumerate(self.weights) if w != 0)

    def mass(self, atom: str):
        return self.weights[self.space.index(atom)]

    def as_float(self) -> "FiniteMeasure":
        return FiniteMeasure(self.space, tuple(float(w) for w in self.weights))

    def as_exact(self) -> "FiniteMeasure":
        return FiniteMeasure(self.space, tuple(Fraction(w) for w in self.weights))

    def __len__(self) -> int:
        return len(self.weights)

    def __iter__(self):
        return iter(self.weights)


def build_measure(space: FiniteSpace, weights: Sequence, exact: bool | None = None) -> FiniteMeasure:
    """Validate weights and wrap them as a measure on ``space``.

    Parameters
    ----------
    space : FiniteSpace
    weights : sequence of numbers or ``"p/q"`` strings, one per atom
    exact : force rational (True) or float (False) mode; by default the
        mode is rational exactly when every weight is an int, Fraction or
        string.

    Raises
    ------
    InvalidMeasure
        Negative or non-finite weight, or wrong length.
    NotNormalized
        Total mass differs from one (exactly in rational mode, by more than
        1e-12 in float mode).
    """
    weights = list(weights)
    if len(weights) != space.size:
        raise InvalidMeasure(f"expected {space.size} weights, got {len(weights)}")
    if exact is None:
        exact = all(isinstance(w, (int, Fraction, str)) and not isinstance(w, bool) for w in weights)
    vals = tuple(parse_number(w, exact) for w in weights)
    for atom, w in zip(space.atoms, vals):
        if not exact and not math.isfinite(w):
            raise InvalidMeasure(f"weight of atom {atom!r} is not finite")
        if w < 0:
            raise InvalidMeasure(f"weight of atom {atom!r} is negative: {w}")
    total = sum(vals, Fraction(0) if exact else 0.0)
    if exact:
        if total != 1:
            raise NotNormalized(f"weights sum to {total}, not 1")
    elif abs(total - 1.0) > NORMALIZATION_TOL:
        raise NotNormalized(f"weights sum to {total!r}, not 1 within {NORMALIZATION_TOL}")
    return FiniteMeasure(space, vals)


@dataclass(frozen=True)
class MeasureTuple:
    """n >= 1 measures on one shared space."""

    measures: tuple[FiniteMeasure, ...]

    def __post_init__(self):
        ms = tuple(self.measures)
        object.__setattr__(self, "measures", ms)
        if not ms:
            raise InvalidMeasure("a measure tuple needs at least one member")
        space = ms[0].space
        if any(m.space != space for m in ms):
            raise SpaceMismatch("tuple members live on different spaces")

    @property
    def space(self) -> FiniteSpace:
        return self.measures[0].space

    @property
    def n(self) -> int:
        return len(self.measures)

    @property
    def exact(self) -> bool:
        return all(m.exact for m in self.measures)

    def rows(self) -> list[tuple]:
        return [m.weights for m in self.measures]

    def as_float(self) -> "MeasureTuple":
        return MeasureTuple(tuple(m.as_float() for m in self.measures))

    def as_exact(self) -> "MeasureTuple":
        return MeasureTuple(tuple(m.as_exact() for m in self.measures))

    def __len__(self) -> int:
        return len(self.measures)

    def __iter__(self) -> Iterator[FiniteMeasure]:
        return iter(self.measures)

    def __getitem__(self, k: int) -> FiniteMeasure:
        return self.measures[k]


def make_tuple(space: FiniteSpace, rows: Iterable[Sequence], exact: bool | None = None) -> MeasureTuple:
    return MeasureTuple(tuple(build_measure(space, r, exact) for r in rows))


def _common_mode(measures: Iterable[FiniteMeasure]) -> bool:
    return all(m.exact for m in measures)


def average_reference(tup: MeasureTuple) -> FiniteMeasure:
    """Equal-weight mixture of the tuple members."""
    exact = tup.exact
    n = tup.n
    if exact:
        w = tuple(sum(col, Fraction(0)) / n for col in zip(*tup.rows()))
    else:
        w = tuple(math.fsum(float(x) for x in col) / n for col in zip(*tup.rows()))
    return FiniteMeasure(tup.space, w)


def dominates(reference: FiniteMeasure, tup: MeasureTuple) -> bool:
    if reference.space != tup.space:
        raise SpaceMismatch("reference and tuple live on different spaces")
    for k, r in enumerate(reference.weights):
        if r == 0 and any(m.weights[k] != 0 for m in tup):
            return False
    return True


def absolutely_continuous(p: FiniteMeasure, q: FiniteMeasure) -> bool:
    """True when ``p`` vanishes wherever ``q`` does."""
    if p.space != q.space:
        raise SpaceMismatch("measures live on different spaces")
    return all(not (b == 0 and a != 0) for a, b in zip(p.weights, q.weights))


@dataclass(frozen=True)
class WeightedCloud:
    """A finitely supported probability law on R^n.

    Points are stored in lexicographic order with duplicates merged and
    zero-weight points removed, so two clouds describing the same law
    compare equal.
    """

    points: tuple[tuple, ...]
    weights: tuple

    @classmethod
    def from_pairs(cls, points: Iterable[Sequence], weights: Iterable, tol: float = MERGE_TOL) -> "WeightedCloud":
        pts = [tuple(p) for p in points]
        ws = list(weights)
        if len(pts) != len(ws):
            raise InvalidMeasure("points and weights differ in length")
        if not pts:
            raise InvalidMeasure("empty cloud")
        dim = len(pts[0])
        if any(len(p) != dim for p in pts):
            raise InvalidMeasure("cloud points have different dimensions")
        exact = all(isinstance(w, Fraction) for w in ws) and all(
            isinstance(c, Fraction) for p in pts for c in p
        )
        if not exact:
            pts = [tuple(float(c) for c in p) for p in pts]
            ws = [float(w) for w in ws]
            for p in pts:
                if not all(math.isfinite(c) for c in p):
                    raise InvalidMeasure("cloud point has a non-finite coordinate")
        if any(w < 0 for w in ws):
            raise InvalidMeasure("negative cloud weight")
        merged_pts: list[tuple] = []
        merged_ws: list = []
        for p, w in zip(pts, ws):
            if w == 0:
                continue
            hit = None
            for k, q in enumerate(merged_pts):
                if exact:
                    if p == q:
                        hit = k
                        break
                elif all(abs(a - b) <= tol for a, b in zip(p, q)):
                    hit = k
                    break
            if hit is None:
                merged_pts.append(p)
                merged_ws.append(w)
            else:
                merged_ws[hit] = merged_ws[hit] + w
        order = sorted(range(len(merged_pts)), key=lambda k: merged_pts[k])
        cloud = cls(tuple(merged_pts[k] for k in order), tuple(merged_ws[k] for k in order))
        total = sum(cloud.weights, Fraction(0) if exact else 0.0)
        if exact and total != 1:
            raise NotNormalized(f"cloud weights sum to {total}")
        if not exact and abs(total - 1.0) > NORMALIZATION_TOL:
            raise NotNormalized(f"cloud weights sum to {total!r}")
        return cloud

    @property
    def dim(self) -> int:
        return len(self.points[0])

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def exact(self) -> bool:
        return all(isinstance(w, Fraction) for w in self.weights) and all(
            isinstance(c, Fraction) for p in self.points for c in p
        )

    def barycenter(self) -> tuple:
        zero = Fraction(0) if self.exact else 0.0
        return tuple(
            sum((w * p[k] for p, w in zip(self.points, self.weights)), zero) for k in range(self.dim)
        )

    def expectation(self, f) -> object:
        zero = Fraction(0) if self.exact else 0.0
        return sum((w * f(p) for p, w in zip(self.points, self.weights)), zero)

    def as_float(self) -> "WeightedCloud":
        return WeightedCloud(
            tuple(tuple(float(c) for c in p) for p in self.points), tuple(float(w) for w in self.weights)
        )

    def shrink(self, lam) -> "WeightedCloud":
        """Contract every point towards the barycenter by the factor ``lam``."""
        bar = self.barycenter()
        pts = [tuple(lam * c + (1 - lam) * b for c, b in zip(p, bar)) for p in self.points]
        return WeightedCloud.from_pairs(pts, self.weights)


@dataclass(frozen=True)
class DensityVector:
    """Per-atom vector of density ratios against ``reference``.

    Atoms where the reference has no mass carry ``None``.
    """

    reference: FiniteMeasure
    values: tuple

    def at(self, atom: str):
        return self.values[self.reference.space.index(atom)]


def density_profile(tup: MeasureTuple, reference: FiniteMeasure | None = None) -> tuple[DensityVector, WeightedCloud]:
    """Density vector of ``tup`` against ``reference`` and its law under it.

    The reference defaults to the equal-weight average of the tuple.
    """
    if reference is None:
        reference = average_reference(tup)
    if reference.space != tup.space:
        raise SpaceMismatch("reference and tuple live on different spaces")
    if not dominates(reference, tup):
        raise NotDominated("reference does not dominate every tuple member")
    exact = tup.exact and reference.exact
    values = []
    points, weights = [], []
    for k, r in enumerate(reference.weights):
        if r == 0:
            values.append(None)
            continue
        if exact:
            vec = tuple(m.weights[k] / r for m in tup)
        else:
            vec = tuple(float(m.weights[k]) / float(r) for m in tup)
        values.append(vec)
        points.append(vec)
        weights.append(r if exact else float(r))
    return DensityVector(reference, tuple(values)), WeightedCloud.from_pairs(points, weights)


# structured-text measure files ---------------------------------------------


def measures_from_document(doc: dict, exact: bool | None = None) -> tuple[FiniteSpace, dict[str, MeasureTuple]]:
    """Parse ``{"atoms": [...], "values": [...]?, "tuples": {name: [[w...], ...]}}``."""
    if not isinstance(doc, dict):
        raise InputError("measure document must be a mapping")
    unknown = set(doc) - {"atoms", "values", "tuples"}
    if unknown:
        raise InputError(f"unknown measure-file fields: {sorted(unknown)}")
    if "atoms" not in doc or "tuples" not in doc:
        raise InputError("measure document needs 'atoms' and 'tuples'")
    values = doc.get("values")
    if values is not None:
        values = tuple(parse_number(v, exact) for v in values)
    space = FiniteSpace(tuple(doc["atoms"]), values)
    tuples = {}
    for name, rows in doc["tuples"].items():
        if not isinstance(rows, list) or not rows:
            raise InputError(f"tuple {name!r} must be a non-empty list of weight lists")
        try:
            tuples[name] = make_tuple(space, rows, exact)
        except InputError as exc:
            raise type(exc)(f"tuple {name!r}: {exc}") from exc
    return space, tuples


def measures_to_document(space: FiniteSpace, tuples: dict[str, MeasureTuple]) -> dict:
    doc: dict = {"atoms": list(space.atoms)}
    if space.values is not None:
        doc["values"] = [format_number(v) for v in space.values]
    doc["tuples"] = {
        name: [[format_number(w) for w in m.weights] for m in tup] for name, tup in tuples.items()
    }
    return doc


def read_measure_file(path: str, exact: bool | None = None) -> tuple[FiniteSpace, dict[str, MeasureTuple]]:
    with open(path, encoding="utf-8") as fh:
        return measures_from_document(json.load(fh), exact)


def write_measure_file(path: str, space: FiniteSpace, tuples: dict[str, MeasureTuple]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(measures_to_document(space, tuples), fh, indent=2, sort_keys=True)
        fh.write("\n")
