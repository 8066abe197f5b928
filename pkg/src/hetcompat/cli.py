"""Command-line front end.

Every command reads a JSON problem file (``"schema": 1``), validates it,
runs one computation and prints a deterministic report: JSON with sorted
keys by default, or CSV columns with ``--format csv``. Exit codes: 0 when
a verdict or value was computed (including "incompatible"), 2 for bad
input, 3 for numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction

import jsonschema

from . import __version__
from .errors import HetCompatError, Incompatible, InputError, NumericFailure

COMMANDS = ("check-compat", "construct", "almost", "divergence", "optimize", "girsanov")
BUILTINS = {"normal-example": "optimize"}

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

_NUM = {"type": ["number", "string"]}
_SPACE = {
    "type": "object",
    "properties": {
        "atoms": {"type": "array", "items": {"type": "string"}, "minItems": 1},
        "values": {"type": "array", "items": _NUM},
        "measures": {"type": "array", "items": {"type": "array", "items": _NUM}, "minItems": 1},
    },
    "required": ["atoms", "measures"],
    "additionalProperties": False,
}
_QUANTILE = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["normal", "lognormal", "chi2_1", "constant", "tabulated", "likelihood_ratio"]},
        "loc": {"type": "number"},
        "scale": {"type": "number"},
        "mu": {"type": "number"},
        "sigma": {"type": "number"},
        "value": _NUM,
        "values": {"type": "array", "items": _NUM, "minItems": 1},
        "probs": {"type": "array", "items": _NUM, "minItems": 1},
        "P": {"type": "array", "items": _NUM, "minItems": 1},
        "Q": {"type": "array", "items": _NUM, "minItems": 1},
    },
    "required": ["kind"],
    "additionalProperties": False,
}
_DRIFT = {
    "type": "object",
    "properties": {
        "T": {"type": "number", "exclusiveMinimum": 0},
        "volatility": {"type": "number", "exclusiveMinimum": 0},
        "pieces": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "properties": {"until": {"type": "number"}, "value": {"type": "number"}},
                "required": ["until", "value"],
                "additionalProperties": False,
            },
        },
    },
    "required": ["T", "pieces"],
    "additionalProperties": False,
}
_BASE = {"schema": {"const": 1}, "command": {"enum": list(COMMANDS)}}


def _schema(properties: dict, required: list) -> dict:
    return {
        "type": "object",
        "properties": {**_BASE, **properties},
        "required": ["schema"] + required,
        "additionalProperties": False,
    }


SCHEMAS = {
    "check-compat": _schema({"source": _SPACE, "target": _SPACE, "search_cap": {"type": "integer", "minimum": 1}}, ["source", "target"]),
    "construct": _schema({"source": _SPACE, "target": _SPACE}, ["source", "target"]),
    "almost": _schema(
        {"source": _SPACE, "target": _SPACE, "splits": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1}},
        ["source", "target"],
    ),
    "divergence": _schema(
        {
            "source": _SPACE,
            "target": _SPACE,
            "generators": {"type": "array", "items": {"type": "string"}, "minItems": 1},
            "mixture_with": {"type": "array", "items": _NUM},
            "lambdas": {"type": "array", "items": _NUM, "minItems": 1},
        },
        ["source", "target"],
    ),
    "optimize": _schema(
        {
            "H": _QUANTILE,
            "G": _QUANTILE,
            "objective": {
                "type": "object",
                "properties": {
                    "kind": {"enum": ["mean", "utility", "transform", "variance", "neyman_pearson"]},
                    "params": {"type": "object"},
                },
                "required": ["kind"],
                "additionalProperties": False,
            },
            "grid": {"type": "integer", "minimum": 16},
        },
        ["H", "G", "objective"],
    ),
    "girsanov": _schema(
        {
            "theta": _DRIFT,
            "mu": _DRIFT,
            "paths": {"type": "integer", "minimum": 0},
            "dt": {"type": "number", "exclusiveMinimum": 0},
            "seed": {"type": "integer", "minimum": 0},
            "dump_paths": {"type": "integer", "minimum": 0},
        },
        ["theta", "mu"],
    ),
}


# serialisation ----------------------------------------------------------------


def jsonable(value):
    """Rationals become ``"p/q"`` strings, non-finite floats become strings."""
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, bool) or value is None or isinstance(value, (str, int)):
        return value
    if isinstance(value, float):
        return value if math.isfinite(value) else repr(value)
    if hasattr(value, "item") and not hasattr(value, "__len__"):
        return jsonable(value.item())
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)) or hasattr(value, "tolist"):
        seq = value.tolist() if hasattr(value, "tolist") else value
        return [jsonable(v) for v in seq]
    return str(value)


def dumps(report: dict) -> str:
    return json.dumps(jsonable(report), indent=2, sort_keys=True) + "\n"


def to_csv(header: list[str], rows: list) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(header)
    for row in rows:
        out.writerow([jsonable(v) if not isinstance(v, float) else repr(v) for v in row])
    return buf.getvalue()


# parsing helpers --------------------------------------------------------------


def _exact(settings: dict) -> bool:
    return settings["mode"] == "rational"


def _tuple(doc: dict, exact: bool, label: str):
    from .measure import FiniteSpace, make_tuple, parse_number

    values = doc.get("values")
    if values is not None:
        values = tuple(parse_number(v, exact) for v in values)
    try:
        space = FiniteSpace(tuple(doc["atoms"]), values)
        return make_tuple(space, doc["measures"], exact)
    except InputError as exc:
        raise type(exc)(f"{label}: {exc}") from exc


def _quantile(spec: dict, exact: bool):
    from .measure import FiniteSpace, build_measure, parse_number
    from .quantiles import from_spec, quantile_of_density

    if spec["kind"] == "likelihood_ratio":
        if "P" not in spec or "Q" not in spec or len(spec["P"]) != len(spec["Q"]):
            raise InputError("likelihood_ratio quantile needs P and Q of equal length")
        space = FiniteSpace(tuple(f"w{k}" for k in range(len(spec["P"]))))
        return quantile_of_density(build_measure(space, spec["P"], exact), build_measure(space, spec["Q"], exact))
    if spec["kind"] == "tabulated" and not exact:
        spec = {**spec, "values": [float(parse_number(v)) for v in spec["values"]],
                "probs": [float(parse_number(p)) for p in spec["probs"]]}
    return from_spec(spec)


def _certificate(cert) -> dict | None:
    if cert is None:
        return None
    return {"slopes": cert.slopes, "intercepts": cert.intercepts, "gap": cert.gap,
            "mean_source": cert.mean_source, "mean_target": cert.mean_target}


def _kernel(kernel) -> list | None:
    return None if kernel is None else [list(row) for row in kernel.matrix]


# commands -------------------------------------------------------------------


def cmd_check_compat(doc: dict, settings: dict):
    from .compatibility import SEARCH_CAP, check_compat

    exact = _exact(settings)
    Q = _tuple(doc["source"], exact, "source")
    F = _tuple(doc["target"], exact, "target")
    rep = check_compat(Q, F, cap=doc.get("search_cap", SEARCH_CAP))
    report = {
        "verdict": rep.verdict,
        "witness_kind": rep.witness_kind,
        "refinement_m": rep.refinement_m,
        "kl_per_i": rep.kl_per_i,
        "certificate": _certificate(rep.certificate),
        "point_map": rep.point_map.as_labels() if rep.point_map else None,
        "kernel": _kernel(rep.kernel),
        "snap_distance": rep.snap_distance,
        "notes": rep.notes,
    }
    return report, (["field", "value"], [[k, json.dumps(jsonable(v), sort_keys=True)] for k, v in sorted(report.items())])


def cmd_construct(doc: dict, settings: dict):
    from .compatibility import _require_exact, conditional_identity_check, construct_map, verify_map

    exact = _exact(settings)
    Q = _tuple(doc["source"], exact, "source")
    F = _tuple(doc["target"], exact, "target")
    try:
        c = construct_map(Q, F, snap_floats=True)
    except Incompatible as exc:
        report = {"verdict": "incompatible", "certificate": _certificate(exc.verdict.violation)}
        return report, (["source_atom", "target_atom"], [])
    _, F_used, _ = _require_exact(Q, F, snap_floats=True)
    residuals = conditional_identity_check(c.point_map, c.lifted, F_used)
    report = {
        "verdict": "constructed",
        "split": c.split,
        "point_map": c.point_map.as_labels(),
        "verify_map": verify_map(c.point_map, c.lifted, F_used),
        "conditional_identity_max_residual": max(residuals),
        "kernel": _kernel(c.kernel),
        "snap_distance": c.snap_distance,
    }
    rows = [[s, t] for s, t in c.point_map.as_labels().items()]
    return report, (["source_atom", "target_atom"], rows)


def cmd_almost(doc: dict, settings: dict):
    from .compatibility import almost_compat_sequence

    exact = _exact(settings)
    Q = _tuple(doc["source"], exact, "source")
    F = _tuple(doc["target"], exact, "target")
    try:
        steps = almost_compat_sequence(Q, F, doc.get("splits"))
    except Incompatible as exc:
        return {"verdict": "incompatible", "certificate": _certificate(exc.verdict.violation)}, (["m"], [])
    report = {
        "verdict": "compatible",
        "steps": [{"m": s.split, "kl": s.kl, "tv": s.tv, "pushforwards": [m.weights for m in s.pushforwards]} for s in steps],
    }
    header = ["m"] + [f"kl_{i + 1}" for i in range(Q.n)]
    return report, (header, [[s.split] + list(s.kl) for s in steps])


def cmd_divergence(doc: dict, settings: dict):
    from .divergences import DEFAULT_FAMILY, divergence_screen, generator, mixture_screen
    from .measure import build_measure

    exact = _exact(settings)
    src = _tuple(doc["source"], exact, "source")
    tgt = _tuple(doc["target"], exact, "target")
    if src.n != 2 or tgt.n != 2:
        raise InputError("divergence needs exactly two source measures (P, Q) and two targets (F, G)")
    family = tuple(generator(g) for g in doc["generators"]) if "generators" in doc else DEFAULT_FAMILY
    P, Q = src[0], src[1]
    F, G = tgt[0], tgt[1]
    screen = divergence_screen(F, G, P, Q, family)
    report = {
        "label": screen.label,
        "passed": screen.passed,
        "reason": screen.reason,
        "target": screen.target_values,
        "source": screen.source_values,
    }
    if "mixture_with" in doc:
        F2 = build_measure(F.space, doc["mixture_with"], exact)
        lambdas = doc.get("lambdas")
        report["mixture_screen"] = mixture_screen(F, F2, lambdas, G, P, Q, family)
    rows = [[f.kind, screen.target_values.get(f.kind), screen.source_values.get(f.kind)] for f in family]
    return report, (["generator", "target_divergence", "source_divergence"], rows)


def _transform(params: dict):
    from .optimize import Identity, ShiftedSquare, Transform
    import numpy as np

    name = params.get("function", "identity")
    if name == "identity":
        return Identity()
    if name == "square":
        return ShiftedSquare(float(params.get("shift", 0.0)))
    if name == "abs":
        return Transform(lambda x: abs(x), "abs")
    if name == "cara":
        a = float(params.get("a", 1.0))
        if a <= 0:
            raise InputError("cara utility needs a > 0")
        return Transform(lambda x: -np.exp(-a * np.asarray(x, dtype=np.float64)), "cara")
    if name == "call":
        k = float(params.get("strike", 0.0))
        return Transform(lambda x: np.maximum(np.asarray(x, dtype=np.float64) - k, 0.0), "call")
    raise InputError(f"unknown function {name!r}; known: identity, square, abs, cara, call")


def _normal_example_report(grid: int):
    from .optimize import normal_example

    ex = normal_example(grid)
    v = ex.variance
    report = {
        "problem": "normal-example",
        "H": {"kind": "lognormal", "mu": -0.5, "sigma": 1.0},
        "G": {"kind": "normal", "loc": 0.0, "scale": 1.0},
        "max_mean": ex.max_mean,
        "min_mean": ex.min_mean,
        "max_second_moment": ex.max_second_moment,
        "min_second_moment": ex.min_second_moment,
        "max_variance": v.max_value,
        "min_variance": v.min_value,
        "argmin_x_max": v.argmin_x_max,
        "argmin_x_min": v.argmin_x_min,
        "saddle_gap": v.saddle_gap,
    }
    keys = ["max_mean", "min_mean", "max_second_moment", "min_second_moment", "max_variance", "min_variance"]
    return report, (["quantity", "value"], [[k, report[k]] for k in keys])


def cmd_optimize(doc: dict, settings: dict):
    from . import optimize as opt

    grid = int(doc.get("grid", opt.GRID_POINTS))
    if doc.get("builtin") == "normal-example":
        return _normal_example_report(grid)
    exact = _exact(settings)
    H = _quantile(doc["H"], exact)
    G = _quantile(doc["G"], exact)
    kind = doc["objective"]["kind"]
    params = doc["objective"].get("params", {})
    sense = params.get("sense", "max")
    if sense not in ("max", "min"):
        raise InputError("params.sense must be 'max' or 'min'")
    report = {"objective": kind, "H": H.describe(), "G": G.describe()}
    table = None
    if kind == "mean":
        report["sense"] = sense
        report["value"] = opt.frechet_hoeffding(H, G) if sense == "max" else opt.antitone_pairing(H, G)
    elif kind == "utility":
        report["value"] = opt.robust_utility(H, G, _transform(params))
    elif kind == "transform":
        report["sense"] = sense
        report["value"] = opt.transform_objective(H, G, _transform(params), sense, grid)
    elif kind == "variance":
        v = opt.robust_variance(H, G, grid)
        report.update(max_value=v.max_value, min_value=v.min_value, argmin_x_max=v.argmin_x_max,
                      argmin_x_min=v.argmin_x_min, saddle_gap=v.saddle_gap, method=v.method)
    else:
        from .measure import parse_number

        levels = params.get("levels")
        if levels is None:
            if "q" not in params:
                raise InputError("neyman_pearson needs params.q or params.levels")
            levels = [params["q"]]
        levels = [parse_number(q, exact) for q in levels]
        curve = [(q, opt.neyman_pearson(H, q)) for q in levels]
        report["curve"] = [{"q": q, "k": r.value, "rule": r.rule} for q, r in curve]
        table = (["q", "k"], [[q, r.value] for q, r in curve])
    if table is None:
        keys = [k for k in ("value", "max_value", "min_value") if k in report]
        table = (["quantity", "value"], [[k, report[k]] for k in keys])
    return report, table


def cmd_girsanov(doc: dict, settings: dict):
    from .girsanov import (
        VOLATILITY_NOTE,
        DriftProcess,
        construct_process,
        drift_compat,
        mc_verify,
        sample_brownian,
        time_change,
        uniform_times,
    )
    import numpy as np

    theta = DriftProcess.from_spec(doc["theta"])
    mu = DriftProcess.from_spec(doc["mu"])
    paths = settings["paths"] if settings["paths"] is not None else doc.get("paths", 10**4)
    dt = settings["dt"] if settings["dt"] is not None else doc.get("dt", 2.0**-9)
    seed = settings["seed"] if settings["seed"] is not None else doc.get("seed", 0)
    report = {
        "energy_theta": theta.total_energy(),
        "energy_mu": mu.total_energy(),
        "drift_compat": drift_compat(theta, mu),
        "paths": paths,
        "dt": dt,
        "seed": seed,
    }
    if theta.volatility != mu.volatility:
        report["note"] = VOLATILITY_NOTE
    if not report["drift_compat"]:
        return report, (["path", "t", "value"], [])
    tc = time_change(theta, mu)
    report["time_change"] = {
        "knots": tc.knots,
        "alpha": tc.alpha_knots,
        "beta": tc.beta,
        "residuals": tc.residuals(),
        "clock_check": tc.clock_check(),
    }
    if paths >= 2:
        report["monte_carlo"] = mc_verify(theta, mu, paths, dt, seed).to_dict()
        report["monte_carlo"].pop("backend")
    dump = doc.get("dump_paths", 3)
    rows = []
    if dump:
        grid = uniform_times(theta.horizon, dt)
        times = np.unique(np.concatenate((grid, tc.alpha(grid))))
        B = sample_brownian(times, seed, paths=dump)
        vals = B.values if B.values.ndim == 2 else B.values[None, :]
        for p, row in enumerate(vals):
            W = construct_process(theta, mu, type(B)(B.times, row))
            on_grid = np.interp(grid, W.times, W.values)
            rows.extend([p, float(t), float(v)] for t, v in zip(grid, on_grid))
    return report, (["path", "t", "value"], rows)


HANDLERS = {
    "check-compat": cmd_check_compat,
    "construct": cmd_construct,
    "almost": cmd_almost,
    "divergence": cmd_divergence,
    "optimize": cmd_optimize,
    "girsanov": cmd_girsanov,
}


# entry point ------------------------------------------------------------------


def load_problem(command: str, source: str) -> dict:
    """Read and validate a problem file, or expand a built-in problem name."""
    if source in BUILTINS:
        if BUILTINS[source] != command:
            raise InputError(f"built-in problem {source!r} belongs to {BUILTINS[source]!r}")
        return {"schema": 1, "command": command, "builtin": source}
    try:
        if source == "-":
            text = sys.stdin.read()
        else:
            with open(source, encoding="utf-8") as fh:
                text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read {source}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    validator = jsonschema.Draft202012Validator(SCHEMAS[command])
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        lines = []
        for err in errors:
            where = "/".join(str(p) for p in err.absolute_path) or "<root>"
            lines.append(f"{source}: field {where}: {err.message}")
        raise InputError("\n".join(lines))
    if doc.get("command", command) != command:
        raise InputError(f"{source}: file is for command {doc['command']!r}, not {command!r}")
    return doc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hetcompat", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("input", help="problem file (JSON), '-' for stdin, or a built-in name")
        p.add_argument("--mode", choices=("rational", "float"), default="float")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--dt", type=float, default=None)
        p.add_argument("--paths", type=int, default=None)
        p.add_argument("--out", default=None, help="write the report here instead of stdout")
        p.add_argument("--format", choices=("text", "csv"), default="text")
        p.add_argument("--threads", type=int, default=None)
    return parser


def settings_block(args) -> dict:
    from .divergences import SCREEN_TOL
    from .lp import ESCALATE_TOL, FEAS_TOL, SNAP_DENOMINATOR

    return {
        "mode": args.mode,
        "seed": args.seed,
        "dt": args.dt,
        "paths": args.paths,
        "format": args.format,
        "tolerances": {
            "lp_feasibility": FEAS_TOL,
            "lp_escalation": ESCALATE_TOL,
            "snap_denominator": SNAP_DENOMINATOR,
            "divergence_screen": SCREEN_TOL,
        },
    }


def run(argv=None) -> tuple[int, str, str | None]:
    """Parse ``argv``, execute and return ``(exit code, text, output path)``."""
    parser = build_parser()
    args = parser.parse_args(argv)
    settings = settings_block(args)
    try:
        if args.threads:
            from ._kernels import set_threads

            set_threads(args.threads)
        doc = load_problem(args.command, args.input)
        report, table = HANDLERS[args.command](doc, settings)
    except InputError as exc:
        return EXIT_INPUT, f"error: {exc}\n", None
    except NumericFailure as exc:
        return EXIT_NUMERIC, f"numeric failure: {exc}\n", None
    except HetCompatError as exc:
        return EXIT_NUMERIC, f"failure: {type(exc).__name__}: {exc}\n", None
    if args.format == "csv":
        text = to_csv(*table)
    else:
        text = dumps({"command": args.command, "settings": settings, "report": report})
    return EXIT_OK, text, args.out


def main(argv=None) -> int:
    code, text, out = run(argv)
    if code != EXIT_OK:
        sys.stderr.write(text)
    elif out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
