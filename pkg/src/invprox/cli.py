"""Command-line interface: configuration ingestion, experiment orchestration,
and result emission.

Subcommands::

    invprox proximity  --config cfg.json [--out DIR] [--quad-order Q] [--rank-tol T]
    invprox table1     [--out DIR]
    invprox predict    --config cfg.json [--out DIR] [--seed S] ...
    invprox oracle     --config cfg.json [--out DIR] [--seed S] ...
    invprox residuals  --config cfg.json [--out DIR] ...

Exit codes: 0 ok; 2 configuration or parse error; 3 numerical failure;
4 internal-consistency failure (the sampling oracle exceeded the closed
form, which indicates a bug rather than a user error).

Output numbers are IEEE doubles printed with 17 significant digits, so
identical configurations and seeds produce byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import jsonschema

from .expr import DynamicsMap, ParseError, parse
from .geometry import BudgetExceeded, DegenerateSpace, NotPSD
from .koopman import (
    InconsistentSystem,
    InvarianceAnalysis,
    ZeroImage,
    ZeroNorm,
    build_model,
    proximity_oracle,
    trajectory_error,
)
from .space import Domain, EmpiricalSpace, NonFiniteValue, QuadratureSpace, read_snapshots

__all__ = ["main", "CONFIG_SCHEMA", "SYSTEM_REGISTRY", "ConfigError"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_INTERNAL = 4


class ConfigError(ValueError):
    pass


# Built-in benchmark system: 2-d polynomial/trig map on the unit box, with
# the three dictionaries used throughout the docs and tests.
SYSTEM_REGISTRY = {
    "example_sec7": {
        "state_dim": 2,
        "domain": [[-1.0, 1.0], [-1.0, 1.0]],
        "dynamics": ["0.9*x1", "0.4*(sin(x2)+x1^2)+0.01*x2^2"],
        "subspaces": {
            "S1": ["1", "x1", "x1^2"],
            "S2": ["1", "x1", "x2", "x1^2"],
            "S3": ["1", "x1", "x2", "x1^2", "x2^2"],
        },
    }
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["state_dim", "domain", "backend", "dictionary"],
    "properties": {
        "state_dim": {"type": "integer", "minimum": 1},
        "domain": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "array",
                "items": {"type": "number"},
                "minItems": 2,
                "maxItems": 2,
            },
        },
        "field": {"const": "real"},
        "backend": {
            "type": "object",
            "additionalProperties": False,
            "required": ["type"],
            "properties": {
                "type": {"enum": ["quadrature", "empirical"]},
                "order": {"type": "integer", "minimum": 1},
                "snapshot_path": {"type": "string"},
                "weights_path": {"type": "string"},
            },
            "allOf": [
                {
                    "if": {"properties": {"type": {"const": "quadrature"}}},
                    "then": {
                        "properties": {
                            "snapshot_path": False,
                            "weights_path": False,
                        }
                    },
                },
                {
                    "if": {"properties": {"type": {"const": "empirical"}}},
                    "then": {
                        "required": ["snapshot_path"],
                        "properties": {"order": False},
                    },
                },
            ],
        },
        "dynamics": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "string"},
        },
        "dictionary": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "string"},
        },
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "rank_tol": {"type": "number", "exclusiveMinimum": 0},
                "quad_tol": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "oracle": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_samples": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "experiment": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_trajectories": {"type": "integer", "minimum": 1},
                "horizon": {"type": "integer", "minimum": 0},
                "sampling_seed": {"type": "integer", "minimum": 0},
            },
        },
    },
}

_DEFAULTS = {
    "tolerances": {"rank_tol": 1e-10, "quad_tol": 1e-9},
    "oracle": {"n_samples": 10000, "seed": 0},
    "experiment": {"n_trajectories": 100, "horizon": 10, "sampling_seed": 0},
}


# --- deterministic emission ---------------------------------------------------

def format_float(value):
    """17 significant digits: enough to round-trip any IEEE double."""
    return format(float(value), ".17g")


def _to_json(value, indent=0):
    pad = "  " * indent
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = ",\n".join(
            f'{pad}  {json.dumps(str(key))}: {_to_json(item, indent + 1)}'
            for key, item in value.items()
        )
        return "{\n" + items + "\n" + pad + "}"
    if isinstance(value, (list, tuple, np.ndarray)):
        seq = list(value)
        if not seq:
            return "[]"
        items = ",\n".join(f"{pad}  {_to_json(item, indent + 1)}" for item in seq)
        return "[\n" + items + "\n" + pad + "]"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    if value is None:
        return "null"
    return json.dumps(str(value))


def write_json(path, payload):
    Path(path).write_text(_to_json(payload) + "\n")


def write_csv(path, header, rows, comments=()):
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(
            format_float(v) if isinstance(v, (float, np.floating)) else str(v)
            for v in row
        ))
    Path(path).write_text("\n".join(lines) + "\n")


# --- configuration -------------------------------------------------------------

def load_config(path):
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        location = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config schema violation at {location}: {exc.message}") from exc
    config = dict(raw)
    for section, defaults in _DEFAULTS.items():
        merged = dict(defaults)
        merged.update(config.get(section, {}))
        config[section] = merged
    config.setdefault("field", "real")
    if len(config["domain"]) != config["state_dim"]:
        raise ConfigError("domain must list one interval per state dimension")
    return config


def _parse_dictionary(config):
    n = config["state_dim"]
    try:
        return tuple(parse(s, n) for s in config["dictionary"])
    except ParseError as exc:
        raise ConfigError(f"dictionary expression: {exc}") from exc


def _parse_dynamics(config):
    if "dynamics" not in config:
        return None
    n = config["state_dim"]
    if len(config["dynamics"]) != n:
        raise ConfigError("dynamics must list one expression per state dimension")
    try:
        return DynamicsMap.from_strings(config["dynamics"], n)
    except ParseError as exc:
        raise ConfigError(f"dynamics expression: {exc}") from exc


def _read_weights(path):
    lines = Path(path).read_text().strip().splitlines()
    if not lines or lines[0].strip() != "w":
        raise ConfigError(f"{path}: weights file must start with header 'w'")
    try:
        return np.array([float(line) for line in lines[1:]])
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def build_space(config):
    try:
        domain = Domain(tuple(tuple(b) for b in config["domain"]))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    backend = config["backend"]
    if backend["type"] == "quadrature":
        return QuadratureSpace(domain, backend.get("order", 20))
    try:
        snapshots_x, snapshots_y = read_snapshots(backend["snapshot_path"])
    except (OSError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if snapshots_x.shape[1] != config["state_dim"]:
        raise ConfigError(
            f"snapshots have dimension {snapshots_x.shape[1]}, "
            f"config says {config['state_dim']}"
        )
    weights = None
    if "weights_path" in backend:
        weights = _read_weights(backend["weights_path"])
    try:
        return EmpiricalSpace(snapshots_x, snapshots_y, weights)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _prepare(config, need_dynamics, forbid_empirical_dynamics=True):
    space = build_space(config)
    atoms = _parse_dictionary(config)
    dynamics = _parse_dynamics(config)
    empirical = isinstance(space, EmpiricalSpace)
    if need_dynamics and dynamics is None:
        raise ConfigError("this command requires a dynamics section")
    if not need_dynamics and empirical and dynamics is not None and forbid_empirical_dynamics:
        raise ConfigError(
            "dynamics is forbidden with the empirical backend unless "
            "trajectories are being simulated (the predict command)"
        )
    if not empirical and dynamics is None:
        raise ConfigError("the quadrature backend requires a dynamics section")
    return space, atoms, dynamics


def _analysis(config, space, atoms, dynamics):
    tol = config["tolerances"]
    gram_dynamics = None if isinstance(space, EmpiricalSpace) else dynamics
    return InvarianceAnalysis(
        atoms,
        space,
        gram_dynamics,
        rank_tol=tol["rank_tol"],
        quad_tol=tol["quad_tol"],
    )


# --- subcommands ----------------------------------------------------------------

def cmd_proximity(config, out_dir):
    space, atoms, dynamics = _prepare(config, need_dynamics=False)
    report = _analysis(config, space, atoms, dynamics).report()
    path = out_dir / "proximity.json"
    write_json(path, report.to_dict())
    print(f"invariance proximity: {format_float(report.proximity)}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_table1(out_dir, quad_order=20, rank_tol=1e-10):
    system = SYSTEM_REGISTRY["example_sec7"]
    domain = Domain(tuple(tuple(b) for b in system["domain"]))
    space = QuadratureSpace(domain, quad_order)
    dynamics = DynamicsMap.from_strings(system["dynamics"], system["state_dim"])
    rows = []
    for name, sources in system["subspaces"].items():
        atoms = tuple(parse(s, system["state_dim"]) for s in sources)
        analysis = InvarianceAnalysis(atoms, space, dynamics, rank_tol=rank_tol)
        rows.append((name, analysis.proximity))
        print(f"{name}: {format_float(analysis.proximity)}")
    path = out_dir / "table1.csv"
    write_csv(path, ["subspace", "proximity"], rows)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_predict(config, out_dir):
    space, atoms, dynamics = _prepare(
        config, need_dynamics=True, forbid_empirical_dynamics=False
    )
    experiment = config["experiment"]
    seed = experiment["sampling_seed"]
    horizon = experiment["horizon"]
    model_dynamics = None if isinstance(space, EmpiricalSpace) else dynamics
    model = build_model(
        atoms, space, model_dynamics, rank_tol=config["tolerances"]["rank_tol"]
    )
    domain = Domain(tuple(tuple(b) for b in config["domain"]))
    rng = np.random.default_rng(seed)
    starts = domain.sample(rng, experiment["n_trajectories"])
    per_step = []
    excluded = 0
    for x0 in starts:
        try:
            per_step.append(trajectory_error(model, dynamics, x0, horizon))
        except ZeroNorm:
            excluded += 1
    if excluded:
        print(f"warning: excluded {excluded} trajectories with vanishing "
              f"dictionary norm", file=sys.stderr)
    rows = []
    steps = []
    if horizon > 0 and per_step:
        errors = np.vstack(per_step)
        for k in range(1, horizon + 1):
            column = errors[:, k - 1]
            stats = {
                "k": k,
                "median": float(np.median(column)),
                "q25": float(np.percentile(column, 25)),
                "q75": float(np.percentile(column, 75)),
                "min": float(np.min(column)),
                "max": float(np.max(column)),
            }
            steps.append(stats)
            rows.append(tuple(stats.values()))
    csv_path = out_dir / "predict.csv"
    write_csv(
        csv_path,
        ["k", "median", "q25", "q75", "min", "max"],
        rows,
        comments=[f"seed={seed}", f"n_trajectories={len(per_step)}",
                  f"excluded={excluded}"],
    )
    json_path = out_dir / "predict.json"
    write_json(json_path, {
        "seed": seed,
        "n_trajectories": len(per_step),
        "excluded": excluded,
        "horizon": horizon,
        "steps": steps,
    })
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK


def cmd_oracle(config, out_dir):
    space, atoms, dynamics = _prepare(config, need_dynamics=False)
    analysis = _analysis(config, space, atoms, dynamics)
    oracle_cfg = config["oracle"]
    result = proximity_oracle(
        atoms,
        space,
        n_samples=oracle_cfg["n_samples"],
        seed=oracle_cfg["seed"],
        analysis=analysis,
    )
    closed_form = analysis.proximity
    payload = {
        "closed_form": closed_form,
        "oracle_max": result.max_error,
        "gap": closed_form - result.max_error,
        "argmax_coeffs": list(map(float, result.argmax_coeffs)),
        "n_samples": result.n_samples,
        "n_excluded": result.n_excluded,
    }
    path = out_dir / "oracle.json"
    write_json(path, payload)
    print(f"closed form {format_float(closed_form)}, "
          f"oracle {format_float(result.max_error)}")
    print(f"wrote {path}")
    if result.max_error > closed_form + 1e-8:
        print(
            "internal consistency failure: sampled error exceeds the closed "
            "form; this is a bug, not a configuration problem",
            file=sys.stderr,
        )
        return EXIT_INTERNAL
    return EXIT_OK


def cmd_residuals(config, out_dir):
    space, atoms, dynamics = _prepare(config, need_dynamics=False)
    analysis = _analysis(config, space, atoms, dynamics)
    bound = analysis.restricted_norm() * analysis.proximity
    rows = []
    violations = 0
    for lam, res in analysis.residuals():
        rows.append((lam.real, lam.imag, res, bound))
        if res > bound + 1e-8:
            violations += 1
    path = out_dir / "residuals.csv"
    write_csv(path, ["lambda_re", "lambda_im", "residual", "bound"], rows)
    if violations:
        print(f"warning: {violations} residuals exceed the bound", file=sys.stderr)
    print(f"wrote {path}")
    return EXIT_OK


# --- argument handling -----------------------------------------------------------

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="invprox",
        description="Invariance proximity of function subspaces under the "
                    "composition operator of a discrete-time system.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, needs_config in [
        ("proximity", True),
        ("table1", False),
        ("predict", True),
        ("oracle", True),
        ("residuals", True),
    ]:
        p = sub.add_parser(name)
        if needs_config:
            p.add_argument("--config", required=True, help="path to a JSON config")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override oracle and experiment seeds")
        p.add_argument("--quad-order", type=int, default=None,
                       help="override the quadrature order")
        p.add_argument("--rank-tol", type=float, default=None,
                       help="override the rank tolerance")
    return parser


def _apply_overrides(config, args):
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be nonnegative")
        config["oracle"]["seed"] = args.seed
        config["experiment"]["sampling_seed"] = args.seed
    if args.quad_order is not None:
        if config["backend"]["type"] != "quadrature":
            raise ConfigError("--quad-order applies to the quadrature backend only")
        if args.quad_order < 1:
            raise ConfigError("--quad-order must be positive")
        config["backend"]["order"] = args.quad_order
    if args.rank_tol is not None:
        if args.rank_tol <= 0:
            raise ConfigError("--rank-tol must be positive")
        config["tolerances"]["rank_tol"] = args.rank_tol
    return config


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "table1":
            if args.quad_order is not None and args.quad_order < 1:
                raise ConfigError("--quad-order must be positive")
            if args.rank_tol is not None and args.rank_tol <= 0:
                raise ConfigError("--rank-tol must be positive")
            return cmd_table1(
                out_dir,
                quad_order=20 if args.quad_order is None else args.quad_order,
                rank_tol=1e-10 if args.rank_tol is None else args.rank_tol,
            )
        config = _apply_overrides(load_config(args.config), args)
        handler = {
            "proximity": cmd_proximity,
            "predict": cmd_predict,
            "oracle": cmd_oracle,
            "residuals": cmd_residuals,
        }[args.command]
        return handler(config, out_dir)
    except (ConfigError, ParseError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DegenerateSpace, NotPSD, NonFiniteValue, InconsistentSystem,
            ZeroImage, ZeroNorm, BudgetExceeded, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
