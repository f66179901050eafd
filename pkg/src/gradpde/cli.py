"""Command-line front end: experiment commands with CSV/JSON emission.

Subcommands
-----------
solve        solve one problem at a fixed degree, report the error
reconstruct  fit the Sobolev reconstruction of an oracle field
sweep        solve over a degree list, emit ``sweep.csv``
classify     sweep, fit rates, classify, emit ``report.json``
check        finite-difference gradient validation

Configuration may come from a JSON file (``--config``) mirroring the flag
names; explicit flags win.  Output files are written atomically (temp file +
rename) and CSV bodies are deterministic for a fixed seed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from gradpde import analysis
from gradpde import flow as _flow
from gradpde.basis import BasisError, EvaluationError
from gradpde.cubature import sobolev_norm_sq, sobolev_weight_matrix
from gradpde.grid import EigenSolverError, GridError, multi_index_set, tensor_grid
from gradpde.basis import vandermonde
from gradpde.loss import (
    EIKONAL,
    POISSON,
    RECONSTRUCTION,
    LossError,
    LossProblem,
    evaluate_loss,
)
from gradpde.oracles import (
    ManifoldDescriptor,
    OracleError,
    distance_field,
    manufactured_poisson,
    poisson_dim,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

_VALIDATION_ERRORS = (
    argparse.ArgumentTypeError,
    GridError,
    LossError,
    BasisError,
    OracleError,
    analysis.AnalysisError,
    ValueError,
    KeyError,
    OSError,
)
_NUMERIC_ERRORS = (
    _flow.FlowError,
    EigenSolverError,
    EvaluationError,
    FloatingPointError,
    np.linalg.LinAlgError,
)


class ConfigError(ValueError):
    """Malformed configuration (bad flag value, missing field)."""


def _color(text: str, code: str) -> str:
    if os.environ.get("NO_COLOR") or not sys.stdout.isatty():
        return text
    return f"\033[{code}m{text}\033[0m"


def _atomic_write(path: str, content: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(header: list[str], rows: list[list]) -> str:
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            if isinstance(v, float):
                cells.append(repr(v))
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def parse_manifold(text: str, dim: int) -> ManifoldDescriptor:
    """Parse ``KIND:PARAMS`` manifold flags.

    ``point:0.5`` / ``point:0.1,0.2``; ``l1_sphere:cx,cy,r``;
    ``axis_hyperplane:axis,offset``.
    """
    kind, _, params = text.partition(":")
    try:
        vals = [float(p) for p in params.split(",")] if params else []
    except ValueError as exc:
        raise ConfigError(f"bad manifold parameters in {text!r}") from exc
    if kind == "point":
        if len(vals) != dim:
            raise ConfigError(f"point manifold needs {dim} coordinates, got {len(vals)}")
        return ManifoldDescriptor(kind="point", dim=dim, location=tuple(vals))
    if kind == "l1_sphere":
        if len(vals) != dim + 1:
            raise ConfigError(
                f"l1_sphere needs {dim} center coordinates plus a radius"
            )
        return ManifoldDescriptor(
            kind="l1_sphere", dim=dim, center=tuple(vals[:-1]), radius=vals[-1]
        )
    if kind == "axis_hyperplane":
        if len(vals) != 2:
            raise ConfigError("axis_hyperplane needs axis,offset")
        return ManifoldDescriptor(
            kind="axis_hyperplane", dim=dim, axis=int(vals[0]), offset=vals[1]
        )
    raise ConfigError(f"unknown manifold kind {kind!r}")


def _parse_degrees(text: str) -> list[int]:
    try:
        degrees = [int(t) for t in text.split(",") if t]
    except ValueError as exc:
        raise ConfigError(f"bad degree list {text!r}") from exc
    if len(degrees) < 3 or any(b <= a for a, b in zip(degrees, degrees[1:])):
        raise ConfigError("degrees must be at least 3 strictly increasing integers")
    return degrees


def _parse_step(text: str):
    if text == "auto":
        return _flow.ONE_OVER_L
    try:
        v = float(text)
    except ValueError as exc:
        raise ConfigError(f"step must be 'auto' or a positive real, got {text!r}") from exc
    if v <= 0:
        raise ConfigError("step must be positive")
    return v


_CONFIG_KEYS = (
    "problem", "d", "n", "degrees", "oracle", "manifold", "boundary_scale",
    "sobolev_order", "step", "max_iters", "grad_tol", "seed", "jobs", "out",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gradpde",
        description="Spectral variational PDE solving with convergence-rate classification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("solve", "solve one problem at a fixed degree"),
        ("reconstruct", "Sobolev reconstruction of an oracle field"),
        ("sweep", "solve over a degree list and emit sweep.csv"),
        ("classify", "sweep, fit convergence rates, and classify"),
        ("check", "finite-difference gradient validation"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", help="JSON config file; flags override its values")
        p.add_argument("--problem", choices=(RECONSTRUCTION, POISSON, EIKONAL))
        p.add_argument("--d", type=int, help="spatial dimension")
        p.add_argument("--n", type=int, help="surrogate degree")
        p.add_argument("--degrees", help="comma-separated strictly increasing degrees")
        p.add_argument("--oracle", help="manufactured solution name")
        p.add_argument("--manifold", help="KIND:PARAMS descriptor for the Eikonal zero set")
        p.add_argument("--boundary-scale", dest="boundary_scale", type=float)
        p.add_argument("--sobolev-order", dest="sobolev_order", type=int)
        p.add_argument("--step", help="'auto' (1/L) or a positive real")
        p.add_argument("--max-iters", dest="max_iters", type=int)
        p.add_argument("--grad-tol", dest="grad_tol", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int, help="worker pool size for sweeps")
        p.add_argument("--out", help="output directory")
    return parser


def _merge_config(args: argparse.Namespace) -> dict:
    cfg: dict = {
        "problem": POISSON, "d": None, "n": 8, "degrees": None, "oracle": None,
        "manifold": None, "boundary_scale": None, "sobolev_order": 0,
        "step": "auto", "max_iters": 1000, "grad_tol": 1e-10, "seed": 0,
        "jobs": 1, "out": ".",
    }
    if args.config:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config!r}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config must be a JSON object")
        for key in loaded:
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"unknown config field {key!r}")
        cfg.update(loaded)
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag
    cfg["command"] = args.command
    return cfg


@dataclasses.dataclass
class Experiment:
    """A validated run: the problem, solver settings, and output wiring."""

    cfg: dict
    problem: LossProblem
    reference: object  # callable u* or None
    flow_config: _flow.FlowConfig
    degrees: list | None
    jobs: int
    out: str


def _resolve(cfg: dict) -> Experiment:
    kind = cfg["problem"]
    oracle = cfg["oracle"]
    d = cfg["d"]
    reference = data = boundary = None
    manifold = None
    if kind in (RECONSTRUCTION, POISSON):
        if oracle is None:
            raise ConfigError(f"--oracle is required for {kind} problems")
        u, f, g = manufactured_poisson(oracle)
        if d is None:
            d = poisson_dim(oracle)
        elif d != poisson_dim(oracle):
            raise ConfigError(f"oracle {oracle!r} lives in d={poisson_dim(oracle)}")
        reference = u
        data = u if kind == RECONSTRUCTION else f
        boundary = None if kind == RECONSTRUCTION else g
    else:
        if cfg["manifold"] is None:
            raise ConfigError("--manifold is required for eikonal problems")
        if d is None:
            raise ConfigError("--d is required for eikonal problems")
        manifold = parse_manifold(cfg["manifold"], d)
        reference = distance_field(manifold)
    degrees = _parse_degrees(cfg["degrees"]) if cfg["degrees"] is not None else None
    step = _parse_step(str(cfg["step"]))
    flow_config = _flow.FlowConfig(
        step=step,
        max_iters=int(cfg["max_iters"]),
        grad_tol=float(cfg["grad_tol"]),
        seed=int(cfg["seed"]),
        record_every=1,
    )
    problem = LossProblem(
        kind=kind,
        degree=int(cfg["n"]),
        dim=int(d),
        sobolev_order=int(cfg["sobolev_order"]),
        data=data,
        boundary_data=boundary,
        manifold=manifold,
        boundary_scale=cfg["boundary_scale"],
    )
    jobs = int(cfg["jobs"])
    if jobs < 1:
        raise ConfigError("--jobs must be at least 1")
    return Experiment(
        cfg=cfg, problem=problem, reference=reference,
        flow_config=flow_config, degrees=degrees, jobs=jobs, out=cfg["out"],
    )


def _h1_error(problem: LossProblem, theta: np.ndarray, reference, order: int = 1) -> float:
    fine_n = max(2 * problem.degree, problem.degree + 8)
    fine_grid = tensor_grid(fine_n, problem.dim)
    op = sobolev_weight_matrix(fine_grid, order)
    V = vandermonde(problem.basis, multi_index_set(problem.degree, problem.dim),
                    fine_grid.nodes, grid=tensor_grid(problem.degree, problem.dim)).matrix
    diff = V @ theta - np.asarray(reference(fine_grid.nodes)).reshape(-1)
    return math.sqrt(sobolev_norm_sq(diff, op))


def _write_trace(exp: Experiment, trace: _flow.FlowTrace) -> None:
    rows = []
    for i, j in enumerate(trace.iterations):
        err = trace.errors[i] if i < len(trace.errors) else float("nan")
        rows.append([j, trace.losses[i], trace.grad_norms[i], err])
    _atomic_write(
        os.path.join(exp.out, "trace.csv"),
        _csv(["j", "loss", "grad_norm", "err_ref"], rows),
    )


def _cmd_solve(exp: Experiment) -> int:
    problem = exp.problem
    status = None
    if problem.kind == EIKONAL:
        theta0 = _flow.eikonal_initial_guess(problem, init="oracle")
        err_fn = (lambda th: _h1_error(problem, th, exp.reference)) if exp.reference else None
        theta, trace = _flow.subgradient_flow(problem, theta0, exp.flow_config, error_fn=err_fn)
        _write_trace(exp, trace)
        status = trace.status
    else:
        theta = _flow.direct_solve(problem)
    err = _h1_error(problem, theta, exp.reference) if exp.reference else float("nan")
    loss = evaluate_loss(problem, theta).value
    print(f"solved {problem.kind} n={problem.degree} d={problem.dim} "
          f"h1_err={err:.6e} loss={loss:.6e}")
    return EXIT_NUMERIC if status == "diverged" else EXIT_OK


def _cmd_reconstruct(exp: Experiment) -> int:
    problem = dataclasses.replace(exp.problem, kind=RECONSTRUCTION, boundary_data=None)
    theta = _flow.direct_solve(problem)
    err = _h1_error(problem, theta, exp.reference, order=problem.sobolev_order)
    loss = evaluate_loss(problem, theta).value
    print(f"reconstructed {exp.cfg['oracle']} n={problem.degree} "
          f"h{problem.sobolev_order}_err={err:.6e} loss={loss:.6e}")
    return EXIT_OK


def _solve_degrees(exp: Experiment) -> dict:
    """Solve every sweep degree, fanning out to a bounded worker pool."""
    cfg = dataclasses.replace(exp.flow_config, record_every=max(1, exp.flow_config.max_iters // 10))

    def work(n):
        return n, analysis.solve_at_degree(exp.problem, n, cfg)[0]

    if exp.jobs == 1:
        return dict(work(n) for n in exp.degrees)
    with ThreadPoolExecutor(max_workers=exp.jobs) as pool:
        return dict(pool.map(work, exp.degrees))


def _sweep_rows(data: list, meta: list) -> list[list]:
    err_by_n = {int(n): float(e) for n, e in data}
    rows = []
    for info in meta:
        n = info["n"]
        rows.append([n, err_by_n.get(n, float("nan")), info["loss"], info["iters"]])
    return rows


def _cmd_sweep(exp: Experiment) -> int:
    if exp.degrees is None:
        raise ConfigError("--degrees is required for sweep")
    solutions = _solve_degrees(exp)
    data, solutions, meta = analysis.sweep_errors(
        exp.problem, exp.degrees, config=exp.flow_config,
        reference=exp.reference, solutions=solutions,
    )
    _atomic_write(
        os.path.join(exp.out, "sweep.csv"),
        _csv(["n", "err", "loss_final", "iters"], _sweep_rows(data, meta)),
    )
    print(f"sweep {exp.problem.kind} degrees={exp.degrees} final_err={data[-1][1]:.6e}")
    return EXIT_OK


def _cmd_classify(exp: Experiment) -> int:
    if exp.degrees is None:
        raise ConfigError("--degrees is required for classify")
    solutions = _solve_degrees(exp)
    report = analysis.classify(
        exp.problem, exp.degrees, config=exp.flow_config,
        reference=exp.reference, solutions=solutions,
    )
    echo = {k: exp.cfg.get(k) for k in _CONFIG_KEYS}
    echo["command"] = exp.cfg["command"]
    payload = report.to_dict()
    payload["config_echo"] = echo
    _atomic_write(
        os.path.join(exp.out, "report.json"), json.dumps(payload, indent=2) + "\n"
    )
    data, _, meta = analysis.sweep_errors(
        exp.problem, exp.degrees, config=exp.flow_config,
        reference=exp.reference, solutions=solutions,
    )
    _atomic_write(
        os.path.join(exp.out, "sweep.csv"),
        _csv(["n", "err", "loss_final", "iters"], _sweep_rows(data, meta)),
    )
    color = {"PolynomialTime": "32", "BlowupCandidate": "31"}.get(report.classification, "33")
    print(_color(report.classification, color))
    return EXIT_OK


def _cmd_check(exp: Experiment) -> int:
    problem = exp.problem
    rng = np.random.default_rng(exp.flow_config.seed)
    worst = 0.0
    checked = 0
    while checked < 5:
        theta = rng.standard_normal(problem.n_params)
        result = analysis.check_gradient(problem, theta)
        if result.kink:
            continue
        checked += 1
        worst = max(worst, result.max_rel_error)
    print(f"gradient check {problem.kind} n={problem.degree}: max_rel_err={worst:.3e}")
    return EXIT_OK if worst <= 1e-6 else EXIT_NUMERIC


_COMMANDS = {
    "solve": _cmd_solve,
    "reconstruct": _cmd_reconstruct,
    "sweep": _cmd_sweep,
    "classify": _cmd_classify,
    "check": _cmd_check,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _merge_config(args)
        exp = _resolve(cfg)
    except (ConfigError,) + _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return _COMMANDS[args.command](exp)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERIC_ERRORS as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
