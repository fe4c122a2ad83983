"""Batch front door: parse inputs, run the solvers, emit JSON reports.

Exit codes: 0 success, 2 parse failure (bad files or literals), 3 domain
failure (violated preconditions, inadmissible meshes), 4 numerical blow-up.
Every report embeds the fully resolved configuration, so a report plus the
input files reproduces the run exactly.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import fields, lie, paths, solve, tensor
from .errors import BlowUpError, DomainError, ParseError

#: hard ceiling on signature degree accepted by the CLI (d**degree coefficients)
DEGREE_CAP = 5


def _load_field(filename: str) -> fields.PolynomialVectorField:
    try:
        with open(filename, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ParseError(f"{filename}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{filename}: invalid JSON: {exc}") from None
    try:
        return fields.PolynomialVectorField.from_json_dict(obj)
    except (KeyError, TypeError) as exc:
        raise ParseError(f"{filename}: missing or malformed field entry: {exc}") from None


def _parse_builtin_driver(spec: str, segments: int) -> paths.LiftedPath:
    name, _, param = spec.partition(":")
    if name == "pure-area":
        try:
            c = float(param) if param else 1.0
        except ValueError:
            raise ParseError(f"bad pure-area rate {param!r}") from None
        return paths.pure_area_driver(c, np.linspace(0.0, 1.0, segments + 1))
    raise ParseError(f"unknown builtin driver {spec!r} (try pure-area:<rate>)")


def _check_degree(degree: int) -> int:
    if degree < 1:
        raise DomainError("degree must be >= 1")
    if degree > DEGREE_CAP:
        raise DomainError(f"degree cap exceeded: {degree} > {DEGREE_CAP}")
    return degree


def _load_driver(args, degree: int) -> paths.LiftedPath:
    if args.builtin_driver and args.path:
        raise DomainError("give either --path or --builtin-driver, not both")
    if args.builtin_driver:
        if degree != 2:
            raise DomainError("builtin drivers are degree-2 signals")
        return _parse_builtin_driver(args.builtin_driver, args.mesh or 64)
    if not args.path:
        raise DomainError("need --path or --builtin-driver")
    return paths.lift_piecewise_linear(paths.SamplePath.from_csv(args.path), degree)


def _parse_z0(text: str | None, e: int) -> np.ndarray:
    if text is None:
        return np.zeros(e)
    try:
        z0 = np.asarray([float(c) for c in text.split(",")], dtype=np.float64)
    except ValueError:
        raise ParseError(f"bad initial state {text!r}") from None
    if z0.shape != (e,):
        raise DomainError(f"initial state needs {e} components, got {len(z0)}")
    return z0


def _emit(args, payload: dict) -> None:
    blob = json.dumps(payload, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(blob + "\n")
    else:
        sys.stdout.write(blob + "\n")


def _base_config(args, **extra) -> dict:
    cfg = {"command": args.command, "seed": args.seed}
    for key in ("path", "field", "out", "builtin_driver"):
        cfg[key] = getattr(args, key, None)
    cfg.update(extra)
    return cfg


def _cmd_sig(args) -> dict:
    degree = _check_degree(args.degree)
    x = _load_driver(args, degree)
    full = x.increment(float(x.times[0]), float(x.times[-1]))
    return {
        "config": _base_config(args, degree=degree),
        "signature": full.to_json_dict(),
    }


def _cmd_logsig(args) -> dict:
    degree = _check_degree(args.degree)
    x = _load_driver(args, degree)
    full = x.increment(float(x.times[0]), float(x.times[-1]))
    logsig = tensor.log(full)
    diag = lie.is_lie(logsig, tol=1e-9)
    return {
        "config": _base_config(args, degree=degree),
        "log_signature": logsig.to_json_dict(),
        "lie_diagnostic": diag.to_json_dict(),
    }


def _cmd_pvar(args) -> dict:
    degree = _check_degree(paths.roughness_degree(args.p))
    x = _load_driver(args, degree)
    value = paths.p_variation(x, args.p, float(x.times[0]), float(x.times[-1]))
    return {
        "config": _base_config(args, p=args.p, degree=degree),
        "p_variation": value,
    }


def _solver_setup(args):
    f = _load_field(args.field)
    cfg = solve.SolverConfig(
        p=args.p,
        gamma=args.gamma if args.gamma is not None else f.gamma,
        degree=args.degree or 0,
        substeps=args.substeps,
        mesh=args.mesh,
        alpha=args.alpha,
    )
    x = _load_driver(args, cfg.degree)
    z0 = _parse_z0(args.z0, f.e)
    control = None
    if args.alpha is not None or args.command == "converge":
        # box radius calibrated by a pilot solve; the value is an estimate
        f_norm = solve.pilot_lip_estimate(f, x, z0, cfg).value
        control = paths.control_from(x, f_norm, cfg.p)
    return f, x, z0, cfg, control


def _cmd_solve(args) -> dict:
    f, x, z0, cfg, control = _solver_setup(args)
    traj = solve.solve(f, x, z0, cfg, control=control)
    return {
        "config": _base_config(args, z0=z0.tolist(), **cfg.to_json_dict()),
        "mesh": traj.times.tolist(),
        "trajectory": traj.to_json_dict(),
    }


def _cmd_converge(args) -> dict:
    f, x, z0, cfg, control = _solver_setup(args)
    if cfg.alpha is not None:
        raise DomainError("converge needs uniform meshes; drop --alpha")
    base = cfg.mesh if isinstance(cfg.mesh, int) else 8
    ladder = [base * 2**i for i in range(5)]
    report = solve.global_convergence_study(f, x, z0, cfg, ladder, control)
    out = report.to_json_dict()
    out["config"] = _base_config(args, z0=z0.tolist(), **cfg.to_json_dict())
    return out


_HANDLERS = {
    "sig": _cmd_sig,
    "logsig": _cmd_logsig,
    "pvar": _cmd_pvar,
    "solve": _cmd_solve,
    "converge": _cmd_converge,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="logode",
        description="signatures, p-variation and log-ODE solves with JSON reports",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp, with_field=False):
        sp.add_argument("--path", help="driver samples as CSV (header t,x1,...,xd)")
        sp.add_argument(
            "--builtin-driver",
            help="synthetic driver instead of a CSV, e.g. pure-area:0.5",
        )
        sp.add_argument("--out", help="write the JSON report here instead of stdout")
        sp.add_argument("--seed", type=int, default=0, help="seed echoed into the report")
        if with_field:
            sp.add_argument("--field", required=True, help="vector-field JSON file")
            sp.add_argument("--p", type=float, required=True, help="roughness scale")
            sp.add_argument("--gamma", type=float, help="field smoothness (default: from file)")
            sp.add_argument("--degree", type=int, default=0, help="truncation degree (default floor(p))")
            sp.add_argument("--mesh", type=int, help="uniform solver steps")
            sp.add_argument("--alpha", type=float, help="adaptive step budget in (0, 1]")
            sp.add_argument("--substeps", type=int, default=32, help="RK4 substeps per unit step")
            sp.add_argument("--z0", help="initial state, comma separated")

    sp = sub.add_parser("sig", help="full-interval signature of a driver")
    add_common(sp)
    sp.add_argument("--degree", type=int, default=2, help="truncation degree (cap %d)" % DEGREE_CAP)

    sp = sub.add_parser("logsig", help="log-signature plus Lie residuals")
    add_common(sp)
    sp.add_argument("--degree", type=int, default=2, help="truncation degree (cap %d)" % DEGREE_CAP)

    sp = sub.add_parser("pvar", help="p-variation of the lifted driver")
    add_common(sp)
    sp.add_argument("--p", type=float, required=True, help="variation exponent")

    sp = sub.add_parser("solve", help="log-ODE solve, JSON trajectory report")
    add_common(sp, with_field=True)

    sp = sub.add_parser("converge", help="global convergence study over a mesh ladder")
    add_common(sp, with_field=True)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        payload = _HANDLERS[args.command](args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return 3
    except BlowUpError as exc:
        print(f"blow-up: {exc}", file=sys.stderr)
        return 4
    _emit(args, payload)
    return 0


if __name__ == "__main__":
    sys.exit(main())
