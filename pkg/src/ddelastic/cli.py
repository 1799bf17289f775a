"""Command-line front end.

Exit codes: 0 success, 1 input error, 2 completed without convergence (or a
failed self-test).
"""
from __future__ import annotations

import argparse
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np

from . import relaxation as rl
from .config import (ConfigError, build_mesh, load_config, load_json_object, parse_stiffness,
                     parse_sym, _get, _number)
from .constraint import residuals
from .dataio import read_state_csv, state_header, states_to_rows, write_csv, write_json, fmt
from .phase import LocalState
from .solver import convergence_study, solve_data_driven, write_fields

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED = 0, 1, 2


def tool_version():
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:  # pragma: no cover - uninstalled checkout
        return "unknown"


def _out_dir(args, cfg_output=None):
    return Path(args.out or cfg_output or ".")


def cmd_solve(args):
    cfg = load_config(args.config, args.seed)
    out = _out_dir(args, cfg.output)
    space = cfg.space()
    start = time.perf_counter()
    result = solve_data_driven(space, cfg.dataset, cfg.solver, threads=args.threads)
    wall = time.perf_counter() - start
    compat, equil = residuals(space, result.z)
    report = {
        "config": cfg.echo(),
        "result": result.summary(),
        "residuals": {"compatibility": compat, "equilibrium": equil},
        "tool": {"name": "ddelastic", "version": tool_version()},
        "seed": cfg.solver.seed,
        "timing": {"wall_seconds": wall},
    }
    write_json(out / "report.json", report)
    write_fields(result, out / "z.csv", out / "y.csv")
    print(f"d2={result.d2:.6e} iterations={result.iterations} converged={result.converged}")
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def cmd_convergence(args):
    cfg = load_config(args.config, args.seed)
    if not cfg.sampling or len(cfg.sampling) < 2:
        raise ConfigError("sampling", "a convergence study needs at least two sampling specs")
    out = _out_dir(args, cfg.output)
    table = convergence_study(cfg.space(), cfg.dataset, cfg.sampling, cfg.solver)
    table.write_csv(out / "convergence.csv")
    write_json(out / "convergence.json", {
        "config": cfg.echo(), "exponent": table.exponent, "rows": table.rows,
        "converged": [r.converged for r in table.results],
        "tool": {"name": "ddelastic", "version": tool_version()}})
    for row in table.rows:
        print(",".join(fmt(row[k]) for k in ("rho", "t", "d2", "error")))
    print(f"fitted exponent {table.exponent:.4f}")
    return EXIT_OK if all(r.converged for r in table.results) else EXIT_NOT_CONVERGED


def _relaxation_from(raw, path=""):
    C = parse_stiffness(_get(raw, "C", path), "C")
    b = parse_sym(_get(raw, "b", path), "b", C.dim)
    if not np.any(b.to_matrix()):
        raise ConfigError("b", "b must be nonzero")
    return rl.TwoWellRelaxation.compute(C, b)


def cmd_relax_analyze(args):
    raw = load_json_object(args.config)
    rx = _relaxation_from(raw)
    out = _out_dir(args, raw.get("output"))
    write_json(out / "analyze.json", rx.to_dict())
    if rx.C.dim == 2:
        rows = [[name, fmt(p[0]), fmt(p[1])] for name, pts in rl.boundary_polyline(rx)
                for p in pts]
        write_csv(out / "boundary.csv", ["segment", "sigma_dot_b", "mu"], rows)
    print(f"alpha_minus={rx.alpha_minus:.12g} alpha_plus={rx.alpha_plus:.12g}")
    return EXIT_OK


def cmd_relax_membership(args):
    raw = load_json_object(args.config)
    file = Path(args.config).parent / _get(raw, "input", "", str)
    if not file.exists():
        raise ConfigError("input", f"file not found: {file}")
    try:
        eps_v, sig_v, _, header = read_state_csv(file)
    except ValueError as exc:
        raise ConfigError("input", str(exc)) from None
    tol = float(raw.get("tol", 1e-9))
    if "flag" in raw:
        flag = raw["flag"]
        C, s0 = _number(flag, "C", "flag"), _number(flag, "sigma0", "flag")
        if eps_v.shape[1] != 1:
            raise ConfigError("input", "flag membership needs one-dimensional states")
        codes = rl.flag_membership_many(C, s0, eps_v[:, 0], sig_v[:, 0], tol)
        labels = [list(rl.FlagMembership)[c].value for c in codes]
    else:
        rx = _relaxation_from(raw)
        if eps_v.shape[1] != rx.C.size:
            raise ConfigError("input", "state dimension does not match C")
        labels = [rl.membership_relaxed_nd(rx, LocalState.from_voigt(e, s), tol).value
                  for e, s in zip(eps_v, sig_v)]
    out = _out_dir(args, raw.get("output"))
    rows = states_to_rows(eps_v, sig_v)
    dim = {1: 1, 3: 2, 6: 3}[eps_v.shape[1]]
    write_csv(out / "membership.csv", state_header(dim) + ["classification"],
              [[fmt(v) for v in row] + [lab] for row, lab in zip(rows, labels)])
    counts = {lab: labels.count(lab) for lab in sorted(set(labels))}
    print(" ".join(f"{k}={v}" for k, v in counts.items()))
    return EXIT_OK


def cmd_relax_laminate(args):
    raw = load_json_object(args.config)
    rx = _relaxation_from(raw)
    zraw = _get(raw, "z", "")
    z = LocalState(parse_sym(_get(zraw, "eps", "z"), "z.eps", rx.C.dim),
                   parse_sym(_get(zraw, "sig", "z"), "z.sig", rx.C.dim))
    try:
        dec = rl.rank_one_decompose(rx, z)
    except ValueError as exc:
        raise ConfigError("z", str(exc)) from None
    mesh = build_mesh(_get(raw, "problem", ""), Path(args.config).parent)
    if mesh.dim != rx.C.dim:
        raise ConfigError("problem", "mesh dimension does not match C")
    hs = _get(raw, "h", "", list)
    out = _out_dir(args, raw.get("output"))
    errors = {}
    for h in hs:
        if not isinstance(h, int) or h < 1:
            raise ConfigError("h", "entries must be positive integers")
        fld = rl.generate_laminate_field(mesh, dec, h)
        errors[str(h)] = rl.laminate_mean_error(mesh, fld, z, dec.nu)
        rows = states_to_rows(fld.eps, fld.sig)
        write_csv(out / f"laminate_h{h}.csv", ["element"] + state_header(mesh.dim),
                  [[i] + [fmt(v) for v in row] for i, row in enumerate(rows)])
    write_json(out / "laminate.json", {
        "lambda": dec.lam, "nu": dec.nu.tolist(), "c": dec.c.tolist(),
        "z_minus": [v.tolist() for v in dec.z_minus.voigt()],
        "z_plus": [v.tolist() for v in dec.z_plus.voigt()],
        "residuals": list(dec.residuals()), "mean_error": errors})
    print(" ".join(f"h={h}:{e:.4e}" for h, e in errors.items()))
    return EXIT_OK


def cmd_relax_envelope(args):
    raw = load_json_object(args.config)
    env = rl.convex_envelope_1d(_number(raw, "C", ""), _number(raw, "sigma0", ""))
    out = _out_dir(args, raw.get("output"))
    s = 3.0 * max(env.sigma0 / env.C, 1e-3)
    grid = np.linspace(-s, s, 121)
    write_csv(out / "envelope.csv", ["eps", "W", "W_envelope"],
              [[fmt(e), fmt(w), fmt(v)] for e, w, v in
               zip(grid, env.W(grid), env.W_envelope(grid))])
    eps_w, sig_w = env.witness()
    info = env.to_dict()
    info["witness_in_flag"] = bool(rl.flag_membership_many(env.C, env.sigma0, eps_w, sig_w) < 2)
    info["witness_in_envelope_set"] = bool(env.in_envelope_set(eps_w, sig_w))
    write_json(out / "envelope.json", info)
    print(f"W_envelope(0)={info['W_envelope_at_0']}")
    return EXIT_OK


def cmd_selftest(args):
    from .acceptance import run_all

    results = run_all(report=print)
    return EXIT_OK if all(r.passed for r in results) else EXIT_NOT_CONVERGED


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment JSON file")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--seed", type=int, help="solver seed (overrides the config)")
    common.add_argument("--threads", type=int, default=1, help="threads for multi-start runs")

    parser = argparse.ArgumentParser(prog="ddelastic", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common]).set_defaults(func=cmd_solve, needs_config=True)
    sub.add_parser("convergence", parents=[common]).set_defaults(func=cmd_convergence,
                                                                needs_config=True)
    relax = sub.add_parser("relax").add_subparsers(dest="relax_command", required=True)
    for name, fn in (("analyze", cmd_relax_analyze), ("membership", cmd_relax_membership),
                     ("laminate", cmd_relax_laminate), ("envelope", cmd_relax_envelope)):
        relax.add_parser(name, parents=[common]).set_defaults(func=fn, needs_config=True)
    sub.add_parser("selftest", parents=[common]).set_defaults(func=cmd_selftest,
                                                             needs_config=False)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    if args.needs_config and not args.config:
        print("error: --config is required", file=sys.stderr)
        return EXIT_INPUT
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
