"""Experiment driver.

Subcommands: ``mesh`` (generate and save a triangulation), ``spectrum``
(tabulate the closed-form energy spectrum), ``mms`` (convergence-rate
tables), and ``run`` (time integration driven by a flat key = value config
file, emitting per-step diagnostics).

Exit codes: 0 success, 1 usage/configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction

import numpy as np

from . import mms as mms_mod
from . import spectrum as spectrum_mod
from .fem import build_dof_map
from .mesh import MeshError, build_rectangle_mesh, save_mesh
from .nonlocal_assembly import FractionalParams
from .solvers import SolverError
from .timestepping import (
    SchemeConfig,
    State,
    build_operators,
    run as run_scheme,
    write_diagnostics_csv,
)

ALPHA_NEAR_THIRD = np.nextafter(1.0 / 3.0, 1.0)  # FEM alpha for --alpha-third


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


# -- run config --------------------------------------------------------------

_RUN_DEFAULTS = {
    "scheme": "coupled",
    "n": 8,
    "lambda": 1.0,
    "alpha": 0.5,
    "gamma": 1.0,
    "nu": 1.0,
    "dt": 0.1,
    "t_final": 0.5,
    "forcing": "none",
    "initial": "zero",
    "seed": 0,
    "pair_quadrature_degree": 3,
    "diagonal_refinement_levels": 4,
}
_RUN_TYPES = {k: type(v) for k, v in _RUN_DEFAULTS.items()}


def parse_config(text: str) -> dict:
    """Parse the flat key = value format; unknown keys are rejected."""
    cfg = dict(_RUN_DEFAULTS)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise _UsageError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _RUN_DEFAULTS:
            raise _UsageError(f"config line {lineno}: unknown key {key!r}")
        typ = _RUN_TYPES[key]
        try:
            cfg[key] = typ(value) if typ is not str else value
        except ValueError:
            raise _UsageError(f"config line {lineno}: bad {typ.__name__} value {value!r}") from None
    return cfg


def dump_config(cfg: dict) -> str:
    return "".join(f"{k} = {cfg[k]}\n" for k in _RUN_DEFAULTS)


def _build_run(cfg: dict):
    params = FractionalParams(
        alpha=cfg["alpha"],
        gamma=cfg["gamma"],
        lam=cfg["lambda"],
        pair_quadrature_degree=cfg["pair_quadrature_degree"],
        diagonal_refinement_levels=cfg["diagonal_refinement_levels"],
    )
    mesh = build_rectangle_mesh(cfg["n"], cfg["lambda"])
    dofmap = build_dof_map(mesh)
    ops = build_operators(mesh, params, dofmap)

    if cfg["forcing"] == "mms":
        config = mms_mod.mms_config(cfg["scheme"], cfg["dt"], cfg["t_final"], cfg["nu"], params, ops)
    elif cfg["forcing"] == "none":
        config = SchemeConfig(
            scheme=cfg["scheme"],
            dt=cfg["dt"],
            t_final=cfg["t_final"],
            nu=cfg["nu"],
            fractional=params,
        )
    else:
        raise _UsageError(f"forcing must be 'none' or 'mms', got {cfg['forcing']!r}")

    n_u = dofmap.n_u
    if cfg["initial"] == "zero":
        ux = np.zeros(n_u)
        uy = np.zeros(n_u)
    elif cfg["initial"] == "mms":
        ux, uy = mms_mod.exact_interpolants(0.0, dofmap)
    elif cfg["initial"] == "random":
        rng = np.random.default_rng(cfg["seed"])
        ux = np.zeros(n_u)
        uy = np.zeros(n_u)
        ux[dofmap.interior] = rng.standard_normal(dofmap.interior.size)
        uy[dofmap.interior] = rng.standard_normal(dofmap.interior.size)
    else:
        raise _UsageError(f"initial must be 'zero', 'mms', or 'random', got {cfg['initial']!r}")
    initial = State(0.0, ux, uy, np.zeros(dofmap.n_p))
    return config, mesh, initial, ops


def _parse_h_list(text: str) -> list[float]:
    out = []
    for part in text.split(","):
        try:
            out.append(float(Fraction(part.strip())))
        except (ValueError, ZeroDivisionError):
            raise _UsageError(f"bad h value {part!r}; use fractions like 1/8") from None
    return out


def _cap_threads(n: int) -> None:
    # assembly is single-threaded by design; this caps BLAS pools when the
    # optional threadpoolctl is present, and is a no-op otherwise
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(limits=n)
    except ImportError:
        pass


def build_parser() -> _Parser:
    parser = _Parser(prog="fraclap", description=__doc__)
    parser.add_argument("--threads", type=int, default=0, help="cap BLAS worker threads")
    sub = parser.add_subparsers(dest="command", required=True)

    p_mesh = sub.add_parser("mesh", help="generate a triangulation")
    p_mesh.add_argument("--n", type=int, required=True)
    p_mesh.add_argument("--lambda", dest="lam", type=float, required=True)
    p_mesh.add_argument("--out", required=True)

    p_spec = sub.add_parser("spectrum", help="tabulate the energy spectrum")
    group = p_spec.add_mutually_exclusive_group(required=True)
    group.add_argument("--alpha", type=float)
    group.add_argument("--alpha-third", action="store_true")
    p_spec.add_argument("--gamma", type=float, required=True)
    p_spec.add_argument("--nu", type=float, required=True)
    p_spec.add_argument("--U", type=float, required=True)
    p_spec.add_argument("--ck", type=float, default=spectrum_mod.DEFAULT_KOLMOGOROV_CONSTANT)
    p_spec.add_argument("--kmin", type=float, default=1.0)
    p_spec.add_argument("--kmax", type=float, required=True)
    p_spec.add_argument("--points", type=int, default=100)
    p_spec.add_argument("--out", required=True)

    p_mms = sub.add_parser("mms", help="manufactured-solution rate tables")
    p_mms.add_argument("--dt-mode", choices=["h", "h2"], required=True)
    p_mms.add_argument("--h", required=True, help="comma list, e.g. 1/4,1/8,1/16")
    p_mms.add_argument("--alpha", type=float, default=0.5)
    p_mms.add_argument("--gamma", type=float, default=1.0)
    p_mms.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p_mms.add_argument("--nu", type=float, default=1.0)
    p_mms.add_argument("--scheme", choices=["coupled", "modular"], default="coupled")
    p_mms.add_argument("--out", required=True)

    p_run = sub.add_parser("run", help="time integration from a config file")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--out", required=True)
    p_run.add_argument("--dump-config", default=None)
    return parser


def cli_main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    try:
        if args.threads:
            _cap_threads(args.threads)
        if args.command == "mesh":
            mesh = build_rectangle_mesh(args.n, args.lam)
            save_mesh(mesh, args.out)
        elif args.command == "spectrum":
            params = spectrum_mod.make_params(
                alpha=1.0 / 3.0 if args.alpha_third else args.alpha,
                gamma=args.gamma,
                nu=args.nu,
                U=args.U,
                c_k=args.ck,
                alpha_is_third=args.alpha_third,
            )
            if args.kmin < 1.0 or args.kmax <= args.kmin or args.points < 2:
                raise _UsageError("need 1 <= kmin < kmax and at least two points")
            k = np.geomspace(args.kmin, args.kmax, args.points)
            k[0] = args.kmin
            e = spectrum_mod.energy_spectrum(k, params)
            with open(args.out, "w") as f:
                f.write("k,E\n")
                for ki, ei in zip(k, e):
                    f.write(f"{ki:.17g},{ei:.17g}\n")
        elif args.command == "mms":
            report = mms_mod.convergence_study(
                _parse_h_list(args.h),
                dt_mode=args.dt_mode,
                scheme=args.scheme,
                alpha=args.alpha,
                gamma=args.gamma,
                lam=args.lam,
                nu=args.nu,
            )
            with open(args.out, "w") as f:
                f.write(report.to_csv())
        elif args.command == "run":
            with open(args.config) as f:
                cfg = parse_config(f.read())
            if args.dump_config:
                with open(args.dump_config, "w") as f:
                    f.write(dump_config(cfg))
            config, mesh, initial, ops = _build_run(cfg)
            trajectory, _ = run_scheme(config, mesh, initial, operators=ops)
            write_diagnostics_csv(args.out, trajectory)
    except (_UsageError, MeshError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (SolverError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(cli_main())
