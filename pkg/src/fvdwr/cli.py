"""Command line: ``fvdwr run``, ``fvdwr verify`` and ``fvdwr mesh``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 validation failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import (
    ConfigError,
    FieldMismatch,
    FVDWRError,
    MeshFormatError,
    MeshOrientationError,
    MeshTopologyError,
    NotSelfCentered,
    NumericalFailure,
    VoronoiInvalidated,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_VALIDATION = 4

VALIDATION_ERRORS = (
    NotSelfCentered,
    VoronoiInvalidated,
    MeshFormatError,
    MeshTopologyError,
    MeshOrientationError,
    FieldMismatch,
)

# convenience flags -> config keys; flags override the file
FLAG_KEYS = {
    "problem": "problem.name",
    "goal": "goal.name",
    "dual": "discretization.dual",
    "scheme": "discretization.scheme",
    "mode": "study.mode",
    "levels": "study.levels",
    "n": "mesh.n",
    "mesh_file": "mesh.file",
    "output": "output.dir",
    "seed": "verify.seed",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _overrides(args):
    out = {}
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError("expected section.key=value", item)
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    for flag, key in FLAG_KEYS.items():
        value = getattr(args, flag, None)
        if value is not None:
            out[key] = str(value)
    if getattr(args, "no_plots", False):
        out["output.plots"] = "false"
    return out


def _load(args):
    from .config import parse_config

    overrides = _overrides(args)
    if args.config is None and "problem.name" not in overrides:
        overrides["problem.name"] = "p1_poisson"
    return parse_config(args.config, overrides)


def cmd_run(args):
    from .study import format_checks, run_adaptive_study, run_convergence_study, run_verify

    cfg = _load(args)
    out = Path(cfg.sections["output"]["dir"])
    mode = cfg.sections["study"]["mode"]
    if mode == "verify":
        return _report_checks(run_verify(cfg), out, format_checks)
    if mode == "adaptive":
        from .output import ADAPTIVE_COLUMNS

        result = run_adaptive_study(cfg, out)
        print(result.table(ADAPTIVE_COLUMNS))
        print(f"status: {result.status}")
    else:
        result = run_convergence_study(cfg, out)
        print(result.table())
    print(f"wrote {len(result.files)} files to {out}")
    return EXIT_OK


def _report_checks(checks, out, format_checks):
    from .output import write_text

    text = format_checks(checks)
    print(text, end="")
    if out is not None:
        write_text(out / "verify.txt", text)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_VALIDATION


def cmd_verify(args):
    from .study import format_checks, run_verify

    cfg = _load(args)
    out = Path(args.output) if args.output else None
    return _report_checks(run_verify(cfg), out, format_checks)


def cmd_mesh(args):
    from .dual import build_dual_diagram
    from .mesh import read_mesh, unit_square_mesh, validate_primary_mesh, write_mesh
    from .output import write_dual_polygons, write_vtk

    if args.file:
        mesh = read_mesh(args.file)
    else:
        if args.n is None or args.n < 1:
            raise ConfigError("give a mesh file or --n >= 1", "mesh.n")
        mesh = unit_square_mesh(args.n)
    rep = validate_primary_mesh(mesh, args.dual)
    print(f"vertices       {mesh.n_vertices}")
    print(f"elements       {mesh.n_elements}")
    print(f"boundary       {len(mesh.boundary_vertices)}")
    print(f"h              {mesh.h:.6e}")
    print(f"self-centered  {rep.all_self_centered}")
    print(f"delaunay       {rep.delaunay}")
    print(f"shape ratio    {rep.min_shape_ratio:.6e}")
    print(f"valid ({args.dual}) {rep.ok}")
    if args.write:
        write_mesh(mesh, args.write)
    if args.vtk:
        write_vtk(args.vtk, mesh)
    if not rep.ok:
        if rep.offending_element is not None:
            print(f"offending element {rep.offending_element}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.dump_dual:
        write_dual_polygons(args.dump_dual, build_dual_diagram(mesh, args.dual))
    return EXIT_OK


def build_parser():
    p = _Parser(prog="fvdwr", description="Node-centered finite volumes with goal-oriented error estimation.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("config", nargs="?", help="INI run configuration")
        sp.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE", help="override a config entry")
        sp.add_argument("--problem")
        sp.add_argument("--goal")
        sp.add_argument("--dual", choices=("voronoi", "donald"))
        sp.add_argument("--scheme")
        sp.add_argument("--output", "-o")

    run = sub.add_parser("run", help="convergence study or adaptive run")
    common(run)
    run.add_argument("--mode", choices=("uniform", "adaptive", "verify"))
    run.add_argument("--levels", type=int)
    run.add_argument("--n", type=int)
    run.add_argument("--mesh-file", dest="mesh_file")
    run.add_argument("--no-plots", action="store_true")
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify", help="invariant suite; exit 4 on any failure")
    common(ver)
    ver.add_argument("--seed", type=int)
    ver.set_defaults(func=cmd_verify)

    mesh = sub.add_parser("mesh", help="generate or inspect a primary mesh")
    mesh.add_argument("file", nargs="?", help="mesh file to inspect")
    mesh.add_argument("--n", type=int, help="unit-square mesh with n x n cells")
    mesh.add_argument("--dual", choices=("voronoi", "donald"), default="voronoi")
    mesh.add_argument("--write", help="save the mesh in the text mesh format")
    mesh.add_argument("--vtk", help="save the mesh as legacy VTK")
    mesh.add_argument("--dump-dual", dest="dump_dual", help="save the control volumes as legacy VTK")
    mesh.set_defaults(func=cmd_mesh)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except VALIDATION_ERRORS as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except FVDWRError as exc:
        from .output import OutputError

        if isinstance(exc, OutputError):
            print(f"output error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
