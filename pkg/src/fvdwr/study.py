"""Uniform convergence studies, adaptive runs and the invariant (verify) suite."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .adaptivity import run_adaptive_loop
from .assembly import DiscreteSystem, field_norms, h1_seminorm, lumped_norm, v_norm
from .config import adaptive_options, build_objects, run_settings
from .dual import VORONOI, build_dual_diagram
from .errors import ConfigError, NotSelfCentered
from .estimator import compute_nc_indicators, dual_orthogonality, estimate_eta_nc_identity
from .fields import FunctionField, P1Field, interpolate
from .mesh import read_mesh, refine_mesh, unit_square_mesh, validate_primary_mesh
from .newton import solve_primal
from .output import (
    ADAPTIVE_COLUMNS,
    STUDY_COLUMNS,
    format_report,
    format_table,
    write_csv,
    write_dual_polygons,
    write_fields,
    write_text,
)
from .pipeline import solve_and_estimate
from .problems import get_problem
from .quadrature import element_rule
from .recovery import solve_dual
from .schemes import SCHEME_NAMES, UpwindScheme, check_k_relation, verify_scheme_properties

log = logging.getLogger(__name__)

ERROR_DEGREE = 8


def eoc(prev, cur, h_prev, h_cur):
    """log(e_prev / e_cur) / log(h_prev / h_cur); None when undefined."""
    if prev is None or cur is None:
        return None
    a, b = abs(prev), abs(cur)
    if a == 0 or b == 0 or h_prev == h_cur:
        return None
    return math.log(a / b) / math.log(h_prev / h_cur)


def level_mesh(cfg, level):
    """Mesh of a uniform study level: generator n * 2^level, or a file refined 2*level times."""
    m = cfg.sections["mesh"]
    if m["file"]:
        mesh = read_mesh(m["file"])
        for _ in range(2 * level):
            mesh = refine_mesh(mesh, range(mesh.n_elements))
        return mesh, None
    n = m["n"] * 2**level
    return unit_square_mesh(n), n


def check_mesh(mesh, kind):
    """Raise NotSelfCentered when a Voronoi diagram is requested on an unsuitable mesh."""
    if kind != VORONOI:
        return
    rep = validate_primary_mesh(mesh, VORONOI)
    if not rep.all_self_centered:
        raise NotSelfCentered(rep.offending_element)
    if not rep.delaunay:
        a, b = rep.delaunay_violations[0]
        raise NotSelfCentered(-1, f"mesh is not Delaunay across edge ({a}, {b})")


def discretization_errors(problem, mesh, diagram, u):
    """(||Iu - u_T||_V, ||u - u_T||_0) against the manufactured solution."""
    if problem.exact is None:
        return None, None
    iu = interpolate(mesh, problem.exact)
    ev = v_norm(diagram, iu - u)
    rule = element_rule(mesh, ERROR_DEGREE)
    l2, _ = field_norms(mesh, rule, FunctionField(problem.exact, problem.exact_gradient) - P1Field(u))
    return ev, l2


@dataclass
class StudyResult:
    rows: list
    cycles: list
    files: list = field(default_factory=list)
    status: str = "ok"

    def table(self, columns=STUDY_COLUMNS):
        return format_table(columns, self.rows)


def _level_row(level, n, res, problem):
    rep = res.report
    ev, el2 = discretization_errors(problem, res.mesh, res.diagram, res.u)
    return {
        "level": level,
        "n": n,
        "h": res.mesh.h,
        "dofs": res.system.n_dofs,
        "err_V": ev,
        "err_L2": el2,
        "j_error": rep.true_error,
        "eta_T": rep.eta_T,
        "eta_m": rep.eta_m,
        "eta_nc": rep.eta_nc,
        "sum_eta_l": rep.sum_eta_l,
        "effectivity": rep.effectivity,
        "newton_iterations": res.newton.iterations,
    }


def add_eoc(rows):
    pairs = (("eoc_V", "err_V"), ("eoc_L2", "err_L2"), ("eoc_j", "j_error"), ("eoc_sum_eta_l", "sum_eta_l"))
    for k, row in enumerate(rows):
        for col, src in pairs:
            row[col] = None if k == 0 else eoc(rows[k - 1][src], row[src], rows[k - 1]["h"], row["h"])
    return rows


def run_convergence_study(cfg, out_dir=None, plots=None):
    """Solve and estimate on every uniform level; writes CSV, report, VTK and figures if ``out_dir``."""
    problem, goal = build_objects(cfg)
    settings = run_settings(cfg)
    rows, cycles = [], []
    for level in range(cfg.sections["study"]["levels"]):
        mesh, n = level_mesh(cfg, level)
        check_mesh(mesh, settings.dual_kind)
        res = solve_and_estimate(problem, goal, mesh, settings)
        rows.append(_level_row(level, n, res, problem))
        cycles.append(res)
        log.info("level %d: %d dofs, total estimate %.3e", level, res.system.n_dofs, res.report.total_estimate)
    add_eoc(rows)
    result = StudyResult(rows, cycles)
    if out_dir is not None:
        result.files = _write_study(cfg, result, Path(out_dir), plots)
    return result


def _write_study(cfg, result, out, plots):
    out_cfg = cfg.sections["output"]
    files = [write_csv(out / "study.csv", STUDY_COLUMNS, result.rows)]
    text = [result.table(), ""]
    for k, res in enumerate(result.cycles):
        text.append(format_report(res.report, f"level {k}"))
        if out_cfg["vtk"]:
            files += write_fields(out, f"level{k}", res.mesh, res.u, res.z, res.report)
        if out_cfg["dump_dual"]:
            files.append(write_dual_polygons(out / f"level{k}_dual.vtk", res.diagram))
    files.append(write_text(out / "report.txt", "\n".join(text)))
    if out_cfg["plots"] if plots is None else plots:
        from .plotting import plot_convergence, plot_indicators

        files.append(plot_convergence(result.rows, out / "convergence.png", cfg.problem))
        last = result.cycles[-1]
        files.append(plot_indicators(last.mesh, last.report.element_indicators, out / "indicators.png"))
    return files


def adaptive_rows(run):
    rows = []
    for k, res in enumerate(run.cycles):
        rep = res.report
        rows.append({
            "cycle": k,
            "vertices": res.mesh.n_vertices,
            "elements": res.mesh.n_elements,
            "j": rep.goal_value,
            "eta_T": rep.eta_T,
            "eta_m": rep.eta_m,
            "eta_nc": rep.eta_nc,
            "total": rep.total_estimate,
            "effectivity": rep.effectivity,
            "true_error": rep.true_error,
        })
    return rows


def run_adaptive_study(cfg, out_dir=None, plots=None):
    problem, goal = build_objects(cfg)
    settings = run_settings(cfg)
    mesh, _ = level_mesh(cfg, 0)
    if cfg.sections["adaptive"]["fallback"] == "stop":
        check_mesh(mesh, settings.dual_kind)
    run = run_adaptive_loop(problem, goal, mesh, settings, adaptive_options(cfg))
    result = StudyResult(adaptive_rows(run), run.cycles, status=run.status)
    if out_dir is not None:
        out = Path(out_dir)
        out_cfg = cfg.sections["output"]
        files = [write_csv(out / "adaptive.csv", ADAPTIVE_COLUMNS, result.rows)]
        text = [result.table(ADAPTIVE_COLUMNS), f"status: {run.status}", ""]
        for k, res in enumerate(run.cycles):
            text.append(format_report(res.report, f"cycle {k}"))
            if out_cfg["vtk"]:
                files += write_fields(out, f"cycle{k}", res.mesh, res.u, res.z, res.report)
        files.append(write_text(out / "report.txt", "\n".join(text)))
        if out_cfg["plots"] if plots is None else plots:
            from .plotting import plot_adaptive_history, plot_indicators

            files.append(plot_adaptive_history(result.rows, out / "adaptive.png", cfg.problem))
            last = run.cycles[-1]
            files.append(plot_indicators(last.mesh, last.report.element_indicators, out / "indicators.png"))
        result.files = files
    return result


# -- verify suite ---------------------------------------------------------------------------

VERIFY_PROBLEMS = (("p1_poisson", {}), ("p2_convdiff", {"eps": 1.0}), ("p3_quasilinear", {}))


@dataclass(frozen=True)
class Check:
    name: str
    case: str
    value: float
    limit: float
    passed: bool

    def line(self):
        mark = "PASS" if self.passed else "FAIL"
        return f"{mark}  {self.name:<22} {self.case:<34} value={self.value:.3e} limit={self.limit:.1e}"


def _scheme_checks():
    out = []
    for name in SCHEME_NAMES:
        scheme = UpwindScheme(name, 2.0 if name == "piecewise_linear" else (1.0 if name == "step" else None))
        rep = verify_scheme_properties(scheme)
        fails = rep.failures
        if name == "central":
            # central differences are not an upwind scheme; report only
            continue
        expected = ["cont"] if name == "step" else []
        out.append(Check("scheme_properties", scheme.label, float(len(fails)), 0.0, fails == expected))
        if rep.passed.get("sym"):
            err = check_k_relation(scheme)
            out.append(Check("k_relation", scheme.label, err, 1e-12, err <= 1e-12))
    return out


def run_verify(cfg):
    """Scheme properties, decomposition identity, bound chain and dual orthogonality on the catalog."""
    settings = run_settings(cfg)
    _, goal = build_objects(cfg)
    vcfg = cfg.sections["verify"]
    try:
        sizes = [int(s) for s in vcfg["levels"].split(",") if s.strip()]
    except ValueError:
        raise ConfigError("expected comma-separated integers", "verify.levels") from None
    rng = np.random.default_rng(vcfg["seed"])
    checks = _scheme_checks()
    for pname, params in VERIFY_PROBLEMS:
        problem = get_problem(pname, **params)
        for kind in ("voronoi", "donald"):
            for n in sizes:
                case = f"{pname}/{kind}/n={n}"
                mesh = unit_square_mesh(n)
                diagram = build_dual_diagram(mesh, kind)
                system = DiscreteSystem(problem, diagram, settings.scheme, quad_degree=settings.quad_degree)
                u, _ = solve_primal(system, None, settings.solver)
                z = solve_dual(system, u, goal)
                dec = compute_nc_indicators(system, u, z)
                eta_nc, _, _ = estimate_eta_nc_identity(system, u, z)
                gap = abs(dec.delta.sum() - eta_nc)
                scale = max(abs(eta_nc), np.abs(dec.delta).sum(), 1e-300)
                checks.append(Check("decomposition", case, gap / scale, 1e-8, gap <= 1e-8 * scale))
                if kind == "donald":
                    checks.append(Check("donald_delta0", case, abs(dec.delta[0]), 0.0, dec.delta[0] == 0.0))
                zh1, zl = h1_seminorm(mesh, z), lumped_norm(diagram, z)
                for k, bound in ((1, dec.eta[1] * zh1), (2, dec.eta[2] * zl), (3, dec.eta[3] * zh1)):
                    val = abs(dec.delta[k]) - bound
                    checks.append(Check(f"bound_delta{k}", case, val, 1e-10, val <= 1e-10))
                res, sc = dual_orthogonality(system, u, z, goal)
                checks.append(Check("dual_orthogonality", case, res, 1e-9 * sc, res <= 1e-9 * sc))
                # random-state consistency of the element localization
                v = np.zeros(mesh.n_vertices)
                v[mesh.interior] = rng.standard_normal(len(mesh.interior))
                loc = float(np.sum(system.local_form(u, v)))
                glob = system.form(u, v)
                diff = abs(loc - glob)
                checks.append(Check("localization", case, diff, 1e-10 * (1 + abs(glob)), diff <= 1e-10 * (1 + abs(glob))))
    return checks


def format_checks(checks):
    lines = [c.line() for c in checks]
    npass = sum(c.passed for c in checks)
    lines.append(f"{npass}/{len(checks)} checks passed")
    return "\n".join(lines) + "\n"
