"""File outputs: legacy VTK (ASCII), CSV tables and the plain-text report.

Floats are written with a fixed ``%.16e`` format so identical runs give
identical bytes.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .errors import FieldMismatch, FVDWRError

FLOAT = "{:.16e}"

STUDY_COLUMNS = (
    "level", "n", "h", "dofs", "err_V", "err_L2", "j_error",
    "eta_T", "eta_m", "eta_nc", "sum_eta_l",
    "eoc_V", "eoc_L2", "eoc_j", "eoc_sum_eta_l",
    "effectivity", "newton_iterations",
)

ADAPTIVE_COLUMNS = (
    "cycle", "vertices", "elements", "j", "eta_T", "eta_m", "eta_nc", "total", "effectivity",
)

ELEMENT_COLUMNS = ("element", "eta_T_part", "eta_nc_part", "eta_m_part", "total")


class OutputError(FVDWRError):
    """An output file could not be written; ``path`` names it."""

    def __init__(self, path, reason):
        self.path = str(path)
        super().__init__(f"{self.path}: {reason}")


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return FLOAT.format(value)


def _open(path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="", encoding="ascii")
    except OSError as exc:
        raise OutputError(path, exc.strerror or str(exc)) from None


def write_csv(path, columns, rows):
    """RFC 4180 table: fixed header, CRLF line ends, rows as dicts or sequences."""
    with _open(path) as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(columns)
        for row in rows:
            if isinstance(row, dict):
                row = [row.get(c) for c in columns]
            if len(row) != len(columns):
                raise OutputError(path, f"row has {len(row)} entries, header has {len(columns)}")
            w.writerow([fmt(v) for v in row])
    return Path(path)


def read_csv(path):
    with open(path, newline="", encoding="ascii") as fh:
        return list(csv.DictReader(fh))


def element_rows(report):
    for t in range(len(report.element_indicators)):
        yield (
            t,
            report.element_eta_T[t],
            report.element_nc_share[t],
            report.element_eta_m[t],
            report.element_indicators[t],
        )


def write_element_table(path, report):
    return write_csv(path, ELEMENT_COLUMNS, element_rows(report))


def write_vtk(path, mesh, point_data=None, cell_data=None, title="fvdwr"):
    """Legacy VTK 2.0 ASCII unstructured grid with scalar point and cell data."""
    point_data = dict(point_data or {})
    cell_data = dict(cell_data or {})
    nv, ne = mesh.n_vertices, mesh.n_elements
    for name, arr in point_data.items():
        if np.shape(arr) != (nv,):
            raise FieldMismatch(f"point data {name!r} has shape {np.shape(arr)}, expected ({nv},)")
    for name, arr in cell_data.items():
        if np.shape(arr) != (ne,):
            raise FieldMismatch(f"cell data {name!r} has shape {np.shape(arr)}, expected ({ne},)")
    lines = ["# vtk DataFile Version 2.0", title.replace("\n", " ")[:255], "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {nv} double")
    for x, y in mesh.vertices:
        lines.append(f"{fmt(x)} {fmt(y)} {fmt(0.0)}")
    lines.append(f"CELLS {ne} {4 * ne}")
    for a, b, c in mesh.elements:
        lines.append(f"3 {a} {b} {c}")
    lines.append(f"CELL_TYPES {ne}")
    lines.extend(["5"] * ne)

    def block(header, data):
        if not data:
            return
        lines.append(header)
        for name, arr in data.items():
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(fmt(v) for v in np.asarray(arr, dtype=float))

    block(f"POINT_DATA {nv}", point_data)
    block(f"CELL_DATA {ne}", cell_data)
    with _open(path) as fh:
        fh.write("\n".join(lines) + "\n")
    return Path(path)


def write_fields(directory, stem, mesh, u, z, report):
    """The VTK file and per-element CSV of one solve; returns the written paths."""
    directory = Path(directory)
    vtk = write_vtk(
        directory / f"{stem}.vtk",
        mesh,
        {"u": u, "z": z},
        {
            "indicator": report.element_indicators,
            "eta_T": report.element_eta_T,
            "eta_m": report.element_eta_m,
            "eta_nc": report.element_nc_share,
        },
    )
    table = write_element_table(directory / f"{stem}_elements.csv", report)
    return [vtk, table]


def write_dual_polygons(path, diagram):
    """Control volumes as a polygon soup (one triangle per fragment) in VTK format."""
    mesh = diagram.mesh
    corners = np.einsum("tfcj,tjd->tfcd", diagram.fragment_barycentric, mesh.vertices[mesh.elements])
    pts = corners.reshape(-1, 2)
    cells = np.arange(len(pts)).reshape(-1, 3)
    owner = mesh.elements[:, diagram.FRAGMENT_OWNER].reshape(-1)
    lines = ["# vtk DataFile Version 2.0", f"{diagram.kind} control volumes", "ASCII", "DATASET UNSTRUCTURED_GRID"]
    lines.append(f"POINTS {len(pts)} double")
    lines.extend(f"{fmt(x)} {fmt(y)} {fmt(0.0)}" for x, y in pts)
    lines.append(f"CELLS {len(cells)} {4 * len(cells)}")
    lines.extend(f"3 {a} {b} {c}" for a, b, c in cells)
    lines.append(f"CELL_TYPES {len(cells)}")
    lines.extend(["5"] * len(cells))
    lines.append(f"CELL_DATA {len(cells)}")
    lines.append("SCALARS vertex int 1")
    lines.append("LOOKUP_TABLE default")
    lines.extend(str(int(o)) for o in owner)
    with _open(path) as fh:
        fh.write("\n".join(lines) + "\n")
    return Path(path)


def format_table(columns, rows, widths=None):
    """Fixed-width human-readable table."""
    rows = [[fmt_short(v) for v in (r if not isinstance(r, dict) else [r.get(c) for c in columns])] for r in rows]
    widths = widths or [max(len(c), *(len(r[i]) for r in rows)) if rows else len(c) for i, c in enumerate(columns)]
    out = ["  ".join(c.rjust(w) for c, w in zip(columns, widths))]
    out.extend("  ".join(v.rjust(w) for v, w in zip(r, widths)) for r in rows)
    return "\n".join(out)


def fmt_short(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    if isinstance(value, str):
        return value
    return f"{float(value):.4e}"


def format_report(report, title=None) -> str:
    """Structured text form of an ErrorReport."""
    lines = [] if title is None else [title, "-" * len(title)]
    pairs = [
        ("j(u_T)", report.goal_value),
        ("eta_T", report.eta_T),
        ("eta_m", report.eta_m),
        ("eta_nc", report.eta_nc),
        ("total", report.total_estimate),
    ]
    for k in range(4):
        pairs.append((f"delta_{k}", report.delta[k]))
    for k in range(4):
        pairs.append((f"eta_{k}", report.eta_l[k]))
    pairs += [("|z_T|_1", report.z_h1), ("||z_T||_T", report.z_lumped)]
    if report.reference is not None:
        pairs += [("j(u)", report.reference), ("true error", report.true_error), ("effectivity", report.effectivity)]
    res, scale = report.dual_orthogonality
    pairs.append(("dual orthogonality", res / scale if scale else res))
    for key in sorted(report.meta):
        pairs.append((key, report.meta[key]))
    width = max(len(k) for k, _ in pairs)
    lines.extend(f"{k.ljust(width)} = {fmt_short(v)}" for k, v in pairs)
    return "\n".join(lines) + "\n"


def write_text(path, text):
    with _open(path) as fh:
        fh.write(text)
    return Path(path)
