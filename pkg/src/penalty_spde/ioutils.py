"""File output helpers: legacy VTK snapshots, atomic CSV/JSON writers."""

import csv
import io
import json
import os
import tempfile


def atomic_write_text(path, text):
    """Write via temp file + rename so a killed run leaves no truncated file."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    atomic_write_text(path, buf.getvalue())


def write_json(path, payload):
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_vtk_snapshot(path, mesh, velocity, pressure, title="snapshot"):
    """Legacy VTK ASCII: triangle mesh with vertex velocity/pressure point data.

    P2 velocity is sampled at mesh vertices (the first block of its dofs);
    P1 pressure coefficients are already vertex values.
    """
    nv = mesh.n_vertices
    vs = velocity.space
    vx = velocity.coefficients[0 * vs.n_scalar : 0 * vs.n_scalar + nv]
    vy = velocity.coefficients[1 * vs.n_scalar : 1 * vs.n_scalar + nv]
    p = pressure.coefficients[:nv]

    lines = [
        "# vtk DataFile Version 2.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {nv} double",
    ]
    for x, y in mesh.vertices:
        lines.append(f"{x} {y} 0.0")
    nt = mesh.n_triangles
    lines.append(f"CELLS {nt} {4 * nt}")
    for i, j, k in mesh.triangles:
        lines.append(f"3 {i} {j} {k}")
    lines.append(f"CELL_TYPES {nt}")
    lines.extend(["5"] * nt)
    lines.append(f"POINT_DATA {nv}")
    lines.append("VECTORS velocity double")
    for a, b in zip(vx, vy):
        lines.append(f"{a} {b} 0.0")
    lines.append("SCALARS pressure double 1")
    lines.append("LOOKUP_TABLE default")
    for v in p:
        lines.append(f"{v}")
    atomic_write_text(path, "\n".join(lines) + "\n")
