"""OVF 2.0 text snapshots of the magnetization field.

Writes the rectangular-mesh OOMMF Vector Field format with one
"mx my mz" data row per cell, x varying fastest. Values are printed with
17 significant digits so a write/read round trip is bit exact.
"""

from __future__ import annotations

import numpy as np

from .geometry import MeshSpec


def write_snapshot_ovf(m: np.ndarray, mesh: MeshSpec, t: float, path,
                       title: str = "m") -> None:
    """Write a (3, nx, ny) unit-magnetization snapshot at time t (s)."""
    nx, ny = m.shape[1], m.shape[2]
    if (nx, ny) != (mesh.nx, mesh.ny):
        raise ValueError("snapshot does not match the mesh")
    dx, dy, dz = (mesh.dx * 1e-9, mesh.dy * 1e-9, mesh.dz * 1e-9)
    lines = [
        "# OOMMF OVF 2.0",
        "# Segment count: 1",
        "# Begin: Segment",
        "# Begin: Header",
        f"# Title: {title}",
        "# meshtype: rectangular",
        "# meshunit: m",
        "# xmin: 0",
        "# ymin: 0",
        "# zmin: 0",
        f"# xmax: {nx * dx!r}",
        f"# ymax: {ny * dy!r}",
        f"# zmax: {dz!r}",
        "# valuedim: 3",
        "# valuelabels: mx my mz",
        "# valueunits: 1 1 1",
        f"# Desc: Total simulation time: {t!r} s",
        f"# xbase: {dx / 2!r}",
        f"# ybase: {dy / 2!r}",
        f"# zbase: {dz / 2!r}",
        f"# xnodes: {nx}",
        f"# ynodes: {ny}",
        "# znodes: 1",
        f"# xstepsize: {dx!r}",
        f"# ystepsize: {dy!r}",
        f"# zstepsize: {dz!r}",
        "# End: Header",
        "# Begin: Data Text",
    ]
    rows = []
    for j in range(ny):
        for i in range(nx):
            rows.append(f"{m[0, i, j]:.17g} {m[1, i, j]:.17g} "
                        f"{m[2, i, j]:.17g}")
    lines.extend(rows)
    lines.append("# End: Data Text")
    lines.append("# End: Segment")
    with open(path, "w", encoding="ascii") as f:
        f.write("\n".join(lines) + "\n")


def read_snapshot_ovf(path):
    """Read an OVF 2.0 text snapshot; returns (m, mesh, t)."""
    header = {}
    data = []
    in_data = False
    with open(path, "r", encoding="ascii") as f:
        for line in f:
            line = line.strip()
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("Begin: Data"):
                    if "Text" not in body:
                        raise ValueError(f"unsupported OVF data block: {body}")
                    in_data = True
                elif body.startswith("End: Data"):
                    in_data = False
                elif ":" in body:
                    key, _, val = body.partition(":")
                    header[key.strip().lower()] = val.strip()
            elif line and in_data:
                parts = line.split()
                if len(parts) != 3:
                    raise ValueError(f"bad OVF data row: {line!r}")
                data.append([float(p) for p in parts])
    try:
        nx = int(header["xnodes"])
        ny = int(header["ynodes"])
        nz = int(header["znodes"])
        dx = float(header["xstepsize"]) * 1e9
        dy = float(header["ystepsize"]) * 1e9
        dz = float(header["zstepsize"]) * 1e9
    except KeyError as e:
        raise ValueError(f"OVF header missing {e}") from None
    if nz != 1:
        raise ValueError("only single-layer snapshots are supported")
    if len(data) != nx * ny:
        raise ValueError(f"expected {nx * ny} data rows, found {len(data)}")
    arr = np.asarray(data).reshape(ny, nx, 3)
    m = np.moveaxis(arr, 2, 0).swapaxes(1, 2).copy()  # (3, nx, ny)
    t = 0.0
    desc = header.get("desc", "")
    if "simulation time:" in desc.lower():
        t = float(desc.lower().split("simulation time:")[1].split()[0])
    mesh = MeshSpec(nx=nx, ny=ny, nz=1, dx=dx, dy=dy, dz=dz)
    return m, mesh, t
