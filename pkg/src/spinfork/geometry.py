"""Mesh construction and device layout rasterization.

The majority gate is a fork of three spin-wave bus arms (feature width
40 nm) merging into a single output arm. Each arm embeds one
magneto-electric cell; every open arm end continues into a graded-damping
absorber so the simulated structure behaves like a gate on infinitely long
buses. Layouts are rasterized onto a regular finite-difference grid
(2 x 2 x 12 nm cells by default) as per-cell region labels.

Coordinates: x is the propagation direction, y transverse, with the central
arm axis at y = 0. The label grid is built so that a symmetric fork is
exactly mirror symmetric about that axis, cell by cell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .materials import MaterialMap


class RegionLabel(IntEnum):
    VACUUM = 0
    BUS = 1
    OUTPUT_ARM = 2
    ME_CELL_IN1 = 3
    ME_CELL_IN2 = 4
    ME_CELL_IN3 = 5
    ME_CELL_OUT = 6
    ABSORBER = 7


ME_INPUT_LABELS = (RegionLabel.ME_CELL_IN1, RegionLabel.ME_CELL_IN2,
                   RegionLabel.ME_CELL_IN3)
ME_LABELS = ME_INPUT_LABELS + (RegionLabel.ME_CELL_OUT,)


class LayoutError(ValueError):
    """Raised when a device layout cannot be rasterized onto the mesh."""


@dataclass(frozen=True)
class MeshSpec:
    """Finite-difference grid: cell counts and cell edges in nm."""

    nx: int
    ny: int
    nz: int = 1
    dx: float = 2.0
    dy: float = 2.0
    dz: float = 12.0

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) < 1:
            raise ValueError("cell counts must be >= 1")
        if min(self.dx, self.dy, self.dz) <= 0:
            raise ValueError("cell edges must be positive")

    @property
    def cell_volume_m3(self) -> float:
        return self.dx * self.dy * self.dz * 1e-27

    @property
    def cell_area_nm2(self) -> float:
        return self.dx * self.dy


@dataclass(frozen=True)
class ForkSpec:
    """Dimensions of the fork majority gate, all in nm.

    spacing_s is the center-to-center distance between neighboring arms.
    input_arm_length is the straight bus run between an input cell and the
    start of the side-arm bend; the central arm's run is derived so all
    three cell-to-junction path lengths are equal. tail_length is bus left
    behind each cell before its absorber (the cells are inset, not flush).
    """

    arm_width: float = 40.0
    spacing_s: float = 88.0
    me_cell_length: float = 80.0
    me_cell_width: float = 40.0
    output_arm_length: float = 92.0
    input_arm_length: float = 40.0
    bend_angle: float = 45.0
    absorber_length: float = 200.0
    tail_length: float = 140.0

    def __post_init__(self):
        if self.spacing_s < self.arm_width:
            raise LayoutError(
                f"arm spacing {self.spacing_s} nm is below the arm width "
                f"{self.arm_width} nm")
        if self.me_cell_width > self.arm_width:
            raise LayoutError("ME cell wider than the arm")
        if not 5.0 <= self.bend_angle <= 85.0:
            raise LayoutError("bend angle must be in [5, 85] degrees")
        for name in ("arm_width", "spacing_s", "me_cell_length",
                     "me_cell_width", "output_arm_length", "input_arm_length",
                     "absorber_length", "tail_length"):
            if getattr(self, name) < 0:
                raise LayoutError(f"{name} must be non-negative")

    @property
    def bend_dx(self) -> float:
        """Horizontal extent of the bend."""
        return self.spacing_s / math.tan(math.radians(self.bend_angle))

    @property
    def bend_path(self) -> float:
        """Path length along the bend diagonal."""
        return self.spacing_s / math.sin(math.radians(self.bend_angle))


@dataclass(frozen=True)
class LabeledMesh:
    """Rasterized layout: per-cell region labels plus derived masks."""

    spec: MeshSpec
    labels: np.ndarray                  # (nx, ny) int8 of RegionLabel
    zones: dict = field(default_factory=dict)   # name -> bool mask (nx, ny)
    absorber_depth: np.ndarray | None = None     # nm past inner edge, (nx, ny)
    absorber_adjacent: np.ndarray | None = None  # label feeding each absorber
    notes: dict = field(default_factory=dict)

    @property
    def active_mask(self) -> np.ndarray:
        return self.labels != RegionLabel.VACUUM

    def region_mask(self, label: RegionLabel) -> np.ndarray:
        return self.labels == label

    @property
    def active_area_um2(self) -> float:
        """Area of non-vacuum, non-absorber cells in um^2."""
        n = int(np.count_nonzero(
            (self.labels != RegionLabel.VACUUM)
            & (self.labels != RegionLabel.ABSORBER)))
        return n * self.spec.cell_area_nm2 * 1e-6

    def labels_present(self) -> list[RegionLabel]:
        return [RegionLabel(v) for v in np.unique(self.labels)
                if v != RegionLabel.VACUUM]

    def x_centers_nm(self) -> np.ndarray:
        return (np.arange(self.spec.nx) + 0.5) * self.spec.dx

    def y_centers_nm(self) -> np.ndarray:
        return (np.arange(self.spec.ny) - self.spec.ny / 2 + 0.5) * self.spec.dy


def mirror_labels(labels: np.ndarray) -> np.ndarray:
    """Reflect a label grid about the central arm axis.

    Mirroring exchanges the two side arms, so their cell labels swap."""
    out = labels[:, ::-1].copy()
    top = out == RegionLabel.ME_CELL_IN1
    bot = out == RegionLabel.ME_CELL_IN3
    out[top] = RegionLabel.ME_CELL_IN3
    out[bot] = RegionLabel.ME_CELL_IN1
    return out


def _cells(value_nm: float, d_nm: float, name: str) -> int:
    n = value_nm / d_nm
    if abs(n - round(n)) > 1e-9:
        raise LayoutError(f"{name}={value_nm} nm is not a multiple of the "
                          f"{d_nm} nm cell edge")
    return int(round(n))


def _snap(value_nm: float, d_nm: float) -> float:
    return round(value_nm / d_nm) * d_nm


# ---------------------------------------------------------------------------
# Fork layout
# ---------------------------------------------------------------------------

def fork_layout(spec: ForkSpec, mesh: MeshSpec) -> dict:
    """Key x stations of the fork in nm, shared by builder and runner."""
    stagger = _snap(spec.bend_path - spec.bend_dx, mesh.dx)
    bend_dx = _snap(spec.bend_dx, mesh.dx)
    x_side0 = stagger
    x_cell_side = x_side0 + spec.absorber_length + spec.tail_length
    x_bend = x_cell_side + spec.me_cell_length + spec.input_arm_length
    x_junction = x_bend + bend_dx
    x_out_cell = x_junction + spec.output_arm_length
    x_end = x_out_cell + spec.me_cell_length + spec.tail_length \
        + spec.absorber_length
    return {
        "stagger": stagger,
        "bend_dx": bend_dx,
        "x_side0": x_side0,
        "x_cell_side": x_cell_side,
        "x_cell_central": x_cell_side - stagger,
        "x_bend": x_bend,
        "x_junction": x_junction,
        "x_out_cell": x_out_cell,
        "x_end": x_end,
    }


def mesh_for_fork(spec: ForkSpec, margin_rows: int = 2,
                  dx: float = 2.0, dy: float = 2.0, dz: float = 12.0) -> MeshSpec:
    """Smallest mesh that contains the fork layout plus absorbers."""
    lay = fork_layout(spec, MeshSpec(1, 2, 1, dx, dy, dz))
    nx = _cells(lay["x_end"], dx, "layout length")
    half_rows = (_cells(spec.spacing_s, dy, "spacing_S")
                 + _cells(spec.arm_width, dy, "arm_width") // 2 + margin_rows)
    return MeshSpec(nx=nx, ny=2 * half_rows, nz=1, dx=dx, dy=dy, dz=dz)


def build_fork(spec: ForkSpec, mesh: MeshSpec) -> LabeledMesh:
    """Rasterize the fork majority gate onto the mesh.

    The three input arms lie at y = +S, 0, -S. Side arms run straight and
    then bend toward the axis; side and central input columns are staggered
    in x so the three cell-to-junction path lengths match. Region labels:
    input cells IN1 (top), IN2 (center), IN3 (bottom), a 92 nm (by default)
    OutputArm strip after the junction, the output cell, and absorbers past
    every cell tail.
    """
    if mesh.nz != 1:
        raise LayoutError("device layouts are single-cell through thickness")
    lay = fork_layout(spec, mesh)
    w_c = _cells(spec.arm_width, mesh.dy, "arm_width")
    s_c = _cells(spec.spacing_s, mesh.dy, "spacing_S")
    mw_c = _cells(spec.me_cell_width, mesh.dy, "me_cell_width")
    if (w_c - mw_c) % 2:
        raise LayoutError("ME cell cannot be centered in the arm width")

    nx, ny = mesh.nx, mesh.ny
    if ny % 2:
        raise LayoutError("ny must be even so the arm axis falls between rows")
    labels = np.zeros((nx, ny), dtype=np.int8)
    depth = np.zeros((nx, ny), dtype=np.float64)
    adjacent = np.zeros((nx, ny), dtype=np.int8)

    xc = (np.arange(nx) + 0.5) * mesh.dx
    yc = (np.arange(ny) - ny / 2 + 0.5) * mesh.dy

    def xi(x_nm: float) -> int:
        i = _cells(x_nm, mesh.dx, "x station")
        if not 0 <= i <= nx:
            raise LayoutError(f"layout overflows mesh bounds at x={x_nm} nm")
        return i

    def band(j_center_rows: int) -> slice:
        j0 = ny // 2 + j_center_rows - w_c // 2
        j1 = j0 + w_c
        if j0 < 0 or j1 > ny:
            raise LayoutError("layout overflows mesh bounds in y")
        return slice(j0, j1)

    def cell_band(j_center_rows: int) -> slice:
        pad = (w_c - mw_c) // 2
        b = band(j_center_rows)
        return slice(b.start + pad, b.stop - pad)

    central = band(0)

    # --- central arm: absorber | tail | cell | run to junction -------------
    x0 = lay["x_cell_central"] - spec.tail_length - spec.absorber_length
    labels[xi(x0):xi(x0 + spec.absorber_length), central] = RegionLabel.ABSORBER
    labels[xi(x0 + spec.absorber_length):xi(lay["x_junction"]), central] = RegionLabel.BUS
    labels[xi(lay["x_cell_central"]):
           xi(lay["x_cell_central"] + spec.me_cell_length),
           cell_band(0)] = RegionLabel.ME_CELL_IN2

    # --- top side arm, built explicitly; bottom arm is its exact mirror ----
    top = np.zeros((nx, ny), dtype=bool)
    top_abs = np.zeros((nx, ny), dtype=bool)
    top_cell = np.zeros((nx, ny), dtype=bool)
    arm = band(s_c)
    i_abs0, i_abs1 = xi(lay["x_side0"]), xi(lay["x_side0"] + spec.absorber_length)
    top_abs[i_abs0:i_abs1, arm] = True
    top[i_abs1:xi(lay["x_bend"]), arm] = True
    top_cell[xi(lay["x_cell_side"]):
             xi(lay["x_cell_side"] + spec.me_cell_length), cell_band(s_c)] = True

    # bend: strip of perpendicular width arm_width descending from +S to 0
    tan_t = math.tan(math.radians(spec.bend_angle))
    half_v = (spec.arm_width / 2) / math.cos(math.radians(spec.bend_angle))
    i_bend0, i_bend1 = xi(lay["x_bend"]), xi(lay["x_junction"])
    for i in range(i_bend0, i_bend1):
        y_mid = spec.spacing_s - (xc[i] - lay["x_bend"]) * tan_t
        rows = (np.abs(yc - y_mid) <= half_v) \
            & (yc <= spec.spacing_s + spec.arm_width / 2) \
            & (yc >= -spec.arm_width / 2)
        top[i, rows] = True

    bottom = top[:, ::-1]
    bottom_abs = top_abs[:, ::-1]
    bottom_cell = top_cell[:, ::-1]
    for mask, lab in ((top, RegionLabel.BUS), (bottom, RegionLabel.BUS),
                      (top_abs, RegionLabel.ABSORBER),
                      (bottom_abs, RegionLabel.ABSORBER),
                      (top_cell, RegionLabel.ME_CELL_IN1),
                      (bottom_cell, RegionLabel.ME_CELL_IN3)):
        if np.any(labels[mask] == RegionLabel.ME_CELL_IN2):
            raise LayoutError("arm rasterizations overlap an ME cell; "
                              "increase spacing_S")
        labels[mask] = lab

    # --- output: arm strip | cell | tail | absorber -------------------------
    labels[xi(lay["x_junction"]):xi(lay["x_out_cell"]), central] = \
        RegionLabel.OUTPUT_ARM
    labels[xi(lay["x_out_cell"]):xi(lay["x_out_cell"] + spec.me_cell_length),
           cell_band(0)] = RegionLabel.ME_CELL_OUT
    x_tail1 = lay["x_out_cell"] + spec.me_cell_length + spec.tail_length
    labels[xi(lay["x_out_cell"] + spec.me_cell_length):xi(x_tail1), central] = \
        RegionLabel.BUS
    labels[xi(x_tail1):xi(x_tail1 + spec.absorber_length), central] = \
        RegionLabel.ABSORBER

    # --- absorber ramp bookkeeping ------------------------------------------
    # input absorbers ramp leftward from the tail bus; output rightward
    for i0, i1, sl, leftward in (
            (xi(x0), xi(x0 + spec.absorber_length), central, True),
            (i_abs0, i_abs1, arm, True),
            (i_abs0, i_abs1, band(-s_c), True),
            (xi(x_tail1), xi(x_tail1 + spec.absorber_length), central, False)):
        for i in range(i0, i1):
            d = (i1 - i) * mesh.dx if leftward else (i - i0 + 1) * mesh.dx
            depth[i, sl] = d
            adjacent[i, sl] = RegionLabel.BUS

    if spec.spacing_s - spec.arm_width < 2 * mesh.dy:
        gap_rows = band(s_c).start - band(0).stop
        if gap_rows < 1:
            raise LayoutError("arms touch: spacing_S leaves no clearance")

    # forward bus segments of each arm (cell end -> junction), used as the
    # intensity reference regions of the transmission analysis
    fwd_side = (xc >= lay["x_cell_side"] + spec.me_cell_length)[:, None]
    in_central_band = (np.abs(yc) <= spec.arm_width / 2)[None, :]
    zones = {
        "arm1_bus": top & ~top_cell & fwd_side,
        "arm2_bus": (labels == RegionLabel.BUS) & in_central_band
                    & (xc >= lay["x_cell_central"] + spec.me_cell_length)[:, None]
                    & (xc < lay["x_junction"])[:, None],
        "arm3_bus": bottom & ~bottom_cell & fwd_side,
    }
    notes = dict(lay)
    notes["kind"] = "fork"
    return LabeledMesh(spec=mesh, labels=labels, zones=zones,
                       absorber_depth=depth, absorber_adjacent=adjacent,
                       notes=notes)


# ---------------------------------------------------------------------------
# Straight bus (characterization geometry)
# ---------------------------------------------------------------------------

def mesh_for_bus(length: float, width: float, margin_rows: int = 2,
                 dx: float = 2.0, dy: float = 2.0, dz: float = 12.0) -> MeshSpec:
    nx = _cells(length, dx, "length")
    ny = 2 * (_cells(width, dy, "width") // 2 + margin_rows)
    return MeshSpec(nx=nx, ny=ny, nz=1, dx=dx, dy=dy, dz=dz)


def build_straight_bus(length: float, width: float, mesh: MeshSpec,
                       me_cell_length: float = 80.0,
                       absorber_length: float = 200.0,
                       probe_offset: float = 120.0) -> LabeledMesh:
    """Single bus with one input cell and absorbers at both ends.

    Layout along x: absorber | ME cell | bus | absorber. The generated wave
    is monitored probe_offset nm past the cell's right edge.
    """
    if mesh.nz != 1:
        raise LayoutError("device layouts are single-cell through thickness")
    run = length - me_cell_length - 2 * absorber_length
    if run < 0:
        raise LayoutError(
            f"bus of {length} nm cannot hold an {me_cell_length} nm cell and "
            f"two {absorber_length} nm absorbers")
    nx = _cells(length, mesh.dx, "length")
    if nx > mesh.nx:
        raise LayoutError("layout overflows mesh bounds in x")
    w_c = _cells(width, mesh.dy, "width")
    ny = mesh.ny
    if ny % 2:
        raise LayoutError("ny must be even so the bus axis falls between rows")
    j0 = ny // 2 - w_c // 2
    j1 = j0 + w_c
    if j0 < 0 or j1 > ny:
        raise LayoutError("layout overflows mesh bounds in y")
    sl = slice(j0, j1)

    labels = np.zeros((mesh.nx, ny), dtype=np.int8)
    depth = np.zeros((mesh.nx, ny), dtype=np.float64)
    adjacent = np.zeros((mesh.nx, ny), dtype=np.int8)

    i_abs = _cells(absorber_length, mesh.dx, "absorber_length")
    i_cell = i_abs + _cells(me_cell_length, mesh.dx, "me_cell_length")
    i_run1 = nx - i_abs
    labels[0:i_abs, sl] = RegionLabel.ABSORBER
    labels[i_abs:i_cell, sl] = RegionLabel.ME_CELL_IN1
    labels[i_cell:i_run1, sl] = RegionLabel.BUS
    labels[i_run1:nx, sl] = RegionLabel.ABSORBER

    for i in range(0, i_abs):
        depth[i, sl] = (i_abs - i) * mesh.dx
        adjacent[i, sl] = RegionLabel.ME_CELL_IN1
    for i in range(i_run1, nx):
        depth[i, sl] = (i - i_run1 + 1) * mesh.dx
        adjacent[i, sl] = RegionLabel.BUS

    i_probe = i_cell + _cells(probe_offset, mesh.dx, "probe_offset")
    if i_probe >= nx:
        raise LayoutError("probe site falls outside the bus")
    probe = np.zeros((mesh.nx, ny), dtype=bool)
    probe[i_probe, sl] = True
    zones = {"probe_site": probe,
             "bus_run": labels == RegionLabel.BUS}
    notes = {"kind": "straight_bus", "x_cell": absorber_length,
             "x_cell_end": absorber_length + me_cell_length,
             "x_probe": (i_probe + 0.5) * mesh.dx, "i_probe": i_probe}
    return LabeledMesh(spec=mesh, labels=labels, zones=zones,
                       absorber_depth=depth, absorber_adjacent=adjacent,
                       notes=notes)


# ---------------------------------------------------------------------------
# Damping map
# ---------------------------------------------------------------------------

def build_damping_map(lm: LabeledMesh, materials: "MaterialMap",
                      alpha_max: float = 0.5) -> np.ndarray:
    """Per-cell Gilbert damping.

    Each region takes its material's alpha. Absorber cells ramp
    quadratically from the adjacent region's alpha up to alpha_max across
    the absorber, reaching alpha_max exactly at the outer cell edge.
    """
    materials.validate_coverage(lm.labels_present())
    alpha = np.zeros(lm.labels.shape, dtype=np.float64)
    for lab in lm.labels_present():
        alpha[lm.labels == lab] = materials.magnet(lab).alpha

    absorber = lm.labels == RegionLabel.ABSORBER
    if np.any(absorber):
        if lm.absorber_depth is None or lm.absorber_adjacent is None:
            raise ValueError("mesh lacks absorber ramp metadata")
        ramp_len = float(lm.absorber_depth.max())
        base = np.zeros_like(alpha)
        for lab_val in np.unique(lm.absorber_adjacent[absorber]):
            lab = RegionLabel(int(lab_val))
            base_val = materials.magnet(lab).alpha
            base[absorber & (lm.absorber_adjacent == lab_val)] = base_val
        frac = np.zeros_like(alpha)
        frac[absorber] = lm.absorber_depth[absorber] / ramp_len
        alpha = np.where(absorber,
                         base + (alpha_max - base) * frac ** 2,
                         alpha)
    return alpha
