import numpy as np
import pytest

from spinfork.geometry import (ForkSpec, LayoutError, MeshSpec, RegionLabel,
                               build_damping_map, build_fork,
                               build_straight_bus, mesh_for_bus,
                               mesh_for_fork, mirror_labels)
from spinfork.materials import AnisotropyMode, default_material_map


@pytest.fixture(scope="module")
def default_fork():
    spec = ForkSpec()
    return spec, build_fork(spec, mesh_for_fork(spec))


def test_default_fork_area_near_paper_value(default_fork):
    _, lm = default_fork
    assert 0.074 * 0.7 <= lm.active_area_um2 <= 0.074 * 1.3


def test_active_area_matches_cell_count(default_fork):
    _, lm = default_fork
    n = int(np.count_nonzero((lm.labels != RegionLabel.VACUUM)
                             & (lm.labels != RegionLabel.ABSORBER)))
    assert lm.active_area_um2 == n * lm.spec.dx * lm.spec.dy * 1e-6


def test_fork_mirror_symmetry_exact(default_fork):
    _, lm = default_fork
    assert np.array_equal(lm.labels, mirror_labels(lm.labels))


def test_fork_rasterization_deterministic():
    spec = ForkSpec()
    a = build_fork(spec, mesh_for_fork(spec))
    b = build_fork(spec, mesh_for_fork(spec))
    assert np.array_equal(a.labels, b.labels)


def test_fork_all_regions_present(default_fork):
    _, lm = default_fork
    present = set(lm.labels_present())
    assert present == {RegionLabel.BUS, RegionLabel.OUTPUT_ARM,
                       RegionLabel.ME_CELL_IN1, RegionLabel.ME_CELL_IN2,
                       RegionLabel.ME_CELL_IN3, RegionLabel.ME_CELL_OUT,
                       RegionLabel.ABSORBER}
    for lab in (RegionLabel.ME_CELL_IN1, RegionLabel.ME_CELL_OUT):
        count = int(np.count_nonzero(lm.labels == lab))
        assert count == (80 // 2) * (40 // 2)


def test_output_arm_length(default_fork):
    spec, lm = default_fork
    cols = np.nonzero((lm.labels == RegionLabel.OUTPUT_ARM).any(axis=1))[0]
    assert (cols.max() - cols.min() + 1) * lm.spec.dx == spec.output_arm_length


def test_minimum_spacing_builds_without_overlap():
    spec = ForkSpec(spacing_s=56.0)
    lm = build_fork(spec, mesh_for_fork(spec))
    # all three input cells still have their full footprint
    for lab in (RegionLabel.ME_CELL_IN1, RegionLabel.ME_CELL_IN2,
                RegionLabel.ME_CELL_IN3):
        assert int(np.count_nonzero(lm.labels == lab)) == 800
    assert np.array_equal(lm.labels, mirror_labels(lm.labels))


def test_absorber_coverage_at_every_arm_end(default_fork):
    spec, lm = default_fork
    absorber = lm.labels == RegionLabel.ABSORBER
    cells_per_arm = int(spec.absorber_length / lm.spec.dx) * \
        int(spec.arm_width / lm.spec.dy)
    # four absorbers: three input ends plus the output end
    assert int(np.count_nonzero(absorber)) == 4 * cells_per_arm


def test_spacing_below_width_rejected():
    with pytest.raises(LayoutError):
        ForkSpec(spacing_s=30.0)


def test_arms_touching_rejected():
    spec = ForkSpec(spacing_s=40.0)  # equals the arm width: no clearance
    with pytest.raises(LayoutError):
        build_fork(spec, mesh_for_fork(spec))


def test_misaligned_dimension_rejected():
    spec = ForkSpec(output_arm_length=93.0)
    with pytest.raises(LayoutError):
        build_fork(spec, mesh_for_fork(spec))


def test_layout_overflow_rejected():
    spec = ForkSpec()
    mesh = mesh_for_fork(spec)
    small = MeshSpec(nx=mesh.nx - 50, ny=mesh.ny, nz=1)
    with pytest.raises(LayoutError):
        build_fork(spec, small)


# ---------------------------------------------------------------------------
# straight bus
# ---------------------------------------------------------------------------

def test_bus_probe_site_120nm_past_cell():
    mesh = mesh_for_bus(600, 40)
    lm = build_straight_bus(600, 40, mesh)
    x_probe = lm.notes["x_probe"]
    assert x_probe == pytest.approx(lm.notes["x_cell_end"] + 120.0, abs=1.1)
    assert np.any(lm.zones["probe_site"])


def test_bus_degenerate_minimal_length():
    mesh = mesh_for_bus(480, 40)
    lm = build_straight_bus(480, 40, mesh, me_cell_length=80.0,
                            absorber_length=200.0, probe_offset=0.0)
    present = set(lm.labels_present())
    assert RegionLabel.ME_CELL_IN1 in present
    assert RegionLabel.ABSORBER in present


def test_bus_misaligned_length_rejected():
    with pytest.raises(LayoutError):
        mesh_for_bus(601, 40)
    mesh = mesh_for_bus(600, 40)
    with pytest.raises(LayoutError):
        build_straight_bus(601, 40, mesh)


def test_bus_too_short_rejected():
    mesh = mesh_for_bus(400, 40)
    with pytest.raises(LayoutError):
        build_straight_bus(400, 40, mesh)


# ---------------------------------------------------------------------------
# damping map
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def damping(default_fork):
    _, lm = default_fork
    mat = default_material_map(AnisotropyMode.INTRINSIC_WITH_DEMAG)
    return lm, build_damping_map(lm, mat)


def test_damping_region_values(damping):
    lm, alpha = damping
    assert np.all(alpha[lm.labels == RegionLabel.BUS] == 0.01)
    assert np.all(alpha[lm.labels == RegionLabel.OUTPUT_ARM] == 0.016)
    assert np.all(alpha[lm.labels == RegionLabel.ME_CELL_IN1] == 0.027)
    assert np.all(alpha[lm.labels == RegionLabel.VACUUM] == 0.0)


def test_damping_absorber_ramp_quadratic(damping):
    lm, alpha = damping
    absorber = lm.labels == RegionLabel.ABSORBER
    a = alpha[absorber]
    assert a.min() >= 0.01
    assert a.max() == pytest.approx(0.5, rel=1e-12)
    # quadratic in depth: alpha = a0 + (amax-a0)*(d/L)^2
    d = lm.absorber_depth[absorber]
    ramp_len = d.max()
    expect = 0.01 + (0.5 - 0.01) * (d / ramp_len) ** 2
    assert np.allclose(alpha[absorber], expect, rtol=1e-12)


def test_damping_missing_material_raises(default_fork):
    from spinfork.materials import MaterialMap
    _, lm = default_fork
    full = default_material_map(AnisotropyMode.INTRINSIC_WITH_DEMAG)
    magnets = dict(full.magnets)
    del magnets[RegionLabel.OUTPUT_ARM]
    with pytest.raises(KeyError):
        build_damping_map(lm, MaterialMap(magnets=magnets))
