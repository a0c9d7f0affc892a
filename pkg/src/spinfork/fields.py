"""Effective-field terms: exchange, anisotropy, demagnetization, energy.

All magnetization fields are unit-vector arrays of shape (3, nx, ny) (or
(3, nx, ny, nz) for the general demag path); effective fields are in A/m.

Demagnetization supports three treatments:

* ``FULL_FFT``        Newell tensor on a zero-padded grid, applied by FFT
                      convolution (open boundaries, exact dipolar field).
* ``THIN_FILM_LOCAL`` analytic local limit H_d = -Ms*mz*z_hat, the interior
                      field of an extended thin film.
* ``NONE``            demag disabled (the thin-film contribution is then
                      expected to be folded into a net anisotropy field).

The FFT path uses torch purely as a fast FFT backend; tensors share memory
with the numpy arrays, and results are bitwise reproducible across runs and
thread counts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numba
import numpy as np
import torch

from .geometry import LabeledMesh, MeshSpec, RegionLabel
from .materials import MU0, MaterialMap

torch.set_grad_enabled(False)


# ---------------------------------------------------------------------------
# Newell demagnetization tensor
# ---------------------------------------------------------------------------

_EPS = 1e-18


def _newell_f(x, y, z):
    x, y, z = np.abs(x), np.abs(y), np.abs(z)
    r = np.sqrt(x * x + y * y + z * z)
    return (y / 2.0 * (z * z - x * x) * np.arcsinh(y / (np.sqrt(x * x + z * z) + _EPS))
            + z / 2.0 * (y * y - x * x) * np.arcsinh(z / (np.sqrt(x * x + y * y) + _EPS))
            - x * y * z * np.arctan(y * z / (x * r + _EPS))
            + 1.0 / 6.0 * (2 * x * x - y * y - z * z) * r)


def _newell_g(x, y, z):
    z = np.abs(z)
    r = np.sqrt(x * x + y * y + z * z)
    return (x * y * z * np.arcsinh(z / (np.sqrt(x * x + y * y) + _EPS))
            + y / 6.0 * (3.0 * z * z - y * y) * np.arcsinh(x / (np.sqrt(y * y + z * z) + _EPS))
            + x / 6.0 * (3.0 * z * z - x * x) * np.arcsinh(y / (np.sqrt(x * x + z * z) + _EPS))
            - z ** 3 / 6.0 * np.arctan(x * y / (z * r + _EPS))
            - z * y * y / 2.0 * np.arctan(x * z / (y * r + _EPS))
            - z * x * x / 2.0 * np.arctan(y * z / (x * r + _EPS))
            - x * y * r / 3.0)


def _second_difference(fgrid: np.ndarray) -> np.ndarray:
    """Apply the (1,-2,1) second difference along every axis of a corner
    lattice, collapsing it to the cell-offset lattice."""
    w = (1.0, -2.0, 1.0)
    out = None
    for a in (-1, 0, 1):
        for b in (-1, 0, 1):
            for c in (-1, 0, 1):
                term = w[a + 1] * w[b + 1] * w[c + 1] * \
                    fgrid[1 + a:fgrid.shape[0] - 1 + a,
                          1 + b:fgrid.shape[1] - 1 + b,
                          1 + c:fgrid.shape[2] - 1 + c]
                out = term if out is None else out + term
    return out


def newell_tensor(nx: int, ny: int, nz: int, dx: float, dy: float,
                  dz: float) -> dict:
    """Demag tensor components N_ab on the offset lattice
    [-(nx-1)..nx-1] x [-(ny-1)..ny-1] x [-(nz-1)..nz-1].

    Cell edges are taken in nm (the tensor is scale invariant). Components
    follow Newell's convention: H = -N * M for a uniformly magnetized cell,
    and the self terms satisfy Nxx+Nyy+Nzz = 1.
    """
    ox = np.arange(-nx, nx + 1) * dx
    oy = np.arange(-ny, ny + 1) * dy
    oz = np.arange(-nz, nz + 1) * dz
    X, Y, Z = np.meshgrid(ox, oy, oz, indexing="ij")
    v = dx * dy * dz
    # the triple second difference of f/g gives -4*pi*V*N
    scale = -1.0 / (4.0 * math.pi * v)
    return {
        "xx": scale * _second_difference(_newell_f(X, Y, Z)),
        "yy": scale * _second_difference(_newell_f(Y, X, Z)),
        "zz": scale * _second_difference(_newell_f(Z, Y, X)),
        "xy": scale * _second_difference(_newell_g(X, Y, Z)),
        "xz": scale * _second_difference(_newell_g(X, Z, Y)),
        "yz": scale * _second_difference(_newell_g(Y, Z, X)),
    }


def next_fast_len(n: int) -> int:
    """Smallest 7-smooth integer >= n (efficient FFT length)."""
    if n <= 1:
        return 1
    best = 1 << (n - 1).bit_length()
    p5 = 1
    while p5 < best:
        p57 = p5
        while p57 < best:
            p3 = p57
            while p3 < best:
                m = p3
                while m < n:
                    m *= 2
                if m < best:
                    best = m
                p3 *= 3
            p57 *= 7
        p5 *= 5
    return best


class DemagMode(Enum):
    FULL_FFT = "fft"
    THIN_FILM_LOCAL = "local"
    NONE = "none"


@dataclass
class DemagKernel:
    """Prepared demag operator for one mesh."""

    mode: DemagMode
    mesh: MeshSpec
    spectra: dict | None = None        # component -> torch real tensor
    pad_shape: tuple | None = None
    self_tensor: np.ndarray | None = None   # 3x3 N at zero offset

    def matches(self, shape: tuple) -> bool:
        expect = (self.mesh.nx, self.mesh.ny) if self.mesh.nz == 1 \
            else (self.mesh.nx, self.mesh.ny, self.mesh.nz)
        return tuple(shape[1:]) == expect


def build_demag_kernel(mesh: MeshSpec, mode: DemagMode = DemagMode.FULL_FFT,
                       ) -> DemagKernel:
    """Build the demag operator: Newell tensor on the padded grid,
    transformed once (FULL_FFT), or the analytic local kernel."""
    if mode is not DemagMode.FULL_FFT:
        n0 = newell_tensor(1, 1, 1, mesh.dx, mesh.dy, mesh.dz)
        self_n = np.array([
            [n0["xx"][0, 0, 0], n0["xy"][0, 0, 0], n0["xz"][0, 0, 0]],
            [n0["xy"][0, 0, 0], n0["yy"][0, 0, 0], n0["yz"][0, 0, 0]],
            [n0["xz"][0, 0, 0], n0["yz"][0, 0, 0], n0["zz"][0, 0, 0]]])
        return DemagKernel(mode=mode, mesh=mesh, self_tensor=self_n)

    nx, ny, nz = mesh.nx, mesh.ny, mesh.nz
    px = next_fast_len(2 * nx - 1)
    py = next_fast_len(2 * ny - 1)
    pz = 1 if nz == 1 else next_fast_len(2 * nz - 1)
    est_bytes = 6 * px * py * pz * 8
    if est_bytes > 8e9:
        raise MemoryError(
            f"padded demag grid {px}x{py}x{pz} needs about "
            f"{est_bytes / 1e9:.1f} GB; refusing to build")

    comps = newell_tensor(nx, ny, nz, mesh.dx, mesh.dy, mesh.dz)
    self_n = np.array([
        [comps["xx"][nx - 1, ny - 1, nz - 1], comps["xy"][nx - 1, ny - 1, nz - 1],
         comps["xz"][nx - 1, ny - 1, nz - 1]],
        [comps["xy"][nx - 1, ny - 1, nz - 1], comps["yy"][nx - 1, ny - 1, nz - 1],
         comps["yz"][nx - 1, ny - 1, nz - 1]],
        [comps["xz"][nx - 1, ny - 1, nz - 1], comps["yz"][nx - 1, ny - 1, nz - 1],
         comps["zz"][nx - 1, ny - 1, nz - 1]]])

    # circulant embedding: offset o lives at index o mod P
    ix = np.arange(-(nx - 1), nx) % px
    iy = np.arange(-(ny - 1), ny) % py
    iz = np.arange(-(nz - 1), nz) % pz
    spectra = {}
    names = ("xx", "yy", "zz", "xy") if nz == 1 else \
        ("xx", "yy", "zz", "xy", "xz", "yz")
    for name in names:
        pad = np.zeros((px, py, pz))
        pad[np.ix_(ix, iy, iz)] = comps[name]
        if nz == 1:
            spec = torch.fft.rfft2(torch.from_numpy(pad[:, :, 0]))
        else:
            spec = torch.fft.rfftn(torch.from_numpy(pad), dim=(0, 1, 2))
        # kernels are even (xx/yy/zz) or odd-odd (xy/...) so spectra are real
        spectra[name] = spec.real.contiguous()
    return DemagKernel(mode=mode, mesh=mesh, spectra=spectra,
                       pad_shape=(px, py, pz), self_tensor=self_n)


def demag_field(m: np.ndarray, kernel: DemagKernel,
                ms_grid: np.ndarray) -> np.ndarray:
    """Demag field H_d (A/m) of magnetization Ms*m.

    m is (3, nx, ny) or (3, nx, ny, nz); ms_grid matches the spatial shape
    (zero on vacuum cells).
    """
    if not kernel.matches(m.shape):
        raise ValueError(f"kernel built for mesh {kernel.mesh}, "
                         f"got field of shape {m.shape}")
    if kernel.mode is DemagMode.NONE:
        return np.zeros_like(m)
    mag = m * ms_grid
    if kernel.mode is DemagMode.THIN_FILM_LOCAL:
        out = np.zeros_like(m)
        out[2] = -mag[2]
        return out

    px, py, pz = kernel.pad_shape
    if kernel.mesh.nz == 1:
        buf = np.zeros((3, px, py))
        buf[:, :m.shape[1], :m.shape[2]] = mag
        mf = torch.fft.rfft2(torch.from_numpy(buf))
        k = kernel.spectra
        hx = -(k["xx"] * mf[0] + k["xy"] * mf[1])
        hy = -(k["xy"] * mf[0] + k["yy"] * mf[1])
        hz = -(k["zz"] * mf[2])
        hf = torch.stack((hx, hy, hz))
        out = torch.fft.irfft2(hf, s=(px, py)).numpy()
        return np.ascontiguousarray(out[:, :m.shape[1], :m.shape[2]])

    buf = np.zeros((3, px, py, pz))
    buf[:, :m.shape[1], :m.shape[2], :m.shape[3]] = mag
    mf = torch.fft.rfftn(torch.from_numpy(buf), dim=(1, 2, 3))
    k = kernel.spectra
    hx = -(k["xx"] * mf[0] + k["xy"] * mf[1] + k["xz"] * mf[2])
    hy = -(k["xy"] * mf[0] + k["yy"] * mf[1] + k["yz"] * mf[2])
    hz = -(k["xz"] * mf[0] + k["yz"] * mf[1] + k["zz"] * mf[2])
    hf = torch.stack((hx, hy, hz))
    out = torch.fft.irfftn(hf, s=(px, py, pz), dim=(1, 2, 3)).numpy()
    return np.ascontiguousarray(
        out[:, :m.shape[1], :m.shape[2], :m.shape[3]])


# ---------------------------------------------------------------------------
# Per-cell parameter grids
# ---------------------------------------------------------------------------

def _harmonic(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    s = a + b
    out = np.zeros_like(a)
    nz = s > 0
    out[nz] = 2.0 * a[nz] * b[nz] / s[nz]
    return out


@dataclass
class CellGrids:
    """Precomputed per-cell material arrays for one labeled mesh."""

    active: np.ndarray        # bool (nx, ny)
    region: np.ndarray        # int8 (nx, ny)
    ms: np.ndarray            # A/m, zero on vacuum
    cxm: np.ndarray           # exchange coupling to -x neighbor, A/m units
    cxp: np.ndarray
    cym: np.ndarray
    cyp: np.ndarray
    au: np.ndarray            # 2*Ku/(mu0*Ms)
    u: np.ndarray             # easy axis, (3, nx, ny)
    aperp: np.ndarray         # 2*Ku_perp/(mu0*Ms)
    aextra_unit: np.ndarray   # 2/(mu0*Ms)
    ku: np.ndarray            # J/m^3 (for energies)
    ku_perp: np.ndarray


def build_cell_grids(lm: LabeledMesh, mat: MaterialMap) -> CellGrids:
    mat.validate_coverage(lm.labels_present())
    nx, ny = lm.labels.shape
    active = lm.active_mask
    ms = np.zeros((nx, ny))
    a_ex = np.zeros((nx, ny))
    au = np.zeros((nx, ny))
    aperp = np.zeros((nx, ny))
    aextra_unit = np.zeros((nx, ny))
    ku = np.zeros((nx, ny))
    ku_perp = np.zeros((nx, ny))
    u = np.zeros((3, nx, ny))
    for lab in lm.labels_present():
        sel = lm.labels == lab
        p = mat.magnet(lab)
        ms[sel] = p.ms
        a_ex[sel] = p.a_ex
        au[sel] = 2.0 * p.ku / (MU0 * p.ms)
        aperp[sel] = 2.0 * p.ku_perp / (MU0 * p.ms)
        aextra_unit[sel] = 2.0 / (MU0 * p.ms)
        ku[sel] = p.ku
        ku_perp[sel] = p.ku_perp
        for c in range(3):
            u[c][sel] = p.easy_axis[c]

    # face exchange constants: harmonic mean of A across the face (equal to
    # the plain A inside one material), zero at vacuum faces (free
    # boundaries). The local 1/Ms prefactor makes the coupling exactly
    # energy-consistent in the Ms-weighted metric.
    w = np.zeros((nx, ny))
    w[active] = a_ex[active]
    dx_m = lm.spec.dx * 1e-9
    dy_m = lm.spec.dy * 1e-9

    def coupling(shifted_w, axis_d):
        wf = _harmonic(w, shifted_w)
        c = np.zeros((nx, ny))
        c[active] = 2.0 * wf[active] / (MU0 * ms[active] * axis_d * axis_d)
        return c

    wxm = np.zeros_like(w)
    wxm[1:, :] = w[:-1, :]
    wxp = np.zeros_like(w)
    wxp[:-1, :] = w[1:, :]
    wym = np.zeros_like(w)
    wym[:, 1:] = w[:, :-1]
    wyp = np.zeros_like(w)
    wyp[:, :-1] = w[:, 1:]
    return CellGrids(
        active=active, region=lm.labels.astype(np.int8), ms=ms,
        cxm=coupling(wxm, dx_m), cxp=coupling(wxp, dx_m),
        cym=coupling(wym, dy_m), cyp=coupling(wyp, dy_m),
        au=au, u=u, aperp=aperp, aextra_unit=aextra_unit,
        ku=ku, ku_perp=ku_perp)


def k_extra_lut(k_extra: dict | None) -> np.ndarray:
    """Per-region clocked anisotropy levels as a lookup vector."""
    lut = np.zeros(len(RegionLabel))
    if k_extra:
        for lab, level in k_extra.items():
            if level < 0:
                raise ValueError("clocked anisotropy must be non-negative")
            lut[int(lab)] = level
    return lut


# ---------------------------------------------------------------------------
# Fused pointwise kernels
# ---------------------------------------------------------------------------

@numba.njit(cache=True, fastmath=False)
def _local_field_kernel(m, hd, cxm, cxp, cym, cyp, au, u, aperp,
                        aextra_unit, kex_lut, region, active, out):
    """out = H_exchange + H_anisotropy + hd (hd may be zeros)."""
    nx, ny = active.shape
    for i in range(nx):
        for j in range(ny):
            if not active[i, j]:
                out[0, i, j] = 0.0
                out[1, i, j] = 0.0
                out[2, i, j] = 0.0
                continue
            mx = m[0, i, j]
            my = m[1, i, j]
            mz = m[2, i, j]
            hx = hd[0, i, j]
            hy = hd[1, i, j]
            hz = hd[2, i, j]
            c = cxm[i, j]
            if c != 0.0:
                hx += c * (m[0, i - 1, j] - mx)
                hy += c * (m[1, i - 1, j] - my)
                hz += c * (m[2, i - 1, j] - mz)
            c = cxp[i, j]
            if c != 0.0:
                hx += c * (m[0, i + 1, j] - mx)
                hy += c * (m[1, i + 1, j] - my)
                hz += c * (m[2, i + 1, j] - mz)
            c = cym[i, j]
            if c != 0.0:
                hx += c * (m[0, i, j - 1] - mx)
                hy += c * (m[1, i, j - 1] - my)
                hz += c * (m[2, i, j - 1] - mz)
            c = cyp[i, j]
            if c != 0.0:
                hx += c * (m[0, i, j + 1] - mx)
                hy += c * (m[1, i, j + 1] - my)
                hz += c * (m[2, i, j + 1] - mz)
            proj = mx * u[0, i, j] + my * u[1, i, j] + mz * u[2, i, j]
            a = au[i, j] * proj
            hx += a * u[0, i, j]
            hy += a * u[1, i, j]
            hz += a * u[2, i, j]
            hz += (aperp[i, j] + aextra_unit[i, j] * kex_lut[region[i, j]]) * mz
            out[0, i, j] = hx
            out[1, i, j] = hy
            out[2, i, j] = hz


@numba.njit(cache=True, fastmath=False)
def _llg_kernel(m, h, alpha, active, gamma, out):
    nx, ny = active.shape
    for i in range(nx):
        for j in range(ny):
            if not active[i, j]:
                out[0, i, j] = 0.0
                out[1, i, j] = 0.0
                out[2, i, j] = 0.0
                continue
            mx = m[0, i, j]
            my = m[1, i, j]
            mz = m[2, i, j]
            hx = h[0, i, j]
            hy = h[1, i, j]
            hz = h[2, i, j]
            px = my * hz - mz * hy
            py = mz * hx - mx * hz
            pz = mx * hy - my * hx
            qx = my * pz - mz * py
            qy = mz * px - mx * pz
            qz = mx * py - my * px
            a = alpha[i, j]
            pref = -gamma / (1.0 + a * a)
            out[0, i, j] = pref * (px + a * qx)
            out[1, i, j] = pref * (py + a * qy)
            out[2, i, j] = pref * (pz + a * qz)


@numba.njit(cache=True)
def _renormalize(m, active):
    nx, ny = active.shape
    worst = 0.0
    for i in range(nx):
        for j in range(ny):
            if not active[i, j]:
                continue
            n = math.sqrt(m[0, i, j] ** 2 + m[1, i, j] ** 2 + m[2, i, j] ** 2)
            dev = abs(n - 1.0)
            if dev > worst:
                worst = dev
            inv = 1.0 / n
            m[0, i, j] *= inv
            m[1, i, j] *= inv
            m[2, i, j] *= inv
    return worst


@numba.njit(cache=True)
def _max_abs(arr):
    flat = arr.ravel()
    worst = 0.0
    for i in range(flat.size):
        v = abs(flat[i])
        if v > worst:
            worst = v
    return worst


class FieldEvaluator:
    """Bundles mesh, materials, and demag kernel into a fast H_eff/RHS path."""

    def __init__(self, lm: LabeledMesh, mat: MaterialMap, kernel: DemagKernel,
                 alpha_grid: np.ndarray | None = None):
        if lm.spec.nz != 1:
            raise ValueError("the device evaluator expects a single-layer mesh")
        if not kernel.matches((3, lm.spec.nx, lm.spec.ny)):
            raise ValueError("demag kernel does not match this mesh")
        self.lm = lm
        self.mat = mat
        self.kernel = kernel
        self.grids = build_cell_grids(lm, mat)
        self.alpha = alpha_grid if alpha_grid is not None else \
            _alpha_from_materials(lm, mat)
        self.cell_volume = lm.spec.cell_volume_m3
        nx, ny = lm.labels.shape
        if kernel.mode is DemagMode.FULL_FFT:
            px, py, _ = kernel.pad_shape
            self._pad = np.zeros((3, px, py))
        self._hd = np.zeros((3, nx, ny))
        self._h = np.zeros((3, nx, ny))

    def demag_into(self, m: np.ndarray) -> np.ndarray:
        k = self.kernel
        if k.mode is DemagMode.NONE:
            self._hd[:] = 0.0
        elif k.mode is DemagMode.THIN_FILM_LOCAL:
            self._hd[0] = 0.0
            self._hd[1] = 0.0
            np.multiply(m[2], -self.grids.ms, out=self._hd[2])
        else:
            px, py, _ = k.pad_shape
            nx, ny = m.shape[1:]
            np.multiply(m, self.grids.ms, out=self._pad[:, :nx, :ny])
            mf = torch.fft.rfft2(torch.from_numpy(self._pad))
            ks = k.spectra
            hx = -(ks["xx"] * mf[0] + ks["xy"] * mf[1])
            hy = -(ks["xy"] * mf[0] + ks["yy"] * mf[1])
            hz = -(ks["zz"] * mf[2])
            out = torch.fft.irfft2(torch.stack((hx, hy, hz)), s=(px, py))
            self._hd[:] = out.numpy()[:, :nx, :ny]
        return self._hd

    def h_eff(self, m: np.ndarray, kex_lut: np.ndarray) -> np.ndarray:
        g = self.grids
        hd = self.demag_into(m)
        _local_field_kernel(m, hd, g.cxm, g.cxp, g.cym, g.cyp, g.au, g.u,
                            g.aperp, g.aextra_unit, kex_lut, g.region,
                            g.active, self._h)
        return self._h

    def rhs(self, m: np.ndarray, kex_lut: np.ndarray, gamma: float,
            out: np.ndarray) -> None:
        h = self.h_eff(m, kex_lut)
        _llg_kernel(m, h, self.alpha, self.grids.active, gamma, out)

    def energy(self, m: np.ndarray, kex_lut: np.ndarray) -> float:
        return total_energy_from_grids(m, self.grids, self.kernel,
                                       kex_lut, self.cell_volume)


def _alpha_from_materials(lm: LabeledMesh, mat: MaterialMap) -> np.ndarray:
    from .geometry import build_damping_map
    return build_damping_map(lm, mat)


# ---------------------------------------------------------------------------
# Functional interfaces
# ---------------------------------------------------------------------------

def exchange_field(m: np.ndarray, lm: LabeledMesh,
                   mat: MaterialMap) -> np.ndarray:
    """Six-neighbor finite-difference exchange field with free boundaries."""
    g = build_cell_grids(lm, mat)
    out = np.zeros_like(m)
    zeros = np.zeros_like(m)
    lut = np.zeros(len(RegionLabel))
    noa = np.zeros_like(g.au)
    _local_field_kernel(m, zeros, g.cxm, g.cxp, g.cym, g.cyp, noa, g.u,
                        noa, noa, lut, g.region, g.active, out)
    return out


def anisotropy_field(m: np.ndarray, lm: LabeledMesh, mat: MaterialMap,
                     k_extra: dict | None = None) -> np.ndarray:
    """Uniaxial anisotropy field: static easy axis, static z term, and the
    clocked strain term along z."""
    g = build_cell_grids(lm, mat)
    out = np.zeros_like(m)
    zeros = np.zeros_like(m)
    noc = np.zeros_like(g.cxm)
    _local_field_kernel(m, zeros, noc, noc, noc, noc, g.au, g.u,
                        g.aperp, g.aextra_unit, k_extra_lut(k_extra),
                        g.region, g.active, out)
    return out


def effective_field(m: np.ndarray, lm: LabeledMesh, mat: MaterialMap,
                    kernel: DemagKernel,
                    k_extra: dict | None = None) -> np.ndarray:
    """H_eff = H_exchange + H_anisotropy + H_demag."""
    g = build_cell_grids(lm, mat)
    hd = demag_field(m, kernel, g.ms)
    out = np.zeros_like(m)
    _local_field_kernel(m, hd, g.cxm, g.cxp, g.cym, g.cyp, g.au, g.u,
                        g.aperp, g.aextra_unit, k_extra_lut(k_extra),
                        g.region, g.active, out)
    return out


def total_energy_from_grids(m: np.ndarray, g: CellGrids, kernel: DemagKernel,
                            kex_lut: np.ndarray, cell_volume: float) -> float:
    act = g.active
    # exchange: -mu0/2 sum Ms m . H_ex (bilinear, symmetric weights)
    hex_ = np.zeros_like(m)
    zeros = np.zeros_like(m)
    noa = np.zeros_like(g.au)
    lut0 = np.zeros(len(RegionLabel))
    _local_field_kernel(m, zeros, g.cxm, g.cxp, g.cym, g.cyp, noa, g.u,
                        noa, noa, lut0, g.region, act, hex_)
    e_ex = -0.5 * MU0 * np.sum((g.ms * np.sum(m * hex_, axis=0))[act])

    proj = np.sum(m * g.u, axis=0)
    kex_grid = kex_lut[g.region]
    e_an = np.sum((g.ku * (1.0 - proj ** 2)
                   + (g.ku_perp + kex_grid) * (1.0 - m[2] ** 2))[act])

    hd = demag_field(m, kernel, g.ms)
    e_d = -0.5 * MU0 * np.sum((g.ms * np.sum(m * hd, axis=0))[act])
    return float((e_ex + e_an + e_d) * cell_volume)


def total_energy(m: np.ndarray, lm: LabeledMesh, mat: MaterialMap,
                 kernel: DemagKernel, k_extra: dict | None = None) -> float:
    """Total energy in joules (anisotropy relative to its easy-axis
    ground state; demag with the 1/2 self-consistency factor)."""
    g = build_cell_grids(lm, mat)
    return total_energy_from_grids(m, g, kernel, k_extra_lut(k_extra),
                                   lm.spec.cell_volume_m3)
