"""Independent reference implementations used to pin expected test values.

Everything here is deliberately scalar / brute force: per-pair Newell
demag summation with math-module functions, a hand-rolled exchange stencil,
and closed-form precession. These stay independent of the vectorized FFT
and numba paths they validate.
"""

from __future__ import annotations

from math import asinh, atan, pi, sqrt

import numpy as np

_EPS = 1e-18


def newell_f(x: float, y: float, z: float) -> float:
    x, y, z = abs(x), abs(y), abs(z)
    r = sqrt(x * x + y * y + z * z)
    return (y / 2 * (z * z - x * x) * asinh(y / (sqrt(x * x + z * z) + _EPS))
            + z / 2 * (y * y - x * x) * asinh(z / (sqrt(x * x + y * y) + _EPS))
            - x * y * z * atan(y * z / (x * r + _EPS))
            + (2 * x * x - y * y - z * z) * r / 6)


def newell_g(x: float, y: float, z: float) -> float:
    z = abs(z)
    r = sqrt(x * x + y * y + z * z)
    return (x * y * z * asinh(z / (sqrt(x * x + y * y) + _EPS))
            + y / 6 * (3 * z * z - y * y) * asinh(x / (sqrt(y * y + z * z) + _EPS))
            + x / 6 * (3 * z * z - x * x) * asinh(y / (sqrt(x * x + z * z) + _EPS))
            - z ** 3 / 6 * atan(x * y / (z * r + _EPS))
            - z * y * y / 2 * atan(x * z / (y * r + _EPS))
            - z * x * x / 2 * atan(y * z / (x * r + _EPS))
            - x * y * r / 3)


def _second_diff(func, X, Y, Z, d):
    w = (1.0, -2.0, 1.0)
    acc = 0.0
    for a in (-1, 0, 1):
        for b in (-1, 0, 1):
            for c in (-1, 0, 1):
                acc += w[a + 1] * w[b + 1] * w[c + 1] * \
                    func(X + a * d[0], Y + b * d[1], Z + c * d[2])
    return -acc / (4 * pi * d[0] * d[1] * d[2])


def newell_tensor_at(offset, d) -> np.ndarray:
    """Full 3x3 demag tensor N for one cell-pair offset (nm units)."""
    X, Y, Z = offset
    dx, dy, dz = d
    nxx = _second_diff(newell_f, X, Y, Z, (dx, dy, dz))
    nyy = _second_diff(newell_f, Y, X, Z, (dy, dx, dz))
    nzz = _second_diff(newell_f, Z, Y, X, (dz, dy, dx))
    nxy = _second_diff(newell_g, X, Y, Z, (dx, dy, dz))
    nxz = _second_diff(newell_g, X, Z, Y, (dx, dz, dy))
    nyz = _second_diff(newell_g, Y, Z, X, (dy, dz, dx))
    return np.array([[nxx, nxy, nxz], [nxy, nyy, nyz], [nxz, nyz, nzz]])


def brute_force_demag(m: np.ndarray, ms: np.ndarray, d) -> np.ndarray:
    """O(N^2) pairwise demag field for a (3, nx, ny[, nz]) field."""
    if m.ndim == 3:
        m = m[..., None]
        ms = ms[..., None]
        squeeze = True
    else:
        squeeze = False
    _, nx, ny, nz = m.shape
    h = np.zeros_like(m)
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                acc = np.zeros(3)
                for i2 in range(nx):
                    for j2 in range(ny):
                        for k2 in range(nz):
                            n = newell_tensor_at(
                                ((i - i2) * d[0], (j - j2) * d[1],
                                 (k - k2) * d[2]), d)
                            acc -= n @ (ms[i2, j2, k2] * m[:, i2, j2, k2])
                h[:, i, j, k] = acc
    return h[..., 0] if squeeze else h


def stencil_exchange(m: np.ndarray, a_ex: float, ms: float,
                     dx_m: float, dy_m: float) -> np.ndarray:
    """Plain 4-neighbor exchange field with free boundaries, uniform
    material, written as an explicit loop."""
    mu0 = 4e-7 * pi
    c_x = 2 * a_ex / (mu0 * ms * dx_m * dx_m)
    c_y = 2 * a_ex / (mu0 * ms * dy_m * dy_m)
    _, nx, ny = m.shape
    h = np.zeros_like(m)
    for i in range(nx):
        for j in range(ny):
            for di, dj, c in ((-1, 0, c_x), (1, 0, c_x),
                              (0, -1, c_y), (0, 1, c_y)):
                i2, j2 = i + di, j + dj
                if 0 <= i2 < nx and 0 <= j2 < ny:
                    h[:, i, j] += c * (m[:, i2, j2] - m[:, i, j])
    return h


def precession_phase(h_amps: float, gamma: float, t: float) -> float:
    """Azimuthal phase advance of undamped precession about +z
    (dm/dt = -gamma m x H with H = H z_hat rotates m_xy counterclockwise)."""
    return gamma * h_amps * t
