"""Post-processing of recorded traces and snapshots into observables.

The central quantity is the in-plane spin-wave amplitude
a = sqrt(mx^2 + my^2), time-averaged per cell over a window; transmission
ratios are ratios of its regional means. Probe spectra and the spatial
wavelength estimate characterize the generated wave packet.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AmplitudeMap:
    """Per-cell time-averaged in-plane amplitude over [t0, t1]."""

    data: np.ndarray          # (nx, ny), >= 0
    window: tuple
    samples: int


@dataclass(frozen=True)
class SpectrumResult:
    """One-sided magnitude spectrum of a probe's mx(t)."""

    freqs: np.ndarray         # Hz
    magnitude: np.ndarray
    source: str


def amplitude_map(recording, window: tuple) -> AmplitudeMap:
    """Average sqrt(mx^2+my^2) per cell over the window.

    recording is either an iterable of (t, m) frames (m of shape
    (3, nx, ny)) or a RunResult whose dense amplitude accumulator was
    enabled for the same window.
    """
    t0, t1 = window
    if t1 <= t0:
        raise ValueError("empty averaging window")
    if hasattr(recording, "amplitude_sum"):
        if recording.amplitude_sum is None:
            raise ValueError("run was recorded without amplitude accumulation")
        if recording.amplitude_samples < 10:
            raise ValueError("need at least 10 samples in the window")
        return AmplitudeMap(
            data=recording.amplitude_sum / recording.amplitude_samples,
            window=window, samples=recording.amplitude_samples)

    acc = None
    n = 0
    for t, m in recording:
        if t0 - 1e-18 <= t <= t1 + 1e-18:
            a = np.sqrt(m[0] ** 2 + m[1] ** 2)
            acc = a if acc is None else acc + a
            n += 1
    if n < 10:
        raise ValueError(f"need at least 10 samples in the window, got {n}")
    return AmplitudeMap(data=acc / n, window=window, samples=n)


def transmission_ratio(amap: AmplitudeMap, from_mask: np.ndarray,
                       to_mask: np.ndarray) -> float:
    """Mean amplitude over to_mask divided by mean over from_mask."""
    if not np.any(from_mask) or not np.any(to_mask):
        raise ValueError("transmission regions must be non-empty")
    a_from = float(np.mean(amap.data[from_mask]))
    a_to = float(np.mean(amap.data[to_mask]))
    if a_from == 0.0:
        raise ZeroDivisionError("zero amplitude in the source region")
    return a_to / a_from


def theta_trace(record) -> np.ndarray:
    """Out-of-plane angle of the averaged magnetization, in degrees."""
    return record.theta_deg


def spectrum(record, window: tuple | None = None,
             component: int = 0) -> SpectrumResult:
    """Tapered DFT magnitude of a probe component with the mean removed."""
    times = record.times
    vals = record.avg[:, component]
    if window is not None:
        sel = (times >= window[0] - 1e-18) & (times <= window[1] + 1e-18)
        times, vals = times[sel], vals[sel]
    if len(times) < 8:
        raise ValueError("too few samples for a spectrum")
    dts = np.diff(times)
    if np.max(np.abs(dts - dts[0])) > 1e-6 * dts[0]:
        raise ValueError("spectrum requires uniform sampling")
    x = vals - np.mean(vals)
    x = x * np.hanning(len(x))
    mag = np.abs(np.fft.rfft(x))
    freqs = np.fft.rfftfreq(len(x), d=float(dts[0]))
    return SpectrumResult(freqs=freqs, magnitude=mag,
                          source=getattr(record, "name", ""))


def estimate_wavelength(x_nm: np.ndarray, profile: np.ndarray) -> float:
    """Wavelength from a spatial mx profile along the bus centerline.

    Returns twice the distance between the two zero crossings that bracket
    the global extremum of the profile. Crossing positions are linearly
    interpolated between samples.
    """
    x_nm = np.asarray(x_nm, dtype=float)
    profile = np.asarray(profile, dtype=float)
    if len(x_nm) != len(profile):
        raise ValueError("profile and coordinates differ in length")
    crossings = []
    for i in range(len(profile) - 1):
        a, b = profile[i], profile[i + 1]
        if a == 0.0:
            crossings.append(x_nm[i])
        elif a * b < 0:
            frac = a / (a - b)
            crossings.append(x_nm[i] + frac * (x_nm[i + 1] - x_nm[i]))
    if profile[-1] == 0.0:
        crossings.append(x_nm[-1])
    crossings = np.unique(np.asarray(crossings))
    if len(crossings) < 2:
        raise ValueError("profile has fewer than two zero crossings")
    # half period = gap between the crossings bracketing the strongest
    # (bracketed) extremum
    best_amp = -1.0
    best_gap = None
    for k in range(len(crossings) - 1):
        sel = (x_nm > crossings[k]) & (x_nm < crossings[k + 1])
        if not np.any(sel):
            continue
        amp = float(np.max(np.abs(profile[sel])))
        if amp > best_amp:
            best_amp = amp
            best_gap = crossings[k + 1] - crossings[k]
    if best_gap is None or best_amp <= 0.0:
        raise ValueError("no extremum bracketed by zero crossings")
    return 2.0 * float(best_gap)
