"""Magneto-electric cell logic protocol.

Logic values are phase-encoded: bit 0 is a cell initially along +x, bit 1
along -x; the spin waves they launch differ by a pi phase. Each cell's
strain anisotropy follows a trapezoidal clock: a linear rise over rise_time
starting at t_on, a hold at k_level, and a linear fall after t_off. Input
cells stay clocked through the whole run; the output cell's release at
t_det converts the incident wave phase into a stored +-x state, which is
read out as the sign of its average mx.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import ME_INPUT_LABELS, RegionLabel


def encode_logic(bit: int) -> tuple[float, float, float]:
    """Initial in-plane direction of a cell storing the given bit."""
    if bit not in (0, 1):
        raise ValueError(f"logic bit must be 0 or 1, got {bit!r}")
    return (1.0, 0.0, 0.0) if bit == 0 else (-1.0, 0.0, 0.0)


def decode_mx(mx: float) -> int:
    return 0 if mx > 0 else 1


def majority_reference(a: int, b: int, c: int) -> int:
    """Truth oracle: majority of three bits."""
    for bit in (a, b, c):
        if bit not in (0, 1):
            raise ValueError(f"logic bits must be 0 or 1, got {bit!r}")
    return (a & b) | (b & c) | (a & c)


@dataclass(frozen=True)
class ClockEntry:
    """Strain clock of one ME cell region."""

    region: RegionLabel
    t_on: float
    t_off: float
    k_level: float           # J/m^3
    rise_time: float         # s

    def level_at(self, t: float) -> float:
        if self.k_level == 0.0 or t <= self.t_on:
            return 0.0
        if t < self.t_on + self.rise_time:
            return self.k_level * (t - self.t_on) / self.rise_time
        if t <= self.t_off:
            return self.k_level
        if t < self.t_off + self.rise_time:
            return self.k_level * (1.0 - (t - self.t_off) / self.rise_time)
        return 0.0


@dataclass(frozen=True)
class ClockSchedule:
    """Per-cell strain clocks plus the detection and readout times."""

    entries: tuple
    t_det: float             # output release time
    t_read: float            # readout time

    def __post_init__(self):
        for e in self.entries:
            if not e.t_on < e.t_off <= self.t_read:
                raise ValueError(
                    f"clock entry for {e.region.name} violates "
                    f"t_on < t_off <= t_read")
        out = [e for e in self.entries if e.region is RegionLabel.ME_CELL_OUT]
        if out and abs(out[0].t_off - self.t_det) > 1e-18:
            raise ValueError("t_det must equal the output cell's t_off")

    def k_extra_at(self, t: float) -> dict:
        return {e.region: e.level_at(t) for e in self.entries}

    def k_extra_lut_at(self, t: float) -> np.ndarray:
        lut = np.zeros(len(RegionLabel))
        for e in self.entries:
            lut[int(e.region)] = e.level_at(t)
        return lut

    def event_times(self) -> list[float]:
        times = set()
        for e in self.entries:
            times.update((e.t_on, e.t_on + e.rise_time,
                          e.t_off, e.t_off + e.rise_time))
        times.update((self.t_det, self.t_read))
        return sorted(tm for tm in times if tm >= 0.0)

    def with_t_det(self, t_det: float) -> "ClockSchedule":
        entries = tuple(
            replace(e, t_off=t_det) if e.region is RegionLabel.ME_CELL_OUT
            else e for e in self.entries)
        return ClockSchedule(entries=entries, t_det=t_det, t_read=self.t_read)


def standard_schedule(k_level: float, t_det: float, t_read: float,
                      rise_time: float = 20e-12,
                      active_inputs=ME_INPUT_LABELS,
                      hold_output: bool = True) -> ClockSchedule:
    """The gate's three-phase clock.

    Active input cells switch on at t=0 and stay strained until readout
    (releasing them would launch a second wave). The output cell is held
    from t=0 (its rise is placed just before zero) and released at t_det.
    """
    entries = [ClockEntry(region=lab, t_on=0.0, t_off=t_read,
                          k_level=k_level, rise_time=rise_time)
               for lab in active_inputs]
    if hold_output:
        entries.append(ClockEntry(region=RegionLabel.ME_CELL_OUT,
                                  t_on=-rise_time, t_off=t_det,
                                  k_level=k_level, rise_time=rise_time))
    return ClockSchedule(entries=tuple(entries), t_det=t_det, t_read=t_read)


def clock_anisotropy_at(t: float, schedule: ClockSchedule) -> dict:
    """Per-region clocked anisotropy levels (J/m^3) at time t."""
    if t < 0:
        raise ValueError("clock times start at t=0")
    return schedule.k_extra_at(t)


# ---------------------------------------------------------------------------
# Detection
# ---------------------------------------------------------------------------

WEAK_MARGIN = 0.9


@dataclass(frozen=True)
class GateResult:
    """Outcome of one gate run."""

    bit: int
    mx: float                # output-region <mx> at readout
    margin: float            # |<mx>|
    weak: bool
    cell_mx: dict = field(default_factory=dict)


def detect_output(trace, t_read: float) -> GateResult:
    """Read the stored bit from the output cell's trace at t_read."""
    mx = trace.at(t_read, 0)
    margin = abs(mx)
    return GateResult(bit=decode_mx(mx), mx=mx, margin=margin,
                      weak=margin < WEAK_MARGIN)


# ---------------------------------------------------------------------------
# Detection-time calibration
# ---------------------------------------------------------------------------

class CalibrationError(RuntimeError):
    pass


def calibrate_t_det(theta_traces: dict, *, threshold_deg: float = 1.0,
                    window: float = 0.8e-9) -> float:
    """Pick the detection time from three single-arm output angle traces.

    Returns the time, within a window after all three signals have arrived
    (exceeded the activity threshold), where the traces are closest in the
    minimum max-pairwise-difference sense.
    """
    if len(theta_traces) != 3:
        raise ValueError("calibration needs exactly three theta traces")
    names = sorted(theta_traces)
    times = None
    thetas = []
    for name in names:
        tr = theta_traces[name]
        t_arr = np.asarray(tr.times if hasattr(tr, "times") else tr[0])
        th = np.asarray(tr.theta_deg if hasattr(tr, "theta_deg") else tr[1])
        if times is None:
            times = t_arr
        elif len(t_arr) != len(times) or not np.allclose(t_arr, times):
            raise ValueError("theta traces are not on a common time grid")
        thetas.append(th)

    above = [th > threshold_deg for th in thetas]
    for name, ab in zip(names, above):
        if not np.any(ab):
            raise CalibrationError(
                f"trace {name!r} never exceeds the {threshold_deg} deg "
                f"activity threshold (no wave arrived)")
    i_first = int(max(np.argmax(ab) for ab in above))
    in_window = (np.arange(len(times)) >= i_first) \
        & (times <= times[i_first] + window)
    spread = np.max(
        [np.abs(thetas[a] - thetas[b])
         for a in range(3) for b in range(a + 1, 3)], axis=0)
    spread = np.where(in_window, spread, np.inf)
    return float(times[int(np.argmin(spread))])
