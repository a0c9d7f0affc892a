import numpy as np
import pytest

from spinfork.dynamics import TraceRecord
from spinfork.geometry import RegionLabel
from spinfork.transducers import (CalibrationError, ClockEntry, ClockSchedule,
                                  calibrate_t_det, clock_anisotropy_at,
                                  detect_output, encode_logic,
                                  majority_reference, standard_schedule)


def test_encode_logic():
    assert encode_logic(0) == (1.0, 0.0, 0.0)
    assert encode_logic(1) == (-1.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        encode_logic(2)


def test_encode_decode_round_trip():
    from spinfork.transducers import decode_mx
    for bit in (0, 1):
        assert decode_mx(encode_logic(bit)[0]) == bit


@pytest.mark.parametrize("bits,expect", [
    ((0, 0, 0), 0), ((0, 0, 1), 0), ((0, 1, 0), 0), ((1, 0, 0), 0),
    ((1, 1, 0), 1), ((1, 0, 1), 1), ((0, 1, 1), 1), ((1, 1, 1), 1),
])
def test_majority_reference(bits, expect):
    assert majority_reference(*bits) == expect


def test_majority_reference_rejects_non_bits():
    with pytest.raises(ValueError):
        majority_reference(0, 1, 2)


# ---------------------------------------------------------------------------
# clock schedule
# ---------------------------------------------------------------------------

def test_standard_schedule_trapezoid():
    sched = standard_schedule(k_level=2.0e5, t_det=0.8e-9, t_read=3.2e-9,
                              rise_time=20e-12)
    k = clock_anisotropy_at(0.4e-9, sched)
    assert k[RegionLabel.ME_CELL_OUT] == pytest.approx(2.0e5)
    assert k[RegionLabel.ME_CELL_IN1] == pytest.approx(2.0e5)
    # output released after t_det + rise
    k2 = clock_anisotropy_at(0.8e-9 + 21e-12, sched)
    assert k2[RegionLabel.ME_CELL_OUT] == 0.0
    # inputs still held late in the run
    k3 = clock_anisotropy_at(3.0e-9, sched)
    assert k3[RegionLabel.ME_CELL_IN1] == pytest.approx(2.0e5)
    # mid-fall value
    k4 = clock_anisotropy_at(0.8e-9 + 10e-12, sched)
    assert k4[RegionLabel.ME_CELL_OUT] == pytest.approx(1.0e5)


def test_clock_zero_before_turn_on():
    e = ClockEntry(RegionLabel.ME_CELL_IN1, t_on=0.0, t_off=1e-9,
                   k_level=2e5, rise_time=20e-12)
    assert e.level_at(-1e-12) == 0.0
    assert e.level_at(0.0) == 0.0
    assert e.level_at(10e-12) == pytest.approx(1e5)
    assert e.level_at(20e-12) == pytest.approx(2e5)


def test_clock_continuity_and_slope_bound():
    sched = standard_schedule(2.0e5, 0.8e-9, 3.2e-9, rise_time=20e-12)
    ts = np.linspace(-0.05e-9, 1.2e-9, 20011)
    k = np.array([sched.entries[-1].level_at(t) for t in ts])
    dk = np.abs(np.diff(k) / np.diff(ts))
    assert dk.max() <= 2.0e5 / 20e-12 * (1 + 1e-9)
    # piecewise linear implies no jumps at this sampling
    assert np.max(np.abs(np.diff(k))) <= 2.0e5 / 20e-12 * np.max(np.diff(ts)) * 1.01


def test_schedule_invariants():
    with pytest.raises(ValueError):
        ClockSchedule(entries=(ClockEntry(RegionLabel.ME_CELL_IN1, 1e-9,
                                          0.5e-9, 2e5, 20e-12),),
                      t_det=0.5e-9, t_read=3e-9)
    with pytest.raises(ValueError):
        ClockSchedule(entries=(ClockEntry(RegionLabel.ME_CELL_OUT, -20e-12,
                                          0.8e-9, 2e5, 20e-12),),
                      t_det=0.6e-9, t_read=3e-9)
    with pytest.raises(ValueError):
        clock_anisotropy_at(-1e-12, standard_schedule(2e5, 0.8e-9, 3e-9))


def test_schedule_with_t_det_rebinds_output():
    sched = standard_schedule(2e5, 0.8e-9, 3.2e-9)
    moved = sched.with_t_det(0.9e-9)
    assert moved.t_det == pytest.approx(0.9e-9)
    out = [e for e in moved.entries
           if e.region is RegionLabel.ME_CELL_OUT][0]
    assert out.t_off == pytest.approx(0.9e-9)


# ---------------------------------------------------------------------------
# detection
# ---------------------------------------------------------------------------

def _trace(times, mx):
    avg = np.zeros((len(times), 3))
    avg[:, 0] = mx
    return TraceRecord(name="output", times=np.asarray(times), avg=avg)


def test_detect_constant_plus_x():
    tr = _trace(np.linspace(0, 3.2e-9, 11), 1.0)
    g = detect_output(tr, 3.2e-9)
    assert g.bit == 0 and g.margin == pytest.approx(1.0) and not g.weak


def test_detect_weak_margin_flagged():
    tr = _trace(np.linspace(0, 3.2e-9, 11), -0.5)
    g = detect_output(tr, 3.2e-9)
    assert g.bit == 1 and g.weak


def test_detect_missing_sample_rejected():
    tr = _trace(np.linspace(0, 1.0e-9, 11), 1.0)
    with pytest.raises(ValueError):
        detect_output(tr, 3.2e-9)


# ---------------------------------------------------------------------------
# detection-time calibration
# ---------------------------------------------------------------------------

def _theta_traces(curves, times):
    out = {}
    for name, th in curves.items():
        th = np.asarray(th)
        avg = np.zeros((len(times), 3))
        avg[:, 0] = np.sin(np.radians(th))
        avg[:, 2] = np.cos(np.radians(th))
        out[name] = TraceRecord(name=name, times=times, avg=avg)
    return out


def test_calibrate_t_det_crossing_point():
    times = np.linspace(0, 1.4e-9, 281)
    tns = times * 1e9
    # three arrivals that converge near 0.8 ns
    a = 20 * np.exp(-((tns - 0.75) / 0.35) ** 2)
    b = 20 * np.exp(-((tns - 0.80) / 0.35) ** 2)
    c = 20 * np.exp(-((tns - 0.85) / 0.35) ** 2)
    traces = _theta_traces({"arm1": a, "arm2": b, "arm3": c}, times)
    t_det = calibrate_t_det(traces)
    assert 0.75e-9 <= t_det <= 0.85e-9


def test_calibrate_identical_traces_earliest_active():
    times = np.linspace(0, 1.4e-9, 281)
    th = np.where(times > 0.5e-9, 15.0, 0.0)
    traces = _theta_traces({"a": th, "b": th, "c": th}, times)
    t_det = calibrate_t_det(traces)
    i_first = int(np.argmax(th > 1.0))
    assert t_det == pytest.approx(times[i_first])


def test_calibrate_silent_trace_errors():
    times = np.linspace(0, 1.4e-9, 281)
    th = 20 * np.exp(-((times * 1e9 - 0.8) / 0.3) ** 2)
    traces = _theta_traces({"a": th, "b": th, "c": np.zeros_like(th)}, times)
    with pytest.raises(CalibrationError):
        calibrate_t_det(traces)
