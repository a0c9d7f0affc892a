"""Runner configuration: a flat key-value format with dotted sections.

Grammar (one statement per line):

    # comment                blank lines and #-to-end-of-line comments
    key = value              keys are dotted lowercase identifiers
    list values              comma separated: snapshots = 0, 0.8e-9, 3.2e-9

Value types are fixed per key (see KEY_TABLE); unknown keys are rejected.
Booleans accept true/false. The special value ``auto`` is allowed where
noted (clock.k_level derives from the operating voltage, bus length from
the geometry).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any

from .dynamics import IntegratorConfig, Method
from .geometry import ForkSpec, LayoutError
from .materials import (ME_KU_INPLANE, ME_KU_PERP, MEStackParams,
                        OUTPUT_ARM_ALPHA, PRESET_BUS, PRESET_ME_CELL)

SCHEMA_VERSION = 1

SCENARIOS = ("bus_characterization", "single_arm", "truth_table",
             "spacing_sweep", "majority")

MIN_FLAGGED_SPACING = 56.0   # nm; below this, dipolar coupling is a concern


class ConfigError(ValueError):
    pass


def _bool(s: str) -> bool:
    if s.lower() in ("true", "yes", "on", "1"):
        return True
    if s.lower() in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _float_list(s: str) -> tuple:
    return tuple(float(p) for p in s.split(",") if p.strip())


# key -> (parser, default)
KEY_TABLE: dict[str, tuple] = {
    "scenario": (str, "truth_table"),
    "geometry.arm_width": (float, 40.0),
    "geometry.spacing_s": (float, 88.0),
    "geometry.me_cell_length": (float, 80.0),
    "geometry.me_cell_width": (float, 40.0),
    "geometry.output_arm_length": (float, 92.0),
    "geometry.input_arm_length": (float, 40.0),
    "geometry.bend_angle": (float, 45.0),
    "geometry.absorber_length": (float, 200.0),
    "geometry.tail_length": (float, 140.0),
    "bus.length": (float, 1000.0),
    "bus.width": (float, 40.0),
    "materials.bus": (str, PRESET_BUS),
    "materials.me_cell": (str, PRESET_ME_CELL),
    "materials.me_cell.ku": (float, ME_KU_INPLANE),
    "materials.me_cell.ku_perp": (float, ME_KU_PERP),
    "materials.output_arm_alpha": (float, OUTPUT_ARM_ALPHA),
    "solver.method": (str, "rk45"),
    "solver.dt_init": (float, 1e-14),
    "solver.dt_min": (float, 1e-15),
    "solver.dt_max": (float, 1e-12),
    "solver.tol": (float, 1e-7),
    "solver.gamma": (float, 2.211e5),
    "clock.k_level": (str, "auto"),
    "clock.voltage": (float, 0.1),
    "clock.rise_time": (float, 20e-12),
    "clock.t_det": (float, 0.8e-9),
    "clock.autocalibrate": (_bool, True),
    "clock.calib_t_end": (float, 1.4e-9),
    "run.t_end": (float, 3.2e-9),
    "run.record_period": (float, 5e-12),
    "run.workers": (int, 2),
    "run.amplitude_window": (_float_list, (0.0, 3e-9)),
    "demag.mode": (str, "fft"),
    "single_arm.input": (int, 1),
    "majority.bits": (str, "110"),
    "sweep.spacings": (_float_list, (56.0, 64.0, 72.0, 80.0, 88.0, 96.0)),
    "snapshots": (_float_list, (0.0, 0.8e-9, 3.2e-9)),
    "output.dir": (str, "out"),
}


@dataclass(frozen=True)
class ScenarioConfig:
    """Fully validated runner configuration."""

    scenario: str
    fork: ForkSpec
    bus_length: float
    bus_width: float
    bus_preset: str
    me_cell_preset: str
    me_ku: float
    me_ku_perp: float
    output_arm_alpha: float
    solver: IntegratorConfig
    k_level: float | str
    voltage: float
    rise_time: float
    t_det: float
    autocalibrate: bool
    calib_t_end: float
    t_end: float
    record_period: float
    workers: int
    amplitude_window: tuple
    demag_mode: str
    single_arm_input: int
    majority_bits: tuple
    sweep_spacings: tuple
    snapshots: tuple
    outdir: str
    flags: tuple = field(default_factory=tuple)
    echo: dict = field(default_factory=dict)

    def with_overrides(self, **kw) -> "ScenarioConfig":
        return replace(self, **kw)


def _parse_lines(text: str) -> dict[str, Any]:
    values: dict[str, Any] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', "
                              f"got {raw.strip()!r}")
        key, _, val = line.partition("=")
        key = key.strip().lower()
        val = val.strip()
        if key not in KEY_TABLE:
            raise ConfigError(f"line {lineno}: unknown key '{key}'")
        parser, _default = KEY_TABLE[key]
        if key == "clock.k_level" and val.lower() != "auto":
            parsed: Any = float(val)
        else:
            try:
                parsed = parser(val)
            except ValueError as e:
                raise ConfigError(f"line {lineno}: bad value for '{key}': {e}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key '{key}'")
        values[key] = parsed
    return values


def parse_config(text: str) -> ScenarioConfig:
    """Parse and validate a config document, applying defaults."""
    values = {k: d for k, (_p, d) in KEY_TABLE.items()}
    values.update(_parse_lines(text))
    return _build(values)


def apply_overrides(cfg_values: dict, sets: list[str]) -> dict:
    for stmt in sets:
        if "=" not in stmt:
            raise ConfigError(f"--set expects key=value, got {stmt!r}")
        key, _, val = stmt.partition("=")
        key = key.strip().lower()
        if key not in KEY_TABLE:
            raise ConfigError(f"unknown key '{key}'")
        parser, _d = KEY_TABLE[key]
        if key == "clock.k_level" and val.strip().lower() != "auto":
            cfg_values[key] = float(val)
        else:
            cfg_values[key] = parser(val.strip())
    return cfg_values


def parse_config_with_overrides(text: str, sets: list[str] | None = None,
                                **direct) -> ScenarioConfig:
    values = {k: d for k, (_p, d) in KEY_TABLE.items()}
    values.update(_parse_lines(text))
    if sets:
        apply_overrides(values, sets)
    values.update(direct)
    return _build(values)


def _build(v: dict) -> ScenarioConfig:
    flags = []
    if v["scenario"] not in SCENARIOS:
        raise ConfigError(f"scenario: unknown scenario '{v['scenario']}', "
                          f"expected one of {SCENARIOS}")
    try:
        fork = ForkSpec(
            arm_width=v["geometry.arm_width"],
            spacing_s=v["geometry.spacing_s"],
            me_cell_length=v["geometry.me_cell_length"],
            me_cell_width=v["geometry.me_cell_width"],
            output_arm_length=v["geometry.output_arm_length"],
            input_arm_length=v["geometry.input_arm_length"],
            bend_angle=v["geometry.bend_angle"],
            absorber_length=v["geometry.absorber_length"],
            tail_length=v["geometry.tail_length"],
        )
    except LayoutError as e:
        raise ConfigError(f"geometry: {e}")
    # one vacuum row must separate neighboring arms
    if fork.spacing_s - fork.arm_width < 4.0:
        raise ConfigError(
            f"geometry.spacing_s: spacing {fork.spacing_s} nm is below the "
            f"minimum arm clearance (arm_width + 4 nm)")
    if fork.spacing_s < MIN_FLAGGED_SPACING:
        flags.append(
            f"spacing_S={fork.spacing_s} nm is below the {MIN_FLAGGED_SPACING}"
            f" nm dipolar-coupling bound; cells may not switch cleanly")

    method = {"rk45": Method.RK45_ADAPTIVE, "rk4": Method.RK4_FIXED}.get(
        v["solver.method"])
    if method is None:
        raise ConfigError("solver.method: expected 'rk45' or 'rk4'")
    try:
        solver = IntegratorConfig(
            method=method, dt_init=v["solver.dt_init"],
            dt_min=v["solver.dt_min"], dt_max=v["solver.dt_max"],
            tol=v["solver.tol"], gamma=v["solver.gamma"])
    except ValueError as e:
        raise ConfigError(f"solver: {e}")

    if v["demag.mode"] not in ("fft", "local", "none"):
        raise ConfigError("demag.mode: expected fft, local, or none")
    if v["single_arm.input"] not in (1, 2, 3):
        raise ConfigError("single_arm.input: expected 1, 2, or 3")
    bits_s = v["majority.bits"]
    if len(bits_s) != 3 or any(c not in "01" for c in bits_s):
        raise ConfigError("majority.bits: expected three binary digits")
    if len(v["run.amplitude_window"]) != 2:
        raise ConfigError("run.amplitude_window: expected 't0, t1'")
    if v["run.workers"] < 1:
        raise ConfigError("run.workers: must be >= 1")
    if v["clock.t_det"] >= v["run.t_end"]:
        raise ConfigError("clock.t_det: must lie before run.t_end")
    for s in v["sweep.spacings"]:
        if s - fork.arm_width < 4.0:
            raise ConfigError(f"sweep.spacings: S={s} below minimum clearance")
        if s < MIN_FLAGGED_SPACING:
            flags.append(f"sweep spacing S={s} nm below the "
                         f"{MIN_FLAGGED_SPACING} nm bound")

    echo = {k: (list(val) if isinstance(val, tuple) else
                (val if not callable(val) else str(val)))
            for k, val in sorted(v.items())}
    return ScenarioConfig(
        scenario=v["scenario"], fork=fork,
        bus_length=v["bus.length"], bus_width=v["bus.width"],
        bus_preset=v["materials.bus"], me_cell_preset=v["materials.me_cell"],
        me_ku=v["materials.me_cell.ku"],
        me_ku_perp=v["materials.me_cell.ku_perp"],
        output_arm_alpha=v["materials.output_arm_alpha"],
        solver=solver, k_level=v["clock.k_level"], voltage=v["clock.voltage"],
        rise_time=v["clock.rise_time"], t_det=v["clock.t_det"],
        autocalibrate=v["clock.autocalibrate"],
        calib_t_end=v["clock.calib_t_end"],
        t_end=v["run.t_end"], record_period=v["run.record_period"],
        workers=v["run.workers"],
        amplitude_window=tuple(v["run.amplitude_window"]),
        demag_mode=v["demag.mode"], single_arm_input=v["single_arm.input"],
        majority_bits=tuple(int(c) for c in bits_s),
        sweep_spacings=tuple(v["sweep.spacings"]),
        snapshots=tuple(v["snapshots"]), outdir=v["output.dir"],
        flags=tuple(flags), echo=echo)


def resolved_k_level(cfg: ScenarioConfig) -> float:
    """The clock plateau: explicit value, or derived from the voltage."""
    if cfg.k_level != "auto":
        return float(cfg.k_level)
    from .materials import me_anisotropy_from_voltage
    return me_anisotropy_from_voltage(cfg.voltage, MEStackParams())
