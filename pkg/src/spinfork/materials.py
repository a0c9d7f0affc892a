"""Magnetic and magneto-electric material constants.

Two materials appear in the device: a Co/Ni multilayer bus with perpendicular
magnetic anisotropy (specified through its net out-of-plane anisotropy field
Hk) and a CoFe/PMN-PT magneto-electric cell stack whose strain response
converts an applied voltage into an extra uniaxial out-of-plane anisotropy.

The bus Hk is a *net* quantity: what remains of the intrinsic anisotropy
after the thin-film demagnetizing field is subtracted. `ku_from_hk` converts
it to an energy density either way:

* ``NET_EFFECTIVE``      -> Ku = mu0*Ms*Hk/2. Use when no separate demag term
                            is applied (the film-local demag is already folded
                            into Hk).
* ``INTRINSIC_WITH_DEMAG`` -> Ku = mu0*Ms*(Hk+Ms)/2. Use together with an
                            explicit demag field (thin-film local kernel or
                            the full FFT convolution); for a uniform film the
                            net out-of-plane stiffness then comes back to Hk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from .geometry import RegionLabel

MU0 = 4.0e-7 * math.pi  # vacuum permeability, T*m/A


class AnisotropyMode(Enum):
    """Interpretation used when converting an anisotropy field to Ku."""

    NET_EFFECTIVE = "net_effective"
    INTRINSIC_WITH_DEMAG = "intrinsic_with_demag"


@dataclass(frozen=True)
class MagnetParams:
    """Magnetic constants of one region.

    ku_perp is an optional additional static uniaxial term along z (interface
    anisotropy). The magneto-electric cell preset uses it to partially
    compensate the cell's own demagnetizing penalty; plain bus regions leave
    it at zero.
    """

    ms: float                      # saturation magnetization, A/m
    a_ex: float                    # exchange constant, J/m
    alpha: float                   # Gilbert damping
    ku: float                      # uniaxial anisotropy along easy_axis, J/m^3
    easy_axis: tuple[float, float, float]
    ku_perp: float = 0.0           # extra uniaxial anisotropy along z, J/m^3

    def __post_init__(self):
        if self.ms <= 0:
            raise ValueError(f"Ms must be positive, got {self.ms}")
        if self.a_ex <= 0:
            raise ValueError(f"exchange constant must be positive, got {self.a_ex}")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {self.alpha}")
        n = math.sqrt(sum(c * c for c in self.easy_axis))
        if abs(n - 1.0) > 1e-9:
            raise ValueError(f"easy_axis must be a unit vector, |u|={n}")


@dataclass(frozen=True)
class MEStackParams:
    """Piezoelectric/magnetostrictive stack constants of an ME cell."""

    lambda_s: float = 200e-6       # magnetostriction
    youngs_modulus: float = 200e9  # Pa
    d31: float = -1000e-12         # m/V
    t_piezo: float = 30e-9         # m
    v_op: float = 0.1              # operating voltage, V

    def __post_init__(self):
        if self.t_piezo <= 0:
            raise ValueError("piezo thickness must be positive")
        if self.youngs_modulus <= 0:
            raise ValueError("Young's modulus must be positive")


def me_anisotropy_from_voltage(v: float, p: MEStackParams) -> float:
    """Strain-induced out-of-plane anisotropy K_me (J/m^3) for a voltage.

    The voltage produces an isotropic biaxial in-plane strain
    eps = d31*V/t_piezo, hence a stress sigma = Y*eps. A compressive stress
    with positive magnetostriction (lambda_s*sigma < 0) pushes the
    magnetization out of plane; that polarity yields K_me = (3/2)|lambda_s*
    sigma| with easy axis z. The opposite polarity is not used by the cell
    protocol and returns 0.
    """
    eps = p.d31 * v / p.t_piezo
    sigma = p.youngs_modulus * eps
    if p.lambda_s * sigma < 0.0:
        return 1.5 * abs(p.lambda_s * sigma)
    return 0.0


def ku_from_hk(hk: float, ms: float, mode: AnisotropyMode) -> float:
    """Convert an out-of-plane anisotropy field Hk (A/m) to Ku (J/m^3)."""
    if hk < 0:
        raise ValueError(f"Hk must be non-negative, got {hk}")
    if ms <= 0:
        raise ValueError(f"Ms must be positive, got {ms}")
    if mode is AnisotropyMode.NET_EFFECTIVE:
        return MU0 * ms * hk / 2.0
    return MU0 * ms * (hk + ms) / 2.0


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

X_AXIS = (1.0, 0.0, 0.0)
Z_AXIS = (0.0, 0.0, 1.0)

# Co/Ni multilayer bus
BUS_MS = 790e3          # A/m
BUS_A_EX = 16e-12       # J/m
BUS_ALPHA = 0.01
BUS_HK = 16.78e3        # A/m, net out-of-plane anisotropy field
OUTPUT_ARM_ALPHA = 0.016

# CoFe magneto-electric cell
ME_MS = 800e3           # A/m
ME_A_EX = 20e-12        # J/m
ME_ALPHA = 0.027
# Calibrated cell anisotropies: ku stabilizes the +-x storage states, ku_perp
# compensates part of the cell's out-of-plane demag penalty so the 2e5 J/m^3
# strain term can hold the cell along z while release restores +-x.
ME_KU_INPLANE = 8.0e4   # J/m^3, easy axis x
ME_KU_PERP = 2.75e5     # J/m^3, easy axis z

PRESET_BUS = "CoNi-bus"
PRESET_ME_CELL = "CoFe-MEcell"


def bus_params(mode: AnisotropyMode, alpha: float = BUS_ALPHA,
               hk: float = BUS_HK) -> MagnetParams:
    """Bus material with Ku derived from Hk for the given demag treatment."""
    return MagnetParams(ms=BUS_MS, a_ex=BUS_A_EX, alpha=alpha,
                        ku=ku_from_hk(hk, BUS_MS, mode), easy_axis=Z_AXIS)


def me_cell_params(ku: float = ME_KU_INPLANE,
                   ku_perp: float = ME_KU_PERP) -> MagnetParams:
    return MagnetParams(ms=ME_MS, a_ex=ME_A_EX, alpha=ME_ALPHA,
                        ku=ku, easy_axis=X_AXIS, ku_perp=ku_perp)


@dataclass(frozen=True)
class MaterialMap:
    """Per-region magnetic constants, plus ME stack constants for ME cells."""

    magnets: dict            # RegionLabel -> MagnetParams
    me_stacks: dict = field(default_factory=dict)  # RegionLabel -> MEStackParams

    def magnet(self, label: "RegionLabel") -> MagnetParams:
        try:
            return self.magnets[label]
        except KeyError:
            raise KeyError(f"no material assigned to region {label!r}") from None

    def me_stack(self, label: "RegionLabel") -> MEStackParams:
        return self.me_stacks[label]

    def validate_coverage(self, labels_present) -> None:
        """Raise if any non-vacuum label present in a mesh has no material."""
        missing = [lab for lab in labels_present if lab not in self.magnets]
        if missing:
            raise KeyError(f"missing material for regions: {missing}")

    def with_override(self, label: "RegionLabel", **changes) -> "MaterialMap":
        magnets = dict(self.magnets)
        magnets[label] = replace(magnets[label], **changes)
        return MaterialMap(magnets=magnets, me_stacks=self.me_stacks)


def default_material_map(mode: AnisotropyMode,
                         me_ku: float = ME_KU_INPLANE,
                         me_ku_perp: float = ME_KU_PERP,
                         output_arm_alpha: float = OUTPUT_ARM_ALPHA,
                         me_stack: MEStackParams | None = None) -> MaterialMap:
    """Material map for the device regions using the named presets."""
    from .geometry import RegionLabel  # deferred to avoid an import cycle

    bus = bus_params(mode)
    cell = me_cell_params(ku=me_ku, ku_perp=me_ku_perp)
    stack = me_stack if me_stack is not None else MEStackParams()
    magnets = {
        RegionLabel.BUS: bus,
        RegionLabel.OUTPUT_ARM: replace(bus, alpha=output_arm_alpha),
        RegionLabel.ABSORBER: bus,
        RegionLabel.ME_CELL_IN1: cell,
        RegionLabel.ME_CELL_IN2: cell,
        RegionLabel.ME_CELL_IN3: cell,
        RegionLabel.ME_CELL_OUT: cell,
    }
    me_stacks = {lab: stack for lab in (RegionLabel.ME_CELL_IN1,
                                        RegionLabel.ME_CELL_IN2,
                                        RegionLabel.ME_CELL_IN3,
                                        RegionLabel.ME_CELL_OUT)}
    return MaterialMap(magnets=magnets, me_stacks=me_stacks)
