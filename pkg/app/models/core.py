"""Shared physical records.

Rates and frequencies are stored as angular values (rad/s). Every public
constructor that takes a rate in Hz means the X/2pi convention.
"""
import math
from enum import Enum
from typing import Any, Dict, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.constants import speed_of_light


class Polarization(str, Enum):
    TE = "TE"
    TM = "TM"


class AngularFrequency(BaseModel):
    """Angular frequency of a carrier, rad/s"""

    model_config = ConfigDict(frozen=True)

    value: float = Field(gt=0)

    @classmethod
    def from_hz(cls, hz: float) -> "AngularFrequency":
        return cls(value=2.0 * math.pi * hz)

    @property
    def hz(self) -> float:
        return self.value / (2.0 * math.pi)


class Rate(BaseModel):
    """Angular rate, rad/s; `hz` is the quoted value/2pi"""

    model_config = ConfigDict(frozen=True)

    value: float = Field(ge=0)

    @classmethod
    def from_hz(cls, hz: float) -> "Rate":
        return cls(value=2.0 * math.pi * hz)

    @property
    def hz(self) -> float:
        return self.value / (2.0 * math.pi)


_DOCUMENT_KEYS = ("g", "kappa", "gamma_s", "gamma_p", "omega_c", "omega_d")


class SystemParams(BaseModel):
    """Coupled dipole-cavity rates and frequencies.

    `kappa` is the cavity field decay rate; the energy decay rate is 2*kappa.
    """

    model_config = ConfigDict(frozen=True)

    g: Rate
    kappa: Rate
    gamma_s: Rate
    gamma_p: Rate
    omega_c: AngularFrequency
    omega_d: AngularFrequency

    @classmethod
    def from_angular(
        cls,
        g: float,
        kappa: float,
        gamma_s: float,
        gamma_p: float,
        omega_c: float,
        omega_d: Optional[float] = None,
    ) -> "SystemParams":
        return cls(
            g=Rate(value=g),
            kappa=Rate(value=kappa),
            gamma_s=Rate(value=gamma_s),
            gamma_p=Rate(value=gamma_p),
            omega_c=AngularFrequency(value=omega_c),
            omega_d=AngularFrequency(value=omega_c if omega_d is None else omega_d),
        )

    @classmethod
    def from_document(cls, data: Dict[str, Any]) -> "SystemParams":
        """Build from a JSON record with *_hz_over_2pi keys"""
        missing = [k for k in _DOCUMENT_KEYS[:5] if f"{k}_hz_over_2pi" not in data]
        if missing:
            raise ValueError(f"missing keys: {', '.join(k + '_hz_over_2pi' for k in missing)}")
        omega_c = data["omega_c_hz_over_2pi"]
        return cls(
            g=Rate.from_hz(data["g_hz_over_2pi"]),
            kappa=Rate.from_hz(data["kappa_hz_over_2pi"]),
            gamma_s=Rate.from_hz(data["gamma_s_hz_over_2pi"]),
            gamma_p=Rate.from_hz(data["gamma_p_hz_over_2pi"]),
            omega_c=AngularFrequency.from_hz(omega_c),
            omega_d=AngularFrequency.from_hz(data.get("omega_d_hz_over_2pi", omega_c)),
        )

    def to_document(self) -> Dict[str, float]:
        return {f"{k}_hz_over_2pi": getattr(self, k).hz for k in _DOCUMENT_KEYS}

    def with_gamma_p(self, gamma_p: float) -> "SystemParams":
        return self.model_copy(update={"gamma_p": Rate(value=gamma_p)})

    @property
    def purcell(self) -> float:
        """Bad-cavity Purcell factor 2g^2/(kappa*gamma_s)"""
        return 2.0 * self.g.value ** 2 / (self.kappa.value * self.gamma_s.value)


class ModeGeometry(BaseModel):
    """One whispering-gallery mode, as tabulated from FEM runs.

    `v_eff_sw` is the standing-wave volume in units of (lambda0/n_disk)^3.
    `eta_s` and `eta_nc` are local-to-peak energy-density ratios (<= 1).
    """

    model_config = ConfigDict(frozen=True)

    polarization: Polarization
    p: int = Field(ge=1)
    m: int
    lambda0: float = Field(gt=0)
    n_disk: float = Field(gt=0)
    v_eff_sw: float = Field(gt=0)
    eta_s: float = Field(gt=0, le=1)
    eta_nc: float = Field(gt=0, le=1)
    q_rad: Optional[float] = Field(default=None, gt=0)
    n_eff: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def _eta_order(self) -> "ModeGeometry":
        if self.eta_nc > self.eta_s:
            raise ValueError(
                f"eta_nc={self.eta_nc} exceeds eta_s={self.eta_s}; field must decay away from the disk"
            )
        return self

    @property
    def label(self) -> str:
        return f"{self.polarization.value}_p={self.p}"

    @property
    def volume_unit(self) -> float:
        return (self.lambda0 / self.n_disk) ** 3

    @property
    def v_eff_sw_m3(self) -> float:
        return self.v_eff_sw * self.volume_unit

    @property
    def v_eff_tw_m3(self) -> float:
        return 2.0 * self.v_eff_sw_m3

    @property
    def omega0(self) -> AngularFrequency:
        return AngularFrequency(value=2.0 * math.pi * speed_of_light / self.lambda0)


class Scatterer(BaseModel):
    """Sub-wavelength dielectric particle sitting in the mode field"""

    model_config = ConfigDict(frozen=True)

    n_nc: float = Field(gt=1)
    v_nc: float = Field(gt=0)
    eta_at_site: float = Field(gt=0, le=1)

    @classmethod
    def sphere(cls, diameter: float, eta_at_site: float, n_nc: float = 2.4) -> "Scatterer":
        return cls(n_nc=n_nc, v_nc=math.pi * diameter ** 3 / 6.0, eta_at_site=eta_at_site)

    @property
    def polarizability_volume(self) -> float:
        """(n^2 - 1) * V, the strength of the point perturbation"""
        return (self.n_nc ** 2 - 1.0) * self.v_nc
