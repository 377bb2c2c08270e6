import math
from enum import Enum
from typing import Any, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.constants import speed_of_light


class AxisKind(str, Enum):
    ANGULAR = "omega_rad_s"
    FREQUENCY_HZ = "frequency_hz"
    DETUNING_HZ = "detuning_hz"
    WAVELENGTH_NM = "wavelength_nm"


class SpectrumTrace(BaseModel):
    """Sampled intensity against one abscissa.

    Detuning traces may carry `reference_hz`, the optical carrier the
    detuning is measured from.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    abscissa: Any
    intensity: Any
    uncertainty: Optional[Any] = None
    axis: AxisKind = AxisKind.ANGULAR
    reference_hz: Optional[float] = None

    @field_validator("abscissa", "intensity", mode="before")
    @classmethod
    def _as_array(cls, v):
        return np.asarray(v, dtype=float).ravel()

    @field_validator("uncertainty", mode="before")
    @classmethod
    def _as_optional_array(cls, v):
        return None if v is None else np.asarray(v, dtype=float).ravel()

    @model_validator(mode="after")
    def _check(self) -> "SpectrumTrace":
        if self.abscissa.shape != self.intensity.shape:
            raise ValueError(
                f"abscissa has {self.abscissa.size} points but intensity has {self.intensity.size}"
            )
        if self.uncertainty is not None and self.uncertainty.shape != self.abscissa.shape:
            raise ValueError("uncertainty must match the abscissa length")
        if self.abscissa.size > 1:
            steps = np.diff(self.abscissa)
            if not (np.all(steps > 0) or np.all(steps < 0)):
                raise ValueError("abscissa must be strictly monotone")
        if not np.all(np.isfinite(self.intensity)):
            raise ValueError("intensities must be finite")
        return self

    def __len__(self) -> int:
        return int(self.abscissa.size)

    def with_intensity(self, intensity) -> "SpectrumTrace":
        return SpectrumTrace(
            abscissa=self.abscissa,
            intensity=intensity,
            uncertainty=self.uncertainty,
            axis=self.axis,
            reference_hz=self.reference_hz,
        )

    def angular(self) -> np.ndarray:
        """Abscissa as angular frequency; detuning axes are offset by reference_hz when known"""
        if self.axis == AxisKind.ANGULAR:
            return self.abscissa
        if self.axis == AxisKind.FREQUENCY_HZ:
            return 2.0 * math.pi * self.abscissa
        if self.axis == AxisKind.DETUNING_HZ:
            return 2.0 * math.pi * (self.abscissa + (self.reference_hz or 0.0))
        return 2.0 * math.pi * speed_of_light / (self.abscissa * 1e-9)


class CollectionChannel(BaseModel):
    """Overlap of a collection optic with the dipole and cavity radiation"""

    model_config = ConfigDict(frozen=True)

    eps_d: float = Field(ge=0)
    eps_c: float = Field(ge=0)
    phi_d: float = 0.0
    phi_c: float = 0.0

    @model_validator(mode="after")
    def _not_dark(self) -> "CollectionChannel":
        if self.eps_d == 0 and self.eps_c == 0:
            raise ValueError("collection channel sees neither the dipole nor the cavity")
        return self

    @classmethod
    def lens(cls) -> "CollectionChannel":
        """Far-field lens on a sub-wavelength scatterer: equal overlaps, direct leads by pi/2"""
        return cls(eps_d=1.0, eps_c=1.0, phi_d=math.pi / 2, phi_c=0.0)

    @classmethod
    def taper(cls) -> "CollectionChannel":
        return cls(eps_d=0.0, eps_c=1.0)

    @property
    def relative_phase(self) -> float:
        return self.phi_d - self.phi_c


class CavityTerm(BaseModel):
    """One decoupled cavity mode of a multi-mode Fano model (angular units)"""

    model_config = ConfigDict(frozen=True)

    omega_c: float
    kappa: float = Field(gt=0)
    f_o: float = Field(ge=0)
    eps_c: float = Field(default=1.0, ge=0)
    phi_c: float = 0.0


class MultiModeModel(BaseModel):
    """Direct dipole channel interfering with several cavity channels.

    The 1/gamma_p prefactor is folded into `scale`.
    """

    model_config = ConfigDict(frozen=True)

    modes: List[CavityTerm] = Field(default_factory=list)
    eps_d: float = Field(default=1.0, ge=0)
    phi_d: float = math.pi / 2
    scale: float = 1.0


class DropFilterMode(BaseModel):
    """Lorentzian transmission dip of a side-coupled cavity"""

    model_config = ConfigDict(frozen=True)

    omega_c: float
    kappa: float = Field(gt=0)
    depth: float = Field(ge=0, le=1)


class LensExtrema(BaseModel):
    """Analytic landmarks of the background-normalized lens lineshape, in units of kappa"""

    model_config = ConfigDict(frozen=True)

    x_max: float
    s_max: float
    x_min: float
    s_min: float
    x_crossing: float
