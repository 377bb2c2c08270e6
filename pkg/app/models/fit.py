import math
from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.config.settings import settings
from app.models.spectrum import MultiModeModel, SpectrumTrace


class ResponseKind(str, Enum):
    NONE = "none"
    GAUSSIAN = "gaussian"


class InstrumentResponse(BaseModel):
    """Spectrometer line shape; `fwhm` is a wavelength width in metres"""

    model_config = ConfigDict(frozen=True)

    kind: ResponseKind = ResponseKind.NONE
    fwhm: float = 0.0

    @model_validator(mode="after")
    def _width(self) -> "InstrumentResponse":
        if self.kind == ResponseKind.GAUSSIAN and not self.fwhm > 0:
            raise ValueError("gaussian response needs a positive fwhm")
        return self

    @classmethod
    def gaussian(cls, fwhm: float) -> "InstrumentResponse":
        return cls(kind=ResponseKind.GAUSSIAN, fwhm=fwhm)


class NoiseKind(str, Enum):
    NONE = "none"
    GAUSSIAN = "gaussian"
    MULTIPLICATIVE = "multiplicative"


class NoiseSpec(BaseModel):
    """Additive (absolute level) or multiplicative (relative level) Gaussian noise"""

    model_config = ConfigDict(frozen=True)

    kind: NoiseKind = NoiseKind.NONE
    level: float = Field(default=0.0, ge=0)
    seed: int = 0


class FitOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    # caps residual evaluations
    max_iter: int = Field(default_factory=lambda: settings.fit_max_iter, gt=0)
    tolerance: float = Field(default_factory=lambda: settings.fit_tolerance, gt=0)
    # initial step bound of the damped least-squares solver
    damping: float = Field(default=100.0, gt=0)


class LockedDoublet(BaseModel):
    """Two modes sharing kappa with a fixed center splitting (second minus first)"""

    model_config = ConfigDict(frozen=True)

    first: int = Field(ge=0)
    second: int = Field(ge=0)
    splitting_hz: float


# frozen unless a problem says otherwise; F_o and eps_c trade off against each other
DEFAULT_FROZEN = ("eps_d", "phi_d", "scale", "eps_c", "phi_c")


class FitProblem(BaseModel):
    """A trace, a starting model and which of its parameters move.

    Public parameter names: ``mode{k}.center_hz``, ``mode{k}.kappa_ghz``
    (kappa/2pi in GHz), ``mode{k}.f_o``, ``mode{k}.eps_c``, ``mode{k}.phi_c``,
    ``eps_d``, ``phi_d``, ``scale`` and ``background.c{j}``. The background is
    a multiplicative polynomial on the window mapped to [-1, 1].
    """

    model_config = ConfigDict(frozen=True)

    trace: SpectrumTrace
    model: MultiModeModel
    background: List[float] = Field(
        default_factory=lambda: [1.0] + [0.0] * settings.background_degree
    )
    response: InstrumentResponse = Field(default_factory=InstrumentResponse)
    vary: Dict[str, bool] = Field(default_factory=dict)
    bounds: Dict[str, Tuple[Optional[float], Optional[float]]] = Field(default_factory=dict)
    locked_doublets: List[LockedDoublet] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check(self) -> "FitProblem":
        if not self.model.modes:
            raise ValueError("fit model needs at least one cavity mode")
        if not self.background:
            raise ValueError("background needs at least a constant term")
        names = set(self.parameter_names())
        unknown = (set(self.vary) | set(self.bounds)) - names
        if unknown:
            raise ValueError(f"unknown parameters: {', '.join(sorted(unknown))}")
        start = self.initial_values()
        for name, (lo, hi) in self.bounds.items():
            if (lo is not None and start[name] < lo) or (hi is not None and start[name] > hi):
                raise ValueError(f"initial value of {name} = {start[name]} lies outside its bounds")
        for lock in self.locked_doublets:
            if max(lock.first, lock.second) >= len(self.model.modes) or lock.first == lock.second:
                raise ValueError(f"locked doublet refers to modes {lock.first}, {lock.second}")
        for k in range(len(self.model.modes)):
            name = f"mode{k}.f_o"
            if self.is_free(name) and start[name] <= 0:
                raise ValueError(f"{name} must start above zero to be fitted")
        free = self.free_parameter_names()
        if len(self.trace) < len(free):
            raise ValueError(f"{len(self.trace)} samples cannot constrain {len(free)} free parameters")
        return self

    def parameter_names(self) -> List[str]:
        names: List[str] = []
        for k in range(len(self.model.modes)):
            names += [f"mode{k}.{p}" for p in ("center_hz", "kappa_ghz", "f_o", "eps_c", "phi_c")]
        names += ["eps_d", "phi_d", "scale"]
        names += [f"background.c{j}" for j in range(len(self.background))]
        return names

    def initial_values(self) -> Dict[str, float]:
        values: Dict[str, float] = {}
        for k, mode in enumerate(self.model.modes):
            values[f"mode{k}.center_hz"] = mode.omega_c / (2.0 * math.pi)
            values[f"mode{k}.kappa_ghz"] = mode.kappa / (2.0 * math.pi) / 1e9
            values[f"mode{k}.f_o"] = mode.f_o
            values[f"mode{k}.eps_c"] = mode.eps_c
            values[f"mode{k}.phi_c"] = mode.phi_c
        values["eps_d"] = self.model.eps_d
        values["phi_d"] = self.model.phi_d
        values["scale"] = self.model.scale
        for j, c in enumerate(self.background):
            values[f"background.c{j}"] = c
        return values

    def is_free(self, name: str) -> bool:
        if name in self.vary:
            return self.vary[name]
        return name.split(".")[-1] not in DEFAULT_FROZEN

    def free_parameter_names(self) -> List[str]:
        """Free names, without the center and kappa a locked doublet ties to its first mode"""
        tied = {f"mode{lock.second}.{p}" for lock in self.locked_doublets for p in ("center_hz", "kappa_ghz")}
        return [name for name in self.parameter_names() if self.is_free(name) and name not in tied]


class FitStatus(str, Enum):
    CONVERGED = "converged"
    MAX_ITERATIONS = "max_iterations"
    SINGULAR_JACOBIAN = "singular_jacobian"
    FROZEN = "frozen"


class FitResult(BaseModel):
    """Best-fit parameters; `errors` holds one-sigma uncertainties of the free ones (None if not estimable)"""

    parameters: Dict[str, float]
    errors: Dict[str, Optional[float]]
    residual_norm: float
    initial_residual_norm: float
    # residual evaluations spent by the solver, the unit max_iter caps
    iterations: int
    status: FitStatus
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status in (FitStatus.CONVERGED, FitStatus.FROZEN)

    def report(self) -> dict:
        return {
            "parameters": self.parameters,
            "errors": self.errors,
            "residual_norm": self.residual_norm,
            "iterations": self.iterations,
            "status": self.status.value,
        }


class DoubletGuess(BaseModel):
    """Starting point for a taper-transmission doublet fit"""

    model_config = ConfigDict(frozen=True)

    nu_minus_hz: float = Field(gt=0)
    nu_plus_hz: float = Field(gt=0)
    q_low: float = Field(gt=0)
    q_high: float = Field(gt=0)
    depth_low: float = Field(default=0.5, ge=0, le=1)
    depth_high: float = Field(default=0.5, ge=0, le=1)
