"""JSON documents accepted by the CLI subcommands."""
import json
import math
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from scipy.constants import speed_of_light

from app.config.settings import settings
from app.models.core import ModeGeometry, Rate, SystemParams
from app.models.coupling import DipoleEmitter
from app.models.errors import SchemaError
from app.models.fit import FitOptions, InstrumentResponse, LockedDoublet, NoiseSpec
from app.models.spectrum import AxisKind, CollectionChannel
from app.services.coupling_service import coupling_service

MODE_TABLES = Path(__file__).resolve().parent.parent / "data" / "mode_tables.json"


class Document(BaseModel):
    model_config = ConfigDict(extra="forbid")

    @classmethod
    def parse(cls, data: dict):
        body = {k: v for k, v in data.items() if k != "schema"}
        try:
            return cls.model_validate(body)
        except ValidationError as e:
            raise SchemaError(f"{cls.__name__}: {e}") from e


def parse_system(data: Dict[str, float]) -> SystemParams:
    """SystemParams from *_hz_over_2pi keys; `f_o` may stand in for g"""
    data = dict(data)
    try:
        if "g_hz_over_2pi" not in data and "f_o" in data:
            g = coupling_service.g_from_purcell(
                data.pop("f_o"),
                Rate.from_hz(data["kappa_hz_over_2pi"]),
                Rate.from_hz(data["gamma_s_hz_over_2pi"]),
            )
            data["g_hz_over_2pi"] = g.hz
        return SystemParams.from_document(data)
    except (KeyError, ValueError) as e:
        raise SchemaError(f"system parameters: {e}") from e


class GridSpec(BaseModel):
    """Output abscissa; detuning is measured from reference_hz (default: the model's carrier)"""

    model_config = ConfigDict(extra="forbid")

    axis: AxisKind = AxisKind.DETUNING_HZ
    start: float
    stop: float
    points: int = Field(ge=2)
    reference_hz: Optional[float] = None

    @model_validator(mode="after")
    def _axis(self) -> "GridSpec":
        if self.axis not in (AxisKind.DETUNING_HZ, AxisKind.WAVELENGTH_NM):
            raise ValueError("grid axis must be detuning_hz or wavelength_nm")
        if self.axis == AxisKind.WAVELENGTH_NM and min(self.start, self.stop) <= 0:
            raise ValueError("wavelengths must be positive")
        return self

    def abscissa(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points)

    def angular(self, reference_hz: float) -> np.ndarray:
        x = self.abscissa()
        if self.axis == AxisKind.WAVELENGTH_NM:
            return 2.0 * math.pi * speed_of_light / (x * 1e-9)
        return 2.0 * math.pi * ((self.reference_hz if self.reference_hz is not None else reference_hz) + x)


class ModeTerm(BaseModel):
    model_config = ConfigDict(extra="forbid")

    center_hz: float
    kappa_hz_over_2pi: float = Field(gt=0)
    f_o: float = Field(ge=0)
    eps_c: float = Field(default=1.0, ge=0)
    phi_c: float = 0.0


class DropTerm(BaseModel):
    model_config = ConfigDict(extra="forbid")

    center_hz: float
    kappa_hz_over_2pi: float = Field(gt=0)
    depth: float = Field(ge=0, le=1)


class SimulateDocument(Document):
    spectrum: Literal["lens", "detected", "taper", "multimode", "drop_filter", "numeric"]
    grid: GridSpec
    system: Optional[Dict[str, float]] = None
    channel: Optional[CollectionChannel] = None
    # lens
    f_o: Optional[float] = Field(default=None, ge=0)
    kappa_hz_over_2pi: Optional[float] = Field(default=None, gt=0)
    center_hz: float = 0.0
    # multimode / drop filter
    modes: List[ModeTerm] = Field(default_factory=list)
    eps_d: float = Field(default=1.0, ge=0)
    phi_d: float = math.pi / 2
    scale: float = 1.0
    drop_modes: List[DropTerm] = Field(default_factory=list)
    background: List[float] = Field(default_factory=lambda: [1.0])
    response: Optional[InstrumentResponse] = None
    noise: Optional[NoiseSpec] = None

    @model_validator(mode="after")
    def _complete(self) -> "SimulateDocument":
        if self.spectrum == "lens" and (self.f_o is None or self.kappa_hz_over_2pi is None):
            raise ValueError("lens spectrum needs f_o and kappa_hz_over_2pi")
        if self.spectrum in ("detected", "taper", "numeric") and self.system is None:
            raise ValueError(f"{self.spectrum} spectrum needs a system block")
        if self.spectrum == "multimode" and not self.modes:
            raise ValueError("multimode spectrum needs at least one mode")
        if self.spectrum == "drop_filter" and not self.drop_modes:
            raise ValueError("drop_filter spectrum needs drop_modes")
        return self


class ScattererSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    diameter: float = Field(default=2.0e-7, gt=0)
    n_nc: float = Field(default=2.4, gt=1)


class EmitterSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")

    gamma_parallel_hz_over_2pi: float = Field(ge=0)
    zpl_fraction: float = Field(default=1.0, ge=0, le=1)
    lambda_emit: float = Field(gt=0)
    n_host: float = Field(gt=0)

    def emitter(self) -> DipoleEmitter:
        return DipoleEmitter(
            gamma_parallel=Rate.from_hz(self.gamma_parallel_hz_over_2pi),
            zpl_fraction=self.zpl_fraction,
            lambda_emit=self.lambda_emit,
            n_host=self.n_host,
        )


class ModeRow(BaseModel):
    """One table row; q_intrinsic defaults to the row's radiation-limited Q"""

    model_config = ConfigDict(extra="forbid")

    name: str = ""
    mode: ModeGeometry
    q_intrinsic: Optional[float] = Field(default=None, gt=0)
    q_ss_reported: Optional[float] = None
    scatterer: Optional[ScattererSpec] = None


class ModesDocument(Document):
    """Rows may be given inline or taken from the shipped tables ("600nm", "850nm" or "all")"""

    rows: List[dict] = Field(default_factory=list)
    table: Optional[Literal["600nm", "850nm", "all"]] = None
    emitter: Optional[EmitterSpec] = None
    scatterer: ScattererSpec = Field(default_factory=ScattererSpec)

    def all_rows(self) -> List[dict]:
        rows = list(self.rows)
        if self.table is not None:
            shipped = load_mode_tables()["tables"]
            for band in (["600nm", "850nm"] if self.table == "all" else [self.table]):
                rows += [dict(row, name=f"{band}:{row['name']}") for row in shipped[band]]
        return rows


def load_mode_tables() -> dict:
    with open(MODE_TABLES, encoding="utf-8") as fh:
        return json.load(fh)


class FitModeSpec(BaseModel):
    """Starting guess for one mode; the center may be given in Hz or nm"""

    model_config = ConfigDict(extra="forbid")

    center_hz: Optional[float] = None
    center_nm: Optional[float] = Field(default=None, gt=0)
    kappa_ghz: float = Field(gt=0)
    f_o: float = Field(ge=0)
    eps_c: float = Field(default=1.0, ge=0)
    phi_c: float = 0.0

    @model_validator(mode="after")
    def _center(self) -> "FitModeSpec":
        if (self.center_hz is None) == (self.center_nm is None):
            raise ValueError("give exactly one of center_hz and center_nm")
        return self

    @property
    def omega_c(self) -> float:
        if self.center_nm is not None:
            return 2.0 * math.pi * speed_of_light / (self.center_nm * 1e-9)
        return 2.0 * math.pi * self.center_hz


class FitDocument(Document):
    modes: List[FitModeSpec] = Field(default_factory=list)
    seed_modes: int = Field(default=0, ge=0)
    eps_d: float = Field(default=1.0, ge=0)
    phi_d: float = math.pi / 2
    scale: float = 1.0
    background: Optional[List[float]] = None
    response: InstrumentResponse = Field(default_factory=InstrumentResponse)
    vary: Dict[str, bool] = Field(default_factory=dict)
    bounds: Dict[str, Tuple[Optional[float], Optional[float]]] = Field(default_factory=dict)
    locked_doublets: List[LockedDoublet] = Field(default_factory=list)
    options: Optional[FitOptions] = None
    reference_hz: Optional[float] = None
    # abscissa ranges fitted independently; the whole trace when empty
    windows: List[Tuple[float, float]] = Field(default_factory=list)

    @model_validator(mode="after")
    def _modes(self) -> "FitDocument":
        if not self.modes and self.seed_modes == 0:
            raise ValueError("give starting modes or ask for seed_modes")
        return self


class RegressDocument(Document):
    """Room-temperature regression run; gamma_p defaults to regime_multiplier * max(kappa, g, gamma_s)"""

    system: Dict[str, float] = Field(
        default_factory=lambda: {
            "f_o": 0.2,
            "kappa_hz_over_2pi": 15e9,
            "gamma_s_hz_over_2pi": 0.5e6,
            "omega_c_hz_over_2pi": speed_of_light / 637e-9,
        }
    )
    channel: CollectionChannel = Field(default_factory=CollectionChannel.lens)
    regime_multiplier: float = Field(default_factory=lambda: settings.regime_multiplier, gt=0)
    span_kappa: float = Field(default=3.0, gt=0)
    points: int = Field(default=241, ge=2)
    threshold: float = Field(default_factory=lambda: settings.regress_threshold, gt=0)

    def params(self) -> SystemParams:
        data = dict(self.system)
        if "gamma_p_hz_over_2pi" not in data:
            data["gamma_p_hz_over_2pi"] = 0.0
            base = parse_system(data)
            fastest = max(base.kappa.value, base.g.value, base.gamma_s.value)
            return base.with_gamma_p(self.regime_multiplier * fastest)
        return parse_system(data)
