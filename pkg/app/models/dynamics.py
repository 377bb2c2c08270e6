from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class MomentState(BaseModel):
    """Single-excitation moments: <a>, <sigma_->, <a^dag a>, <sigma_+ sigma_->, <a^dag sigma_->"""

    model_config = ConfigDict(frozen=True)

    a_mean: complex = 0j
    sigma_mean: complex = 0j
    p_c: float = Field(default=0.0, ge=0)
    p_d: float = Field(default=1.0, ge=0, le=1)
    x_cross: complex = 0j

    @model_validator(mode="after")
    def _cauchy_schwarz(self) -> "MomentState":
        if abs(self.x_cross) ** 2 > self.p_c * self.p_d * (1 + 1e-12) + 1e-300:
            raise ValueError("|<a^dag sigma_->|^2 exceeds p_c * p_d")
        if self.p_c + self.p_d > 1 + 1e-12:
            raise ValueError("single-excitation populations exceed one quantum")
        return self

    @classmethod
    def excited_dipole(cls) -> "MomentState":
        return cls()


class MomentTrajectory(BaseModel):
    """Moments sampled on a time grid, with the cumulative emitted quanta"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    t: Any
    a_mean: Any
    sigma_mean: Any
    p_c: Any
    p_d: Any
    x_cross: Any
    emitted: Any

    def state(self, i: int) -> MomentState:
        return MomentState(
            a_mean=complex(self.a_mean[i]),
            sigma_mean=complex(self.sigma_mean[i]),
            p_c=max(float(self.p_c[i]), 0.0),
            p_d=min(max(float(self.p_d[i]), 0.0), 1.0),
            x_cross=complex(self.x_cross[i]),
        )


class CorrelationSet(BaseModel):
    """Double-transformed two-time correlations on an angular frequency grid"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    omega: Any
    c_cc: Any
    c_dd: Any
    c_cd: Any
    c_dc: Any

    @field_validator("omega", mode="before")
    @classmethod
    def _grid(cls, v):
        return np.asarray(v, dtype=float)


class RoomTemperatureReport(BaseModel):
    """Numeric spectrum against the scale-aligned closed form"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    omega: Any
    s_numeric: Any
    s_closed: Any
    rel_error: Any
    scale: float
    max_rel_error: float
    l2_rel_error: float
