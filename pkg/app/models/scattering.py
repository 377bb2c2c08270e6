import math

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.core import AngularFrequency, Rate


class BackscatterResult(BaseModel):
    """cw/ccw coupling from a point scatterer and the resulting standing-wave doublet"""

    model_config = ConfigDict(frozen=True)

    beta_mag: Rate
    xi: float = 0.0
    q_beta: float
    omega_minus: AngularFrequency
    omega_plus: AngularFrequency

    @property
    def omega0(self) -> float:
        return 0.5 * (self.omega_minus.value + self.omega_plus.value)

    @property
    def normalized_splitting(self) -> float:
        """2|beta| / omega0 = 1/Q_beta"""
        return 1.0 / self.q_beta

    @property
    def splitting_ghz(self) -> float:
        return 2.0 * self.beta_mag.value / (2.0 * math.pi) / 1e9


class DoubletLoss(BaseModel):
    """Quality factors of the antinode-locked (low) and node-locked (high) standing waves"""

    model_config = ConfigDict(frozen=True)

    q_low: float = Field(gt=0)
    q_high: float = Field(gt=0)

    @model_validator(mode="after")
    def _ordered(self) -> "DoubletLoss":
        if self.q_low > self.q_high:
            raise ValueError(f"q_low={self.q_low} exceeds q_high={self.q_high}")
        return self
