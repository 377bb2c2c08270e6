from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.models.core import Rate


class DipoleEmitter(BaseModel):
    """Optical dipole transition hosted in a crystal"""

    model_config = ConfigDict(frozen=True)

    gamma_parallel: Rate  # total excited-state spontaneous emission
    zpl_fraction: float = Field(ge=0, le=1)
    lambda_emit: float = Field(gt=0)
    n_host: float = Field(gt=0)


class SampledField(BaseModel):
    """Mode field sampled on a grid of cells.

    positions: (N, 3) metres; index: (N,); field: (N, 3) complex; cell_volumes: (N,) m^3
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    positions: Any
    index: Any
    field: Any
    cell_volumes: Any

    @field_validator("positions", mode="before")
    @classmethod
    def _positions(cls, v):
        arr = np.atleast_2d(np.asarray(v, dtype=float))
        if arr.shape[-1] != 3:
            raise ValueError("positions must have three coordinates per sample")
        return arr

    @field_validator("field", mode="before")
    @classmethod
    def _field(cls, v):
        arr = np.atleast_2d(np.asarray(v, dtype=complex))
        if arr.shape[-1] != 3:
            raise ValueError("field must have three components per sample")
        return arr

    @field_validator("index", "cell_volumes", mode="before")
    @classmethod
    def _column(cls, v):
        return np.atleast_1d(np.asarray(v, dtype=float))

    @model_validator(mode="after")
    def _shapes(self) -> "SampledField":
        n = self.positions.shape[0]
        if n == 0:
            raise ValueError("sampled field needs at least one sample")
        for name in ("index", "field", "cell_volumes"):
            if getattr(self, name).shape[0] != n:
                raise ValueError(f"{name} has {getattr(self, name).shape[0]} rows, expected {n}")
        if np.any(self.cell_volumes <= 0):
            raise ValueError("cell volumes must be positive")
        return self

    @property
    def energy_density(self) -> np.ndarray:
        """n^2 |E|^2 per sample"""
        return self.index ** 2 * np.sum(np.abs(self.field) ** 2, axis=1)
