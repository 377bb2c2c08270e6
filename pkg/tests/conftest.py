import math

import pytest
from scipy.constants import speed_of_light

from app.handlers.documents import load_mode_tables
from app.models.core import ModeGeometry, Rate, Scatterer, SystemParams
from app.models.coupling import DipoleEmitter
from app.services.coupling_service import coupling_service


@pytest.fixture(scope="session")
def mode_tables():
    return load_mode_tables()


@pytest.fixture
def mode_row(mode_tables):
    """ModeGeometry of a shipped table row, looked up by band and name"""

    def lookup(band: str, name: str) -> ModeGeometry:
        for row in mode_tables["tables"][band]:
            if row["name"] == name:
                return ModeGeometry.model_validate(row["mode"])
        raise KeyError(f"{band}:{name}")

    return lookup


@pytest.fixture
def nanosphere():
    """200 nm n=2.4 sphere at a given local-to-peak energy ratio"""

    def build(eta: float) -> Scatterer:
        return Scatterer.sphere(2.0e-7, eta_at_site=eta, n_nc=2.4)

    return build


@pytest.fixture
def emitter(mode_tables) -> DipoleEmitter:
    spec = mode_tables["emitter"]
    return DipoleEmitter(
        gamma_parallel=Rate.from_hz(spec["gamma_parallel_hz_over_2pi"]),
        zpl_fraction=spec["zpl_fraction"],
        lambda_emit=spec["lambda_emit"],
        n_host=spec["n_host"],
    )


@pytest.fixture
def room_temperature_params() -> SystemParams:
    """kappa/2pi = 15 GHz, gamma_s/2pi = 0.5 MHz, F_o = 0.2, gamma_p = 1e3 kappa at 637 nm"""
    kappa = Rate.from_hz(15e9)
    gamma_s = Rate.from_hz(0.5e6)
    g = coupling_service.g_from_purcell(0.2, kappa, gamma_s)
    return SystemParams.from_angular(
        g=g.value,
        kappa=kappa.value,
        gamma_s=gamma_s.value,
        gamma_p=1e3 * kappa.value,
        omega_c=2.0 * math.pi * speed_of_light / 637e-9,
    )
