import math

import numpy as np
import pytest
from scipy.constants import epsilon_0

from app.models.core import Scatterer
from app.services.scatterer_service import scatterer_service


def test_backscatter_te1_850nm(mode_row, nanosphere):
    mode = mode_row("850nm", "TE_p=1")
    result = scatterer_service.backscatter(mode, nanosphere(mode.eta_nc))
    assert result.normalized_splitting == pytest.approx(2.7427964e-5, rel=1e-6)
    # measured splitting 2.2e-5
    assert abs(result.normalized_splitting - 2.2e-5) < 0.3 * 2.2e-5
    assert result.splitting_ghz == pytest.approx(2.7428e-5 * mode.omega0.hz / 1e9, rel=1e-3)
    assert result.omega0 == pytest.approx(mode.omega0.value, rel=1e-12)
    assert result.omega_minus.value < result.omega_plus.value


def test_backscatter_uses_traveling_wave_volume(mode_row, nanosphere):
    mode = mode_row("850nm", "TM_p=1")
    sc = nanosphere(mode.eta_nc)
    expected = sc.polarizability_volume * mode.eta_nc / (2.0 * mode.v_eff_sw_m3)
    assert scatterer_service.backscatter(mode, sc).normalized_splitting == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("name, reported, expected", [("TM_p=1", 2.7e4, 16357.0), ("TM_p=3", 9.0e3, 5620.0)])
def test_scattering_q_600nm(mode_row, nanosphere, name, reported, expected):
    mode = mode_row("600nm", name)
    q_s = scatterer_service.scattering_q(mode, nanosphere(mode.eta_nc))
    assert q_s == pytest.approx(expected, rel=1e-3)
    assert reported / 2 < q_s < reported * 2


def test_scattering_q_scaling(mode_row, nanosphere):
    mode = mode_row("600nm", "TE_p=2")
    sc = nanosphere(mode.eta_nc)
    base = scatterer_service.scattering_q(mode, sc)

    bigger = Scatterer.sphere(4.0e-7, eta_at_site=mode.eta_nc, n_nc=2.4)
    assert scatterer_service.scattering_q(mode, bigger) == pytest.approx(base / 64.0, rel=1e-12)

    roomier = mode.model_copy(update={"v_eff_sw": 2 * mode.v_eff_sw})
    assert scatterer_service.scattering_q(roomier, sc) == pytest.approx(2.0 * base, rel=1e-12)

    dimmer = sc.model_copy(update={"eta_at_site": sc.eta_at_site / 2})
    assert scatterer_service.scattering_q(mode, dimmer) == pytest.approx(2.0 * base, rel=1e-12)


def test_q_from_stored_energy_matches_closed_form(mode_row, nanosphere):
    mode = mode_row("600nm", "TM_p=2")
    sc = nanosphere(mode.eta_nc)
    u_max = 2.5
    power = scatterer_service.radiated_power(math.sqrt(sc.eta_at_site * u_max), sc, mode.omega0)
    stored = 0.5 * epsilon_0 * mode.v_eff_sw_m3 * u_max
    q = mode.omega0.value * stored / power
    assert q == pytest.approx(scatterer_service.scattering_q(mode, sc), rel=1e-9)


def test_doublet_loss_split():
    loss = scatterer_service.doublet_loss(3.4e5, q_s_antinode=3.4e5)
    assert loss.q_low == pytest.approx(1.7e5, rel=1e-12)
    assert loss.q_high == pytest.approx(3.4e5, rel=1e-12)


def test_doublet_loss_from_geometry(mode_row, nanosphere):
    mode = mode_row("850nm", "TE_p=1")
    sc = nanosphere(mode.eta_nc)
    q_s = scatterer_service.scattering_q(mode, sc)
    loss = scatterer_service.doublet_loss(1e6, mode=mode, sc=sc, node_residual=0.1)
    assert 1.0 / loss.q_low == pytest.approx(1e-6 + 1.0 / q_s, rel=1e-12)
    assert 1.0 / loss.q_high == pytest.approx(1e-6 + 0.1 / q_s, rel=1e-12)
    assert loss.q_low < loss.q_high


def test_doublet_loss_without_scatterer():
    loss = scatterer_service.doublet_loss(5e5)
    assert loss.q_low == loss.q_high == pytest.approx(5e5)
    with pytest.raises(ValueError):
        scatterer_service.doublet_loss(0.0)
    with pytest.raises(ValueError):
        scatterer_service.doublet_loss(1e5, q_s_antinode=1e5, node_residual=2.0)


def test_coupled_mode_eigenmodes():
    offsets, vectors = scatterer_service.coupled_mode_eigenmodes(1.0, xi=0.3, delta=0.25)
    assert offsets == pytest.approx([-0.75, 1.25])
    # standing waves: equal cw and ccw weight
    assert np.abs(vectors) ** 2 == pytest.approx(np.full((2, 2), 0.5))


def test_doublet_transmission_dips():
    omega_minus, omega_plus = 2.0e15, 2.0e15 + 1e12
    omega = np.array([omega_minus, omega_plus, 2.0e15 - 1e13])
    trace = scatterer_service.doublet_transmission(omega, omega_minus, omega_plus, 1e5, 2e5, 0.6, 0.3)
    assert trace.intensity[0] == pytest.approx(0.4, abs=1e-3)
    assert trace.intensity[1] == pytest.approx(0.7, abs=1e-3)
    assert trace.intensity[2] == pytest.approx(1.0, abs=1e-3)
    with pytest.raises(ValueError):
        scatterer_service.doublet_transmission(omega, omega_minus, omega_plus, 1e5, 2e5, 1.2, 0.3)
