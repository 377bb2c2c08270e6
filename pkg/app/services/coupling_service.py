import math
from typing import Optional

import numpy as np
from loguru import logger
from scipy.constants import epsilon_0, hbar, speed_of_light

from app.models.core import ModeGeometry, Rate
from app.models.coupling import DipoleEmitter, SampledField


class CouplingService:
    """Mode volume, per-photon field, dipole moment and coherent coupling rate"""

    def effective_mode_volume(self, field: SampledField) -> float:
        """Integral of n^2|E|^2 over the grid divided by its peak value, m^3"""
        u = field.energy_density
        peak = float(np.max(u))
        if peak == 0:
            raise ValueError("field is identically zero; mode volume undefined")
        return float(np.sum(u * field.cell_volumes)) / peak

    def eta_ratio(self, field: SampledField, site, atol: float = 1e-12) -> float:
        """Local-to-peak energy density ratio at a grid site, in (0, 1]"""
        site = np.asarray(site, dtype=float)
        hits = np.flatnonzero(np.all(np.isclose(field.positions, site, rtol=0, atol=atol), axis=1))
        if hits.size == 0:
            raise ValueError(f"site {site.tolist()} is not on the sampling grid")
        u = field.energy_density
        ratio = float(u[hits[0]] / np.max(u))
        if ratio <= 0:
            raise ValueError(f"zero field at site {site.tolist()}; emitter placement is non-physical")
        return ratio

    def photon_field(
        self,
        mode: ModeGeometry,
        eta_site: float,
        n_site: float,
        traveling_wave: bool = False,
    ) -> float:
        """Per-photon electric field amplitude at the emitter site, V/m

        Args:
            mode: mode record supplying lambda0 and the effective volume
            eta_site: local-to-peak energy density ratio at the site
            n_site: refractive index at the site
            traveling_wave: use the traveling-wave volume (2x standing-wave)

        Returns:
            sqrt(hbar*omega*eta / (2*eps0*n^2*V_eff))
        """
        if not 0 < eta_site <= 1:
            raise ValueError(f"eta_site must lie in (0, 1], got {eta_site}")
        volume = mode.v_eff_tw_m3 if traveling_wave else mode.v_eff_sw_m3
        omega = mode.omega0.value
        return math.sqrt(hbar * omega * eta_site / (2.0 * epsilon_0 * n_site ** 2 * volume))

    def dipole_moment(self, emitter: DipoleEmitter) -> float:
        """Transition dipole magnitude from the bulk decay rate, C*m"""
        omega = 2.0 * math.pi * speed_of_light / emitter.lambda_emit
        mu_sq = (
            3.0 * math.pi ** 2 * hbar * epsilon_0 * speed_of_light ** 3 * emitter.gamma_parallel.value
            / (emitter.n_host * omega ** 3)
        )
        return math.sqrt(mu_sq)

    def coupling_rate(
        self,
        emitter: DipoleEmitter,
        mode: ModeGeometry,
        eta_site: float,
        n_site: Optional[float] = None,
        alignment: float = 1.0,
        traveling_wave: bool = False,
    ) -> Rate:
        """Coherent coupling g = |mu . E_photon| / hbar

        n_site defaults to the host-crystal index; alignment is the cosine
        between dipole and local field.
        """
        if not -1.0 <= alignment <= 1.0:
            raise ValueError(f"alignment is a direction cosine, got {alignment}")
        n_site = emitter.n_host if n_site is None else n_site
        field = self.photon_field(mode, eta_site, n_site, traveling_wave=traveling_wave)
        g = abs(alignment) * self.dipole_moment(emitter) * field / hbar
        logger.debug(f"g/2pi = {g / (2 * math.pi) / 1e9:.4g} GHz for {mode.label} (eta={eta_site}, n={n_site})")
        return Rate(value=g)

    def zpl_coupling_rate(self, emitter: DipoleEmitter, mode: ModeGeometry, eta_site: float, **kwargs) -> Rate:
        g = self.coupling_rate(emitter, mode, eta_site, **kwargs)
        return Rate(value=g.value * math.sqrt(emitter.zpl_fraction))

    def purcell_factor(self, g: Rate, kappa: Rate, gamma_s: Rate) -> float:
        """Bad-cavity Purcell factor F_o = 2g^2 / (kappa*gamma_s)"""
        if kappa.value <= 0 or gamma_s.value <= 0:
            raise ValueError("kappa and gamma_s must be positive")
        return 2.0 * g.value ** 2 / (kappa.value * gamma_s.value)

    def g_from_purcell(self, f_o: float, kappa: Rate, gamma_s: Rate) -> Rate:
        if f_o < 0:
            raise ValueError(f"Purcell factor must be non-negative, got {f_o}")
        if kappa.value <= 0 or gamma_s.value <= 0:
            raise ValueError("kappa and gamma_s must be positive")
        return Rate(value=math.sqrt(f_o * kappa.value * gamma_s.value / 2.0))


coupling_service = CouplingService()
