import math
from typing import Optional, Tuple

import numpy as np
from loguru import logger
from scipy.constants import epsilon_0, speed_of_light

from app.models.core import AngularFrequency, ModeGeometry, Rate, Scatterer
from app.models.scattering import BackscatterResult, DoubletLoss
from app.models.spectrum import AxisKind, SpectrumTrace

# solid-angle integral of |r x e|^2 for a point dipole
DIPOLE_SOLID_ANGLE = 8.0 * math.pi / 3.0


class ScattererService:
    """Backscattering, doublet formation and scattering loss from a point perturbation"""

    def _check_subwavelength(self, mode: ModeGeometry, sc: Scatterer) -> None:
        size = sc.v_nc ** (1.0 / 3.0)
        if size >= mode.lambda0 / sc.n_nc:
            logger.warning(
                f"scatterer size {size * 1e9:.0f} nm is not sub-wavelength "
                f"(lambda/n = {mode.lambda0 / sc.n_nc * 1e9:.0f} nm); point model is unreliable"
            )

    def backscatter(self, mode: ModeGeometry, sc: Scatterer, xi: float = 0.0) -> BackscatterResult:
        """Normalized splitting 1/Q_beta = (n^2-1) V_nc eta / V_tw and the doublet around omega0

        xi is the phase of beta; the scatterer azimuth sets its origin, so it defaults to 0.
        """
        self._check_subwavelength(mode, sc)
        inv_q_beta = sc.polarizability_volume * sc.eta_at_site / mode.v_eff_tw_m3
        omega0 = mode.omega0.value
        beta = 0.5 * inv_q_beta * omega0
        result = BackscatterResult(
            beta_mag=Rate(value=beta),
            xi=xi,
            q_beta=1.0 / inv_q_beta,
            omega_minus=AngularFrequency(value=omega0 - beta),
            omega_plus=AngularFrequency(value=omega0 + beta),
        )
        logger.info(
            f"{mode.label}: 2|beta|/omega0 = {inv_q_beta:.4g}, splitting = {result.splitting_ghz:.4g} GHz"
        )
        return result

    def coupled_mode_eigenmodes(
        self, beta_mag: float, xi: float = 0.0, delta: float = 0.0
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Normal modes of the cw/ccw coupled-mode equations

        da/dt = -i H a with H = [[delta, -|beta| e^{i xi}], [-|beta| e^{-i xi}, delta]].

        Returns:
            (frequency offsets in ascending order, eigenvectors as columns in the cw/ccw basis)
        """
        coupling = -beta_mag * np.exp(1j * xi)
        h = np.array([[delta, coupling], [np.conj(coupling), delta]], dtype=complex)
        return np.linalg.eigh(h)

    def scattering_q(self, mode: ModeGeometry, sc: Scatterer) -> float:
        """Q_s = 3 lambda^3 (1/eta) V_eff / (4 pi^2 (n^2-1)^2 V_nc^2), standing-wave V_eff"""
        self._check_subwavelength(mode, sc)
        return (
            3.0 * mode.lambda0 ** 3 * mode.v_eff_sw_m3 / sc.eta_at_site
            / (4.0 * math.pi ** 2 * sc.polarizability_volume ** 2)
        )

    def radiated_power(self, e_field_at_site: float, sc: Scatterer, omega: AngularFrequency) -> float:
        """Cycle-averaged power re-radiated by the induced dipole, W"""
        k0 = omega.value / speed_of_light
        return (
            omega.value * k0 ** 3 * sc.polarizability_volume ** 2 * epsilon_0 * abs(e_field_at_site) ** 2
            / (32.0 * math.pi ** 2) * DIPOLE_SOLID_ANGLE
        )

    def doublet_loss(
        self,
        q_intrinsic: float,
        mode: Optional[ModeGeometry] = None,
        sc: Optional[Scatterer] = None,
        q_s_antinode: Optional[float] = None,
        node_residual: float = 0.0,
    ) -> DoubletLoss:
        """Split the scattering loss between the standing waves locked to the scatterer

        The antinode-locked (lower frequency) mode takes the full loss; the
        node-locked one keeps q_intrinsic unless node_residual > 0.
        q_s_antinode defaults to scattering_q, whose standing-wave volume already
        carries the antinode energy density.
        """
        if not q_intrinsic > 0:
            raise ValueError(f"q_intrinsic must be positive, got {q_intrinsic}")
        if not 0 <= node_residual <= 1:
            raise ValueError(f"node_residual must lie in [0, 1], got {node_residual}")
        if q_s_antinode is None:
            q_s_antinode = self.scattering_q(mode, sc) if (mode is not None and sc is not None) else math.inf
        inv_s = 0.0 if math.isinf(q_s_antinode) else 1.0 / q_s_antinode
        q_low = 1.0 / (1.0 / q_intrinsic + inv_s)
        q_high = 1.0 / (1.0 / q_intrinsic + node_residual * inv_s)
        return DoubletLoss(q_low=q_low, q_high=q_high)

    def doublet_transmission(
        self,
        omega_grid,
        omega_minus: float,
        omega_plus: float,
        q_low: float,
        q_high: float,
        depth_low: float,
        depth_high: float,
    ) -> SpectrumTrace:
        """Taper transmission through a standing-wave doublet: two Lorentzian dips"""
        for depth in (depth_low, depth_high):
            if not 0 <= depth <= 1:
                raise ValueError(f"dip depth must lie in [0, 1], got {depth}")
        omega = np.asarray(omega_grid, dtype=float)
        transmission = 1.0 - (
            depth_low / (1.0 + 4.0 * q_low ** 2 * (omega / omega_minus - 1.0) ** 2)
            + depth_high / (1.0 + 4.0 * q_high ** 2 * (omega / omega_plus - 1.0) ** 2)
        )
        return SpectrumTrace(abscissa=omega, intensity=transmission, axis=AxisKind.ANGULAR)


scatterer_service = ScattererService()
