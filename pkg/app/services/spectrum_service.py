"""Closed-form detected spectra in the room-temperature limit.

Detuning is always omega - omega_c, entering as 1/(1 + i detuning/kappa).
"""
import math
from typing import Iterable

import numpy as np
from loguru import logger

from app.models.core import SystemParams
from app.models.spectrum import (
    AxisKind,
    CavityTerm,
    CollectionChannel,
    DropFilterMode,
    LensExtrema,
    MultiModeModel,
    SpectrumTrace,
)


class SpectrumService:
    """Fano interference between direct dipole emission and cavity-filtered emission"""

    def _field(self, model: MultiModeModel, omega: np.ndarray) -> np.ndarray:
        field = np.full(omega.shape, model.eps_d * np.exp(-1j * model.phi_d), dtype=complex)
        for mode in model.modes:
            detuning = (omega - mode.omega_c) / mode.kappa
            field += mode.eps_c * np.exp(-1j * mode.phi_c) * math.sqrt(mode.f_o) / (1.0 + 1j * detuning)
        return field

    def multimode_spectrum(self, model: MultiModeModel, omega_grid) -> SpectrumTrace:
        """scale * |eps_d e^{-i phi_d} + sum_k eps_c,k e^{-i phi_c,k} sqrt(F_k) / (1 + i detuning_k/kappa_k)|^2"""
        omega = np.asarray(omega_grid, dtype=float)
        intensity = model.scale * np.abs(self._field(model, omega)) ** 2
        return SpectrumTrace(abscissa=omega, intensity=intensity, axis=AxisKind.ANGULAR)

    def detected_spectrum(self, params: SystemParams, channel: CollectionChannel, omega_grid) -> SpectrumTrace:
        """Spectrum seen through a collection channel, prefactor 1/gamma_p"""
        if params.gamma_p.value <= 0 or params.gamma_s.value <= 0 or params.kappa.value <= 0:
            raise ValueError("closed form needs positive kappa, gamma_s and gamma_p")
        model = MultiModeModel(
            modes=[
                CavityTerm(
                    omega_c=params.omega_c.value,
                    kappa=params.kappa.value,
                    f_o=params.purcell,
                    eps_c=channel.eps_c,
                    phi_c=channel.phi_c,
                )
            ],
            eps_d=channel.eps_d,
            phi_d=channel.phi_d,
            scale=1.0 / params.gamma_p.value,
        )
        return self.multimode_spectrum(model, omega_grid)

    def taper_spectrum(self, params: SystemParams, omega_grid) -> SpectrumTrace:
        """Cavity channel only: a Lorentzian of half-width kappa"""
        return self.detected_spectrum(params, CollectionChannel.taper(), omega_grid)

    def lens_spectrum(self, f_o: float, kappa: float, omega_grid, omega_c: float = 0.0) -> SpectrumTrace:
        """|1 + i sqrt(F_o) / (1 + i x)|^2 with x = (omega - omega_c)/kappa; background is 1"""
        if f_o < 0:
            raise ValueError(f"f_o must be non-negative, got {f_o}")
        if not kappa > 0:
            raise ValueError(f"kappa must be positive, got {kappa}")
        omega = np.asarray(omega_grid, dtype=float)
        x = (omega - omega_c) / kappa
        intensity = np.abs(1.0 + 1j * math.sqrt(f_o) / (1.0 + 1j * x)) ** 2
        return SpectrumTrace(abscissa=omega, intensity=intensity, axis=AxisKind.ANGULAR)

    def lens_extrema(self, f_o: float) -> LensExtrema:
        """Extrema solve x^2 + sqrt(F) x - 1 = 0; the background is crossed at x = -sqrt(F)/2"""
        if f_o < 0:
            raise ValueError(f"f_o must be non-negative, got {f_o}")
        root = math.sqrt(f_o)
        x_max = 0.5 * (-root + math.sqrt(f_o + 4.0))
        x_min = 0.5 * (-root - math.sqrt(f_o + 4.0))

        def level(x: float) -> float:
            return 1.0 + (2.0 * root * x + f_o) / (1.0 + x * x)

        return LensExtrema(x_max=x_max, s_max=level(x_max), x_min=x_min, s_min=level(x_min), x_crossing=-root / 2)

    def drop_filter_spectrum(
        self, modes: Iterable[DropFilterMode], omega_grid, background: float = 1.0
    ) -> SpectrumTrace:
        """Product of Lorentzian dips; no interference between channels"""
        omega = np.asarray(omega_grid, dtype=float)
        transmission = np.full(omega.shape, float(background))
        for mode in modes:
            transmission *= 1.0 - mode.depth / (1.0 + ((omega - mode.omega_c) / mode.kappa) ** 2)
        return SpectrumTrace(abscissa=omega, intensity=transmission, axis=AxisKind.ANGULAR)

    def phase_lag(
        self,
        omega_s: float,
        omega_c: float,
        kappa: float,
        s_c: float = 1.0,
        s_s: float = 1.0,
        kappa_c: float = 1.0,
    ) -> complex:
        """Indirect (cavity) over direct (scatterer) amplitude from classical coupled modes

        Args:
            omega_s: drive frequency of the scatterer source, rad/s
            omega_c: cavity resonance, rad/s
            kappa: cavity field decay rate, rad/s
            s_c, s_s: source-overlap magnitudes of the cavity and direct paths
            kappa_c: magnitude of the cavity output coupling

        Returns:
            Complex ratio; its argument is pi/2 on resonance.
        """
        if not kappa > 0:
            raise ValueError(f"kappa must be positive, got {kappa}")
        ratio = (abs(s_c) / 4.0) * 1j * omega_c * abs(kappa_c) / (
            (abs(s_s) / 2.0) * (1j * (omega_c - omega_s) + kappa)
        )
        logger.debug(f"phase lag {np.angle(ratio):.6f} rad at detuning {(omega_s - omega_c) / kappa:.3g} kappa")
        return complex(ratio)


spectrum_service = SpectrumService()
