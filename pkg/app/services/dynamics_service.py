"""Master-equation moments, quantum-regression propagation and the numeric spectrum.

Within the single-excitation manifold the equal-time second moments close on
(p_c, p_d, x) with x = <a^dag sigma_->:

    dp_c/dt = 2g Re x - 2 kappa p_c
    dp_d/dt = -2g Re x - gamma_s p_d
    dx/dt   = [i(omega_c - omega_d) - kappa - gamma_s/2 - gamma_p] x + g (p_d - p_c)

Two-time correlations for t' > t follow the first-moment matrix M by the
regression theorem; the tau transform of exp(M tau) is the resolvent
-(M + i omega)^-1, and the outer t integral is carried by accumulators
integrated alongside the moments.
"""
import math
from typing import Optional

import numpy as np
from loguru import logger
from scipy.integrate import solve_ivp

from app.config.settings import settings
from app.models.core import SystemParams
from app.models.dynamics import CorrelationSet, MomentState, MomentTrajectory, RoomTemperatureReport
from app.models.errors import NumericalError
from app.models.spectrum import AxisKind, CollectionChannel, SpectrumTrace
from app.services.spectrum_service import spectrum_service

# below this |s tau| the propagator uses its Taylor form (defective-matrix limit)
_SERIES_THRESHOLD = 1e-3
_MAX_HORIZON_DOUBLINGS = 6


class DynamicsService:
    """First-principles emission dynamics of the dipole-cavity system"""

    # --- generators -------------------------------------------------------

    def first_moment_matrix(self, params: SystemParams) -> np.ndarray:
        g = params.g.value
        return np.array(
            [
                [-(1j * params.omega_c.value + params.kappa.value), g],
                [-g, -(1j * params.omega_d.value + params.gamma_s.value / 2 + params.gamma_p.value)],
            ],
            dtype=complex,
        )

    def second_moment_generator(self, params: SystemParams) -> np.ndarray:
        """Real 4x4 generator acting on (p_c, p_d, Re x, Im x)"""
        g = params.g.value
        kappa = params.kappa.value
        gamma_s = params.gamma_s.value
        big_gamma = kappa + gamma_s / 2 + params.gamma_p.value
        delta = params.omega_c.value - params.omega_d.value
        return np.array(
            [
                [-2 * kappa, 0.0, 2 * g, 0.0],
                [0.0, -gamma_s, -2 * g, 0.0],
                [-g, g, -big_gamma, -delta],
                [0.0, 0.0, delta, -big_gamma],
            ]
        )

    def decay_horizon(self, params: SystemParams) -> float:
        """Slowest non-zero decay rate of the equal-time moments, rad/s (0 if nothing decays)"""
        rates = -np.linalg.eigvals(self.second_moment_generator(params)).real
        scale = max(np.max(np.abs(rates)), 1e-300)
        positive = rates[rates > 1e-12 * scale]
        return float(np.min(positive)) if positive.size else 0.0

    # --- equal-time moments ------------------------------------------------

    def _integrate(self, params: SystemParams, initial: MomentState, t_eval: np.ndarray, unit: float):
        """Integrate moments plus their running integrals in dimensionless time t*unit"""
        a4 = self.second_moment_generator(params) / unit
        gen = np.zeros((8, 8))
        gen[:4, :4] = a4
        gen[4:, :4] = np.eye(4)
        y0 = np.array(
            [initial.p_c, initial.p_d, initial.x_cross.real, initial.x_cross.imag, 0.0, 0.0, 0.0, 0.0]
        )
        span = (0.0, float(t_eval[-1]) * unit)
        sol = solve_ivp(
            lambda t, y: gen @ y,
            span,
            y0,
            method=settings.ode_method,
            t_eval=t_eval * unit,
            rtol=settings.ode_rtol,
            atol=settings.ode_atol,
            jac=gen,
        )
        if not sol.success:
            raise NumericalError(
                f"moment integration failed: {sol.message}",
                diagnostics={"nfev": sol.nfev, "t_reached": float(sol.t[-1]) / unit if sol.t.size else 0.0},
            )
        y = sol.y
        y[4:] /= unit
        return y

    def moment_evolution(
        self, params: SystemParams, t_grid, initial: Optional[MomentState] = None
    ) -> MomentTrajectory:
        """Moments on t_grid (seconds) starting from an excited dipole and an empty cavity"""
        t = np.asarray(t_grid, dtype=float)
        if t.ndim != 1 or t.size == 0 or t[0] < 0 or np.any(np.diff(t) <= 0):
            raise ValueError("t_grid must be a non-negative, strictly increasing 1-D grid")
        initial = initial or MomentState.excited_dipole()
        unit = max(self.decay_horizon(params), 1.0 / t[-1] if t[-1] > 0 else 1.0)
        y = self._integrate(params, initial, t, unit)

        first = self.regression_propagator(params, t) @ np.array([initial.a_mean, initial.sigma_mean])
        emitted = params.gamma_s.value * y[5] + 2.0 * params.kappa.value * y[4]
        logger.debug(f"moment evolution: {t.size} samples, emitted fraction {emitted[-1]:.9f}")
        return MomentTrajectory(
            t=t,
            a_mean=first[:, 0],
            sigma_mean=first[:, 1],
            p_c=y[0],
            p_d=y[1],
            x_cross=y[2] + 1j * y[3],
            emitted=emitted,
        )

    def integrated_moments(self, params: SystemParams, initial: Optional[MomentState] = None) -> np.ndarray:
        """Equal-time matrix R[i, j] = <b_j^dag b_i>, b = (a, sigma_-), integrated over t in [0, inf)

        The horizon is horizon_factor / slowest rate and is doubled until the
        remaining tail is below the configured tolerance.
        """
        initial = initial or MomentState.excited_dipole()
        slowest = self.decay_horizon(params)
        if slowest <= 0:
            raise NumericalError("no decay channel: emission never completes", diagnostics={"slowest_rate": 0.0})

        horizon = settings.horizon_factor / slowest
        for _ in range(_MAX_HORIZON_DOUBLINGS + 1):
            y = self._integrate(params, initial, np.array([horizon]), slowest)[:, -1]
            p_bar = y[4] + y[5]
            tail = (abs(y[0]) + abs(y[1]) + math.hypot(y[2], y[3])) / slowest
            if tail <= settings.tail_tolerance * p_bar:
                break
            logger.warning(f"tail estimate {tail / p_bar:.2e} above tolerance; extending horizon to {2 * horizon:.3e} s")
            horizon *= 2
        else:
            raise NumericalError(
                "truncated tail does not fall below tolerance",
                diagnostics={"horizon": horizon, "relative_tail": tail / p_bar},
            )

        # the remaining tail obeys the linear generator exactly: integral = -A^-1 y(T)
        try:
            y[4:] += -np.linalg.solve(self.second_moment_generator(params), y[:4])
        except np.linalg.LinAlgError as e:
            raise NumericalError(f"singular moment generator: {e}", diagnostics={"horizon": horizon}) from e

        x_bar = y[6] + 1j * y[7]
        logger.debug(f"integrated moments over {horizon:.3e} s, relative tail {tail / p_bar:.2e}")
        return np.array([[y[4], np.conj(x_bar)], [x_bar, y[5]]], dtype=complex)

    # --- two-time propagation ----------------------------------------------

    def regression_propagator(self, params: SystemParams, tau) -> np.ndarray:
        """exp(M tau) for the 2x2 first-moment matrix, from its eigen-decomposition

        With mean eigenvalue lam and half-splitting s,
        exp(M tau) = e^{lam tau} [cosh(s tau) I + sinh(s tau)/s (M - lam I)];
        the Taylor form covers the degenerate (Jordan) limit s -> 0.
        Scalar tau gives a (2, 2) array, array tau a (n, 2, 2) array.
        """
        tau_arr = np.asarray(tau, dtype=float)
        if np.any(tau_arr < 0):
            raise ValueError("tau must be non-negative")
        m = self.first_moment_matrix(params)
        lam = 0.5 * (m[0, 0] + m[1, 1])
        s = np.sqrt(0.25 * (m[0, 0] - m[1, 1]) ** 2 + m[0, 1] * m[1, 0])
        shifted = m - lam * np.eye(2)

        t = np.atleast_1d(tau_arr)
        st = s * t
        small = np.abs(st) < _SERIES_THRESHOLD
        cosh_part = np.empty(t.shape, dtype=complex)
        sinhc_part = np.empty(t.shape, dtype=complex)

        # each exponential below has a non-positive real part, so nothing overflows
        big = ~small
        e_plus = np.exp((lam + s) * t[big])
        e_minus = np.exp((lam - s) * t[big])
        cosh_part[big] = 0.5 * (e_plus + e_minus)
        sinhc_part[big] = 0.5 * (e_plus - e_minus) / s if s != 0 else 0.0

        sq = st[small] ** 2
        decay = np.exp(lam * t[small])
        cosh_part[small] = decay * (1 + sq / 2 + sq ** 2 / 24)
        sinhc_part[small] = decay * t[small] * (1 + sq / 6 + sq ** 2 / 120)

        out = cosh_part[:, None, None] * np.eye(2) + sinhc_part[:, None, None] * shifted
        return out[0] if tau_arr.ndim == 0 else out

    def resolvent(self, params: SystemParams, omega_grid) -> np.ndarray:
        """K(omega) = integral_0^inf e^{i omega tau} exp(M tau) dtau = -(M + i omega)^-1, shape (n, 2, 2)"""
        m = self.first_moment_matrix(params)
        if np.max(np.linalg.eigvals(m).real) >= 0:
            raise NumericalError("first-moment matrix has a non-decaying pole; transform diverges")
        omega = np.asarray(omega_grid, dtype=float)
        n11 = m[0, 0] + 1j * omega
        n22 = m[1, 1] + 1j * omega
        det = n11 * n22 - m[0, 1] * m[1, 0]
        k = np.empty(omega.shape + (2, 2), dtype=complex)
        k[..., 0, 0] = -n22 / det
        k[..., 0, 1] = m[0, 1] / det
        k[..., 1, 0] = m[1, 0] / det
        k[..., 1, 1] = -n11 / det
        return k

    # --- spectra -------------------------------------------------------------

    def _amplitudes(self, params: SystemParams, channel: CollectionChannel) -> np.ndarray:
        """Collection weights on (a, sigma_-).

        The moments rotate as e^{-i omega t}; the collection phases are quoted in
        the conjugate (e^{+i omega t}) convention of the closed forms, so they
        enter here with the opposite sign.
        """
        return np.array(
            [
                channel.eps_c * np.exp(1j * channel.phi_c) * math.sqrt(2.0 * params.kappa.value),
                channel.eps_d * np.exp(1j * channel.phi_d) * math.sqrt(params.gamma_s.value),
            ]
        )

    def numeric_spectrum(self, params: SystemParams, channel: CollectionChannel, omega_grid) -> SpectrumTrace:
        """S(omega) = Re of the double transform of <E^dag(t) E(t')> over the full (t, t') quadrant

        The quadrant splits into two mirror triangles, so S = 2 Re[c K(omega) R c^dag].
        """
        omega = np.asarray(omega_grid, dtype=float)
        c = self._amplitudes(params, channel)
        kr = self.resolvent(params, omega) @ self.integrated_moments(params)
        half = np.einsum("i,nij,j->n", c, kr, np.conj(c))
        spectrum = 2.0 * half.real
        logger.info(f"numeric spectrum on {omega.size} points, peak {np.max(spectrum):.4g}")
        return SpectrumTrace(abscissa=omega, intensity=spectrum, axis=AxisKind.ANGULAR)

    def closed_form_correlations(self, params: SystemParams, omega_grid) -> CorrelationSet:
        """Room-temperature limit (gamma_p dominant, omega_d = omega_c)"""
        g = params.g.value
        kappa = params.kappa.value
        gp_gs = params.gamma_p.value * params.gamma_s.value
        if gp_gs <= 0 or kappa <= 0:
            raise ValueError("closed forms need positive kappa, gamma_s and gamma_p")
        omega = np.asarray(omega_grid, dtype=float)
        pole = 1j * (omega - params.omega_c.value) + kappa
        return CorrelationSet(
            omega=omega,
            c_cc=(g ** 2 / (gp_gs * kappa)) / pole,
            c_dd=np.full(omega.shape, 1.0 / gp_gs, dtype=complex),
            c_cd=np.zeros(omega.shape, dtype=complex),
            c_dc=(g / gp_gs) / pole,
        )

    def compare_room_temperature(
        self, params: SystemParams, channel: CollectionChannel, omega_grid
    ) -> RoomTemperatureReport:
        """Numeric spectrum against 2 x the closed form, after aligning the overall scale"""
        rates = max(params.kappa.value, params.g.value, params.gamma_s.value)
        if params.gamma_p.value < 100 * rates:
            logger.warning(
                f"gamma_p/max(kappa, g, gamma_s) = {params.gamma_p.value / rates:.3g}; "
                "outside the room-temperature regime"
            )
        omega = np.asarray(omega_grid, dtype=float)
        numeric = self.numeric_spectrum(params, channel, omega).intensity
        reference = 2.0 * spectrum_service.detected_spectrum(params, channel, omega).intensity
        scale = float(np.dot(numeric, reference) / np.dot(reference, reference))
        closed = scale * reference
        peak = np.max(np.abs(closed))
        rel_error = np.abs(numeric - closed) / peak
        l2 = float(np.linalg.norm(numeric - closed) / np.linalg.norm(closed))
        logger.info(f"room-temperature comparison: max rel error {np.max(rel_error):.3e}, L2 {l2:.3e}, scale {scale:.6f}")
        return RoomTemperatureReport(
            omega=omega,
            s_numeric=numeric,
            s_closed=closed,
            rel_error=rel_error,
            scale=scale,
            max_rel_error=float(np.max(rel_error)),
            l2_rel_error=l2,
        )


dynamics_service = DynamicsService()
