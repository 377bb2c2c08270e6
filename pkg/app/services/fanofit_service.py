"""Least-squares extraction of Fano parameters from measured or synthetic traces.

The model is evaluated on the angular-frequency image of the trace's abscissa,
multiplied by a polynomial background and blurred by the instrument response
on the native axis. Centers are fitted as GHz shifts from their starting value,
kappa and F_o in log space.
"""
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from lmfit import Minimizer, Parameters
from loguru import logger
from numpy.polynomial import polynomial
from scipy.constants import speed_of_light
from scipy.ndimage import gaussian_filter1d
from scipy.signal import find_peaks, peak_widths

from app.config.settings import settings
from app.models.errors import ConvergenceError
from app.models.fit import (
    DoubletGuess,
    FitOptions,
    FitProblem,
    FitResult,
    FitStatus,
    InstrumentResponse,
    NoiseKind,
    NoiseSpec,
    ResponseKind,
)
from app.models.spectrum import AxisKind, CavityTerm, MultiModeModel, SpectrumTrace
from app.services.scatterer_service import scatterer_service
from app.services.spectrum_service import spectrum_service

FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))
# leastsq termination codes that mean the tolerance was met or cannot be improved on
_CONVERGED_CODES = {1, 2, 3, 4, 6, 7, 8}


class _Entry:
    """One public parameter and the internal (solver-side) variable carrying it"""

    def __init__(self, public: str, internal: str, kind: str = "plain", ref: float = 0.0):
        self.public = public
        self.internal = internal
        self.kind = kind
        self.ref = ref

    def to_internal(self, value: float) -> float:
        if self.kind == "shift":
            return (value - self.ref) / 1e9
        if self.kind == "log":
            return math.log(value)
        return value

    def to_public(self, value: float) -> float:
        if self.kind == "shift":
            return self.ref + value * 1e9
        if self.kind == "log":
            return math.exp(value)
        return value

    def public_error(self, internal_value: float, stderr: Optional[float]) -> Optional[float]:
        if stderr is None or not np.isfinite(stderr):
            return None
        if self.kind == "shift":
            return stderr * 1e9
        if self.kind == "log":
            return math.exp(internal_value) * stderr
        return stderr

    def bound(self, value: Optional[float]) -> float:
        if value is None:
            return -np.inf
        if self.kind == "log" and value <= 0:
            return -np.inf
        return self.to_internal(value)


class FanoFitService:
    """Multi-mode Fano fitting with a damped least-squares solver"""

    # --- forward model -------------------------------------------------------

    def _native_width(self, trace: SpectrumTrace, fwhm: float) -> float:
        """Instrument FWHM (a wavelength width) expressed in the trace's abscissa units"""
        if trace.axis == AxisKind.WAVELENGTH_NM:
            return fwhm * 1e9
        if trace.axis == AxisKind.DETUNING_HZ and trace.reference_hz is None:
            raise ValueError("detuning trace needs reference_hz to apply a wavelength response")
        center = float(np.mean(np.abs(trace.angular())))
        wavelength = 2.0 * math.pi * speed_of_light / center
        width_hz = speed_of_light * fwhm / wavelength ** 2
        return 2.0 * math.pi * width_hz if trace.axis == AxisKind.ANGULAR else width_hz

    def convolve_response(self, trace: SpectrumTrace, response: Optional[InstrumentResponse]) -> SpectrumTrace:
        """Blur with a unit-area Gaussian of the response FWHM; the summed intensity is preserved"""
        if response is None or response.kind == ResponseKind.NONE:
            return trace
        steps = np.abs(np.diff(trace.abscissa))
        step = float(np.mean(steps))
        if np.ptp(steps) > 1e-3 * step:
            raise ValueError("instrument response needs a uniformly sampled abscissa")
        width = self._native_width(trace, response.fwhm)
        if width >= abs(trace.abscissa[-1] - trace.abscissa[0]):
            raise ValueError("instrument response is wider than the trace window")
        sigma = width / step / FWHM_PER_SIGMA
        return trace.with_intensity(gaussian_filter1d(trace.intensity, sigma, mode="reflect"))

    def _background(self, omega: np.ndarray, coefficients: Sequence[float]) -> np.ndarray:
        lo, hi = float(np.min(omega)), float(np.max(omega))
        u = 2.0 * (omega - lo) / (hi - lo) - 1.0 if hi > lo else np.zeros_like(omega)
        return polynomial.polyval(u, np.asarray(coefficients, dtype=float))

    def _evaluate(
        self,
        template: SpectrumTrace,
        model: MultiModeModel,
        background: Sequence[float],
        response: Optional[InstrumentResponse],
    ) -> np.ndarray:
        omega = template.angular()
        line = spectrum_service.multimode_spectrum(model, omega).intensity * self._background(omega, background)
        return self.convolve_response(template.with_intensity(line), response).intensity

    def synthesize(
        self,
        model: MultiModeModel,
        abscissa,
        axis: AxisKind = AxisKind.ANGULAR,
        background: Sequence[float] = (1.0,),
        response: Optional[InstrumentResponse] = None,
        noise: Optional[NoiseSpec] = None,
        reference_hz: Optional[float] = None,
    ) -> SpectrumTrace:
        """Model x background, blurred, with seeded noise; identical seeds give identical traces"""
        abscissa = np.asarray(abscissa, dtype=float)
        template = SpectrumTrace(
            abscissa=abscissa, intensity=np.zeros_like(abscissa), axis=axis, reference_hz=reference_hz
        )
        clean = self._evaluate(template, model, background, response)
        return self.apply_noise(template.with_intensity(clean), noise)

    def apply_noise(self, trace: SpectrumTrace, noise: Optional[NoiseSpec]) -> SpectrumTrace:
        if noise is None or noise.kind == NoiseKind.NONE or noise.level == 0:
            return trace
        rng = np.random.default_rng(noise.seed)
        draw = rng.standard_normal(len(trace))
        if noise.kind == NoiseKind.MULTIPLICATIVE:
            return trace.with_intensity(trace.intensity * (1.0 + noise.level * draw))
        return trace.with_intensity(trace.intensity + noise.level * draw)

    # --- parameter bookkeeping ----------------------------------------------

    def _entries(self, problem: FitProblem) -> List[_Entry]:
        start = problem.initial_values()
        entries: List[_Entry] = []
        for k in range(len(problem.model.modes)):
            entries.append(_Entry(f"mode{k}.center_hz", f"m{k}_shift", "shift", start[f"mode{k}.center_hz"]))
            entries.append(_Entry(f"mode{k}.kappa_ghz", f"m{k}_logk", "log"))
            f_name = f"mode{k}.f_o"
            entries.append(_Entry(f_name, f"m{k}_f", "log" if problem.is_free(f_name) else "plain"))
            entries.append(_Entry(f"mode{k}.eps_c", f"m{k}_eps_c"))
            entries.append(_Entry(f"mode{k}.phi_c", f"m{k}_phi_c"))
        entries += [_Entry("eps_d", "eps_d"), _Entry("phi_d", "phi_d"), _Entry("scale", "scale")]
        entries += [_Entry(f"background.c{j}", f"bg{j}") for j in range(len(problem.background))]
        return entries

    def _parameters(self, problem: FitProblem, entries: List[_Entry]) -> Parameters:
        start = problem.initial_values()
        params = Parameters()
        for entry in entries:
            lo, hi = problem.bounds.get(entry.public, (None, None))
            lo_int = entry.bound(lo)
            hi_int = np.inf if hi is None else entry.to_internal(hi)
            if entry.public.endswith("eps_c") or entry.public == "eps_d":
                lo_int = max(lo_int, 0.0)
            params.add(
                entry.internal,
                value=entry.to_internal(start[entry.public]),
                vary=problem.is_free(entry.public),
                min=lo_int,
                max=hi_int,
            )
        for lock in problem.locked_doublets:
            offset = (
                start[f"mode{lock.first}.center_hz"] - start[f"mode{lock.second}.center_hz"] + lock.splitting_hz
            ) / 1e9
            params[f"m{lock.second}_shift"].set(expr=f"m{lock.first}_shift + {offset!r}")
            params[f"m{lock.second}_logk"].set(expr=f"m{lock.first}_logk")
        return params

    def _model_from_public(self, problem: FitProblem, values: Dict[str, float]) -> MultiModeModel:
        modes = [
            CavityTerm(
                omega_c=2.0 * math.pi * values[f"mode{k}.center_hz"],
                kappa=2.0 * math.pi * values[f"mode{k}.kappa_ghz"] * 1e9,
                f_o=values[f"mode{k}.f_o"],
                eps_c=values[f"mode{k}.eps_c"],
                phi_c=values[f"mode{k}.phi_c"],
            )
            for k in range(len(problem.model.modes))
        ]
        return MultiModeModel(modes=modes, eps_d=values["eps_d"], phi_d=values["phi_d"], scale=values["scale"])

    def _background_from_public(self, problem: FitProblem, values: Dict[str, float]) -> List[float]:
        return [values[f"background.c{j}"] for j in range(len(problem.background))]

    def model_curve(self, problem: FitProblem, parameters: Dict[str, float]) -> Tuple[np.ndarray, np.ndarray]:
        """Model intensity and data-minus-model residual at the given public parameters"""
        model = self._evaluate(
            problem.trace,
            self._model_from_public(problem, parameters),
            self._background_from_public(problem, parameters),
            problem.response,
        )
        return model, problem.trace.intensity - model

    # --- solver --------------------------------------------------------------

    def _solve(
        self,
        entries: List[_Entry],
        params: Parameters,
        evaluate: Callable[[Dict[str, float]], np.ndarray],
        trace: SpectrumTrace,
        options: FitOptions,
    ) -> FitResult:
        data = trace.intensity
        sigma = trace.uncertainty

        def public_values(p: Parameters) -> Dict[str, float]:
            raw = p.valuesdict()
            return {e.public: e.to_public(raw[e.internal]) for e in entries}

        def residual(p: Parameters) -> np.ndarray:
            r = evaluate(public_values(p)) - data
            return r if sigma is None else r / sigma

        start = public_values(params)
        initial_norm = float(np.linalg.norm(residual(params)))
        if not np.isfinite(initial_norm):
            raise ValueError("initial residual is not finite")
        free = [e for e in entries if params[e.internal].vary and params[e.internal].expr is None]
        if not free:
            logger.info(f"all parameters frozen; residual norm {initial_norm:.6g}")
            return FitResult(
                parameters=start,
                errors={},
                residual_norm=initial_norm,
                initial_residual_norm=initial_norm,
                iterations=0,
                status=FitStatus.FROZEN,
                message="no free parameters",
            )

        minimizer = Minimizer(residual, params, scale_covar=True, max_nfev=options.max_iter)
        out = minimizer.leastsq(ftol=options.tolerance, xtol=options.tolerance, factor=options.damping)

        ier = getattr(out, "ier", None)
        if getattr(out, "aborted", False) or ier == 5:
            status = FitStatus.MAX_ITERATIONS
        elif ier in _CONVERGED_CODES and out.errorbars:
            status = FitStatus.CONVERGED
        elif ier in _CONVERGED_CODES:
            status = FitStatus.SINGULAR_JACOBIAN
        else:
            status = FitStatus.MAX_ITERATIONS

        best = out.params
        final_norm = float(np.linalg.norm(residual(best)))
        message = str(getattr(out, "message", ""))
        if not final_norm <= initial_norm:
            best, final_norm = params, initial_norm
            message = "solver did not improve on the starting point"
        raw = best.valuesdict()
        errors = {e.public: e.public_error(raw[e.internal], best[e.internal].stderr) for e in free}
        if status == FitStatus.SINGULAR_JACOBIAN:
            errors = {name: None for name in errors}

        logger.info(
            f"fit {status.value} after {out.nfev} evaluations: residual {initial_norm:.6g} -> {final_norm:.6g}"
        )
        return FitResult(
            parameters=public_values(best),
            errors=errors,
            residual_norm=final_norm,
            initial_residual_norm=initial_norm,
            iterations=int(out.nfev),
            status=status,
            message=message,
        )

    def fit(self, problem: FitProblem, options: Optional[FitOptions] = None, strict: bool = False) -> FitResult:
        """Fit the multi-mode Fano model to problem.trace

        Args:
            problem: trace, starting model, background and free/frozen flags
            options: iteration cap, tolerance and solver damping
            strict: raise ConvergenceError (carrying the best result) instead of
                returning a non-converged result

        Returns:
            FitResult whose residual norm never exceeds the starting one
        """
        options = options or FitOptions()
        entries = self._entries(problem)
        params = self._parameters(problem, entries)

        def evaluate(values: Dict[str, float]) -> np.ndarray:
            return self._evaluate(
                problem.trace,
                self._model_from_public(problem, values),
                self._background_from_public(problem, values),
                problem.response,
            )

        result = self._solve(entries, params, evaluate, problem.trace, options)
        if strict and result.status == FitStatus.MAX_ITERATIONS:
            raise ConvergenceError(f"fit stopped after {result.iterations} evaluations", best=result)
        return result

    def fit_many(
        self, problems: Sequence[FitProblem], options: Optional[FitOptions] = None, threads: Optional[int] = None
    ) -> List[FitResult]:
        """Independent windows fitted concurrently; results keep the input order"""
        workers = max(1, threads or settings.threads)
        logger.info(f"fitting {len(problems)} windows on {workers} thread(s)")
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda p: self.fit(p, options), problems))

    def fit_doublet(
        self, trace: SpectrumTrace, guess: DoubletGuess, options: Optional[FitOptions] = None
    ) -> FitResult:
        """Two Lorentzian dips of a standing-wave doublet in taper transmission"""
        options = options or FitOptions()
        entries = [
            _Entry("doublet.nu_minus_hz", "nu_minus", "shift", guess.nu_minus_hz),
            _Entry("doublet.nu_plus_hz", "nu_plus", "shift", guess.nu_plus_hz),
            _Entry("doublet.q_low", "log_q_low", "log"),
            _Entry("doublet.q_high", "log_q_high", "log"),
            _Entry("doublet.depth_low", "depth_low"),
            _Entry("doublet.depth_high", "depth_high"),
            _Entry("background.c0", "bg0"),
        ]
        params = Parameters()
        params.add("nu_minus", value=0.0)
        params.add("nu_plus", value=0.0)
        params.add("log_q_low", value=math.log(guess.q_low))
        params.add("log_q_high", value=math.log(guess.q_high))
        params.add("depth_low", value=guess.depth_low, min=0.0, max=1.0)
        params.add("depth_high", value=guess.depth_high, min=0.0, max=1.0)
        params.add("bg0", value=float(np.max(trace.intensity)))
        omega = trace.angular()

        def evaluate(values: Dict[str, float]) -> np.ndarray:
            dips = scatterer_service.doublet_transmission(
                omega,
                2.0 * math.pi * values["doublet.nu_minus_hz"],
                2.0 * math.pi * values["doublet.nu_plus_hz"],
                values["doublet.q_low"],
                values["doublet.q_high"],
                values["doublet.depth_low"],
                values["doublet.depth_high"],
            )
            return values["background.c0"] * dips.intensity

        return self._solve(entries, params, evaluate, trace, options)

    def seed_modes(
        self, trace: SpectrumTrace, count: int = 1, dips: bool = False, f_o: float = 0.1
    ) -> List[CavityTerm]:
        """Starting cavity terms from the most prominent local extrema, ordered by frequency"""
        y = -trace.intensity if dips else trace.intensity
        peaks, props = find_peaks(y, prominence=0.0)
        if peaks.size == 0:
            return []
        chosen = peaks[np.argsort(props["prominences"])[::-1][:count]]
        widths = peak_widths(y, chosen, rel_height=0.5)[0]
        omega = trace.angular()
        step = float(np.mean(np.abs(np.diff(omega))))
        terms = [
            CavityTerm(omega_c=float(omega[i]), kappa=max(0.5 * w * step, step), f_o=f_o)
            for i, w in zip(chosen, widths)
        ]
        logger.debug(f"seeded {len(terms)} mode(s) from {peaks.size} local extrema")
        return sorted(terms, key=lambda t: t.omega_c)


fanofit_service = FanoFitService()
