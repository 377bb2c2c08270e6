import math
from typing import List, Optional

import numpy as np
import pandas as pd
from loguru import logger
from pydantic import ValidationError

from app.handlers.documents import (
    EmitterSpec,
    FitDocument,
    ModeRow,
    ModesDocument,
    RegressDocument,
    SimulateDocument,
    load_mode_tables,
    parse_system,
)
from app.models.core import Scatterer
from app.models.errors import NumericalError, SchemaError
from app.models.fit import FitOptions, FitProblem, FitResult, FitStatus
from app.models.run import Command, RunConfig
from app.models.spectrum import (
    AxisKind,
    CavityTerm,
    CollectionChannel,
    DropFilterMode,
    MultiModeModel,
    SpectrumTrace,
)
from app.services import trace_io
from app.services.coupling_service import coupling_service
from app.services.dynamics_service import dynamics_service
from app.services.fanofit_service import fanofit_service
from app.services.scatterer_service import scatterer_service
from app.services.spectrum_service import spectrum_service

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_SCHEMA = 2
EXIT_NOT_CONVERGED = 3


class CommandHandler:
    """Runs one CLI subcommand and maps failures to exit codes"""

    def run(self, config: RunConfig) -> int:
        handlers = {
            Command.SIMULATE: self.cmd_simulate,
            Command.FIT: self.cmd_fit,
            Command.MODES: self.cmd_modes,
            Command.REGRESS: self.cmd_regress,
        }
        try:
            return handlers[config.command](config)
        except SchemaError as e:
            logger.error(f"Invalid input: {str(e)}")
            return EXIT_SCHEMA
        except NumericalError as e:
            logger.error(f"Numerical failure: {str(e)} {e.diagnostics}")
            return EXIT_NUMERICAL
        except ValueError as e:
            logger.error(f"Rejected input: {str(e)}")
            return EXIT_SCHEMA

    # --- simulate ----------------------------------------------------------

    def _carrier_hz(self, doc: SimulateDocument) -> float:
        """Frequency a detuning grid is measured from when the document does not say"""
        if doc.spectrum == "lens":
            return doc.center_hz
        if doc.spectrum == "multimode":
            return doc.modes[0].center_hz
        if doc.spectrum == "drop_filter":
            return doc.drop_modes[0].center_hz
        return parse_system(doc.system).omega_c.hz

    def _simulate_trace(self, doc: SimulateDocument) -> SpectrumTrace:
        if doc.spectrum == "lens":
            kappa = 2.0 * math.pi * doc.kappa_hz_over_2pi
            omega = doc.grid.angular(self._carrier_hz(doc))
            return spectrum_service.lens_spectrum(doc.f_o, kappa, omega, omega_c=2.0 * math.pi * doc.center_hz)
        if doc.spectrum == "multimode":
            model = MultiModeModel(
                modes=[
                    CavityTerm(
                        omega_c=2.0 * math.pi * m.center_hz,
                        kappa=2.0 * math.pi * m.kappa_hz_over_2pi,
                        f_o=m.f_o,
                        eps_c=m.eps_c,
                        phi_c=m.phi_c,
                    )
                    for m in doc.modes
                ],
                eps_d=doc.eps_d,
                phi_d=doc.phi_d,
                scale=doc.scale,
            )
            omega = doc.grid.angular(self._carrier_hz(doc))
            return spectrum_service.multimode_spectrum(model, omega)
        if doc.spectrum == "drop_filter":
            modes = [
                DropFilterMode(
                    omega_c=2.0 * math.pi * m.center_hz, kappa=2.0 * math.pi * m.kappa_hz_over_2pi, depth=m.depth
                )
                for m in doc.drop_modes
            ]
            omega = doc.grid.angular(self._carrier_hz(doc))
            return spectrum_service.drop_filter_spectrum(modes, omega, background=doc.background[0])

        params = parse_system(doc.system)
        omega = doc.grid.angular(params.omega_c.hz)
        if doc.spectrum == "taper":
            return spectrum_service.taper_spectrum(params, omega)
        channel = doc.channel or CollectionChannel.lens()
        if doc.spectrum == "numeric":
            return dynamics_service.numeric_spectrum(params, channel, omega)
        return spectrum_service.detected_spectrum(params, channel, omega)

    def cmd_simulate(self, config: RunConfig) -> int:
        """JSON model in, CSV trace out on the requested grid"""
        doc = SimulateDocument.parse(trace_io.load_document(config.input))
        logger.info(f"Simulating {doc.spectrum} spectrum on {doc.grid.points} points")
        try:
            angular = self._simulate_trace(doc)
        except (ValidationError, ValueError) as e:
            raise SchemaError(str(e)) from e

        reference = None
        if doc.grid.axis == AxisKind.DETUNING_HZ:
            reference = doc.grid.reference_hz if doc.grid.reference_hz is not None else self._carrier_hz(doc)
        trace = SpectrumTrace(
            abscissa=doc.grid.abscissa(), intensity=angular.intensity, axis=doc.grid.axis, reference_hz=reference
        )
        try:
            trace = fanofit_service.convolve_response(trace, doc.response)
        except ValueError as e:
            raise SchemaError(str(e)) from e
        noise = doc.noise
        if noise is not None and config.seed is not None:
            noise = noise.model_copy(update={"seed": config.seed})
        trace = fanofit_service.apply_noise(trace, noise)
        trace_io.write_trace(config.output, trace, {"spectrum": doc.spectrum, "points": len(trace)})
        return EXIT_OK

    # --- modes -------------------------------------------------------------

    def _mode_row(self, row: ModeRow, doc: ModesDocument, emitter: Optional[EmitterSpec]) -> dict:
        spec = row.scatterer or doc.scatterer
        sc = Scatterer.sphere(spec.diameter, eta_at_site=row.mode.eta_nc, n_nc=spec.n_nc)
        q_s = scatterer_service.scattering_q(row.mode, sc)
        backscatter = scatterer_service.backscatter(row.mode, sc)
        q_intrinsic = row.q_intrinsic or row.mode.q_rad
        out = {
            "name": row.name or row.mode.label,
            "q_ss": q_s,
            "q_ss_reported": row.q_ss_reported,
            "inv_q_beta": backscatter.normalized_splitting,
            "splitting_ghz": backscatter.splitting_ghz,
            "g_max_ghz": None,
            "q_low": None,
            "q_high": None,
        }
        if emitter is not None:
            g = coupling_service.coupling_rate(emitter.emitter(), row.mode, row.mode.eta_s)
            out["g_max_ghz"] = g.hz / 1e9
        if q_intrinsic is not None:
            loss = scatterer_service.doublet_loss(q_intrinsic, q_s_antinode=q_s)
            out["q_low"], out["q_high"] = loss.q_low, loss.q_high
        return out

    def cmd_modes(self, config: RunConfig) -> int:
        """Scattering Q, splitting and coupling per table row; failing rows are listed and skipped"""
        doc = ModesDocument.parse(trace_io.load_document(config.input))
        emitter = doc.emitter
        if emitter is None:
            emitter = EmitterSpec(**load_mode_tables()["emitter"])

        rows: List[dict] = []
        failures = 0
        for i, raw in enumerate(doc.all_rows()):
            try:
                rows.append(self._mode_row(ModeRow.model_validate(raw), doc, emitter))
            except (ValidationError, ValueError) as e:
                failures += 1
                logger.error(f"Row {i} ({raw.get('name', '?') if isinstance(raw, dict) else '?'}) rejected: {str(e)}")

        columns = ["name", "q_ss", "q_ss_reported", "inv_q_beta", "splitting_ghz", "g_max_ghz", "q_low", "q_high"]
        trace_io.write_table(config.output, pd.DataFrame(rows, columns=columns), {"rows": len(rows), "failed": failures})
        return EXIT_NUMERICAL if failures else EXIT_OK

    # --- fit -----------------------------------------------------------------

    def _fit_problem(self, doc: FitDocument, trace: SpectrumTrace) -> FitProblem:
        if doc.modes:
            terms = [
                CavityTerm(omega_c=m.omega_c, kappa=2.0 * math.pi * m.kappa_ghz * 1e9, f_o=m.f_o, eps_c=m.eps_c, phi_c=m.phi_c)
                for m in doc.modes
            ]
        else:
            terms = fanofit_service.seed_modes(trace, count=doc.seed_modes)
        model = MultiModeModel(modes=terms, eps_d=doc.eps_d, phi_d=doc.phi_d, scale=doc.scale)
        extra = {} if doc.background is None else {"background": doc.background}
        return FitProblem(
            trace=trace,
            model=model,
            response=doc.response,
            vary=doc.vary,
            bounds=doc.bounds,
            locked_doublets=doc.locked_doublets,
            **extra,
        )

    def _window(self, trace: SpectrumTrace, lo: float, hi: float) -> SpectrumTrace:
        keep = (trace.abscissa >= min(lo, hi)) & (trace.abscissa <= max(lo, hi))
        return SpectrumTrace(
            abscissa=trace.abscissa[keep],
            intensity=trace.intensity[keep],
            uncertainty=None if trace.uncertainty is None else trace.uncertainty[keep],
            axis=trace.axis,
            reference_hz=trace.reference_hz,
        )

    def cmd_fit(self, config: RunConfig) -> int:
        """Fit a trace; the JSON report is written even when the fit does not converge"""
        doc = FitDocument.parse(trace_io.load_document(config.input))
        trace = trace_io.read_trace(config.trace, reference_hz=doc.reference_hz)
        options = doc.options or FitOptions()
        if config.tolerance is not None:
            options = options.model_copy(update={"tolerance": config.tolerance})

        windows = doc.windows or [(trace.abscissa[0], trace.abscissa[-1])]
        try:
            problems = [self._fit_problem(doc, self._window(trace, lo, hi)) for lo, hi in windows]
        except (ValidationError, ValueError) as e:
            raise SchemaError(str(e)) from e
        results: List[FitResult] = fanofit_service.fit_many(problems, options, threads=config.threads)

        if doc.windows:
            trace_io.write_document(config.output, {"windows": [r.report() for r in results]})
        else:
            trace_io.write_document(config.output, results[0].report())

        if config.overlay is not None:
            frames = []
            for problem, result in zip(problems, results):
                model, residual = fanofit_service.model_curve(problem, result.parameters)
                frames.append(
                    pd.DataFrame(
                        {
                            problem.trace.axis.value: problem.trace.abscissa,
                            "intensity": problem.trace.intensity,
                            "model": model,
                            "residual": residual,
                        }
                    )
                )
            trace_io.write_table(config.overlay, pd.concat(frames, ignore_index=True))

        stalled = [r for r in results if r.status == FitStatus.MAX_ITERATIONS]
        if stalled:
            logger.error(f"{len(stalled)} of {len(results)} fit(s) did not converge")
            return EXIT_NOT_CONVERGED
        return EXIT_OK

    # --- regress -------------------------------------------------------------

    def cmd_regress(self, config: RunConfig) -> int:
        """Numeric spectrum against the room-temperature closed form; report kept on failure"""
        data = trace_io.load_document(config.input) if config.input is not None else {}
        doc = RegressDocument.parse(data)
        params = doc.params()
        threshold = config.tolerance or doc.threshold
        omega = params.omega_c.value + params.kappa.value * np.linspace(-doc.span_kappa, doc.span_kappa, doc.points)
        try:
            report = dynamics_service.compare_room_temperature(params, doc.channel, omega)
        except ValueError as e:
            raise SchemaError(str(e)) from e

        frame = pd.DataFrame(
            {
                "omega": report.omega,
                "s_numeric": report.s_numeric,
                "s_closed": report.s_closed,
                "rel_error": report.rel_error,
            }
        )
        summary = {
            "max_rel_error": f"{report.max_rel_error:.6e}",
            "l2_rel_error": f"{report.l2_rel_error:.6e}",
            "scale": f"{report.scale:.12g}",
            "gamma_p_hz_over_2pi": f"{params.gamma_p.hz:.12g}",
            "threshold": f"{threshold:g}",
        }
        trace_io.write_table(config.output, frame, summary)
        if report.max_rel_error > threshold:
            logger.error(f"max rel error {report.max_rel_error:.3e} exceeds {threshold:g}")
            return EXIT_NUMERICAL
        return EXIT_OK


command_handler = CommandHandler()
