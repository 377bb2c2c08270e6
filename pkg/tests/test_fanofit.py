import math

import numpy as np
import pytest
from scipy.constants import speed_of_light

from app.models.errors import ConvergenceError
from app.models.fit import (
    DoubletGuess,
    FitOptions,
    FitProblem,
    FitStatus,
    InstrumentResponse,
    LockedDoublet,
    NoiseKind,
    NoiseSpec,
)
from app.models.spectrum import AxisKind, CavityTerm, MultiModeModel, SpectrumTrace
from app.services.fanofit_service import fanofit_service
from app.services.scatterer_service import scatterer_service
from app.services.spectrum_service import spectrum_service

NU0 = speed_of_light / 680e-9
RESPONSE = InstrumentResponse.gaussian(20e-12)


def wavelength_grid(kappa_hz: float, span: float = 10.0, points: int = 461) -> np.ndarray:
    half = span * (680e-9) ** 2 * kappa_hz / speed_of_light * 1e9
    return np.linspace(680.0 - half, 680.0 + half, points)


def fano_model(f_o: float, kappa_hz: float, center_hz: float = NU0) -> MultiModeModel:
    return MultiModeModel(
        modes=[CavityTerm(omega_c=2.0 * math.pi * center_hz, kappa=2.0 * math.pi * kappa_hz, f_o=f_o)]
    )


def start_problem(trace: SpectrumTrace, f_o: float, kappa_hz: float, **kwargs) -> FitProblem:
    kwargs.setdefault("background", [1.0, 0.0])
    return FitProblem(trace=trace, model=fano_model(f_o, kappa_hz, NU0 + 3e9), **kwargs)


def noisy_trace(level: float, seed: int, f_o: float = 0.2, kappa_hz: float = 15e9) -> SpectrumTrace:
    return fanofit_service.synthesize(
        fano_model(f_o, kappa_hz),
        wavelength_grid(kappa_hz),
        axis=AxisKind.WAVELENGTH_NM,
        noise=NoiseSpec(kind=NoiseKind.MULTIPLICATIVE, level=level, seed=seed),
    )


# --- instrument response ------------------------------------------------------


def test_no_response_is_identity():
    trace = SpectrumTrace(abscissa=[1.0, 2.0, 3.0], intensity=[1.0, 5.0, 2.0], axis=AxisKind.WAVELENGTH_NM)
    assert fanofit_service.convolve_response(trace, None) is trace
    assert fanofit_service.convolve_response(trace, InstrumentResponse()) is trace


def test_response_keeps_flat_trace_flat_and_conserves_weight():
    x = np.linspace(679.5, 680.5, 2001)
    flat = SpectrumTrace(abscissa=x, intensity=np.ones_like(x), axis=AxisKind.WAVELENGTH_NM)
    assert fanofit_service.convolve_response(flat, RESPONSE).intensity == pytest.approx(np.ones_like(x), abs=1e-12)

    peaked = flat.with_intensity(1.0 + np.exp(-(((x - 680.0) / 0.05) ** 2)))
    blurred = fanofit_service.convolve_response(peaked, RESPONSE)
    assert np.sum(blurred.intensity) == pytest.approx(np.sum(peaked.intensity), rel=1e-9)


def test_narrow_line_takes_the_instrument_width():
    x = np.linspace(679.5, 680.5, 2001)
    line = 1.0 / (1.0 + ((x - 680.0) / 1e-4) ** 2)
    trace = SpectrumTrace(abscissa=x, intensity=line, axis=AxisKind.WAVELENGTH_NM)
    blurred = fanofit_service.convolve_response(trace, RESPONSE).intensity
    above = x[blurred >= 0.5 * np.max(blurred)]
    assert above[-1] - above[0] == pytest.approx(0.020, rel=0.05)


def test_response_commutes_with_shift():
    x = np.linspace(679.5, 680.5, 2001)
    line = 1.0 / (1.0 + ((x - 680.1) / 0.01) ** 2)
    here = fanofit_service.convolve_response(SpectrumTrace(abscissa=x, intensity=line, axis=AxisKind.WAVELENGTH_NM), RESPONSE)
    there = fanofit_service.convolve_response(
        SpectrumTrace(abscissa=x + 0.3, intensity=line, axis=AxisKind.WAVELENGTH_NM), RESPONSE
    )
    assert there.intensity == pytest.approx(here.intensity, rel=1e-9)


def test_response_rejects_bad_sampling():
    narrow = SpectrumTrace(abscissa=np.linspace(680.0, 680.01, 11), intensity=np.ones(11), axis=AxisKind.WAVELENGTH_NM)
    with pytest.raises(ValueError):
        fanofit_service.convolve_response(narrow, RESPONSE)
    uneven = SpectrumTrace(abscissa=[679.0, 679.5, 680.5, 681.0], intensity=np.ones(4), axis=AxisKind.WAVELENGTH_NM)
    with pytest.raises(ValueError):
        fanofit_service.convolve_response(uneven, RESPONSE)


def test_response_on_detuning_axis_needs_carrier():
    trace = SpectrumTrace(abscissa=np.linspace(-5e11, 5e11, 1001), intensity=np.ones(1001), axis=AxisKind.DETUNING_HZ)
    with pytest.raises(ValueError):
        fanofit_service.convolve_response(trace, RESPONSE)
    anchored = trace.model_copy(update={"reference_hz": NU0})
    assert fanofit_service.convolve_response(anchored, RESPONSE).intensity == pytest.approx(np.ones(1001))


# --- synthesis ----------------------------------------------------------------


def test_synthesis_is_seeded():
    a = noisy_trace(0.01, seed=5)
    b = noisy_trace(0.01, seed=5)
    c = noisy_trace(0.01, seed=6)
    clean = noisy_trace(0.0, seed=5)
    assert np.array_equal(a.intensity, b.intensity)
    assert not np.array_equal(a.intensity, c.intensity)
    expected = spectrum_service.multimode_spectrum(fano_model(0.2, 15e9), clean.angular()).intensity
    assert clean.intensity == pytest.approx(expected, rel=1e-12)


def test_additive_noise_level():
    trace = fanofit_service.apply_noise(
        SpectrumTrace(abscissa=np.arange(20000.0), intensity=np.zeros(20000)),
        NoiseSpec(kind=NoiseKind.GAUSSIAN, level=0.1, seed=1),
    )
    assert np.std(trace.intensity) == pytest.approx(0.1, rel=0.05)


# --- fitting ------------------------------------------------------------------


def test_zero_noise_recovery_through_instrument_response():
    x = wavelength_grid(15e9)
    trace = fanofit_service.synthesize(
        fano_model(0.2, 15e9), x, axis=AxisKind.WAVELENGTH_NM, background=[1.0, 0.05], response=RESPONSE
    )
    result = fanofit_service.fit(start_problem(trace, 0.3, 18e9, response=RESPONSE))
    p = result.parameters
    assert result.status != FitStatus.MAX_ITERATIONS
    assert p["mode0.center_hz"] == pytest.approx(NU0, abs=1e-3 * 15e9)
    assert p["mode0.kappa_ghz"] == pytest.approx(15.0, rel=1e-3)
    assert p["mode0.f_o"] == pytest.approx(0.2, rel=1e-3)
    assert p["background.c1"] == pytest.approx(0.05, abs=1e-4)
    assert result.residual_norm <= result.initial_residual_norm


def test_zero_noise_recovery_of_weak_broad_mode():
    kappa_hz = 73e9
    trace = fanofit_service.synthesize(
        fano_model(0.02, kappa_hz), wavelength_grid(kappa_hz), axis=AxisKind.WAVELENGTH_NM
    )
    problem = FitProblem(trace=trace, model=fano_model(0.03, 85e9, NU0 + 10e9))
    assert len(problem.background) == 4
    result = fanofit_service.fit(problem)
    assert result.parameters["mode0.kappa_ghz"] == pytest.approx(73.0, rel=1e-3)
    assert result.parameters["mode0.f_o"] == pytest.approx(0.02, rel=1e-3)


def test_monte_carlo_scatter_at_one_percent_noise():
    kappa_err, f_err = [], []
    for seed in range(50):
        result = fanofit_service.fit(start_problem(noisy_trace(0.01, seed), 0.3, 18e9))
        assert result.status == FitStatus.CONVERGED
        kappa_err.append(result.parameters["mode0.kappa_ghz"] / 15.0 - 1.0)
        f_err.append(result.parameters["mode0.f_o"] / 0.2 - 1.0)
    assert math.sqrt(np.mean(np.square(kappa_err))) < 0.02
    assert math.sqrt(np.mean(np.square(f_err))) < 0.02


def test_errors_grow_with_noise():
    def mean_error(level: float) -> float:
        errs = [
            abs(fanofit_service.fit(start_problem(noisy_trace(level, seed), 0.3, 18e9)).parameters["mode0.f_o"] / 0.2 - 1)
            for seed in range(10)
        ]
        return float(np.mean(errs))

    assert mean_error(0.002) < mean_error(0.05)


def test_fit_is_scale_equivariant():
    trace = noisy_trace(0.01, seed=3)
    base = fanofit_service.fit(start_problem(trace, 0.3, 18e9)).parameters
    scaled = fanofit_service.fit(start_problem(trace.with_intensity(10.0 * trace.intensity), 0.3, 18e9)).parameters
    assert scaled["mode0.kappa_ghz"] == pytest.approx(base["mode0.kappa_ghz"], rel=1e-5)
    assert scaled["mode0.f_o"] == pytest.approx(base["mode0.f_o"], rel=1e-5)
    assert scaled["background.c0"] == pytest.approx(10.0 * base["background.c0"], rel=1e-5)


def test_fit_is_deterministic():
    problem = start_problem(noisy_trace(0.01, seed=9), 0.3, 18e9)
    first = fanofit_service.fit(problem)
    second = fanofit_service.fit(problem)
    assert first.parameters == second.parameters
    assert first.iterations == second.iterations


def test_fit_optimum_is_stationary():
    problem = start_problem(noisy_trace(0.01, seed=3), 0.3, 18e9)
    result = fanofit_service.fit(problem)
    assert result.status == FitStatus.CONVERGED

    # central differences in units of each parameter's natural scale
    scales = {"mode0.center_hz": 15e9, "mode0.kappa_ghz": 15.0}

    def gradient_norm(values):
        grad = []
        for name in problem.free_parameter_names():
            step = 1e-6 * scales.get(name, max(abs(values[name]), 1.0))
            up, down = dict(values), dict(values)
            up[name] += step
            down[name] -= step
            r_up = np.linalg.norm(fanofit_service.model_curve(problem, up)[1])
            r_down = np.linalg.norm(fanofit_service.model_curve(problem, down)[1])
            grad.append((r_up - r_down) / 2e-6)
        return float(np.linalg.norm(grad))

    at_optimum = gradient_norm(result.parameters)
    assert at_optimum < 1e-3 * (1.0 + result.residual_norm)
    assert at_optimum < 1e-2 * gradient_norm(problem.initial_values())


def test_iteration_cap():
    problem = start_problem(noisy_trace(0.01, seed=1), 0.3, 18e9)
    result = fanofit_service.fit(problem, FitOptions(max_iter=3))
    assert result.status == FitStatus.MAX_ITERATIONS
    assert result.iterations >= 3
    assert result.residual_norm <= result.initial_residual_norm
    with pytest.raises(ConvergenceError) as info:
        fanofit_service.fit(problem, FitOptions(max_iter=3), strict=True)
    assert info.value.best.status == FitStatus.MAX_ITERATIONS


def test_all_frozen_problem_reports_start():
    trace = noisy_trace(0.01, seed=2)
    names = ["mode0.center_hz", "mode0.kappa_ghz", "mode0.f_o", "background.c0", "background.c1"]
    problem = start_problem(trace, 0.3, 18e9, vary={name: False for name in names})
    result = fanofit_service.fit(problem)
    assert result.status == FitStatus.FROZEN
    assert result.iterations == 0
    assert result.parameters["mode0.f_o"] == pytest.approx(0.3)
    assert result.residual_norm == result.initial_residual_norm


def test_problem_validation():
    trace = noisy_trace(0.0, seed=0)
    with pytest.raises(ValueError):
        start_problem(trace, 0.3, 18e9, vary={"mode3.f_o": True})
    with pytest.raises(ValueError):
        start_problem(trace, 0.3, 18e9, bounds={"mode0.f_o": (0.5, 1.0)})
    with pytest.raises(ValueError):
        FitProblem(trace=trace, model=MultiModeModel())
    with pytest.raises(ValueError):
        start_problem(trace, 0.3, 18e9, locked_doublets=[LockedDoublet(first=0, second=1, splitting_hz=1e9)])
    with pytest.raises(ValueError):
        start_problem(trace, 0.0, 18e9)
    frozen_dark = start_problem(trace, 0.0, 18e9, vary={"mode0.f_o": False})
    assert "mode0.f_o" not in frozen_dark.free_parameter_names()
    short = SpectrumTrace(abscissa=trace.abscissa[:3], intensity=trace.intensity[:3], axis=AxisKind.WAVELENGTH_NM)
    with pytest.raises(ValueError):
        start_problem(short, 0.3, 18e9)


def test_bounds_are_respected():
    result = fanofit_service.fit(start_problem(noisy_trace(0.0, seed=0), 0.3, 18e9, bounds={"mode0.f_o": (0.25, 1.0)}))
    assert 0.25 - 1e-9 <= result.parameters["mode0.f_o"] <= 1.0


def test_freeing_collection_phase():
    trace = noisy_trace(0.0, seed=0)
    result = fanofit_service.fit(start_problem(trace, 0.3, 18e9, vary={"mode0.phi_c": True}))
    assert "mode0.phi_c" in result.errors
    assert result.parameters["mode0.phi_c"] == pytest.approx(0.0, abs=1e-4)


def test_locked_doublet_shares_kappa_and_splitting():
    detuning = np.linspace(-200e9, 200e9, 801)
    truth = MultiModeModel(
        modes=[
            CavityTerm(omega_c=2 * math.pi * (NU0 - 22.5e9), kappa=2 * math.pi * 15e9, f_o=0.1),
            CavityTerm(omega_c=2 * math.pi * (NU0 + 22.5e9), kappa=2 * math.pi * 15e9, f_o=0.15),
        ]
    )
    trace = fanofit_service.synthesize(truth, detuning, axis=AxisKind.DETUNING_HZ, reference_hz=NU0)
    start = MultiModeModel(
        modes=[
            CavityTerm(omega_c=2 * math.pi * (NU0 - 20.5e9), kappa=2 * math.pi * 18e9, f_o=0.12),
            CavityTerm(omega_c=2 * math.pi * (NU0 + 27.5e9), kappa=2 * math.pi * 18e9, f_o=0.12),
        ]
    )
    problem = FitProblem(
        trace=trace,
        model=start,
        background=[1.0],
        locked_doublets=[LockedDoublet(first=0, second=1, splitting_hz=45e9)],
    )
    result = fanofit_service.fit(problem)
    p = result.parameters
    assert p["mode1.center_hz"] - p["mode0.center_hz"] == pytest.approx(45e9, abs=10.0)
    assert p["mode1.kappa_ghz"] == p["mode0.kappa_ghz"]
    assert p["mode0.kappa_ghz"] == pytest.approx(15.0, rel=1e-3)
    assert p["mode0.center_hz"] == pytest.approx(NU0 - 22.5e9, abs=1e7)
    assert p["mode1.f_o"] == pytest.approx(0.15, rel=1e-3)
    assert "mode1.kappa_ghz" not in result.errors


def test_fit_many_keeps_order_and_matches_serial():
    problems = [start_problem(noisy_trace(0.01, seed), 0.3, 18e9) for seed in (21, 22, 23)]
    parallel = fanofit_service.fit_many(problems, threads=2)
    serial = [fanofit_service.fit(p) for p in problems]
    assert [r.parameters for r in parallel] == [r.parameters for r in serial]


def test_report_layout():
    result = fanofit_service.fit(start_problem(noisy_trace(0.01, seed=4), 0.3, 18e9))
    report = result.report()
    assert set(report) == {"parameters", "errors", "residual_norm", "iterations", "status"}
    assert report["status"] == "converged"
    assert report["errors"]["mode0.f_o"] > 0


def test_doublet_fit_recovers_standing_waves():
    nu0 = speed_of_light / 852e-9
    nu_minus, nu_plus = nu0 - 4.83e9, nu0 + 4.83e9
    omega = 2 * math.pi * np.linspace(nu0 - 20e9, nu0 + 20e9, 2001)
    dips = scatterer_service.doublet_transmission(omega, 2 * math.pi * nu_minus, 2 * math.pi * nu_plus, 1.7e5, 3.4e5, 0.6, 0.4)
    trace = dips.with_intensity(0.9 * dips.intensity)
    guess = DoubletGuess(
        nu_minus_hz=nu_minus + 0.3e9, nu_plus_hz=nu_plus - 0.3e9, q_low=1.4e5, q_high=4.0e5
    )
    result = fanofit_service.fit_doublet(trace, guess)
    p = result.parameters
    assert p["doublet.nu_minus_hz"] == pytest.approx(nu_minus, abs=1e5)
    assert p["doublet.nu_plus_hz"] == pytest.approx(nu_plus, abs=1e5)
    assert p["doublet.q_low"] == pytest.approx(1.7e5, rel=1e-3)
    assert p["doublet.q_high"] == pytest.approx(3.4e5, rel=1e-3)
    assert p["doublet.depth_low"] == pytest.approx(0.6, abs=1e-4)
    assert p["background.c0"] == pytest.approx(0.9, rel=1e-6)


def test_seed_modes_finds_lens_extrema():
    kappa = 2 * math.pi * 15e9
    detuning = np.linspace(-150e9, 150e9, 2001)
    omega = 2 * math.pi * (NU0 + detuning)
    lens = spectrum_service.lens_spectrum(0.2, kappa, omega, omega_c=2 * math.pi * NU0)
    trace = SpectrumTrace(abscissa=detuning, intensity=lens.intensity, axis=AxisKind.DETUNING_HZ, reference_hz=NU0)

    (peak,) = fanofit_service.seed_modes(trace, count=1)
    assert (peak.omega_c - 2 * math.pi * NU0) / kappa == pytest.approx(0.80109, abs=0.01)
    assert peak.kappa > 0
    (dip,) = fanofit_service.seed_modes(trace, count=1, dips=True)
    assert (dip.omega_c - 2 * math.pi * NU0) / kappa == pytest.approx(-1.2483, abs=0.01)
    flat = trace.with_intensity(np.ones(len(trace)))
    assert fanofit_service.seed_modes(flat) == []
