import math

from scipy.constants import speed_of_light

from app.models.core import AngularFrequency, Rate


def hz_to_angular(hz: float) -> float:
    return 2.0 * math.pi * hz


def angular_to_hz(omega: float) -> float:
    return omega / (2.0 * math.pi)


def wavelength_to_angular(wavelength: float) -> AngularFrequency:
    """omega = 2*pi*c / lambda, with lambda in metres"""
    if not wavelength > 0:
        raise ValueError(f"wavelength must be positive, got {wavelength}")
    return AngularFrequency(value=2.0 * math.pi * speed_of_light / wavelength)


def angular_to_wavelength(omega: AngularFrequency) -> float:
    return 2.0 * math.pi * speed_of_light / omega.value


def q_to_kappa(q: float, omega: AngularFrequency) -> Rate:
    """Field decay rate of a mode with quality factor q: kappa = omega / (2Q)

    Q = inf maps to the lossless limit kappa = 0.
    """
    if not q > 0:
        raise ValueError(f"quality factor must be positive, got {q}")
    if math.isinf(q):
        return Rate(value=0.0)
    return Rate(value=omega.value / (2.0 * q))


def kappa_to_q(kappa: Rate, omega: AngularFrequency) -> float:
    if kappa.value == 0:
        return math.inf
    return omega.value / (2.0 * kappa.value)
