"""Linearly polarized sin^2 pulses in atomic units."""
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument

# Intensity (W/cm^2) of a unit atomic field, and hc in nm * hartree.
ATOMIC_INTENSITY = 3.50944506e16
NM_HARTREE = 45.5633526
FS_PER_AU = 2.4188843265857e-2
EV_PER_HARTREE = 27.211386245988
# intensity FWHM of a sin^2 field envelope, as a fraction of the total duration
SIN2_FWHM_FRACTION = 1.0 - 2.0 * math.asin(2.0 ** -0.25) / math.pi

ENVELOPES = ("electric-field", "vector-potential")


def convert_units(intensity, wavelength_nm):
    """(peak field, angular frequency) in atomic units from W/cm^2 and nm."""
    if not (intensity > 0 and wavelength_nm > 0):
        raise InvalidArgument("intensity and wavelength must be positive")
    return math.sqrt(intensity / ATOMIC_INTENSITY), NM_HARTREE / wavelength_nm


def fwhm_to_duration(fwhm_fs):
    """Total sin^2 duration (a.u.) whose intensity envelope has the given FWHM."""
    return fwhm_fs / SIN2_FWHM_FRACTION / FS_PER_AU


@dataclass(frozen=True)
class PulseConfig:
    """Pulse on t in [0, duration].

    ``envelope="electric-field"``: E(t) = E_m sin^2(pi t/T) cos(w t + phi).
    ``envelope="vector-potential"``: A(t) = (E_m / w) sin^2(pi t/T) cos(w t + phi).
    """

    peak_field: float
    omega: float
    duration: float
    cep: float = 0.0
    envelope: str = "electric-field"

    def __post_init__(self):
        if not self.omega > 0:
            raise InvalidArgument("omega must be positive")
        if not self.duration > 0:
            raise InvalidArgument("duration must be positive")
        if not self.peak_field >= 0:
            raise InvalidArgument("peak field must be non-negative")
        if self.envelope not in ENVELOPES:
            raise InvalidArgument(f"envelope must be one of {ENVELOPES}")

    @classmethod
    def from_parameters(cls, *, peak_field=None, peak_intensity=None, wavelength_nm=None,
                        omega=None, duration=None, cycles=None, fwhm_fs=None, cep=0.0,
                        envelope="electric-field"):
        """Build from exactly one of each alternative (field/intensity,
        frequency/wavelength, duration/cycles/FWHM)."""
        def one(**kw):
            given = [k for k, v in kw.items() if v is not None]
            if len(given) != 1:
                raise InvalidArgument(f"give exactly one of {sorted(kw)}, got {given or 'none'}")
            return given[0]

        if one(peak_field=peak_field, peak_intensity=peak_intensity) == "peak_intensity":
            if not peak_intensity >= 0:
                raise InvalidArgument("intensity must be non-negative")
            peak_field = math.sqrt(peak_intensity / ATOMIC_INTENSITY)
        if one(omega=omega, wavelength_nm=wavelength_nm) == "wavelength_nm":
            if not wavelength_nm > 0:
                raise InvalidArgument("wavelength must be positive")
            omega = NM_HARTREE / wavelength_nm
        which = one(duration=duration, cycles=cycles, fwhm_fs=fwhm_fs)
        if which == "cycles":
            duration = 2.0 * math.pi * cycles / omega
        elif which == "fwhm_fs":
            duration = fwhm_to_duration(fwhm_fs)
        return cls(float(peak_field), float(omega), float(duration), float(cep), envelope)

    @property
    def peak_intensity(self):
        return self.peak_field**2 * ATOMIC_INTENSITY

    @property
    def cycles(self):
        return self.duration * self.omega / (2.0 * math.pi)

    def scaled(self, factor):
        return PulseConfig(self.peak_field * factor, self.omega, self.duration, self.cep,
                           self.envelope)


def _sin_over(k, t, phi):
    """int_0^t cos(k s + phi) ds, well defined at k = 0."""
    if k == 0.0:
        return math.cos(phi) * t
    return (np.sin(k * t + phi) - math.sin(phi)) / k


def electric_field(cfg, t):
    t = np.asarray(t, dtype=float)
    T, w, phi = cfg.duration, cfg.omega, cfg.cep
    inside = (t >= 0.0) & (t <= T)
    tc = np.clip(t, 0.0, T)
    env = np.sin(np.pi * tc / T) ** 2
    if cfg.envelope == "electric-field":
        val = cfg.peak_field * env * np.cos(w * tc + phi)
    else:
        Am = cfg.peak_field / w
        denv = (np.pi / T) * np.sin(2.0 * np.pi * tc / T)
        val = -Am * (denv * np.cos(w * tc + phi) - w * env * np.sin(w * tc + phi))
    return np.where(inside, val, 0.0)


def vector_potential(cfg, t):
    """A(t) = -int_0^t E; constant outside [0, T]."""
    t = np.asarray(t, dtype=float)
    T, w, phi = cfg.duration, cfg.omega, cfg.cep
    tc = np.clip(t, 0.0, T)
    if cfg.envelope == "vector-potential":
        Am = cfg.peak_field / w
        return Am * np.sin(np.pi * tc / T) ** 2 * np.cos(w * tc + phi)
    W = 2.0 * np.pi / T
    integral = (0.5 * _sin_over(w, tc, phi)
                - 0.25 * _sin_over(w + W, tc, phi)
                - 0.25 * _sin_over(w - W, tc, phi))
    return -cfg.peak_field * integral


def pulse_table(cfg, dt):
    n = max(1, int(round(cfg.duration / dt)))
    t = np.linspace(0.0, cfg.duration, n + 1)
    return t, electric_field(cfg, t), vector_potential(cfg, t)
