"""Optical two-level Hamiltonians under longitudinal ac Stark driving.

Basis is ``{|g>, |e>}`` with ``sz = |e><e| - |g><g|``; all frequencies are
angular (rad/us) and times are in us.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bessel import bessel_sideband_ladder, generalized_bessel_ladder
from .quantum import HermitianOperator, pauli_matrices

TWO_PI = 2.0 * np.pi


def angular(f_mhz):
    """MHz -> rad/us."""
    return TWO_PI * np.asarray(f_mhz, dtype=float) if np.ndim(f_mhz) else TWO_PI * float(f_mhz)


@dataclass(frozen=True)
class OpticalTLSParams:
    rabi: float
    detuning: float = 0.0
    omega0: float | None = None
    omega_opt: float | None = None

    def __post_init__(self):
        if self.rabi < 0:
            raise ValueError(f"optical Rabi frequency must be >= 0, got {self.rabi}")


@dataclass(frozen=True)
class Tone:
    """One longitudinal tone ``amplitude * cos(omega t + phase)``."""

    amplitude: float
    omega: float
    phase: float = 0.0

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"drive frequency must be positive, got {self.omega}")

    @property
    def ratio(self):
        return self.amplitude / self.omega


@dataclass(frozen=True)
class AcDrive:
    """One or two longitudinal tones acting on the optical transition."""

    tones: tuple

    def __post_init__(self):
        tones = tuple(t if isinstance(t, Tone) else Tone(*t) for t in self.tones)
        if len(tones) not in (1, 2):
            raise ValueError(f"an ac drive has one or two tones, got {len(tones)}")
        object.__setattr__(self, "tones", tones)

    @classmethod
    def monochromatic(cls, amplitude, omega, phase=0.0):
        return cls((Tone(amplitude, omega, phase),))

    @classmethod
    def octave(cls, amplitude1, omega1, amplitude2, phase):
        """``A1 cos(w1 t) + A2 cos(2 w1 t + phase)``."""
        return cls((Tone(amplitude1, omega1, 0.0), Tone(amplitude2, 2.0 * omega1, phase)))

    @property
    def is_octave(self):
        return len(self.tones) == 2 and self.tones[1].omega == 2.0 * self.tones[0].omega

    @property
    def fundamental(self):
        return self.tones[0].omega

    @property
    def period(self):
        return TWO_PI / self.fundamental

    def stark_shift(self, t):
        """Instantaneous longitudinal detuning ``sum A cos(w t + phi)``."""
        t = np.asarray(t, dtype=float)
        return sum(tn.amplitude * np.cos(tn.omega * t + tn.phase) for tn in self.tones)

    def phase_integral(self, t):
        """``int_0^t`` of :meth:`stark_shift`."""
        t = np.asarray(t, dtype=float)
        return sum(
            tn.ratio * (np.sin(tn.omega * t + tn.phase) - np.sin(tn.phase)) for tn in self.tones
        )


def stark_amplitude(field_mv_per_m, kappa):
    """Linear field-to-Stark map ``A = kappa |F|``.

    ``kappa`` (rad/us per MV/m) is a user calibration; it has no default.
    """
    return float(kappa) * abs(float(field_mv_per_m))


def sideband_amplitudes(rabi, drive: AcDrive, n_max):
    """Effective Rabi frequencies ``Delta_n`` for ``n = -n_max .. n_max``.

    One tone: ``rabi * J_n(A/w) * exp(-i n phase)`` (real when the phase is
    zero). Two tones an octave apart: ``rabi * G_n(A1/w1, A2/w2; phase2)``
    with ``G_n`` from :func:`~stueckelberg.bessel.generalized_bessel_2d`;
    the first tone must carry zero phase.
    """
    n_max = int(n_max)
    if n_max < 0:
        raise ValueError("n_max must be >= 0")
    if len(drive.tones) == 1:
        tone = drive.tones[0]
        ladder = rabi * bessel_sideband_ladder(tone.ratio, n_max)
        if tone.phase == 0.0:
            return ladder
        return ladder * np.exp(-1j * np.arange(-n_max, n_max + 1) * tone.phase)
    if not drive.is_octave:
        raise ValueError("bichromatic sidebands need omega2 == 2 * omega1")
    t1, t2 = drive.tones
    if t1.phase != 0.0:
        raise ValueError("the fundamental tone must have zero phase")
    return rabi * generalized_bessel_ladder(t1.ratio, t2.ratio, t2.phase, n_max)


def rotating_frame_hamiltonian(p: OpticalTLSParams, drive: AcDrive | None = None, t=0.0):
    """``(rabi/2) sx + ((detuning + stark(t))/2) sz`` in the laser frame."""
    sx, _, sz = (m.matrix for m in pauli_matrices())
    shift = 0.0 if drive is None else float(drive.stark_shift(t))
    return HermitianOperator(0.5 * p.rabi * sx + 0.5 * (p.detuning + shift) * sz)


def lab_frame_hamiltonian(p: OpticalTLSParams, t):
    """``(rabi cos(w_opt t)/2) sx + (w0/2) sz`` without the rotating-wave step."""
    if p.omega0 is None or p.omega_opt is None:
        raise ValueError("lab-frame Hamiltonian needs omega0 and omega_opt")
    sx, _, sz = (m.matrix for m in pauli_matrices())
    return HermitianOperator(0.5 * p.rabi * np.cos(p.omega_opt * t) * sx + 0.5 * p.omega0 * sz)
