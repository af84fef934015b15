"""
Analytic coherent-state kernels for a two-level system dephased by an
oscillator reservoir, with and without a resonant external mode.

The kernel is the unnormalized (Bargmann) matrix element of exp(-iHt).
Because sigma_z is conserved it is diagonal in the system basis, and in
sector ``s`` (sigma_z = s) it reads::

    exp(sum_k a*_k a'_k e^{-i w_k t}) * exp(A - s B)

Compared with the commonly printed form ``e^A diag(e^B, e^-B)``, the
entry carrying ``e^{+B}`` belongs to the spin-down sector; this is fixed
by agreement with the dense oracle (``qndprop.oracle``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    OscillatorBathSpec,
    SystemParams,
    ValidationError,
    as_coherent_point,
    check_sector,
    validate_bath,
)

__all__ = [
    "PropagatorPhases",
    "OscillatorKernel",
    "phi_k",
    "phi_vector",
    "phase_A",
    "exponent_B",
    "exponent_B2",
    "kernel_u1",
    "kernel_u2",
    "physical_matrix_element",
    "dephasing_factor",
]


@dataclass(frozen=True)
class PropagatorPhases:
    A: complex
    B: complex
    phi: np.ndarray
    B2: complex | None = None

    @property
    def squeeze(self) -> complex:
        """Exponent used in the sector block: ``B2`` when driven, else ``B``."""
        return self.B if self.B2 is None else self.B2


@dataclass(frozen=True)
class OscillatorKernel:
    """Kernel of exp(-iHt) between coherent points.

    ``sector_diag`` is ordered (spin-up, spin-down) and holds
    ``(e^{A-B}, e^{A+B})`` (``B2`` in place of ``B`` for the driven case).
    """

    bath_prefactor: complex
    sector_diag: tuple[complex, complex]
    phases: PropagatorPhases
    drive_prefactor: complex | None = None

    def sector(self, s: int) -> complex:
        """Sector block entry for sigma_z = s, without the mode prefactors."""
        s = check_sector(s)
        return self.sector_diag[0 if s == 1 else 1]

    def value(self, s: int) -> complex:
        """Full kernel value in sector ``s``."""
        pre = self.bath_prefactor
        if self.drive_prefactor is not None:
            pre = pre * self.drive_prefactor
        return pre * self.sector(s)

    def block(self) -> np.ndarray:
        """The 2x2 system block ``e^A diag(e^-B, e^B)`` in (up, down) order."""
        return np.diag(np.asarray(self.sector_diag, dtype=complex))

    def determinant(self) -> complex:
        return self.sector_diag[0] * self.sector_diag[1]


def _check_omega_k(omega_k):
    if not np.all(np.asarray(omega_k) > 0):
        raise ValidationError([(None, f"omega_k must be > 0, got {omega_k}")])


def phi_k(sys: SystemParams, mode, t):
    """Displacement amplitude ``(w/2)(g_k/w_k)(1 - exp(-i w_k t))`` of one mode."""
    omega_k, g_k = mode
    _check_omega_k(omega_k)
    return 0.5 * sys.omega * (g_k / omega_k) * (1.0 - np.exp(-1j * omega_k * t))


def phi_vector(sys: SystemParams, bath: OscillatorBathSpec, t) -> np.ndarray:
    validate_bath(bath)
    wk, gk = bath.frequencies, bath.couplings
    return 0.5 * sys.omega * (gk / wk) * (1.0 - np.exp(-1j * wk * t))


def phase_A(sys: SystemParams, bath: OscillatorBathSpec, t) -> complex:
    validate_bath(bath)
    wk, gk = bath.frequencies, bath.couplings
    half = 0.5 * sys.omega
    lamb = half**2 * np.sum(gk**2 / wk)
    return complex(
        1j * lamb * t - half**2 * np.sum(gk**2 / wk**2 * (1.0 - np.exp(-1j * wk * t)))
    )


def _linear_term(sys, bath, t, alpha_star, alpha_prime):
    phi = phi_vector(sys, bath, t)
    a_s = as_coherent_point(alpha_star, len(bath), "alpha_star")
    a_p = as_coherent_point(alpha_prime, len(bath), "alpha_prime")
    return phi, complex(np.sum(phi * (a_s + a_p)))


def exponent_B(sys: SystemParams, bath: OscillatorBathSpec, t, alpha_star, alpha_prime):
    """``sum_k phi_k (a*_k + a'_k) + i w t / 2``.

    ``alpha_star`` are the (already conjugated) Bargmann variables at time
    ``t``; ``alpha_prime`` those at time 0.
    """
    _, lin = _linear_term(sys, bath, t, alpha_star, alpha_prime)
    return lin + 0.5j * sys.omega * t


def exponent_B2(sys: SystemParams, bath: OscillatorBathSpec, t, alpha_star, alpha_prime):
    big_omega = sys.require_drive()
    _, lin = _linear_term(sys, bath, t, alpha_star, alpha_prime)
    return lin + 0.5j * (sys.omega - big_omega) * t


def _bath_prefactor(bath, t, alpha_star, alpha_prime):
    a_s = as_coherent_point(alpha_star, len(bath), "alpha_star")
    a_p = as_coherent_point(alpha_prime, len(bath), "alpha_prime")
    return complex(np.exp(np.sum(a_s * a_p * np.exp(-1j * bath.frequencies * t))))


def _sector_pair(A, B):
    return (complex(np.exp(A - B)), complex(np.exp(A + B)))


def kernel_u1(sys, bath, t, alpha_star, alpha_prime) -> OscillatorKernel:
    """Kernel of the undriven QND Hamiltonian between Bargmann points.

    Parameters
    ----------
    sys : SystemParams
    bath : OscillatorBathSpec
    t : float
    alpha_star : array_like of complex
        Conjugated bath amplitudes at time ``t``.
    alpha_prime : array_like of complex
        Bath amplitudes at time 0.

    Returns
    -------
    OscillatorKernel
    """
    validate_bath(bath)
    A = phase_A(sys, bath, t)
    phi, lin = _linear_term(sys, bath, t, alpha_star, alpha_prime)
    B = lin + 0.5j * sys.omega * t
    return OscillatorKernel(
        bath_prefactor=_bath_prefactor(bath, t, alpha_star, alpha_prime),
        sector_diag=_sector_pair(A, B),
        phases=PropagatorPhases(A=A, B=B, phi=phi),
    )


def kernel_u2(sys, bath, t, nu_star, nu_prime, alpha_star, alpha_prime) -> OscillatorKernel:
    """Kernel of the Hamiltonian with a resonant external mode ``a``.

    ``nu_star``/``nu_prime`` are the Bargmann variables of the external
    mode; the block exponent uses ``B2`` (system splitting reduced by the
    drive frequency).
    """
    big_omega = sys.require_drive()
    validate_bath(bath)
    A = phase_A(sys, bath, t)
    phi, lin = _linear_term(sys, bath, t, alpha_star, alpha_prime)
    B = lin + 0.5j * sys.omega * t
    B2 = lin + 0.5j * (sys.omega - big_omega) * t
    drive = complex(np.exp(complex(nu_star) * complex(nu_prime) * np.exp(-1j * big_omega * t)))
    return OscillatorKernel(
        bath_prefactor=_bath_prefactor(bath, t, alpha_star, alpha_prime),
        sector_diag=_sector_pair(A, B2),
        phases=PropagatorPhases(A=A, B=B, phi=phi, B2=B2),
        drive_prefactor=drive,
    )


def physical_matrix_element(sys, bath, t, alpha, alpha_prime, s, nu=None, nu_prime=None):
    """Normalized coherent-state matrix element <alpha|U_s(t)|alpha'>.

    Evaluates the kernel at ``alpha_star = conj(alpha)`` and multiplies by
    ``exp(-|alpha|^2/2 - |alpha'|^2/2)``. Passing ``nu``/``nu_prime`` selects
    the driven kernel, with the external mode included in the endpoints.
    """
    s = check_sector(s)
    alpha = as_coherent_point(alpha, len(bath), "alpha")
    alpha_prime = as_coherent_point(alpha_prime, len(bath), "alpha_prime")
    norm = np.sum(np.abs(alpha) ** 2 + np.abs(alpha_prime) ** 2)
    if nu is None and nu_prime is None:
        kern = kernel_u1(sys, bath, t, np.conj(alpha), alpha_prime)
    else:
        nu = complex(0 if nu is None else nu)
        nu_prime = complex(0 if nu_prime is None else nu_prime)
        kern = kernel_u2(sys, bath, t, np.conj(nu), nu_prime, np.conj(alpha), alpha_prime)
        norm += abs(nu) ** 2 + abs(nu_prime) ** 2
    return kern.value(s) * complex(np.exp(-0.5 * norm))


def dephasing_factor(sys: SystemParams, bath: OscillatorBathSpec, t) -> complex:
    """Coherence ratio rho_{up,down}(t) / rho_{up,down}(0).

    The system starts in an equal superposition and the bath in its
    vacuum. The magnitude ``exp(-2 sum_k |phi_k|^2)`` does not depend on
    the phase convention; the phase ``exp(-i w t)`` is the free precession
    of the coherence. For a finite bath the magnitude is quasi-periodic
    and returns to 1 whenever every ``w_k t`` is a multiple of 2 pi.
    """
    phi = phi_vector(sys, bath, t)
    return complex(np.exp(-1j * sys.omega * t - 2.0 * np.sum(np.abs(phi) ** 2)))
