"""
Shared domain types and coherent-state algebra.

Conventions (see ``docs/conventions.md``):

* hbar = 1, frequencies in rad per unit time.
* sigma_z of the system and S_z of the spin-bath system have eigenvalues
  +1 (spin-up) and -1 (spin-down).
* 2x2 blocks are ordered (spin-up, spin-down).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "SPIN_UP",
    "SPIN_DOWN",
    "SECTORS",
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "IDENTITY2",
    "QNDError",
    "ValidationError",
    "DimensionError",
    "ConfigurationError",
    "ConvergenceError",
    "TruncationError",
    "SystemParams",
    "OscillatorBathSpec",
    "SpinBathSpec",
    "Tolerances",
    "check_sector",
    "as_coherent_point",
    "coherent_overlap",
    "validate_bath",
]

SPIN_UP = 1
SPIN_DOWN = -1
SECTORS = (SPIN_UP, SPIN_DOWN)

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY2 = np.eye(2, dtype=complex)


class QNDError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(QNDError, ValueError):
    """A parameter set violates a documented invariant.

    ``violations`` is a list of ``(mode_index, message)`` pairs; the index
    is ``None`` for violations not tied to a single mode.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        text = "; ".join(
            msg if idx is None else f"mode {idx}: {msg}" for idx, msg in self.violations
        )
        super().__init__(text)


class DimensionError(QNDError, ValueError):
    pass


class ConfigurationError(QNDError, ValueError):
    pass


class ConvergenceError(QNDError, ArithmeticError):
    """Series truncation failed to meet the tolerance.

    ``bound`` carries the best tail bound that was achieved.
    """

    def __init__(self, message, bound):
        self.bound = float(bound)
        super().__init__(f"{message} (achieved bound {self.bound:.3e})")


class TruncationError(QNDError, ArithmeticError):
    """A truncated Fock space is too small for the state being represented."""

    def __init__(self, message, population=float("nan")):
        self.population = float(population)
        super().__init__(message)


@dataclass(frozen=True)
class SystemParams:
    omega: float
    drive_omega: float | None = None

    def __post_init__(self):
        if not math.isfinite(self.omega):
            raise ValidationError([(None, f"omega must be finite, got {self.omega}")])
        if self.drive_omega is not None and not math.isfinite(self.drive_omega):
            raise ValidationError(
                [(None, f"drive_omega must be finite, got {self.drive_omega}")]
            )

    def require_drive(self) -> float:
        if self.drive_omega is None:
            raise ConfigurationError("the driven propagator needs drive_omega")
        return self.drive_omega


def _real(value, k, what):
    if isinstance(value, complex) or np.iscomplexobj(value):
        if complex(value).imag != 0:
            raise ValidationError([(k, f"{what} must be real, got {value}")])
        value = complex(value).real
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ValidationError([(k, f"{what} is not a number: {value!r}")]) from None


def _modes_tuple(modes):
    out = []
    for k, mode in enumerate(modes):
        if len(mode) != 2:
            raise ValidationError([(k, "each mode is a (frequency, coupling) pair")])
        out.append((_real(mode[0], k, "frequency"), _real(mode[1], k, "coupling")))
    return tuple(out)


@dataclass(frozen=True)
class OscillatorBathSpec:
    """Harmonic-oscillator reservoir: ``modes`` holds ``(omega_k, g_k)`` pairs."""

    modes: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "modes", _modes_tuple(self.modes))

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([w for w, _ in self.modes], dtype=float)

    @property
    def couplings(self) -> np.ndarray:
        return np.array([g for _, g in self.modes], dtype=float)

    def __len__(self):
        return len(self.modes)


@dataclass(frozen=True)
class SpinBathSpec:
    """Spin reservoir: ``modes`` holds ``(omega_k, c_k)`` pairs."""

    modes: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "modes", _modes_tuple(self.modes))

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([w for w, _ in self.modes], dtype=float)

    @property
    def couplings(self) -> np.ndarray:
        return np.array([c for _, c in self.modes], dtype=float)

    def __len__(self):
        return len(self.modes)


BathSpec = Union[OscillatorBathSpec, SpinBathSpec]


@dataclass(frozen=True)
class Tolerances:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-12
    max_fock: int = 64
    max_dyson_order: int = 10
    # composition U(t) = U(t/m)^m is allowed up to this many steps
    max_substeps: int = 64
    # dense oracle operators larger than this are refused
    max_dim: int = 6000

    def __post_init__(self):
        problems = []
        for name in ("rel_tol", "abs_tol"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                problems.append((None, f"{name} must be positive, got {v}"))
        if self.max_fock < 2:
            problems.append((None, f"max_fock must be >= 2, got {self.max_fock}"))
        if self.max_dyson_order < 0:
            problems.append((None, "max_dyson_order must be >= 0"))
        if self.max_substeps < 1:
            problems.append((None, "max_substeps must be >= 1"))
        if problems:
            raise ValidationError(problems)


def check_sector(s) -> int:
    if s not in (1, -1):
        raise ValidationError([(None, f"sector label must be +1 or -1, got {s!r}")])
    return int(s)


def as_coherent_point(values, length: int | None = None, name="coherent point"):
    """Coerce to a 1-D complex array and optionally check its length."""
    arr = np.atleast_1d(np.asarray(values, dtype=complex))
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be one-dimensional")
    if length is not None and arr.shape[0] != length:
        raise DimensionError(f"{name} has length {arr.shape[0]}, expected {length}")
    return arr


def coherent_overlap(alpha_prime, alpha) -> complex:
    """Overlap <alpha'|alpha> of normalized multimode coherent states.

    Parameters
    ----------
    alpha_prime, alpha : array_like of complex
        Mode amplitudes; must have equal length.

    Returns
    -------
    complex
        ``exp(sum(-|a'|^2/2 - |a|^2/2 + conj(a') a))``.
    """
    ap = as_coherent_point(alpha_prime, name="alpha_prime")
    a = as_coherent_point(alpha, ap.shape[0], name="alpha")
    expo = np.sum(-0.5 * np.abs(ap) ** 2 - 0.5 * np.abs(a) ** 2 + np.conj(ap) * a)
    return complex(np.exp(expo))


def validate_bath(spec: BathSpec) -> BathSpec:
    """Check the invariants of a bath specification.

    Returns the spec unchanged, or raises :class:`ValidationError` listing
    every offending mode. Oscillator frequencies must be strictly positive
    because the displacement amplitudes divide by them; spin-bath
    frequencies may have either sign.
    """
    if not isinstance(spec, (OscillatorBathSpec, SpinBathSpec)):
        raise ValidationError([(None, f"not a bath spec: {type(spec).__name__}")])
    problems = []
    for k, (w, c) in enumerate(spec.modes):
        if not (math.isfinite(w) and math.isfinite(c)):
            problems.append((k, f"non-finite entry (omega_k={w}, coupling={c})"))
            continue
        if isinstance(spec, OscillatorBathSpec) and w <= 0:
            problems.append(
                (k, f"division-by-frequency: omega_k must be > 0, got {w}")
            )
    if problems:
        raise ValidationError(problems)
    return spec
