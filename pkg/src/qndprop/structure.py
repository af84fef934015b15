"""
Squeeze and rotation structure of the QND propagators.

The oscillator-bath system block is ``e^A`` times a diagonal squeeze
``diag(e^X, e^-X)``; the spin-bath Dyson terms are x-rotations
``exp(i Th sx)`` (even order) or ``sz exp(i Th sx)`` (odd order). The
helpers here check those identities numerically and factor real
unit-determinant 2x2 maps into rotation times positive part.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import IDENTITY2, SIGMA_X, SIGMA_Y, SIGMA_Z, ValidationError

__all__ = [
    "PhasePoint",
    "ScaledMatrix",
    "squeeze_map",
    "squeeze_jacobian",
    "symplectic_area",
    "rotation_matrix_R",
    "pauli_components",
    "conjugation_matrix",
    "pauli_conjugation_even",
    "pauli_conjugation_odd",
    "odd_rotation_block",
    "plane_rotation",
    "polar_factorize_symplectic",
    "kernel_structure_report",
]

PAULI = (SIGMA_X, SIGMA_Y, SIGMA_Z)


@dataclass(frozen=True)
class PhasePoint:
    x: float
    p: float


def squeeze_map(B_real: float, point: PhasePoint) -> PhasePoint:
    """(x, p) -> (e^B x, e^-B p)."""
    if not np.isfinite(B_real) or np.iscomplexobj(B_real):
        raise ValidationError([(None, f"squeeze parameter must be finite real, got {B_real}")])
    return PhasePoint(np.exp(B_real) * point.x, np.exp(-B_real) * point.p)


def squeeze_jacobian(B_real: float) -> np.ndarray:
    return np.diag([np.exp(B_real), np.exp(-B_real)])


def symplectic_area(u: PhasePoint, v: PhasePoint) -> float:
    """Oriented area ``u.x v.p - u.p v.x`` spanned by two phase points."""
    return u.x * v.p - u.p * v.x


def rotation_matrix_R(theta: float, parity: str | int = "even") -> np.ndarray:
    """``exp(i theta sx)`` for even parity, ``sz exp(i theta sx)`` for odd.

    ``parity`` may be ``"even"``/``"odd"`` or a series order ``n``.
    """
    if isinstance(parity, (int, np.integer)):
        odd = bool(parity % 2)
    elif parity in ("even", "odd"):
        odd = parity == "odd"
    else:
        raise ValidationError([(None, f"parity must be 'even', 'odd' or an int, got {parity!r}")])
    c, s = np.cos(theta), np.sin(theta)
    sign = -1 if odd else 1
    return np.array([[c, 1j * s], [sign * 1j * s, sign * c]], dtype=complex)


def pauli_components(op) -> np.ndarray:
    """Coefficients of ``op`` on (I, sx, sy, sz): ``tr(sigma_j op) / 2``."""
    op = np.asarray(op, dtype=complex)
    return np.array([np.trace(P @ op) / 2 for P in (IDENTITY2,) + PAULI])


def conjugation_matrix(U) -> np.ndarray:
    """Real 3x3 matrix ``M`` with ``U sigma_j U^+ = sum_l M[j, l] sigma_l``."""
    U = np.asarray(U, dtype=complex)
    rows = []
    for P in PAULI:
        comp = pauli_components(U @ P @ U.conj().T)
        if abs(comp[0]) > 1e-12 or np.max(np.abs(comp.imag)) > 1e-12:
            raise ValidationError([(None, "conjugation does not map Pauli matrices to Pauli vectors")])
        rows.append(comp[1:].real)
    return np.array(rows)


def pauli_conjugation_even(theta: float) -> np.ndarray:
    """Pauli-vector map of ``exp(i theta sx)``: rotation by 2 theta about x."""
    c, s = np.cos(2 * theta), np.sin(2 * theta)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


@dataclass(frozen=True)
class ScaledMatrix:
    """``scale * matrix`` kept factored, as the odd-order map is usually written."""

    scale: float
    matrix: np.ndarray

    @property
    def full(self) -> np.ndarray:
        return self.scale * self.matrix

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.full))


def pauli_conjugation_odd(theta: float) -> ScaledMatrix:
    """Pauli-vector map of ``sz exp(i theta sx)``: ``e^{i pi}`` times a reflection."""
    c, s = np.cos(2 * theta), np.sin(2 * theta)
    inner = np.array([[1.0, 0.0, 0.0], [0.0, c, s], [0.0, s, -c]])
    return ScaledMatrix(scale=float(np.real(np.exp(1j * np.pi))), matrix=inner)


def plane_rotation(phi: float) -> np.ndarray:
    """``[[cos phi, sin phi], [-sin phi, cos phi]]``."""
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, s], [-s, c]])


def odd_rotation_block(theta: float) -> np.ndarray:
    """sz times the (y, z) block of the odd-order map; equals ``plane_rotation(2 theta)``."""
    lower = pauli_conjugation_odd(theta).matrix[1:, 1:]
    return np.diag([1.0, -1.0]) @ lower


def polar_factorize_symplectic(m, abs_tol: float = 1e-12):
    """Factor a real 2x2 matrix with unit determinant as ``rotation @ positive``.

    For positive determinant the orthogonal polar factor of a 2x2 matrix is
    the rotation by ``atan2(m10 - m01, m00 + m11)``; the positive factor is
    then ``rotation^T m``, which equals the symmetric square root of
    ``m^T m``. The closed form avoids squaring the condition number.

    Returns
    -------
    rotation, positive : ndarray, shape (2, 2)
    """
    m = np.asarray(m, dtype=float)
    if m.shape != (2, 2):
        raise ValidationError([(None, f"expected a 2x2 matrix, got shape {m.shape}")])
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    if not abs(det - 1.0) <= max(abs_tol, 1e-12) * max(1.0, np.abs(m).max() ** 2):
        raise ValidationError([(None, f"matrix determinant is {det}, not 1")])
    c, s = m[0, 0] + m[1, 1], m[1, 0] - m[0, 1]
    r = np.hypot(c, s)
    rotation = np.array([[c, -s], [s, c]]) / r
    positive = rotation.T @ m
    positive = 0.5 * (positive + positive.T)
    return rotation, positive


def _even_shape_residual(M):
    """Distance of ``M`` from the form ``a I + b sx`` (equal diagonals and off-diagonals)."""
    return float(max(abs(M[0, 0] - M[1, 1]), abs(M[0, 1] - M[1, 0])))


def _effective_angle(M):
    """Angle of an ``a I + i b sx`` term (complex overall scale allowed)."""
    a, b = M[0, 0], M[0, 1] / 1j
    scale = a if abs(a) >= abs(b) else b
    if scale == 0:
        return 0.0
    ratio_a, ratio_b = a / scale, b / scale
    return float(np.arctan2(ratio_b.real, ratio_a.real))


def kernel_structure_report(osc_kernel=None, spin_kernel=None, tol: float = 1e-10) -> dict:
    """Check the squeeze/rotation identities on propagator outputs.

    Parameters
    ----------
    osc_kernel : OscillatorKernel, optional
    spin_kernel : SpinKernel, optional
    tol : float
        Residual above which a claim is marked as failed.

    Returns
    -------
    dict
        JSON-serializable report with one entry per claim, each holding
        ``pass`` and ``residual``; complex values are ``[re, im]`` pairs.
    """
    claims = []

    def claim(name, residual, **extra):
        residual = float(residual)
        entry = {"claim": name, "residual": residual, "pass": bool(residual < tol)}
        entry.update(extra)
        claims.append(entry)

    out: dict = {}
    if osc_kernel is not None:
        ph = osc_kernel.phases
        X = ph.squeeze
        eA = np.exp(ph.A)
        block = osc_kernel.block()
        # sigma_z = +1 carries e^{-X}: diag(e^X, e^-X) in (down, up) order
        expected = eA * np.diag([np.exp(-X), np.exp(X)])
        scale = max(1.0, float(np.abs(block).max()))
        claim("oscillator block is e^A diag(e^-B, e^B)", np.abs(block - expected).max() / scale)
        det_res = abs(osc_kernel.determinant() - np.exp(2 * ph.A)) / max(1.0, abs(np.exp(2 * ph.A)))
        claim("oscillator block determinant equals e^(2A)", det_res)
        claim("Re A equals -sum|phi_k|^2 / 2", abs(ph.A.real + 0.5 * np.sum(np.abs(ph.phi) ** 2)))
        J = squeeze_jacobian(X.real)
        claim("squeeze map has unit Jacobian", abs(np.linalg.det(J) - 1.0))
        out["oscillator"] = {
            "A": [ph.A.real, ph.A.imag],
            "B": [X.real, X.imag],
            "squeeze_magnitude": X.real,
            "squeeze_phase": X.imag,
        }
    if spin_kernel is not None:
        modes = []
        for k, terms in enumerate(spin_kernel.terms):
            angles = []
            for n, M in enumerate(terms):
                even = M if n % 2 == 0 else SIGMA_Z @ M
                scale = max(1.0, float(np.abs(M).max()))
                label = "even" if n % 2 == 0 else "odd"
                claim(f"mode {k} order {n}: {label} term has rotation shape",
                      _even_shape_residual(even) / scale, mode=k, order=n)
                angles.append(_effective_angle(even))
            modes.append({"mode": k, "effective_angles": angles})
            if terms and spin_kernel.rotation_angles:
                expected = rotation_matrix_R(spin_kernel.rotation_angles[k], "even")
                claim(f"mode {k} order 0 equals exp(i lam t sx)",
                      np.abs(terms[0] - expected).max(), mode=k, order=0)
        out["spin"] = {
            "sector": spin_kernel.sector,
            "system_phase": [spin_kernel.system_phase.real, spin_kernel.system_phase.imag],
            "modes": modes,
        }
    for th in (0.3, 1.1):
        claim(f"even Pauli map at theta={th} matches conjugation",
              np.abs(pauli_conjugation_even(th) - conjugation_matrix(rotation_matrix_R(th, "even"))).max())
        claim(f"odd Pauli map at theta={th} matches conjugation",
              np.abs(pauli_conjugation_odd(th).full - conjugation_matrix(rotation_matrix_R(th, "odd"))).max())
        claim(f"odd Pauli map at theta={th} has unit determinant",
              abs(pauli_conjugation_odd(th).det - 1.0))
    out["claims"] = claims
    out["pass"] = all(c["pass"] for c in claims)
    return out
