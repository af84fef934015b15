"""
Brute-force reference dynamics on truncated Hilbert spaces.

Everything here is deliberately independent of the analytic kernels: the
sector Hamiltonians are assembled as dense matrices from truncated ladder
operators (or Pauli matrices for the spin bath) and exponentiated through
a Hermitian eigendecomposition. Mode order in every tensor product is the
order of the bath spec, the first mode being the slowest-varying index.

Randomized comparisons against the analytic kernels draw from
``RANDOM_REGIME`` (see :func:`draw_oscillator_case`): system and mode
frequencies in [0.5, 2], couplings with ``|g_k| <= 0.5``, coherent
amplitudes with ``|alpha| <= 1`` and times in [0, 3]. In this box the
displaced bath states stay well inside a Fock cutoff of 64 per mode, so
the oracle's own truncation error is far below the comparison tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy import linalg as sla
from scipy.special import gammaln

from .core import (
    SIGMA_X,
    SIGMA_Z,
    DimensionError,
    OscillatorBathSpec,
    SpinBathSpec,
    SystemParams,
    Tolerances,
    TruncationError,
    ValidationError,
    as_coherent_point,
    check_sector,
    validate_bath,
)

__all__ = [
    "annihilation",
    "tensor_product",
    "embed",
    "partial_trace",
    "build_sector_hamiltonian_oscillator",
    "build_sector_hamiltonian_driven",
    "build_sector_hamiltonian_spin",
    "HermitianPropagator",
    "unitary_exponential",
    "coherent_state_vector",
    "top_level_population",
    "OscillatorOracle",
    "reduced_density_matrix",
    "spin_sector_unitary",
    "RANDOM_REGIME",
    "OscillatorCase",
    "draw_oscillator_case",
]

DEFAULT_START_FOCK = 8

RANDOM_REGIME = {
    "omega": (0.5, 2.0),
    "omega_k": (0.5, 2.0),
    "max_coupling": 0.5,
    "max_amplitude": 1.0,
    "t": (0.0, 3.0),
}
MAX_SPIN_MODES = 12


def annihilation(n_max: int) -> np.ndarray:
    """Truncated ladder matrix ``b`` on Fock levels 0..n_max."""
    if n_max < 1:
        raise ValidationError([(None, f"n_max must be >= 1, got {n_max}")])
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1).astype(complex)


def _check_dim(dim, cap):
    if cap is not None and dim > cap:
        raise DimensionError(f"dimension {dim} exceeds the configured cap {cap}")


def tensor_product(items, max_dim: int | None = None) -> np.ndarray:
    """Kronecker product of operators or state vectors, in list order."""
    items = [np.asarray(x, dtype=complex) for x in items]
    if not items:
        return np.ones((1, 1), dtype=complex)
    dim = math.prod(x.shape[0] for x in items)
    _check_dim(dim, max_dim)
    return reduce(np.kron, items)


def embed(op, k: int, dims) -> np.ndarray:
    """Place ``op`` on subsystem ``k`` of a product space with ``dims``."""
    return tensor_product(
        [op if j == k else np.eye(d, dtype=complex) for j, d in enumerate(dims)]
    )


def partial_trace(rho, dims, keep) -> np.ndarray:
    """Trace out every subsystem not listed in ``keep``.

    ``rho`` may be a density matrix or a pure state vector on the product
    space with subsystem dimensions ``dims``.
    """
    rho = np.asarray(rho, dtype=complex)
    dims = [int(d) for d in dims]
    total = math.prod(dims)
    keep = sorted(set(keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise DimensionError(f"keep indices {keep} out of range for {len(dims)} subsystems")
    traced = [j for j in range(len(dims)) if j not in keep]
    dk = math.prod(dims[j] for j in keep)
    dt = math.prod(dims[j] for j in traced)
    n = len(dims)
    if rho.ndim == 1:
        if rho.shape[0] != total:
            raise DimensionError(f"state of length {rho.shape[0]} does not factor as {dims}")
        psi = rho.reshape(dims).transpose(keep + traced).reshape(dk, dt)
        return psi @ psi.conj().T
    if rho.shape != (total, total):
        raise DimensionError(f"operator of shape {rho.shape} does not factor as {dims}")
    perm = keep + traced
    r = rho.reshape(dims + dims).transpose(perm + [p + n for p in perm])
    return np.einsum("ijkj->ik", r.reshape(dk, dt, dk, dt))


def build_sector_hamiltonian_oscillator(
    sys: SystemParams, bath: OscillatorBathSpec, s: int, n_max, max_dim=None
) -> np.ndarray:
    """Dense bath Hamiltonian conditioned on sigma_z = s.

    ``H_s = s w/2 + sum_k w_k b_k^+ b_k + s (w/2) sum_k g_k (b_k + b_k^+)``.
    ``n_max`` is either one cutoff for every mode or one per mode.
    """
    s = check_sector(s)
    validate_bath(bath)
    cut = _cutoffs(n_max, len(bath))
    dims = [n + 1 for n in cut]
    _check_dim(math.prod(dims), max_dim)
    H = s * 0.5 * sys.omega * np.eye(math.prod(dims), dtype=complex)
    for k, ((wk, gk), n) in enumerate(zip(bath.modes, cut)):
        b = annihilation(n)
        local = wk * (b.conj().T @ b) + s * 0.5 * sys.omega * gk * (b + b.conj().T)
        H += embed(local, k, dims)
    return H


def build_sector_hamiltonian_driven(
    sys: SystemParams, bath: OscillatorBathSpec, s: int, n_max_ext: int, n_max, max_dim=None
) -> np.ndarray:
    """Sector Hamiltonian with the external mode as the first tensor factor.

    ``H_s = s (w - W)/2 + W a^+ a + sum_k [w_k b_k^+ b_k + s (w/2) g_k (b_k + b_k^+)]``
    """
    big_omega = sys.require_drive()
    s = check_sector(s)
    validate_bath(bath)
    cut = _cutoffs(n_max, len(bath))
    dims = [n_max_ext + 1] + [n + 1 for n in cut]
    _check_dim(math.prod(dims), max_dim)
    a = annihilation(n_max_ext)
    H = s * 0.5 * (sys.omega - big_omega) * np.eye(math.prod(dims), dtype=complex)
    H += embed(big_omega * (a.conj().T @ a), 0, dims)
    for k, ((wk, gk), n) in enumerate(zip(bath.modes, cut)):
        b = annihilation(n)
        local = wk * (b.conj().T @ b) + s * 0.5 * sys.omega * gk * (b + b.conj().T)
        H += embed(local, k + 1, dims)
    return H


def build_sector_hamiltonian_spin(sys: SystemParams, bath: SpinBathSpec, s: int) -> np.ndarray:
    """``H_s = s w/2 + sum_k (w_k sz_k + s (w/2) c_k sx_k)`` on 2^M states."""
    s = check_sector(s)
    validate_bath(bath)
    M = len(bath)
    if M > MAX_SPIN_MODES:
        raise DimensionError(f"{M} spin modes exceed the cap of {MAX_SPIN_MODES}")
    dims = [2] * M
    H = s * 0.5 * sys.omega * np.eye(2**M, dtype=complex)
    for k, (wk, ck) in enumerate(bath.modes):
        H += embed(wk * SIGMA_Z + s * 0.5 * sys.omega * ck * SIGMA_X, k, dims)
    return H


def _cutoffs(n_max, M):
    if np.ndim(n_max) == 0:
        return [int(n_max)] * M
    cut = [int(n) for n in n_max]
    if len(cut) != M:
        raise DimensionError(f"{len(cut)} cutoffs given for {M} modes")
    return cut


class HermitianPropagator:
    """exp(sign * i H t) from a single eigendecomposition of ``H``.

    The factorization is reused for every time, so a sweep over a grid
    costs one ``eigh`` plus matrix products.
    """

    def __init__(self, H, abs_tol: float = 1e-12):
        H = np.asarray(H, dtype=complex)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise DimensionError(f"Hamiltonian must be square, got shape {H.shape}")
        scale = max(1.0, float(np.max(np.abs(H)))) if H.size else 1.0
        if H.size and np.max(np.abs(H - H.conj().T)) > abs_tol * scale:
            raise ValidationError([(None, "Hamiltonian is not Hermitian")])
        self.dim = H.shape[0]
        self.energies, self.vectors = sla.eigh(H)

    def unitary(self, t, sign: int = -1) -> np.ndarray:
        phases = np.exp(sign * 1j * self.energies * t)
        return (self.vectors * phases) @ self.vectors.conj().T

    def evolve(self, psi, t, sign: int = -1) -> np.ndarray:
        phases = np.exp(sign * 1j * self.energies * t)
        return self.vectors @ (phases * (self.vectors.conj().T @ psi))


def unitary_exponential(H, t, sign: int = -1, abs_tol: float = 1e-12) -> np.ndarray:
    """Return exp(sign * i H t) for Hermitian ``H`` (sign=-1 is physical evolution)."""
    if sign not in (1, -1):
        raise ValidationError([(None, f"sign must be +1 or -1, got {sign}")])
    return HermitianPropagator(H, abs_tol).unitary(t, sign)


def coherent_state_vector(alpha, n_max: int, tol: float = 1e-9) -> np.ndarray:
    """Truncated, renormalized coherent state on levels 0..n_max.

    Raises :class:`TruncationError` when the untruncated state would put
    more than ``tol`` of its population on the top two retained levels or
    beyond the cutoff.
    """
    alpha = complex(alpha)
    n = np.arange(n_max + 1)
    r2 = abs(alpha) ** 2
    if alpha == 0:
        psi = np.zeros(n_max + 1, dtype=complex)
        psi[0] = 1.0
        return psi
    log_mag = -0.5 * r2 + n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1)
    psi = np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))
    pop = np.abs(psi) ** 2
    lost = max(0.0, 1.0 - float(np.sum(pop)))
    edge = float(np.sum(pop[-2:])) + lost
    if edge > tol:
        raise TruncationError(
            f"coherent state alpha={alpha:.4g} needs more than {n_max} Fock levels "
            f"(edge population {edge:.2e})",
            edge,
        )
    return psi / np.linalg.norm(psi)


def top_level_population(psi, dims) -> float:
    """Largest population on the top two levels of any single mode."""
    p = np.abs(np.asarray(psi).reshape(dims)) ** 2
    worst = 0.0
    for k, d in enumerate(dims):
        marg = p.sum(axis=tuple(j for j in range(len(dims)) if j != k))
        worst = max(worst, float(marg[max(d - 2, 0):].sum()))
    return worst


class OscillatorOracle:
    """Dense reference for the (optionally driven) oscillator-bath problem.

    The Fock cutoff is escalated by doubling, starting at ``n_start``,
    until every state entering a comparison keeps less than ``rel_tol`` of
    its population in the top two levels of each mode. Escalation past
    ``max_fock`` raises :class:`TruncationError`. Factorizations are cached
    per (sector, cutoff), so a time sweep reuses them.
    """

    def __init__(
        self,
        sys: SystemParams,
        bath: OscillatorBathSpec,
        tolerances: Tolerances | None = None,
        driven: bool = False,
        n_start: int = DEFAULT_START_FOCK,
    ):
        self.sys = sys
        self.bath = validate_bath(bath)
        self.tol = tolerances or Tolerances()
        self.driven = driven
        if driven:
            sys.require_drive()
        self.n_start = max(2, int(n_start))
        self._props: dict[tuple[int, int], HermitianPropagator] = {}
        self.last_n_max: int | None = None

    @property
    def n_modes(self) -> int:
        return len(self.bath) + (1 if self.driven else 0)

    def dims(self, n_max: int):
        return [n_max + 1] * self.n_modes

    def propagator(self, s: int, n_max: int) -> HermitianPropagator:
        key = (check_sector(s), n_max)
        if key not in self._props:
            if self.driven:
                H = build_sector_hamiltonian_driven(
                    self.sys, self.bath, s, n_max, n_max, self.tol.max_dim
                )
            else:
                H = build_sector_hamiltonian_oscillator(
                    self.sys, self.bath, s, n_max, self.tol.max_dim
                )
            self._props[key] = HermitianPropagator(H, self.tol.abs_tol)
        return self._props[key]

    def product_coherent(self, amplitudes, n_max: int) -> np.ndarray:
        return tensor_product(
            [coherent_state_vector(a, n_max, self.tol.rel_tol) for a in amplitudes]
        )

    def _endpoints(self, alpha, nu):
        alpha = as_coherent_point(alpha, len(self.bath), "alpha")
        if self.driven:
            return np.concatenate([[complex(nu or 0)], alpha])
        return alpha

    def cutoffs(self):
        """Candidate cutoffs from ``n_start`` doubling up to ``max_fock``."""
        n = min(self.n_start, self.tol.max_fock)
        out = [n]
        while n < self.tol.max_fock:
            n = min(2 * n, self.tol.max_fock)
            out.append(n)
        return out

    def evolved_state(self, t, alpha_prime, s, nu_prime=None, n_max=None, sign=-1):
        """Return ``(U_s(t)|alpha'>, n_max)`` with an adequate cutoff."""
        ket = self._endpoints(alpha_prime, nu_prime)
        worst = float("nan")
        for n in [n_max] if n_max is not None else self.cutoffs():
            try:
                psi0 = self.product_coherent(ket, n)
            except TruncationError as exc:
                worst = exc.population
                continue
            psi = self.propagator(s, n).evolve(psi0, t, sign)
            worst = top_level_population(psi, self.dims(n))
            if worst < self.tol.rel_tol:
                self.last_n_max = n
                return psi, n
        raise TruncationError(
            f"Fock cutoff up to {n_max or self.tol.max_fock} is inadequate "
            f"(top-level population {worst:.2e} >= {self.tol.rel_tol:.1e})",
            worst,
        )

    def matrix_element(self, t, alpha, alpha_prime, s, nu=None, nu_prime=None, n_max=None):
        """Normalized <alpha|U_s(t)|alpha'> with automatic cutoff escalation."""
        bra = self._endpoints(alpha, nu)
        candidates = [n_max] if n_max is not None else self.cutoffs()
        last_exc = None
        for n in candidates:
            try:
                psi, n_used = self.evolved_state(t, alpha_prime, s, nu_prime, n_max=n)
                phi = self.product_coherent(bra, n_used)
            except TruncationError as exc:
                last_exc = exc
                continue
            return complex(np.vdot(phi, psi))
        raise last_exc


def spin_sector_unitary(sys, bath: SpinBathSpec, s: int, t, sign: int = -1) -> np.ndarray:
    return unitary_exponential(build_sector_hamiltonian_spin(sys, bath, s), t, sign)


def _check_density(rho, abs_tol):
    if np.max(np.abs(rho - rho.conj().T)) > abs_tol:
        raise ArithmeticError("reduced density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > abs_tol:
        raise ArithmeticError(f"reduced density matrix has trace {np.trace(rho)}")
    if np.min(np.linalg.eigvalsh(rho)) < -abs_tol:
        raise ArithmeticError("reduced density matrix is not positive semidefinite")


def reduced_density_matrix(
    sys, bath, system_state, bath_initial, t, tolerances: Tolerances | None = None,
    n_max=None, sign: int = -1,
):
    """System density matrix after evolving a product state and tracing the bath.

    Parameters
    ----------
    sys : SystemParams
    bath : OscillatorBathSpec or SpinBathSpec
    system_state : array_like, shape (2,)
        Initial system amplitudes in (up, down) order; normalized here.
    bath_initial : array_like or None
        Coherent amplitudes per mode for an oscillator bath, or a 2^M state
        vector for a spin bath (``None`` means vacuum / all spins up).
    t : float
    n_max : int, optional
        Fixed Fock cutoff; by default it is escalated automatically.

    Returns
    -------
    ndarray, shape (2, 2)
    """
    tol = tolerances or Tolerances()
    c = np.asarray(system_state, dtype=complex)
    if c.shape != (2,):
        raise DimensionError("system_state must have two amplitudes")
    c = c / np.linalg.norm(c)
    validate_bath(bath)
    if isinstance(bath, OscillatorBathSpec):
        oracle = OscillatorOracle(sys, bath, tol)
        amps = np.zeros(len(bath)) if bath_initial is None else bath_initial
        branches, n_used = [], None
        for n in [n_max] if n_max is not None else oracle.cutoffs():
            try:
                branches = [oracle.evolved_state(t, amps, s, n_max=n, sign=sign)[0]
                            for s in (1, -1)]
            except TruncationError:
                if n_max is not None:
                    raise
                continue
            n_used = n
            break
        if n_used is None:
            raise TruncationError("no adequate Fock cutoff for the reduced density matrix")
    else:
        dim = 2 ** len(bath)
        if bath_initial is None:
            chi = np.zeros(dim, dtype=complex)
            chi[0] = 1.0
        else:
            chi = np.asarray(bath_initial, dtype=complex)
            if chi.shape != (dim,):
                raise DimensionError(f"spin bath state must have length {dim}")
            chi = chi / np.linalg.norm(chi)
        branches = [spin_sector_unitary(sys, bath, s, t, sign) @ chi for s in (1, -1)]
    psi = np.concatenate([c[0] * branches[0], c[1] * branches[1]])
    rho = partial_trace(psi, [2, branches[0].shape[0]], keep=[0])
    _check_density(rho, max(tol.abs_tol, 1e-10))
    return rho


@dataclass(frozen=True)
class OscillatorCase:
    sys: SystemParams
    bath: OscillatorBathSpec
    t: float
    alpha: np.ndarray
    alpha_prime: np.ndarray
    nu: complex | None = None
    nu_prime: complex | None = None


def _disk(rng, radius, size=None):
    r = radius * np.sqrt(rng.random(size))
    return r * np.exp(2j * np.pi * rng.random(size))


def draw_oscillator_case(rng: np.random.Generator, n_modes: int = 2, driven: bool = False) -> OscillatorCase:
    """One random problem from ``RANDOM_REGIME``.

    Amplitudes are uniform on the disk of radius ``max_amplitude``; with
    ``driven`` the drive frequency is drawn like the system frequency and
    the external-mode endpoints like the bath amplitudes.
    """
    reg = RANDOM_REGIME
    omega = rng.uniform(*reg["omega"])
    drive = rng.uniform(*reg["omega"]) if driven else None
    wk = rng.uniform(*reg["omega_k"], n_modes)
    gk = rng.uniform(-reg["max_coupling"], reg["max_coupling"], n_modes)
    t = rng.uniform(*reg["t"])
    alpha = _disk(rng, reg["max_amplitude"], n_modes)
    alpha_prime = _disk(rng, reg["max_amplitude"], n_modes)
    nu = nu_prime = None
    if driven:
        nu, nu_prime = _disk(rng, reg["max_amplitude"], 2)
    return OscillatorCase(
        sys=SystemParams(omega=omega, drive_omega=drive),
        bath=OscillatorBathSpec(list(zip(wk, gk))),
        t=float(t), alpha=alpha, alpha_prime=alpha_prime, nu=nu, nu_prime=nu_prime,
    )
