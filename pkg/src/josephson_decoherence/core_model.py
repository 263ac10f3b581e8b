"""Two-mode Bose-Hubbard model in the pseudo-spin (S3 eigen-) basis.

Energies are measured in units of the tunneling element J unless stated
otherwise; the basis of a sector with ``N`` atoms is ordered by decreasing
``n = (n_L - n_R)/2``, i.e. index ``k = n_R`` runs from 0 to ``N``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

REGIMES = ("Rabi", "Josephson", "Fock")


@dataclass(frozen=True)
class ModelParams:
    """Hamiltonian ``H = eps*S3 - J*S1 + U*S3^2`` for ``N`` atoms."""

    N: int
    epsilon: float = 0.0
    J: float = 1.0
    U: float = 0.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        if not self.J > 0:
            raise ValueError(f"J must be positive, got {self.J!r}")
        if not self.U >= 0:
            raise ValueError(f"U must be non-negative, got {self.U!r}")
        object.__setattr__(self, "N", int(self.N))
        if not (np.isfinite(self.u) and np.isfinite(self.eps_tilde)):
            raise ValueError("derived parameters are not finite")

    @property
    def u(self) -> float:
        return self.N * self.U / self.J

    @property
    def eps_tilde(self) -> float:
        return self.epsilon / self.J

    @classmethod
    def from_u(cls, N, u, epsilon=0.0, J=1.0):
        return cls(N=N, epsilon=epsilon, J=J, U=u * J / N)

    def with_atoms(self, N):
        """Same couplings, different atom number (used for loss sectors)."""
        return ModelParams(N=N, epsilon=self.epsilon, J=self.J, U=self.U)


@dataclass(frozen=True)
class SpinBasis:
    N: int

    @property
    def s(self) -> float:
        return self.N / 2

    @property
    def dim(self) -> int:
        return self.N + 1

    @property
    def n(self) -> np.ndarray:
        """S3 eigenvalues, +N/2 down to -N/2."""
        return self.s - np.arange(self.dim)

    @property
    def n_left(self) -> np.ndarray:
        return self.s + self.n

    @property
    def n_right(self) -> np.ndarray:
        return self.s - self.n


def raising_elements(N):
    """Matrix elements <n+1|S+|n> placed on the first super-diagonal.

    Entry ``i`` couples basis index ``i+1`` (lower n) to ``i`` (higher n).
    """
    n = SpinBasis(N).n[1:]
    s = N / 2
    return np.sqrt((s - n) * (s + n + 1))


def build_spin_operators(basis):
    """Dense S1, S2, S3 on a single sector."""
    if isinstance(basis, (int, np.integer)):
        basis = SpinBasis(int(basis))
    off = raising_elements(basis.N)
    sp = np.diag(off, 1).astype(complex)
    sm = sp.conj().T
    S1 = 0.5 * (sp + sm)
    S2 = -0.5j * (sp - sm)
    S3 = np.diag(basis.n).astype(complex)
    return S1, S2, S3


def hamiltonian_tridiagonal(p):
    """(diagonal, off-diagonal) of the real-symmetric Hamiltonian."""
    n = SpinBasis(p.N).n
    diag = p.epsilon * n + p.U * n**2
    off = -0.5 * p.J * raising_elements(p.N)
    return diag, off


def build_hamiltonian(p):
    diag, off = hamiltonian_tridiagonal(p)
    return np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)


@dataclass(frozen=True)
class CharacteristicParams:
    u: float
    xi: float
    omega_J: float
    eps_c: float
    regime: str


def classify_regime(u, N):
    # u=1 -> Josephson, u=N^2 -> Fock
    if u < 1:
        return "Rabi"
    if u < N**2:
        return "Josephson"
    return "Fock"


def characteristic_params(p):
    u = p.u
    xi = (1 + u) ** 0.25
    omega_J = np.sqrt(p.J * (p.J + p.N * p.U))
    eps_c = (u ** (2 / 3) - 1) ** 1.5 if u > 1 else 0.0
    return CharacteristicParams(u=u, xi=xi, omega_J=float(omega_J),
                                eps_c=float(eps_c), regime=classify_regime(u, p.N))


@dataclass
class GroundState:
    psi: np.ndarray
    energy: float
    degenerate: bool = False

    @property
    def rho(self):
        return np.outer(self.psi, self.psi.conj())


def _spectrum(H):
    H = np.asarray(H)
    if np.allclose(H, np.triu(np.tril(H, 1), -1)) and np.allclose(H.imag, 0):
        d = np.real(np.diag(H)).copy()
        e = np.real(np.diag(H, 1)).copy()
        if len(d) == 1:
            return d, np.ones((1, 1))
        return eigh_tridiagonal(d, e)
    return np.linalg.eigh(H)


def ground_state(H):
    """Lowest eigenvector of ``H``.

    When the two lowest levels are degenerate (deep Fock regime) the
    even-parity combination is returned and ``degenerate`` is set.
    """
    H = np.asarray(H)
    w, v = _spectrum(H)
    scale = max(np.abs(w).max(), 1.0)
    psi = v[:, 0].astype(complex)
    degenerate = len(w) > 1 and (w[1] - w[0]) < 1e-12 * scale
    if degenerate:
        pair = v[:, :2]
        even = pair + pair[::-1]
        k = np.argmax(np.linalg.norm(even, axis=0))
        psi = even[:, k] / np.linalg.norm(even[:, k])
        psi = psi.astype(complex)
        warnings.warn("degenerate ground state, returning even-parity combination")
    # fix global sign for reproducibility
    j = np.argmax(np.abs(psi))
    psi = psi * np.exp(-1j * np.angle(psi[j]))
    return GroundState(psi=psi, energy=float(w[0]), degenerate=bool(degenerate))


def thermal_state(H, T):
    """Gibbs state ``exp(-H/T)/Z`` with ``T`` in the same energy units as H."""
    if T < 0:
        raise ValueError("temperature must be non-negative")
    if T == 0:
        return ground_state(H).rho
    w, v = _spectrum(H)
    weights = np.exp(-(w - w[0]) / T)
    weights /= weights.sum()
    return (v * weights) @ v.conj().T


def thermal_occupation(omega, T):
    """Bose occupation of a mode of energy ``omega`` at temperature ``T``."""
    if T == 0:
        return 0.0
    return 1.0 / np.expm1(omega / T)


def expectation(rho, op):
    return np.trace(rho @ op)


def coherence_g1(rho):
    """|<a_L^+ a_R>| / sqrt(n_L n_R) for a fixed-N density matrix or state vector."""
    rho = np.asarray(rho)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    N = rho.shape[0] - 1
    S1, S2, S3 = build_spin_operators(SpinBasis(N))
    s1 = expectation(rho, S1).real
    s2 = expectation(rho, S2).real
    s3 = expectation(rho, S3).real
    return g1_from_moments(s1, s2, s3, np.trace(rho).real * N)


def g1_from_moments(s1, s2, s3, n_total):
    """Coherence from summed spin moments and mean total atom number."""
    nl = n_total / 2 + s3
    nr = n_total / 2 - s3
    if nl * nr <= 0:
        raise ValueError("coherence undefined when a well is empty")
    return float(np.hypot(s1, s2) / np.sqrt(nl * nr))


def fock_state(N, n_left):
    psi = np.zeros(N + 1, dtype=complex)
    psi[N - n_left] = 1.0
    return psi


def coherent_state(N, theta=np.pi / 2, phi=0.0):
    """SU(2) coherent state pointing along (theta, phi) on the Bloch sphere."""
    from scipy.special import gammaln

    k = np.arange(N + 1)
    nl = N - k
    logb = 0.5 * (gammaln(N + 1) - gammaln(nl + 1) - gammaln(k + 1))
    # n_L = N - k atoms carry cos(theta/2), n_R carry sin(theta/2) e^{i phi}
    with np.errstate(divide="ignore"):
        amp = (logb + nl * np.log(np.cos(theta / 2) + 0j)
               + k * np.log(np.sin(theta / 2) + 0j))
    psi = np.exp(amp) * np.exp(1j * k * phi)
    return psi / np.linalg.norm(psi)
