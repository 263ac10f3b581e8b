"""Quasi-1D mean-field description of the double-well trap.

Internally lengths are in units of ``a_x = sqrt(hbar/(m omega_x))`` and
energies in ``hbar omega_x``; reported energies are frequencies ``E/h`` in Hz.
The potential is symmetric, so every mode is computed on the half line
``x > 0`` with a mirror (even) or antimirror (odd) ghost cell at the origin.

The transverse profile is a Gaussian.  With ``transverse="variational"``
its width follows the local line density, ``sigma^2 = a_perp^2 sqrt(1 + y)``
with ``y = 2 a_s n_1D``; with ``transverse="fixed"`` it stays at ``a_perp``
and the coupling is ``g/(2 pi a_perp^2)``.  ``mu_parallel`` is the
expectation of the longitudinal operator with the on-axis 3D density.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
import scipy.constants as sc
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.linalg import eigh_tridiagonal, solve_banded

from .core_model import classify_regime
from .exceptions import NumericalError

RB87_MASS = 86.909180527 * sc.atomic_mass
RB87_A_S = 98.98 * sc.physical_constants["Bohr radius"][0]  # |F=2, mF=2>
TRANSVERSE = ("variational", "fixed")


@dataclass(frozen=True)
class TrapSpec:
    """Double well ``V0 cos^2(pi x/d)`` inside ``|x| <= d/2``, harmonic ``omega_x`` outside."""

    d: float                  # m
    V0: float                 # Hz (E/h)
    omega_x: float            # rad/s
    omega_perp: float         # rad/s
    N: int
    mass: float = RB87_MASS   # kg
    a_s: float = RB87_A_S     # m
    z0: float = 0.0           # m, transverse centre (no role in 1D)
    transverse: str = "variational"

    def __post_init__(self):
        if not self.d > 0:
            raise ValueError("d must be positive")
        if not self.V0 >= 0:
            raise ValueError("V0 must be non-negative")
        if not (self.omega_x > 0 and self.omega_perp > 0):
            raise ValueError("trap frequencies must be positive")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")
        if not (self.mass > 0 and self.a_s >= 0):
            raise ValueError("mass must be positive and a_s non-negative")
        if self.transverse not in TRANSVERSE:
            raise ValueError(f"transverse must be one of {TRANSVERSE}")

    @property
    def a_x(self):
        return np.sqrt(sc.hbar / (self.mass * self.omega_x))

    @property
    def a_perp(self):
        return np.sqrt(sc.hbar / (self.mass * self.omega_perp))

    @property
    def hz_per_unit(self):
        """Frequency (E/h) of one scaled energy unit."""
        return self.omega_x / (2 * np.pi)

    @property
    def g1d(self):
        """Quasi-1D coupling ``g/(2 pi a_perp^2) = 2 hbar omega_perp a_s`` (J m)."""
        return 2 * sc.hbar * self.omega_perp * self.a_s

    @property
    def g1d_scaled(self):
        return self.g1d / (sc.hbar * self.omega_x * self.a_x)

    def nonlinearity(self):
        return Nonlinearity(self)

    def potential(self, x):
        """Longitudinal potential in Hz at positions ``x`` (m)."""
        x = np.abs(np.asarray(x, dtype=float))
        inner = self.V0 * np.cos(np.pi * x / self.d) ** 2
        outer = 0.5 * self.mass * self.omega_x ** 2 * (x - self.d / 2) ** 2 / sc.h
        return np.where(x <= self.d / 2, inner, outer)


class Nonlinearity:
    """Mean-field potential ``W(n)`` of the longitudinal equation (scaled units).

    ``W`` excludes the transverse zero-point energy; ``n = N f^2`` with ``f``
    normalised on the line.
    """

    def __init__(self, spec: TrapSpec):
        self.w = spec.omega_perp / spec.omega_x
        self.a = spec.a_s / spec.a_x
        self.N = spec.N
        self.variational = spec.transverse == "variational"

    def _y(self, f):
        return 2 * self.a * self.N * f ** 2

    def potential(self, f):
        y = self._y(f)
        if self.variational:
            return self.w * ((1 + 1.5 * y) / np.sqrt(1 + y) - 1)
        return self.w * y

    def _dW_dy(self, y):
        if self.variational:
            return self.w * (1 + 0.75 * y) / (1 + y) ** 1.5
        return self.w * np.ones_like(y)

    def jacobian_diag(self, f):
        """d[W(f) f]/df."""
        y = self._y(f)
        return self.potential(f) + 2 * y * self._dW_dy(y)

    def coupling(self, f):
        """Local ``dW/dn``, the effective contact coupling felt by excitations."""
        return 2 * self.a * self._dW_dy(self._y(f))

    def on_axis(self, f):
        """Interaction energy per atom from the on-axis 3D density."""
        y = self._y(f)
        if self.variational:
            return 2 * self.w * y / np.sqrt(1 + y)
        return 2 * self.w * y


@dataclass(frozen=True)
class Grid:
    points: int = 2048        # full-line points (even)
    extent: float | None = None  # full width in m; default 6 d

    def half(self, spec: TrapSpec):
        if self.points < 16 or self.points % 2:
            raise ValueError("grid needs an even number of points >= 16")
        L = 6 * spec.d if self.extent is None else self.extent
        n = self.points // 2
        dx = L / self.points
        x = (np.arange(n) + 0.5) * dx
        if L / 2 - spec.d / 2 < 3 * spec.a_x:
            raise ValueError("grid must extend at least 3 harmonic lengths beyond the wells")
        return x, dx


@dataclass
class GroundMode:
    x: np.ndarray            # half-line positions (m)
    phi: np.ndarray          # scaled units, normalised on the full line
    mu_parallel: float       # Hz, on-axis expectation of the longitudinal operator
    mu_1d: float             # Hz, eigenvalue of the longitudinal mean-field equation
    mu_perp: float           # Hz, transverse zero-point energy
    residual: float
    iterations: int
    dx: float                # scaled

    @property
    def mu(self):
        return self.mu_1d + self.mu_perp

    def full(self, parity=1):
        return _unfold(self.x, self.phi, parity)


@dataclass
class Modes:
    E: np.ndarray            # Hz, E[0] = 0
    phi: list                # half-line arrays
    parity: np.ndarray       # +1 even, -1 odd
    x: np.ndarray

    def full(self, j):
        return _unfold(self.x, self.phi[j], self.parity[j])


@dataclass(frozen=True)
class TwoModeExtraction:
    mu_parallel: float
    E: tuple                 # (E1, E2, E3) in Hz
    J: float
    U: float
    u: float
    xi: float
    omega_J: float           # Hz (E/h), i.e. omega_J / 2 pi
    U_cross: float           # g1D int phi_L^2 phi_R^2, diagnostic only
    two_mode_valid: bool
    fock: bool
    loss_enhanced: bool
    regime: str


def _unfold(x, f, parity):
    xs = np.concatenate([-x[::-1], x])
    return xs, np.concatenate([parity * f[::-1], f])


def _kinetic(n, dx, parity):
    """Tridiagonal of -1/2 d^2/dx^2 on the half line with a (anti)mirror ghost."""
    diag = np.full(n, 1.0 / dx ** 2)
    diag[0] -= parity * 0.5 / dx ** 2
    off = np.full(n - 1, -0.5 / dx ** 2)
    return diag, off


def _norm2(f, dx):
    return 2 * dx * np.dot(f, f)


def _setup(spec: TrapSpec, grid: Grid):
    x, dx_m = grid.half(spec)
    v = spec.potential(x) / spec.hz_per_unit
    return x, dx_m / spec.a_x, v


def solve_gp_ground(spec: TrapSpec, grid: Grid | None = None, phi_init=None,
                    tol=1e-10, max_iter=2000):
    """Ground mode of ``-1/2 phi'' + V phi + W(N phi^2) phi = mu phi``.

    Backward-Euler normalised gradient flow from ``phi_init`` (or a
    harmonic guess), then Newton iterations on the bordered system.
    """
    grid = grid or Grid()
    x, dx, v = _setup(spec, grid)
    n = len(x)
    kd, ko = _kinetic(n, dx, +1)
    nl = spec.nonlinearity()

    if phi_init is None or len(phi_init) != n:
        xs = x / spec.a_x
        phi = np.exp(-0.5 * (xs - spec.d / spec.a_x / 2) ** 2 / 4) + np.exp(-0.5 * (xs + spec.d / spec.a_x / 2) ** 2 / 4)
    else:
        phi = np.abs(np.asarray(phi_init, dtype=float))
    phi = phi / np.sqrt(_norm2(phi, dx))

    def linear_op(f):
        return kd * f + np.r_[ko * f[1:], 0] + np.r_[0, ko * f[:-1]] + v * f

    def gp_energy_op(f):
        return linear_op(f) + nl.potential(f) * f

    dtau = 0.5
    it = 0
    ab = np.zeros((3, n))
    ab[0, 1:] = dtau * ko
    ab[2, :-1] = dtau * ko
    for it in range(1, max_iter + 1):
        ab[1] = 1 + dtau * (kd + v + nl.potential(phi))
        new = solve_banded((1, 1), ab, phi)
        new /= np.sqrt(_norm2(new, dx))
        change = np.sqrt(_norm2(new - phi, dx))
        phi = new
        if change < 1e-7:
            break

    # Newton on F = [H(phi) - mu phi ; (|phi|^2 - 1)/2]
    mu = 2 * dx * np.dot(phi, gp_energy_op(phi))
    lap = sp.diags([ko, kd, ko], [-1, 0, 1], format="csr")
    residual = np.inf
    for k in range(50):
        F = gp_energy_op(phi) - mu * phi
        residual = np.sqrt(_norm2(F, dx))
        if residual <= tol:
            break
        A = lap + sp.diags(v + nl.jacobian_diag(phi) - mu)
        col = sp.csc_matrix(-phi[:, None])
        row = sp.csr_matrix(2 * dx * phi[None, :])
        K = sp.bmat([[A, col], [row, None]], format="csc")
        rhs = -np.r_[F, 0.5 * (_norm2(phi, dx) - 1)]
        step = spla.spsolve(K, rhs)
        phi = phi + step[:-1]
        mu = mu + step[-1]
        it += 1
    if residual > max(tol, 1e-8):
        raise NumericalError(f"GP ground state did not converge (residual {residual:.2e})")
    if phi[0] < 0:
        phi = -phi
    if np.abs(phi[-1]) > 1e-6 * np.abs(phi).max():
        raise NumericalError("condensate reaches the grid edge; enlarge the grid extent")
    mu_par = 2 * dx * np.dot(phi, linear_op(phi) + nl.on_axis(phi) * phi)
    return GroundMode(x=x, phi=phi, mu_parallel=float(mu_par * spec.hz_per_unit),
                      mu_1d=float(mu * spec.hz_per_unit),
                      mu_perp=float(spec.omega_perp / (2 * np.pi)),
                      residual=float(residual), iterations=it, dx=dx)


def excited_modes(spec: TrapSpec, ground: GroundMode, count=4):
    """Lowest ``count`` eigenpairs of the mean-field operator, shifted so E_0 = 0."""
    n = len(ground.x)
    v = spec.potential(ground.x) / spec.hz_per_unit
    veff = v + spec.nonlinearity().potential(ground.phi)
    n_even = (count + 1) // 2
    n_odd = count // 2
    vals, vecs, par = [], [], []
    for parity, k in ((+1, n_even), (-1, n_odd)):
        if k == 0:
            continue
        kd, ko = _kinetic(n, ground.dx, parity)
        w, u = eigh_tridiagonal(kd + veff, ko, select="i", select_range=(0, k - 1))
        for j in range(k):
            f = u[:, j] / np.sqrt(_norm2(u[:, j], ground.dx))
            # even modes positive at the origin, odd modes positive for x > 0 near the wells
            ref = f[0] if parity > 0 else f[np.argmax(np.abs(f))]
            vals.append(w[j])
            vecs.append(f * np.sign(ref))
            par.append(parity)
    order = np.argsort(vals)
    vals = np.asarray(vals)[order]
    E = (vals - vals[0]) * spec.hz_per_unit
    return Modes(E=E, phi=[vecs[i] for i in order], parity=np.asarray(par)[order], x=ground.x)


def extract_two_mode(spec: TrapSpec, ground: GroundMode, modes: Modes) -> TwoModeExtraction:
    """Bose-Hubbard parameters from the symmetric/antisymmetric doublet."""
    if modes.parity[0] != 1 or len(modes.E) < 2 or modes.parity[1] != -1:
        raise NumericalError("lowest modes are not an even/odd doublet")
    dx = ground.dx
    phi0, phi1 = modes.phi[0], modes.phi[1]
    _, f0 = _unfold(modes.x, phi0, 1)
    _, f1 = _unfold(modes.x, phi1, -1)
    phiL = (f0 - f1) / np.sqrt(2)
    phiR = (f0 + f1) / np.sqrt(2)
    _, g0 = _unfold(modes.x, ground.phi, 1)
    g = spec.nonlinearity().coupling(g0) * spec.hz_per_unit
    U = dx * np.sum(g * phiL ** 4)
    U_cross = dx * np.sum(g * phiL ** 2 * phiR ** 2)
    J = float(modes.E[1])
    N = spec.N
    u = N * U / J
    xi = (1 + u) ** 0.25
    E = tuple(float(e) for e in modes.E[1:4])
    return TwoModeExtraction(
        mu_parallel=ground.mu_parallel, E=E, J=J, U=float(U), u=float(u), xi=float(xi),
        omega_J=float(np.sqrt(J * (J + N * U))), U_cross=float(U_cross),
        two_mode_valid=bool(spec.V0 > ground.mu_parallel),
        fock=bool(xi ** 2 > N), loss_enhanced=bool(xi ** 2 > 2 * np.sqrt(N)),
        regime=classify_regime(u, N))


def two_mode_parameters(spec: TrapSpec, grid: Grid | None = None, phi_init=None):
    ground = solve_gp_ground(spec, grid, phi_init=phi_init)
    modes = excited_modes(spec, ground, count=4)
    return extract_two_mode(spec, ground, modes), ground


SWEEP_COLUMNS = ("N", "V0", "mu_par", "E1", "E2", "E3", "J", "U", "u", "xi2", "omegaJ",
                 "valid", "fock", "loss_enhanced")


def sweep_row(ex: TwoModeExtraction, N, V0):
    return {"N": N, "V0": V0, "mu_par": ex.mu_parallel, "E1": ex.E[0], "E2": ex.E[1],
            "E3": ex.E[2], "J": ex.J, "U": ex.U, "u": ex.u, "xi2": ex.xi ** 2,
            "omegaJ": ex.omega_J, "valid": ex.two_mode_valid, "fock": ex.fock,
            "loss_enhanced": ex.loss_enhanced}


def sweep(spec: TrapSpec, V0_values, N_values=None, grid: Grid | None = None, threads=1):
    """Rows over the (N, V0) grid; each N is a V0 continuation (warm starts)."""
    N_values = [spec.N] if N_values is None else list(N_values)
    V0_values = list(V0_values)

    def run(N):
        rows, phi = [], None
        for V0 in V0_values:
            s = replace(spec, N=int(N), V0=float(V0))
            ex, ground = two_mode_parameters(s, grid, phi_init=phi)
            phi = ground.phi
            rows.append(sweep_row(ex, int(N), float(V0)))
        return rows

    if threads > 1 and len(N_values) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(run, N_values))
    else:
        blocks = [run(N) for N in N_values]
    return [r for b in blocks for r in b]


def validity_boundary(rows):
    """V0 where mu_parallel = V0, by linear interpolation of ``mu_par - V0``."""
    V0 = np.array([r["V0"] for r in rows])
    diff = np.array([r["mu_par"] for r in rows]) - V0
    idx = np.nonzero(np.diff(np.sign(diff)) != 0)[0]
    if len(idx) == 0:
        return None
    i = idx[0]
    return float(V0[i] - diff[i] * (V0[i + 1] - V0[i]) / (diff[i + 1] - diff[i]))
