"""Master-equation propagation over total-atom-number sectors.

The density matrix is stored as a stack of padded blocks ``rho[M, :M+1, :M+1]``
for ``M = 0..N_max``.  Starting from a fixed-N state the dissipators used here
never create coherences between different sectors, so nothing else is kept.

Dissipators::

    rotation noise   -gamma_a (S_a^2 rho + rho S_a^2 - 2 S_a rho S_a),  a = 1, 2, 3
    per-well loss    -(gamma_j/2)(n_j rho + rho n_j - 2 a_j rho a_j^+),  j = L, R
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, fields

import numpy as np
from scipy.integrate import DOP853, RK45
from scipy.linalg import eigvalsh_tridiagonal

from ._kernels import rhs_compiled
from .core_model import (ModelParams, SpinBasis, g1_from_moments,
                         hamiltonian_tridiagonal, raising_elements)
from .exceptions import NumericalError

METHODS = {"DOP853": DOP853, "RK45": RK45}
# largest |h*lambda| kept inside the explicit stability region on the imaginary axis
STABILITY_LIMIT = {"DOP853": 4.0, "RK45": 2.0}


@dataclass(frozen=True)
class NoiseChannels:
    gamma1: float = 0.0
    gamma2: float = 0.0
    gamma3: float = 0.0
    gammaL: float = 0.0
    gammaR: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{f.name} must be a non-negative rate, got {v!r}")

    @classmethod
    def loss(cls, gamma_loss, **kw):
        return cls(gammaL=gamma_loss, gammaR=gamma_loss, **kw)

    @property
    def rotation(self):
        return (self.gamma1, self.gamma2, self.gamma3)

    @property
    def has_loss(self):
        return self.gammaL > 0 or self.gammaR > 0

    @property
    def max_rate(self):
        return max(self.gamma1, self.gamma2, self.gamma3, self.gammaL, self.gammaR)


class SectoredDensityMatrix:
    """Block-diagonal density matrix over sectors ``N' = 0..N_max``."""

    def __init__(self, blocks):
        blocks = np.asarray(blocks, dtype=complex)
        if blocks.ndim != 3 or blocks.shape[0] != blocks.shape[1] or blocks.shape[1] != blocks.shape[2]:
            raise ValueError("blocks must have shape (N_max+1, N_max+1, N_max+1)")
        self.blocks = blocks

    @property
    def N_max(self):
        return self.blocks.shape[0] - 1

    @classmethod
    def from_matrix(cls, rho, N_max=None):
        rho = np.asarray(rho, dtype=complex)
        if rho.ndim == 1:
            rho = np.outer(rho, rho.conj())
        N = rho.shape[0] - 1
        N_max = N if N_max is None else N_max
        if N_max < N:
            raise ValueError("N_max smaller than the state's atom number")
        blocks = np.zeros((N_max + 1,) * 3, dtype=complex)
        blocks[N, :N + 1, :N + 1] = rho
        return cls(blocks)

    def block(self, M):
        return self.blocks[M, :M + 1, :M + 1]

    @property
    def probabilities(self):
        return np.einsum("mkk->m", self.blocks).real

    @property
    def trace(self):
        return float(self.probabilities.sum())

    def hermiticity_error(self):
        return float(np.abs(self.blocks - self.blocks.conj().transpose(0, 2, 1)).max())

    def min_eigenvalue(self):
        h = 0.5 * (self.blocks + self.blocks.conj().transpose(0, 2, 1))
        return float(np.linalg.eigvalsh(h).min())

    def mean_atoms(self):
        return float(np.arange(self.N_max + 1) @ self.probabilities)


def _tri_left(d, up, lo, X):
    """T @ X for a batch of tridiagonal T (diag d, T[k,k+1]=up, T[k+1,k]=lo)."""
    out = d[:, :, None] * X
    out[:, :-1, :] += up[:, :, None] * X[:, 1:, :]
    out[:, 1:, :] += lo[:, :, None] * X[:, :-1, :]
    return out


def _tri_right(d, up, lo, X):
    """X @ T for a batch of tridiagonal T."""
    out = X * d[:, None, :]
    out[:, :, 1:] += X[:, :, :-1] * up[:, None, :]
    out[:, :, :-1] += X[:, :, 1:] * lo[:, None, :]
    return out


class Liouvillian:
    """Right-hand side of the master equation on padded sector blocks.

    Only the sectors ``M_lo..N_max`` are propagated; without loss that is the
    single initial sector.
    """

    def __init__(self, p: ModelParams, nc: NoiseChannels, N_max: int, M_lo: int | None = None,
                 compiled: bool = True):
        self.p = p
        self.nc = nc
        self.N_max = N_max
        D = N_max + 1
        if M_lo is None:
            M_lo = 0 if nc.has_loss else N_max
        self.M_lo = M_lo
        Ms = np.arange(M_lo, N_max + 1)
        B = len(Ms)
        self.shape = (B, D, D)

        hd = np.zeros((B, D))
        ho = np.zeros((B, D - 1))
        sp = np.zeros((B, D - 1))
        n = np.zeros((B, D))
        nL = np.zeros((B, D))
        nR = np.zeros((B, D))
        for i, M in enumerate(Ms):
            if M > 0:
                d, o = hamiltonian_tridiagonal(p.with_atoms(M))
                hd[i, :M + 1] = d
                ho[i, :M] = o
                sp[i, :M] = raising_elements(M)
            n[i, :M + 1] = SpinBasis(M).n
            nL[i, :M + 1] = M - np.arange(M + 1)
            nR[i, :M + 1] = np.arange(M + 1)
        self.hd, self.ho, self.sp, self.n = hd, ho, sp, n
        self.nL, self.nR = nL, nR

        # S3 double commutator and loss decay are elementwise
        g1, g2, g3 = nc.rotation
        self.elementwise = (-g3 * (n[:, :, None] - n[:, None, :]) ** 2
                            - 0.5 * nc.gammaL * (nL[:, :, None] + nL[:, None, :])
                            - 0.5 * nc.gammaR * (nR[:, :, None] + nR[:, None, :]))
        wL = np.sqrt(nL)
        wR = np.sqrt(nR)
        self.gainL = nc.gammaL * wL[:, :, None] * wL[:, None, :]
        self.gainR = nc.gammaR * wR[:, :, None] * wR[:, None, :]
        self._S1 = (np.zeros((B, D)), 0.5 * sp, 0.5 * sp)
        self._S2 = (np.zeros((B, D)), -0.5j * sp, 0.5j * sp)
        self.compiled = compiled and rhs_compiled is not None

    def spectral_radius(self):
        """Upper bound on |lambda| of the generator (largest sector dominates)."""
        M = self.N_max
        if M == 0:
            return self.nc.max_rate
        d, o = hamiltonian_tridiagonal(self.p.with_atoms(M))
        w = eigvalsh_tridiagonal(d, o)
        g1, g2, g3 = self.nc.rotation
        return float(w[-1] - w[0] + (g1 + g2 + g3) * M ** 2
                     + (self.nc.gammaL + self.nc.gammaR) * M)

    def __call__(self, rho):
        """Time derivative of the padded block stack ``rho`` (shape (B, D, D))."""
        if self.compiled:
            g1, g2, _ = self.nc.rotation
            out = np.zeros(self.shape, dtype=complex)
            return rhs_compiled(np.ascontiguousarray(rho, dtype=complex), self.M_lo,
                                self.hd, self.ho, self.sp, self.elementwise,
                                self.gainL, self.gainR, float(g1), float(g2), out)
        return self._numpy_rhs(rho)

    def _numpy_rhs(self, rho):
        hd, ho = self.hd, self.ho
        Hr = _tri_left(hd, ho, ho, rho)
        rH = _tri_right(hd, ho, ho, rho)
        out = -1j * (Hr - rH)
        out += self.elementwise * rho
        g1, g2, g3 = self.nc.rotation
        for gamma, S in ((g1, self._S1), (g2, self._S2)):
            if gamma == 0:
                continue
            Sr = _tri_left(*S, rho)
            rS = _tri_right(*S, rho)
            out -= gamma * (_tri_left(*S, Sr) + _tri_right(*S, rS) - 2 * _tri_right(*S, Sr))
        if self.nc.gammaL:
            out[:-1] += (self.gainL * rho)[1:]
        if self.nc.gammaR:
            g = (self.gainR * rho)[1:, 1:, 1:]
            out[:-1, :-1, :-1] += g
        return out

    def active(self, sdm: SectoredDensityMatrix):
        return sdm.blocks[self.M_lo:]

    def embed(self, active_blocks):
        D = self.N_max + 1
        blocks = np.zeros((D, D, D), dtype=complex)
        blocks[self.M_lo:] = active_blocks
        return SectoredDensityMatrix(blocks)


def apply_liouvillian(rho: SectoredDensityMatrix, p: ModelParams, nc: NoiseChannels):
    """dρ/dt for a sectored state (all sectors propagated)."""
    if not isinstance(rho, SectoredDensityMatrix):
        raise TypeError("expected a SectoredDensityMatrix")
    if p.N > rho.N_max:
        raise ValueError(f"model has N={p.N} atoms but state only holds sectors up to {rho.N_max}")
    L = Liouvillian(p, nc, rho.N_max, M_lo=0)
    return SectoredDensityMatrix(L(rho.blocks))


def moments(blocks, M_lo=0):
    """Spin moments summed over sectors of a padded block stack."""
    B, D, _ = blocks.shape
    Ms = np.arange(M_lo, M_lo + B)
    diag = np.einsum("mkk->mk", blocks).real
    upper = np.einsum("mkk->mk", blocks[:, :-1, 1:])   # rho[k, k+1]
    sp = np.zeros((B, D - 1))
    n = np.zeros((B, D))
    for i, M in enumerate(Ms):
        if M > 0:
            sp[i, :M] = raising_elements(M)
        n[i, :M + 1] = SpinBasis(M).n
    # tr(rho S+) = sum_k rho[k+1, k] sp[k] = conj(rho[k, k+1]) sp[k] for Hermitian rho
    splus = np.sum(np.conj(upper) * sp)
    s1 = splus.real
    s2 = splus.imag
    s3 = float(np.sum(diag * n))
    s3sq = float(np.sum(diag * n ** 2))
    p = diag.sum(axis=1)
    return s1, s2, s3, s3sq, float(Ms @ p), float(p.sum())


def instantaneous_rate(t, signal):
    """-d/dt log(signal) by centred differences (one-sided at the ends).

    Values after the first non-positive sample are NaN.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(signal, dtype=float)
    out = np.full_like(y, np.nan)
    bad = np.nonzero(~(y > 0))[0]
    stop = bad[0] if len(bad) else len(y)
    if stop >= 2:
        out[:stop] = -np.gradient(np.log(y[:stop]), t[:stop])
    return out


CSV_COLUMNS = ("t", "S1", "S2", "S3", "S3sq", "g1", "N_mean", "Gamma")


@dataclass
class EvolutionResult:
    t: np.ndarray
    S1: np.ndarray
    S2: np.ndarray
    S3: np.ndarray
    S3sq: np.ndarray
    g1: np.ndarray
    N_mean: np.ndarray
    Gamma: np.ndarray
    trace: np.ndarray = None
    hermiticity: np.ndarray = None
    min_eigenvalue: np.ndarray = None
    sector_probabilities: np.ndarray = None
    states: list = field(default=None, repr=False)
    extra: dict = field(default_factory=dict)

    def columns(self):
        cols = {name: getattr(self, name) for name in CSV_COLUMNS}
        cols.update(self.extra)
        return cols

    def to_csv(self, path_or_buffer=None):
        cols = self.columns()
        names = list(cols)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(names)
        for i in range(len(self.t)):
            w.writerow([format_float(cols[c][i]) for c in names])
        text = buf.getvalue()
        if path_or_buffer is None:
            return text
        if hasattr(path_or_buffer, "write"):
            path_or_buffer.write(text)
        else:
            with open(path_or_buffer, "w", newline="") as fh:
                fh.write(text)
        return text


def format_float(x):
    x = float(x)
    if np.isnan(x):
        return "nan"
    return repr(x)


def evolve(rho0, p: ModelParams, nc: NoiseChannels, t_grid, tol=1e-9,
           check_positivity=True, keep_states=False, method="DOP853"):
    """Integrate the master equation and sample observables on ``t_grid``.

    ``rho0`` may be a state vector, a fixed-N density matrix or a
    :class:`SectoredDensityMatrix`.  Integration uses an embedded explicit
    Runge-Kutta pair; ``tol`` bounds the local error of the whole state in
    the 2-norm.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or len(t_grid) < 1 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be strictly increasing")
    if not tol > 0:
        raise ValueError("tol must be positive")
    if not isinstance(rho0, SectoredDensityMatrix):
        rho0 = SectoredDensityMatrix.from_matrix(rho0)
    N_max = rho0.N_max
    if p.N != N_max:
        p = p.with_atoms(N_max)
    probs = rho0.probabilities
    occupied = np.nonzero(probs > 1e-15)[0]
    M_lo = 0 if nc.has_loss else int(occupied.min())
    L = Liouvillian(p, nc, N_max, M_lo=M_lo)
    shape = L.shape
    y0 = L.active(rho0).ravel().copy()

    def rhs(t, y):
        return L(y.reshape(shape)).ravel()

    nt = len(t_grid)
    res = {k: np.empty(nt) for k in ("S1", "S2", "S3", "S3sq", "g1", "N_mean", "trace", "herm", "mineig")}
    sector_p = np.zeros((nt, N_max + 1))
    states = [] if keep_states else None
    # integration error enters every matrix element, so the eigenvalue floor
    # scales with block dimension and elapsed time
    floor = 10 * tol * (N_max + 1)

    def record(i, y):
        blocks = y.reshape(shape)
        s1, s2, s3, s3sq, nmean, tr = moments(blocks, M_lo)
        res["S1"][i], res["S2"][i], res["S3"][i], res["S3sq"][i] = s1, s2, s3, s3sq
        res["N_mean"][i] = nmean / tr
        res["trace"][i] = tr
        try:
            res["g1"][i] = g1_from_moments(s1, s2, s3, nmean)
        except ValueError:      # a well is empty
            res["g1"][i] = np.nan
        res["herm"][i] = np.abs(blocks - blocks.conj().transpose(0, 2, 1)).max()
        sector_p[i, M_lo:] = np.einsum("mkk->m", blocks).real
        if check_positivity:
            h = 0.5 * (blocks + blocks.conj().transpose(0, 2, 1))
            res["mineig"][i] = np.linalg.eigvalsh(h).min()
            if res["mineig"][i] < -floor * max(1.0, t_grid[i] - t_grid[0]):
                raise NumericalError(
                    f"positivity violated at t={t_grid[i]:g}: min eigenvalue {res['mineig'][i]:.3e}")
        else:
            res["mineig"][i] = np.nan
        if keep_states:
            states.append(L.embed(blocks.copy()))

    record(0, y0)
    if nt > 1:
        solver_cls = METHODS[method]
        # scipy measures the error in an RMS norm; rescale so the bound holds
        # for the 2-norm of the full block stack
        etol = tol / np.sqrt(y0.size)
        # explicit pairs only control the error they can see; cap the step so
        # the fastest Hamiltonian phases stay inside the stability region
        radius = L.spectral_radius()
        max_step = STABILITY_LIMIT[method] / radius if radius > 0 else np.inf
        solver = solver_cls(rhs, t_grid[0], y0, t_grid[-1], rtol=etol, atol=etol,
                            max_step=max_step)
        i = 1
        while i < nt:
            msg = solver.step()
            if solver.status == "failed":
                raise NumericalError(f"integration failed (stiff configuration?): {msg}")
            if solver.t_old is None:
                continue
            interp = None
            while i < nt and t_grid[i] <= solver.t:
                if t_grid[i] == solver.t:
                    y = solver.y
                else:
                    interp = interp or solver.dense_output()
                    y = interp(t_grid[i])
                record(i, y)
                i += 1
            if solver.status == "finished" and i < nt:
                record(i, solver.y)
                i += 1

    return EvolutionResult(
        t=t_grid, S1=res["S1"], S2=res["S2"], S3=res["S3"], S3sq=res["S3sq"],
        g1=res["g1"], N_mean=res["N_mean"], Gamma=instantaneous_rate(t_grid, res["g1"]),
        trace=res["trace"], hermiticity=res["herm"], min_eigenvalue=res["mineig"],
        sector_probabilities=sector_p, states=states)


def smoothed_rate(t, rate, period):
    """Boxcar average of ``rate`` over a window of length ``period``."""
    t = np.asarray(t)
    dt = t[1] - t[0]
    w = max(1, int(round(period / dt)))
    kernel = np.ones(w) / w
    return np.convolve(rate, kernel, mode="same")


def window_average_rate(t, g1, t0, t1):
    """Mean of -d log g1/dt over [t0, t1], from the endpoint values."""
    t = np.asarray(t)
    a = np.interp(t0, t, np.log(g1))
    b = np.interp(t1, t, np.log(g1))
    return (a - b) / (t1 - t0)


def oscillation_frequency(t, y, omega_guess, rel_window=0.5):
    """Angular frequency of the dominant oscillation of ``y`` near ``omega_guess``.

    A linear trend is removed, then the least-squares periodogram is scanned
    around the guess and the peak is refined by a sinusoid fit.
    """
    from scipy.optimize import curve_fit
    from scipy.signal import lombscargle

    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = np.isfinite(y)
    t, y = t[ok], y[ok]
    y = y - np.polyval(np.polyfit(t, y, 1), t)
    omegas = np.linspace(omega_guess * (1 - rel_window), omega_guess * (1 + rel_window), 4001)
    power = lombscargle(t, y, omegas)
    w0 = omegas[np.argmax(power)]

    def model(tt, A, B, w, c0, c1):
        return A * np.cos(w * tt) + B * np.sin(w * tt) + c0 + c1 * tt

    amp = np.std(y) * np.sqrt(2)
    popt, _ = curve_fit(model, t, y, p0=(amp, 0.0, w0, 0.0, 0.0), maxfev=20000)
    return abs(popt[2])
