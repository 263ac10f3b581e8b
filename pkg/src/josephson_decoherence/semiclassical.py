"""Truncated-Wigner ensemble on the Bloch sphere.

Points are carried internally as unit vectors ``(x, y, z) = (sin t cos p,
sin t sin p, cos t)`` so that both the Hamiltonian flow and the noise kicks
are exact rotations and every point stays on the sphere.  The spin vector of
a point is ``(N/2) * (x, y, z)``.
"""
from __future__ import annotations

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core_model import ModelParams, characteristic_params

BLOCK = 1024  # trajectories per RNG stream; fixed so results ignore thread count
POLE_TOL = 1e-9


@dataclass(frozen=True)
class PhasePoint:
    theta: float
    phi: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= np.pi:
            raise ValueError("theta must lie in [0, pi]")

    def to_vector(self):
        return angles_to_vectors(np.array([self.theta]), np.array([self.phi]))[0]

    @classmethod
    def from_vector(cls, v):
        th, ph = vectors_to_angles(np.asarray(v)[None, :])
        return cls(float(th[0]), float(ph[0]))


@dataclass
class PhaseEnsemble:
    vectors: np.ndarray         # (M, 3) unit vectors
    N: int
    seed: int
    weights: np.ndarray | None = None

    @property
    def M(self):
        return len(self.vectors)

    @property
    def theta(self):
        return vectors_to_angles(self.vectors)[0]

    @property
    def phi(self):
        return vectors_to_angles(self.vectors)[1]

    @property
    def points(self):
        th, ph = vectors_to_angles(self.vectors)
        return [PhasePoint(float(a), float(b)) for a, b in zip(th, ph)]

    @property
    def pole_flags(self):
        return np.abs(self.vectors[:, 2]) > 1 - POLE_TOL


def angles_to_vectors(theta, phi):
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def vectors_to_angles(v):
    z = np.clip(v[..., 2], -1.0, 1.0)
    return np.arccos(z), np.arctan2(v[..., 1], v[..., 0])


def _rng_streams(seed, n_blocks):
    ss = np.random.SeedSequence(seed)
    return [np.random.Generator(np.random.Philox(s)) for s in ss.spawn(n_blocks)]


def _block_sizes(M):
    sizes = [BLOCK] * (M // BLOCK)
    if M % BLOCK:
        sizes.append(M % BLOCK)
    return sizes


def sample_ground_wigner(p: ModelParams, M: int, seed: int = 0) -> PhaseEnsemble:
    """Gaussian Wigner sample of the (squeezed) ground state about the S1 axis.

    Phase variance ``xi^2/N``; variance of ``cos(theta)`` is ``1/(N xi^2)`` so
    that the number difference has variance ``N/(4 xi^2)``.
    """
    if M < 1:
        raise ValueError("need at least one trajectory")
    if p.u >= p.N ** 2:
        raise ValueError("Fock regime: ground state has no Gaussian phase-space representation")
    if p.epsilon != 0:
        warnings.warn("sampling assumes a symmetric double well; epsilon is ignored")
    xi = characteristic_params(p).xi
    sd_phi = xi / np.sqrt(p.N)
    sd_z = 1 / (xi * np.sqrt(p.N))
    out = []
    for rng, m in zip(_rng_streams(seed, len(_block_sizes(M))), _block_sizes(M)):
        phi = rng.normal(0.0, sd_phi, m)
        z = np.clip(rng.normal(0.0, sd_z, m), -1.0, 1.0)
        out.append(angles_to_vectors(np.arccos(z), phi))
    return PhaseEnsemble(vectors=np.concatenate(out), N=p.N, seed=seed)


def _rotate(v, axis, angle):
    """Right-handed rotation of the rows of ``v`` about coordinate ``axis`` (0, 1, 2)."""
    c = np.cos(angle)
    s = np.sin(angle)
    i, j = [(1, 2), (2, 0), (0, 1)][axis]
    out = v.copy()
    out[:, i] = c * v[:, i] - s * v[:, j]
    out[:, j] = s * v[:, i] + c * v[:, j]
    return out


def _strang(v, p: ModelParams, dt):
    # H_A = eps*S3 + U*S3^2 rotates about z by (eps + U N z) dt;
    # H_B = -J*S1 rotates about x by -J dt.
    v = _rotate(v, 2, 0.5 * dt * (p.epsilon + p.U * p.N * v[:, 2]))
    v = _rotate(v, 0, -p.J * dt)
    v = _rotate(v, 2, 0.5 * dt * (p.epsilon + p.U * p.N * v[:, 2]))
    return v


_Y1 = 1 / (2 - 2 ** (1 / 3))
_Y0 = 1 - 2 * _Y1


def flow_vectors(v, p: ModelParams, dt):
    """Fourth-order symplectic (triple-jump) step of the top Hamiltonian."""
    v = _strang(v, p, _Y1 * dt)
    v = _strang(v, p, _Y0 * dt)
    v = _strang(v, p, _Y1 * dt)
    return v


def classical_energy(v, p: ModelParams):
    """Top Hamiltonian ``(NJ/2)[eps~ cos t - sin t cos p + (u/2) cos^2 t]``."""
    v = np.atleast_2d(v)
    return 0.5 * p.N * p.J * (p.eps_tilde * v[:, 2] - v[:, 0] + 0.5 * p.u * v[:, 2] ** 2)


def classical_flow(point: PhasePoint, p: ModelParams, dt: float):
    """Advance one phase point by ``dt``; returns ``(point, pole_flag)``."""
    omega_J = characteristic_params(p).omega_J
    if dt > 0.05 / omega_J * (1 + 1e-12):
        raise ValueError(f"dt={dt} exceeds 0.05/omega_J={0.05 / omega_J:g}")
    v = flow_vectors(point.to_vector()[None, :], p, dt)
    flag = bool(abs(v[0, 2]) > 1 - POLE_TOL)
    return PhasePoint.from_vector(v[0]), flag


def kick_vectors(v, axis, gamma, dt, rng):
    """Random rotation about spin axis ``axis`` (1, 2 or 3), angle ~ N(0, 2 gamma dt)."""
    if gamma == 0:
        return v
    delta = rng.normal(0.0, np.sqrt(2 * gamma * dt), len(v))
    return _rotate(v, axis - 1, delta)


def stochastic_kick(point: PhasePoint, axis: int, gamma: float, dt: float, rng):
    if axis not in (1, 2, 3):
        raise ValueError("axis must be 1, 2 or 3")
    v = kick_vectors(point.to_vector()[None, :], axis, gamma, dt, rng)
    return PhasePoint.from_vector(v[0])


@dataclass
class CoherenceEstimate:
    direct: float
    gaussian: float
    var_a: float
    var_b: float
    var_phi: float
    var_n: float
    stderr: float
    n_pole: int = 0


def ensemble_coherence(ens, N=None, warn_tol=0.05):
    """Direct and Gaussian-formula estimates of S/s.

    The direct estimator is the Bloch-vector length of the ensemble mean,
    rescaled by ``sqrt(1 + 2/N)`` (the Wigner spin length ``sqrt(s(s+1))``).
    The Gaussian estimator is ``exp[-(D_a^2 + D_b^2 - 2/N)/2]`` with the
    principal variances of the tangent coordinates ``(phi, cos theta)``.
    """
    if isinstance(ens, PhaseEnsemble):
        v, N = ens.vectors, ens.N
    else:
        v = np.asarray(ens)
    M = len(v)
    scale = np.sqrt(1 + 2 / N)
    mean = v.mean(axis=0)
    length = np.linalg.norm(mean)
    direct = scale * length
    # spread of the projection on the mean direction
    proj = v @ (mean / length) if length > 0 else v[:, 0]
    stderr = scale * proj.std(ddof=1) / np.sqrt(M) if M > 1 else np.nan

    keep = np.abs(v[:, 2]) <= 1 - POLE_TOL
    w = v[keep]
    phi0 = np.arctan2(mean[1], mean[0])
    dphi = np.angle(np.exp(1j * (np.arctan2(w[:, 1], w[:, 0]) - phi0)))
    z = w[:, 2]
    if len(w) >= 2:
        cov = np.cov(np.vstack([dphi, z]))
        var_b, var_a = np.linalg.eigvalsh(cov)
        gaussian = np.exp(-0.5 * (var_a + var_b - 2 / N))
        var_phi, var_z = cov[0, 0], cov[1, 1]
    else:
        var_a = var_b = var_phi = var_z = gaussian = np.nan
    if M >= 100 and np.isfinite(gaussian) and abs(gaussian - direct) > warn_tol * direct:
        warnings.warn(f"direct ({direct:.4f}) and Gaussian ({gaussian:.4f}) coherence "
                      "estimates disagree: distribution is not Gaussian")
    return CoherenceEstimate(direct=float(direct), gaussian=float(gaussian),
                             var_a=float(var_a), var_b=float(var_b),
                             var_phi=float(var_phi), var_n=float(var_z * N ** 2 / 4),
                             stderr=float(stderr), n_pole=int((~keep).sum()))


def default_dt(p: ModelParams, gammas):
    omega_J = characteristic_params(p).omega_J
    g = max(gammas) if len(gammas) else 0.0
    return min(0.02 / omega_J, 0.1 / g) if g > 0 else 0.02 / omega_J


@dataclass
class SemiclassicalResult:
    t: np.ndarray
    S_over_s_direct: np.ndarray
    S_over_s_gaussian: np.ndarray
    var_phi: np.ndarray
    var_n: np.ndarray
    stderr: np.ndarray
    n_pole: np.ndarray

    COLUMNS = ("t", "S_over_s_direct", "S_over_s_gaussian", "var_phi", "var_n", "stderr")

    def to_csv(self, path=None):
        from .lindblad import format_float

        lines = [",".join(self.COLUMNS)]
        for i in range(len(self.t)):
            lines.append(",".join(format_float(getattr(self, c)[i]) for c in self.COLUMNS))
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def simulate(p: ModelParams, gammas, t_grid, M=10_000, seed=0, dt=None, threads=1,
             ensemble=None):
    """Propagate a ground-state Wigner ensemble under flow plus rotation noise.

    ``gammas`` are the diffusion rates about axes 1, 2, 3.  ``t_grid`` must
    start at 0; each output interval is split into an integer number of
    steps no longer than ``dt``.
    """
    gammas = tuple(float(g) for g in gammas)
    if len(gammas) != 3 or min(gammas) < 0:
        raise ValueError("gammas must be three non-negative rates")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid[0] != 0 or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must start at 0 and increase")
    dt = default_dt(p, gammas) if dt is None else dt
    intervals = np.diff(t_grid)
    steps = np.maximum(1, np.ceil(intervals / dt - 1e-9).astype(int))
    if len(set(np.round(intervals / steps, 14))) > 1:
        warnings.warn("non-uniform output grid: step size varies between intervals")
    if ensemble is None:
        ensemble = sample_ground_wigner(p, M, seed)
    sizes = _block_sizes(ensemble.M)
    starts = np.cumsum([0] + sizes[:-1])
    # kick streams are independent of the sampling streams
    rngs = _rng_streams([seed, 1], len(sizes))
    blocks = [ensemble.vectors[s:s + m] for s, m in zip(starts, sizes)]

    def run(k):
        v = blocks[k]
        snaps = [v]
        for interval, n_steps in zip(intervals, steps):
            h = interval / n_steps
            for _ in range(n_steps):
                v = flow_vectors(v, p, h)
                for axis, g in enumerate(gammas, start=1):
                    v = kick_vectors(v, axis, g, h, rngs[k])
            snaps.append(v)
        return snaps

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            per_block = list(pool.map(run, range(len(blocks))))
    else:
        per_block = [run(k) for k in range(len(blocks))]

    nt = len(t_grid)
    cols = {c: np.empty(nt) for c in ("d", "g", "vp", "vn", "se", "np")}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for i in range(nt):
            v = np.concatenate([snaps[i] for snaps in per_block])
            est = ensemble_coherence(v, p.N)
            cols["d"][i], cols["g"][i] = est.direct, est.gaussian
            cols["vp"][i], cols["vn"][i] = est.var_phi, est.var_n
            cols["se"][i], cols["np"][i] = est.stderr, est.n_pole
    return SemiclassicalResult(t=t_grid, S_over_s_direct=cols["d"], S_over_s_gaussian=cols["g"],
                               var_phi=cols["vp"], var_n=cols["vn"], stderr=cols["se"],
                               n_pole=cols["np"])
