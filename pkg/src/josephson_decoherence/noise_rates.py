"""Magnetic-noise rates for the master equation and lifetime-vs-distance fits.

SI units throughout; rates are in 1/s.  ``rate_in_units_of_J`` converts to
the dimensionless rates used by the dynamics modules.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.constants as sc

MU_B = sc.physical_constants["Bohr magneton"][0]
MU_F_RB87 = MU_B / 2          # g_F mu_B for F = 2
NOISE_KINDS = ("johnson_exp_corr", "technical_slope", "flat_spectrum")


@dataclass(frozen=True)
class NoiseModel:
    kind: str
    B_pp: float = 0.0              # T^2/Hz, longitudinal spectrum at the trap
    lambda_c: float = 1e-6         # m
    eta: float = 0.0               # (J/m)^2 s, white slope-force noise
    B_mp: float = 0.0              # T^2/Hz, transverse spectrum at omega_Z
    mu_F: float = MU_F_RB87        # J/T
    F: int = 2

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"kind must be one of {NOISE_KINDS}")
        if min(self.B_pp, self.eta, self.B_mp) < 0:
            raise ValueError("noise strengths must be non-negative")
        if not self.lambda_c > 0:
            raise ValueError("lambda_c must be positive")
        if not (self.mu_F > 0 and self.F > 0):
            raise ValueError("mu_F and F must be positive")

    @property
    def gamma_N(self):
        """Longitudinal-noise rate ``(mu_F F / hbar)^2 B_pp``."""
        return (self.mu_F * self.F / sc.hbar) ** 2 * self.B_pp


def exp_kernel_overlaps(x, rho_L, rho_R, lambda_c, cutoff=1e-16):
    """``alpha_ij = int int exp(-|x-x'|/lambda_c) rho_i(x) rho_j(x') dx dx'`` on a uniform grid.

    The kernel is only formed between the supports of the densities (points
    above ``cutoff`` times the peak), so narrow modes on fine grids stay cheap.
    """
    x = np.asarray(x, dtype=float)
    dx = x[1] - x[0]
    w = [np.asarray(r, dtype=float) * dx for r in (rho_L, rho_R)]
    idx = [np.flatnonzero(np.abs(wi) > cutoff * np.abs(wi).max()) for wi in w]

    def pair(i, j):
        K = np.exp(-np.abs(x[idx[i], None] - x[None, idx[j]]) / lambda_c)
        return float(w[i][idx[i]] @ K @ w[j][idx[j]])

    return pair(0, 0), pair(1, 1), pair(0, 1)


def dephasing_rate(model: NoiseModel, x=None, rho_L=None, rho_R=None, d=None):
    """Phase-noise rate ``gamma_p`` (1/s) for the S3 dissipator.

    ``johnson_exp_corr``: ``(gamma_N/2)(alpha_LL + alpha_RR - 2 alpha_LR)``
    with the exponential correlation kernel on the 1D mode densities.
    ``technical_slope``: ``(d/hbar)^2 eta / 2``.
    ``flat_spectrum``: spatially uniform noise, no dephasing.
    """
    if model.kind == "technical_slope":
        if d is None:
            raise ValueError("technical_slope needs the well separation d")
        return 0.5 * (d / sc.hbar) ** 2 * model.eta
    if model.kind == "flat_spectrum":
        return 0.0
    if x is None or rho_L is None or rho_R is None:
        raise ValueError("johnson_exp_corr needs mode densities")
    dx = x[1] - x[0]
    for rho in (rho_L, rho_R):
        if abs(np.sum(rho) * dx - 1) > 1e-6:
            raise ValueError("mode densities must be normalised")
    if d is not None and model.lambda_c >= d:
        warnings.warn("correlation length exceeds the well separation: dephasing is suppressed")
    aLL, aRR, aLR = exp_kernel_overlaps(x, rho_L, rho_R, model.lambda_c)
    return max(0.0, 0.5 * model.gamma_N * (aLL + aRR - 2 * aLR))


def loss_rate(model: NoiseModel):
    """Per-atom loss rate ``(mu_F^2 F / hbar^2) B_-+`` (1/s), equal in both wells."""
    return model.mu_F ** 2 * model.F / sc.hbar ** 2 * model.B_mp


def rate_in_units_of_J(rate, J_hz):
    """Convert a rate in 1/s to units of the tunnelling energy ``J`` (given as E/h in Hz)."""
    return rate / (2 * np.pi * J_hz)


def trap_mode_densities(spec, grid=None):
    """1D densities ``|phi_L|^2, |phi_R|^2`` (per m) of the localised trap modes."""
    from .trap import excited_modes, solve_gp_ground

    ground = solve_gp_ground(spec, grid)
    modes = excited_modes(spec, ground, count=2)
    x, f0 = modes.full(0)
    _, f1 = modes.full(1)
    scale = 1 / spec.a_x  # scaled densities -> per metre
    rho_L = 0.5 * (f0 - f1) ** 2 * scale
    rho_R = 0.5 * (f0 + f1) ** 2 * scale
    return x, rho_L, rho_R


# ---------------------------------------------------------------- lifetimes

CASCADE_FACTOR = 2.0


@dataclass(frozen=True)
class SurfaceLayer:
    """Conducting layer: thickness ``h``, skin depth ``delta`` at (``T``, ``omega``)."""

    h: float = 0.5e-6           # m
    delta: float = 130e-6       # m
    T: float = 400.0            # K
    omega: float = 2 * np.pi * 500e3  # rad/s, Larmor frequency
    mu_F: float = MU_F_RB87
    F: int = 2

    @property
    def resistivity_slope(self):
        """``rho(T) = slope * T`` implied by the skin depth."""
        return self.delta ** 2 * sc.mu_0 * self.omega / (2 * self.T)

    def at(self, T=None, omega=None):
        """Same material at another temperature / frequency (skin depth recomputed)."""
        T = self.T if T is None else T
        omega = self.omega if omega is None else omega
        delta = np.sqrt(2 * self.resistivity_slope * T / (sc.mu_0 * omega))
        return SurfaceLayer(h=self.h, delta=delta, T=T, omega=omega, mu_F=self.mu_F, F=self.F)

    @property
    def n_th(self):
        return sc.k * self.T / (sc.hbar * self.omega)


def free_space_rate_factor(layer: SurfaceLayer):
    """``(c/omega)^3 / tau_0`` for a magnetic-dipole flip with moment ``mu_F sqrt(F)``."""
    mu_t2 = layer.mu_F ** 2 * layer.F
    return sc.mu_0 * mu_t2 / (3 * np.pi * sc.hbar)


def johnson_c1(layer: SurfaceLayer, cascade=False):
    """Johnson coefficient ``c1`` (m^2/s) in ``1/tau = c1/z0^2``."""
    c1 = (3 / 8) ** 2 * (layer.n_th + 1) * free_space_rate_factor(layer) * 2 * layer.h / layer.delta ** 2
    return c1 / CASCADE_FACTOR if cascade else c1


def johnson_lifetime(z0, layer: SurfaceLayer, thin_layer=False, cascade=False):
    """Johnson spin-flip lifetime; ``thin_layer`` adds the ``(1 + h/z0)`` finite-thickness factor."""
    z0 = np.asarray(z0, dtype=float)
    tau = z0 ** 2 / johnson_c1(layer, cascade)
    return tau * (1 + layer.h / z0) if thin_layer else tau


def technical_c2(current_noise, mu_F=MU_F_RB87):
    """``c2 = (mu_0 mu_F I / 2 pi hbar)^2`` (m^2/s) for current noise ``I`` in A/sqrt(Hz)."""
    return (sc.mu_0 * mu_F / (2 * np.pi * sc.hbar)) ** 2 * current_noise ** 2


def current_from_c2(c2, mu_F=MU_F_RB87):
    return np.sqrt(c2) * 2 * np.pi * sc.hbar / (sc.mu_0 * mu_F)


def combined_lifetime(z0, c1, c2):
    return np.asarray(z0, dtype=float) ** 2 / (c1 + c2)


@dataclass
class LifetimeDataset:
    z0: np.ndarray              # m
    tau: np.ndarray             # s
    sigma: np.ndarray           # s
    layer: SurfaceLayer = SurfaceLayer()

    def __post_init__(self):
        self.z0 = np.asarray(self.z0, dtype=float)
        self.tau = np.asarray(self.tau, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        if not (self.z0.shape == self.tau.shape == self.sigma.shape):
            raise ValueError("z0, tau and sigma must have the same length")
        if np.any(self.z0 <= 0) or np.any(self.tau <= 0) or np.any(self.sigma <= 0):
            raise ValueError("z0, tau and sigma must be positive")


@dataclass(frozen=True)
class LifetimeFit:
    c_total: float          # m^2/s
    c_total_err: float
    c1_model: float
    c2: float
    I_current: float        # A/sqrt(Hz); upper bound when johnson_dominated
    slope_free_fit: float
    johnson_dominated: bool

    def report(self):
        um2 = 1e12
        return {"c_total": self.c_total * um2, "c_total_err": self.c_total_err * um2,
                "c1": self.c1_model * um2, "c2": self.c2 * um2,
                "I_nA_sqrtHz": self.I_current * 1e9, "slope_free_fit": self.slope_free_fit,
                "johnson_dominated": self.johnson_dominated}


def fit_lifetimes(data: LifetimeDataset) -> LifetimeFit:
    """Fit ``tau = z0^2/c_total`` in log space and split off the Johnson part."""
    if len(data.z0) < 3:
        raise ValueError("need at least three data points")
    if np.any(data.z0 < 2 * data.layer.h):
        warnings.warn("points with z0 < 2h lie outside the power-law regime")
    lz = np.log(data.z0)
    lt = np.log(data.tau)
    w = (data.tau / data.sigma) ** 2           # 1/var of log tau
    # slope fixed to 2: log c = <2 log z0 - log tau>_w
    r = 2 * lz - lt
    log_c = np.sum(w * r) / np.sum(w)
    c_total = float(np.exp(log_c))
    dof = max(len(r) - 1, 1)
    chi2 = np.sum(w * (r - log_c) ** 2) / dof
    c_err = c_total * np.sqrt(max(chi2, 1.0) / np.sum(w))
    slope, _ = np.polyfit(lz, lt, 1, w=np.sqrt(w))
    c1 = johnson_c1(data.layer)
    c2 = c_total - c1
    dominated = c2 <= 0
    if dominated:
        current = current_from_c2(max(c_total + 2 * c_err - c1, 0.0), data.layer.mu_F)
        c2 = 0.0
    else:
        current = current_from_c2(c2, data.layer.mu_F)
    return LifetimeFit(c_total=c_total, c_total_err=float(c_err), c1_model=float(c1),
                       c2=float(c2), I_current=float(current), slope_free_fit=float(slope),
                       johnson_dominated=bool(dominated))


def synthetic_lifetimes(z0, c_total, rel_noise=0.0, seed=0, c1=None, layer=None):
    """Lifetimes from ``tau = z0^2/c_total`` with optional log-normal scatter.

    With ``c1`` and ``layer`` given, the Johnson part carries the thin-layer
    correction while the rest follows the pure power law.
    """
    z0 = np.asarray(z0, dtype=float)
    if c1 is None:
        rate = c_total / z0 ** 2
    else:
        rate = c1 / (z0 ** 2 * (1 + layer.h / z0)) + (c_total - c1) / z0 ** 2
    tau = 1 / rate
    if rel_noise > 0:
        tau = tau * np.exp(rel_noise * np.random.default_rng(seed).standard_normal(len(z0)))
    sigma = np.maximum(rel_noise, 1e-3) * tau
    return LifetimeDataset(z0=z0, tau=tau, sigma=sigma, layer=layer or SurfaceLayer())
