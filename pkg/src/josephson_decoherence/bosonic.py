"""Linearised (Bogoliubov) predictions for coherence decay.

The Josephson excitation ``b`` has frequency ``omega_J``; rotation noise
about axis 2 (number) or 3 (phase) pumps it diffusively.  Decay rates
are normalised so that ``Gamma(t) = -d/dt log <S1>`` equals the bare rate at
``t = 0`` and at ``xi = 1``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class RatePrediction:
    gamma_in: float
    xi: float
    omega_J: float
    rate: Callable[[np.ndarray], np.ndarray]
    avg: float
    min: float
    max: float

    def __call__(self, t):
        return self.rate(np.asarray(t, dtype=float))

    @property
    def period(self):
        return np.pi / self.omega_J


def _envelope(gamma, a, b, omega_J, xi, scale=1.0):
    """``scale * gamma * [a cos^2(w t) + b sin^2(w t)]``."""
    def rate(t):
        c = np.cos(omega_J * np.asarray(t, dtype=float)) ** 2
        return scale * gamma * (a * c + b * (1 - c))

    lo, hi = sorted((a, b))
    return RatePrediction(gamma_in=gamma, xi=xi, omega_J=omega_J, rate=rate,
                          avg=scale * gamma * (a + b) / 2,
                          min=scale * gamma * lo, max=scale * gamma * hi)


def _check(gamma, xi, omega_J):
    if gamma < 0:
        raise ValueError("rate must be non-negative")
    if not xi > 0:
        raise ValueError("xi must be positive")
    if not omega_J > 0:
        raise ValueError("omega_J must be positive")


def phase_noise_rate(gamma3, xi, omega_J):
    """Decay rate under S3 rotation noise: ``gamma3 [cos^2 + xi^-4 sin^2]``."""
    _check(gamma3, xi, omega_J)
    return _envelope(gamma3, 1.0, xi ** -4, omega_J, xi)


def number_noise_rate(gamma2, xi, omega_J):
    """Decay rate under S2 rotation noise: ``gamma2 [cos^2 + xi^4 sin^2]``."""
    _check(gamma2, xi, omega_J)
    return _envelope(gamma2, 1.0, xi ** 4, omega_J, xi)


def diffusion_constants(gamma2, gamma3, xi, N):
    """Quadrature diffusion of the Josephson mode from number and phase noise."""
    return gamma2 * N * xi ** 2 / 2, gamma3 * N / (2 * xi ** 2)


def s1_from_moments(bdb, b2, xi, N):
    """Second-order expansion of <S1> in the Josephson-mode moments."""
    k_plus = xi ** 2 + xi ** -2
    k_minus = xi ** 2 - xi ** -2
    return N / 2 - 0.25 * (k_minus * 2 * np.real(b2) + k_plus * (2 * bdb + 1) - 2)


def bosonic_moments(t, gamma2, xi, omega_J, N, bdb0=0.0, b20=0.0, gamma3=0.0):
    """Closed-form ``(<b^+b>_t, <b^2>_t, <S1>_t)`` under number (and phase) noise.

    Solves ``d<b^+b>/dt = D2 + D3`` and
    ``d<b^2>/dt = -2i omega_J <b^2> - D2 + D3``.
    """
    t = np.asarray(t, dtype=float)
    D2, D3 = diffusion_constants(gamma2, gamma3, xi, N)
    rot = np.exp(-2j * omega_J * t)
    bdb = bdb0 + (D2 + D3) * t
    b2 = b20 * rot + (D3 - D2) * (1 - rot) / (2j * omega_J)
    if np.any(bdb > N / 10):
        warnings.warn("<b^+b> exceeds N/10: linearisation no longer reliable")
    return bdb, b2, s1_from_moments(bdb, b2, xi, N)


def loss_decoherence_estimate(gamma_loss, xi, N, omega_J, c=0.5, s=0.5):
    """Loss-induced decoherence ``gamma(1 - xi^-2)/(2N) [c(t) + s(t) xi^4]``.

    The returned callable uses ``c = cos^2(w t)`` and ``s = sin^2(w t)``;
    ``avg`` uses the constant weights ``c`` and ``s`` given here.
    """
    _check(gamma_loss, xi, omega_J)
    if N < 1:
        raise ValueError("N must be positive")
    scale = (1 - xi ** -2) / (2 * N)
    pred = _envelope(gamma_loss, 1.0, xi ** 4, omega_J, xi, scale=scale)
    return RatePrediction(gamma_in=gamma_loss, xi=xi, omega_J=omega_J, rate=pred.rate,
                          avg=gamma_loss * scale * (c + s * xi ** 4),
                          min=pred.min, max=pred.max)


def loss_kick(xi):
    """Imbalance shift of the squeezed state per lost atom, in units of 1/2."""
    return 1 - xi ** -2


def loss_enhanced(xi, N):
    """True when loss decoheres faster than atoms are lost (xi^4 / 2N > 1)."""
    return xi ** 4 / (2 * N) > 1


def fit_loss_weights(t, rate, gamma_loss, xi, N, omega_J):
    """Least-squares constants ``(c, s)`` in ``scale [c cos^2 + s xi^4 sin^2]``."""
    t = np.asarray(t, dtype=float)
    rate = np.asarray(rate, dtype=float)
    ok = np.isfinite(rate)
    scale = gamma_loss * (1 - xi ** -2) / (2 * N)
    cos2 = np.cos(omega_J * t[ok]) ** 2
    A = scale * np.column_stack([cos2, xi ** 4 * (1 - cos2)])
    (c, s), *_ = np.linalg.lstsq(A, rate[ok], rcond=None)
    return float(c), float(s)
