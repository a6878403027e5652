"""Closed-form long-time energy spectrum of the closure model under Pao's
transfer theory.

Two branches: the kernel exponent exactly one third corrects the Kolmogorov
-5/3 power law by beta1; every other exponent keeps -5/3 and instead gains
an extra exponential damping factor in the dissipation range.  Branch
selection is an explicit caller decision (alpha_is_third), never a float
equality test.

The spectrum is evaluated in the grouped form

    E(k) = U^2/2 * k^p * exp(beta2 (1 - k^(4/3))) * exp(beta4 (1 - k^(2a-2/3)))

which is algebraically identical to the solved formula (the leading
e^{beta3} constant cancels against the exponentials at k = 1) and makes
E(1) = U^2/2 exact in floating point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_KOLMOGOROV_CONSTANT = 1.6


@dataclass(frozen=True)
class SpectrumParams:
    alpha: float
    gamma: float
    nu: float
    U: float
    c_k: float
    alpha_is_third: bool
    eps0: float
    beta1: float | None  # only on the alpha = 1/3 branch
    beta2: float
    beta3: float | None  # only off the 1/3 branch; equals beta2 + beta4
    beta4: float | None


def make_params(
    alpha: float,
    gamma: float,
    nu: float,
    U: float,
    c_k: float = DEFAULT_KOLMOGOROV_CONSTANT,
    alpha_is_third: bool = False,
) -> SpectrumParams:
    """Derive eps0 and the beta coefficients from the model parameters.

    eps0 = 2^(-3/2) U^3 / c_k;  beta1 = 2 c_k gamma / (3 eps0^(1/3));
    beta2 = 3 c_k nu / (2 eps0^(1/3));
    beta4 = 2 alpha c_k gamma / ((2 alpha - 2/3) eps0^(1/3));  beta3 = beta2 + beta4.
    """
    if alpha_is_third:
        alpha = 1.0 / 3.0
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if gamma < 0.0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    if nu <= 0.0 or U <= 0.0 or c_k <= 0.0:
        raise ValueError("nu, U, and c_k must be positive")
    eps0 = 2.0**-1.5 * U**3 / c_k
    e13 = eps0 ** (1.0 / 3.0)
    beta2 = 3.0 * c_k * nu / (2.0 * e13)
    if alpha_is_third:
        beta1 = 2.0 * c_k * gamma / (3.0 * e13)
        beta3 = beta4 = None
    else:
        beta1 = None
        beta4 = 2.0 * alpha * c_k * gamma / ((2.0 * alpha - 2.0 / 3.0) * e13)
        beta3 = beta2 + beta4
    return SpectrumParams(alpha, gamma, nu, U, c_k, alpha_is_third, eps0, beta1, beta2, beta3, beta4)


def energy_spectrum(k, params: SpectrumParams):
    """E(k) for wavenumbers k >= 1; scalar in, scalar out."""
    k_arr = np.asarray(k, dtype=float)
    if np.any(k_arr < 1.0):
        raise ValueError("the spectrum is defined for k >= 1 (E(1) = U^2/2 boundary)")
    half_u2 = 0.5 * params.U**2
    visc = np.exp(params.beta2 * (1.0 - k_arr ** (4.0 / 3.0)))
    if params.alpha_is_third:
        e = half_u2 * k_arr ** (-(5.0 / 3.0 + params.beta1)) * visc
    else:
        closure = np.exp(params.beta4 * (1.0 - k_arr ** (2.0 * params.alpha - 2.0 / 3.0)))
        e = half_u2 * k_arr ** (-5.0 / 3.0) * visc * closure
    return float(e) if np.ndim(k) == 0 else e


def inertial_slope(params: SpectrumParams) -> float:
    """Power-law exponent in the inertial range: -(5/3 + beta1) on the 1/3
    branch, the plain Kolmogorov -5/3 otherwise."""
    if params.alpha_is_third:
        return -(5.0 / 3.0 + params.beta1)
    return -5.0 / 3.0


def fit_loglog_slope(k, e) -> float:
    """Ordinary least-squares slope of log E against log k."""
    k = np.asarray(k, dtype=float)
    e = np.asarray(e, dtype=float)
    if k.size < 2:
        raise ValueError("need at least two samples to fit a slope")
    if np.any(np.diff(k) <= 0.0):
        raise ValueError("wavenumbers must be strictly increasing")
    if np.any(e <= 0.0):
        raise ValueError("spectrum samples must be positive")
    return float(np.polyfit(np.log(k), np.log(e), 1)[0])
