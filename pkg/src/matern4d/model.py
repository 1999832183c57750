"""Matern covariance and spectral density in four dimensions.

The dimension is fixed at d = 4, so the spectral exponent is p = nu + 2.
Two spectral modes are provided: ``unit_constant`` drops the
normalising constant (this is what the score pipeline uses, and the score
is invariant to any common constant), while ``normalized`` fixes the
constant so that (2 pi)^-4 * integral(f) = sigma^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DIM = 4

SPECTRAL_MODES = ("unit_constant", "normalized")

# Half-integer smoothness values with closed-form covariance.
_SUPPORTED_NU = (0.5, 1.5, 2.5)


class UnsupportedSmoothnessError(ValueError):
    """Raised when a closed-form covariance is requested for general nu."""


@dataclass(frozen=True)
class MaternParams:
    """Matern parameters with the derived microergodic scale m and exponent p.

    Parameters
    ----------
    sigma : float
        Field standard deviation.
    alpha : float
        Range parameter (inverse length).
    nu : float
        Smoothness.
    """

    sigma: float
    alpha: float
    nu: float
    m: float = field(init=False)
    p: float = field(init=False)

    def __post_init__(self):
        for name in ("sigma", "alpha", "nu"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")
        m = self.sigma**2 * self.alpha ** (2 * self.nu)
        if not (np.isfinite(m) and m > 0):
            raise ValueError(f"microergodic scale is not positive and finite: {m!r}")
        object.__setattr__(self, "m", float(m))
        object.__setattr__(self, "p", float(self.nu + DIM / 2))

    @classmethod
    def from_microergodic(cls, m: float, alpha: float, nu: float) -> "MaternParams":
        """Build the model with sigma^2 = m / alpha^(2 nu)."""
        if not m > 0:
            raise ValueError(f"m must be positive, got {m!r}")
        return cls(sigma=math.sqrt(m / alpha ** (2 * nu)), alpha=alpha, nu=nu)


@dataclass(frozen=True)
class ModelPair:
    """Two Matern models sharing nu, compared by the score statistic."""

    model1: MaternParams
    model2: MaternParams

    def __post_init__(self):
        if self.model1.nu != self.model2.nu:
            raise ValueError("both models must share the smoothness nu")

    @classmethod
    def matched(cls, m: float, alpha1: float, alpha2: float, nu: float) -> "ModelPair":
        """Microergodically matched pair: m1 = m2 = m."""
        pair = cls(
            MaternParams.from_microergodic(m, alpha1, nu),
            MaternParams.from_microergodic(m, alpha2, nu),
        )
        if not math.isclose(pair.model1.m, pair.model2.m, rel_tol=1e-12):
            raise ValueError("matched construction lost the microergodic match")
        return pair

    @property
    def nu(self) -> float:
        return self.model1.nu

    def require_mismatch(self):
        if self.model1.alpha == self.model2.alpha:
            raise ValueError("alpha1 == alpha2: the models have no range mismatch")


def microergodic(params: MaternParams) -> float:
    """Return sigma^2 * alpha^(2 nu)."""
    return params.m


def spectral_constant(nu: float) -> float:
    """Constant C_nu making (2 pi)^-4 * integral(C_nu m (alpha^2+|xi|^2)^-p) = sigma^2.

    The radial integral gives integral = pi^2 alpha^(-2 nu) / (nu (nu + 1)),
    hence C_nu = 16 pi^2 nu (nu + 1).
    """
    return 16.0 * math.pi**2 * nu * (nu + 1.0)


def spectral_density(xi, params: MaternParams, mode: str = "unit_constant"):
    """Spectral density at frequency vector(s) ``xi`` (last axis of length 4)."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != DIM:
        raise ValueError(f"xi must have a trailing axis of length {DIM}")
    return spectral_density_sq(np.sum(xi * xi, axis=-1), params, mode)


def spectral_density_sq(xi_sq, params: MaternParams, mode: str = "unit_constant"):
    """Spectral density as a function of |xi|^2 (vectorised)."""
    if mode not in SPECTRAL_MODES:
        raise ValueError(f"unknown spectral mode {mode!r}; expected one of {SPECTRAL_MODES}")
    f = params.m * (params.alpha**2 + np.asarray(xi_sq, dtype=float)) ** (-params.p)
    if mode == "normalized":
        f = spectral_constant(params.nu) * f
    return f


def covariance(h, params: MaternParams):
    """Matern covariance at distance(s) ``h`` for nu in {1/2, 3/2, 5/2}.

    Evaluated through the closed forms of the half-integer Bessel functions;
    continuous at h = 0 with value sigma^2.
    """
    nu = params.nu
    if not any(math.isclose(nu, s) for s in _SUPPORTED_NU):
        raise UnsupportedSmoothnessError(
            f"unsupported smoothness nu={nu}; closed forms exist only for {_SUPPORTED_NU}"
        )
    h = np.asarray(h, dtype=float)
    if np.any(h < 0):
        raise ValueError("distance must be nonnegative")
    x = params.alpha * h
    if math.isclose(nu, 0.5):
        poly = 1.0
    elif math.isclose(nu, 1.5):
        poly = 1.0 + x
    else:
        poly = 1.0 + x + x * x / 3.0
    return params.sigma**2 * poly * np.exp(-x)


def _k_sq(k):
    k = np.asarray(k, dtype=float)
    k_sq = np.sum(k * k, axis=-1)
    if np.any(k_sq == 0):
        raise ValueError("k must be nonzero")
    return k_sq


def delta_analytic_sq(k_sq, alpha1: float, alpha2: float, nu: float):
    """Pure spectral-ratio mismatch f2/f1 - 1 as a function of |k|^2."""
    k_sq = np.asarray(k_sq, dtype=float)
    p = nu + DIM / 2
    # expm1/log1p keep precision when the ratio is close to one
    ratio_log = p * (np.log1p(alpha1**2 / k_sq) - np.log1p(alpha2**2 / k_sq))
    return np.expm1(ratio_log)


def delta_analytic(k, alpha1: float, alpha2: float, nu: float):
    """((alpha1^2+|k|^2)/(alpha2^2+|k|^2))^p - 1 for nonzero integer k."""
    return delta_analytic_sq(_k_sq(k), alpha1, alpha2, nu)


def delta_leading(k, alpha1: float, alpha2: float, nu: float):
    """Leading-order mismatch p (alpha1^2 - alpha2^2) / |k|^2."""
    p = nu + DIM / 2
    return p * (alpha1**2 - alpha2**2) / _k_sq(k)
