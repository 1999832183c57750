"""Whittle pseudo-likelihood estimation of the range parameter.

Fields live on the observation lattice {h j : j in {0..n-1}^4}, h = 2 pi / n.
Under the microergodic normalisation each candidate alpha carries
sigma^2 = alpha^(-2 nu), so m is the only free scale.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from . import fft
from .model import MaternParams, covariance
from .simulator import hermitian_noise


class EmbeddingError(RuntimeError):
    """Circulant embedding stayed indefinite up to the largest torus tried."""


@dataclass(frozen=True)
class ObsGrid:
    n_obs: int

    def __post_init__(self):
        if int(self.n_obs) != self.n_obs or self.n_obs < 2:
            raise ValueError(f"n_obs must be an integer >= 2, got {self.n_obs!r}")

    @property
    def h(self) -> float:
        return 2.0 * math.pi / self.n_obs

    @property
    def total(self) -> int:
        return self.n_obs**4


def default_alpha_grid(alpha_min=0.5, alpha_max=6.0, step=0.05) -> tuple:
    count = int(round((alpha_max - alpha_min) / step)) + 1
    return tuple(round(alpha_min + i * step, 12) for i in range(count))


@dataclass(frozen=True)
class WhittleConfig:
    nu: float = 1.5
    alpha_grid: tuple = field(default_factory=default_alpha_grid)
    reps: int = 50
    master_seed: int = 0

    def __post_init__(self):
        grid = tuple(float(a) for a in self.alpha_grid)
        if not grid:
            raise ValueError("alpha_grid must be nonempty")
        if any(a <= 0 for a in grid):
            raise ValueError("alpha_grid values must be positive")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("alpha_grid must be strictly increasing")
        object.__setattr__(self, "alpha_grid", grid)


@dataclass
class WhittleFit:
    alpha_hat: float
    m_hat: float
    objective_curve: list  # (alpha, Q(m_hat(alpha), alpha), m_hat(alpha))


def _unit_model(alpha: float, nu: float) -> MaternParams:
    return MaternParams.from_microergodic(1.0, alpha, nu)


def grid_covariance(r, alpha: float, nu: float, n_obs: int):
    """c_alpha(r) = Cov(Y(0), Y(h r)) under m = 1."""
    r = np.asarray(r, dtype=float)
    dist = ObsGrid(n_obs).h * np.sqrt(np.sum(r * r, axis=-1))
    return covariance(dist, _unit_model(alpha, nu))


def triangle_weights(r, n_obs: int):
    """A(r) = prod_l (n_obs - |r_l|)_+."""
    r = np.abs(np.asarray(r, dtype=np.int64))
    return np.prod(np.clip(n_obs - r, 0, None), axis=-1).astype(float)


def _lag_axes(n_obs: int) -> np.ndarray:
    return np.arange(-(n_obs - 1), n_obs)


@functools.lru_cache(maxsize=512)
def u_alpha(alpha: float, nu: float, n_obs: int) -> np.ndarray:
    """Exact Var(Z_k) / m over k in {0..n-1}^4 via fold-then-FFT.

    The r-sum stops at |r_l| <= n-1 because A vanishes beyond; the phase has
    period n, so lags are folded mod n before a single DFT.
    """
    grid = ObsGrid(n_obs)
    lags = _lag_axes(n_obs)
    r = np.stack(np.meshgrid(lags, lags, lags, lags, indexing="ij"), axis=-1)
    weights = grid_covariance(r, alpha, nu, n_obs) * triangle_weights(r, n_obs)

    folded = np.zeros((n_obs,) * 4)
    base = lags % n_obs
    idx = np.ix_(base, base, base, base)
    np.add.at(folded, idx, weights)

    u = grid.h**8 * fft.dft_forward(folded)
    scale = np.abs(u.real)
    if np.any(np.abs(u.imag) >= 1e-10 * scale + 1e-14):
        raise ArithmeticError("u_alpha has a non-negligible imaginary part; folding bug")
    u = u.real
    if u.min() < -1e-12:
        raise ArithmeticError(f"u_alpha has a negative entry {u.min()!r}; folding bug")
    u = np.clip(u, 0.0, None)
    u.setflags(write=False)
    return u


def _torus_covariance(side: int, alpha: float, nu: float, n_obs: int) -> np.ndarray:
    pos = np.arange(side)
    lag = np.minimum(pos, side - pos)
    r = np.stack(np.meshgrid(lag, lag, lag, lag, indexing="ij"), axis=-1)
    return grid_covariance(r, alpha, nu, n_obs)


def embedding_eigenvalues(n_obs: int, alpha: float, nu: float, max_factor: int = 8):
    """Eigenvalues of the smallest PSD circulant embedding, with the torus side.

    Starts at side 2 n_obs and doubles up to ``max_factor`` n_obs. Eigenvalues
    above -1e-8 * max are accepted and clamped to zero.
    """
    side = 2 * n_obs
    worst = None
    while side <= max_factor * n_obs:
        lam = fft.dft_forward(_torus_covariance(side, alpha, nu, n_obs)).real
        lo, hi = lam.min(), lam.max()
        if lo >= -1e-8 * hi:
            return np.clip(lam, 0.0, None), side
        worst = lo
        side *= 2
    raise EmbeddingError(
        f"circulant embedding failed up to side {max_factor * n_obs}: min eigenvalue {worst!r}"
    )


def synthesize_field(n_obs: int, alpha: float, nu: float, m: float, rng: np.random.Generator):
    """Stationary lattice field with covariance m c_alpha(j - j') by circulant embedding."""
    lam, side = _embedding(n_obs, alpha, nu)
    W = hermitian_noise(lam.shape, rng)
    total = side**4
    Y = math.sqrt(total) * fft.dft_inverse(np.sqrt(lam) * W)
    # Hermitian noise and an even spectrum make Y real up to rounding
    Y = math.sqrt(m) * Y.real
    return np.ascontiguousarray(Y[:n_obs, :n_obs, :n_obs, :n_obs])


@functools.lru_cache(maxsize=32)
def _embedding(n_obs: int, alpha: float, nu: float):
    lam, side = embedding_eigenvalues(n_obs, alpha, nu)
    lam.setflags(write=False)
    return lam, side


def dft_coeffs(field_values, n_obs: int | None = None):
    """Z_k = h^4 sum_j Y(h j) exp(-2 pi i <k, j>/n) and the periodogram I_k = |Z_k|^2."""
    field_values = np.asarray(field_values, dtype=float)
    n = field_values.shape[0] if n_obs is None else n_obs
    if field_values.shape != (n,) * 4:
        raise ValueError(f"field must have shape {(n,) * 4}, got {field_values.shape}")
    Z = ObsGrid(n).h ** 4 * fft.dft_forward(field_values)
    return Z, np.abs(Z) ** 2


@functools.lru_cache(maxsize=16)
def half_spectrum(n_obs: int) -> tuple:
    """One representative of each pair {k, -k}, zero mode excluded.

    Self-conjugate modes (other than 0) are kept. Of each other pair, the
    member whose signed representative in (-n/2, n/2]^4 is lexicographically
    smaller is kept. Result is sorted by flat index.
    """
    n = n_obs
    keep = []
    for k in np.ndindex(*(n,) * 4):
        if not any(k):
            continue
        neg = tuple((-c) % n for c in k)
        if neg == k:
            keep.append(k)
            continue
        signed = tuple(c if c <= n // 2 else c - n for c in k)
        signed_neg = tuple(c if c <= n // 2 else c - n for c in neg)
        if signed < signed_neg:
            keep.append(k)
    return tuple(keep)


def _as_index(K_set):
    arr = np.asarray(K_set, dtype=np.int64).reshape(-1, 4)
    return tuple(arr.T)


def profile_m(I, u_curve, K_set) -> float:
    """m_hat(alpha) = mean over K of I_k / u_alpha(k)."""
    idx = _as_index(K_set)
    u = np.asarray(u_curve)[idx]
    if np.any(u <= 0):
        raise ValueError("u_alpha vanishes on the retained frequencies")
    return float(np.mean(np.asarray(I)[idx] / u))


def whittle_objective(I, u_curve, m: float, K_set) -> float:
    """Q(m, alpha) = sum over K of log(m u) + I / (m u)."""
    if not m > 0:
        raise ValueError("m must be positive")
    idx = _as_index(K_set)
    u = np.asarray(u_curve)[idx]
    if np.any(u <= 0):
        raise ValueError("u_alpha vanishes on the retained frequencies")
    mu = m * u
    return float(np.sum(np.log(mu) + np.asarray(I)[idx] / mu))


def fit(field_values, config: WhittleConfig) -> WhittleFit:
    """Profile out m and grid-search alpha; ties go to the smaller alpha."""
    n_obs = np.asarray(field_values).shape[0]
    _, I = dft_coeffs(field_values, n_obs)
    K_set = half_spectrum(n_obs)
    curve = []
    for alpha in config.alpha_grid:
        u = u_alpha(alpha, config.nu, n_obs)
        m_hat = profile_m(I, u, K_set)
        curve.append((alpha, whittle_objective(I, u, m_hat, K_set), m_hat))
    # strict < keeps the first (smallest) alpha on ties
    best = 0
    for i, row in enumerate(curve):
        if row[1] < curve[best][1]:
            best = i
    return WhittleFit(alpha_hat=curve[best][0], m_hat=curve[best][2], objective_curve=curve)


def simulate_and_fit(n_obs: int, alpha: float, m: float, config: WhittleConfig, replicate: int):
    """Synthesize replicate ``replicate`` from its own stream and fit it."""
    from .simulator import replicate_rng

    rng = replicate_rng(config.master_seed, 7, replicate)
    Y = synthesize_field(n_obs, alpha, config.nu, m, rng)
    return fit(Y, config)
