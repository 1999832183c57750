"""Monte Carlo generation of localized Fourier coefficients on the lattice.

The discrete model, for model j:

    G      Hermitian complex Gaussian family over the index box, E|G_n|^2 = 1
    Z_n  = h_xi^2 sqrt(f_j(xi_n)) G_n
    X_n  = sum_r K(n - r) Z_r
    v(n) = h_xi^4 sum_r f_j(xi_r) K(n - r)^2 = E|X_n|^2

``padded_linear`` takes n - r as the true integer difference (the sum
truncated to the box); ``circular`` takes it mod 2M.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np

from . import fft
from .model import MaternParams, ModelPair, spectral_density_sq
from .taper import CONV_MODES, FreqLattice, TaperSpec, kernel_factor


@dataclass(frozen=True)
class SimConfig:
    """Everything needed to simulate coefficients for a model pair."""

    lattice: FreqLattice = field(default_factory=lambda: FreqLattice(M=20, q=2))
    taper: TaperSpec = field(default_factory=TaperSpec)
    pair: ModelPair = field(default_factory=lambda: ModelPair.matched(1.0, 1.0, 2.0, 1.5))
    conv_mode: str = "padded_linear"
    master_seed: int = 0

    def __post_init__(self):
        if self.conv_mode not in CONV_MODES:
            raise ValueError(f"conv_mode must be one of {CONV_MODES}, got {self.conv_mode!r}")
        if not 0 <= int(self.master_seed) < 2**64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")

    def model(self, tag: int) -> MaternParams:
        if tag == 1:
            return self.pair.model1
        if tag == 2:
            return self.pair.model2
        raise ValueError(f"model tag must be 1 or 2, got {tag!r}")


@dataclass
class CoefficientField:
    """Localized coefficients X over the index box (torus-indexed)."""

    X: np.ndarray
    lattice: FreqLattice
    model_tag: int
    seed_used: int

    def at(self, k) -> complex:
        """X_k := X_{qk} for a representable integer frequency k."""
        return complex(self.X[self.lattice.position(k)])

    def values(self, ks) -> np.ndarray:
        return self.X[self.lattice.positions(ks)]


def replicate_rng(master_seed: int, *key: int) -> np.random.Generator:
    """Independent stream for ``key`` (e.g. (model_tag, replicate)), order-free."""
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(seq)


@functools.lru_cache(maxsize=8)
def _pairing_masks(shape):
    flat = np.arange(int(np.prod(shape))).reshape(shape)
    flat_neg = _negate(flat)
    rep, self_conj = flat < flat_neg, flat == flat_neg
    rep.setflags(write=False)
    self_conj.setflags(write=False)
    return rep, self_conj


def _negate(a: np.ndarray) -> np.ndarray:
    """a[-n mod shape] on every axis."""
    return np.roll(np.flip(a), 1, axis=tuple(range(a.ndim)))


def hermitian_noise(shape, rng: np.random.Generator) -> np.ndarray:
    """Hermitian complex Gaussian array on a torus of the given shape.

    One representative of each pair {n, -n} (the one with the smaller flat
    index) gets an independent circular complex Gaussian with E|G|^2 = 1;
    its partner is the conjugate; self-conjugate positions get a real
    standard normal.
    """
    shape = tuple(int(s) for s in shape)
    rep, self_conj = _pairing_masks(shape)
    raw = rng.standard_normal((2,) + shape)
    g = np.empty(shape, dtype=complex)
    g.real = raw[0]
    g.imag = raw[1]
    g *= np.sqrt(0.5)

    out = np.where(rep, g, np.conj(_negate(g)))
    out[self_conj] = raw[0][self_conj]
    return out


def draw_hermitian(lattice: FreqLattice, rng: np.random.Generator) -> np.ndarray:
    """Hermitian Gaussian family G over the lattice box."""
    return hermitian_noise(lattice.shape, rng)


@functools.lru_cache(maxsize=8)
def _xi_sq(lattice: FreqLattice) -> np.ndarray:
    out = lattice.xi_sq()
    out.setflags(write=False)
    return out


@functools.lru_cache(maxsize=8)
def spectral_tensor(model: MaternParams, lattice: FreqLattice) -> np.ndarray:
    """f(xi_n) over the box in unit-constant mode, torus-indexed (read-only)."""
    out = spectral_density_sq(_xi_sq(lattice), model, "unit_constant")
    out.setflags(write=False)
    return out


@functools.lru_cache(maxsize=8)
def _field_multiplier(model: MaternParams, lattice: FreqLattice) -> np.ndarray:
    out = lattice.h_xi**2 * np.sqrt(spectral_tensor(model, lattice))
    out.setflags(write=False)
    return out


def spectral_field(G, model: MaternParams, lattice: FreqLattice) -> np.ndarray:
    """Z_n = h_xi^2 sqrt(f(xi_n)) G_n."""
    return _field_multiplier(model, lattice) * G


@functools.lru_cache(maxsize=32)
def _axis_matrix(lattice: FreqLattice, taper: TaperSpec, mode: str, squared: bool) -> np.ndarray:
    """T[i, j] = factor(n_i - n_j) with rows and columns in torus order.

    Equivalent to shifting to natural order, applying the
    :func:`matern4d.fft.factor_matrix` Toeplitz matrix and shifting back.
    """
    factor = kernel_factor(lattice, taper, mode)
    if squared:
        factor = factor**2
    natural = fft.factor_matrix(factor, lattice.side, mode)
    perm = np.fft.fftshift(np.arange(lattice.side))  # torus position -> natural position
    out = natural[np.ix_(perm, perm)]
    out.setflags(write=False)
    return out


def axis_matrix(lattice: FreqLattice, taper: TaperSpec, mode: str) -> np.ndarray:
    """Per-axis kernel matrix in torus order (read-only)."""
    return _axis_matrix(lattice, taper, mode, False)


def _lattice_convolve(signal, lattice: FreqLattice, taper: TaperSpec, mode: str, squared=False):
    if mode not in CONV_MODES:
        raise ValueError(f"unknown convolution mode {mode!r}")
    mat = _axis_matrix(lattice, taper, mode, squared)
    return fft.apply_axis_matrices(signal, [mat] * 4)


def localized_coeffs(Z, lattice: FreqLattice, taper: TaperSpec, conv_mode: str = "padded_linear"):
    """X = K * Z on the lattice box for the chosen convolution mode."""
    return _lattice_convolve(np.asarray(Z), lattice, taper, conv_mode)


def simulate(config: SimConfig, model_tag: int, replicate: int) -> CoefficientField:
    """One replicate of X under model ``model_tag`` from its own derived stream."""
    rng = replicate_rng(config.master_seed, model_tag, replicate)
    G = draw_hermitian(config.lattice, rng)
    Z = spectral_field(G, config.model(model_tag), config.lattice)
    X = localized_coeffs(Z, config.lattice, config.taper, config.conv_mode)
    return CoefficientField(X, config.lattice, model_tag, int(config.master_seed))


def variance_curve(
    model: MaternParams, lattice: FreqLattice, taper: TaperSpec, conv_mode: str = "padded_linear"
) -> np.ndarray:
    """v(n) = h_xi^4 sum_r f(xi_r) K(n - r)^2, torus-indexed, same mode as the field."""
    f = spectral_tensor(model, lattice)
    v = lattice.h_xi**4 * _lattice_convolve(f, lattice, taper, conv_mode, squared=True)
    if not np.all(v > 0):
        raise ArithmeticError(
            f"variance curve has a nonpositive entry (min {v.min()!r}); convolution misuse"
        )
    return v


def _row(lattice: FreqLattice, taper: TaperSpec, conv_mode: str, n_signed: int) -> np.ndarray:
    """K-factor values factor(n - r) for r over the torus positions of one axis."""
    factor = kernel_factor(lattice, taper, conv_mode)
    r = lattice.signed_indices()
    if conv_mode == "circular":
        d = (n_signed - r) % lattice.side
        return factor[d]
    return factor[(n_signed - r) % factor.size]


def cross_cov_discrete(
    k,
    l,
    model: MaternParams,
    lattice: FreqLattice,
    taper: TaperSpec,
    conv_mode: str = "padded_linear",
):
    """Exact lattice covariances (E[X_k conj X_l], E[X_k X_l]).

    Sigma = h^4 sum_r f_r K(qk - r) K(ql - r)
    Pi    = h^4 sum_r f_r K(qk - r) K(ql - (-r))

    where -r is the torus negation, matching the pairing G_{-r} = conj(G_r).
    For circular mode ql - (-r) = ql + r mod 2M.
    """
    for v in (k, l):
        if not lattice.is_representable(v):
            raise ValueError(f"frequency {tuple(v)} is not representable on the lattice")
    qk = lattice.q * np.asarray(k, dtype=np.int64)
    ql = lattice.q * np.asarray(l, dtype=np.int64)
    neg = lattice.negation()
    rows_k = [_row(lattice, taper, conv_mode, int(n)) for n in qk]
    rows_l = [_row(lattice, taper, conv_mode, int(n)) for n in ql]
    f = spectral_tensor(model, lattice)
    h4 = lattice.h_xi**4
    a = [rk * rl for rk, rl in zip(rows_k, rows_l)]
    b = [rk * rl[neg] for rk, rl in zip(rows_k, rows_l)]
    sigma = h4 * np.einsum("abcd,a,b,c,d->", f, *a)
    pi = h4 * np.einsum("abcd,a,b,c,d->", f, *b)
    return complex(sigma), complex(pi)



def sigma_row(k, model: MaternParams, lattice: FreqLattice, taper: TaperSpec, conv_mode: str = "padded_linear"):
    """Sigma(k, n) for every lattice index n at once, torus-indexed.

    Sigma(k, .) is the kernel convolution of f(xi_r) K(qk - r), so one
    separable pass replaces a sum per target index.
    """
    if not lattice.is_representable(k):
        raise ValueError(f"frequency {tuple(k)} is not representable on the lattice")
    qk = lattice.q * np.asarray(k, dtype=np.int64)
    rows = [_row(lattice, taper, conv_mode, int(n)) for n in qk]
    weighted = spectral_tensor(model, lattice) * np.einsum("a,b,c,d->abcd", *rows)
    return lattice.h_xi**4 * _lattice_convolve(weighted, lattice, taper, conv_mode)
