"""Brute-force O(N^2) reference computations for small instances.

These never call the FFT or separable paths they are used to check.
"""

from __future__ import annotations

import itertools

import numpy as np

from .model import MaternParams, spectral_density
from .taper import FreqLattice, TaperSpec, kernel


def _dft_matrix(shape) -> np.ndarray:
    grid = np.array(list(itertools.product(*[range(n) for n in shape])), dtype=float)
    n = np.asarray(shape, dtype=float)
    phase = (grid / n) @ grid.T
    return np.exp(-2j * np.pi * phase)


def direct_dft(t) -> np.ndarray:
    """out[k] = sum_j t[j] exp(-2 pi i sum_a k_a j_a / n_a), as a dense matrix product."""
    t = np.asarray(t)
    return (_dft_matrix(t.shape) @ t.reshape(-1)).reshape(t.shape)


def direct_convolve(signal, kernel_values, mode: str) -> np.ndarray:
    """Explicit double sum with the storage conventions of :mod:`matern4d.fft`."""
    signal = np.asarray(signal)
    shape = signal.shape
    out = np.zeros(shape, dtype=complex)
    kshape = np.asarray(kernel_values).shape
    points = list(itertools.product(*[range(n) for n in shape]))
    for i in points:
        acc = 0j
        for j in points:
            d = tuple((a - b) % m for a, b, m in zip(i, j, kshape))
            acc += kernel_values[d] * signal[j]
        out[i] = acc
    return out


def _kernel_block(lattice: FreqLattice, taper: TaperSpec, conv_mode: str):
    """Kernel K(d) for every difference d that can occur between box indices."""
    span = np.arange(-(2 * lattice.M - 1), 2 * lattice.M)
    d = span
    if conv_mode == "circular":
        d = (span + lattice.M) % lattice.side - lattice.M
    grid = np.stack(np.meshgrid(d, d, d, d, indexing="ij"), axis=-1)
    return kernel(grid, lattice, taper)


def direct_lattice_convolve(values, lattice: FreqLattice, taper: TaperSpec, conv_mode: str, square=False):
    """sum_r K(n - r)^(1 or 2) values[r] over the box, looping over r.

    ``values`` is torus-indexed; the output is torus-indexed.
    """
    block = _kernel_block(lattice, taper, conv_mode)
    if square:
        block = block**2
    M = lattice.M
    natural = np.fft.fftshift(np.asarray(values))
    out = np.zeros(lattice.shape, dtype=complex)
    off = 2 * M - 1
    for pos in itertools.product(range(lattice.side), repeat=4):
        r = [p - M for p in pos]
        # natural output index n = -M..M-1 needs difference n - r
        sl = tuple(slice(-M - ri + off, M - 1 - ri + off + 1) for ri in r)
        out += natural[pos] * block[sl]
    return np.fft.ifftshift(out)


def direct_variance_curve(model: MaternParams, lattice: FreqLattice, taper: TaperSpec, conv_mode: str):
    xi = lattice.h_xi * lattice.signed_indices()
    grid = np.stack(np.meshgrid(xi, xi, xi, xi, indexing="ij"), axis=-1)
    f = spectral_density(grid, model, "unit_constant")
    return lattice.h_xi**4 * direct_lattice_convolve(f, lattice, taper, conv_mode, square=True).real


def direct_u_alpha(alpha: float, nu: float, n_obs: int) -> np.ndarray:
    """u_alpha(k) = h^8 sum_{j, j'} c(j - j') e^{-2 pi i <k, j - j'>/n} by dense algebra."""
    from .whittle import grid_covariance

    h = 2 * np.pi / n_obs
    pts = np.array(list(itertools.product(range(n_obs), repeat=4)))
    C = grid_covariance(pts[:, None, :] - pts[None, :, :], alpha, nu, n_obs)
    F = _dft_matrix((n_obs,) * 4)
    u = h**8 * np.einsum("kj,jl,kl->k", F, C, F.conj())
    return u.reshape((n_obs,) * 4)
