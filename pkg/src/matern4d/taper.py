"""Frequency lattice and the tensor-product bump taper with its Fourier kernel.

Lattice tensors are stored *torus-indexed*: the frequency index
n in {-M, ..., M-1} lives at array position n mod 2M (numpy FFT order).
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

CONV_MODES = ("circular", "padded_linear")


@dataclass(frozen=True)
class FreqLattice:
    """Index box {-M, ..., M-1}^4 with frequency spacing 1/q."""

    M: int
    q: int

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ValueError(f"M must be a positive integer, got {self.M!r}")
        if int(self.q) != self.q or self.q < 1:
            raise ValueError(f"q must be a positive integer, got {self.q!r}")

    @property
    def h_xi(self) -> float:
        return 1.0 / self.q

    @property
    def side(self) -> int:
        return 2 * self.M

    @property
    def shape(self) -> tuple:
        return (self.side,) * 4

    @property
    def omega(self) -> float:
        """Half-width of the simulated frequency box."""
        return self.M * self.h_xi

    def signed_indices(self) -> np.ndarray:
        """Signed index n at each torus position, i.e. [0, 1, ..., M-1, -M, ..., -1]."""
        pos = np.arange(self.side)
        return np.where(pos < self.M, pos, pos - self.side)

    def negation(self) -> np.ndarray:
        """Per-axis position of -n mod 2M."""
        return (-np.arange(self.side)) % self.side

    def xi_sq(self) -> np.ndarray:
        """|xi_n|^2 over the lattice, torus-indexed."""
        x2 = (self.h_xi * self.signed_indices()) ** 2
        return (
            x2[:, None, None, None]
            + x2[None, :, None, None]
            + x2[None, None, :, None]
            + x2[None, None, None, :]
        )

    def is_representable(self, k) -> bool:
        qk = self.q * np.asarray(k, dtype=np.int64)
        return bool(np.all((qk >= -self.M) & (qk <= self.M - 1)))

    def position(self, k) -> tuple:
        """Torus position of the integer frequency k (i.e. of lattice index q*k)."""
        k = np.asarray(k, dtype=np.int64)
        if k.shape != (4,):
            raise ValueError("k must be a 4-vector of integers")
        if not self.is_representable(k):
            raise ValueError(
                f"frequency {tuple(int(x) for x in k)} is not representable on the "
                f"lattice (M={self.M}, q={self.q})"
            )
        return tuple(int(x) for x in (self.q * k) % self.side)

    def positions(self, ks) -> tuple:
        """Vectorised :meth:`position` for an (n, 4) array; returns index arrays."""
        ks = np.asarray(ks, dtype=np.int64).reshape(-1, 4)
        qk = self.q * ks
        if np.any((qk < -self.M) | (qk > self.M - 1)):
            raise ValueError("some frequencies are not representable on the lattice")
        return tuple((qk % self.side).T)


@dataclass(frozen=True)
class TaperSpec:
    """Taper radius R and Simpson subinterval count Q."""

    R: float = 2.0
    Q: int = 400

    def __post_init__(self):
        if not self.R > 0:
            raise ValueError(f"R must be positive, got {self.R!r}")
        if int(self.Q) != self.Q or self.Q < 2 or self.Q % 2:
            raise ValueError(f"Q must be an even integer >= 2, got {self.Q!r}")


def bump(u):
    """exp(-1/(1-u^2)) on |u| < 1, zero elsewhere."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1
    out[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
    return out


@functools.lru_cache(maxsize=16)
def _simpson_rule(Q: int):
    nodes = np.linspace(-1.0, 1.0, Q + 1)
    weights = np.ones(Q + 1)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    weights *= (2.0 / Q) / 3.0
    return nodes, weights * bump(nodes)


def bump_hat(w, Q: int = 400):
    """Fourier transform of the bump by composite Simpson on [-1, 1].

    The bump is real and even, so the transform is the cosine integral
    and is exactly real and even in ``w``.
    """
    if int(Q) != Q or Q < 2 or Q % 2:
        raise ValueError(f"Q must be an even integer >= 2, got {Q!r}")
    nodes, weighted = _simpson_rule(int(Q))
    w = np.asarray(w, dtype=float)
    # |w| makes the even symmetry exact in floating point; lattice inputs
    # repeat heavily, so integrate once per distinct value
    uniq, inverse = np.unique(np.abs(w), return_inverse=True)
    values = np.cos(np.multiply.outer(uniq, nodes)) @ weighted
    return values[inverse].reshape(w.shape)


def taper_factor(xi, spec: TaperSpec):
    """One tensor factor R * bump_hat(R * xi) of the taper transform."""
    return spec.R * bump_hat(spec.R * np.asarray(xi, dtype=float), spec.Q)


def taper_hat(xi, spec: TaperSpec):
    """R^4 * prod_r bump_hat(R xi_r) at 4-vector(s) ``xi``."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != 4:
        raise ValueError("xi must have a trailing axis of length 4")
    # sorting fixes the multiplication order, so permuted inputs agree bit for bit
    return np.prod(np.sort(taper_factor(xi, spec), axis=-1), axis=-1)


def kernel(d, lattice: FreqLattice, spec: TaperSpec):
    """Sampled kernel K(d) = taper_hat(h_xi * d) for integer 4-vector(s) d."""
    return taper_hat(lattice.h_xi * np.asarray(d, dtype=float), spec)


@functools.lru_cache(maxsize=32)
def kernel_factor(lattice: FreqLattice, spec: TaperSpec, mode: str) -> np.ndarray:
    """Per-axis kernel factor in the storage convention of :mod:`matern4d.fft`.

    ``circular``: length 2M, the difference d stored at d mod 2M with d taken
    as its signed representative in {-M, ..., M-1}.
    ``padded_linear``: length 4M-1, every true difference
    d in {-(2M-1), ..., 2M-1} stored at d mod (4M-1).

    The returned array is read-only and cached per configuration.
    """
    if mode == "circular":
        d = lattice.signed_indices()
    elif mode == "padded_linear":
        size = 2 * lattice.side - 1
        pos = np.arange(size)
        d = np.where(pos < lattice.side, pos, pos - size)
    else:
        raise ValueError(f"unknown convolution mode {mode!r}; expected one of {CONV_MODES}")
    out = taper_factor(lattice.h_xi * d, spec)
    out.setflags(write=False)
    return out


def kernel_tensor(lattice: FreqLattice, spec: TaperSpec, mode: str = "circular") -> np.ndarray:
    """Full rank-4 kernel tensor (outer product of the per-axis factors)."""
    k1 = kernel_factor(lattice, spec, mode)
    return np.einsum("a,b,c,d->abcd", k1, k1, k1, k1)


def c_chi(lattice: FreqLattice, spec: TaperSpec, span: float = 400.0) -> float:
    """Lattice quadrature of the integral of |taper_hat|^2 over R^4.

    Computed as (h_xi * sum_d factor(h_xi d)^2)^4 with the per-axis sum taken
    over |R h_xi d| <= ``span``. This is the constant linking the discrete
    variance curve to the spectral density: in the lattice model
    E|Z_n|^2 = h_xi^4 f(xi_n) carries no (2 pi)^-4 factor.
    """
    d_max = int(np.ceil(span / (spec.R * lattice.h_xi)))
    d = np.arange(-d_max, d_max + 1)
    per_axis = lattice.h_xi * np.sum(taper_factor(lattice.h_xi * d, spec) ** 2)
    return float(per_axis**4)
