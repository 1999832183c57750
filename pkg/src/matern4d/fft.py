"""Rank-4 DFT and convolution primitives.

Conventions (used by every consumer in the package):

* ``dft_forward`` is the unnormalised transform
  out[k] = sum_j t[j] exp(-2 pi i <k, j> / n);
* ``dft_inverse`` carries the 1/N factor, so it inverts ``dft_forward``.

Convolution storage conventions:

* ``circular``: kernel has the signal's shape; the difference d is stored at
  d mod n along each axis.
* ``padded_linear``: signal positions 0..n-1 are taken literally; the kernel
  has length 2n-1 per axis with the true difference d in {-(n-1), ..., n-1}
  stored at d mod (2n-1). The result is the exact truncated sum
  out[i] = sum_j kernel(i - j) signal[j].
"""

from __future__ import annotations

import numpy as np
import scipy.fft

RANK = 4


def _as_tensor(t) -> np.ndarray:
    t = np.asarray(t)
    if t.ndim != RANK:
        raise ValueError(f"expected a rank-{RANK} tensor, got shape {t.shape}")
    return t


def _check_finite(t: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(t)):
        raise FloatingPointError("non-finite entries in tensor")
    return t


def dft_forward(t, workers: int | None = None) -> np.ndarray:
    """Unnormalised forward 4-D DFT."""
    t = _as_tensor(t)
    return _check_finite(scipy.fft.fftn(t, workers=workers))


def dft_inverse(t, workers: int | None = None) -> np.ndarray:
    """Inverse 4-D DFT with 1/N scaling."""
    t = _as_tensor(t)
    return _check_finite(scipy.fft.ifftn(t, workers=workers))


def convolve(signal, kernel, mode: str = "circular", workers: int | None = None) -> np.ndarray:
    """Convolve a rank-4 signal with a rank-4 kernel via the DFT.

    See the module docstring for the kernel storage convention of each mode.
    """
    signal = _as_tensor(signal)
    kernel = _as_tensor(kernel)
    if mode == "circular":
        if signal.shape != kernel.shape:
            raise ValueError(
                f"circular mode needs equal shapes, got {signal.shape} and {kernel.shape}"
            )
        out = dft_inverse(dft_forward(signal, workers) * dft_forward(kernel, workers), workers)
        return out
    if mode == "padded_linear":
        want = tuple(2 * n - 1 for n in signal.shape)
        if kernel.shape != want:
            raise ValueError(f"padded_linear mode needs kernel shape {want}, got {kernel.shape}")
        # a period of 2n-1 already separates every difference in [-(n-1), n-1]
        padded = np.zeros(want, dtype=np.result_type(signal, complex))
        padded[tuple(slice(0, n) for n in signal.shape)] = signal
        full = dft_inverse(dft_forward(padded, workers) * dft_forward(kernel, workers), workers)
        return np.ascontiguousarray(full[tuple(slice(0, n) for n in signal.shape)])
    raise ValueError(f"unknown convolution mode {mode!r}")


def factor_matrix(factor, n: int, mode: str) -> np.ndarray:
    """Dense n x n matrix T[i, j] = factor(i - j) for one axis."""
    factor = np.asarray(factor)
    i = np.arange(n)
    diff = i[:, None] - i[None, :]
    if mode == "circular":
        if factor.shape != (n,):
            raise ValueError(f"circular factor must have length {n}, got {factor.shape}")
        return factor[diff % n]
    if mode == "padded_linear":
        if factor.shape != (2 * n - 1,):
            raise ValueError(f"padded_linear factor must have length {2 * n - 1}")
        return factor[diff % (2 * n - 1)]
    raise ValueError(f"unknown convolution mode {mode!r}")


def convolve_separable(signal, factors, mode: str = "circular") -> np.ndarray:
    """Convolution with a tensor-product kernel, one axis at a time.

    Equivalent to :func:`convolve` with
    ``kernel = factors[0] x factors[1] x factors[2] x factors[3]`` (outer product)
    but costs O(n N) per axis and never pads. ``factors`` may be a single 1-D
    array used on every axis.
    """
    signal = _as_tensor(signal)
    if isinstance(factors, np.ndarray) and factors.ndim == 1:
        factors = (factors,) * RANK
    if len(factors) != RANK:
        raise ValueError(f"need {RANK} per-axis factors")
    mats = [factor_matrix(factor, n, mode) for factor, n in zip(factors, signal.shape)]
    return apply_axis_matrices(signal, mats)


def apply_axis_matrices(t, mats) -> np.ndarray:
    """out = t x_1 mats[0] x_2 mats[1] ... (mode-a product along every axis)."""
    out = np.ascontiguousarray(_as_tensor(t))
    if not np.iscomplexobj(out):
        out = out.astype(float)
    for axis, mat in enumerate(mats):
        if mat.shape != (out.shape[axis],) * 2:
            raise ValueError(f"axis {axis} matrix has shape {mat.shape}")
        out = _apply_axis(mat, out, axis)
    return _check_finite(out)


def _apply_axis(mat: np.ndarray, t: np.ndarray, axis: int) -> np.ndarray:
    """Contract ``mat`` with axis ``axis`` of the C-contiguous tensor ``t``."""
    shape = t.shape
    n = shape[axis]
    pre = int(np.prod(shape[:axis], dtype=np.int64))
    post = int(np.prod(shape[axis + 1 :], dtype=np.int64))
    if np.iscomplexobj(mat):
        t = t.astype(complex, copy=False)
    if axis == t.ndim - 1:
        out = t.reshape(pre, n) @ mat.T.astype(t.dtype, copy=False)
        return out.reshape(shape)
    if np.iscomplexobj(t) and not np.iscomplexobj(mat):
        # (re, im) pairs become a trailing length-2 axis; one real product
        flat = t.view(float).reshape(pre, n, 2 * post)
        return np.matmul(mat, flat).reshape(-1).view(complex).reshape(shape)
    return np.matmul(mat, t.reshape(pre, n, post)).reshape(shape)
