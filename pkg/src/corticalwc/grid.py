"""Periodic grids, wrapped Gaussian kernels and spectral circular convolution.

Images are square ``(N, N)`` float arrays and orientation volumes are
``(N, N, K)`` arrays whose last axis is the orientation channel
``theta_k = k * pi / K`` (zero-based).  Kernels are stored with their origin
at index ``(0, 0[, 0])`` so that convolving a delta at the origin returns the
kernel itself.  All boundaries are periodic.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidParameterError


def check_image(f, nominal: bool = False, name: str = "image") -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.ndim != 2 or f.shape[0] != f.shape[1] or f.shape[0] < 1:
        raise InvalidParameterError(f"{name} must be a square 2D array, got shape {f.shape}")
    if not np.all(np.isfinite(f)):
        raise InvalidParameterError(f"{name} has non-finite values")
    if nominal and (f.min() < 0.0 or f.max() > 1.0):
        raise InvalidParameterError(f"{name} must take values in [0, 1]")
    return f


def check_volume(F, name: str = "volume") -> np.ndarray:
    F = np.asarray(F, dtype=float)
    if F.ndim != 3 or F.shape[0] != F.shape[1]:
        raise InvalidParameterError(f"{name} must have shape (N, N, K), got {F.shape}")
    if not np.all(np.isfinite(F)):
        raise InvalidParameterError(f"{name} has non-finite values")
    return F


def wrapped_gaussian_1d(sigma: float, n: int) -> np.ndarray:
    """Unnormalised Gaussian on ``Z_n`` summed over all periodic images.

    Entry ``i`` is ``sum_m exp(-(i + m n)^2 / (2 sigma^2))``.
    """
    if not sigma > 0:
        raise InvalidParameterError(f"sigma must be positive, got {sigma}")
    reps = int(math.ceil(10.0 * sigma / n)) + 1
    i = np.arange(n, dtype=float)
    shifts = n * np.arange(-reps, reps + 1, dtype=float)
    d = i[:, None] + shifts[None, :]
    return np.exp(-(d**2) / (2.0 * sigma**2)).sum(axis=1)


def gaussian2d(sigma_px: float, N: int) -> np.ndarray:
    """Normalised wrapped 2D Gaussian with std ``sigma_px`` on an N x N torus."""
    if N < 3:
        raise InvalidParameterError(f"N must be >= 3, got {N}")
    g = wrapped_gaussian_1d(sigma_px, N)
    k = np.outer(g, g)
    return k / k.sum()


def gaussian3d(sigma_spatial_px: float, sigma_orient_ch: float, N: int, K: int) -> np.ndarray:
    """Separable wrapped Gaussian over space (px) and orientation channels.

    The orientation factor has period K, i.e. orientation is pi-periodic.
    """
    if N < 3:
        raise InvalidParameterError(f"N must be >= 3, got {N}")
    if K < 2:
        raise InvalidParameterError(f"K must be >= 2, got {K}")
    g = wrapped_gaussian_1d(sigma_spatial_px, N)
    o = wrapped_gaussian_1d(sigma_orient_ch, K)
    k = g[:, None, None] * g[None, :, None] * o[None, None, :]
    return k / k.sum()


def kernel_spectrum(w: np.ndarray) -> np.ndarray:
    """Real FFT of a kernel, for repeated convolutions with the same kernel."""
    return np.fft.rfftn(w)


def convolve_spectrum(x: np.ndarray, w_hat: np.ndarray) -> np.ndarray:
    axes = tuple(range(x.ndim))
    return np.fft.irfftn(np.fft.rfftn(x, axes=axes) * w_hat, s=x.shape, axes=axes)


def circular_convolve(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Circular convolution over every axis of two same-shape arrays."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.shape != w.shape:
        raise InvalidParameterError(f"shape mismatch: {x.shape} vs {w.shape}")
    return convolve_spectrum(x, kernel_spectrum(w))


def circular_convolve_direct(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Direct O(n^2) circular convolution; the reference for the FFT path."""
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.shape != w.shape:
        raise InvalidParameterError(f"shape mismatch: {x.shape} vs {w.shape}")
    out = np.zeros_like(x)
    axes = tuple(range(x.ndim))
    for d in np.ndindex(*w.shape):
        if w[d] != 0.0:
            out += w[d] * np.roll(x, d, axis=axes)
    return out


def conv2_periodic(f, k) -> np.ndarray:
    f = check_image(f)
    k = check_image(k, name="kernel")
    if f.shape != k.shape:
        raise InvalidParameterError(f"shape mismatch: {f.shape} vs {k.shape}")
    return circular_convolve(f, k)


def conv3_periodic(F, W) -> np.ndarray:
    F = check_volume(F)
    W = check_volume(W, name="kernel")
    if F.shape != W.shape:
        raise InvalidParameterError(f"shape mismatch: {F.shape} vs {W.shape}")
    return circular_convolve(F, W)


def local_mean(f0, sigma_mu: float) -> np.ndarray:
    """Gaussian local average ``g * f0``; stays in [0, 1] for nominal inputs."""
    f0 = check_image(f0, nominal=True, name="f0")
    mu = conv2_periodic(f0, gaussian2d(sigma_mu, f0.shape[0]))
    return np.clip(mu, 0.0, 1.0)
