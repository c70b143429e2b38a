"""Cake-wavelet lift of images to orientation volumes, and its left inverse.

Filter ``k`` lives in the Fourier domain and selects an angular slice of
frequencies centred at ``theta_k = k * pi / K``.  The angular profile is a
centred cardinal B-spline of degree ``bw`` in units of the channel spacing
``pi / K``; its integer translates sum to one, so the bank is an exact
partition of unity and ``project(lift(f)) == f`` up to rounding.

Frequency angles are measured as ``atan2(k_row, k_col) mod pi``: a grating
whose stripes are horizontal (varying down the rows) peaks in the channel
with ``theta_k = pi / 2``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import BSpline

from .errors import InvalidParameterError
from .grid import check_image, check_volume

_MAGIC = b"CAKE"
_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True)
class CakeFilterBank:
    N: int
    K: int
    bw: int
    filters: np.ndarray  # (K, N, N) complex, frequency domain, fft2 ordering

    @property
    def thetas(self) -> np.ndarray:
        return np.arange(self.K) * np.pi / self.K


def cardinal_bspline(degree: int, x: np.ndarray) -> np.ndarray:
    """Centred cardinal B-spline of the given degree (support ``degree + 1``)."""
    knots = np.arange(degree + 2) - (degree + 1) / 2.0
    b = BSpline.basis_element(knots, extrapolate=False)
    return np.nan_to_num(b(x), nan=0.0)


def _frequency_representatives(N: int) -> list[np.ndarray]:
    # Nyquist index -N/2 is also +N/2; averaging over both representatives
    # keeps the bank exactly point-symmetric and 90-degree covariant.
    f = np.fft.fftfreq(N) * N
    reps = [f]
    if N % 2 == 0:
        alt = f.copy()
        alt[N // 2] = N / 2
        reps.append(alt)
    return reps


def build_cake_bank(N: int, K: int, bw: int = 4, radial_taper: float | None = None) -> CakeFilterBank:
    """Build K angular cake filters on an N x N frequency grid.

    ``radial_taper``, if given, is the std (as a fraction of the Nyquist
    radius) of a Gaussian low-pass applied to the oriented part; the removed
    high-frequency mass is shared equally between channels like the DC term,
    so the partition of unity is kept.
    """
    if N < 4:
        raise InvalidParameterError(f"N must be >= 4, got {N}")
    if K < 1:
        raise InvalidParameterError(f"K must be >= 1, got {K}")
    if K > N:
        raise InvalidParameterError(f"K={K} exceeds the angular resolution of an N={N} grid")
    if bw < 1:
        raise InvalidParameterError(f"bw must be >= 1, got {bw}")
    if K == 1:
        return CakeFilterBank(N, K, bw, np.ones((1, N, N), dtype=complex))

    spacing = math.pi / K
    n_images = int(math.ceil((bw + 1) / (2.0 * K))) + 1
    images = K * np.arange(-n_images, n_images + 1)
    reps = _frequency_representatives(N)

    filters = np.zeros((K, N, N))
    n_combos = 0
    for ky in reps:
        for kx in reps:
            phi = np.mod(np.arctan2(ky[:, None], kx[None, :]), math.pi)
            u = phi / spacing
            for k in range(K):
                d = u - k
                filters[k] += sum(cardinal_bspline(bw, d - m) for m in images)
            n_combos += 1
    filters /= n_combos
    filters[:, 0, 0] = 1.0 / K

    if radial_taper is not None:
        if not radial_taper > 0:
            raise InvalidParameterError("radial_taper must be positive")
        f = np.fft.fftfreq(N) * 2.0
        rho2 = f[:, None] ** 2 + f[None, :] ** 2
        taper = np.exp(-rho2 / (2.0 * radial_taper**2))
        filters = filters * taper[None] + (1.0 - taper[None]) / K

    return CakeFilterBank(N, K, bw, filters.astype(complex))


def _lift_complex(f: np.ndarray, bank: CakeFilterBank) -> np.ndarray:
    f = check_image(f)
    if f.shape != (bank.N, bank.N):
        raise InvalidParameterError(f"image shape {f.shape} does not match bank N={bank.N}")
    spec = np.fft.fft2(f)
    out = np.fft.ifft2(spec[None] * bank.filters, axes=(1, 2))
    return np.moveaxis(out, 0, -1)


def lift(f, bank: CakeFilterBank) -> np.ndarray:
    """Orientation volume ``(N, N, K)``: channel k = IFFT(FFT(f) * filter_k)."""
    return np.ascontiguousarray(_lift_complex(f, bank).real)


def lift_imag_residual(f, bank: CakeFilterBank) -> float:
    """Largest imaginary part discarded by :func:`lift`."""
    return float(np.abs(_lift_complex(f, bank).imag).max())


def project(F) -> np.ndarray:
    """Channel sum; the left inverse of :func:`lift`."""
    return check_volume(F).sum(axis=-1)


def save_bank(path, bank: CakeFilterBank) -> None:
    """Write the header then K (real, imag) float64 N x N planes, little-endian."""
    with open(Path(path), "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, bank.N, bank.K, bank.bw))
        for filt in bank.filters:
            fh.write(np.ascontiguousarray(filt.real, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(filt.imag, dtype="<f8").tobytes())


def load_bank(path) -> CakeFilterBank:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise InvalidParameterError(f"{path}: file too short for a filter bank header")
    magic, N, K, bw = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise InvalidParameterError(f"{path}: bad magic {magic!r}")
    expected = 2 * K * N * N
    if len(raw) - _HEADER.size != 8 * expected:
        raise InvalidParameterError(f"{path}: expected {expected} values, found {(len(raw) - _HEADER.size) / 8:g}")
    planes = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    planes = planes.reshape(K, 2, N, N)
    return CakeFilterBank(N, K, bw, planes[:, 0] + 1j * planes[:, 1])
