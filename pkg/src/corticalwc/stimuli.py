"""Deterministic illusion stimuli with machine-readable target regions.

Default geometry is expressed at N = 200 (stripe period 24 px, disc radius
12 px, grating-induction bar half-width 8 px, Poggendorff bar half-width
24 px) and scaled linearly with N.  Periods of stimuli that must tile the
torus are snapped to an even divisor of N.  Edges are hard (no
anti-aliasing).

Pixel coordinates: ``x = col + 1/2 - N/2`` to the right, ``y = N/2 - row - 1/2``
upwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError

GREY = 0.5
RELATIONS = ("darker-than", "lighter-than", "counterphase-with")


@dataclass
class TargetRegion:
    label: str
    mask: np.ndarray
    relation: str | None = None
    other: str | None = None

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if not self.mask.any():
            raise InvalidParameterError(f"target {self.label!r} is empty")
        if self.relation is not None and self.relation not in RELATIONS:
            raise InvalidParameterError(f"unknown relation {self.relation!r}")

    @property
    def pixels(self) -> set[tuple[int, int]]:
        return {(int(r), int(c)) for r, c in zip(*np.nonzero(self.mask))}

    @property
    def bbox(self) -> tuple[int, int, int, int]:
        rows, cols = np.nonzero(self.mask)
        return int(rows.min()), int(cols.min()), int(rows.max()), int(cols.max())


@dataclass
class Stimulus:
    name: str
    image: np.ndarray
    targets: list[TargetRegion]
    meta: dict = field(default_factory=dict)

    def target(self, label: str) -> TargetRegion:
        for t in self.targets:
            if t.label == label:
                return t
        raise KeyError(label)

    def pairs(self):
        """``(a, b, relation)`` for every target that references another."""
        for t in self.targets:
            if t.relation is not None and t.other is not None:
                yield t, self.target(t.other), t.relation


def _scaled(value_at_200: float, N: int) -> int:
    return max(1, int(round(value_at_200 * N / 200.0)))


def even_divisor_period(target: float, N: int) -> int:
    """Even divisor of N closest to ``target`` (ties go to the larger one)."""
    cands = [d for d in range(2, N + 1, 2) if N % d == 0]
    if not cands:
        raise InvalidParameterError(f"N={N} has no even divisor for a stripe period")
    return min(cands, key=lambda d: (abs(d - target), -d))


def coordinates(N: int):
    c = np.arange(N) + 0.5 - N / 2.0
    x = np.broadcast_to(c[None, :], (N, N))
    y = np.broadcast_to(-c[:, None], (N, N))
    return x, y


def square_wave(u: np.ndarray, period: float) -> np.ndarray:
    """1 on the first half of every period, 0 on the second."""
    # phase in cycles, rounded, so pixels exactly on an edge fall the same
    # way in every period
    phase = np.mod(np.round(np.asarray(u) / period, 9), 1.0)
    return (phase < 0.5).astype(float)


def _check_N(N: int, minimum: int = 64):
    if N < minimum:
        raise InvalidParameterError(f"N must be >= {minimum}, got {N}")


def make_white(N: int = 200, period: int | None = None, patch_height: int | None = None) -> Stimulus:
    """Vertical black/white bars with a grey patch on a white bar (left) and
    on a black bar (right); the left patch should look darker."""
    _check_N(N)
    period = even_divisor_period(24 * N / 200.0, N) if period is None else int(period)
    if period < 2 or period % 2 or N % period:
        raise InvalidParameterError(f"period must be an even divisor of N, got {period}")
    w = period // 2
    if N // period < 4:
        raise InvalidParameterError("image too small to fit the stripes")
    patch_height = 2 * period if patch_height is None else int(patch_height)

    cols = np.arange(N)
    bars = ((cols // w) % 2 == 0).astype(float)  # white bars start at col 0
    img = np.tile(bars, (N, 1))

    r0 = N // 2 - patch_height // 2
    rows = slice(r0, r0 + patch_height)
    n_bars = N // w
    # bars nearest the quarter points of the matching colour
    left_bar = min((b for b in range(n_bars) if b % 2 == 0), key=lambda b: abs((b + 0.5) * w - N / 4))
    right_bar = min((b for b in range(n_bars) if b % 2 == 1), key=lambda b: abs((b + 0.5) * w - 3 * N / 4))
    masks = []
    for b in (left_bar, right_bar):
        m = np.zeros((N, N), dtype=bool)
        m[rows, b * w : (b + 1) * w] = True
        img[m] = GREY
        masks.append(m)
    targets = [
        TargetRegion("left_patch", masks[0], "darker-than", "right_patch"),
        TargetRegion("right_patch", masks[1]),
    ]
    return Stimulus("white", img, targets, {"period": period, "patch_height": patch_height})


def make_sbc(N: int = 200, square: int | None = None) -> Stimulus:
    """Black left half, white right half, equal grey squares centred in each;
    the left square should look lighter."""
    _check_N(N)
    square = _scaled(40, N) if square is None else int(square)
    if not 0 < square < N // 2:
        raise InvalidParameterError("square must fit inside half the image")
    img = np.zeros((N, N))
    img[:, N // 2 :] = 1.0
    r0 = N // 2 - square // 2
    masks = []
    for cx in (N // 4, N // 2 + N // 4):
        m = np.zeros((N, N), dtype=bool)
        c0 = cx - square // 2
        m[r0 : r0 + square, c0 : c0 + square] = True
        img[m] = GREY
        masks.append(m)
    targets = [
        TargetRegion("left_square", masks[0], "lighter-than", "right_square"),
        TargetRegion("right_square", masks[1]),
    ]
    return Stimulus("sbc", img, targets, {"square": square})


def make_luminance(N: int = 200, radius: float | None = None) -> Stimulus:
    """Left-to-right ramp from 0 to 1 with four grey discs on a 2 x 2 layout;
    each left disc should look lighter than its right counterpart."""
    _check_N(N)
    radius = _scaled(12, N) if radius is None else float(radius)
    img = np.tile(np.linspace(0.0, 1.0, N), (N, 1))
    rows, cols = np.mgrid[0:N, 0:N]
    centres = {
        "top_left": (N // 4, N // 4),
        "top_right": (N // 4, 3 * N // 4),
        "bottom_left": (3 * N // 4, N // 4),
        "bottom_right": (3 * N // 4, 3 * N // 4),
    }
    masks = {}
    for label, (r, c) in centres.items():
        m = (rows + 0.5 - (r + 0.5)) ** 2 + (cols + 0.5 - (c + 0.5)) ** 2 <= radius**2
        img[m] = GREY
        masks[label] = m
    targets = [
        TargetRegion("top_left", masks["top_left"], "lighter-than", "top_right"),
        TargetRegion("top_right", masks["top_right"]),
        TargetRegion("bottom_left", masks["bottom_left"], "lighter-than", "bottom_right"),
        TargetRegion("bottom_right", masks["bottom_right"]),
    ]
    return Stimulus("luminance", img, targets, {"radius": radius})


def oriented_grating(N: int, theta: float, period: float, phase: float = 0.0) -> np.ndarray:
    """Binary grating whose stripes run along direction ``theta`` (from the x axis)."""
    x, y = coordinates(N)
    u = -x * math.sin(theta) + y * math.cos(theta) + phase
    return square_wave(u, period)


def _balance(mask: np.ndarray, other: np.ndarray) -> np.ndarray:
    """Drop pixels of ``mask`` farthest from the centre column until it is no
    larger than ``other``, so paired targets have equal pixel counts."""
    surplus = int(mask.sum() - other.sum())
    if surplus <= 0:
        return mask
    N = mask.shape[1]
    rows, cols = np.nonzero(mask)
    # stable order: farthest from centre first, then by row and column
    order = np.lexsort((cols, rows, -np.abs(cols + 0.5 - N / 2.0)))
    out = mask.copy()
    out[rows[order[:surplus]], cols[order[:surplus]]] = False
    return out


def make_grating_induction(
    N: int = 200,
    theta_rel: float = math.pi / 2,
    bar_halfwidth_px: int | None = None,
    period: float | None = None,
) -> Stimulus:
    """Grating at ``theta_rel`` to a horizontal grey bar through the centre.

    Bar pixels are split by the value the background grating would have
    there: cells continuing white stripes should look darker than cells
    continuing black ones (counterphase induction).
    """
    _check_N(N)
    if not 0 < theta_rel <= math.pi / 2 + 1e-12:
        raise InvalidParameterError(f"theta_rel must lie in (0, pi/2], got {theta_rel}")
    hw = _scaled(8, N) if bar_halfwidth_px is None else int(bar_halfwidth_px)
    if not 0 < 2 * hw < N:
        raise InvalidParameterError("bar wider than the image")
    if period is None:
        period = even_divisor_period(24 * N / 200.0, N)
    # phase puts stripe edges between pixels for the vertical case
    phase = 0.5 * math.sin(theta_rel) + N / 2.0
    grating = oriented_grating(N, theta_rel, period, phase)
    img = grating.copy()
    bar = np.zeros((N, N), dtype=bool)
    bar[N // 2 - hw : N // 2 + hw, :] = True
    img[bar] = GREY

    core = bar.copy()
    margin = N // 8
    core[:, :margin] = False
    core[:, N - margin :] = False
    under_white = _balance(core & (grating == 1.0), core & (grating == 0.0))
    under_black = _balance(core & (grating == 0.0), under_white)
    targets = [
        TargetRegion("bar", core),
        TargetRegion("bar_under_white", under_white, "counterphase-with", "bar_under_black"),
        TargetRegion("bar_under_black", under_black),
    ]
    meta = {
        "theta_rel": theta_rel,
        "bar_halfwidth": hw,
        "period": period,
        "bar_rows": (N // 2 - hw, N // 2 + hw),
        "background": grating,
    }
    return Stimulus("grating", img, targets, meta)


def make_poggendorff(
    N: int = 200,
    bar_halfwidth_px: int | None = None,
    stripe_angle: float = math.pi / 4,
    period: float | None = None,
) -> Stimulus:
    """Oblique grating interrupted by a wide horizontal grey bar.

    Stripes run up and to the right at ``stripe_angle``.  The marked black
    stripe meets the bar's bottom edge near the centre; ``meta["geometric_col"]``
    is the column where its straight continuation meets the top edge.
    """
    _check_N(N)
    if not 0 < stripe_angle < math.pi / 2:
        raise InvalidParameterError("stripe_angle must lie in (0, pi/2)")
    hw = _scaled(24, N) if bar_halfwidth_px is None else int(bar_halfwidth_px)
    if not 0 < 2 * hw < N:
        raise InvalidParameterError("bar wider than the image")
    s, c = math.sin(stripe_angle), math.cos(stripe_angle)
    if period is None:
        # horizontal repeat snapped to divide N, so rows wrap seamlessly
        period = even_divisor_period(24 * N / 200.0 / s, N) * s
    period = float(period)

    top, bottom = N // 2 - hw, N // 2 + hw  # bar rows [top, bottom)
    y_bottom = N / 2.0 - bottom  # y of the bar's bottom edge
    y_top = N / 2.0 - top
    # continuation straddles x = 0; the half-pixel shift keeps stripe edges
    # off pixel centres so every stripe is symmetric about its centreline
    x_in = 0.5 - (y_top - y_bottom) * c / (2 * s)
    x, y = coordinates(N)
    # signed distance to the marked black stripe's centreline through (x_in, y_bottom)
    v = -(x - x_in) * s + (y - y_bottom) * c
    grating = 1.0 - square_wave(v + period / 4.0, period)
    img = grating.copy()
    bar = np.zeros((N, N), dtype=bool)
    bar[top:bottom, :] = True
    img[bar] = GREY

    x_out = x_in + (y_top - y_bottom) * c / s
    geometric_col = x_out + N / 2.0 - 0.5
    entry_col = x_in + N / 2.0 - 0.5

    dist = np.abs(v)
    half = period / 4.0
    band_rows = max(2, hw // 2)
    lower = np.zeros((N, N), dtype=bool)
    lower[bottom : bottom + band_rows, :] = True
    upper = np.zeros((N, N), dtype=bool)
    upper[top - band_rows : top, :] = True
    marked = lower & (dist < half) & (grating == 0.0)
    geometric = upper & (dist < half) & (grating == 0.0)
    targets = [
        TargetRegion("marked_lower", marked),
        TargetRegion("geometric_upper", geometric),
    ]
    meta = {
        "bar_halfwidth": hw,
        "stripe_angle": stripe_angle,
        "period": period,
        "bar_rows": (top, bottom),
        "entry_col": entry_col,
        "geometric_col": geometric_col,
        "background": grating,
    }
    return Stimulus("poggendorff", img, targets, meta)


GENERATORS = {
    "white": make_white,
    "sbc": make_sbc,
    "luminance": make_luminance,
    "grating": make_grating_induction,
    "poggendorff": make_poggendorff,
}


def make_stimulus(name: str, N: int = 200, **kwargs) -> Stimulus:
    try:
        gen = GENERATORS[name]
    except KeyError:
        raise InvalidParameterError(f"unknown stimulus {name!r}; choose from {sorted(GENERATORS)}") from None
    return gen(N, **kwargs)
