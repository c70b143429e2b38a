"""Line profiles, target comparisons, induced-grating amplitude and the
Poggendorff continuation offset.

Every verdict depends only on orderings and ratios of ranges, so it is
unchanged by an affine rescaling of the image with positive gain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .grid import check_image
from .stimuli import Stimulus, TargetRegion

DEFAULT_MARGIN = 1e-4
NOISE_FLOOR = 1e-3
# a band displaced by less than half a pixel stays on the continuation's pixel
PIXEL_RESOLUTION = 0.5


@dataclass(frozen=True)
class Profile:
    axis: str
    index: int
    values: np.ndarray


@dataclass(frozen=True)
class Verdict:
    outcome: str  # "a-darker" | "a-lighter" | "no-effect"
    margin: float  # mean(b) - mean(a)

    def satisfies(self, relation: str) -> bool:
        if relation == "darker-than":
            return self.outcome == "a-darker"
        if relation in ("lighter-than",):
            return self.outcome == "a-lighter"
        if relation == "counterphase-with":
            # a continues white stripes, so it must come out darker
            return self.outcome == "a-darker"
        raise InvalidParameterError(f"unknown relation {relation!r}")


def line_profile(img, axis: str, index: int) -> Profile:
    img = check_image(img)
    N = img.shape[0]
    if not 0 <= index < N:
        raise InvalidParameterError(f"profile index {index} out of bounds for N={N}")
    if axis == "row":
        values = img[index, :].copy()
    elif axis == "column":
        values = img[:, index].copy()
    else:
        raise InvalidParameterError(f"axis must be 'row' or 'column', got {axis!r}")
    return Profile(axis, index, values)


def compare_targets(img, a: TargetRegion, b: TargetRegion, threshold: float = DEFAULT_MARGIN) -> Verdict:
    """Strict comparison of region means; differences within ``threshold`` are no effect."""
    img = check_image(img)
    if a.mask.shape != img.shape or b.mask.shape != img.shape:
        raise InvalidParameterError("target masks do not match the image shape")
    diff = float(img[b.mask].mean() - img[a.mask].mean())
    if diff > threshold:
        return Verdict("a-darker", diff)
    if diff < -threshold:
        return Verdict("a-lighter", diff)
    return Verdict("no-effect", diff)


def stimulus_verdicts(img, stim: Stimulus, threshold: float = DEFAULT_MARGIN) -> list[dict]:
    """One row per related target pair: labels, relation, verdict, margin, pass flag."""
    rows = []
    for a, b, rel in stim.pairs():
        v = compare_targets(img, a, b, threshold)
        rows.append(
            {"a": a.label, "b": b.label, "relation": rel, "verdict": v.outcome, "margin": v.margin, "ok": v.satisfies(rel)}
        )
    return rows


def bar_profile(img, bar: TargetRegion) -> np.ndarray:
    """Mean over the bar's rows of each column the bar covers."""
    img = check_image(img)
    cols = np.nonzero(bar.mask.any(axis=0))[0]
    sub = np.where(bar.mask, img, np.nan)[:, cols]
    return np.nanmean(sub, axis=0)


def grating_amplitude(img, bar: TargetRegion) -> float:
    """Peak-to-trough range of the along-bar mean profile."""
    prof = bar_profile(img, bar)
    return float(prof.max() - prof.min())


@dataclass(frozen=True)
class Completion:
    """Outcome of following the marked stripe across the bar.

    ``kind`` is ``"perceptual"`` when a contrast-inverted band continues the
    stripe, ``"geometric"`` when the bar only carries the stripes in phase
    (inpainting-type continuation), and ``"none"`` when the bar is flat.
    ``offset`` is defined for perceptual completions only.  A perceptual
    band within ``resolution`` of the continuation counts as no offset.
    """

    kind: str
    offset: float  # px, negative = left of the geometric continuation
    column: float | None = None
    correlation: float = 0.0
    strength: float = 0.0

    @property
    def found(self) -> bool:
        return self.kind == "perceptual"

    def flushed_left(self, resolution: float = PIXEL_RESOLUTION) -> bool:
        return self.found and self.offset <= -resolution

    def shift(self, resolution: float = PIXEL_RESOLUTION) -> str:
        """``"left"``, ``"right"`` or ``"none"`` at the given resolution."""
        if not self.found or abs(self.offset) < resolution:
            return "none"
        return "left" if self.offset < 0 else "right"


def _aligned_rows(img: np.ndarray, rows, centres, d: np.ndarray) -> np.ndarray:
    """Mean over ``rows`` of each row sampled at ``centre + d`` (periodic, linear)."""
    N = img.shape[1]
    cols = np.arange(N)
    xs = np.concatenate([cols - N, cols, cols + N])
    acc = np.zeros_like(d)
    for r, c in zip(rows, centres):
        acc += np.interp(np.mod(c + d, N), xs, np.tile(img[r], 3))
    return acc / len(rows)


def poggendorff_offset(
    img,
    stim: Stimulus,
    window_frac: float = 0.25,
    band_rows: int | None = None,
    noise_floor: float = NOISE_FLOOR,
) -> Completion:
    """Where the marked lower stripe re-emerges inside the bar, relative to geometry.

    Each row of the band just below the bar's top edge is sampled relative to
    the straight continuation of the marked stripe at that row, so a band
    lying exactly on the continuation reads as offset 0 at every depth.  The
    band profile is contrast-inverted when it correlates negatively with the
    stripes just above the bar; its light band then continues the (black)
    marked stripe.  The band is the above-mean run of the profile holding the
    brightest sample within ``+-window_frac`` bar widths of the continuation,
    and its centre is the contrast-weighted centroid of that run.
    """
    img = check_image(img)
    meta = stim.meta
    top, bottom = meta["bar_rows"]
    width = bottom - top
    band_rows = max(2, width // 6) if band_rows is None else band_rows
    if not 1 <= band_rows <= width:
        raise InvalidParameterError(f"band_rows must lie in [1, {width}], got {band_rows}")
    geo = float(meta["geometric_col"])
    slope = (geo - float(meta["entry_col"])) / width  # columns per row, upwards
    N = img.shape[1]

    def centre(r):
        return geo - slope * (r + 0.5 - top)

    d = np.arange(N, dtype=float) - N // 2
    inner_rows = range(top, top + band_rows)
    outer_rows = range(max(0, top - band_rows), top)
    prof = _aligned_rows(img, inner_rows, [centre(r) for r in inner_rows], d)
    ref = _aligned_rows(stim.image, outer_rows, [centre(r) for r in outer_rows], d)

    rng = float(prof.max() - prof.min())
    if rng < noise_floor:
        return Completion("none", float("nan"), None, 0.0, rng)
    pc, rc = prof - prof.mean(), ref - ref.mean()
    denom = float(np.linalg.norm(pc) * np.linalg.norm(rc))
    corr = float(pc @ rc) / denom if denom > 0 else 0.0
    if corr >= 0.0:
        return Completion("geometric", float("nan"), None, corr, rng)

    # the band is the above-mean run holding the brightest sample in the window
    above = pc > 0.0
    inside = np.abs(d) <= window_frac * width
    if not (above & inside).any():
        return Completion("geometric", float("nan"), None, corr, rng)
    peak = int(np.flatnonzero(inside)[np.argmax(pc[inside])])
    run = [peak]
    for step in (-1, 1):
        i = peak + step
        while above[i % N] and len(run) < N:
            run.append(i)
            i += step
    idx = np.array(run)
    w = pc[idx % N]
    off = float((w * (idx - N // 2)).sum() / w.sum())
    if abs(off) > window_frac * width:
        return Completion("geometric", float("nan"), None, corr, rng)
    return Completion("perceptual", off, geo + off, corr, rng)
