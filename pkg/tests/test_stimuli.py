import csv
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from corticalwc.dynamics import ModelParams, run
from corticalwc.errors import InvalidParameterError
from corticalwc.images import quantize, read_png
from corticalwc.stimuli import (
    GENERATORS,
    TargetRegion,
    even_divisor_period,
    make_grating_induction,
    make_luminance,
    make_poggendorff,
    make_sbc,
    make_stimulus,
    make_white,
)

DATA = Path(__file__).parent / "data"


@pytest.mark.parametrize("name", sorted(GENERATORS))
@pytest.mark.parametrize("N", [64, 100, 200])
def test_targets_valid_and_paired_inputs_identical(name, N):
    stim = make_stimulus(name, N)
    assert stim.image.shape == (N, N)
    assert stim.image.min() >= 0 and stim.image.max() <= 1
    for a, b, rel in stim.pairs():
        assert not (a.mask & b.mask).any()
        assert a.mask.sum() == b.mask.sum()
        assert stim.image[a.mask].mean() == stim.image[b.mask].mean()


@pytest.mark.parametrize("name", sorted(GENERATORS))
def test_generators_are_deterministic(name):
    assert np.array_equal(make_stimulus(name, 100).image, make_stimulus(name, 100).image)


@pytest.mark.parametrize("name", sorted(GENERATORS))
def test_small_images_rejected(name):
    with pytest.raises(InvalidParameterError):
        make_stimulus(name, 32)


def test_unknown_stimulus_rejected():
    with pytest.raises(InvalidParameterError):
        make_stimulus("hermann", 100)


def test_empty_target_rejected():
    with pytest.raises(InvalidParameterError):
        TargetRegion("x", np.zeros((4, 4), bool))


@pytest.mark.parametrize(
    "tag,name,kw",
    [
        ("white", "white", {}),
        ("sbc", "sbc", {}),
        ("luminance", "luminance", {}),
        ("grating_pi2", "grating", {"theta_rel": math.pi / 2}),
        ("grating_pi3", "grating", {"theta_rel": math.pi / 3}),
        ("poggendorff", "poggendorff", {}),
    ],
)
def test_matches_pinned_render(tag, name, kw):
    pinned = read_png(DATA / f"{tag}_200.png")
    assert np.array_equal(quantize(make_stimulus(name, 200, **kw).image), quantize(pinned))


@given(st.floats(2, 60), st.sampled_from([64, 96, 100, 120, 200]))
def test_even_divisor_period(target, N):
    p = even_divisor_period(target, N)
    assert p % 2 == 0 and N % p == 0


def test_white_geometry():
    stim = make_white(200)
    period = stim.meta["period"]
    assert period == 24 or 200 % period == 0
    left, right = stim.target("left_patch"), stim.target("right_patch")
    assert stim.image[left.mask].mean() == stim.image[right.mask].mean() == 0.5
    r0, c0, r1, c1 = left.bbox
    assert stim.image[r0, c0 - 1] == 0 and stim.image[r0 - 1, c0] == 1  # white bar, black neighbour
    r0, c0, r1, c1 = right.bbox
    assert stim.image[r0 - 1, c0] == 0
    assert left.bbox[1] < 100 < right.bbox[1]


def test_white_rejects_bad_period():
    with pytest.raises(InvalidParameterError):
        make_white(100, period=7)


def test_sbc_halves_and_squares():
    stim = make_sbc(200)
    outside = ~(stim.target("left_square").mask | stim.target("right_square").mask)
    cols = np.broadcast_to(np.arange(200), (200, 200))
    assert np.all(stim.image[outside & (cols < 100)] == 0)
    assert np.all(stim.image[outside & (cols >= 100)] == 1)


def test_luminance_ramp_and_discs():
    stim = make_luminance(200)
    assert stim.image[0, 0] == 0 and stim.image[0, -1] == 1
    sizes = {t.label: int(t.mask.sum()) for t in stim.targets}
    assert len(set(sizes.values())) == 1
    for t in stim.targets:
        assert np.all(stim.image[t.mask] == 0.5)


def test_grating_bar_and_vertical_stripes():
    stim = make_grating_induction(200, math.pi / 2)
    top, bottom = stim.meta["bar_rows"]
    assert np.all(stim.image[top:bottom] == 0.5)
    assert np.all(stim.image[:top] == stim.image[0])  # columns constant: vertical stripes
    bg = stim.meta["background"]
    assert np.all(bg[stim.target("bar_under_white").mask] == 1)
    assert np.all(bg[stim.target("bar_under_black").mask] == 0)


def test_grating_oblique_stripes_tilt():
    stim = make_grating_induction(200, math.pi / 3)
    assert not np.array_equal(stim.image[0], stim.image[10])


def test_grating_rejects_bad_angle():
    with pytest.raises(InvalidParameterError):
        make_grating_induction(100, theta_rel=2.0)


def test_poggendorff_geometry():
    stim = make_poggendorff(200)
    m = stim.meta
    top, bottom = m["bar_rows"]
    assert np.all(stim.image[top:bottom] == 0.5)
    bg = m["background"]
    # the marked black stripe crosses the bottom edge at entry_col and the top edge at geometric_col
    assert bg[bottom, int(round(m["entry_col"] - 0.5 * math.cos(m["stripe_angle"]) / math.sin(m["stripe_angle"])))] == 0
    assert bg[top - 1, int(round(m["geometric_col"] + 0.5))] == 0
    # outside the bar the image is the collinear background
    assert np.array_equal(stim.image[:top], bg[:top]) and np.array_equal(stim.image[bottom:], bg[bottom:])
    assert np.all(bg[stim.target("marked_lower").mask] == 0)
    assert np.all(bg[stim.target("geometric_upper").mask] == 0)


def test_poggendorff_tiles_the_torus():
    bg = make_poggendorff(200).meta["background"]
    assert np.array_equal(np.roll(bg, -1, axis=1)[:, -1], bg[:, 0])
    x = np.arange(200)
    period_cols = make_poggendorff(200).meta["period"] / math.sin(math.pi / 4)
    assert 200 % round(period_cols) == 0 and abs(period_cols - round(period_cols)) < 1e-9
    assert np.array_equal(bg[:, x], np.roll(bg, int(round(period_cols)), axis=1))


def test_pinned_white_profile():
    with open(DATA / "white_lhe2d_n64_midrow.csv") as fh:
        pinned = np.array([float(r["value"]) for r in csv.DictReader(fh)])
    stim = make_stimulus("white", 64)
    out, _ = run("LHE2D", stim.image, ModelParams(sigma_mu=3.0, sigma_omega=8.0))
    assert np.abs(out[32] - pinned).max() <= 1e-9
