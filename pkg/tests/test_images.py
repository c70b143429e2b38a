import numpy as np
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from corticalwc.images import dequantize, quantize, read_image, read_pgm, write_image


def test_quantize_rounds_half_up():
    assert quantize(np.array([0.5 / 255, 1.5 / 255, 0.5])).tolist() == [1, 2, 128]


def test_quantize_clips():
    assert quantize(np.array([-0.2, 1.3])).tolist() == [0, 255]


@given(arrays(np.uint8, (5, 5)))
def test_levels_survive_round_trip(q):
    assert np.array_equal(quantize(dequantize(q)), q)


@given(arrays(float, (6, 6), elements=st.floats(0, 1)), st.sampled_from([".png", ".pgm"]))
def test_file_round_trip(tmp_path_factory, f, suffix):
    path = tmp_path_factory.mktemp("img") / f"x{suffix}"
    write_image(path, f)
    assert np.array_equal(read_image(path), dequantize(quantize(f)))


def test_pgm_comments_are_ignored(tmp_path):
    p = tmp_path / "c.pgm"
    p.write_text("P2\n# a comment\n2 1\n255\n0 255 # trailing\n")
    assert read_pgm(p).tolist() == [[0.0, 1.0]]


def test_png_bytes_are_deterministic(tmp_path):
    f = np.random.default_rng(0).random((16, 16))
    write_image(tmp_path / "a.png", f)
    write_image(tmp_path / "b.png", f)
    assert (tmp_path / "a.png").read_bytes() == (tmp_path / "b.png").read_bytes()
