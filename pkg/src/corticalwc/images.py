"""8-bit grayscale PNG and ASCII PGM (P2) reading and writing.

Values map linearly [0, 1] <-> [0, 255] with round-half-up on write (after
snapping to 1e-6 of a level); reading
divides by 255.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import InvalidParameterError


def quantize(f: np.ndarray) -> np.ndarray:
    f = np.clip(np.asarray(f, dtype=float), 0.0, 1.0)
    # snap to 1e-6 of a level so rounding noise cannot flip a half step
    return np.floor(np.round(f * 255.0, 6) + 0.5).astype(np.uint8)


def dequantize(q: np.ndarray) -> np.ndarray:
    return np.asarray(q, dtype=float) / 255.0


def write_png(path, f) -> None:
    # pnginfo-free save keeps the file byte-identical across runs
    PILImage.fromarray(quantize(f), mode="L").save(Path(path), format="PNG", optimize=False)


def read_png(path) -> np.ndarray:
    with PILImage.open(Path(path)) as im:
        return dequantize(np.array(im.convert("L")))


def write_pgm(path, f) -> None:
    q = quantize(f)
    h, w = q.shape
    lines = ["P2", f"{w} {h}", "255"]
    lines += [" ".join(str(v) for v in row) for row in q]
    Path(path).write_text("\n".join(lines) + "\n")


def read_pgm(path) -> np.ndarray:
    tokens = []
    for line in Path(path).read_text().splitlines():
        tokens += line.split("#", 1)[0].split()
    if not tokens or tokens[0] != "P2":
        raise InvalidParameterError(f"{path}: not an ASCII PGM (P2) file")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    data = np.array([int(t) for t in tokens[4 : 4 + w * h]], dtype=float)
    if data.size != w * h:
        raise InvalidParameterError(f"{path}: truncated pixel data")
    return data.reshape(h, w) / maxval


def write_image(path, f) -> None:
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        write_pgm(path, f)
    else:
        write_png(path, f)


def read_image(path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return read_pgm(path)
    return read_png(path)
