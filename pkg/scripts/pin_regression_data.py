"""Regenerate the pinned regression files under tests/data.

Run only after a deliberate, reviewed change to stimuli or dynamics.
"""

import csv
import math
from pathlib import Path

from corticalwc.dynamics import ModelParams, run
from corticalwc.images import write_png
from corticalwc.stimuli import make_stimulus

DATA = Path(__file__).resolve().parent.parent / "tests" / "data"

RENDERS = {
    "white": {},
    "sbc": {},
    "luminance": {},
    "grating_pi2": {"theta_rel": math.pi / 2},
    "grating_pi3": {"theta_rel": math.pi / 3},
    "poggendorff": {},
}


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    for tag, kw in RENDERS.items():
        name = tag.split("_")[0]
        write_png(DATA / f"{tag}_200.png", make_stimulus(name, 200, **kw).image)
    stim = make_stimulus("white", 64)
    out, _ = run("LHE2D", stim.image, ModelParams(sigma_mu=3.0, sigma_omega=8.0))
    with open(DATA / "white_lhe2d_n64_midrow.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["position", "value"])
        for i, v in enumerate(out[32]):
            w.writerow([i, repr(float(v))])


if __name__ == "__main__":
    main()
