"""Brightness illusions and grating induction with both LHE models.

    python scripts/reproduce_illusions.py [--n 100] [--k 12] [--out results/illusions]

Writes one run directory per stimulus and model and prints the verdicts.
"""

import argparse
import math
from pathlib import Path

from corticalwc.cli import ExperimentConfig, cmd_run
from corticalwc.dynamics import ModelParams

ILLUSIONS = ("white", "sbc", "luminance")
GRATINGS = {"grating_pi2": math.pi / 2, "grating_pi3": math.pi / 3}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--k", type=int, default=12)
    ap.add_argument("--out", type=Path, default=Path("results/illusions"))
    args = ap.parse_args()

    plain = ModelParams(n_orient=args.k, sigma_mu=3.0, sigma_omega=8.0, lam=0.5)
    grating = ModelParams(n_orient=args.k, sigma_mu=10.0, sigma_omega=5.0, lam=0.5)
    jobs = [(s, {}, plain) for s in ILLUSIONS] + [(tag, {"theta_rel": th}, grating) for tag, th in GRATINGS.items()]
    for tag, kw, params in jobs:
        for model in ("LHE2D", "LHE3D"):
            cfg = ExperimentConfig(stimulus=tag.split("_")[0], n=args.n, model=model, params=params,
                                   stim_params=kw, out_dir=args.out / f"{tag}_{model}")
            code, _, rows, trace = cmd_run(cfg)
            for r in rows:
                print(f"{tag:12s} {model:6s} {r[0]:10s} {r[1]:16s} {r[4]:10s} {r[5]:+.4f}")
            if code:
                print(f"{tag} {model}: not converged after {trace.iterations} iterations")


if __name__ == "__main__":
    main()
