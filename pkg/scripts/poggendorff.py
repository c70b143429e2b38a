"""Poggendorff completion with LHE-3D and WC-3D, then the lateral-scale sweep.

    python scripts/poggendorff.py [--n 100] [--k 12] [--out results/poggendorff]

Offsets are in pixels; negative means left of the straight continuation.
"""

import argparse
from pathlib import Path

from corticalwc.cli import ExperimentConfig, cmd_run, cmd_sweep
from corticalwc.dynamics import ModelParams


def completion(rows):
    kind = next(r for r in rows if r[0] == "completion")
    shift = next(r for r in rows if r[0] == "completion_shift")
    return kind[4], shift[4], kind[5]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--k", type=int, default=12)
    ap.add_argument("--sweep", nargs="+", default=["5", "6", "7", "10"], help="sigma_omega values")
    ap.add_argument("--out", type=Path, default=Path("results/poggendorff"))
    args = ap.parse_args()

    p = ModelParams(n_orient=args.k, sigma_mu=3.0, sigma_omega=10.0, lam=0.5)
    for model in ("LHE3D", "WC3D"):
        cfg = ExperimentConfig(stimulus="poggendorff", n=args.n, model=model, params=p, out_dir=args.out / model)
        _, _, rows, _ = cmd_run(cfg)
        kind, shift, off = completion(rows)
        print(f"{model:6s} {kind:10s} shift={shift:5s} offset={off:+.3f}")

    p = ModelParams(n_orient=args.k, sigma_mu=2.0, lam=0.8)
    cfg = ExperimentConfig(stimulus="poggendorff", n=args.n, model="LHE3D", params=p, out_dir=args.out / "sweep")
    _, root, table = cmd_sweep(cfg, "sigma_omega", args.sweep)
    for r in table:
        if r[4] == "completion_shift":
            print(f"sigma_omega={r[1]:<5g} shift={r[8]:5s} offset={r[9]:+.3f}")
    print(root / "sweep.csv")


if __name__ == "__main__":
    main()
