"""Command-line experiment driver.

    corticalwc gen NAME [--n N] [--set key=value ...]
    corticalwc run [--config FILE] [--stimulus NAME] [--model M] [model flags]
    corticalwc sweep PARAM V1 [V2 ...] [run options]
    corticalwc check [--bank FILE]

Configs are INI files with ``[experiment]``, ``[stimulus]``, ``[params]`` and
``[output]`` sections; command-line flags override config keys.  Output goes
to ``--out`` or, failing that, under ``$CORTICALWC_OUT`` (default
``./results``).  Exit codes: 0 ok, 2 usage error, 3 non-convergence,
4 invariant failure.
"""

from __future__ import annotations

import argparse
import ast
import configparser
import csv
import io
import os
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import grating_amplitude, line_profile, poggendorff_offset, stimulus_verdicts
from .dynamics import (
    MODELS,
    ModelParams,
    interaction_fast,
    interaction_naive,
    jacobian_probe,
    mixed_regime_witness,
    rhs_jacobian,
    rhs_lhe,
    rhs_wc,
    run,
    small_kernel,
)
from .errors import DegenerateStateError, InvalidParameterError
from .grid import circular_convolve_direct, conv2_periodic, conv3_periodic
from .images import write_image
from .lifting import build_cake_bank, lift, load_bank, project
from .stimuli import GENERATORS, Stimulus, make_stimulus

EXIT_OK, EXIT_USAGE, EXIT_NONCONVERGED, EXIT_INVARIANT = 0, 2, 3, 4
OUT_ENV = "CORTICALWC_OUT"

_PARAM_NAMES = {f.name for f in fields(ModelParams)}
_INT_PARAMS = {"max_iters", "poly_degree", "n_orient", "bw", "max_dt_halvings"}


class UsageError(Exception):
    pass


@dataclass
class ExperimentConfig:
    stimulus: str = "white"
    n: int = 200
    stim_params: dict = field(default_factory=dict)
    model: str = "LHE3D"
    params: ModelParams = field(default_factory=ModelParams)
    interaction: str = "fast"
    out_dir: Path | None = None
    png: bool = True
    pgm: bool = False
    csv: bool = True
    trace: bool = True

    def __post_init__(self):
        if self.stimulus not in GENERATORS:
            raise UsageError(f"unknown stimulus {self.stimulus!r}; choose from {sorted(GENERATORS)}")
        if self.model not in MODELS:
            raise UsageError(f"unknown model {self.model!r}; choose from {list(MODELS)}")
        if self.interaction not in ("fast", "naive"):
            raise UsageError(f"interaction must be 'fast' or 'naive', got {self.interaction!r}")

    def resolved_out(self, leaf: str) -> Path:
        if self.out_dir is not None:
            return Path(self.out_dir)
        return Path(os.environ.get(OUT_ENV, "results")) / leaf


# -- value parsing ------------------------------------------------------------


def _literal(text: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text


def _param_value(name: str, text) -> float | int | None:
    if name not in _PARAM_NAMES:
        raise UsageError(f"unknown model parameter {name!r}")
    if name == "beta_override" and str(text).lower() in ("", "none"):
        return None
    try:
        return int(text) if name in _INT_PARAMS else float(text)
    except ValueError:
        raise UsageError(f"bad value {text!r} for {name}") from None


def _key_values(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise UsageError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = _literal(v.strip())
    return out


# -- config assembly ----------------------------------------------------------


_FLAG_PARAMS = ("lam", "nu", "alpha", "sigma_mu", "sigma_omega", "sigma_orient", "dt", "tau",
                "max_iters", "poly_degree", "bw")


def _add_model_flags(ap: argparse.ArgumentParser) -> None:
    ap.add_argument("--config", type=Path, help="INI config file")
    ap.add_argument("--stimulus", choices=sorted(GENERATORS))
    ap.add_argument("--model", choices=MODELS)
    ap.add_argument("--n", type=int, help="image side in pixels")
    ap.add_argument("--k", type=int, dest="n_orient", help="number of orientation channels")
    for name in _FLAG_PARAMS:
        ap.add_argument("--" + name.replace("_", "-"), dest=name, type=str)
    ap.add_argument("--set", action="append", metavar="KEY=VALUE", help="stimulus parameter")
    ap.add_argument("--interaction", choices=("fast", "naive"))
    ap.add_argument("--out", type=Path, help="output directory")
    ap.add_argument("--pgm", action="store_true", default=None, help="also write PGM images")
    ap.add_argument("--no-png", action="store_true", help="skip PNG images")
    ap.add_argument("--no-csv", action="store_true", help="skip CSV summaries and profiles")
    ap.add_argument("--no-trace", action="store_true", help="skip the trace CSV")


def load_config(path: Path | None) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    if path is not None:
        if not Path(path).is_file():
            raise UsageError(f"config file {path} not found")
        cp.read(path)
    return cp


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    cp = load_config(getattr(args, "config", None))
    exp = cp["experiment"] if cp.has_section("experiment") else {}
    stim_params = {k: _literal(v) for k, v in (cp["stimulus"].items() if cp.has_section("stimulus") else [])}
    stim_params.update(_key_values(getattr(args, "set", None)))
    raw_params = dict(cp["params"].items()) if cp.has_section("params") else {}
    for name in _FLAG_PARAMS + ("n_orient",):
        v = getattr(args, name, None)
        if v is not None:
            raw_params[name] = v
    params = ModelParams(**{k: _param_value(k, v) for k, v in raw_params.items()})
    outp = cp["output"] if cp.has_section("output") else {}

    def flag(name, default):
        return outp.getboolean(name, default) if hasattr(outp, "getboolean") else default

    out_dir = args.out if getattr(args, "out", None) is not None else outp.get("dir") if outp else None
    return ExperimentConfig(
        stimulus=args.stimulus or exp.get("stimulus", "white"),
        n=args.n if args.n is not None else int(exp.get("n", 200)),
        stim_params=stim_params,
        model=args.model or exp.get("model", "LHE3D"),
        params=params,
        interaction=args.interaction or exp.get("interaction", "fast"),
        out_dir=Path(out_dir) if out_dir else None,
        png=False if args.no_png else flag("png", True),
        pgm=True if args.pgm else flag("pgm", False),
        csv=False if args.no_csv else flag("csv", True),
        trace=False if args.no_trace else flag("trace", True),
    )


# -- writers ------------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    path.write_text(buf.getvalue())


def write_targets(path: Path, stim: Stimulus) -> None:
    rows = []
    for t in stim.targets:
        r0, c0, r1, c1 = t.bbox
        rows.append([t.label, r0, c0, r1, c1, int(t.mask.sum()), t.relation or "", t.other or ""])
    _write_csv(path, ["label", "row_min", "col_min", "row_max", "col_max", "n_pixels", "relation", "other"], rows)


def _write_images(cfg: ExperimentConfig, out: Path, stem: str, img) -> None:
    if cfg.png:
        write_image(out / f"{stem}.png", img)
    if cfg.pgm:
        write_image(out / f"{stem}.pgm", img)


def summary_rows(img, stim: Stimulus) -> list[list]:
    """``[metric, a, b, relation, outcome, value]`` rows for one output image."""
    rows = [["verdict", v["a"], v["b"], v["relation"], v["verdict"], v["margin"]] for v in stimulus_verdicts(img, stim)]
    if stim.name == "grating":
        rows.append(["amplitude", "bar", "", "", "", grating_amplitude(img, stim.target("bar"))])
    if stim.name == "poggendorff":
        c = poggendorff_offset(img, stim)
        rows.append(["completion", "marked_lower", "geometric_upper", "", c.kind, c.offset])
        rows.append(["completion_shift", "marked_lower", "geometric_upper", "", c.shift(), c.offset])
        rows.append(["completion_correlation", "marked_lower", "geometric_upper", "", c.kind, c.correlation])
    return rows


_SUMMARY_HEADER = ["metric", "a", "b", "relation", "outcome", "value"]


def _manifest(cfg: ExperimentConfig, trace) -> str:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp["experiment"] = {"stimulus": cfg.stimulus, "n": str(cfg.n), "model": cfg.model,
                        "interaction": cfg.interaction, "version": __version__}
    cp["stimulus"] = {k: repr(v) for k, v in sorted(cfg.stim_params.items())}
    cp["params"] = {k: _fmt(v) for k, v in asdict(cfg.params).items()}
    derived = {
        "beta": _fmt(cfg.params.beta),
        "iterations": str(trace.iterations),
        "converged": _fmt(trace.converged),
        "final_update": _fmt(trace.updates[-1]) if trace.updates else "",
        "poly_fit_error": _fmt(trace.poly_fit_error) if trace.poly_fit_error is not None else "",
        "poly_half_width": _fmt(trace.poly_interval) if trace.poly_interval is not None else "",
        "display_scale": _fmt(trace.display_scale),
        "display_offset": _fmt(trace.display_offset),
    }
    cp["derived"] = derived
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


# -- commands -----------------------------------------------------------------


def _make(cfg: ExperimentConfig) -> Stimulus:
    try:
        return make_stimulus(cfg.stimulus, cfg.n, **cfg.stim_params)
    except TypeError as exc:
        raise UsageError(f"bad stimulus parameters: {exc}") from None


def cmd_gen(cfg: ExperimentConfig) -> tuple[int, Path]:
    out = cfg.resolved_out("stimuli")
    out.mkdir(parents=True, exist_ok=True)
    stim = _make(cfg)
    _write_images(cfg, out, stim.name, stim.image)
    write_targets(out / f"{stim.name}.targets", stim)
    return EXIT_OK, out


def cmd_run(cfg: ExperimentConfig, out: Path | None = None):
    """Run one experiment; returns ``(exit_code, out_dir, summary_rows, trace)``."""
    out = cfg.resolved_out(f"{cfg.stimulus}_{cfg.model}") if out is None else out
    out.mkdir(parents=True, exist_ok=True)
    stim = _make(cfg)
    img, trace = run(cfg.model, stim.image, cfg.params, interaction=cfg.interaction)

    _write_images(cfg, out, "stimulus", stim.image)
    _write_images(cfg, out, "output", img)
    write_targets(out / "stimulus.targets", stim)
    rows = summary_rows(img, stim)
    if cfg.csv:
        _write_csv(out / "summary.csv", _SUMMARY_HEADER, rows)
        prof = []
        mid = cfg.n // 2
        for axis in ("row", "column"):
            p_in = line_profile(stim.image, axis, mid).values
            p_out = line_profile(img, axis, mid).values
            prof += [[axis, mid, i, a, b] for i, (a, b) in enumerate(zip(p_in, p_out))]
        _write_csv(out / "profile.csv", ["axis", "index", "position", "input", "output"], prof)
    if cfg.trace:
        energies = trace.energies if trace.energies is not None else [None] * trace.iterations
        _write_csv(
            out / "trace.csv",
            ["iteration", "relative_update", "energy", "dt"],
            [[i + 1, u, "" if e is None else e, d] for i, (u, e, d) in enumerate(zip(trace.updates, energies, trace.dts))],
        )
    (out / "manifest.ini").write_text(_manifest(cfg, trace))
    code = EXIT_OK if trace.converged else EXIT_NONCONVERGED
    return code, out, rows, trace


def cmd_sweep(cfg: ExperimentConfig, parameter: str, values) -> tuple[int, Path, list[list]]:
    if not values:
        raise UsageError("sweep needs at least one value")
    vals = [_param_value(parameter, v) for v in values]
    root = cfg.resolved_out(f"sweep_{cfg.stimulus}_{cfg.model}_{parameter}")
    root.mkdir(parents=True, exist_ok=True)
    table, code = [], EXIT_OK
    for v in vals:
        try:
            sub = ExperimentConfig(**{**cfg.__dict__, "params": cfg.params.with_(**{parameter: v}), "out_dir": None})
        except InvalidParameterError as exc:
            raise UsageError(str(exc)) from None
        rc, _, rows, trace = cmd_run(sub, root / f"{parameter}={_fmt(v)}")
        code = max(code, rc)
        for r in rows:
            table.append([parameter, v, trace.iterations, trace.converged, *r])
    _write_csv(root / "sweep.csv", ["parameter", "setting", "iterations", "converged", *_SUMMARY_HEADER], table)
    return code, root, table


# -- invariant suite ----------------------------------------------------------


def run_checks(bank_path: Path | None = None, seed: int = 0) -> list[tuple[str, bool, str]]:
    rng = np.random.default_rng(seed)
    results = []

    # left inverse of the lift
    bank = load_bank(bank_path) if bank_path is not None else build_cake_bank(64, 12)
    worst = 0.0
    for _ in range(5):
        f = rng.random((bank.N, bank.N))
        worst = max(worst, float(np.linalg.norm(project(lift(f, bank)) - f) / np.linalg.norm(f)))
    results.append(("reconstruction", worst <= 1e-10, f"max relative error {worst:.2e}"))

    # fast interaction and FFT convolution against direct summation
    W = small_kernel((8, 8, 4), 1.5)
    err = max(float(np.abs(interaction_fast(F, W, 5.0) - interaction_naive(F, W, 5.0)).max())
              for F in (rng.uniform(-0.5, 0.5, (8, 8, 4)) for _ in range(3)))
    results.append(("interaction oracle", err <= 5e-2, f"max abs error {err:.2e}"))
    x2, w2 = rng.random((8, 8)), rng.random((8, 8))
    x3, w3 = rng.random((6, 6, 4)), rng.random((6, 6, 4))
    cerr = max(float(np.abs(conv2_periodic(x2, w2) - circular_convolve_direct(x2, w2)).max()),
               float(np.abs(conv3_periodic(x3, w3) - circular_convolve_direct(x3, w3)).max()))
    results.append(("convolution oracle", cerr <= 1e-10, f"max abs error {cerr:.2e}"))

    # energy descent on a small White stimulus
    p = ModelParams(n_orient=8, sigma_omega=4.0)
    stim = make_stimulus("white", 64)
    for model in ("LHE2D", "LHE3D"):
        _, tr = run(model, stim.image, p)
        rise = max(float(np.max(np.diff(tr.energies))), 0.0) if len(tr.energies) > 1 else 0.0
        ok = rise <= 1e-12 and tr.converged
        results.append((f"energy descent {model}", ok, f"{tr.iterations} iterations, max rise {rise:.2e}"))

    # gradient structure: LHE symmetric, WC not
    p = ModelParams()
    lhe = 0.0
    for _ in range(10):
        s = rng.uniform(-0.5, 0.5, (2, 3))
        lhe = max(lhe, jacobian_probe("LHE", s, p, rng=rng))
    results.append(("LHE Jacobian symmetric", lhe <= 1e-12, f"max asymmetry {lhe:.2e}"))
    s, Ww = mixed_regime_witness(p)
    wc = jacobian_probe("WC", s, p, Ww)
    need = 0.9 * p.nu * p.alpha * Ww[0, 1]
    results.append(("WC Jacobian asymmetric", wc >= need, f"asymmetry {wc:.3f} >= {need:.3f}"))
    fd = 0.0
    for model, fn in (("WC", rhs_wc), ("LHE", rhs_lhe)):
        s = rng.uniform(-0.5, 0.5, (2, 2))
        Wk = small_kernel(s.shape, 1.0)
        h = np.zeros_like(s)
        J = rhs_jacobian(model, s, p, Wk)
        eps = 1e-7
        num = np.empty_like(J)
        for j in range(s.size):
            d = np.zeros(s.size)
            d[j] = eps
            plus = fn(s + d.reshape(s.shape), h, p, Wk).ravel()
            minus = fn(s - d.reshape(s.shape), h, p, Wk).ravel()
            num[:, j] = (plus - minus) / (2 * eps)
        fd = max(fd, float(np.abs(num - J).max()))
    results.append(("Jacobian finite differences", fd <= 1e-5, f"max abs error {fd:.2e}"))
    return results


def cmd_check(bank_path: Path | None = None) -> int:
    try:
        results = run_checks(bank_path)
    except (InvalidParameterError, DegenerateStateError, OSError) as exc:
        print(f"FAIL setup: {exc}")
        return EXIT_INVARIANT
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_INVARIANT


# -- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="corticalwc", description="Neural-field models of visual illusions.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="write a stimulus image and its target sidecar")
    g.add_argument("name", choices=sorted(GENERATORS))
    g.add_argument("--n", type=int, default=200)
    g.add_argument("--set", action="append", metavar="KEY=VALUE", help="stimulus parameter")
    g.add_argument("--out", type=Path)
    g.add_argument("--pgm", action="store_true", help="also write a PGM image")

    r = sub.add_parser("run", help="evolve one model on one stimulus")
    _add_model_flags(r)

    s = sub.add_parser("sweep", help="repeat a run over values of one model parameter")
    s.add_argument("parameter", choices=sorted(_PARAM_NAMES))
    s.add_argument("values", nargs="*")
    _add_model_flags(s)

    c = sub.add_parser("check", help="fast invariant suite")
    c.add_argument("--bank", type=Path, help="filter bank file to check instead of a fresh one")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        if args.command == "gen":
            cfg = ExperimentConfig(stimulus=args.name, n=args.n, stim_params=_key_values(args.set),
                                   out_dir=args.out, pgm=args.pgm)
            code, out = cmd_gen(cfg)
            print(out)
            return code
        if args.command == "check":
            return cmd_check(args.bank)
        cfg = build_config(args)
        if args.command == "run":
            code, out, rows, trace = cmd_run(cfg)
            for r in rows:
                print(",".join(_fmt(v) for v in r))
            print(f"{out} ({trace.iterations} iterations, converged={trace.converged})")
            return code
        code, out, table = cmd_sweep(cfg, args.parameter, args.values)
        for r in table:
            print(",".join(_fmt(v) for v in r))
        print(out)
        return code
    except (UsageError, InvalidParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DegenerateStateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
