"""Command-line front end.

Every command writes its artifacts into ``--outdir`` together with a
``<command>_manifest.json`` describing the run; the manifest is written even
when the command fails part way.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .equivalence import certificate, write_certificate_json
from .errors import CinfLabError
from .fpt import default_grid, edge_record, estimate_upper_edge, q1_density, write_edge_json
from .instances import load_instance, make_instance
from .montecarlo import (GridConfig, ratio_floor, run_grid, spectrum_experiment,
                         write_comparison_csv, write_grid_csv, write_summary_json)
from .phase import write_pt_csv

THREADS_ENV = "CINFLAB_THREADS"

SCENARIO_ALIASES = {"wc": "worst_case", "worst_case": "worst_case",
                    "ac": "asymmetric", "asymmetric": "asymmetric",
                    "ac-alpha": "asymmetric_alpha", "asymmetric_alpha": "asymmetric_alpha"}


@dataclass
class RunManifest:
    command: str
    parameters: dict
    master_seed: int | None
    artifacts: list = field(default_factory=list)
    version: str = __version__
    duration_s: float = 0.0
    status: str = "running"
    error: str | None = None

    def write(self, outdir: Path) -> Path:
        path = outdir / f"{self.command.replace('-', '_')}_manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2, default=str) + "\n")
        return path


def parse_range(text: str) -> list[float]:
    """``start:stop:step`` (stop included within 1e-12), a single value, or a
    comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"range must be start:stop:step, got {text!r}")
        try:
            start, stop, step = (float(p) for p in parts)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad number in range {text!r}") from None
        if not step > 0 or stop < start:
            raise argparse.ArgumentTypeError(f"need step > 0 and stop >= start in {text!r}")
        count = int(np.floor((stop - start) / step + 1e-9)) + 1
        vals = start + step * np.arange(count)
        return [float(v) for v in np.round(vals, 12)]
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def parse_int_range(text: str) -> list[int]:
    vals = parse_range(text)
    out = [int(round(v)) for v in vals]
    if any(abs(a - b) > 1e-9 for a, b in zip(out, vals)):
        raise argparse.ArgumentTypeError(f"expected integers in {text!r}")
    return out


def _positive_int(text: str) -> int:
    try:
        val = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if val < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {val}")
    return val


def _nonneg_int(text: str) -> int:
    try:
        val = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if val < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {val}")
    return val


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    raw = os.environ.get(THREADS_ENV)
    if raw is None:
        return 1
    try:
        return max(1, int(raw))
    except ValueError:
        raise CinfLabError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def cmd_pt_curve(args, manifest: RunManifest, outdir: Path):
    scenario = SCENARIO_ALIASES[args.scenario]
    if scenario == "asymmetric_alpha":
        if args.alpha is None:
            raise CinfLabError("--alpha is required for the alpha-form curve")
        grid, kind = args.alpha, "alpha"
    else:
        if args.eta is None:
            raise CinfLabError("--eta is required")
        grid, kind = args.eta, "eta"
    path = write_pt_csv(outdir / args.output, grid, kind)
    manifest.artifacts.append(str(path))


def cmd_simulate(args, manifest: RunManifest, outdir: Path):
    cfg = GridConfig(n=args.n, eta_values=tuple(args.eta), k_values=args.k,
                     trials=args.trials, master_seed=args.seed, method=args.method,
                     success_rel_tol=args.rel_tol, k_step=args.k_step)
    result = run_grid(cfg, workers=_threads(args))
    manifest.artifacts.append(str(write_grid_csv(result, outdir / "grid.csv")))
    manifest.artifacts.append(str(write_summary_json(result, outdir / "summary.json")))
    for eta, est in result.empirical_beta.items():
        flag = " (saturated)" if est.saturated else ""
        print(f"eta={eta:g}: empirical beta={est.beta:.4f}{flag}, "
              f"theory={result.theory_beta[eta]:.4f}")


def cmd_spectrum(args, manifest: RunManifest, outdir: Path):
    if args.theory_only:
        if args.beta > args.eta:
            raise CinfLabError(f"need beta <= eta, got beta={args.beta}, eta={args.eta}")
        top = 1.1 * estimate_upper_edge(args.beta, args.eta)
        dens = q1_density(args.beta, args.eta, default_grid(top, args.grid_points),
                          args.epsilon)
        manifest.artifacts.append(str(dens.write_csv(outdir / "theory.csv")))
        path = write_edge_json(outdir / "edge.json", args.beta, args.eta, dens.upper_edge)
        manifest.artifacts.append(str(path))
        return
    k, l = ratio_floor(args.beta, args.n), ratio_floor(args.eta, args.n)
    if k > l:
        raise CinfLabError(f"need k <= l, got k={k}, l={l}")
    report = spectrum_experiment(args.n, args.beta, args.eta, args.trials, seed=args.seed,
                                 epsilon=args.epsilon)
    summary = {"n": report.n, "k": report.k, "l": report.l, "trials": report.trials,
               "degenerate": report.degenerate, "l1_distance": report.l1_distance,
               "l1_pointwise": report.l1_pointwise,
               "max_eigenvalue": report.max_eigenvalue,
               "trial_max": list(report.trial_max)}
    if not report.degenerate:
        manifest.artifacts.append(str(write_comparison_csv(report, outdir / "comparison.csv")))
        summary.update(edge_record(report.k / report.n, report.l / report.n,
                                    report.theory.upper_edge))
    path = outdir / "spectrum_summary.json"
    path.write_text(json.dumps(summary, indent=2) + "\n")
    manifest.artifacts.append(str(path))
    print(f"L1={report.l1_distance:.4f} max eigenvalue={report.max_eigenvalue:.4f}")


def cmd_certify(args, manifest: RunManifest, outdir: Path):
    if args.instance is not None:
        inst = load_instance(args.instance)
    else:
        if args.n is None or args.k is None or (args.l is None and args.eta is None):
            raise CinfLabError("give --instance, or --n, --k and one of --l/--eta")
        l = args.l if args.l is not None else ratio_floor(args.eta, args.n)
        inst = make_instance(args.n, args.k, l, scenario=args.scenario, seed=args.seed)
    cert = certificate(inst)
    path = write_certificate_json(outdir / args.output, cert, inst)
    manifest.artifacts.append(str(path))
    print(f"lambda_max={cert.lambda_max:.6g} equivalent={str(cert.equivalent).lower()}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cinflab",
                                description="Block matrix completion phase-transition lab.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--outdir", type=Path, default=Path("."),
                        help="directory for artifacts and the manifest")

    sp = sub.add_parser("pt-curve", help="closed-form phase-transition curves")
    common(sp)
    sp.add_argument("--scenario", choices=sorted(SCENARIO_ALIASES), default="ac")
    sp.add_argument("--eta", type=parse_range)
    sp.add_argument("--alpha", type=parse_range)
    sp.add_argument("--output", default="pt_curve.csv")
    sp.set_defaults(func=cmd_pt_curve)

    sp = sub.add_parser("simulate", help="Monte Carlo phase-transition grid")
    common(sp)
    sp.add_argument("--n", type=_positive_int, default=80)
    sp.add_argument("--eta", type=parse_range, default=[0.6, 0.7, 0.8, 0.9])
    sp.add_argument("--k", type=parse_int_range, default=None,
                    help="rank values (default: every k in 0..l)")
    sp.add_argument("--k-step", type=_positive_int, default=1)
    sp.add_argument("--trials", type=_positive_int, default=50)
    sp.add_argument("--method", choices=["certificate", "solver"], default="certificate")
    sp.add_argument("--rel-tol", type=float, default=1e-4)
    sp.add_argument("--seed", type=_nonneg_int, default=0)
    sp.add_argument("--threads", type=_positive_int, default=None,
                    help=f"worker processes (default: ${THREADS_ENV} or 1)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("spectrum", help="certificate spectrum against theory")
    common(sp)
    sp.add_argument("--beta", type=float, required=True)
    sp.add_argument("--eta", type=float, required=True)
    sp.add_argument("--n", type=_positive_int, default=2000)
    sp.add_argument("--trials", type=_positive_int, default=5)
    sp.add_argument("--epsilon", type=float, default=1e-4)
    sp.add_argument("--grid-points", type=_positive_int, default=2401)
    sp.add_argument("--seed", type=_nonneg_int, default=0)
    sp.add_argument("--theory-only", action="store_true")
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("certify", help="spectral certificate of one instance")
    common(sp)
    sp.add_argument("--instance", type=Path, help=".npz file from save_instance")
    sp.add_argument("--n", type=_positive_int)
    sp.add_argument("--k", type=_nonneg_int)
    sp.add_argument("--l", type=_nonneg_int)
    sp.add_argument("--eta", type=float)
    sp.add_argument("--scenario", choices=["asymmetric", "symmetric"], default="asymmetric")
    sp.add_argument("--seed", type=_nonneg_int, default=0)
    sp.add_argument("--output", default="certificate.json")
    sp.set_defaults(func=cmd_certify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    outdir = args.outdir
    outdir.mkdir(parents=True, exist_ok=True)
    params = {k: (str(v) if isinstance(v, Path) else v)
              for k, v in vars(args).items() if k not in ("func", "command")}
    manifest = RunManifest(args.command, params, getattr(args, "seed", None))
    t0 = time.perf_counter()
    code = 0
    try:
        args.func(args, manifest, outdir)
        manifest.status = "ok"
    except (CinfLabError, OSError) as exc:
        manifest.status = "failed"
        manifest.error = f"{type(exc).__name__}: {exc}"
        print(f"cinflab {args.command}: error: {exc}", file=sys.stderr)
        code = 1
    finally:
        manifest.duration_s = time.perf_counter() - t0
        manifest.write(outdir)
    return code


if __name__ == "__main__":
    sys.exit(main())
