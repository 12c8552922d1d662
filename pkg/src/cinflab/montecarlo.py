"""Monte Carlo experiments: phase-transition grids and spectrum histograms.

Every trial draws its instance from a seed derived by hashing
``(master_seed, eta_index, k, trial)``; adding or reordering cells never
changes the stream of an existing cell, and parallel execution merges results
by cell identity so output does not depend on scheduling.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import isotonic_regression

from .equivalence import certificate
from .errors import CinfLabError, DomainError
from .fpt import default_grid, estimate_upper_edge, q1_density
from .instances import make_instance
from .phase import beta_ac
from .solver import SolverOptions, classify_success, solve_nuclear_min

__all__ = [
    "GridConfig",
    "CellResult",
    "TransitionEstimate",
    "PTGridResult",
    "SpectrumReport",
    "stable_seed",
    "ratio_floor",
    "run_grid",
    "empirical_transition",
    "spectrum_experiment",
    "write_grid_csv",
    "write_summary_json",
    "write_comparison_csv",
]

METHODS = ("certificate", "solver")


def ratio_floor(ratio: float, n: int) -> int:
    """``floor(ratio * n)``, robust to products like ``0.7 * 80 = 56.000000000000014``."""
    return int(np.floor(ratio * n + 1e-9))


def stable_seed(master_seed: int, *indices: int) -> int:
    """64-bit seed from a hash of the master seed and non-negative indices."""
    key = [int(master_seed), *map(int, indices)]
    if any(v < 0 for v in key):
        raise DomainError("seed components must be non-negative")
    return int(np.random.SeedSequence(key).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class GridConfig:
    """Phase-transition grid.

    ``k_values`` is either one sequence used for every eta, or a mapping from
    the eta index to its sequence.  ``None`` means every ``k`` in
    ``0 .. l`` with stride ``k_step``.
    """

    n: int
    eta_values: tuple
    k_values: Sequence[int] | Mapping[int, Sequence[int]] | None = None
    trials: int = 50
    master_seed: int = 0
    method: str = "certificate"
    success_rel_tol: float = 1e-4
    k_step: int = 1
    solver_options: SolverOptions | None = None

    def __post_init__(self):
        object.__setattr__(self, "eta_values", tuple(float(e) for e in self.eta_values))
        if self.n < 1:
            raise DomainError("n must be >= 1")
        if self.trials < 1:
            raise DomainError("trials must be >= 1")
        if self.k_step < 1:
            raise DomainError("k_step must be >= 1")
        if self.master_seed < 0:
            raise DomainError("master_seed must be non-negative")
        if self.method not in METHODS:
            raise DomainError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.success_rel_tol > 0:
            raise DomainError("success_rel_tol must be > 0")
        if not self.eta_values:
            raise DomainError("eta_values must not be empty")
        for i, eta in enumerate(self.eta_values):
            if not 0.0 <= eta <= 1.0:
                raise DomainError(f"eta must lie in [0, 1], got {eta}")
            l = self.l_of(i)
            ks = self.ks_of(i)
            if any(k < 0 or k > l for k in ks):
                raise DomainError(f"k values for eta={eta} must lie in [0, {l}]")

    def l_of(self, eta_index: int) -> int:
        return ratio_floor(self.eta_values[eta_index], self.n)

    def ks_of(self, eta_index: int) -> list[int]:
        if self.k_values is None:
            return list(range(0, self.l_of(eta_index) + 1, self.k_step))
        if isinstance(self.k_values, Mapping):
            return [int(k) for k in self.k_values[eta_index]]
        return [int(k) for k in self.k_values]


@dataclass(frozen=True)
class CellResult:
    eta: float
    eta_index: int
    k: int
    successes: int
    trials: int
    errors: int = 0
    nonconverged: int = 0

    @property
    def fraction(self) -> float:
        return self.successes / self.trials


@dataclass(frozen=True)
class TransitionEstimate:
    beta: float
    k_star: float
    saturated: bool


@dataclass(frozen=True, eq=False)
class PTGridResult:
    config: GridConfig
    cells: list
    empirical_beta: dict
    theory_beta: dict

    def column(self, eta_index: int) -> list[CellResult]:
        return [c for c in self.cells if c.eta_index == eta_index]

    def counts(self) -> list[tuple]:
        return [(c.eta, c.k, c.successes, c.trials) for c in self.cells]


def _run_cell(n, eta, eta_index, k, l, trials, master_seed, method, rel_tol, opts):
    successes = errors = nonconverged = 0
    for t in range(trials):
        seed = stable_seed(master_seed, eta_index, k, t)
        try:
            inst = make_instance(n, k, l, seed=seed)
            if method == "certificate":
                ok = certificate(inst).equivalent
            else:
                report = solve_nuclear_min(inst.observations(), inst.mask, opts)
                if not report.converged:
                    nonconverged += 1
                ok = report.converged and classify_success(report, inst.x_sol, rel_tol)
        except (CinfLabError, np.linalg.LinAlgError):
            errors += 1
            ok = False
        successes += bool(ok)
    return CellResult(eta, eta_index, k, successes, trials, errors, nonconverged)


def _run_cell_args(args):
    return _run_cell(*args)


def run_grid(config: GridConfig, workers: int | None = None) -> PTGridResult:
    """Run every ``(eta, k)`` cell of ``config``.

    Instances use the asymmetric scenario with unit singular values.  With
    ``method="solver"`` a trial succeeds when the solver converges and meets
    ``success_rel_tol``; non-convergence and numerical errors count as failures
    and are tallied in ``CellResult.nonconverged`` and ``CellResult.errors``.

    Parameters
    ----------
    workers : int, optional
        Number of worker processes.  ``None`` or 1 runs serially.  Results are
        identical for any value.
    """
    jobs = []
    for i, eta in enumerate(config.eta_values):
        l = config.l_of(i)
        for k in config.ks_of(i):
            jobs.append((config.n, eta, i, k, l, config.trials, config.master_seed,
                         config.method, config.success_rel_tol, config.solver_options))
    if workers is None or workers <= 1 or len(jobs) == 1:
        results = [_run_cell_args(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell_args, jobs, chunksize=1))
    results.sort(key=lambda c: (c.eta_index, c.k))

    empirical, theory = {}, {}
    for i, eta in enumerate(config.eta_values):
        col = [c for c in results if c.eta_index == i]
        theory[eta] = beta_ac(eta)
        if len(col) >= 2:
            empirical[eta] = empirical_transition(
                [c.k for c in col], [c.successes for c in col],
                [c.trials for c in col], config.n)
    return PTGridResult(config, results, empirical, theory)


def empirical_transition(ks, successes, trials, n: int) -> TransitionEstimate:
    """50% crossing of the success fraction, as a rank ratio ``k* / n``.

    The fractions are first made non-increasing in ``k`` by weighted isotonic
    regression, then interpolated linearly to the 0.5 level.  When every
    smoothed fraction lies on one side of 0.5 the largest (all successes) or
    smallest (all failures) ``k`` is returned with ``saturated=True``.
    """
    ks = np.asarray(ks, dtype=float)
    s = np.asarray(successes, dtype=float)
    t = np.broadcast_to(np.asarray(trials, dtype=float), ks.shape)
    if ks.size < 2:
        raise DomainError("need at least two cells")
    if np.any(t < 1) or np.any(s < 0) or np.any(s > t):
        raise DomainError("need 0 <= successes <= trials and trials >= 1")
    order = np.argsort(ks)
    ks, s, t = ks[order], s[order], t[order]
    frac = isotonic_regression(s / t, weights=t, increasing=False).x
    if frac[-1] >= 0.5:
        return TransitionEstimate(ks[-1] / n, ks[-1], True)
    if frac[0] < 0.5:
        return TransitionEstimate(ks[0] / n, ks[0], True)
    i = int(np.nonzero(frac >= 0.5)[0][-1])
    f0, f1 = frac[i], frac[i + 1]
    k_star = ks[i] + (f0 - 0.5) / (f0 - f1) * (ks[i + 1] - ks[i])
    return TransitionEstimate(k_star / n, k_star, False)


@dataclass(frozen=True, eq=False)
class SpectrumReport:
    """Pooled eigenvalues of ``Q1 @ Q1_perp`` against the limiting density.

    ``hist_density`` is normalized by the total eigenvalue count, structural
    zeros included, so it estimates the continuous part of the law and is
    directly comparable to ``theory.density``.
    """

    n: int
    k: int
    l: int
    trials: int
    eigenvalues: np.ndarray = field(repr=False)
    bin_edges: np.ndarray = field(repr=False)
    hist_density: np.ndarray = field(repr=False)
    theory: object = field(repr=False)
    theory_bin_average: np.ndarray = field(repr=False)
    l1_distance: float
    l1_pointwise: float
    max_eigenvalue: float
    trial_max: tuple
    zero_fraction: float
    degenerate: bool = False

    @property
    def resampled_empirical(self) -> np.ndarray:
        """Histogram density evaluated on the theory grid (piecewise constant)."""
        return _piecewise(self.bin_edges, self.hist_density, self.theory.grid)


def _piecewise(edges, values, x):
    idx = np.searchsorted(edges, x, side="right") - 1
    inside = (idx >= 0) & (idx < values.size)
    return np.where(inside, values[np.clip(idx, 0, max(values.size - 1, 0))], 0.0)


def spectrum_experiment(n: int, beta: float, eta: float, trials: int, seed: int = 0,
                        epsilon: float = 1e-4, x_grid=None) -> SpectrumReport:
    """Pool certificate spectra over ``trials`` instances and compare with theory.

    ``k = floor(beta n)`` and ``l = floor(eta n)``; the theory curve uses the
    realized ratios ``k/n`` and ``l/n``.  From each trial the ``k - (n - l)``
    smallest eigenvalues (the structural zeros, when ``k > n - l``) are set
    aside.  The rest are binned with the Freedman-Diaconis rule and compared
    with the theoretical density averaged over the same bins:
    ``l1_distance`` is the sum of the per-bin absolute differences times the
    bin widths plus the theoretical mass beyond the last bin.
    ``l1_pointwise`` compares the histogram resampled onto the theory grid
    instead, which is dominated by the steep part of the density near zero.

    Raises
    ------
    DomainError
        If ``k > l`` or ``trials < 1``.
    SingularConfigurationError
        Propagated from the certificate of any trial.
    """
    if trials < 1:
        raise DomainError("trials must be >= 1")
    k, l = ratio_floor(beta, n), ratio_floor(eta, n)
    if k > l:
        raise DomainError(f"need k <= l, got k={k}, l={l}")
    if k == 0:
        empty = np.zeros(0)
        return SpectrumReport(n, k, l, trials, empty, empty, empty, None, empty,
                              float("nan"), float("nan"), float("nan"), (), 0.0, True)
    drop = max(0, k - (n - l))
    pooled, kept, trial_max = [], [], []
    for t in range(trials):
        eig = certificate(make_instance(n, k, l, seed=stable_seed(seed, t))).eigenvalues
        pooled.append(eig)
        kept.append(eig[drop:])
        trial_max.append(float(eig[-1]))
    pooled = np.concatenate(pooled)
    kept = np.concatenate(kept)
    total = pooled.size

    if kept.size:
        edges = np.histogram_bin_edges(kept, bins="fd", range=(0.0, float(kept.max())))
        counts, edges = np.histogram(kept, bins=edges)
        hist = counts / (total * np.diff(edges))
    else:
        edges, hist = np.array([0.0, 1.0]), np.zeros(1)

    b_eff, e_eff = k / n, l / n
    if x_grid is None:
        top = max(1.1 * estimate_upper_edge(b_eff, e_eff), float(edges[-1]))
        x_grid = default_grid(top, 2401)
    theory = q1_density(b_eff, e_eff, x_grid, epsilon)
    avg = theory.bin_averages(edges)
    widths = np.diff(edges)
    tail = max(0.0, theory.continuous_mass - float(np.sum(avg * widths)))
    l1 = float(np.sum(np.abs(avg - hist) * widths) + tail)
    f_emp = _piecewise(edges, hist, theory.grid)
    l1_pw = float(np.trapezoid(np.abs(theory.density - f_emp), theory.grid))
    return SpectrumReport(n, k, l, trials, pooled, edges, hist, theory, avg, l1, l1_pw,
                          float(pooled.max()), tuple(trial_max), drop / k, False)


def write_grid_csv(result: PTGridResult, path) -> Path:
    """Columns ``eta, k, beta, successes, trials, fraction``."""
    path = Path(path)
    n = result.config.n
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["eta", "k", "beta", "successes", "trials", "fraction"])
        for c in result.cells:
            w.writerow([repr(c.eta), c.k, repr(c.k / n), c.successes, c.trials,
                        repr(c.fraction)])
    return path


def write_summary_json(result: PTGridResult, path) -> Path:
    cfg = result.config
    rows = []
    for eta in cfg.eta_values:
        est = result.empirical_beta.get(eta)
        rows.append({"eta": eta, "theory_beta": result.theory_beta[eta],
                     "empirical_beta": None if est is None else est.beta,
                     "saturated": None if est is None else est.saturated})
    cells = [asdict(c) for c in result.cells]
    rec = {"n": cfg.n, "method": cfg.method, "trials": cfg.trials,
           "master_seed": cfg.master_seed, "transitions": rows,
           "errors": sum(c["errors"] for c in cells),
           "nonconverged": sum(c["nonconverged"] for c in cells)}
    path = Path(path)
    path.write_text(json.dumps(rec, indent=2) + "\n")
    return path


def write_comparison_csv(report: SpectrumReport, path) -> Path:
    """Columns ``x, f_theory, f_empirical`` on the theory grid."""
    if report.degenerate:
        raise DomainError("degenerate report has no comparison to write")
    path = Path(path)
    f_emp = report.resampled_empirical
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "f_theory", "f_empirical"])
        for row in zip(report.theory.grid, report.theory.density, f_emp):
            w.writerow([repr(float(v)) for v in row])
    return path


def default_workers() -> int:
    """Worker count from ``CINFLAB_THREADS`` (default 1)."""
    raw = os.environ.get("CINFLAB_THREADS", "1")
    try:
        val = int(raw)
    except ValueError:
        raise DomainError(f"CINFLAB_THREADS must be an integer, got {raw!r}") from None
    return max(1, val)
