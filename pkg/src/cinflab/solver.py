"""Nuclear-norm minimization under exact equality on the observed entries.

The convex program ``min ||X||_* s.t. M o X = Y`` is solved by Douglas-Rachford
splitting between singular value soft-thresholding (the proximal map of the
nuclear norm) and the projection onto the affine set of matrices that agree
with ``Y`` on observed entries.  For a block mask that projection just
overwrites the observed entries, so one iteration costs one SVD.

Runs are deterministic: there is no randomness and the iteration order is
fixed, so repeated solves on the same machine and BLAS configuration agree
bit for bit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError
from .instances import BlockMask, apply_mask

__all__ = [
    "SolverOptions",
    "SolveReport",
    "nuclear_norm",
    "rank_l0",
    "singular_value_threshold",
    "solve_nuclear_min",
    "classify_success",
    "write_trace_csv",
]


@dataclass(frozen=True)
class SolverOptions:
    """Parameters of :func:`solve_nuclear_min`.

    ``step`` is the soft-threshold level relative to the spectral norm of the
    observations.  The first iterations use a threshold inflated by
    ``continuation`` that decays geometrically at ``continuation_rate`` until it
    reaches ``step``; all later iterations (the polishing phase) run at ``step``.
    """

    max_iterations: int = 5000
    step: float = 0.3
    tol_feasibility: float = 1e-9
    tol_change: float = 1e-9
    continuation: float = 8.0
    continuation_rate: float = 0.7
    record_trace: bool = False

    def __post_init__(self):
        if self.max_iterations < 1:
            raise DomainError("max_iterations must be >= 1")
        for name in ("step", "tol_feasibility", "tol_change"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be > 0")
        if self.continuation < 1:
            raise DomainError("continuation must be >= 1")
        if not 0 < self.continuation_rate < 1:
            raise DomainError("continuation_rate must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class SolveReport:
    x_hat: np.ndarray
    rmse: float | None
    nuclear_norm: float
    iterations: int
    converged: bool
    feasibility_residual: float
    trace: dict | None = field(default=None, repr=False)


def nuclear_norm(x) -> float:
    """Sum of singular values."""
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return 0.0
    return float(np.linalg.svd(x, compute_uv=False).sum())


def rank_l0(x, cutoff: float = 1e-8) -> int:
    """Number of singular values above ``cutoff * sigma_max``."""
    if not cutoff > 0:
        raise DomainError("cutoff must be > 0")
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        return 0
    s = np.linalg.svd(x, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.count_nonzero(s > cutoff * s[0]))


def singular_value_threshold(z: np.ndarray, tau: float) -> np.ndarray:
    """Proximal map of ``tau * ||.||_*``."""
    u, s, vt = np.linalg.svd(z, full_matrices=False)
    s = np.maximum(s - tau, 0.0)
    keep = s > 0
    return (u[:, keep] * s[keep]) @ vt[keep]


def _observed_violation(x: np.ndarray, y: np.ndarray, l: int) -> float:
    # max |x - y| over observed entries: the top band and the left block
    if l == 0:
        return 0.0
    top = np.max(np.abs(x[:l] - y[:l]))
    left = np.max(np.abs(x[l:, :l] - y[l:, :l])) if l < x.shape[0] else 0.0
    return float(max(top, left))


def solve_nuclear_min(y, mask: BlockMask, opts: SolverOptions | None = None,
                      x_true=None) -> SolveReport:
    """Solve ``min ||X||_* subject to M o X = M o y``.

    Parameters
    ----------
    y : array_like
        Observations.  Entries on the hidden block are ignored.
    mask : BlockMask
    opts : SolverOptions, optional
    x_true : array_like, optional
        Ground truth; when given, ``report.rmse`` is the Frobenius distance
        of the estimate to it.

    Returns
    -------
    SolveReport
        ``x_hat`` agrees with ``y`` on every observed entry (the observed part
        is overwritten after each thresholding step) and carries the
        thresholded iterate on the hidden block.  Not converging within
        ``max_iterations`` is reported through ``converged=False``.
    """
    opts = opts or SolverOptions()
    y = np.asarray(y, dtype=float)
    if y.shape != (mask.n, mask.n):
        raise DomainError(f"observations of shape {y.shape} do not match n={mask.n}")
    obs = mask.dense().astype(bool)
    if np.any(~np.isfinite(y[obs])):
        raise DomainError("observations contain NaN or infinite values")
    y = apply_mask(mask, np.where(obs, y, 0.0))
    l = mask.l

    trace = {"iteration": [], "feasibility_residual": [], "nuclear_norm": [],
             "relative_change": [], "fixed_point_gap": []} if opts.record_trace else None

    scale = np.linalg.norm(y, 2) if y.any() else 0.0
    if l == mask.n or scale == 0.0:
        # every entry fixed, or the zero matrix is feasible with zero norm
        x_hat = y.copy()
        return _report(x_hat, y, l, 0, True, x_true, trace)

    gamma = opts.step * scale
    z = y.copy()
    x_hat = y.copy()
    converged = False
    it = 0
    for it in range(1, opts.max_iterations + 1):
        tau = gamma * max(1.0, opts.continuation * opts.continuation_rate ** (it - 1))
        x_low = singular_value_threshold(z, tau)
        reflected = 2.0 * x_low - z
        reflected[:l] = y[:l]
        reflected[l:, :l] = y[l:, :l]
        gap = reflected - x_low
        z += gap

        x_prev = x_hat
        x_hat = x_low.copy()
        x_hat[:l] = y[:l]
        x_hat[l:, :l] = y[l:, :l]

        norm_hat = np.linalg.norm(x_hat)
        change = np.linalg.norm(x_hat - x_prev) / max(norm_hat, np.finfo(float).tiny)
        violation = _observed_violation(x_low, y, l)
        gap_rel = np.linalg.norm(gap) / max(norm_hat, np.finfo(float).tiny)
        if trace is not None:
            trace["iteration"].append(it)
            trace["feasibility_residual"].append(_observed_violation(x_hat, y, l))
            trace["nuclear_norm"].append(nuclear_norm(x_hat))
            trace["relative_change"].append(change)
            trace["fixed_point_gap"].append(gap_rel)
        in_polish = tau == gamma
        if (in_polish and change < opts.tol_change and gap_rel < opts.tol_change
                and violation < opts.tol_feasibility * max(1.0, scale)):
            converged = True
            break
    return _report(x_hat, y, l, it, converged, x_true, trace)


def _report(x_hat, y, l, iterations, converged, x_true, trace) -> SolveReport:
    rmse = None
    if x_true is not None:
        rmse = float(np.linalg.norm(x_hat - np.asarray(x_true, dtype=float)))
    x_hat.setflags(write=False)
    return SolveReport(x_hat=x_hat, rmse=rmse, nuclear_norm=nuclear_norm(x_hat),
                       iterations=iterations, converged=converged,
                       feasibility_residual=_observed_violation(x_hat, y, l),
                       trace=trace)


def classify_success(report, x_sol, rel_tol: float = 1e-4) -> bool:
    """Exact-recovery surrogate: ``||x_hat - x_sol||_F <= rel_tol * ||x_sol||_F``.

    ``report`` may be a :class:`SolveReport` or the estimate itself.  An
    absolute threshold of ``1e-12`` replaces the relative one when
    ``x_sol`` is zero.
    """
    if not rel_tol > 0:
        raise DomainError("rel_tol must be > 0")
    x_hat = report.x_hat if isinstance(report, SolveReport) else np.asarray(report)
    x_sol = np.asarray(x_sol, dtype=float)
    if x_hat.shape != x_sol.shape:
        raise DomainError(f"shape mismatch {x_hat.shape} vs {x_sol.shape}")
    err = np.linalg.norm(x_hat - x_sol)
    ref = np.linalg.norm(x_sol)
    if ref == 0:
        return bool(err <= 1e-12)
    return bool(err <= rel_tol * ref)


def write_trace_csv(report: SolveReport, path) -> Path:
    """Per-iteration trace as CSV (iteration, feasibility_residual, nuclear_norm,
    relative_change)."""
    if report.trace is None:
        raise DomainError("solve was run without record_trace=True")
    path = Path(path)
    cols = ["iteration", "feasibility_residual", "nuclear_norm", "relative_change"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in zip(*(report.trace[c] for c in cols)):
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
    return path
