"""Closed-form phase-transition curves for block-mask recovery.

Two regimes are covered: the worst case (symmetric bases, ``U = V``) and the
asymmetric case (independent Haar bases).  The asymmetric curve admits exactly
twice the rank of the worst-case curve at every treatment ratio.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError

__all__ = [
    "PTCurve",
    "beta_wc",
    "beta_ac",
    "beta_ac_valid",
    "beta_ac_from_alpha",
    "alpha_from_eta",
    "pt_curve",
    "write_pt_csv",
]

SCENARIOS = ("worst_case", "asymmetric", "asymmetric_alpha")


def _check_unit(name, x):
    x = np.asarray(x, dtype=float)
    if np.any(~np.isfinite(x)) or np.any(x < 0) or np.any(x > 1):
        raise DomainError(f"{name} must lie in [0, 1]")
    return x


def _scalar_or_array(x):
    return float(x) if np.ndim(x) == 0 else x


def beta_wc(eta):
    """Worst-case threshold ``1/2 - sqrt(eta - eta**2)``."""
    eta = _check_unit("eta", eta)
    return _scalar_or_array(0.5 - np.sqrt(eta - eta * eta))


def beta_ac(eta):
    """Asymmetric threshold ``1 - 2 sqrt(eta - eta**2)``.

    The value is only meaningful for the certificate when it does not exceed
    ``eta`` (rank at most the treatment time); see :func:`beta_ac_valid`.
    """
    eta = _check_unit("eta", eta)
    return _scalar_or_array(1.0 - 2.0 * np.sqrt(eta - eta * eta))


def beta_ac_valid(eta):
    """True where ``beta_ac(eta) <= eta``, the region where ``k <= l``."""
    eta = np.asarray(eta, dtype=float)
    out = np.asarray(beta_ac(eta)) <= eta
    return bool(out) if out.ndim == 0 else out


def alpha_from_eta(eta):
    """Observed fraction ``1 - (1 - eta)**2`` of the block mask."""
    eta = _check_unit("eta", eta)
    return _scalar_or_array(1.0 - (1.0 - eta) ** 2)


def beta_ac_from_alpha(alpha):
    """Asymmetric threshold in the (alpha, beta) plane.

    ``1 - 2 sqrt(sqrt(1 - alpha) - 1 + alpha)``, evaluated as
    ``1 - 2 sqrt(s (1 - s))`` with ``s = sqrt(1 - alpha)`` to avoid
    cancellation.  Near ``alpha = 1`` the map is ill conditioned: a rounding
    of ``alpha`` by one ulp moves the result by up to ``~1e-11``.  Tiny
    negative radicands are clipped, anything below ``-1e-12`` is a domain error.
    """
    alpha = _check_unit("alpha", alpha)
    s = np.sqrt(1.0 - alpha)
    rad = s * (1.0 - s)
    if np.any(rad < -1e-12):
        raise DomainError("negative radicand in the alpha-form threshold")
    return _scalar_or_array(1.0 - 2.0 * np.sqrt(np.clip(rad, 0.0, None)))


@dataclass(frozen=True, eq=False)
class PTCurve:
    scenario: str
    abscissa_kind: str
    abscissa: np.ndarray
    beta: np.ndarray
    valid: np.ndarray

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.abscissa.tolist(), self.beta.tolist()))


def pt_curve(scenario: str, grid) -> PTCurve:
    """Sample a threshold curve on ``grid`` (eta, or alpha for ``asymmetric_alpha``).

    ``valid`` marks samples inside the ``k <= l`` region for the asymmetric
    curves and is all true for the worst case.
    """
    if scenario not in SCENARIOS:
        raise DomainError(f"scenario must be one of {SCENARIOS}, got {scenario!r}")
    x = np.sort(np.atleast_1d(np.asarray(grid, dtype=float)))
    if scenario == "worst_case":
        beta = np.atleast_1d(beta_wc(x))
        valid = np.ones(x.shape, dtype=bool)
        kind = "eta"
    elif scenario == "asymmetric":
        beta = np.atleast_1d(beta_ac(x))
        valid = np.atleast_1d(beta_ac_valid(x))
        kind = "eta"
    else:
        beta = np.atleast_1d(beta_ac_from_alpha(x))
        eta = 1.0 - np.sqrt(1.0 - x)
        valid = beta <= eta + 1e-12
        kind = "alpha"
    return PTCurve(scenario, kind, x, beta, valid)


def write_pt_csv(path, grid, kind: str = "eta") -> Path:
    """CSV with columns ``(eta|alpha), beta_wc, beta_ac``."""
    if kind not in ("eta", "alpha"):
        raise DomainError("kind must be 'eta' or 'alpha'")
    x = np.sort(np.atleast_1d(np.asarray(grid, dtype=float)))
    if kind == "eta":
        eta = x
        ac = np.atleast_1d(beta_ac(eta))
    else:
        eta = 1.0 - np.sqrt(1.0 - _check_unit("alpha", x))
        ac = np.atleast_1d(beta_ac_from_alpha(x))
    wc = np.atleast_1d(beta_wc(np.clip(eta, 0.0, 1.0)))
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([kind, "beta_wc", "beta_ac"])
        for row in zip(x, wc, ac):
            w.writerow([repr(float(v)) for v in row])
    return path
