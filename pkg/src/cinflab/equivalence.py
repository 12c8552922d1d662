"""Spectral certificate of exact recovery by nuclear-norm minimization.

With ``A_V = I_l^T V_perp`` and ``B_V = I_l^T V`` (the treated rows of the
complement and of the row frame), the mask-modified basis is
``Lambda_V = pinv(A_V) B_V``; ``Lambda_U`` is built the same way from the
column frame.  Recovery is exact iff the largest eigenvalue of
``Q1 @ Q1_perp = Lambda_V^T Lambda_V Lambda_U^T Lambda_U`` is at most one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, SingularConfigurationError
from .instances import BlockMask, LowRankInstance, apply_mask
from .solver import SolverOptions, classify_success, solve_nuclear_min

__all__ = [
    "SpectralCertificate",
    "FalsifierWitness",
    "LemmaCheck",
    "Agreement",
    "mask_modified_bases",
    "inverse_gram_forms",
    "certificate",
    "certificate_record",
    "write_certificate_json",
    "certificate_agrees_with_solver",
    "nullspace_objective",
    "nullspace_falsifier",
    "verify_identity_block",
]

#: half-width of the band around one reported as ``"marginal"``
MARGINAL_BAND = 1e-9
#: slack allowed above one before the verdict flips
VERDICT_SLACK = 1e-12


def _resolve_mask(instance: LowRankInstance, mask: BlockMask | None) -> BlockMask:
    if mask is None:
        return instance.mask
    if mask.n != instance.n:
        raise DomainError(f"mask side {mask.n} does not match instance n={instance.n}")
    return mask


def _modified_basis(frame: np.ndarray, perp: np.ndarray, l: int) -> np.ndarray:
    a = perp[l:]
    b = frame[l:]
    k = frame.shape[1]
    if a.shape[0] == 0 or k == 0:
        return np.zeros((perp.shape[1], k))
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    rcond = max(a.shape) * np.finfo(float).eps
    if s.size < a.shape[0] or s[-1] <= rcond * s[0]:
        raise SingularConfigurationError(
            f"treated rows of the complement basis are rank deficient "
            f"(smallest singular value {s[-1]:.3e})")
    return vt.T @ ((u.T @ b) / s[:, None])


def mask_modified_bases(instance: LowRankInstance, mask: BlockMask | None = None):
    """Return ``(Lambda_V, Lambda_U)``, each ``(n-k) x k``.

    Raises
    ------
    DomainError
        If ``k > l``; the certificate is only defined for ``k <= l``.
    SingularConfigurationError
        If the treated rows of a complement basis do not have full row rank.
    """
    mask = _resolve_mask(instance, mask)
    if instance.k > mask.l:
        raise DomainError(f"certificate requires k <= l, got k={instance.k}, l={mask.l}")
    lam_v = _modified_basis(instance.v_basis, instance.v_perp, mask.l)
    lam_u = _modified_basis(instance.u_basis, instance.u_perp, mask.l)
    return lam_v, lam_u


def inverse_gram_forms(instance: LowRankInstance, mask: BlockMask | None = None):
    """``(Q, Q_perp)`` with ``Q = (A_V A_V^T)^{-1} - I`` on the ``(n-l)``-dim block.

    Their nonzero spectra coincide with those of ``Q1`` and ``Q1_perp``.
    """
    mask = _resolve_mask(instance, mask)
    out = []
    for perp in (instance.v_perp, instance.u_perp):
        a = perp[mask.l:]
        d = a @ a.T
        out.append(np.linalg.inv(d) - np.eye(d.shape[0]))
    return tuple(out)


def _psd_sqrt(q: np.ndarray) -> np.ndarray:
    w, vecs = np.linalg.eigh(q)
    return (vecs * np.sqrt(np.clip(w, 0.0, None))) @ vecs.T


@dataclass(frozen=True, eq=False)
class SpectralCertificate:
    lambda_v: np.ndarray
    lambda_u: np.ndarray
    q1: np.ndarray
    q1_perp: np.ndarray
    cal_q1: np.ndarray
    eigenvalues: np.ndarray = field(repr=False)
    lambda_max: float
    equivalent: bool
    sufficient_check: bool
    lambda_max_q1: float
    lambda_max_q1_perp: float

    @property
    def status(self) -> str:
        """``"equivalent"``, ``"not_equivalent"`` or ``"marginal"`` near one."""
        if abs(self.lambda_max - 1.0) < MARGINAL_BAND:
            return "marginal"
        return "equivalent" if self.equivalent else "not_equivalent"


def certificate(instance: LowRankInstance, mask: BlockMask | None = None) -> SpectralCertificate:
    """Compute the spectral certificate of ``instance`` under ``mask``.

    The eigenvalues of the non-symmetric product ``Q1 @ Q1_perp`` are taken
    from the similar symmetric matrix ``Q1^{1/2} Q1_perp Q1^{1/2}``.
    """
    lam_v, lam_u = mask_modified_bases(instance, mask)
    q1 = lam_v.T @ lam_v
    q1_perp = lam_u.T @ lam_u
    cal_q1 = q1 @ q1_perp
    k = q1.shape[0]
    if k == 0:
        eig = np.zeros(0)
        lmax = lmax_q = lmax_qp = 0.0
    else:
        root = _psd_sqrt(q1)
        sym = root @ q1_perp @ root
        eig = np.linalg.eigvalsh(0.5 * (sym + sym.T))
        lmax = float(eig[-1])
        lmax_q = float(np.linalg.eigvalsh(q1)[-1])
        lmax_qp = float(np.linalg.eigvalsh(q1_perp)[-1])
    return SpectralCertificate(
        lambda_v=lam_v, lambda_u=lam_u, q1=q1, q1_perp=q1_perp, cal_q1=cal_q1,
        eigenvalues=eig, lambda_max=lmax,
        equivalent=bool(lmax <= 1.0 + VERDICT_SLACK),
        sufficient_check=bool(lmax_q * lmax_qp <= 1.0),
        lambda_max_q1=lmax_q, lambda_max_q1_perp=lmax_qp)


def certificate_record(cert: SpectralCertificate, instance: LowRankInstance,
                       mask: BlockMask | None = None) -> dict:
    mask = _resolve_mask(instance, mask)
    return {"n": instance.n, "k": instance.k, "l": mask.l,
            "beta": instance.k / instance.n, "eta": mask.l / instance.n,
            "lambda_max": cert.lambda_max, "equivalent": cert.equivalent,
            "sufficient_check": cert.sufficient_check, "seed": instance.seed}


def write_certificate_json(path, cert, instance, mask=None) -> Path:
    path = Path(path)
    path.write_text(json.dumps(certificate_record(cert, instance, mask), indent=2) + "\n")
    return path


@dataclass(frozen=True)
class Agreement:
    certified: bool
    recovered: bool

    @property
    def agrees(self) -> bool:
        return self.certified == self.recovered

    def __bool__(self):
        return self.agrees


def certificate_agrees_with_solver(instance: LowRankInstance, mask: BlockMask | None = None,
                                   opts: SolverOptions | None = None,
                                   rel_tol: float = 1e-4) -> Agreement:
    """Run both the certificate and the convex solver and compare verdicts.

    The returned object is truthy iff the two verdicts agree.
    """
    mask = _resolve_mask(instance, mask)
    cert = certificate(instance, mask)
    report = solve_nuclear_min(apply_mask(mask, instance.x_sol), mask, opts)
    return Agreement(certified=cert.equivalent,
                     recovered=classify_success(report, instance.x_sol, rel_tol))


@dataclass(frozen=True, eq=False)
class FalsifierWitness:
    """Unit-norm ``W`` vanishing on observed entries with negative objective."""

    w: np.ndarray
    objective: float


def nullspace_objective(instance: LowRankInstance, w: np.ndarray) -> float:
    """``tr(U^T W V) + ||U_perp^T W V_perp||_*``."""
    lin = np.trace(instance.u_basis.T @ w @ instance.v_basis)
    inner = instance.u_perp.T @ w @ instance.v_perp
    nuc = np.linalg.svd(inner, compute_uv=False).sum() if inner.size else 0.0
    return float(lin + nuc)


def nullspace_falsifier(instance: LowRankInstance, mask: BlockMask | None = None,
                        samples: int = 200, seed: int = 0,
                        descent_steps: int = 50) -> FalsifierWitness | None:
    """Search for a direction that certifies failure of exact recovery.

    Random unit-norm starts supported on the hidden block are refined by
    projected subgradient descent on the unit sphere.  The first start that
    reaches a negative objective is returned.  ``None`` means no witness was
    found, which certifies nothing.
    """
    if samples < 1:
        raise DomainError("samples must be >= 1")
    mask = _resolve_mask(instance, mask)
    l, p = mask.l, mask.n - mask.l
    if p == 0:
        return None
    bu, au = instance.u_basis[l:], instance.u_perp[l:]
    bv, av = instance.v_basis[l:], instance.v_perp[l:]
    lin = bu @ bv.T

    def objective(z):
        inner = au.T @ z @ av
        return float(np.sum(lin * z) + np.linalg.svd(inner, compute_uv=False).sum())

    def subgradient(z):
        pu, _, qt = np.linalg.svd(au.T @ z @ av, full_matrices=False)
        return lin + au @ (pu @ qt) @ av.T

    for child in np.random.SeedSequence(seed).spawn(samples):
        rng = np.random.default_rng(child)
        z = rng.standard_normal((p, p))
        z /= np.linalg.norm(z)
        f = objective(z)
        t = 0.5
        for _ in range(descent_steps):
            if f < 0:
                break
            g = subgradient(z)
            g -= np.sum(g * z) * z
            trial = z - t * g
            trial /= np.linalg.norm(trial)
            f_trial = objective(trial)
            if f_trial < f:
                z, f = trial, f_trial
                t *= 1.2
            else:
                t *= 0.5
        if f < 0:
            w = np.zeros((mask.n, mask.n))
            w[l:, l:] = z
            obj = nullspace_objective(instance, w)
            if obj < 0:
                return FalsifierWitness(w=w, objective=obj)
    return None


@dataclass(frozen=True)
class LemmaCheck:
    holds: bool
    premise_holds: bool

    def __bool__(self):
        return self.holds


def verify_identity_block(c, k: int, tol: float = 1e-10) -> LemmaCheck:
    """Check the identity-block lemma on a symmetric matrix ``c``.

    Premise: every eigenvalue lies in ``[-1 - tol, 1 + tol]`` and the first
    ``k`` diagonal entries are at least ``1 - tol``.  Conclusion: the leading
    ``k x k`` block is the identity and the rows ``0..k-1`` vanish outside it.
    Under the relaxed premise a ``2 x 2`` example ``[[1-tol, b], [b, d]]`` with
    ``d`` near ``-1-tol`` admits ``b`` close to ``2 sqrt(tol (1 + tol))``, so
    off-diagonal entries are only bounded by ``O(sqrt(tol))``; the conclusion
    is checked at ``2 sqrt(tol (1 + tol)) + tol``.
    When the premise fails the lemma holds vacuously.
    """
    c = np.asarray(c, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise DomainError("c must be a square matrix")
    n = c.shape[0]
    if not 0 <= k <= n:
        raise DomainError(f"need 0 <= k <= n, got k={k}")
    if np.max(np.abs(c - c.T), initial=0.0) > tol:
        raise DomainError("c is not symmetric within tol")
    c = 0.5 * (c + c.T)
    eig = np.linalg.eigvalsh(c) if n else np.zeros(0)
    premise = bool(np.all(eig >= -1 - tol) and np.all(eig <= 1 + tol)
                   and np.all(np.diag(c)[:k] >= 1 - tol))
    if not premise:
        return LemmaCheck(holds=True, premise_holds=False)
    bound = 2.0 * np.sqrt(tol * (1.0 + tol)) + tol
    top = c[:k, :k] - np.eye(k)
    rest = c[:k, k:]
    ok = (np.max(np.abs(top), initial=0.0) <= bound
          and np.max(np.abs(rest), initial=0.0) <= bound)
    return LemmaCheck(holds=bool(ok), premise_holds=True)
