"""Block masks, Haar-distributed low-rank ground truths and masked observations.

Index convention: rows and columns ``0 .. l-1`` are pre-treatment.  The
unobserved block is the trailing ``(n-l) x (n-l)`` corner, i.e. entry
``(i, j)`` is hidden iff ``i >= l`` and ``j >= l`` (0-indexed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError

__all__ = [
    "ProblemDims",
    "BlockMask",
    "LowRankInstance",
    "make_block_mask",
    "sample_haar_orthogonal",
    "sample_haar_basis",
    "make_instance",
    "apply_mask",
    "save_instance",
    "load_instance",
]

SCENARIOS = ("asymmetric", "symmetric")


@dataclass(frozen=True)
class ProblemDims:
    """Side length ``n``, rank ``k`` and treatment time ``l``."""

    n: int
    k: int
    l: int

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"n must be positive, got {self.n}")
        if not 0 <= self.k <= self.n:
            raise DomainError(f"need 0 <= k <= n, got k={self.k}, n={self.n}")
        if not 0 <= self.l <= self.n:
            raise DomainError(f"need 0 <= l <= n, got l={self.l}, n={self.n}")

    @property
    def beta(self) -> float:
        return self.k / self.n

    @property
    def eta(self) -> float:
        return self.l / self.n

    @property
    def m(self) -> int:
        return self.n**2 - (self.n - self.l) ** 2

    @property
    def alpha(self) -> float:
        """Observed fraction ``m / n**2 = 1 - (1 - eta)**2``."""
        return self.m / self.n**2

    @property
    def certifiable(self) -> bool:
        """Whether ``k <= l``, the regime where the spectral certificate applies."""
        return self.k <= self.l


@dataclass(frozen=True)
class BlockMask:
    """Observation pattern of block causal inference, stored as ``(n, l)``."""

    n: int
    l: int

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"n must be positive, got {self.n}")
        if not 0 <= self.l <= self.n:
            raise DomainError(f"need 0 <= l <= n, got l={self.l}, n={self.n}")

    @property
    def m(self) -> int:
        """Number of observed entries."""
        return self.n**2 - (self.n - self.l) ** 2

    @property
    def hidden_shape(self) -> tuple[int, int]:
        p = self.n - self.l
        return (p, p)

    def observed(self, i: int, j: int) -> bool:
        return not (i >= self.l and j >= self.l)

    def dense(self) -> np.ndarray:
        """Binary ``n x n`` matrix with ones on observed entries (tests and export)."""
        out = np.ones((self.n, self.n), dtype=np.int8)
        out[self.l:, self.l:] = 0
        return out

    def selector(self) -> np.ndarray:
        """The ``n x (n-l)`` matrix ``[0; I]`` picking the treated rows/columns."""
        sel = np.zeros((self.n, self.n - self.l))
        sel[self.l:, :] = np.eye(self.n - self.l)
        return sel

    def apply(self, x: np.ndarray) -> np.ndarray:
        return apply_mask(self, x)

    def hidden_part(self, x: np.ndarray) -> np.ndarray:
        """Entries of ``x`` on the unobserved block (a copy)."""
        _check_shape(self, x)
        return np.array(x[self.l:, self.l:])


def _check_shape(mask: BlockMask, x: np.ndarray) -> None:
    if np.shape(x) != (mask.n, mask.n):
        raise DomainError(
            f"matrix shape {np.shape(x)} does not match mask of side {mask.n}")


def make_block_mask(n: int, l: int) -> BlockMask:
    return BlockMask(int(n), int(l))


def apply_mask(mask: BlockMask, x: np.ndarray) -> np.ndarray:
    """Return ``M o x``: ``x`` on observed entries and zero on the hidden block."""
    x = np.asarray(x)
    _check_shape(mask, x)
    out = np.array(x, dtype=np.result_type(x.dtype, np.float64))
    out[mask.l:, mask.l:] = 0
    return out


def _haar_columns(rng: np.random.Generator, n: int, k: int, complete: bool):
    # QR of a Gaussian matrix with the sign of diag(R) fixed is exactly Haar.
    g = rng.standard_normal((n, k))
    q, r = np.linalg.qr(g, mode="complete" if complete else "reduced")
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    q[:, :k] *= d
    return q


def sample_haar_orthogonal(n: int, seed) -> np.ndarray:
    """Haar-distributed ``n x n`` orthogonal matrix, deterministic given ``seed``."""
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    return _haar_columns(np.random.default_rng(seed), n, n, complete=False)


def sample_haar_basis(n: int, k: int, seed) -> np.ndarray:
    """Haar-distributed orthonormal ``n x k`` frame.

    For equal seeds this is the leading ``k`` columns of the frame used by
    :func:`make_instance`.
    """
    if not 0 <= k <= n:
        raise DomainError(f"need 0 <= k <= n, got k={k}, n={n}")
    if k == 0:
        return np.zeros((n, 0))
    return _haar_columns(np.random.default_rng(seed), n, k, complete=False)


def _haar_split(n: int, k: int, seed):
    if k == 0:
        # any orthogonal completion works; keep it random for consistency
        full = sample_haar_orthogonal(n, seed)
        return np.zeros((n, 0)), full
    q = _haar_columns(np.random.default_rng(seed), n, k, complete=True)
    return q[:, :k], q[:, k:]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LowRankInstance:
    """Ground truth ``x_sol = U diag(sigma) V^T`` with its orthogonal complements."""

    dims: ProblemDims
    u_basis: np.ndarray
    v_basis: np.ndarray
    u_perp: np.ndarray
    v_perp: np.ndarray
    singular_values: np.ndarray
    scenario: str
    x_sol: np.ndarray
    seed: int | None = None
    mask: BlockMask = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        for name in ("u_basis", "v_basis", "u_perp", "v_perp",
                     "singular_values", "x_sol"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "mask", BlockMask(self.dims.n, self.dims.l))

    @property
    def n(self) -> int:
        return self.dims.n

    @property
    def k(self) -> int:
        return self.dims.k

    @property
    def l(self) -> int:
        return self.dims.l

    def observations(self) -> np.ndarray:
        return apply_mask(self.mask, self.x_sol)

    def with_singular_values(self, singular_values) -> "LowRankInstance":
        """Same bases, different spectrum."""
        sv = _validate_sv(singular_values, self.k)
        x = (self.u_basis * sv) @ self.v_basis.T
        return LowRankInstance(self.dims, self.u_basis, self.v_basis, self.u_perp,
                               self.v_perp, sv, self.scenario, x, self.seed)


def _validate_sv(singular_values, k: int) -> np.ndarray:
    if singular_values is None:
        return np.ones(k)
    sv = np.asarray(singular_values, dtype=float).reshape(-1)
    if sv.size != k:
        raise DomainError(f"expected {k} singular values, got {sv.size}")
    if np.any(~np.isfinite(sv)) or np.any(sv <= 0):
        raise DomainError("singular values must be finite and positive")
    return sv


def make_instance(n: int, k: int, l: int, scenario: str = "asymmetric",
                  singular_values=None, seed: int = 0) -> LowRankInstance:
    """Draw a rank-``k`` ground truth with Haar bases.

    ``asymmetric`` draws the column and row frames from two independent
    streams spawned from ``seed``; ``symmetric`` reuses the column frame for
    the rows.  ``singular_values`` defaults to all ones.
    """
    dims = ProblemDims(int(n), int(k), int(l))
    if scenario not in SCENARIOS:
        raise DomainError(f"scenario must be one of {SCENARIOS}, got {scenario!r}")
    sv = _validate_sv(singular_values, dims.k)
    seed_u, seed_v = np.random.SeedSequence(seed).spawn(2)
    u, u_perp = _haar_split(dims.n, dims.k, seed_u)
    if scenario == "symmetric":
        v, v_perp = u, u_perp
    else:
        v, v_perp = _haar_split(dims.n, dims.k, seed_v)
    x = (u * sv) @ v.T
    return LowRankInstance(dims, u, v, u_perp, v_perp, sv, scenario, x, seed)


def save_instance(path, inst: LowRankInstance) -> Path:
    """Write ``inst`` to an ``.npz`` container; floats round-trip bit-exactly."""
    path = Path(path)
    meta = {"n": inst.n, "k": inst.k, "l": inst.l, "scenario": inst.scenario,
            "seed": inst.seed, "format": "cinflab-instance/1"}
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.array(json.dumps(meta)),
                 singular_values=inst.singular_values, x_sol=inst.x_sol,
                 u_basis=inst.u_basis, v_basis=inst.v_basis,
                 u_perp=inst.u_perp, v_perp=inst.v_perp)
    return path


def load_instance(path) -> LowRankInstance:
    with np.load(Path(path), allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        dims = ProblemDims(meta["n"], meta["k"], meta["l"])
        return LowRankInstance(
            dims, data["u_basis"], data["v_basis"], data["u_perp"], data["v_perp"],
            data["singular_values"], meta["scenario"], data["x_sol"], meta["seed"])
