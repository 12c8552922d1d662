"""Free-probability numerics for the spectrum of the certificate matrix.

Conventions: ``G(z) = int f(x) / (z - x) dx`` so that ``Im G <= 0`` on the
upper half plane and ``f(x) = -Im G(x + i eps) / pi`` as ``eps -> 0+``.

The coupled system for ``G = G_{Q1}(z)`` is solved through a single complex
unknown.  With ``s = sqrt(zG - 1)``, ``t = sqrt(G)`` and ``w = s / t``::

    G = 1 / (z - w**2),   y = w / (w + z),   z1 = -G (w + z),   S_{D1}(z1) = w + 1,

and the remaining relation

    (1/beta) (G_Dt(y) - eta/y - (1-beta-eta)/(y-1)) = z1 * S_{D1}(z1)

is rationalized in ``w`` by eliminating the square root inside ``G_Dt``.  After
removing the spurious factor ``w + z`` the resulting polynomial has low degree
and all its roots are found at once from the companion matrix.  Roots are then
filtered by the unsquared residual (either sign of the square root) and by the
sign of ``Im G``, and the physical one is tracked by continuation.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import DomainError, FptSolverError, PoleError
from .phase import beta_ac

__all__ = [
    "GTransformSample",
    "FptSystemState",
    "EdgePolynomial",
    "SpectralDensity",
    "dtilde_support",
    "g_dtilde",
    "g_dtilde_sample",
    "g_dtilde_physical",
    "invert_g",
    "r_transform",
    "s_transform",
    "stieltjes_invert",
    "solve_gq1",
    "q1_density",
    "q1_zero_atom",
    "q1_zero_atom_residue",
    "estimate_upper_edge",
    "default_grid",
    "edge_polynomial",
    "zeta1",
    "zeta2",
    "zeta",
    "zeta_direct",
    "zeta3",
    "spectral_edge_beta",
    "edge_record",
    "write_edge_json",
]

BRANCHES = ("plus", "minus")
#: density level defining the upper edge of the support
EDGE_LEVEL = 1e-4


def _sign(branch: str) -> float:
    if branch not in BRANCHES:
        raise DomainError(f"branch must be one of {BRANCHES}, got {branch!r}")
    return 1.0 if branch == "plus" else -1.0


def _check_params(beta, eta):
    if not (0.0 <= beta <= 1.0 and 0.0 <= eta <= 1.0):
        raise DomainError(f"need 0 <= beta, eta <= 1, got beta={beta}, eta={eta}")


# ---------------------------------------------------------------- G of D-tilde

def dtilde_support(beta: float, eta: float) -> tuple[float, float]:
    """Endpoints of the continuous part of the D-tilde law.

    They are the roots of ``(z - (beta+eta))**2 + 4 beta eta (z - 1)``, the
    radicand of :func:`g_dtilde`; the radicand is negative strictly between them.
    """
    _check_params(beta, eta)
    c = beta + eta - 2.0 * beta * eta
    h = np.sqrt(max(c * c - (beta - eta) ** 2, 0.0))
    return c - h, c + h


def g_dtilde(z, beta: float, eta: float, branch: str = "plus") -> complex:
    """Closed-form G-transform of D-tilde on the chosen algebraic branch.

    ``(z - (beta+eta) +- sqrt((z-(beta+eta))**2 + 4 beta eta (z-1))) / (2 (z**2 - z))``.
    The square root is the product ``sqrt(z - r1) sqrt(z - r2)`` of principal
    roots over the support endpoints ``r1 <= r2`` (:func:`dtilde_support`).
    It is analytic off ``[r1, r2]`` and behaves like ``z`` at infinity, so the
    plus branch is the G-transform itself everywhere off the support; the
    minus branch is the other root of the defining quadratic.

    Raises
    ------
    PoleError
        At ``z = 0`` or ``z = 1``.
    """
    _check_params(beta, eta)
    sgn = _sign(branch)
    z = complex(z)
    if z == 0 or z == 1:
        raise PoleError(f"g_dtilde has a pole at z={z}")
    r1, r2 = dtilde_support(beta, eta)
    root = np.sqrt(z - r1) * np.sqrt(z - r2)
    return complex((z - (beta + eta) + sgn * root) / (2.0 * (z * z - z)))


@dataclass(frozen=True)
class GTransformSample:
    z: complex
    value: complex
    branch: str


def g_dtilde_sample(z, beta, eta, branch="plus") -> GTransformSample:
    return GTransformSample(complex(z), g_dtilde(z, beta, eta, branch), branch)


def g_dtilde_physical(z, beta: float, eta: float):
    """Plus branch of :func:`g_dtilde`, vectorized over ``z``."""
    r1, r2 = dtilde_support(beta, eta)
    z = np.asarray(z, dtype=complex)
    if np.any((z == 0) | (z == 1)):
        raise PoleError("g_dtilde has poles at z=0 and z=1")
    root = np.sqrt(z - r1) * np.sqrt(z - r2)
    out = (z - (beta + eta) + root) / (2.0 * (z * z - z))
    return complex(out) if out.ndim == 0 else out


# ------------------------------------------------------- transform identities

def _newton(f, x0, tol=1e-13, max_iter=100):
    x = complex(x0)
    fx = f(x)
    for _ in range(max_iter):
        h = 1e-7 * (1.0 + abs(x))
        d = (f(x + h) - fx) / h
        if d == 0:
            break
        step = fx / d
        x -= step
        fx = f(x)
        if abs(step) <= tol * (1.0 + abs(x)):
            return x
    if abs(fx) > 1e-8:
        raise FptSolverError("Newton iteration did not converge", last_residual=abs(fx))
    return x


def invert_g(g: Callable[[complex], complex], w, z0) -> complex:
    """Functional inverse: the ``z`` near ``z0`` with ``g(z) = w``."""
    return _newton(lambda z: g(z) - w, z0)


def r_transform(g: Callable[[complex], complex], w, z0) -> complex:
    """``R(w) = G^{-1}(w) - 1/w``, with the inverse taken near ``z0``."""
    return invert_g(g, w, z0) - 1.0 / complex(w)


def s_transform(r: Callable[[complex], complex], z, s0=1.0) -> complex:
    """``S(z)`` solving ``S(z) = 1 / R(z S(z))``."""
    z = complex(z)
    return _newton(lambda s: s * r(z * s) - 1.0, s0)


# --------------------------------------------------------------- inversion

@dataclass(frozen=True, eq=False)
class SpectralDensity:
    """Samples of a density on an ascending grid, plus detected atoms.

    ``density`` is the continuous part only: the Cauchy kernels of the atoms
    in ``point_masses`` are subtracted before inversion.
    """

    grid: np.ndarray
    density: np.ndarray
    upper_edge: float
    point_masses: list = field(default_factory=list)
    epsilon: float = 0.0
    clipped: float = 0.0
    branches: np.ndarray | None = field(default=None, repr=False)

    @property
    def continuous_mass(self) -> float:
        return float(np.trapezoid(self.density, self.grid))

    @property
    def atom_mass(self) -> float:
        return float(sum(m for _, m in self.point_masses))

    @property
    def total_mass(self) -> float:
        return self.continuous_mass + self.atom_mass

    @property
    def mass_deficit(self) -> float:
        """``1 - total_mass``; mass not accounted for on the grid."""
        return 1.0 - self.total_mass

    def bin_averages(self, edges) -> np.ndarray:
        """Average of the continuous density over each bin ``[e_i, e_{i+1}]``.

        The cumulative trapezoid integral on the grid is interpolated at the
        edges; bins outside the grid count as zero density.
        """
        edges = np.asarray(edges, dtype=float)
        cum = np.concatenate([[0.0], np.cumsum(
            0.5 * (self.density[1:] + self.density[:-1]) * np.diff(self.grid))])
        prim = np.interp(edges, self.grid, cum)
        return np.diff(prim) / np.diff(edges)

    def write_csv(self, path) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "f_theory"])
            for x, f in zip(self.grid, self.density):
                w.writerow([repr(float(x)), repr(float(f))])
        return path


def _check_grid(x_grid) -> np.ndarray:
    x = np.asarray(x_grid, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise DomainError("x_grid must be a 1-d array with at least two points")
    if np.any(np.diff(x) <= 0) or np.any(~np.isfinite(x)):
        raise DomainError("x_grid must be finite and strictly ascending")
    return x


def _upper_edge(x, f):
    above = np.nonzero(f > EDGE_LEVEL)[0]
    return float(x[above[-1]]) if above.size else float("nan")


def _finish_density(x, g_vals, epsilon, atoms, branches=None) -> SpectralDensity:
    z = x + 1j * epsilon
    g_cont = np.array(g_vals, dtype=complex)
    for a, m in atoms:
        g_cont -= m / (z - a)
    raw = -g_cont.imag / np.pi
    clipped = float(max(0.0, -raw.min()))
    dens = np.clip(raw, 0.0, None)
    return SpectralDensity(grid=x, density=dens, upper_edge=_upper_edge(x, dens),
                           point_masses=list(atoms), epsilon=float(epsilon),
                           clipped=clipped, branches=branches)


def _residue(g, a, delta):
    return float((1j * delta * g(a + 1j * delta)).real)


def stieltjes_invert(g: Callable[[complex], complex], x_grid, epsilon: float,
                     atom_candidates=(), atom_epsilon: float | None = None,
                     atom_threshold: float = 1e-6) -> SpectralDensity:
    """Recover a density from its G-transform sampled just above the real axis.

    Parameters
    ----------
    g : callable
        ``z -> G(z)`` for ``Im z > 0``.
    x_grid : array_like
        Strictly ascending sample points.
    epsilon : float
        Distance from the real axis.
    atom_candidates : sequence of float, optional
        Locations probed for point masses.  The mass at ``a`` is estimated by
        the residue ``Re(i d G(a + i d))`` with ``d = atom_epsilon``
        (default ``epsilon * 1e-3``); masses above ``atom_threshold`` are kept
        and their Cauchy kernels removed from the continuous part.

    Raises
    ------
    FptSolverError
        Wrapping any failure of ``g``, with the grid index and location.
    """
    if not epsilon > 0:
        raise DomainError("epsilon must be > 0")
    x = _check_grid(x_grid)
    vals = np.empty(x.size, dtype=complex)
    for i, xi in enumerate(x):
        try:
            vals[i] = g(xi + 1j * epsilon)
        except Exception as exc:
            raise FptSolverError(f"G sampler failed at x={xi!r} (grid index {i}): {exc}",
                                 grid_index=i, x=float(xi)) from exc
    delta = epsilon * 1e-3 if atom_epsilon is None else atom_epsilon
    atoms = []
    for a in atom_candidates:
        m = _residue(g, float(a), delta)
        if m > atom_threshold:
            atoms.append((float(a), m))
    return _finish_density(x, vals, epsilon, atoms)


# ---------------------------------------------------------- coupled system

@dataclass(frozen=True)
class FptSystemState:
    """Solution of the coupled system at ``z = x + i eps``.

    ``residuals`` holds the absolute residuals of (i) the definition of ``y``
    from ``z1`` and ``S_{D1}(z1)``, (ii) the quadratic defining ``G_Dt(y)``,
    divided by one plus the magnitude of its terms since ``G_Dt`` is huge
    near its poles, and (iii) the D1 relation linking them.
    """

    z: complex
    g_q1: complex
    z1: complex
    y: complex
    s_d1: complex
    g_dtilde: complex
    branch: str
    residuals: tuple

    @property
    def max_residual(self) -> float:
        return float(max(self.residuals))


def _poly_w(z: complex, b: float, e: float) -> np.ndarray:
    # squared-out relation in w, divided by the spurious factor (w + z)
    zmw2 = np.array([z, 0.0, -1.0], dtype=complex)
    k = npoly.polyadd(npoly.polyadd(-b * z * np.array([0.0, 1.0, 1.0]), e * z * zmw2),
                      -(1.0 - b - e) * npoly.polymul([0.0, 1.0], zmw2))
    lin = np.array([-(b + e) * z, 1.0 - b - e], dtype=complex)
    p = npoly.polyadd(npoly.polyadd(npoly.polymul(k, k),
                                    npoly.polymul(npoly.polymul(lin, k), zmw2)),
                      b * e * z * npoly.polymul([z, 1.0], npoly.polymul(zmw2, zmw2)))
    q, _ = npoly.polydiv(p, np.array([z, 1.0], dtype=complex))
    return q


def _d1_side(w, z, b, e, sgn):
    """``y``, ``G_Dt(y)`` and the left side of the D1 relation at ``w``.

    ``y - 1 = -z / (w + z)`` is formed directly, and when the chosen branch
    has a removable pole at ``y = 1`` the combination
    ``G_Dt(y) - (1-b-e)/(y-1)`` is rationalized to avoid cancellation.
    """
    y = w / (w + z)
    y1 = -z / (w + z)
    c = 1.0 - b - e
    a = y - (b + e)
    root = sgn * np.sqrt(a * a + 4.0 * b * e * y1)
    gd = (a + root) / (2.0 * y * y1)
    near = a - 2.0 * y * c + root
    far = a - 2.0 * y * c - root
    if abs(near) >= abs(far):
        combo = near / (2.0 * y * y1)
    else:
        combo = -2.0 * (y * c * (b + e) + b * e) / (y * far)
    return y, gd, (combo - e / y) / b


def _system_residual(w, z, b, e, sgn):
    _, _, lhs = _d1_side(w, z, b, e, sgn)
    return lhs + (w + 1.0) * (w + z) / (z - w * w)


def _state(w, z, b, e, branch) -> FptSystemState:
    y, gd, lhs = _d1_side(w, z, b, e, _sign(branch))
    g = 1.0 / (z - w * w)
    z1 = -g * (w + z)
    s_d1 = w + 1.0
    a = y - (b + e)
    r_y = abs(y - (z1 + 1.0) / (z1 * s_d1))
    # the quadratic defining G_Dt(y), scaled by the size of its terms
    terms = (y * (y * y - y) * gd * gd, y * a * gd, b * e)
    r_gd = abs(terms[0] - terms[1] - terms[2]) / (1.0 + sum(abs(t) for t in terms))
    r_d1 = abs(lhs - z1 * s_d1)
    return FptSystemState(z=complex(z), g_q1=complex(g), z1=complex(z1), y=complex(y),
                          s_d1=complex(s_d1), g_dtilde=complex(gd), branch=branch,
                          residuals=(float(r_y), float(r_gd), float(r_d1)))


def _polish(w, z, b, e, sgn, steps=8):
    f = _system_residual(w, z, b, e, sgn)
    for _ in range(steps):
        h = 1e-5 * abs(w)
        d = (_system_residual(w + h, z, b, e, sgn)
             - _system_residual(w - h, z, b, e, sgn)) / (2.0 * h)
        if d == 0 or not np.isfinite(d):
            break
        w_new = w - f / d
        f_new = _system_residual(w_new, z, b, e, sgn)
        if not abs(f_new) < abs(f):
            break
        w, f = w_new, f_new
    return w


def _candidates(z, b, e):
    """Admissible states at ``z``; also the best residual seen."""
    roots = npoly.polyroots(_poly_w(z, b, e))
    out = []
    best = np.inf
    for w in roots:
        if w == 0 or w + z == 0:
            continue
        res = {br: abs(_system_residual(w, z, b, e, _sign(br))) for br in BRANCHES}
        br = min(res, key=res.get)
        wp = _polish(w, z, b, e, _sign(br))
        if abs(wp - w) <= 1e-6 * (abs(w) + abs(z)):
            w = wp
        r = abs(_system_residual(w, z, b, e, _sign(br)))
        g = 1.0 / (z - w * w)
        best = min(best, r)
        if not r < 1e-6 * (1.0 + abs(g)):
            continue
        # w -> 0 sends y to the pole of G_Dt and G to 1/z (all mass at zero)
        if abs(z * g - 1.0) < 1e-8:
            continue
        st = _state(w, z, b, e, br)
        if st.g_q1.imag <= 1e-10 + 1e-12 * abs(st.g_q1):
            out.append(st)
    return out, best


def _pick(z, b, e, ref):
    cands, best = _candidates(z, b, e)
    if not cands:
        raise FptSolverError(f"no admissible root at z={z}", last_residual=float(best),
                             x=float(z.real))
    return min(cands, key=lambda s: abs(s.g_q1 - ref))


def _check_regime(beta, eta, epsilon):
    if not (0.0 < beta <= eta < 1.0):
        raise DomainError(f"need 0 < beta <= eta < 1, got beta={beta}, eta={eta}")
    if not epsilon > 0:
        raise DomainError("epsilon must be > 0")


def _vertical(x, epsilon, b, e, top=10.0, per_decade=24):
    # follow the physical root down from far above the axis, where G ~ 1/z;
    # z G is smooth along the path, so it is extrapolated linearly in log-height
    decades = max(np.log10(top / epsilon), 1.0)
    heights = np.geomspace(top, epsilon, int(np.ceil(per_decade * decades)) + 1)
    q_prev = q_cur = 1.0
    st = None
    for h in heights:
        z = complex(x, h)
        st = _pick(z, b, e, (2.0 * q_cur - q_prev) / z)
        q_prev, q_cur = q_cur, z * st.g_q1
    return st


def solve_gq1(x: float, epsilon: float, beta: float, eta: float,
              warm_start: complex | None = None) -> FptSystemState:
    """Solve the coupled system for ``G_{Q1}(x + i epsilon)``.

    Without ``warm_start`` the physical root is followed from ``x + 10i``
    (where ``G ~ 1/z`` identifies it unambiguously) down to ``x + i epsilon``.
    With ``warm_start`` the admissible root closest to it is returned, which is
    what a sweep along the real axis needs.

    Raises
    ------
    FptSolverError
        If no root passes the residual and sign filters.
    """
    _check_regime(beta, eta, epsilon)
    x = float(x)
    if warm_start is None:
        return _vertical(x, epsilon, beta, eta)
    try:
        return _pick(complex(x, epsilon), beta, eta, complex(warm_start))
    except FptSolverError as exc:
        raise FptSolverError(f"{exc} (warm start {warm_start})",
                             last_residual=exc.last_residual, x=x) from exc


def q1_zero_atom(beta: float, eta: float) -> float:
    """Weight of the atom at zero, ``max(0, 1 - (1 - eta) / beta)``.

    ``Q1`` is ``k x k`` with rank at most ``n - l``, so at least a fraction
    ``1 - (n - l) / k`` of its eigenvalues vanish.
    """
    _check_regime(beta, eta, 1.0)
    return max(0.0, 1.0 - (1.0 - eta) / beta)


def q1_zero_atom_residue(beta: float, eta: float, epsilon: float = 1e-9) -> float:
    """Residue estimate ``Re(i eps G(i eps))`` of the atom at zero.

    Independent of :func:`q1_zero_atom`; a square-root singularity of the
    continuous part at zero leaks ``O(sqrt(eps))`` into it.
    """
    _check_regime(beta, eta, epsilon)
    return _residue(lambda z: solve_gq1(z.real, z.imag, beta, eta).g_q1, 0.0, epsilon)


def _in_support(x, beta, eta, delta=1e-9):
    g = solve_gq1(x, delta, beta, eta).g_q1
    return -g.imag / np.pi > 1e-6


def estimate_upper_edge(beta: float, eta: float, rtol: float = 1e-4) -> float:
    """Upper end of the support by bisection on cold-started solves.

    Assumes the part of the support above the bisection bracket is connected.
    """
    _check_regime(beta, eta, 1.0)
    hi = 1.5
    while _in_support(hi, beta, eta):
        hi *= 2.0
        if hi > 1e8:
            raise FptSolverError("support appears unbounded", x=hi)
    lo = 0.0
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if _in_support(mid, beta, eta):
            lo = mid
        else:
            hi = mid
    return hi


def default_grid(top: float, points: int = 1201) -> np.ndarray:
    """``[0, top]`` sampled uniformly, plus geometric refinement towards zero.

    The continuous part may have an integrable singularity at the origin; the
    geometric cells near zero keep the trapezoid rule accurate there.
    """
    if not top > 0:
        raise DomainError("top must be > 0")
    fine = np.geomspace(1e-9 * top, 0.02 * top, points // 3)
    coarse = np.linspace(0.0, top, points)
    return np.unique(np.concatenate([coarse, fine]))


def q1_density(beta: float, eta: float, x_grid=None,
               epsilon: float = 1e-4) -> SpectralDensity:
    """Limiting eigenvalue density of ``Q1 @ Q1_perp``.

    The grid is swept left to right; the first point is cold-started and each
    later point takes the admissible root nearest a linear extrapolation of
    the previous two values of ``G`` minus the zero-atom kernel.  The
    atom at zero (:func:`q1_zero_atom`) is reported in ``point_masses`` and
    its kernel removed from the continuous part.  The default grid is
    :func:`default_grid` over ``[0, 1.1 * estimate_upper_edge]``.  Use ``epsilon=1e-6``
    when locating the edge and ``1e-4`` for smooth curves.

    Raises
    ------
    FptSolverError
        With ``grid_index`` set to the failing sample.
    """
    _check_regime(beta, eta, epsilon)
    if x_grid is None:
        x_grid = default_grid(1.1 * estimate_upper_edge(beta, eta))
    x = _check_grid(x_grid)
    m0 = q1_zero_atom(beta, eta)
    z = x + 1j * epsilon
    vals = np.empty(x.size, dtype=complex)
    # continuous part, which is what varies smoothly along the grid
    smooth = np.empty(x.size, dtype=complex)
    branches = np.empty(x.size, dtype=object)
    ref = None
    start = 0
    for i, xi in enumerate(x):
        if xi <= 0.0:
            # the atom at zero makes the origin a poor place to continue from
            ref, start = None, i + 1
        elif i - start >= 2:
            t = (xi - x[i - 1]) / (x[i - 1] - x[i - 2])
            ref = m0 / z[i] + smooth[i - 1] + t * (smooth[i - 1] - smooth[i - 2])
        elif i - start == 1:
            ref = m0 / z[i] + smooth[i - 1]
        try:
            st = solve_gq1(xi, epsilon, beta, eta, warm_start=ref)
        except FptSolverError as exc:
            raise FptSolverError(f"sweep failed at grid index {i}: {exc}",
                                 last_residual=exc.last_residual, grid_index=i,
                                 x=float(xi)) from exc
        vals[i] = st.g_q1
        smooth[i] = st.g_q1 - m0 / z[i]
        branches[i] = st.branch
    atoms = [(0.0, m0)] if m0 > 0 else []
    return _finish_density(x, vals, epsilon, atoms, branches)


# --------------------------------------------------------------- edge algebra

@dataclass(frozen=True)
class EdgePolynomial:
    """Cubic ``zeta3(y) = c3 y^3 + c2 y^2 + c1 y + c0`` and its stationary point."""

    beta: float
    eta: float
    c3: float
    c2: float
    c1: float
    c0: float
    c00: float
    r: float
    y_opt: float

    @property
    def r_closed_form(self) -> float:
        b, e = self.beta, self.eta
        return 1 + b * b + 4 * e * e - 2 * b - 2 * e - b * e

    def zeta3(self, y):
        return ((self.c3 * y + self.c2) * y + self.c1) * y + self.c0

    def stationarity(self, y):
        """``d/dy zeta3 = 3 c3 y^2 + 2 c2 y + c1``."""
        return (3 * self.c3 * y + 2 * self.c2) * y + self.c1


def edge_polynomial(beta: float, eta: float) -> EdgePolynomial:
    """Coefficients of ``zeta3`` and ``y_opt = (-c2 + sqrt(r)) / (3 c3)``.

    ``y_opt`` is NaN when ``r < 0``; ``c3 = beta - 2`` never vanishes.
    """
    _check_params(beta, eta)
    c3 = beta - 2.0
    c2 = 5.0 - 2.0 * beta - 2.0 * eta
    c1 = beta - 4.0 + 3.0 * eta
    c0 = 1.0 - eta
    r = c2 * c2 - 3.0 * c1 * c3
    # r < 0: the cubic has no real stationary point
    y_opt = (-c2 + np.sqrt(r)) / (3.0 * c3) if r >= 0 else float("nan")
    return EdgePolynomial(beta, eta, c3, c2, c1, c0, 0.0, r, float(y_opt))


def zeta3(y, beta: float, eta: float):
    return edge_polynomial(beta, eta).zeta3(y)


def zeta(y, beta: float, eta: float):
    """``4 beta y zeta3(y)``."""
    return 4.0 * beta * np.asarray(y) * zeta3(y, beta, eta)


def _zeta_parts(y, beta, eta):
    y = np.asarray(y, dtype=float)
    p = 2 * (beta - 1) * y * y + (1 - 2 * beta + 2 * eta) * y + beta - eta
    rad = (y - (beta + eta)) ** 2 + 4 * beta * eta * (y - 1)
    return y, p, rad


def zeta_direct(y, beta: float, eta: float):
    """``zeta`` from its unexpanded definition ``P(y)**2 - (2y-1)**2 * rad(y)``."""
    _check_params(beta, eta)
    y, p, rad = _zeta_parts(y, beta, eta)
    return p * p - (2 * y - 1) ** 2 * rad


def _real_radicand(rad, y):
    if np.any(rad < -1e-14):
        bad = np.asarray(y)[rad < -1e-14]
        raise DomainError(f"zeta is complex at y={bad.ravel()[:3]}: inside the D-tilde support")
    return np.sqrt(np.clip(rad, 0.0, None))


def zeta2(y, beta: float, eta: float):
    """``P(y) - (2y - 1) sqrt(rad(y))``; real only outside the D-tilde support."""
    _check_params(beta, eta)
    y, p, rad = _zeta_parts(y, beta, eta)
    return p - (2 * y - 1) * _real_radicand(rad, y)


def zeta1(y, beta: float, eta: float):
    """Edge function built from the minus branch of ``G_Dt``.

    ``-1/(2y-1) + (G_Dt^-(y) - eta/y - (1-beta-eta)/(y-1)) / beta``.

    Raises
    ------
    DomainError
        At the poles ``y in {0, 1/2, 1}``, for ``beta = 0``, or where the
        square root is imaginary (``y`` strictly inside the D-tilde support).
    """
    _check_params(beta, eta)
    if beta == 0:
        raise DomainError("zeta1 needs beta > 0")
    y = np.asarray(y, dtype=float)
    if np.any((y == 0) | (y == 0.5) | (y == 1)):
        raise DomainError("zeta1 has poles at y = 0, 1/2, 1")
    a = y - (beta + eta)
    root = _real_radicand(a * a + 4 * beta * eta * (y - 1), y)
    gd = (a - root) / (2 * (y * y - y))
    out = -1.0 / (2 * y - 1) + (gd - eta / y - (1 - beta - eta) / (y - 1)) / beta
    return float(out) if out.ndim == 0 else out


def spectral_edge_beta(eta):
    """Rank ratio at which the upper spectral edge of ``Q1 @ Q1_perp`` reaches one."""
    return beta_ac(eta)


def edge_record(beta: float, eta: float, upper_edge: float) -> dict:
    return {"beta": beta, "eta": eta, "y_opt": edge_polynomial(beta, eta).y_opt,
            "upper_edge": upper_edge, "beta_edge": spectral_edge_beta(eta)}


def write_edge_json(path, beta: float, eta: float, upper_edge: float) -> Path:
    """Edge report ``{beta, eta, y_opt, upper_edge, beta_edge}``."""
    path = Path(path)
    path.write_text(json.dumps(edge_record(beta, eta, upper_edge), indent=2) + "\n")
    return path
