import json
from contextlib import nullcontext as _nullcontext

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from cinflab.errors import DomainError, FptSolverError, PoleError
from cinflab.fpt import (SpectralDensity, default_grid, dtilde_support, edge_polynomial,
                         estimate_upper_edge, g_dtilde, g_dtilde_physical, q1_density,
                         q1_zero_atom, q1_zero_atom_residue, r_transform, s_transform,
                         solve_gq1, spectral_edge_beta, stieltjes_invert, write_edge_json,
                         zeta, zeta1, zeta2, zeta3, zeta_direct)
from cinflab.phase import beta_ac

ratio = st.floats(0.05, 0.95, allow_nan=False)
upper_z = st.tuples(st.floats(-3, 3, allow_nan=False), st.floats(1e-3, 3, allow_nan=False))


def semicircle_g(z):
    z = complex(z)
    return (z - np.sqrt(z - 2) * np.sqrt(z + 2)) / 2


# ------------------------------------------------------------------ g_dtilde

def test_g_dtilde_examples():
    assert g_dtilde(2, 0.0, 0.9) == pytest.approx(0.55, abs=1e-14)
    assert g_dtilde(2, 0.4, 0.9).real == pytest.approx((0.7 + np.sqrt(1.93)) / 4, abs=1e-12)
    assert g_dtilde(2, 0.4, 0.9, "minus").real == pytest.approx((0.7 - np.sqrt(1.93)) / 4, abs=1e-12)


@pytest.mark.parametrize("z", [0, 1])
def test_g_dtilde_poles(z):
    with pytest.raises(PoleError):
        g_dtilde(z, 0.4, 0.9)
    with pytest.raises(PoleError):
        g_dtilde_physical(np.array([2.0, z]), 0.4, 0.9)


def test_g_dtilde_bad_branch():
    with pytest.raises(DomainError):
        g_dtilde(2, 0.4, 0.9, "both")


@settings(max_examples=50)
@given(beta=ratio, eta=ratio, zz=upper_z)
def test_branch_sum_and_product(beta, eta, zz):
    z = complex(*zz)
    gp, gm = g_dtilde(z, beta, eta), g_dtilde(z, beta, eta, "minus")
    q = z * z - z
    assert abs(gp + gm - (z - (beta + eta)) / q) <= 1e-10 * (1 + abs(gp) + abs(gm))
    assert abs(gp * gm + beta * eta / (z * z * (z - 1))) <= 1e-10 * (1 + abs(gp * gm))


@settings(max_examples=50)
@given(eta=ratio, zz=upper_z)
def test_projector_law(eta, zz):
    z = complex(*zz)
    assert abs(g_dtilde(z, 0.0, eta) - (eta / z + (1 - eta) / (z - 1))) <= 1e-10


@settings(max_examples=50)
@given(beta=ratio, eta=ratio, zz=upper_z)
def test_g_dtilde_herglotz(beta, eta, zz):
    z = complex(*zz)
    assert g_dtilde_physical(z, beta, eta).imag <= 1e-12


def test_g_dtilde_asymptotics():
    _, r2 = dtilde_support(0.4, 0.9)
    for x in (r2 + 0.1, 1.5, 10.0):
        assert abs(g_dtilde(x + 0j, 0.4, 0.9).imag) < 1e-8
    assert abs(1e6 * g_dtilde(1e6, 0.4, 0.9) - 1) < 1e-4


@pytest.mark.parametrize("beta, eta", [(0.4, 0.9), (0.2, 0.3)])
def test_dtilde_density_with_atoms(beta, eta):
    r1, r2 = dtilde_support(beta, eta)
    x = np.linspace(r1, r2, 4001)
    dens = stieltjes_invert(lambda z: g_dtilde_physical(z, beta, eta), x, 1e-7,
                            atom_candidates=(0.0, 1.0))
    masses = dict(dens.point_masses)
    assert dens.density.min() >= 0
    assert dens.total_mass == pytest.approx(1.0, abs=2e-3)
    # residues of the closed form: sqrt(r1 r2) = |beta - eta| at 0 and
    # sqrt((1 - r1)(1 - r2)) = |1 - beta - eta| at 1
    assert masses[0.0] == pytest.approx(max(beta, eta), abs=1e-6)
    assert masses.get(1.0, 0.0) == pytest.approx(max(0.0, 1 - beta - eta), abs=1e-6)


# ---------------------------------------------------------------- inversion

def test_semicircle_recovery():
    x = np.linspace(-2.5, 2.5, 2001)
    dens = stieltjes_invert(semicircle_g, x, 1e-4)
    exact = np.sqrt(np.clip(4 - x * x, 0, None)) / (2 * np.pi)
    assert np.max(np.abs(dens.density - exact)) < 5e-3
    assert dens.total_mass == pytest.approx(1, abs=1e-3)
    # the smoothing at height epsilon puts the 1e-4 density level slightly past 2
    assert dens.upper_edge == pytest.approx(2, abs=0.03)


def test_cauchy_bump_is_exact():
    a, b, eps = 0.3, 0.2, 1e-3
    x = np.linspace(-2, 2, 101)
    dens = stieltjes_invert(lambda z: 1 / (z - a + 1j * b), x, eps)
    w = b + eps
    np.testing.assert_allclose(dens.density, w / np.pi / ((x - a) ** 2 + w * w), rtol=1e-12)


def test_point_mass_detection():
    dens = stieltjes_invert(lambda z: 0.3 / z + 0.7 * semicircle_g(z), np.linspace(-2.5, 2.5, 501),
                            1e-4, atom_candidates=(0.0, 1.0))
    assert dens.point_masses == [(0.0, pytest.approx(0.3, abs=1e-6))]


def test_inversion_errors():
    def bad(z):
        if z.real > 0.5:
            raise ZeroDivisionError("boom")
        return 1 / z

    with pytest.raises(FptSolverError) as info:
        stieltjes_invert(bad, np.linspace(0, 1, 11), 1e-3)
    assert info.value.grid_index == 6
    with pytest.raises(DomainError):
        stieltjes_invert(semicircle_g, [0.0, 1.0], 0.0)
    with pytest.raises(DomainError):
        stieltjes_invert(semicircle_g, [1.0, 0.0], 1e-3)


def test_bin_averages_and_csv(tmp_path):
    grid = np.linspace(0, 2, 201)
    dens = SpectralDensity(grid=grid, density=np.full(grid.size, 0.5), upper_edge=2.0)
    np.testing.assert_allclose(dens.bin_averages([0, 0.5, 2.0, 3.0]), [0.5, 0.5, 0.0], atol=1e-12)
    rows = dens.write_csv(tmp_path / "d.csv").read_text().splitlines()
    assert rows[0] == "x,f_theory" and len(rows) == 202


# ---------------------------------------------------------------- transforms

@pytest.mark.parametrize("w", [0.1 + 0.05j, 0.3 - 0.1j, -0.2 + 0.2j])
def test_semicircle_r_transform(w):
    assert abs(r_transform(semicircle_g, w, w + 1 / w) - w) < 1e-8


@pytest.mark.parametrize("c, z", [(0.5, 0.3), (0.25, -0.2 + 0.1j), (2.0, 0.1j)])
def test_marchenko_pastur_s_transform(c, z):
    assert abs(s_transform(lambda w: 1 / (1 - c * w), z) - 1 / (1 + c * z)) < 1e-10


# ---------------------------------------------------------------- solve_gq1

def test_solve_gq1_examples():
    far = solve_gq1(100, 1e-4, 0.4, 0.9)
    assert far.g_q1.real == pytest.approx(0.01, rel=0.1) and abs(far.g_q1.imag) < 1e-6
    assert solve_gq1(0.999, 1e-6, 0.4, 0.9).g_q1.imag < -1e-3
    assert abs(solve_gq1(1.5, 1e-6, 0.3, 0.9).g_q1.imag) < 1e-6


@pytest.mark.parametrize("beta, eta", [(0.0, 0.9), (0.5, 0.4), (0.4, 1.0)])
def test_solve_gq1_regime(beta, eta):
    with pytest.raises(DomainError):
        solve_gq1(0.5, 1e-4, beta, eta)


@pytest.mark.parametrize("beta, eta", [(0.4, 0.9), (0.2, 0.7), (0.1, 0.6), (0.6, 0.8)])
def test_solve_gq1_residuals_and_herglotz(beta, eta):
    for x in np.linspace(0.005, 1.5, 60):
        st_ = solve_gq1(x, 1e-4, beta, eta)
        assert st_.max_residual < 1e-9
        assert st_.g_q1.imag <= 1e-10


def test_warm_start_agrees_with_cold():
    cold = solve_gq1(0.6, 1e-4, 0.4, 0.9)
    warm = solve_gq1(0.6, 1e-4, 0.4, 0.9, warm_start=cold.g_q1 * (1 + 1e-3))
    assert abs(warm.g_q1 - cold.g_q1) < 1e-12


# ----------------------------------------------------------------- density

def test_zero_atom():
    assert q1_zero_atom(0.4, 0.9) == pytest.approx(0.75)
    assert q1_zero_atom(0.05, 0.9) == 0
    # residue estimate approaches the rank bound as the probe height shrinks
    assert q1_zero_atom_residue(0.4, 0.9, 1e-11) == pytest.approx(0.75, abs=1e-4)


@pytest.mark.slow
@pytest.mark.parametrize("beta, eta", [(0.4, 0.9), (0.2, 0.7), (0.1, 0.6), (0.6, 0.8),
                                       (0.3, 0.9), (0.5, 0.95)])
def test_density_normalization(beta, eta):
    dens = q1_density(beta, eta)
    assert 0.98 <= dens.total_mass <= 1.02
    assert dens.point_masses == ([(0.0, q1_zero_atom(beta, eta))] if q1_zero_atom(beta, eta) else [])


@pytest.mark.slow
def test_small_beta_concentrates_near_zero():
    dens = q1_density(0.01, 0.9)
    assert dens.upper_edge < 0.05
    assert dens.total_mass == pytest.approx(1, abs=0.02)


@pytest.mark.slow
@pytest.mark.parametrize("eta", np.linspace(0.55, 0.95, 10))
def test_edge_coincidence(eta):
    b = spectral_edge_beta(eta)
    at = q1_density(b, eta, default_grid(1.3, 1201), epsilon=1e-6)
    below = q1_density(0.9 * b, eta, default_grid(1.3, 1201), epsilon=1e-6)
    assert at.upper_edge == pytest.approx(1.0, abs=0.02)
    assert below.upper_edge < 1.0


def test_estimate_upper_edge():
    assert estimate_upper_edge(0.4, 0.9) == pytest.approx(1.0, abs=2e-3)
    assert estimate_upper_edge(0.3, 0.9) < 0.95


def test_density_errors():
    with pytest.raises(DomainError):
        q1_density(0.4, 0.9, [0.0])
    with pytest.raises(DomainError):
        default_grid(0.0)


# ------------------------------------------------------------- edge algebra

def test_edge_polynomial_example():
    ep = edge_polynomial(0.4, 0.9)
    np.testing.assert_allclose([ep.c3, ep.c2, ep.c1, ep.c0], [-1.6, 2.4, -0.9, 0.1], atol=1e-14)
    assert ep.r == pytest.approx(1.44, abs=1e-12)
    assert ep.r_closed_form == pytest.approx(ep.r, abs=1e-12)
    assert ep.y_opt == pytest.approx(0.25, abs=1e-12)
    assert zeta3(0.25, 0.4, 0.9) == pytest.approx(0, abs=1e-14)


@settings(max_examples=50)
@given(beta=ratio, eta=ratio)
def test_r_closed_form(beta, eta):
    ep = edge_polynomial(beta, eta)
    assert ep.r == pytest.approx(ep.r_closed_form, abs=1e-12)


@given(eta=st.floats(0.55, 0.95))
def test_stationarity_at_edge(eta):
    b = spectral_edge_beta(eta)
    ep = edge_polynomial(b, eta)
    assert abs(ep.stationarity(ep.y_opt)) < 1e-10
    assert abs(ep.zeta3(ep.y_opt)) < 1e-10


@settings(max_examples=50)
@given(beta=ratio, eta=ratio, y=st.floats(-2, 2))
def test_zeta_factorization(beta, eta, y):
    assert zeta(y, beta, eta) == pytest.approx(zeta_direct(y, beta, eta), abs=1e-10)


@settings(max_examples=100)
@given(beta=ratio, eta=ratio, y=st.floats(-2, 2))
def test_zeta2_factor(beta, eta, y):
    # zeta = zeta2 * (P + (2y - 1) sqrt(rad)) wherever the radicand is real
    rad = (y - (beta + eta)) ** 2 + 4 * beta * eta * (y - 1)
    if rad < 1e-12:
        with pytest.raises(DomainError) if rad < -1e-14 else _nullcontext():
            zeta2(y, beta, eta)
        return
    p = 2 * (beta - 1) * y * y + (1 - 2 * beta + 2 * eta) * y + beta - eta
    other = p + (2 * y - 1) * np.sqrt(rad)
    assert zeta2(y, beta, eta) * other == pytest.approx(zeta(y, beta, eta), abs=1e-10)


def test_r_negative_gives_nan():
    ep = edge_polynomial(0.7, 0.2)
    assert ep.r < 0 and np.isnan(ep.y_opt)
    assert np.isfinite(zeta3(0.3, 0.7, 0.2))


def test_zeta_at_zero():
    for b, e in ((0.4, 0.9), (0.1, 0.3), (0.7, 0.2)):
        assert zeta(0.0, b, e) == 0


def test_zeta1_examples():
    assert abs(zeta1(0.25, 0.4, 0.9)) < 1e-10
    # zeta1 is real on (0, 1/2) only below the D-tilde support, r1 = 0.2 here
    y = np.linspace(0.05, 0.2, 50)
    assert np.all(zeta1(y, 0.5, 0.9) < 0)
    with pytest.raises(DomainError):
        zeta1(0.3, 0.5, 0.9)


@pytest.mark.parametrize("y", [0.0, 0.5, 1.0])
def test_zeta1_poles(y):
    with pytest.raises(DomainError):
        zeta1(y, 0.3, 0.9)


def test_zeta1_rejects_beta_zero():
    with pytest.raises(DomainError):
        zeta1(0.2, 0.0, 0.9)


@pytest.mark.parametrize("beta", [0.2, 0.3, 0.35])
def test_zeta_chain_roots(beta):
    eta = 0.9
    r1, _ = dtilde_support(beta, eta)
    y = np.linspace(1e-3, min(r1, 0.5) - 1e-9, 4000)
    z1 = zeta1(y, beta, eta)
    idx = np.nonzero(np.diff(np.sign(z1)))[0]
    assert idx.size >= 1
    ep = edge_polynomial(beta, eta)
    cubic = np.roots([ep.c3, ep.c2, ep.c1, ep.c0]).real
    for j in idx:
        root = brentq(lambda t: zeta1(t, beta, eta), y[j], y[j + 1], xtol=1e-15)
        assert np.min(np.abs(cubic - root)) < 1e-8


def test_zeta2_real_domain():
    assert np.isfinite(zeta2(0.1, 0.5, 0.9))
    with pytest.raises(DomainError):
        zeta2(0.5, 0.5, 0.9)


@pytest.mark.parametrize("eta, beta", [(0.9, 0.4), (0.5, 0.0), (1.0, 1.0)])
def test_spectral_edge_beta(eta, beta):
    assert spectral_edge_beta(eta) == pytest.approx(beta, abs=1e-12)
    assert spectral_edge_beta(eta) == beta_ac(eta)


def test_write_edge_json(tmp_path):
    rec = json.loads(write_edge_json(tmp_path / "edge.json", 0.4, 0.9, 1.0).read_text())
    assert rec["y_opt"] == pytest.approx(0.25) and rec["beta_edge"] == pytest.approx(0.4)
