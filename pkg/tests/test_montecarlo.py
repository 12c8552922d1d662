import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cinflab.errors import DomainError
from cinflab.montecarlo import (GridConfig, default_workers, empirical_transition, ratio_floor,
                                run_grid, spectrum_experiment, stable_seed, write_comparison_csv,
                                write_grid_csv, write_summary_json)


def test_ratio_floor():
    assert ratio_floor(0.7, 80) == 56
    assert ratio_floor(0.9, 60) == 54
    assert ratio_floor(0.35, 20) == 7


def test_stable_seed():
    assert stable_seed(1, 2, 3) == stable_seed(1, 2, 3)
    assert len({stable_seed(1, 2, 3), stable_seed(1, 3, 2), stable_seed(2, 2, 3)}) == 3
    assert 0 <= stable_seed(0) < 2**64
    with pytest.raises(DomainError):
        stable_seed(0, -1)


@pytest.mark.parametrize("kw", [dict(trials=0), dict(method="magic"), dict(k_values=[50]),
                                dict(eta_values=(1.5,)), dict(master_seed=-1), dict(k_step=0),
                                dict(eta_values=())])
def test_config_validation(kw):
    base = dict(n=40, eta_values=(0.8,), trials=2)
    base.update(kw)
    with pytest.raises(DomainError):
        GridConfig(**base)


def test_config_k_defaults():
    cfg = GridConfig(n=20, eta_values=(0.5, 0.8), k_step=3)
    assert cfg.l_of(1) == 16
    assert cfg.ks_of(0) == [0, 3, 6, 9]
    mapped = GridConfig(n=20, eta_values=(0.5, 0.8), k_values={0: [1, 2], 1: [5]})
    assert mapped.ks_of(1) == [5]


def test_zero_rank_cell_always_succeeds():
    res = run_grid(GridConfig(n=80, eta_values=(0.9,), k_values=[0], trials=7))
    assert res.cells[0].successes == 7


@pytest.mark.slow
def test_grid_brackets_the_edge():
    cfg = GridConfig(n=80, eta_values=(0.9,), k_values=list(range(4, 49, 4)), trials=20)
    res = run_grid(cfg)
    frac = {c.k: c.fraction for c in res.cells}
    assert all(frac[k] >= 0.9 for k in frac if k <= 24), frac
    assert all(frac[k] <= 0.1 for k in frac if k >= 40), frac


def test_parallel_equals_serial():
    cfg = GridConfig(n=30, eta_values=(0.7, 0.9), k_values=[2, 8, 14, 20], trials=6,
                     master_seed=3)
    assert run_grid(cfg).counts() == run_grid(cfg, workers=2).counts()


def test_adding_cells_keeps_streams():
    small = GridConfig(n=30, eta_values=(0.8,), k_values=[6, 12], trials=8, master_seed=5)
    big = GridConfig(n=30, eta_values=(0.8,), k_values=[3, 6, 9, 12, 15], trials=8, master_seed=5)
    a = {c.k: c.successes for c in run_grid(small).cells}
    b = {c.k: c.successes for c in run_grid(big).cells}
    assert all(a[k] == b[k] for k in a)


def test_solver_method_small():
    cfg = GridConfig(n=40, eta_values=(0.8,), k_values=[2], trials=5, method="solver")
    cell = run_grid(cfg).cells[0]
    assert cell.successes == 5 and cell.errors == 0 and cell.nonconverged == 0


def test_empirical_transition_examples():
    est = empirical_transition([8, 16], [10, 0], 10, 80)
    assert est.beta == pytest.approx(0.15) and not est.saturated
    sat = empirical_transition([4, 8, 12], [5, 5, 5], 5, 80)
    assert sat.saturated and sat.beta == pytest.approx(12 / 80)
    fail = empirical_transition([4, 8, 12], [0, 0, 0], 5, 80)
    assert fail.saturated and fail.beta == pytest.approx(4 / 80)
    with pytest.raises(DomainError):
        empirical_transition([4], [1], 1, 80)
    with pytest.raises(DomainError):
        empirical_transition([4, 8], [3, 1], 2, 80)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 10), min_size=2, max_size=12))
def test_empirical_transition_is_bounded_and_order_free(successes):
    ks = np.arange(len(successes)) * 3
    est = empirical_transition(ks, successes, 10, 60)
    assert ks[0] / 60 <= est.beta <= ks[-1] / 60
    perm = np.random.default_rng(0).permutation(len(ks))
    again = empirical_transition(ks[perm], np.array(successes)[perm], 10, 60)
    assert again.beta == pytest.approx(est.beta)


def test_spectrum_degenerate_and_errors():
    rep = spectrum_experiment(50, 0.0, 0.9, trials=2)
    assert rep.degenerate and rep.eigenvalues.size == 0
    with pytest.raises(DomainError):
        write_comparison_csv(rep, "unused.csv")
    with pytest.raises(DomainError):
        spectrum_experiment(100, 0.9, 0.5, trials=1)
    with pytest.raises(DomainError):
        spectrum_experiment(100, 0.3, 0.9, trials=0)


def test_spectrum_small_run(tmp_path):
    rep = spectrum_experiment(300, 0.4, 0.9, trials=2, seed=1)
    assert rep.k == 120 and rep.l == 270
    assert rep.eigenvalues.size == 2 * rep.k
    # k - (n - l) = 90 structural zeros per trial
    assert rep.zero_fraction == pytest.approx(0.75)
    assert np.sum(rep.eigenvalues < 1e-8) >= 2 * 90
    assert rep.l1_distance < 0.15
    rows = write_comparison_csv(rep, tmp_path / "c.csv").read_text().splitlines()
    assert rows[0] == "x,f_theory,f_empirical" and len(rows) == rep.theory.grid.size + 1


@pytest.mark.slow
def test_spectrum_below_edge():
    rep = spectrum_experiment(2000, 0.3, 0.9, trials=3, seed=2)
    assert max(rep.trial_max) < 1


def test_writers(tmp_path):
    cfg = GridConfig(n=30, eta_values=(0.8,), k_values=[0, 6, 12, 18, 24], trials=4)
    res = run_grid(cfg)
    rows = write_grid_csv(res, tmp_path / "g.csv").read_text().splitlines()
    assert rows[0] == "eta,k,beta,successes,trials,fraction" and len(rows) == 6
    summary = json.loads(write_summary_json(res, tmp_path / "s.json").read_text())
    assert summary["n"] == 30 and summary["transitions"][0]["eta"] == 0.8


def test_default_workers(monkeypatch):
    monkeypatch.delenv("CINFLAB_THREADS", raising=False)
    assert default_workers() == 1
    monkeypatch.setenv("CINFLAB_THREADS", "3")
    assert default_workers() == 3
    monkeypatch.setenv("CINFLAB_THREADS", "many")
    with pytest.raises(DomainError):
        default_workers()
