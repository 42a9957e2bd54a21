import io
import json
import math

import numpy as np
import pytest

from iginue import finite_kernel as fk
from iginue import montecarlo as mc
from iginue.specfun import trunc_exp


# --- configuration and sampling --------------------------------------------


@pytest.mark.parametrize("kw", [dict(N=0), dict(N=5, alpha_int=-1), dict(N=5, alpha_int=1.5),
                                dict(N=5, replicas=0), dict(N=5, sigma_sq=0.0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        mc.SamplerConfig(**kw)


def test_worker_resolution(monkeypatch):
    assert mc.resolve_workers(3) == 3
    monkeypatch.setenv(mc.WORKERS_ENV, "2")
    assert mc.resolve_workers() == 2
    with pytest.raises(ValueError):
        mc.resolve_workers(0)


def test_replica_matrices_are_deterministic():
    cfg = mc.SamplerConfig(N=6, alpha_int=2, seed=11)
    a, b = mc.sample_matrix(cfg, 17), mc.sample_matrix(cfg, 17)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, mc.sample_matrix(cfg, 18))
    assert not np.array_equal(a, mc.sample_matrix(cfg, 17, attempt=1))


def test_ginibre_entry_variance():
    cfg = mc.SamplerConfig(N=4, alpha_int=0, seed=3)
    vals = [abs(mc.sample_matrix(cfg, r)[0, 0]) ** 2 for r in range(10000)]
    assert np.mean(vals) == pytest.approx(1.0, rel=0.05)


def test_variance_scaling():
    cfg = mc.SamplerConfig(N=4, alpha_int=1, seed=3, sigma_sq=2.5)
    base = mc.SamplerConfig(N=4, alpha_int=1, seed=3)
    assert np.allclose(mc.sample_matrix(cfg, 5), math.sqrt(2.5) * mc.sample_matrix(base, 5), rtol=1e-14)


def test_haar_unitary_is_unitary():
    U = mc.haar_unitary(7, np.random.default_rng(0))
    assert np.allclose(U.conj().T @ U, np.eye(7), atol=1e-13)


def test_batch_is_independent_of_worker_count():
    one = mc.sample_batch(mc.SamplerConfig(N=8, alpha_int=1, seed=5, replicas=40, workers=1))
    two = mc.sample_batch(mc.SamplerConfig(N=8, alpha_int=1, seed=5, replicas=40, workers=2))
    for name in ("replica", "z", "O11_eig", "O11_prod", "ratio11", "ratio12", "attempts"):
        assert np.array_equal(getattr(one, name), getattr(two, name))


# --- eigen-decomposition and overlaps --------------------------------------


def test_normal_matrix_has_unit_overlaps():
    es = mc.eig_full(np.diag([1.0, 2.0j]))
    O = mc.overlaps(es)
    assert np.allclose(O, np.eye(2), atol=1e-14)


@pytest.mark.parametrize("kappa", [0.5, 2.0, 7.0])
def test_jordan_like_overlap(kappa):
    es = mc.eig_full(np.array([[0.0, kappa], [0.0, 1.0]]))
    O = mc.overlaps(es)
    i = int(np.argmin(np.abs(es.values)))
    assert O[i, i].real == pytest.approx(1 + kappa**2, rel=1e-12)
    assert O[1 - i, 1 - i].real == pytest.approx(1 + kappa**2, rel=1e-12)


def test_spectral_reconstruction_and_overlap_structure():
    A = mc.sample_matrix(mc.SamplerConfig(N=12, alpha_int=2, seed=1), 0)
    es = mc.eig_full(A)
    rebuilt = (es.right * es.values) @ es.left
    assert np.linalg.norm(rebuilt - A) <= 1e-8 * np.linalg.norm(A)
    O = mc.overlaps(es)
    assert np.allclose(O, O.conj().T, rtol=1e-12, atol=1e-12)
    assert np.all(O.diagonal().real >= 1 - 1e-8)
    assert es.residual <= 1e-8


def test_near_degenerate_matrix_is_rejected():
    with pytest.raises(mc.NearDegenerateError):
        mc.eig_full(np.array([[1.0, 1.0], [0.0, 1.0 + 1e-15]]))


# --- product formulas ------------------------------------------------------


def test_product_formula_two_points():
    z = np.array([0.0, 2.0])
    assert mc.product_formula_O11(z) == pytest.approx([1.25, 1.25])
    assert mc.product_formula_O12(z, [(0, 1)])[0] == pytest.approx(-0.25)


def test_product_formula_three_points():
    z = np.array([0, 2, 10j])
    d = (0 - 10j) * np.conj(2 - 10j)
    assert mc.product_formula_O12(z, [(0, 1)])[0] == pytest.approx(-0.25 * (1 + 1 / d), rel=1e-14)
    full = mc.product_formula_O12(z)
    assert full[1, 0] == pytest.approx(np.conj(full[0, 1]), rel=1e-14)
    assert np.all(full.diagonal() == 0)
    o11 = mc.product_formula_O11(z)
    assert o11[0] == pytest.approx((1 + 1 / 4) * (1 + 1 / 100), rel=1e-14)


def test_product_formula_is_at_least_one():
    z = np.random.default_rng(4).normal(size=20) + 1j
    assert np.all(mc.product_formula_O11(z * (1 + 0.3j)) >= 1)


def test_product_formula_refuses_coincident_points():
    with pytest.raises(fk.CoincidenceError):
        mc.product_formula_O11(np.array([0.5, 0.5, 1.0]))


# --- statistical checks on a moderate batch --------------------------------


def test_kept_replicas_are_clean(small_batch):
    assert small_batch.discarded <= 0.001 * small_batch.replica.size
    assert small_batch.max_residual <= 1e-8
    assert np.all(small_batch.O11_eig >= 1 - 1e-8)
    assert np.all(small_batch.O11_prod >= 1)


def test_conditional_means(small_batch):
    tests = mc.conditional_mean_tests(small_batch)
    assert [t.name for t in tests] == ["O11", "O12.real", "O12.imag"]
    assert all(t.passed for t in tests), tests


def test_nearest_point_difference(small_batch):
    est = mc.nearest_point_difference(small_batch, 1.0)
    assert est.within(0.0, 3.0)


def test_moduli_follow_gamma_laws():
    batch = mc.sample_batch(mc.SamplerConfig(N=10, alpha_int=2, seed=9, replicas=2000))
    for t in mc.moduli_gamma_tests(batch):
        assert t.passed, t


def test_moduli_check_detects_wrong_alpha():
    batch = mc.sample_batch(mc.SamplerConfig(N=10, alpha_int=2, seed=9, replicas=2000))
    wrong = mc.OverlapSampleBatch(**{**batch.__dict__, "config": mc.SamplerConfig(N=10, alpha_int=4, seed=9)})
    assert not any(t.passed for t in mc.moduli_gamma_tests(wrong))


def test_small_window_estimates(small_batch):
    p = fk.ModelParams(10, 1.0)
    lam = 1.5 + 0.5j
    d11 = mc.estimate_D11(small_batch, lam, 0.35)
    assert d11.within(fk.D11(1, p, [lam]).real, 4.0)
    eig = mc.estimate_D11(small_batch, lam, 0.35, source="eig")
    assert eig.within(fk.D11(1, p, [lam]).real, 4.0)
    dens = mc.estimate_density(small_batch, lam, 0.35)
    exact_density = (trunc_exp(9, 1.0, abs(lam) ** 2) * abs(lam) ** 2 * math.exp(-abs(lam) ** 2)).real
    assert dens.within(exact_density, 4.0)


def test_window_must_not_overlap(small_batch):
    with pytest.raises(ValueError):
        mc.estimate_D12(small_batch, 1.0, 1.3, 0.35)
    with pytest.raises(ValueError):
        mc.estimate_D12(small_batch, 1.0, 3.0, 0.0)


# --- the N = 30 batch ------------------------------------------------------


@pytest.mark.slow
def test_D11_window_matches_analytic(annulus_batch):
    exact = fk.D11(1, fk.ModelParams(30, 2.0), [3.5]).real
    est = mc.estimate_D11(annulus_batch, 3.5, 0.35)
    assert est.within(exact, 3.0)
    assert est.relative_error(exact) <= 0.05


@pytest.mark.slow
def test_D12_window_matches_analytic(annulus_batch):
    lam1, lam2 = 3.3, 3.3 + 1.5j
    exact = fk.D12(2, fk.ModelParams(30, 2.0), [lam1, lam2])
    est = mc.estimate_D12(annulus_batch, lam1, lam2, 0.35)
    assert est.within(exact, 3.0)


@pytest.mark.slow
def test_D12_window_swap_is_conjugation(annulus_batch):
    a = mc.estimate_D12(annulus_batch, 3.3, 3.3 + 1.5j, 0.35)
    b = mc.estimate_D12(annulus_batch, 3.3 + 1.5j, 3.3, 0.35)
    assert abs(a.value - np.conj(b.value)) <= 1e-12 * abs(a.value)


@pytest.mark.slow
def test_D12_negative_at_short_separation(annulus_batch):
    est = mc.estimate_D12(annulus_batch, 3.5, 3.5 + 0.5j, 0.2)
    assert est.value.real < 0
    assert fk.D12(2, fk.ModelParams(30, 2.0), [3.5, 3.5 + 0.5j]).real < 0


@pytest.mark.slow
def test_D11_far_outside_support(annulus_batch):
    bulk = fk.D11(1, fk.ModelParams(30, 2.0), [3.5]).real
    with pytest.warns(RuntimeWarning):
        far = mc.estimate_D11(annulus_batch, 3 * math.sqrt(30), 0.35)
    assert abs(far.value) < 1e-3 * bulk


@pytest.mark.slow
def test_D11_bandwidth_bias(annulus_batch):
    wide = mc.estimate_D11(annulus_batch, 3.5, 0.35)
    narrow = mc.estimate_D11(annulus_batch, 3.5, 0.175)
    assert abs(wide.value - narrow.value) <= math.hypot(wide.stderr, narrow.stderr) * 3


# --- output ----------------------------------------------------------------


def test_overlap_csv_layout():
    batch = mc.sample_batch(mc.SamplerConfig(N=3, alpha_int=0, seed=1, replicas=2, workers=1))
    buf = io.StringIO()
    mc.write_overlap_csv(batch, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == mc.CSV_HEADER
    assert len(lines) == 1 + 2 * 3
    assert float(lines[1].split(",")[4]) >= 1


def test_summary_ignores_worker_count():
    a = mc.sample_batch(mc.SamplerConfig(N=5, alpha_int=1, seed=2, replicas=30, workers=1))
    b = mc.sample_batch(mc.SamplerConfig(N=5, alpha_int=1, seed=2, replicas=30, workers=2))
    ja, jb = mc.summarize(a).to_jsonl(), mc.summarize(b).to_jsonl()
    assert ja == jb
    rec = json.loads(ja)
    assert rec["replicas"] == 30 and "workers" not in rec["config"]
