import cmath
import math

import mpmath as mp
import numpy as np
import pytest

from iginue import limits as lm
from iginue.finite_kernel import ModelParams
from iginue.specfun import DomainError, error_F

R = lm.Regime
SQRT2PI = math.sqrt(2 * math.pi)


def rel(a, b):
    return abs(a - b) / abs(b)


def rand_c(rng, n, r=1.0):
    return [complex(*rng.uniform(-r, r, 2)) for _ in range(n)]


# --- regime points and rescaling -------------------------------------------


def test_rescale_examples():
    assert lm.rescale(lm.RegimePoint(R.SINGULAR, b=1.0, zeta=0.3 + 0.1j), ModelParams(50, 1.0)) == 0.3 + 0.1j
    assert lm.rescale(lm.RegimePoint(R.OUTER_EDGE, b=0.0), ModelParams(100, 0.0)) == pytest.approx(10.0)
    bulk = lm.RegimePoint(R.BULK, b=0.0, p=0.8, zeta=1j)
    assert lm.rescale(bulk, ModelParams(100, 0.0)) == pytest.approx(8 + 1j)


def test_rescale_inner_edge_and_rotation():
    rp = lm.RegimePoint(R.INNER_EDGE, b=1.0, theta=math.pi / 2, zeta=0.2)
    assert lm.rescale(rp, ModelParams(100, 100.0)) == pytest.approx(1j * (10 - 0.2))


def test_weak_parameters():
    rp = lm.RegimePoint(R.WEAK, rho=2.0)
    p = rp.params(400)
    assert p.alpha == pytest.approx(400 * (100 - 0.5))
    assert lm.rescale(rp, p) == pytest.approx(math.sqrt(400 * 100))


@pytest.mark.parametrize("kw", [dict(regime="bulk", b=0.0, p=1.2), dict(regime="inner_edge", b=0.0),
                                dict(regime="weak", rho=0.0), dict(regime="singular", b=0.0),
                                dict(regime="outer_edge", b=-1.0)])
def test_invalid_regime_points(kw):
    with pytest.raises(DomainError):
        lm.RegimePoint(**kw)


def test_unknown_regime_name():
    with pytest.raises(ValueError):
        lm.RegimePoint("edge")


# --- bulk ------------------------------------------------------------------


def test_bulk_psi11_examples():
    assert lm.bulk_psi11(0.5, 0.0) == pytest.approx(0.75)
    for r in (0.1, 0.5, 0.9):
        assert lm.bulk_psi11(r, 0.0) == pytest.approx(1 - r * r)
    assert lm.bulk_psi11(math.sqrt(1 + 1e-9), 1.0) < 1e-8
    with pytest.raises(DomainError):
        lm.bulk_psi11(1.5, 0.0)


def test_bulk_kernel_examples():
    z = 0.3 - 0.2j
    assert lm.bulk_kernel(z, z.conjugate(), z, z, z.conjugate()) == pytest.approx(0.5, rel=1e-14)
    assert lm.bulk_reduced(1.0, 1.0, 0.0, 0.0) == pytest.approx(1.0, rel=1e-14)


def test_bulk_reduced_series_joins_closed_form():
    for t in (1e-9, 1e-5, 1e-3, 0.05, 0.3):
        with mp.workdps(40):
            closed = complex((t * mp.exp(t) - mp.exp(t) + 1) / mp.mpf(t) ** 2)
        assert lm.bulk_reduced(t, 1.0, 0.0, 0.0) == pytest.approx(closed, rel=1e-13)


def test_bulk_translation_invariance():
    rng = np.random.default_rng(0)
    s = 0.7 - 0.2j
    for _ in range(10):
        z, e, c = rand_c(rng, 3)
        a = lm.bulk_kernel(z, z.conjugate(), e, c, c.conjugate())
        b = lm.bulk_kernel(z + s, (z + s).conjugate(), e + s, c + s, (c + s).conjugate())
        assert abs(a - b) <= 1e-12 * abs(a)


def test_bulk_psi12_reduces_to_psi11_on_the_diagonal():
    assert lm.bulk_psi12(0.1, 0.1, 1.2, 1.0) == pytest.approx(0.5 * lm.bulk_psi11(1.2, 1.0), rel=1e-10)


# --- edge ------------------------------------------------------------------


def test_edge_F_script_examples():
    assert lm.edge_F_script(0.0) == pytest.approx(1 / SQRT2PI, rel=1e-15)
    assert abs(lm.edge_F_script(6.0)) < 1e-3


def test_edge_F_script_definition():
    for a in (-2.0, 0.7, 1 + 0.5j):
        expected = cmath.exp(-a * a / 2) / SQRT2PI * (1 - SQRT2PI * a * cmath.exp(a * a / 2) * error_F(a))
        assert abs(lm.edge_F_script(a) - expected) <= 1e-13 * max(1, abs(expected))


def test_edge_H_closed_form_vs_difference_quotient():
    args = (0.3, 0.1, -0.2, 0.4, 0.15)
    assert abs(lm.edge_H(*args) - lm.edge_H_fd(*args)) < 1e-8
    rng = np.random.default_rng(1)
    for _ in range(50):
        tup = [complex(*rng.uniform(-1.4, 1.4, 2)) for _ in range(5)]
        if abs(lm.edge_F_script(tup[0])) < 1e-2:
            continue
        h = lm.edge_H(*tup)
        assert abs(h - lm.edge_H_fd(*tup)) < 1e-8 * max(1, abs(h))


def test_edge_H_cancellation_and_symmetry():
    assert abs(lm.edge_H(0.4, 0.2, 0.4, 0.2, 0.0)) < 1e-15
    a, b, c, d, f = 0.3 + 0.1j, -0.5, 0.8j, 0.2, 0.4 - 0.3j
    assert lm.edge_H(a, b, c, d, f) == pytest.approx(lm.edge_H(a, c, b, d, f), rel=1e-13)


def test_edge_constants_and_psi11():
    assert lm.edge_constant(3.0, "outer_edge") == pytest.approx(0.5)
    assert lm.edge_constant(4.0, "inner_edge") == pytest.approx(0.5)
    assert lm.edge_psi11(0.0, 0.0) == pytest.approx(1 / SQRT2PI, rel=1e-15)
    with pytest.raises(DomainError):
        lm.edge_constant(0.0, "inner_edge")


def test_edge_psi12_swap():
    z1, z2 = 0.3 + 0.2j, -0.4 + 0.5j
    a, b = lm.edge_psi12(z1, z2, 1.0), lm.edge_psi12(z2, z1, 1.0)
    assert abs(a - b.conjugate()) <= 1e-10 * abs(a)


# --- weak non-Hermiticity --------------------------------------------------


def test_weak_L_script_growth_and_realness():
    rho = 50.0
    assert lm.weak_L_script(0.0, rho).real / (rho**2 / 4) == pytest.approx(1.0, rel=0.1)
    assert abs(lm.weak_L_script(0.4, 1.5).imag) < 1e-15
    with pytest.raises(DomainError):
        lm.weak_L_script(0.1, 0.0)


def test_weak_H_script_large_rho():
    rho, t = 60.0, 0.3
    chi = 0.05
    zb = chi + t  # (zbar - chi_bar)(eta - chi) = t with eta - chi = 1
    eta = chi + 1
    h = lm.weak_H_script(2 * chi, chi + zb, eta + chi, eta + zb, t, rho)
    assert h.real / (rho**2 / 4) == pytest.approx(t * math.exp(t) - math.exp(t) + 1, rel=0.1)


def test_weak_H_script_symmetry():
    a, b, c, d, f = 0.2, 0.4 - 0.1j, -0.3 + 0.2j, 0.1j, 0.25
    for rho in (0.5, 2.0, 8.0):
        assert abs(lm.weak_H_script(a, b, c, d, f, rho) - lm.weak_H_script(a, c, b, d, f, rho)) <= \
            1e-12 * abs(lm.weak_H_script(a, b, c, d, f, rho))


def test_weak_H_script_from_helpers():
    a, b, rho = 0.3, -0.2 + 0.1j, 1.7
    direct = lm.weak_H_script(a, b, b, a, 0.0, rho)
    expanded = (lm._weak_A(a, b, b, a, 0.0, rho) + 2 * lm._weak_B(a, b, b, rho)
                - lm._weak_B(a, a, a, rho) - lm._weak_B(a, a, a, rho)
                + lm._weak_C(b, b, rho) - lm._weak_C(a, a, rho))
    assert abs(direct - expanded) <= 1e-12 * max(1, abs(direct))


def test_weak_kernel_approaches_bulk():
    z, e, c = 0.2, -0.1, 0.05
    w = lm.weak_kernel(z, z, e, c, c, 60.0)
    b = lm.bulk_kernel(z, z, e, c, c)
    assert rel(w, b) < 0.1


def test_weak_psi12_printed_factor_differs():
    z1, z2, rho = 0.1 + 0.2j, -0.4 + 0.5j, 2.0
    default = lm.weak_psi12(z1, z2, rho)
    printed = lm.weak_psi12(z1, z2, rho, as_printed=True)
    assert printed == pytest.approx(default * math.exp(-abs(z1 - z2) ** 2), rel=1e-12)


def test_weak_psi12_large_rho_recovers_bulk():
    z1, z2 = 0.1 + 0.2j, -0.4 + 0.5j
    bulk = lm.bulk_psi12(z1, z2, 1.2, 1.0) / lm.bulk_psi11(1.2, 1.0)
    weak = lm.weak_psi12(z1, z2, 200.0) / lm.weak_psi11(z1, 200.0)
    assert rel(weak, bulk) < 0.05


def test_sine_limit_ratio_grows_as_band_narrows():
    """Literal reading of the small-``rho`` claim; the ratio is not O(1)."""
    values = [lm.sine_limit_ratio(0.3j, 0.0, rho) for rho in (0.2, 0.1)]
    assert values[1] > 1.5 * values[0]


# --- singular origin -------------------------------------------------------


def test_singular_E_script_example():
    assert lm.singular_E_script(1.0, 2.0, 1.0) == pytest.approx(math.e, rel=1e-14)
    with pytest.raises(DomainError):
        lm.singular_E_script(1.0, 2.0, 0.0)


def test_singular_S_examples():
    assert abs(lm.singular_S(0.7, 0.7, 0.7, 0.7, 0.0, 1.5)) < 1e-14
    x, y, z, w, f = 0.4, 0.3 + 0.2j, -0.5j, 0.8, 0.1 - 0.3j
    assert lm.singular_S(x, y, z, w, f, 2.0) == pytest.approx(lm.singular_S(x, z, y, w, f, 2.0), rel=1e-13)


def test_singular_psi11_example_and_rotation():
    assert lm.singular_psi11(1.0, 1.0) == pytest.approx(math.exp(-1), rel=1e-14)
    for phi in (0.4, 2.0, -1.1):
        assert lm.singular_psi11(1.3 * cmath.exp(1j * phi), 2.5) == pytest.approx(
            lm.singular_psi11(1.3, 2.5), rel=1e-13)


def test_singular_kernel_rotation():
    z, e, c = 0.4 + 0.3j, -0.2 + 0.6j, 0.5 - 0.1j
    r = cmath.exp(0.9j)
    a = lm.singular_kernel(z, z.conjugate(), e, c, c.conjugate(), 1.5)
    b = lm.singular_kernel(r * z, (r * z).conjugate(), r * e, r * c, (r * c).conjugate(), 1.5)
    assert abs(abs(a) - abs(b)) <= 1e-10 * abs(a)


# --- generic dispatch and invariants ---------------------------------------


REGIMES = [
    lm.RegimePoint(R.BULK, b=1.0, p=1.1),
    lm.RegimePoint(R.OUTER_EDGE, b=0.5),
    lm.RegimePoint(R.INNER_EDGE, b=1.0),
    lm.RegimePoint(R.WEAK, rho=2.0),
    lm.RegimePoint(R.SINGULAR, b=1.5),
]


@pytest.mark.parametrize("rp", REGIMES, ids=lambda rp: rp.regime.value)
def test_psi11_real_and_nonnegative(rp):
    rng = np.random.default_rng(2)
    for z in rand_c(rng, 20, 1.5):
        v = lm.psi11(rp, z)
        assert abs(complex(v).imag) <= 1e-10 * max(1, abs(v))
        assert complex(v).real >= 0


@pytest.mark.parametrize("rp", REGIMES, ids=lambda rp: rp.regime.value)
def test_kernel_coincidence_continuity(rp):
    c = 0.3 - 0.2j
    z = 0.1 + 0.4j
    ray = (0.3, 0.1, 0.03, 1e-3, 1e-5, 1e-7, 1e-8, 1e-9)
    vals = [lm.kernel_limit(rp, z, z.conjugate(), c + d * cmath.exp(0.6j), c, c.conjugate()) for d in ray]
    at = lm.kernel_limit(rp, z, z.conjugate(), c, c, c.conjugate())
    scale = max(1.0, abs(at))
    for d, v in zip(ray, vals):
        assert abs(v - at) <= 5 * d * scale
    for a, b in zip(vals[5:], vals[6:]):
        assert abs(a - b) <= 1e-6 * scale


@pytest.mark.parametrize("rp", REGIMES, ids=lambda rp: rp.regime.value)
def test_limit_eval_structure(rp):
    ev = lm.limit_eval(rp, [0.1, 0.3 + 0.2j, -0.2 + 0.1j])
    assert ev.regime is rp.regime
    assert ev.kernel_matrix.entries.shape == (2, 2)
    assert ev.kernel_matrix.det_value == pytest.approx(np.linalg.det(ev.kernel_matrix.entries))
    assert ev.psi12 is not None
    assert lm.limit_eval(rp, [0.2]).psi12 is None


# --- convergence probes ----------------------------------------------------


def test_singular_probe_decreases():
    rp = lm.RegimePoint(R.SINGULAR, b=2.0)
    table = lm.converge_probe(rp, [50, 100, 200], test_points=[(1.2, 0.5)], quantity="psi11")
    assert table.monotone
    assert table.exponent < -0.5


def test_outer_edge_probe_rate():
    rp = lm.RegimePoint(R.OUTER_EDGE, b=0.0)
    table = lm.converge_probe(rp, [100, 200, 400], test_points=[(0.2, -0.1)], quantity="psi11")
    assert table.monotone
    assert -0.7 < table.exponent < -0.3


def test_weak_probe_off_diagonal():
    rp = lm.RegimePoint(R.WEAK, rho=2.0)
    table = lm.converge_probe(rp, [50, 100, 200], test_points=[(0.1, 0.4 + 0.3j)], quantity="d12")
    assert table.monotone
    assert table.max_residual[-1] < 0.05
    assert table.as_dict()["quantity"] == "d12"


def test_probe_rejects_unknown_quantity():
    with pytest.raises(ValueError):
        lm.converge_probe(REGIMES[4], [20], test_points=[(1.0, 0.5)], quantity="d21")


# --- curve data ------------------------------------------------------------


def test_figure2_curves():
    grids = lm.figure2_curves(-2, 2, 40)
    assert [g.function for g in grids] == ["F_script"] + ["L_script"] * 3 + ["E_script"] * 3
    f = grids[0]
    assert f.values[20] == pytest.approx(1 / SQRT2PI)
    rows = list(f.rows())
    assert len(rows) == 41 and len(rows[0]) == len(lm.CSV_HEADER.split(","))
    assert len(lm.figure2_curves(which="E", steps=10)) == 3


def test_figure3_surfaces():
    grids = lm.figure3_surfaces(extent=1.0, n=5, rho=10.0)
    assert [g.regime for g in grids] == ["bulk", "weak"]
    bulk = grids[0]
    assert bulk.values.shape == (25,)
    assert np.max(np.abs(bulk.values.imag)) < 1e-12
    assert bulk.values[12] == pytest.approx(0.5)
