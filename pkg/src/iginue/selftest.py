"""Acceptance battery: one check per criterion, shared by the CLI and the test suite.

Each check returns a :class:`CriterionResult` with the measured quantities, so
failures are reported with numbers rather than a bare boolean.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammainc

from . import finite_kernel as fk
from . import limits as lm
from . import montecarlo as mc
from . import orthopoly as op
from . import reference as ref
from . import specfun as sf
from .tolerances import DEFAULT, Tolerances


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        bits = ", ".join(f"{k}={_fmt(v)}" for k, v in self.measured.items())
        return f"[{status}] criterion {self.number}: {self.name} ({self.seconds:.1f}s) {bits}"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.3g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


def _rel(a: complex, b: complex) -> float:
    return abs(a - b) / abs(b)


def _disk(rng: np.random.Generator, radius: float) -> complex:
    return complex(radius * math.sqrt(rng.uniform()) * np.exp(2j * np.pi * rng.uniform()))


def _random_triple(rng, alpha: float, tol: Tolerances) -> tuple[complex, complex, complex]:
    """``(lam, z, w)`` with ``0.2 <= |lam| <= 3`` and both points at least 0.05 away from ``lam``."""
    while True:
        lam = _disk(rng, 3.0)
        if abs(lam) < 0.2:
            continue
        # the individual terms have a pole at |lam|^2 = alpha
        if abs(abs(lam) ** 2 - alpha) < tol.coincidence_delta * max(1.0, alpha):
            continue
        z, w = _disk(rng, 3.0), _disk(rng, 3.0)
        if abs(z - lam) >= 0.05 and abs(w - lam) >= 0.05:
            return lam, z, w


def _simplified_sum(N, alpha, lam, z, w) -> complex:
    cond = fk.ConditionPoint.physical(lam)
    return sum(fk.simplified_kernel_terms(N, alpha, z.conjugate(), w, cond))


def _double_sum(N, alpha, lam, z, w) -> complex:
    lb = lam.conjugate()
    return fk.g_double_sum(N, alpha, lam * lb, z.conjugate() / lb, w / lam)


# ---------------------------------------------------------------------------


def check_master_identity(tol: Tolerances = DEFAULT, seed: int = 0) -> CriterionResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for alpha in (0.0, 0.5, 2.0, 7.0):
        for N in range(1, 41):
            for _ in range(20):
                lam, z, w = _random_triple(rng, alpha, tol)
                err = _rel(_simplified_sum(N, alpha, lam, z, w), _double_sum(N, alpha, lam, z, w))
                worst = max(worst, err)
    return CriterionResult(1, "master kernel identity", worst <= tol.master_identity,
                           {"max_rel_err": worst})


def check_oracle_triangle(tol: Tolerances = DEFAULT, seed: int = 1) -> CriterionResult:
    rng = np.random.default_rng(seed)
    worst = {"poly_vs_double": 0.0, "poly_vs_simplified": 0.0, "double_vs_simplified": 0.0}
    for alpha in (0.0, 2.0):
        for N in range(1, 13):
            for _ in range(10):
                lam, z, w = _random_triple(rng, alpha, tol)
                pp = op.build_polys(N, alpha, fk.ConditionPoint.physical(lam))
                kp = op.kernel_from_polys(N, pp, z.conjugate(), w)
                kd = _double_sum(N, alpha, lam, z, w)
                ks = _simplified_sum(N, alpha, lam, z, w)
                worst["poly_vs_double"] = max(worst["poly_vs_double"], _rel(kp, kd))
                worst["poly_vs_simplified"] = max(worst["poly_vs_simplified"], _rel(kp, ks))
                worst["double_vs_simplified"] = max(worst["double_vs_simplified"], _rel(kd, ks))
    ok = max(worst.values()) <= tol.oracle_triangle
    return CriterionResult(2, "oracle triangle", ok, worst)


THREE_TERM_LAMBDAS = (1.3 - 0.2j, 0.3 + 0j, 0.8j, -0.6 + 0.9j)


def check_ldu_and_recurrence(tol: Tolerances = DEFAULT, seed: int = 2) -> CriterionResult:
    rng = np.random.default_rng(seed)
    recon = dseq = 0.0
    three = 0.0
    for alpha in (0.0, 0.5, 2.0, 7.0):
        for size in (1, 2, 5, 10, 20, 30):
            lam = complex(rng.uniform(0.3, 2.0) * np.exp(2j * np.pi * rng.uniform()))
            cond = fk.ConditionPoint.physical(lam)
            mm = op.moment_matrix(size, alpha, cond)
            fac = op.ldu_decompose(mm)
            L, D, U = fac.matrices()
            recon = max(recon, float(np.abs(L @ D @ U - mm.reduced).max() / np.abs(mm.reduced).max()))
            dd = op.d_from_f(size, alpha, abs(lam) ** 2)
            dseq = max(dseq, float(np.max(np.abs(fac.d - dd) / np.abs(dd))))
        # the absolute contract ignores the |lam|^k growth of the coefficients,
        # so it is exercised at moderate |lam|
        for lam in THREE_TERM_LAMBDAS:
            cond = fk.ConditionPoint.physical(lam)
            pp = op.build_polys(26, alpha, cond)
            for k in range(1, 25):
                for z in (0.5, 2.0, 1.1 - 0.7j):
                    res = op.three_term_residual(k, pp, alpha, cond, z)
                    three = max(three, res / (1 + abs(z) ** (k + 1)))
    ok = recon <= tol.ldu_reconstruction and dseq <= tol.d_sequence and three <= tol.three_term
    return CriterionResult(3, "LDU reconstruction, d-sequence, three-term recurrence", ok,
                           {"reconstruction": recon, "d_sequence": dseq, "three_term_scaled": three})


def check_ginibre_regression(tol: Tolerances = DEFAULT, seed: int = 3) -> CriterionResult:
    rng = np.random.default_rng(seed)
    wf = wphi = wd = 0.0
    for x in (0.3, 1.0, 2.3, 5.5, 9.0):
        for p in range(0, 15):
            wf = max(wf, _rel(fk.f_alpha(p, 0.0, x), ref.ginibre_f(p, x)))
            wphi = max(wphi, _rel(fk.phi_alpha(p, 0.0, x), ref.ginibre_phi(p, x)))
    params = {N: fk.ModelParams(N, 0.0) for N in range(2, 11)}
    for N in range(2, 11):
        for k in range(1, min(3, N - 1) + 1):
            for _ in range(3):
                pts = [_disk(rng, 0.8 * math.sqrt(N)) for _ in range(k)]
                wd = max(wd, _rel(fk.D11(k, params[N], pts), ref.ginibre_D11(N, pts)))
    ok = max(wf, wphi, wd) <= tol.ginibre_regression
    return CriterionResult(4, "alpha = 0 Ginibre regression", ok, {"f": wf, "phi": wphi, "D11": wd})


def _gamma_window(N: int, alpha: float, x: float) -> float:
    """``Q(N+alpha, x) - Q(alpha, x)`` in whichever complement avoids cancellation."""
    if alpha == 0:
        return sf.regularized_gamma_q(N, x)
    if gammainc(alpha, x) < 0.5:
        return gammainc(alpha, x) - gammainc(N + alpha, x)
    return sf.regularized_gamma_q(N + alpha, x) - sf.regularized_gamma_q(alpha, x)


def check_special_functions(tol: Tolerances = DEFAULT) -> CriterionResult:
    m = {}
    m["F0"] = abs(sf.error_F(0) - 0.5)
    m["F_reflection"] = max(abs(sf.error_F(x) + sf.error_F(-x) - 1) for x in (0.7, 2 + 1j, -1.3 + 0.4j))
    m["F3_vs_quad"] = _rel(sf.error_F(3.0), ref.F_quadrature(3.0))
    m["L_reduction"] = max(abs(sf.band_error_L(z, r) - (sf.error_F(z - r / 2) - sf.error_F(z + r / 2)))
                           for z, r in ((0.3, 1.0), (1 + 0.5j, 2.0), (-2 + 1j, 7.5)))
    m["L_vs_quad"] = _rel(sf.band_error_L(1 + 0.5j, 2.0), ref.band_L_quadrature(1 + 0.5j, 2.0))
    m["L_total_mass"] = abs(sf.band_error_L(0.3, 50.0) - 1)
    ml = [_rel(sf.mittag_leffler(1.0, 2.0), math.exp(2.0)),
          _rel(sf.mittag_leffler(2.0, 1.0), math.e - 1),
          _rel(sf.mittag_leffler(0.5, 0.0), 1 / math.gamma(0.5))]
    for z in (0.5 + 1j, -3.0, 7.5 - 2j, 15j):
        ml.append(_rel(sf.mittag_leffler(1.0, z), np.exp(z)))
        ml.append(_rel(sf.mittag_leffler(2.0, z), np.expm1(z) / z))
    m["mittag_leffler"] = max(ml)
    bridge = 0.0
    for alpha in (0.0, 0.5, 2.0, 7.0):
        for N in (1, 5, 20, 60, 100):
            for x in np.linspace(0.1, 2 * N, 7):
                lhs = sf.trunc_exp(N - 1, alpha, x)
                rhs = math.exp(x - alpha * math.log(x)) * _gamma_window(N, alpha, x)
                bridge = max(bridge, _rel(lhs, rhs))
    m["incomplete_gamma_bridge"] = bridge
    s = 1e4
    asym = 0.0
    for z in (-1.0, 0.0, 1.0):
        a, x = s + 1, s + math.sqrt(s) * z
        q = sf.regularized_gamma_q(a, x)
        m.setdefault("Q_vs_mp", 0.0)
        m["Q_vs_mp"] = max(m["Q_vs_mp"], _rel(q, ref.gamma_q_mp(a, x)))
        asym = max(asym, s * abs(q - ref.asym_q_approx(s, z)))
    m["asym_Q_times_s"] = asym
    ok = (max(m["F0"], m["F_reflection"], m["L_reduction"], m["L_total_mass"]) <= tol.special_tight
          and max(m["F3_vs_quad"], m["L_vs_quad"], m["mittag_leffler"], m["incomplete_gamma_bridge"],
                  m["Q_vs_mp"]) <= tol.special_loose
          and asym <= tol.asym_q_constant)
    return CriterionResult(5, "special functions", ok, m)


def check_monte_carlo(tol: Tolerances = DEFAULT, workers: int | None = None, replicas: int = 20000,
                      ks_replicas: int = 2000, seed: int = 2024,
                      batch: mc.OverlapSampleBatch | None = None) -> CriterionResult:
    """``batch`` lets a caller reuse an already sampled N=30, alpha=2 batch."""
    if batch is None:
        cfg = mc.SamplerConfig(N=30, alpha_int=2, seed=seed, replicas=replicas, workers=workers)
        batch = mc.sample_batch(cfg, tol)
    elif (batch.config.N, batch.config.alpha_int) != (30, 2):
        raise ValueError("the Monte Carlo check needs an N=30, alpha=2 batch")
    lam, h = 3.5, 0.35
    est = mc.estimate_D11(batch, lam, h)
    exact = fk.D11(1, fk.ModelParams(30, 2.0), [lam]).real
    cm = mc.conditional_mean_tests(batch, tol)
    ks_cfg = mc.SamplerConfig(N=10, alpha_int=2, seed=seed + 1, replicas=ks_replicas, workers=workers)
    ks = mc.moduli_gamma_tests(mc.sample_batch(ks_cfg, tol), tol)
    m = {"D11_mc": est.value, "D11_exact": exact, "stderr": est.stderr,
         "rel_err": est.relative_error(exact),
         "cond_means": [round(abs(t.mean) / t.stderr, 2) for t in cm],
         "ks_pvalues": [t.pvalue for t in ks], "discarded": batch.discarded}
    ok = (est.within(exact, tol.mc_sigmas) and est.relative_error(exact) <= tol.mc_relative
          and all(t.passed for t in cm) and all(t.passed for t in ks))
    return CriterionResult(6, "Monte Carlo vs analytic", ok, m)


CONVERGENCE_NS = (50, 100, 200, 400)


def convergence_tables(workers: int = 1) -> dict[str, lm.ProbeTable]:
    cases = {
        "bulk": lm.RegimePoint("bulk", b=1.0, p=1.1),
        "outer_edge": lm.RegimePoint("outer_edge", b=1.0),
        "weak": lm.RegimePoint("weak", rho=2.0),
        "singular": lm.RegimePoint("singular", b=2.0),
    }
    return {k: lm.converge_probe(rp, CONVERGENCE_NS, workers=workers) for k, rp in cases.items()}


def check_convergence(tol: Tolerances = DEFAULT, workers: int = 1) -> CriterionResult:
    t = convergence_tables(workers)
    band = tol.exponent_band
    verdict = {
        "bulk": abs(t["bulk"].exponent + 1.0) <= band,
        "outer_edge": abs(t["outer_edge"].exponent + 0.5) <= band,
        "weak": t["weak"].monotone,
        "singular": t["singular"].monotone,
    }
    m = {f"{k}_exponent": v.exponent for k, v in t.items()}
    m.update({f"{k}_ok": v for k, v in verdict.items()})
    return CriterionResult(7, "scaling-limit convergence", all(verdict.values()), m)


def check_limit_identities(tol: Tolerances = DEFAULT) -> CriterionResult:
    zeta, eta, chi = 0.2 + 0j, -0.1 + 0j, 0.05 + 0j
    weak = lm.weak_kernel(zeta, zeta.conjugate(), eta, chi, chi.conjugate(), 60.0)
    bulk = lm.bulk_kernel(zeta, zeta.conjugate(), eta, chi, chi.conjugate())
    m = {"weak_to_bulk": _rel(weak, bulk)}
    m["L_over_quarter_square"] = abs(lm.weak_L_script(0.0, 50.0) / (50.0 ** 2 / 4) - 1)
    m["sine_ratio"] = lm.sine_limit_ratio(0.3j, 0.0, 0.05)
    h_args = (0.3, 0.1, -0.2, 0.4, 0.15)
    m["edge_H_vs_fd"] = abs(lm.edge_H(*h_args) - lm.edge_H_fd(*h_args))
    verdict = {
        "weak_to_bulk_ok": m["weak_to_bulk"] <= tol.weak_to_bulk,
        "L_ok": m["L_over_quarter_square"] <= tol.band_to_quarter_square,
        "sine_ok": abs(m["sine_ratio"] - 1) <= tol.sine_kernel,
        "edge_H_ok": m["edge_H_vs_fd"] <= tol.edge_h_fd,
    }
    m.update(verdict)
    return CriterionResult(8, "limit-function cross-identities", all(verdict.values()), m)


def check_figure_data(tol: Tolerances = DEFAULT) -> CriterionResult:
    curves = lm.figure2_curves(-4.0, 4.0, 400)
    by = {(c.function, c.param if not math.isnan(c.param) else None): c for c in curves}
    F = by[("F_script", None)]
    i0 = int(np.argmin(np.abs(F.args)))
    m = {"F0_err": abs(F.values[i0] - 1 / math.sqrt(2 * math.pi))}
    m["L_max_imag"] = max(float(np.abs(by[("L_script", r)].values.imag).max()) for r in (0.5, 2.0, 3.0))
    m["families"] = sorted({f"{c.function}:{c.param}" for c in curves})
    surf = lm.figure3_surfaces(2.0, 50, 10.0, 0j)
    m["surface_sizes"] = [c.values.size for c in surf]
    finite = all(np.all(np.isfinite(c.values)) for c in curves + surf)
    ok = (m["F0_err"] <= tol.special_tight and m["L_max_imag"] <= tol.special_tight
          and len(curves) == 7 and m["surface_sizes"] == [2500, 2500] and finite)
    return CriterionResult(9, "figure data", ok, m)


CRITERIA: dict[int, Callable[..., CriterionResult]] = {
    1: check_master_identity,
    2: check_oracle_triangle,
    3: check_ldu_and_recurrence,
    4: check_ginibre_regression,
    5: check_special_functions,
    6: check_monte_carlo,
    7: check_convergence,
    8: check_limit_identities,
    9: check_figure_data,
}


def run_criterion(number: int, tol: Tolerances = DEFAULT, workers: int | None = None,
                  batch: mc.OverlapSampleBatch | None = None) -> CriterionResult:
    """Run one check; ``batch`` is forwarded to the Monte Carlo check (criterion 6)."""
    fn = CRITERIA[number]
    t0 = time.perf_counter()
    if number == 6:
        res = fn(tol, workers=workers, batch=batch)
    elif number == 7:
        res = fn(tol, workers=workers or 1)
    else:
        res = fn(tol)
    res.seconds = time.perf_counter() - t0
    return res


def run_selftest(selected=None, tol: Tolerances = DEFAULT, workers: int | None = None,
                 echo: Callable[[str], None] | None = print) -> list[CriterionResult]:
    out = []
    for n in selected or sorted(CRITERIA):
        res = run_criterion(n, tol, workers)
        if echo:
            echo(res.line())
        out.append(res)
    return out
