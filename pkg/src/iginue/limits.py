"""Large-N limiting kernels and the finite-N convergence harness.

Four local regimes are covered: bulk and edge of the annular droplet when
``alpha`` grows like ``N``, the weakly non-unitary (almost circular) regime
and a neighbourhood of the origin when ``alpha`` stays fixed.  Every kernel is
written as a function of the independent pair ``(zeta, zeta_bar)`` so it can
be evaluated off the physical slice, as the finite-N code does.
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy import special as sc

from .finite_kernel import D11, D12, KernelMatrix, ModelParams
from .specfun import (
    DomainError,
    band_error_L,
    contour_mean,
    contour_nodes,
    error_F,
    mittag_leffler,
    reciprocal_gamma,
)
from .tolerances import DEFAULT as TOL

SQRT_2PI = math.sqrt(2.0 * math.pi)


class Regime(str, enum.Enum):
    BULK = "bulk"
    OUTER_EDGE = "outer_edge"
    INNER_EDGE = "inner_edge"
    WEAK = "weak"
    SINGULAR = "singular"


@dataclass(frozen=True)
class RegimePoint:
    regime: Regime
    b: float = 0.0
    rho: float = 1.0
    p: complex = 0j
    theta: float = 0.0
    zeta: complex = 0j

    def __post_init__(self):
        object.__setattr__(self, "regime", Regime(self.regime))
        r = self.regime
        if self.b < 0:
            raise DomainError("b must be >= 0")
        if r in (Regime.INNER_EDGE, Regime.SINGULAR) and not self.b > 0:
            raise DomainError(f"{r.value} needs b > 0")
        if r is Regime.BULK and not self.b < abs(self.p) ** 2 < 1 + self.b:
            raise DomainError(f"bulk point needs b < |p|^2 < 1+b, got |p|^2={abs(self.p) ** 2}")
        if r is Regime.WEAK and not self.rho > 0:
            raise DomainError("weak regime needs rho > 0")

    def at(self, zeta: complex) -> "RegimePoint":
        return replace(self, zeta=complex(zeta))

    def params(self, N: int) -> ModelParams:
        """Model parameters (unit scale) matching this regime at size ``N``."""
        r = self.regime
        if r in (Regime.BULK, Regime.OUTER_EDGE, Regime.INNER_EDGE):
            return ModelParams(N, N * self.b)
        if r is Regime.WEAK:
            return ModelParams(N, N * (N / self.rho ** 2 - 0.5))
        return ModelParams(N, self.b)

    def scale(self, N: int) -> float:
        """Power of ``N`` that makes the weighted correlation functions O(1)."""
        r = self.regime
        if r in (Regime.BULK, Regime.SINGULAR):
            return 1.0 / N
        if r in (Regime.OUTER_EDGE, Regime.INNER_EDGE):
            return N ** -0.5
        return 1.0


def rescale(rp: RegimePoint, params: ModelParams) -> complex:
    """Finite-N location (unit scale) of the local coordinate ``rp.zeta``."""
    N = params.N
    rot = cmath.exp(1j * rp.theta)
    z = complex(rp.zeta)
    r = rp.regime
    if r is Regime.BULK:
        return rot * (math.sqrt(N) * complex(rp.p) + z)
    if r is Regime.OUTER_EDGE:
        return rot * (math.sqrt(N * (1 + rp.b)) + z)
    if r is Regime.INNER_EDGE:
        return rot * (math.sqrt(N * rp.b) - z)
    if r is Regime.WEAK:
        return rot * (N / rp.rho + z)
    return z


# ---------------------------------------------------------------------------
# removable singularities


def _circle_mean(fn: Callable[..., complex], args: list, slots: Sequence[int], tol=TOL) -> complex:
    """Mean of ``fn`` over one circle, shifting every listed slot by the same node.

    ``a -> fn(..., s + a, ..., t + a, ...)`` is entire, so the mean equals the
    value at the centre; nodes stay at least ``radius - switch`` away from the
    removable set.
    """
    growth = 1.0 + sum(abs(v) for v in args if isinstance(v, complex))
    nodes = contour_nodes(tol.coincidence_radius, growth, tol.coincidence_points)
    vals = []
    for a in nodes:
        shifted = list(args)
        for s in slots:
            shifted[s] = shifted[s] + a
        vals.append(fn(*shifted))
    return contour_mean(vals, nodes).value()


def _guarded(fn, args, pairs, tol=TOL) -> complex:
    """Evaluate ``fn(*args)`` unless some slot sits close to its removable set.

    ``pairs`` lists ``(slot, centre)``; slots closer than the switch distance
    to their centre are handled by a circle mean.
    """
    near = [s for s, c in pairs if abs(complex(args[s]) - complex(c)) < tol.coincidence_switch]
    if not near:
        return complex(fn(*args))
    return _circle_mean(fn, list(args), near, tol)


# ---------------------------------------------------------------------------
# bulk


def bulk_psi11(p: complex, b: float) -> float:
    s = abs(complex(p)) ** 2
    if not b < s < 1 + b:
        raise DomainError(f"bulk needs b < |p|^2 < 1+b, got |p|^2={s}, b={b}")
    return (s - b) * (1 + b - s) / s


def _dexprel_series(t: complex) -> complex:
    """Taylor series of the derivative of ``(e^t - 1)/t``."""
    total = 0j
    fact = 2.0  # (k+1)! at k=1
    power = 1.0 + 0j  # t^{k-1}
    for k in range(1, 40):
        total += k * power / fact
        power *= t
        fact *= k + 2
    return total


def bulk_psi12(zeta1: complex, zeta2: complex, p: complex, b: float) -> float:
    """Two-point off-diagonal limit in the bulk (sign as for the other regimes).

    Equals ``bulk_psi11`` times the bulk reduced kernel at ``t = -|zeta1 - zeta2|^2``;
    the scaled ``D12`` tends to minus this value.
    """
    w2 = abs(complex(zeta1) - complex(zeta2)) ** 2
    return bulk_psi11(p, b) * _dexprel(-w2).real


def _dexprel(t: complex) -> complex:
    t = complex(t)
    if abs(t) < 0.5:
        return _dexprel_series(t)
    return (t * cmath.exp(t) - cmath.exp(t) + 1) / (t * t)


def bulk_reduced(zeta_bar: complex, eta: complex, chi: complex, chi_bar: complex) -> complex:
    return _dexprel((complex(zeta_bar) - complex(chi_bar)) * (complex(eta) - complex(chi)))


def bulk_weight(zeta: complex, zeta_bar: complex, chi: complex, chi_bar: complex) -> complex:
    s = (complex(zeta) - complex(chi)) * (complex(zeta_bar) - complex(chi_bar))
    return (1 + s) * cmath.exp(-s)


def bulk_kernel(zeta, zeta_bar, eta, chi, chi_bar) -> complex:
    return bulk_reduced(zeta_bar, eta, chi, chi_bar) * bulk_weight(zeta, zeta_bar, chi, chi_bar)


# ---------------------------------------------------------------------------
# edge


def edge_F_script(a: complex) -> complex:
    """``(exp(-a^2/2)/sqrt(2 pi)) (1 - sqrt(2 pi) a exp(a^2/2) F(a))``."""
    a = complex(a)
    scaled_tail = 0.5 * complex(sc.erfcx(a / math.sqrt(2.0)))  # exp(a^2/2) F(a)
    return cmath.exp(-0.5 * a * a) * (1.0 / SQRT_2PI - a * scaled_tail)


def _F(u: complex) -> complex:
    return complex(error_F(complex(u)))


def _dF(u: complex) -> complex:
    u = complex(u)
    return -cmath.exp(-0.5 * u * u) / SQRT_2PI


def _edge_g(a, b, c, d, f, x=0.0) -> complex:
    return (cmath.exp(-f) * _F(b + x) * _F(c + x) - _F(d + x) * _F(a + x) + f * _F(d) * _F(a + x))


def _edge_dg(a, b, c, d, f) -> complex:
    return (cmath.exp(-f) * (_dF(b) * _F(c) + _F(b) * _dF(c))
            - _dF(d) * _F(a) - _F(d) * _dF(a) + f * _F(d) * _dF(a))


def edge_H_numerator(a, b, c, d, f) -> complex:
    """``a g(0) + g'(0)``: the edge numerator with the Gaussian factors removed."""
    a, b, c, d, f = (complex(v) for v in (a, b, c, d, f))
    return a * _edge_g(a, b, c, d, f) + _edge_dg(a, b, c, d, f)


def edge_H(a, b, c, d, f) -> complex:
    den = edge_F_script(a)
    if den == 0:
        raise ZeroDivisionError("edge_F_script(a) vanishes")
    return -edge_H_numerator(a, b, c, d, f) / den


def edge_H_fd(a, b, c, d, f, step: float = 1e-5) -> complex:
    """Central-difference evaluation of the defining ``x``-derivative (test oracle)."""
    a, b, c, d, f = (complex(v) for v in (a, b, c, d, f))

    def outer(x):
        return cmath.exp(0.5 * (a + x) ** 2) * _edge_g(a, b, c, d, f, x)

    deriv = (outer(step) - outer(-step)) / (2 * step)
    return -cmath.exp(-0.5 * a * a) * deriv / edge_F_script(a)


def edge_constant(b: float, side: str) -> float:
    side = Regime(side) if not isinstance(side, Regime) else side
    if side is Regime.OUTER_EDGE:
        return 1.0 / math.sqrt(1.0 + b)
    if side is Regime.INNER_EDGE:
        if not b > 0:
            raise DomainError("inner edge needs b > 0")
        return 1.0 / math.sqrt(b)
    raise DomainError(f"not an edge: {side}")


def _edge_reduced_direct(zeta_bar, eta, chi, chi_bar) -> complex:
    d1, d2 = zeta_bar - chi_bar, eta - chi
    h = edge_H(chi + chi_bar, chi + zeta_bar, chi_bar + eta, zeta_bar + eta, d1 * d2)
    return cmath.exp(zeta_bar * eta) * h / (d1 * d1 * d2 * d2)


def edge_reduced(zeta_bar, eta, chi, chi_bar, tol=TOL) -> complex:
    args = [complex(zeta_bar), complex(eta), complex(chi), complex(chi_bar)]
    return _guarded(_edge_reduced_direct, args, [(0, chi_bar), (1, chi)], tol)


def edge_weight(zeta, zeta_bar, chi, chi_bar) -> complex:
    zeta, zeta_bar = complex(zeta), complex(zeta_bar)
    return (1 + (zeta - chi) * (zeta_bar - chi_bar)) * cmath.exp(-zeta * zeta_bar)


def edge_kernel(zeta, zeta_bar, eta, chi, chi_bar, tol=TOL) -> complex:
    return edge_reduced(zeta_bar, eta, chi, chi_bar, tol) * edge_weight(zeta, zeta_bar, chi, chi_bar)


def edge_psi11(zeta1: complex, b: float, side="outer_edge") -> complex:
    z = complex(zeta1)
    return edge_constant(b, side) * edge_F_script(z + z.conjugate())


def _edge_psi12_direct(z1, zb1, z2, zb2) -> complex:
    sep = (zb1 - zb2) * (z1 - z2)
    h_num = edge_H_numerator(z1 + zb2, z1 + zb1, z2 + zb2, z2 + zb1, -sep)
    # F(z1+zb2) * H(...) = -h_num, so the division by F never happens
    return cmath.exp(-sep) * (-h_num) / (sep * sep)


def edge_psi12(zeta1: complex, zeta2: complex, b: float, side="outer_edge", tol=TOL) -> complex:
    """Off-diagonal prefactor at the edge; the scaled ``D12`` tends to its negative."""
    z1, z2 = complex(zeta1), complex(zeta2)
    c = edge_constant(b, side)
    args = [z1, z1.conjugate(), z2, z2.conjugate()]
    return c * _guarded(_edge_psi12_direct, args, [(2, z1), (3, z1.conjugate())], tol)


# ---------------------------------------------------------------------------
# weak non-unitarity


def _L(x: complex, rho: float) -> complex:
    return complex(band_error_L(complex(x), rho))


def _gauss(u: complex) -> complex:
    return cmath.exp(-0.5 * complex(u) ** 2) / SQRT_2PI


def weak_L_script(x: complex, rho: float) -> complex:
    if not rho > 0:
        raise DomainError(f"rho must be positive, got {rho}")
    x = complex(x)
    h = rho / 2
    return ((x + h) * _gauss(x - h)
            - (x - h) * ((x + h) * _L(x, rho) + _gauss(x + h)))


def _weak_A(a, b, c, d, f, rho):
    h = rho / 2
    return (h + a) * (h - a) * (cmath.exp(f) * (f - 1) * _L(a, rho) * _L(d, rho) + _L(b, rho) * _L(c, rho))


def _weak_B(a, b, c, rho):
    h = rho / 2
    return _L(b, rho) * ((a + h) * _gauss(c - h) - (a - h) * _gauss(c + h))


def _weak_C(a, b, rho):
    h = rho / 2
    return _gauss(a + h) * _gauss(b - h) + _gauss(a - h) * _gauss(b + h)


def weak_H_script(a, b, c, d, f, rho: float) -> complex:
    if not rho > 0:
        raise DomainError(f"rho must be positive, got {rho}")
    a, b, c, d, f = (complex(v) for v in (a, b, c, d, f))
    ef = cmath.exp(f)
    return (_weak_A(a, b, c, d, f, rho)
            + ef * f * _weak_B(a, d, a, rho)
            + _weak_B(a, b, c, rho) + _weak_B(a, c, b, rho)
            - ef * _weak_B(a, d, a, rho) - ef * _weak_B(a, a, d, rho)
            + _weak_C(b, c, rho) - ef * _weak_C(d, a, rho))


def _weak_reduced_direct(zeta_bar, eta, chi, chi_bar, rho) -> complex:
    d1, d2 = zeta_bar - chi_bar, eta - chi
    num = weak_H_script(chi + chi_bar, chi + zeta_bar, eta + chi_bar, eta + zeta_bar, d1 * d2, rho)
    return num / (weak_L_script(chi + chi_bar, rho) * d1 * d1 * d2 * d2)


def weak_reduced(zeta_bar, eta, chi, chi_bar, rho: float, tol=TOL) -> complex:
    args = [complex(zeta_bar), complex(eta), complex(chi), complex(chi_bar), rho]
    return _guarded(_weak_reduced_direct, args, [(0, chi_bar), (1, chi)], tol)


def weak_kernel(zeta, zeta_bar, eta, chi, chi_bar, rho: float, tol=TOL) -> complex:
    return weak_reduced(zeta_bar, eta, chi, chi_bar, rho, tol) * bulk_weight(zeta, zeta_bar, chi, chi_bar)


def weak_psi11(zeta1: complex, rho: float) -> complex:
    z = complex(zeta1)
    return weak_L_script(z + z.conjugate(), rho)


def _weak_psi12_direct(z1, zb1, z2, zb2, rho, as_printed) -> complex:
    sep = (zb1 - zb2) * (z1 - z2)
    num = weak_H_script(z1 + zb2, z1 + zb1, z2 + zb2, z2 + zb1, -sep, rho)
    gauss = cmath.exp(-sep) if as_printed else 1.0
    return gauss * num / (sep * sep)


def weak_psi12(zeta1: complex, zeta2: complex, rho: float, *, as_printed: bool = False,
               tol=TOL) -> complex:
    """Off-diagonal prefactor in the weak regime.

    The default omits the ``exp(-|zeta1 - zeta2|^2)`` factor: with it the
    finite-N off-diagonal function does not converge, and without it the
    large-``rho`` limit reproduces :func:`bulk_psi12`.  ``as_printed=True``
    restores the factor for comparison.
    """
    z1, z2 = complex(zeta1), complex(zeta2)
    args = [z1, z1.conjugate(), z2, z2.conjugate(), rho, as_printed]
    return _guarded(_weak_psi12_direct, args, [(2, z1), (3, z1.conjugate())], tol)


def sine_limit_ratio(zeta: complex, chi: complex, rho: float, *, band: bool = False) -> float:
    """Small-``rho`` check of the weak diagonal against the sine-kernel density ``1/pi``.

    With ``a = rho/2`` the diagonal ``a**-2 K_weak(zeta/a, ... | chi/a)`` is
    compared with ``1/pi``.  ``band=True`` first integrates over the real part
    of ``zeta`` across the band, turning the planar density into a line
    density.
    """
    from scipy.integrate import quad

    a = rho / 2
    u = complex(zeta).imag
    c = complex(chi) / a

    def diag(x):
        z = complex(x, u) / a
        return weak_kernel(z, z.conjugate(), z, c, c.conjugate(), rho).real / a ** 2

    if not band:
        return math.pi * diag(complex(zeta).real)
    width = 40 * a * a
    val, _ = quad(diag, -width, width, limit=400, points=[0.0])
    return val


# ---------------------------------------------------------------------------
# singular origin


def _check_b(b: float):
    if not b > 0:
        raise DomainError(f"b must be positive, got {b}")


def singular_E_script(z: complex, x: complex, b: float) -> complex:
    _check_b(b)
    return (complex(x) - b) * mittag_leffler(b + 1, z) + reciprocal_gamma(b)


def singular_S(x, y, z, w, f, b: float) -> complex:
    _check_b(b)
    x, y, z, w, f = (complex(v) for v in (x, y, z, w, f))
    E = {v: mittag_leffler(b + 1, v) for v in {x, y, z, w}}
    return ((x - b) * (E[y] * E[z] - E[w] * E[x] + f * E[w] * E[x])
            + (E[y] + E[z] - E[w] - E[x] + f * E[w]) * reciprocal_gamma(b))


def _singular_reduced_direct(zeta_bar, eta, chi, chi_bar, b) -> complex:
    d1, d2 = zeta_bar - chi_bar, eta - chi
    x = chi * chi_bar
    num = singular_S(x, zeta_bar * chi, chi_bar * eta, zeta_bar * eta, d1 * d2, b)
    return num / (d1 * d1 * d2 * d2 * singular_E_script(x, x, b))


def singular_reduced(zeta_bar, eta, chi, chi_bar, b: float, tol=TOL) -> complex:
    args = [complex(zeta_bar), complex(eta), complex(chi), complex(chi_bar), b]
    return _guarded(_singular_reduced_direct, args, [(0, chi_bar), (1, chi)], tol)


def _abs_power(zeta: complex, zeta_bar: complex, b: float) -> complex:
    """``|zeta|^{2b}`` continued to independent ``(zeta, zeta_bar)``."""
    s = complex(zeta) * complex(zeta_bar)
    if s == 0:
        return 0j if b > 0 else 1 + 0j
    return cmath.exp(b * cmath.log(s))


def singular_weight(zeta, zeta_bar, chi, chi_bar, b: float) -> complex:
    zeta, zeta_bar = complex(zeta), complex(zeta_bar)
    return ((1 + (zeta_bar - chi_bar) * (zeta - chi)) * _abs_power(zeta, zeta_bar, b)
            * cmath.exp(-zeta * zeta_bar))


def singular_kernel(zeta, zeta_bar, eta, chi, chi_bar, b: float, tol=TOL) -> complex:
    return (singular_reduced(zeta_bar, eta, chi, chi_bar, b, tol)
            * singular_weight(zeta, zeta_bar, chi, chi_bar, b))


def singular_psi11(zeta1: complex, b: float) -> float:
    _check_b(b)
    s = abs(complex(zeta1)) ** 2
    if s == 0:
        if b < 1:
            raise DomainError("zeta1 = 0 is excluded when b < 1")
        return reciprocal_gamma(b) if b == 1 else 0.0
    return (singular_E_script(s, s, b) * s ** (b - 1) * math.exp(-s)).real


def _singular_psi12_direct(z1, zb1, z2, zb2, b) -> complex:
    f = (zb1 - zb2) * (z2 - z1)
    num = singular_S(zb2 * z1, zb1 * z1, zb2 * z2, zb1 * z2, f, b)
    w = _abs_power(z1, zb1, b) * _abs_power(z2, zb2, b) * cmath.exp(-(z1 * zb1 + z2 * zb2))
    return num / (z1 * zb2 * f * f) * w


def singular_psi12(zeta1: complex, zeta2: complex, b: float, tol=TOL) -> complex:
    _check_b(b)
    z1, z2 = complex(zeta1), complex(zeta2)
    args = [z1, z1.conjugate(), z2, z2.conjugate(), b]
    return _guarded(_singular_psi12_direct, args, [(2, z1), (3, z1.conjugate())], tol)


# ---------------------------------------------------------------------------
# regime dispatch


def psi11(rp: RegimePoint, zeta1: complex) -> complex:
    r = rp.regime
    if r is Regime.BULK:
        return complex(bulk_psi11(rp.p, rp.b))
    if r in (Regime.OUTER_EDGE, Regime.INNER_EDGE):
        return edge_psi11(zeta1, rp.b, r)
    if r is Regime.WEAK:
        return weak_psi11(zeta1, rp.rho)
    return complex(singular_psi11(zeta1, rp.b))


def psi12(rp: RegimePoint, zeta1: complex, zeta2: complex) -> complex:
    r = rp.regime
    if r is Regime.BULK:
        return complex(bulk_psi12(zeta1, zeta2, rp.p, rp.b))
    if r in (Regime.OUTER_EDGE, Regime.INNER_EDGE):
        return edge_psi12(zeta1, zeta2, rp.b, r)
    if r is Regime.WEAK:
        return weak_psi12(zeta1, zeta2, rp.rho)
    return singular_psi12(zeta1, zeta2, rp.b)


def reduced_limit(rp: RegimePoint, zeta_bar, eta, chi, chi_bar) -> complex:
    r = rp.regime
    if r is Regime.BULK:
        return bulk_reduced(zeta_bar, eta, chi, chi_bar)
    if r in (Regime.OUTER_EDGE, Regime.INNER_EDGE):
        return edge_reduced(zeta_bar, eta, chi, chi_bar)
    if r is Regime.WEAK:
        return weak_reduced(zeta_bar, eta, chi, chi_bar, rp.rho)
    return singular_reduced(zeta_bar, eta, chi, chi_bar, rp.b)


def weight_limit(rp: RegimePoint, zeta, zeta_bar, chi, chi_bar) -> complex:
    r = rp.regime
    if r in (Regime.BULK, Regime.WEAK):
        return bulk_weight(zeta, zeta_bar, chi, chi_bar)
    if r in (Regime.OUTER_EDGE, Regime.INNER_EDGE):
        return edge_weight(zeta, zeta_bar, chi, chi_bar)
    return singular_weight(zeta, zeta_bar, chi, chi_bar, rp.b)


def kernel_limit(rp: RegimePoint, zeta, zeta_bar, eta, chi, chi_bar) -> complex:
    return reduced_limit(rp, zeta_bar, eta, chi, chi_bar) * weight_limit(rp, zeta, zeta_bar, chi, chi_bar)


@dataclass
class LimitEval:
    regime: Regime
    psi11: complex
    psi12: complex | None
    kernel_matrix: KernelMatrix


def limit_eval(rp: RegimePoint, zetas: Sequence[complex]) -> LimitEval:
    """Limiting prefactors and kernel matrix for physical local coordinates.

    The kernel matrix is conditioned on ``zetas[0]`` and spans ``zetas[1:]``.
    """
    zs = [complex(z) for z in zetas]
    if not zs:
        raise DomainError("need at least one point")
    c = zs[0]
    rest = zs[1:]
    ent = np.array([[kernel_limit(rp, zi, zi.conjugate(), zj, c, c.conjugate()) for zj in rest]
                    for zi in rest], dtype=complex).reshape(len(rest), len(rest))
    det = complex(np.linalg.det(ent)) if rest else 1.0 + 0j
    p12 = psi12(rp, zs[0], zs[1]) if len(zs) >= 2 else None
    return LimitEval(rp.regime, psi11(rp, c), p12, KernelMatrix(ent, det))


# ---------------------------------------------------------------------------
# finite-N convergence


DEFAULT_TEST_POINTS = {
    "local": [(0.0, 0.5 + 0.3j), (0.3j, -0.4 + 0.2j), (0.2 + 0.1j, -0.3 + 0.4j),
              (-0.2 + 0.2j, 0.6 - 0.1j), (0.5, 0.1 - 0.6j)],
    "singular": [(1.2, 0.6 + 0.8j), (0.7 + 0.3j, 1.5 - 0.2j), (0.5j, -0.9 + 0.4j),
                 (1.0 - 0.5j, 0.3 + 0.2j), (-1.1, -0.4 - 1.0j)],
}


def default_test_points(rp: RegimePoint) -> list[tuple[complex, complex]]:
    key = "singular" if rp.regime is Regime.SINGULAR else "local"
    return [(complex(a), complex(b)) for a, b in DEFAULT_TEST_POINTS[key]]


@dataclass
class ProbeRow:
    N: int
    point: int
    finite: complex
    limit: complex
    residual: float


@dataclass
class ProbeTable:
    regime: Regime
    quantity: str
    rows: list[ProbeRow]
    Ns: list[int]
    max_residual: list[float]
    exponent: float
    monotone: bool

    def as_dict(self) -> dict:
        return {"regime": self.regime.value, "quantity": self.quantity, "Ns": self.Ns,
                "max_residual": self.max_residual, "exponent": self.exponent,
                "monotone": self.monotone}


def _probe_pair(rp: RegimePoint, N: int, z1: complex, z2: complex, quantity: str):
    params = rp.params(N)
    s = rp.scale(N)
    f1 = rescale(rp.at(z1), params)
    f2 = rescale(rp.at(z2), params)
    if quantity == "psi11":
        return s * D11(1, params, [f1]), psi11(rp, z1)
    if quantity == "d11":
        lim = psi11(rp, z1) * kernel_limit(rp, z2, z2.conjugate(), z2, z1, z1.conjugate())
        return s * D11(2, params, [f1, f2]), lim
    if quantity == "d12":
        return s * D12(2, params, [f1, f2]), -psi12(rp, z1, z2)
    raise ValueError(f"unknown probe quantity {quantity!r}")


def converge_probe(rp: RegimePoint, Ns: Sequence[int], test_points=None,
                   quantity: str = "d11", workers: int = 1) -> ProbeTable:
    """Relative residuals between scaled finite-N functions and their limits.

    ``quantity`` selects the compared object: ``"psi11"`` (one-point function),
    ``"d11"`` (two-point on-diagonal function, prefactor times limiting kernel
    diagonal) or ``"d12"`` (two-point off-diagonal function).  The decay
    exponent is the least-squares slope of ``log(max residual)`` against
    ``log N``.
    """
    pts = default_test_points(rp) if test_points is None else [
        (complex(a), complex(b)) for a, b in test_points]
    jobs = [(N, i, a, b) for N in Ns for i, (a, b) in enumerate(pts)]

    def work(job):
        N, i, a, b = job
        fin, lim = _probe_pair(rp, N, a, b, quantity)
        return ProbeRow(N, i, fin, lim, abs(fin - lim) / abs(lim))

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(workers) as ex:
            rows = list(ex.map(work, jobs))
    else:
        rows = [work(j) for j in jobs]
    Ns = [int(N) for N in Ns]
    mx = [max(r.residual for r in rows if r.N == N) for N in Ns]
    if len(Ns) >= 2:
        slope = float(np.polyfit(np.log(Ns), np.log(mx), 1)[0])
    else:
        slope = float("nan")
    mono = all(b < a for a, b in zip(mx, mx[1:]))
    return ProbeTable(rp.regime, quantity, rows, Ns, mx, slope, mono)


# ---------------------------------------------------------------------------
# curve data


CSV_HEADER = "regime,function,param,re_arg,im_arg,re_val,im_val"


@dataclass
class CurveGrid:
    regime: str
    function: str
    param: float
    args: np.ndarray
    values: np.ndarray

    def rows(self):
        for a, v in zip(self.args, self.values):
            yield (self.regime, self.function, self.param, a.real, a.imag, v.real, v.imag)


def figure2_curves(xmin: float = -4.0, xmax: float = 4.0, steps: int = 400,
                   which: str = "all") -> list[CurveGrid]:
    """One-variable families: ``edge_F_script``, ``weak_L_script`` and ``E_b(x|x)``."""
    xs = np.linspace(xmin, xmax, steps + 1).astype(complex)
    out = []
    if which in ("all", "F"):
        out.append(CurveGrid("edge", "F_script", float("nan"), xs,
                             np.array([edge_F_script(x) for x in xs])))
    if which in ("all", "L"):
        for rho in (0.5, 2.0, 3.0):
            out.append(CurveGrid("weak", "L_script", rho, xs,
                                 np.array([weak_L_script(x, rho) for x in xs])))
    if which in ("all", "E"):
        for b in (0.5, 1.0, 3.0):
            out.append(CurveGrid("singular", "E_script", b, xs,
                                 np.array([singular_E_script(x, x, b) for x in xs])))
    return out


def figure3_surfaces(extent: float = 2.0, n: int = 50, rho: float = 10.0,
                     chi: complex = 0j, which: str = "all") -> list[CurveGrid]:
    """Diagonal kernel at ``z = x + iy`` on an ``n x n`` grid, conditioned on ``chi``."""
    g = np.linspace(-extent, extent, n)
    pts = (g[:, None] + 1j * g[None, :]).ravel()
    chi = complex(chi)
    cb = chi.conjugate()
    out = []
    if which in ("all", "bulk"):
        out.append(CurveGrid("bulk", "K_diag", float("nan"), pts,
                             np.array([bulk_kernel(z, z.conjugate(), z, chi, cb) for z in pts])))
    if which in ("all", "weak"):
        out.append(CurveGrid("weak", "K_diag", rho, pts,
                             np.array([weak_kernel(z, z.conjugate(), z, chi, cb, rho) for z in pts])))
    return out
