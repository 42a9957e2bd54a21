"""Finite-N overlap-weighted kernel and weighted correlation functions.

Points ``z`` and their conjugates ``zbar`` are handled as independent complex
variables throughout.  Quantities that grow like ``exp(|z|^2)`` are carried as
:class:`~iginue.specfun.StabilizedValue` and collapsed only after the
Gaussian weight has been applied.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special as sc

from .specfun import (
    DomainError,
    PoleError,
    StabilizedValue,
    contour_mean,
    contour_nodes,
    frak_e,
    frak_e_stabilized,
    pole_term_stabilized,
    reciprocal_gamma,
    scaled_terms,
    sum_scaled,
    trunc_exp,
    trunc_exp_stabilized,
)
from .tolerances import DEFAULT as TOL

SV = StabilizedValue


class BranchError(ValueError):
    """Non-integer power requested on the negative real axis."""


class CoincidenceError(ValueError):
    """Evaluation on a removable-singularity set without the limit path."""


class DegenerateError(ZeroDivisionError):
    """A normalizing quantity vanished at the requested argument."""


@dataclass(frozen=True)
class ModelParams:
    N: int
    alpha: float
    sigma_sq: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise DomainError(f"N must be an integer >= 2, got {self.N}")
        if not self.alpha > -1:
            raise DomainError(f"alpha must exceed -1, got {self.alpha}")
        if not self.sigma_sq > 0:
            raise DomainError(f"sigma_sq must be positive, got {self.sigma_sq}")


@dataclass(frozen=True)
class ConditionPoint:
    lam: complex
    lam_bar: complex

    @classmethod
    def physical(cls, lam: complex) -> "ConditionPoint":
        lam = complex(lam)
        return cls(lam, lam.conjugate())

    @property
    def x(self) -> complex:
        return complex(self.lam) * complex(self.lam_bar)

    @property
    def is_physical(self) -> bool:
        return complex(self.lam_bar) == complex(self.lam).conjugate()


@dataclass
class KernelMatrix:
    """Kernel values on a point configuration, stored in a balanced gauge.

    ``entries[i, j] * exp(log_cocycle[i] - log_cocycle[j])`` recovers the raw
    kernel value.  The balanced matrix is a cocycle conjugation of the raw
    one, so both share ``det_value``.
    """

    entries: np.ndarray
    det_value: complex
    log_cocycle: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))

    def raw(self) -> np.ndarray:
        if self.log_cocycle.size == 0:
            return self.entries.copy()
        d = self.log_cocycle[:, None] - self.log_cocycle[None, :]
        return self.entries * np.exp(d)

    def conjugated(self, phi) -> "KernelMatrix":
        phi = np.asarray(phi, dtype=complex)
        ent = phi[:, None] * self.entries / phi[None, :]
        return KernelMatrix(ent, complex(np.linalg.det(ent)) if ent.size else 1.0 + 0j,
                            self.log_cocycle)


def _is_integer(a: float) -> bool:
    return float(a).is_integer()


def _log_power(base: complex, alpha: float) -> complex:
    """Principal ``alpha * Log(base)``; refuses the cut for non-integer alpha."""
    base = complex(base)
    if alpha == 0:
        return 0j
    if base == 0:
        if alpha > 0:
            return complex(-math.inf, 0.0)
        raise DomainError("zero base with negative exponent")
    if not _is_integer(alpha) and base.imag == 0 and base.real < 0:
        raise BranchError(f"(.)^{alpha} on the negative real axis at {base}")
    return alpha * cmath.log(base)


def weight_omega(z: complex, w: complex, u: complex, v: complex, alpha: float) -> complex:
    """``(1 + (z-u)(w-v)) (zw)^alpha exp(-zw)``."""
    return weight_omega_stabilized(z, w, u, v, alpha).value()


def weight_omega_stabilized(z, w, u, v, alpha) -> SV:
    zw = complex(z) * complex(w)
    pref = 1 + (complex(z) - u) * (complex(w) - v)
    return SV.from_log(_log_power(zw, alpha) - zw) * pref


def weight_varpi(z: complex, w: complex, alpha: float) -> complex:
    """``(zw)^alpha exp(-(|z|^2 + |w|^2)/2)``."""
    return weight_varpi_stabilized(z, w, alpha).value()


def weight_varpi_stabilized(z, w, alpha) -> SV:
    z, w = complex(z), complex(w)
    return SV.from_log(_log_power(z * w, alpha) - 0.5 * (abs(z) ** 2 + abs(w) ** 2))


# ---------------------------------------------------------------------------
# the f / Phi / mu families


def f_alpha_stabilized(n: int, alpha: float, x: complex) -> SV:
    """Positive-coefficient representation of ``f_n``.

    ``f_n(x) = sum_j ((n+1-j)(j+1) + alpha) x^j / Gamma(j + alpha + 2)``,
    an exact rearrangement with no pole at ``x = alpha`` and no cancellation
    near ``x = 0``.
    """
    if n < 0:
        raise DomainError(f"n must be >= 0, got {n}")
    x = complex(x)
    j = np.arange(n + 1, dtype=float)
    coef = (n + 1 - j) * (j + 1) + alpha
    if x == 0:
        return SV.from_log(-sc.gammaln(alpha + 2.0)) * float(coef[0])
    mant, logs = scaled_terms(n, alpha + 2.0, x)
    return sum_scaled(mant * coef, logs)


def f_alpha(n: int, alpha: float, x: complex) -> complex:
    """``f_n^(alpha)(x)``, finite on the whole plane including ``x = alpha`` and ``x = 0``."""
    return f_alpha_stabilized(n, alpha, x).value()


def f_alpha_closed(n: int, alpha: float, x: complex) -> complex:
    """Pole form ``(x-alpha)/x * ((n+alpha+1) e_n(x|x) - x e_{n-1}(x|x))``."""
    x = complex(x)
    if x == 0:
        raise DomainError("closed form of f is undefined at x = 0")
    a = frak_e_stabilized(n, alpha, x, x)
    b = frak_e_stabilized(n - 1, alpha, x, x)
    return ((a * (n + alpha + 1) - b * x) * ((x - alpha) / x)).value()


def h_alpha(n: int, alpha: float, x: complex) -> complex:
    """Recurrence-solution form ``h_n``; agrees with :func:`f_alpha` for ``x != 0``."""
    x = complex(x)
    if x == 0:
        raise DomainError("h-form is undefined at x = 0")
    k = np.arange(n + 1, dtype=float)
    mant, logs = scaled_terms(n, alpha + 1.0, x)
    s = sum_scaled(mant * (n + 1 - k), logs)
    tail = alpha * (n + 1) * reciprocal_gamma(alpha + 1) / x
    return (s * ((x - alpha) / x) + tail).value()


def phi_alpha(n: int, alpha: float, x: complex) -> complex:
    """Direct sum ``Phi_n(x) = sum_{k<=n} x^k / (Gamma(k+alpha+2) f_k f_{k+1})``."""
    if n < -1:
        raise DomainError(f"n must be >= -1, got {n}")
    x = complex(x)
    total = SV(0j, 0.0)
    if n == -1:
        return 0j
    fs = [f_alpha_stabilized(k, alpha, x) for k in range(n + 2)]
    mant, logs = scaled_terms(n, alpha + 2.0, x)
    for k in range(n + 1):
        if fs[k].is_zero or fs[k + 1].is_zero:
            raise DegenerateError(f"f_{k} or f_{k+1} vanishes at x={x}")
        total = total + SV.make(mant[k], logs[k]) / (fs[k] * fs[k + 1])
    return total.value()


def phi_alpha_closed(n: int, alpha: float, x: complex) -> complex:
    """Closed form of ``Phi_n`` with poles at ``x = 0`` and ``x = alpha``."""
    x = complex(x)
    if n == -1:
        return 0j
    if x == 0 or x == alpha:
        raise DomainError("closed form of Phi needs x not in {0, alpha}")
    fn1 = f_alpha_stabilized(n + 1, alpha, x)
    if fn1.is_zero:
        raise DegenerateError(f"f_{n+1} vanishes at x={x}")
    head = math.gamma(alpha + 1) * (x - (alpha + 1)) / ((x - alpha) * x)
    tail = (SV.from_complex((n + alpha + 2 - x) / (x * (x - alpha))) / fn1).value()
    return head + tail


def mu_partial(n: int, alpha: float, x: complex, t: complex) -> complex:
    """``mu_n(x, t) = sum_{k<=n} f_k(x) t^k``."""
    t = complex(t)
    total = SV(0j, 0.0)
    for k in range(n + 1):
        total = total + f_alpha_stabilized(k, alpha, x) * (t ** k)
    return total.value()


def mu_closed(N: int, alpha: float, x: complex, t: complex) -> complex:
    """Closed form of ``mu_{N-1}(x, t)`` for ``t != 1``."""
    x, t = complex(x), complex(t)
    if t == 1:
        raise DomainError("closed form of mu needs t != 1")
    one = 1 - t
    a = frak_e_stabilized(N - 1, alpha, x * t, x) / (one ** 2)
    b = SV.from_log(N * cmath.log(x * t) - sc.gammaln(N + alpha)) / one if t != 0 else SV(0j)
    c = frak_e_stabilized(N - 1, alpha, x, x) * (
        t ** N * (N + alpha + 1 - x - (N + alpha - x) * t) / one ** 2)
    return ((a - b - c) * ((x - alpha) / x)).value()


def mu_dt_closed(N: int, alpha: float, x: complex, t: complex) -> complex:
    """Closed form of the ``t``-derivative of ``mu_{N-1}(x, t)``."""
    x, t = complex(x), complex(t)
    r = (x - alpha) / x
    one = 1 - t
    mu = mu_closed(N, alpha, x, t)
    out = (N / t + 2 / one) * mu
    out -= r * (N + alpha - x * t) / (t * one ** 2) * trunc_exp(N - 1, alpha, x * t)
    out += r * t ** N * (N + alpha - x) * trunc_exp(N - 1, alpha, x) / one ** 2
    inner = (x * t) ** N * one * reciprocal_gamma(N + alpha)
    if alpha != 0:
        inner += alpha * reciprocal_gamma(alpha + 1) * (N + alpha - x) * (1 - t ** (N + 1)) / (x - alpha)
    out -= r * inner / (t * one ** 2)
    return out


def g_double_sum(N: int, alpha: float, x: complex, y: complex, z: complex) -> complex:
    """Literal double sum ``G_{N-1}(x | y, z)`` (oracle path, O(N^2)).

    The double sum is badly conditioned (terms can exceed the result by six
    orders of magnitude), so it runs in extended precision with its own
    power/f recursions; the common factor ``1/Gamma(alpha+2)`` is pulled out.
    """
    if N < 1:
        raise DomainError(f"N must be >= 1, got {N}")
    LD = np.clongdouble
    xl, yl, zl = LD(complex(x)), LD(complex(y)), LD(complex(z))
    # p[j] = x^j Gamma(alpha+2) / Gamma(j+alpha+2)
    p = np.empty(N + 1, dtype=LD)
    p[0] = 1
    for j in range(1, N + 1):
        p[j] = p[j - 1] * xl / np.longdouble(j + alpha + 1)
    j = np.arange(N + 1)
    fs = np.array([np.sum(((n + 1 - j[: n + 1]) * (j[: n + 1] + 1) + np.longdouble(alpha)) * p[: n + 1])
                   for n in range(N + 1)], dtype=LD)
    if np.any(fs == 0):
        raise DegenerateError(f"some f_k vanishes at x={x}")
    k = np.arange(N)
    c = p[:N] / (fs[:N] * fs[1:])
    tail = np.cumsum(c[::-1])[::-1]  # tail[j] = sum_{k>=j} c_k
    fy = fs[:N] * yl ** k
    fz = fs[:N] * zl ** k
    idx = np.maximum.outer(k, k)
    return complex(fy @ tail[idx] @ fz) * sc.rgamma(alpha + 2)


def W_oracle(N: int, alpha: float, x: complex, y: complex, z: complex) -> complex:
    """``W_N(x, y, z)`` from the simplification step."""
    x, y, z = complex(x), complex(y), complex(z)
    e = lambda arg: frak_e_stabilized(N, alpha, arg, x)  # noqa: E731
    val = e(x * y) * e(x * z) - e(x * y * z) * e(x) * (1 - x * (1 - y) * (1 - z))
    return val.value()


def W_shift_rhs(N: int, alpha: float, x: complex, y: complex, z: complex) -> complex:
    """Right-hand side of the shift identity expressing ``W_N`` through ``W_{N+1}``."""
    x, y, z = complex(x), complex(y), complex(z)
    e1 = lambda arg: frak_e(N + 1, alpha, arg, x)  # noqa: E731
    g = math.gamma(N + alpha + 2)
    q = 1 - x * (1 - y) * (1 - z)
    return (W_oracle(N + 1, alpha, x, y, z)
            - (x * z) ** (N + 1) * e1(x * y) / g
            - (x * y) ** (N + 1) * e1(x * z) / g
            + x * (1 - y) * (1 - z) * (x * x * y * z) ** (N + 1) / g ** 2
            + q * (x ** (N + 1) * e1(x * y * z) / g + (x * y * z) ** (N + 1) * e1(x) / g))


# ---------------------------------------------------------------------------
# simplified kernel


class ConditionedKernel:
    """Reduced kernel ``K^(N)(zbar, w | lam, lam_bar)`` with per-condition caching."""

    def __init__(self, N: int, alpha: float, cond: ConditionPoint, tol=TOL):
        self.N = int(N)
        self.alpha = float(alpha)
        self.cond = cond
        self.tol = tol
        lam, lam_bar = complex(cond.lam), complex(cond.lam_bar)
        x = lam * lam_bar
        if x == 0:
            raise DomainError("conditioning point at the origin (x = 0)")
        self.x = x
        # x = alpha is a removable point of the kernel but a pole of the
        # individual terms: average over a small circle in the lam_bar slot
        self._ring: list[ConditionedKernel] = []
        rx = min(tol.coincidence_radius, self.alpha / 2)
        if self.alpha != 0 and abs(x - self.alpha) < rx / 2:
            self._ring_nodes = contour_nodes(rx / abs(lam), 2 * abs(lam) + 1.0, tol.coincidence_points)
            self._ring = [ConditionedKernel(N, alpha, ConditionPoint(lam, lam_bar + a), tol)
                          for a in self._ring_nodes]
        self.fN = self.pole = self.exx = None
        self.ratio = 0.0
        if x == self.alpha:
            return
        self.fN = f_alpha_stabilized(self.N, self.alpha, x)
        if self.fN.is_zero:
            raise DegenerateError(f"f_N vanishes at x={x}")
        self.pole = pole_term_stabilized(self.alpha, x)
        self.exx = self._frak_pair(x)  # (e_N(x|x), e_{N+1}(x|x))
        self.ratio = (x - self.alpha) / x

    def _frak_pair(self, arg: complex) -> tuple[SV, SV]:
        mant, logs = scaled_terms(self.N + 1, self.alpha + 1.0, arg)
        eN = sum_scaled(mant[:-1], logs[:-1]) + self.pole
        eN1 = sum_scaled(mant, logs) + self.pole
        return eN, eN1

    def terms_stabilized(self, zbar: complex, w: complex) -> tuple[SV, SV, SV]:
        if self.fN is None:
            raise PoleError(f"x = lam*lam_bar coincides with alpha = {self.alpha}")
        zbar, w = complex(zbar), complex(w)
        lam, lam_bar, x, N, a = self.cond.lam, self.cond.lam_bar, self.x, self.N, self.alpha
        d1, d2 = zbar - lam_bar, w - lam
        if d1 == 0 or d2 == 0:
            raise CoincidenceError("zbar = lam_bar or w = lam; use the limit path")
        e_lz = self._frak_pair(lam * zbar)
        e_wl = self._frak_pair(w * lam_bar)
        e_wz = self._frak_pair(w * zbar)
        q = 1 - d1 * d2
        brackets = [e_lz[i] * e_wl[i] - e_wz[i] * self.exx[i] * q for i in (0, 1)]
        first = (brackets[1] * (N + a + 1) - brackets[0] * x) * self.ratio / (self.fN * (d1 * d1 * d2 * d2))
        log_pow = (N + 1) * cmath.log(zbar * w) - sc.gammaln(N + a + 1) if zbar * w != 0 else None
        if log_pow is None:
            second = SV(0j)
        else:
            second = -(SV.from_log(log_pow) * self.exx[1] * self.ratio / (self.fN * (d1 * d2)))
        third = -(self.pole / (d1 * d2))
        return first, second, third

    def _direct(self, zbar: complex, w: complex) -> SV:
        a, b, c = self.terms_stabilized(zbar, w)
        return a + b + c

    def reduced_stabilized(self, zbar: complex, w: complex) -> SV:
        """Reduced kernel, switching to a contour mean near the removable set."""
        zbar, w = complex(zbar), complex(w)
        if self._ring:
            return contour_mean([ck.reduced_stabilized(zbar, w) for ck in self._ring], self._ring_nodes)
        switch = self.tol.coincidence_switch
        near1 = abs(zbar - self.cond.lam_bar) < switch
        near2 = abs(w - self.cond.lam) < switch
        if not (near1 or near2):
            return self._direct(zbar, w)
        # shift the offending slot(s) along one circle: a -> F(zbar + a, w + a)
        # is entire, and every node stays at least radius - switch away
        growth = abs(self.cond.lam) + abs(zbar) + abs(w)
        nodes = contour_nodes(self.tol.coincidence_radius, growth, self.tol.coincidence_points)
        return contour_mean([self._direct(zbar + a * near1, w + a * near2) for a in nodes], nodes)

    def reduced(self, zbar: complex, w: complex) -> complex:
        return self.reduced_stabilized(zbar, w).value()

    def weight_stabilized(self, z: complex, zbar: complex) -> SV:
        """``omega(zbar, z | lam_bar, lam)``."""
        return weight_omega_stabilized(zbar, z, self.cond.lam_bar, self.cond.lam, self.alpha)

    def K11_stabilized(self, z, zbar, w) -> SV:
        return self.reduced_stabilized(zbar, w) * self.weight_stabilized(z, zbar)


def kernel_I(n: int, alpha: float, zbar: complex, w: complex, cond: ConditionPoint) -> complex:
    """``I_n(zbar, w | lam_bar, lam)`` including its Gaussian prefactors."""
    zbar, w = complex(zbar), complex(w)
    lam, lam_bar = complex(cond.lam), complex(cond.lam_bar)
    x = lam * lam_bar
    e = lambda arg: frak_e_stabilized(n, alpha, arg, x)  # noqa: E731
    q = 1 - (zbar - lam_bar) * (w - lam)
    bracket = e(lam * zbar) * e(w * lam_bar) - e(w * zbar) * e(x) * q
    pref = weight_varpi_stabilized(zbar, lam, alpha) * weight_varpi_stabilized(lam_bar, w, alpha)
    return (bracket * pref).value()


def simplified_kernel_terms(N: int, alpha: float, zbar: complex, w: complex,
                            cond: ConditionPoint) -> tuple[complex, complex, complex]:
    """The three pieces whose sum is the reduced kernel of size ``N``."""
    ck = ConditionedKernel(N, alpha, cond)
    return tuple(t.value() for t in ck.terms_stabilized(zbar, w))


def reduced_kernel(N: int, alpha: float, zbar: complex, w: complex, cond: ConditionPoint) -> complex:
    return ConditionedKernel(N, alpha, cond).reduced(zbar, w)


def K11_finite(N: int, alpha: float, z: complex, zbar: complex, w: complex, wbar: complex,
               cond: ConditionPoint) -> complex:
    """``K_11^(N)(z, zbar, w, wbar | lam, lam_bar)``; ``wbar`` does not enter."""
    del wbar
    return ConditionedKernel(N, alpha, cond).K11_stabilized(z, zbar, w).value()


# ---------------------------------------------------------------------------
# weighted correlation functions


def _balanced_matrix(rows: list[list[SV]], weights: list[SV]) -> KernelMatrix:
    """Turn ``core[i][j] * weight[i]`` into a balanced :class:`KernelMatrix`."""
    k = len(rows)
    if k == 0:
        return KernelMatrix(np.zeros((0, 0), dtype=complex), 1.0 + 0j)
    half = [SV.from_log(0.5 * wt.log()) for wt in weights]
    ent = np.empty((k, k), dtype=complex)
    for i in range(k):
        for j in range(k):
            ent[i, j] = (rows[i][j] * half[i] * half[j]).value()
    logc = np.array([h.log() for h in half])
    return KernelMatrix(ent, complex(np.linalg.det(ent)), logc)


def _d11_general(N: int, alpha: float, zs, zbars, tol=TOL) -> SV:
    """D_11 with ``(z_j, zbar_j)`` treated as independent variables (unit scale)."""
    z1, zb1 = complex(zs[0]), complex(zbars[0])
    x = z1 * zb1
    pref = f_alpha_stabilized(N - 1, alpha, x) * SV.from_log(_log_power(x, alpha) - x)
    if len(zs) == 1:
        return pref
    ck = ConditionedKernel(N - 1, alpha, ConditionPoint(z1, zb1), tol)
    rest = list(zip(zs[1:], zbars[1:]))
    rows = [[ck.reduced_stabilized(zbi, zj) for (zj, _) in rest] for (_, zbi) in rest]
    weights = [ck.weight_stabilized(zi, zbi) for (zi, zbi) in rest]
    km = _balanced_matrix(rows, weights)
    return pref * km.det_value


def _check_k(k: int, N: int, points, lo: int):
    if k < lo:
        raise DomainError(f"k must be >= {lo}, got {k}")
    if k > N - 1:
        raise DomainError(f"k must be <= N-1 = {N - 1}, got {k}")
    if len(points) != k:
        raise DomainError(f"expected {k} points, got {len(points)}")


def _check_distinct(points, delta):
    pts = [complex(p) for p in points]
    for i in range(len(pts)):
        for j in range(i):
            if abs(pts[i] - pts[j]) < delta:
                raise CoincidenceError(f"points {j} and {i} coincide within {delta}")


def kernel_matrix(params: ModelParams, points, tol=TOL) -> KernelMatrix:
    """Matrix of ``K_11^(N-1)(z_i, ., z_j, . | z_1)`` over ``points[1:]`` (unit scale)."""
    s = math.sqrt(params.sigma_sq)
    pts = [complex(p) / s for p in points]
    ck = ConditionedKernel(params.N - 1, params.alpha, ConditionPoint.physical(pts[0]), tol)
    rest = pts[1:]
    rows = [[ck.reduced_stabilized(zi.conjugate(), zj) for zj in rest] for zi in rest]
    weights = [ck.weight_stabilized(zi, zi.conjugate()) for zi in rest]
    return _balanced_matrix(rows, weights)


def D11(k: int, params: ModelParams, points, tol=TOL) -> complex:
    """Overlap-weighted ``k``-point function ``D_11^(N,k)`` at physical points."""
    _check_k(k, params.N, points, 1)
    _check_distinct(points, tol.coincidence_delta)
    s2 = params.sigma_sq
    s = math.sqrt(s2)
    pts = [complex(p) / s for p in points]
    if params.alpha != 0 and pts[0] == 0:
        raise DomainError("z_1 = 0 is excluded when alpha != 0")
    val = _d11_general(params.N, params.alpha, pts, [p.conjugate() for p in pts], tol)
    return (val / (s2 ** k)).value()


def D11_swapped(k: int, params: ModelParams, points, tol=TOL) -> complex:
    """``D_11`` with the conjugate slots of the first two points exchanged."""
    s2 = params.sigma_sq
    s = math.sqrt(s2)
    pts = [complex(p) / s for p in points]
    bars = [p.conjugate() for p in pts]
    bars[0], bars[1] = bars[1], bars[0]
    return (_d11_general(params.N, params.alpha, pts, bars, tol) / (s2 ** k)).value()


def D12_decoupled(k: int, params: ModelParams, points, tol=TOL) -> complex:
    """``D_12`` through the exchange-of-conjugates identity (oracle path)."""
    _check_k(k, params.N, points, 2)
    z1, z2 = complex(points[0]), complex(points[1])
    r2 = abs(z1 - z2) ** 2 / params.sigma_sq
    if r2 == 1:
        raise PoleError("|z1 - z2| = 1 is a pole of the exchange identity")
    return -math.exp(-r2) / (1 - r2) * D11_swapped(k, params, points, tol)


def D12(k: int, params: ModelParams, points, tol=TOL) -> complex:
    """Off-diagonal overlap-weighted ``k``-point function ``D_12^(N,k)``."""
    _check_k(k, params.N, points, 2)
    _check_distinct(points, tol.coincidence_delta)
    s2 = params.sigma_sq
    s = math.sqrt(s2)
    pts = [complex(p) / s for p in points]
    N, a = params.N, params.alpha
    z1, z2 = pts[0], pts[1]
    zb1, zb2 = z1.conjugate(), z2.conjugate()
    x = z1 * zb2
    ck = ConditionedKernel(N - 1, a, ConditionPoint(z1, zb2), tol)
    k00 = ck.reduced_stabilized(zb1, z2)
    pref = (f_alpha_stabilized(N - 1, a, x) * weight_varpi_stabilized(z1, zb2, a)
            * weight_varpi_stabilized(zb1, z2, a) * k00)
    val = -pref
    if k >= 3:
        rest = pts[2:]
        top = [ck.reduced_stabilized(zb1, zj) for zj in rest]
        left = [ck.reduced_stabilized(zi.conjugate(), z2) for zi in rest]
        rows = [[(k00 * ck.reduced_stabilized(zi.conjugate(), zj) - top[j] * left[i]) / k00
                 for j, zj in enumerate(rest)] for i, zi in enumerate(rest)]
        weights = [weight_omega_stabilized(zi, zi.conjugate(), z1, zb2, a) for zi in rest]
        val = val * _balanced_matrix(rows, weights).det_value
    return (val / (s2 ** k)).value()


def conditional_mean_O11(N: int, alpha: float, lam: complex) -> float:
    """``E[O_11 | z_1 = lam]`` at unit scale: ``f_{N-1}(x) / e_{N-1}(x)`` with ``x = |lam|^2``."""
    x = abs(complex(lam)) ** 2
    return (f_alpha_stabilized(N - 1, alpha, x) / trunc_exp_stabilized(N - 1, alpha, x)).value().real
