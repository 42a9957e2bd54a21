"""Special functions used by the kernel formulas.

Everything here is a pure function of its arguments.  Sums whose terms can
exceed the double-precision range are carried in log-scale and returned as a
:class:`StabilizedValue`.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy import special as sc

_LN2 = math.log(2.0)


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of a function."""


class PoleError(ZeroDivisionError):
    """Raised when a function is evaluated exactly at one of its poles."""


@dataclass(frozen=True)
class StabilizedValue:
    """A complex number stored as ``mantissa * exp(log_scale)``.

    The mantissa is kept in ``[0.5, 1)`` in modulus (zero is allowed), so
    products and quotients of values far beyond the double range stay exact
    up to rounding.
    """

    mantissa: complex
    log_scale: float = 0.0

    @classmethod
    def make(cls, mantissa: complex, log_scale: float = 0.0) -> "StabilizedValue":
        m = complex(mantissa)
        if m == 0 or not math.isfinite(abs(m)):
            if m == 0:
                return cls(0j, 0.0)
            raise FloatingPointError("non-finite mantissa")
        _, e = math.frexp(abs(m))
        return cls(m * 2.0 ** (-e), float(log_scale) + e * _LN2)

    @classmethod
    def from_complex(cls, value: complex) -> "StabilizedValue":
        return cls.make(value, 0.0)

    @classmethod
    def from_log(cls, log_value: complex) -> "StabilizedValue":
        """Build ``exp(log_value)`` for a complex logarithm."""
        log_value = complex(log_value)
        if log_value.real == -math.inf:
            return cls(0j, 0.0)
        return cls.make(cmath.exp(1j * log_value.imag), log_value.real)

    @property
    def is_zero(self) -> bool:
        return self.mantissa == 0

    def value(self) -> complex:
        """Collapse to an ordinary complex number (may overflow to inf or underflow to 0)."""
        if self.is_zero:
            return 0j
        if self.log_scale > 709.0:
            return self.mantissa * math.inf
        return self.mantissa * math.exp(self.log_scale)

    def log(self) -> complex:
        if self.is_zero:
            return complex(-math.inf, 0.0)
        return cmath.log(self.mantissa) + self.log_scale

    def __mul__(self, other) -> "StabilizedValue":
        if not isinstance(other, StabilizedValue):
            other = StabilizedValue.from_complex(other)
        if self.is_zero or other.is_zero:
            return StabilizedValue(0j, 0.0)
        return StabilizedValue.make(self.mantissa * other.mantissa,
                                    self.log_scale + other.log_scale)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "StabilizedValue":
        if not isinstance(other, StabilizedValue):
            other = StabilizedValue.from_complex(other)
        if other.is_zero:
            raise ZeroDivisionError("division by a zero StabilizedValue")
        if self.is_zero:
            return StabilizedValue(0j, 0.0)
        return StabilizedValue.make(self.mantissa / other.mantissa,
                                    self.log_scale - other.log_scale)

    def __rtruediv__(self, other) -> "StabilizedValue":
        return StabilizedValue.from_complex(other) / self

    def __neg__(self) -> "StabilizedValue":
        return StabilizedValue(-self.mantissa, self.log_scale)

    def __add__(self, other) -> "StabilizedValue":
        if not isinstance(other, StabilizedValue):
            other = StabilizedValue.from_complex(other)
        if self.is_zero:
            return other
        if other.is_zero:
            return self
        top = max(self.log_scale, other.log_scale)
        m = (self.mantissa * math.exp(self.log_scale - top)
             + other.mantissa * math.exp(other.log_scale - top))
        return StabilizedValue.make(m, top)

    __radd__ = __add__

    def __sub__(self, other) -> "StabilizedValue":
        if not isinstance(other, StabilizedValue):
            other = StabilizedValue.from_complex(other)
        return self + (-other)

    def __rsub__(self, other) -> "StabilizedValue":
        return StabilizedValue.from_complex(other) - self

    def scaled(self, log_factor: float) -> "StabilizedValue":
        """Multiply by ``exp(log_factor)`` for a real ``log_factor``."""
        if self.is_zero:
            return self
        return StabilizedValue(self.mantissa, self.log_scale + log_factor)


def stabilized_sum(values) -> StabilizedValue:
    total = StabilizedValue(0j, 0.0)
    for v in values:
        total = total + v
    return total


def contour_nodes(radius: float, growth: float, minimum: int) -> np.ndarray:
    """Offsets on a circle for the mean-value treatment of removable points.

    ``growth`` bounds the exponential type of the function along the circle
    direction; the node count is raised until the aliasing term
    ``(growth * radius)**m / m!`` is below ``2**-m``.
    """
    m = max(int(minimum), math.ceil(2 * math.e * growth * radius))
    m += -m % 8
    return radius * np.exp(2j * np.pi * (np.arange(m) + 0.5) / m)


def contour_mean(values, nodes: np.ndarray) -> StabilizedValue:
    """Circle mean of analytic samples ``values[k] = F(centre + nodes[k])``.

    The samples are first multiplied by ``exp(-c a)`` with ``c`` fitted to the
    first Fourier mode of ``log|F|``.  That factor equals one at the centre,
    so the mean is unchanged, but it removes the exponential tilt across the
    circle that would otherwise cancel catastrophically.
    """
    vals = [v if isinstance(v, StabilizedValue) else StabilizedValue.from_complex(v)
            for v in values]
    logs = np.array([v.log().real for v in vals])
    finite = np.isfinite(logs)
    if not finite.any():
        return StabilizedValue(0j, 0.0)
    logs[~finite] = logs[finite].min()
    r = float(np.abs(nodes[0]))
    c = 2.0 * np.sum((logs - logs.mean()) * np.conj(nodes)) / (len(nodes) * r * r)
    tilted = (v * StabilizedValue.from_log(-c * a) for v, a in zip(vals, nodes))
    return stabilized_sum(tilted) / len(nodes)


def log_rgamma(a: float) -> complex | None:
    """Complex log of ``1/Gamma(a)`` or ``None`` when ``1/Gamma(a) = 0``."""
    if a <= 0 and float(a).is_integer():
        return None
    val = -sc.gammaln(a)
    if sc.gammasgn(a) < 0:
        return complex(val, math.pi)
    return complex(val, 0.0)


def reciprocal_gamma(a: float) -> float:
    """``1/Gamma(a)``; exactly zero at the non-positive integers."""
    a = float(a)
    if a <= 0 and a.is_integer():
        return 0.0
    return float(sc.rgamma(a))


def regularized_gamma_q(a: float, x: float) -> float:
    """Upper regularized incomplete gamma ``Gamma(a, x) / Gamma(a)``."""
    if not a > 0:
        raise DomainError(f"regularized_gamma_q needs a > 0, got a={a}")
    if not x >= 0:
        raise DomainError(f"regularized_gamma_q needs x >= 0, got x={x}")
    return float(sc.gammaincc(a, x))


def error_F(x):
    """Gaussian tail ``(1/sqrt(2 pi)) int_x^inf exp(-s^2/2) ds`` continued to complex ``x``."""
    return 0.5 * sc.erfc(np.asarray(x, dtype=complex) / math.sqrt(2.0))[()]


def band_error_L(z, rho: float):
    """Gaussian mass of the band ``[-rho/2, rho/2]`` seen from ``z``."""
    if not rho > 0:
        raise DomainError(f"band width rho must be positive, got {rho}")
    z = np.asarray(z, dtype=complex)
    return error_F(z - rho / 2) - error_F(z + rho / 2)


def mittag_leffler(b: float, z: complex, *, rtol: float = 1e-16, patience: int = 30) -> complex:
    """``E_{1,b}(z) = sum_k z^k / Gamma(k + b)``.

    The series is stopped once ``|term| / |partial sum|`` stays below ``rtol``
    for ``patience`` consecutive terms.  When the terms cancel heavily (large
    ``|z|`` away from the positive axis) the sum is redone in extended
    precision so the result keeps full relative accuracy.
    """
    if not b > 0:
        raise DomainError(f"mittag_leffler needs b > 0, got {b}")
    z = complex(z)
    if z == 0:
        return complex(reciprocal_gamma(b))
    term = complex(reciprocal_gamma(b)) if b < 170 else cmath.exp(log_rgamma(b))
    total = term
    mass = abs(term)
    quiet = 0
    k = 0
    while quiet < patience:
        term = term * z / (k + b)
        k += 1
        total += term
        mass += abs(term)
        if abs(term) <= rtol * abs(total):
            quiet += 1
        else:
            quiet = 0
        if k > 100000:
            raise FloatingPointError("mittag_leffler series failed to converge")
    if mass > 1e3 * abs(total):
        return _mittag_leffler_mp(b, z, mass / max(abs(total), 1e-300), rtol, patience)
    return total


def _mittag_leffler_mp(b, z, cancellation, rtol, patience):
    import mpmath

    bits = 60 + int(math.log2(cancellation)) + 20
    with mpmath.workprec(bits):
        zz = mpmath.mpc(z.real, z.imag)
        term = mpmath.rgamma(b)
        total = term
        quiet = 0
        k = 0
        while quiet < patience:
            term = term * zz / (k + b)
            k += 1
            total += term
            quiet = quiet + 1 if abs(term) <= rtol * abs(total) else 0
        return complex(total)


_CHUNK = 32
_LD = np.clongdouble


def scaled_terms(n: int, shift: float, z: complex) -> tuple[np.ndarray, np.ndarray]:
    """Terms ``z^k / Gamma(k + shift)``, ``k = 0..n``, as ``mantissa * exp(log_scale)``.

    The ratio recurrence ``t_k = t_{k-1} z / (k - 1 + shift)`` runs in blocks;
    each block restarts from a renormalized value so nothing overflows.
    Mantissas are extended precision: for ``Re z < 0`` the partial sums cancel
    by up to ``e^{2|z|}`` and double rounding would be visible.
    Needs ``shift > 0``.
    """
    ratios = _LD(complex(z)) / (np.longdouble(shift) + np.arange(n, dtype=np.longdouble))
    mant = np.empty(n + 1, dtype=_LD)
    logs = np.empty(n + 1, dtype=float)
    mant[0], logs[0] = 1.0, -sc.gammaln(shift)
    cur, cur_log = _LD(1.0), logs[0]
    for start in range(0, n, _CHUNK):
        stop = min(start + _CHUNK, n)
        block = cur * np.cumprod(ratios[start:stop])
        mant[start + 1:stop + 1] = block
        logs[start + 1:stop + 1] = cur_log
        last = block[-1]
        if last == 0:
            # the ratios only shrink from here on, so the tail is negligible
            mant[stop + 1:] = 0.0
            logs[stop + 1:] = cur_log
            break
        r = abs(last)
        cur, cur_log = last / r, cur_log + math.log(float(r))
    return mant, logs


def sum_scaled(mant: np.ndarray, logs: np.ndarray) -> StabilizedValue:
    """Sum of ``mant * exp(logs)`` as a :class:`StabilizedValue` (accumulated in extended precision)."""
    nz = mant != 0
    if not nz.any():
        return StabilizedValue(0j, 0.0)
    eff = logs[nz] + np.log(np.abs(mant[nz]).astype(float))
    top = float(eff.max())
    total = np.sum(mant[nz] * np.exp((logs[nz] - top).astype(np.longdouble)))
    return StabilizedValue.make(complex(total), top)


def trunc_exp(n: int, alpha: float, z: complex) -> complex:
    """Truncated generalized exponential ``sum_{k<=n} z^k / Gamma(k+alpha+1)``; zero for ``n = -1``."""
    if n < 0:
        if n == -1:
            return 0j
        raise DomainError(f"n must be >= -1, got {n}")
    z = complex(z)
    if z == 0:
        return complex(reciprocal_gamma(alpha + 1))
    return trunc_exp_stabilized(n, alpha, z).value()


def trunc_exp_stabilized(n: int, alpha: float, z: complex) -> StabilizedValue:
    """Log-scaled evaluation of :func:`trunc_exp` that never overflows."""
    if n < 0:
        if n == -1:
            return StabilizedValue(0j, 0.0)
        raise DomainError(f"n must be >= -1, got {n}")
    z = complex(z)
    if z == 0 or n == 0:
        return StabilizedValue.from_log(-sc.gammaln(alpha + 1.0))
    return sum_scaled(*scaled_terms(n, alpha + 1.0, z))


def pole_term_stabilized(alpha: float, x: complex) -> StabilizedValue:
    """``1 / (Gamma(alpha) (x - alpha))`` as a :class:`StabilizedValue`."""
    if alpha == 0:
        return StabilizedValue(0j, 0.0)
    d = complex(x) - alpha
    if d == 0:
        raise PoleError(f"frak_e evaluated at its pole x = alpha = {alpha}")
    # 1/Gamma(alpha) = alpha/Gamma(alpha+1); shares the base used by the sums
    return StabilizedValue.from_log(-sc.gammaln(alpha + 1.0) + cmath.log(alpha)) / d


def frak_e_stabilized(n: int, alpha: float, z: complex, x: complex) -> StabilizedValue:
    return trunc_exp_stabilized(n, alpha, z) + pole_term_stabilized(alpha, x)


def frak_e(n: int, alpha: float, z: complex, x: complex) -> complex:
    """Shifted truncated exponential ``e_n(z) + 1/(Gamma(alpha)(x - alpha))``."""
    return frak_e_stabilized(n, alpha, z, x).value()
