"""Independent reference evaluations used as oracles by the self-test battery.

Nothing here calls into ``finite_kernel`` or ``specfun``: the alpha = 0
(Ginibre) path is coded from factorials and plain partial sums, and the
special-function oracles use quadrature or extended precision.
"""

from __future__ import annotations

import cmath
import math

import mpmath as mp
from scipy.integrate import quad


# ---------------------------------------------------------------------------
# alpha = 0 path (extended precision; the double sum is badly conditioned)

_DPS = 40


def ginibre_exp_partial(n: int, x) -> mp.mpc:
    """``e_n(x) = sum_{k<=n} x^k / k!``, zero for ``n < 0``."""
    with mp.workdps(_DPS):
        x = mp.mpc(x)
        return mp.fsum(x**k / mp.factorial(k) for k in range(n + 1)) if n >= 0 else mp.mpc(0)


def _f(p: int, x) -> mp.mpc:
    return (p + 1) * ginibre_exp_partial(p, x) - x * ginibre_exp_partial(p - 1, x)


def ginibre_f(p: int, x: complex) -> complex:
    """``f_p = ((p+1)! e_p(x) - p! x e_{p-1}(x)) / p!``."""
    with mp.workdps(_DPS):
        return complex(_f(p, mp.mpc(x)))


def ginibre_phi(n: int, x: complex) -> complex:
    with mp.workdps(_DPS):
        x = mp.mpc(x)
        return complex(mp.fsum(x**k / (mp.factorial(k + 1) * _f(k, x) * _f(k + 1, x))
                               for k in range(n + 1)))


def _G(N: int, x, y, z) -> mp.mpc:
    f = [_f(k, x) for k in range(N + 1)]
    c = [x**k / (mp.factorial(k + 1) * f[k] * f[k + 1]) for k in range(N)]
    tail = [mp.fsum(c[j:]) for j in range(N)]
    return mp.fsum(f[n] * f[m] * y**n * z**m * tail[max(n, m)] for n in range(N) for m in range(N))


def ginibre_G(N: int, x: complex, y: complex, z: complex) -> complex:
    """Double sum ``sum_{n,m<N} f_n f_m y^n z^m sum_{k>=max(n,m)} x^k/((k+1)! f_k f_{k+1})``."""
    with mp.workdps(_DPS):
        return complex(_G(N, mp.mpc(x), mp.mpc(y), mp.mpc(z)))


def ginibre_D11(N: int, points) -> complex:
    """Overlap-weighted ``k``-point function at alpha = 0, unit variance."""
    with mp.workdps(_DPS):
        z1 = mp.mpc(complex(points[0]))
        lam, lam_bar = z1, mp.conj(z1)
        x = lam * lam_bar
        pref = _f(N - 1, x) * mp.exp(-x)
        rest = [mp.mpc(complex(p)) for p in points[1:]]
        if not rest:
            return complex(pref)
        K = mp.matrix(len(rest), len(rest))
        for i, zi in enumerate(rest):
            zbi = mp.conj(zi)
            w_i = (1 + (zbi - lam_bar) * (zi - lam)) * mp.exp(-zbi * zi)
            for j, zj in enumerate(rest):
                K[i, j] = _G(N - 1, x, zbi / lam_bar, zj / lam) * w_i
        return complex(pref * mp.det(K))


# ---------------------------------------------------------------------------
# special-function oracles


def F_quadrature(x: float) -> float:
    val, _ = quad(lambda s: math.exp(-s * s / 2), x, math.inf, epsabs=0, epsrel=1e-13)
    return val / math.sqrt(2 * math.pi)


def band_L_quadrature(z: complex, rho: float) -> complex:
    def part(fn):
        return quad(lambda xi: fn(cmath.exp(-((z - xi) ** 2) / 2)), -rho / 2, rho / 2,
                    epsabs=0, epsrel=1e-13, limit=200)[0]

    return complex(part(lambda v: v.real), part(lambda v: v.imag)) / math.sqrt(2 * math.pi)


def gamma_q_mp(a: float, x: float, dps: int = 40) -> float:
    with mp.workdps(dps):
        return float(mp.gammainc(a, x, mp.inf, regularized=True))


def trunc_exp_mp(n: int, alpha: float, z: complex, dps: int = 80) -> mp.mpc:
    with mp.workdps(dps):
        zz = mp.mpc(z)
        return mp.fsum(zz**k * mp.rgamma(k + alpha + 1) for k in range(n + 1))


def asym_q_approx(s: float, z: float) -> float:
    """Leading uniform expansion of ``Q(s+1, s + sqrt(s) z)`` with its ``s^{-1/2}`` correction."""
    return (0.5 * math.erfc(z / math.sqrt(2))
            + math.exp(-z * z / 2) * (2 + z * z) / (3 * math.sqrt(2 * math.pi * s)))
