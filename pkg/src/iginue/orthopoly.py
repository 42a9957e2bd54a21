"""Bi-orthogonal polynomials built from the tridiagonal moment matrix.

This path never touches the closed-form ``f`` functions: the LDU factors come
from plain elimination on the moment matrix, the polynomial coefficients from
triangular inversion.  It therefore serves as an independent oracle for the
finite-N kernel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import gammaln

from .finite_kernel import ConditionPoint, f_alpha


class SingularMinorError(ZeroDivisionError):
    def __init__(self, index: int):
        super().__init__(f"leading minor {index} of the moment matrix vanishes")
        self.index = index


@dataclass
class MomentMatrix:
    size: int
    alpha: float
    entries: np.ndarray  # M[i, j] = Gamma(i+alpha+1) * reduced[i, j]
    reduced: np.ndarray


@dataclass
class LDUFactors:
    d: np.ndarray
    ell: np.ndarray  # ell[p] sits at (p, p-1) of L; ell[0] unused
    u: np.ndarray  # u[q] sits at (q-1, q) of U; u[0] unused

    def matrices(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        n = self.d.size
        L = np.eye(n, dtype=complex) + np.diag(self.ell[1:], -1)
        U = np.eye(n, dtype=complex) + np.diag(self.u[1:], 1)
        return L, np.diag(self.d), U


@dataclass
class PolyPair:
    """Coefficient tables, row ``k`` = polynomial of degree ``k``.

    ``P_coeffs[k, j]`` multiplies ``zbar**j`` in the conjugate-side polynomial,
    ``Q_coeffs[k, j]`` multiplies ``w**j``.  For a physical condition point the
    conjugate of ``P_coeffs`` equals ``Q_coeffs``.
    """

    P_coeffs: np.ndarray
    Q_coeffs: np.ndarray
    norms: np.ndarray


def moment_matrix(size: int, alpha: float, cond: ConditionPoint) -> MomentMatrix:
    if size < 1:
        raise ValueError("size must be >= 1")
    lam, lam_bar = complex(cond.lam), complex(cond.lam_bar)
    x = lam * lam_bar
    i = np.arange(size)
    red = np.diag(alpha + i + 2 + x).astype(complex)
    red[i[:-1], i[:-1] + 1] = -lam_bar * (i[:-1] + alpha + 1)
    red[i[:-1] + 1, i[:-1]] = -lam
    ent = np.exp(gammaln(i + alpha + 1))[:, None] * red
    return MomentMatrix(size, alpha, ent, red)


def ldu_decompose(mm: MomentMatrix) -> LDUFactors:
    """Doolittle elimination of the reduced (tridiagonal) moment matrix."""
    mu = mm.reduced
    n = mm.size
    d = np.zeros(n, dtype=complex)
    ell = np.zeros(n, dtype=complex)
    u = np.zeros(n, dtype=complex)
    d[0] = mu[0, 0]
    for p in range(n - 1):
        if d[p] == 0:
            raise SingularMinorError(p)
        u[p + 1] = mu[p, p + 1] / d[p]
        ell[p + 1] = mu[p + 1, p] / d[p]
        d[p + 1] = mu[p + 1, p + 1] - ell[p + 1] * d[p] * u[p + 1]
    if d[-1] == 0:
        raise SingularMinorError(n - 1)
    return LDUFactors(d, ell, u)


def d_from_f(size: int, alpha: float, x: complex) -> np.ndarray:
    """``d_p = (p + alpha + 1) f_{p+1}(x) / f_p(x)``."""
    f = np.array([f_alpha(p, alpha, x) for p in range(size + 1)])
    return (np.arange(size) + alpha + 1) * f[1:] / f[:-1]


def build_polys(size: int, alpha: float, cond: ConditionPoint) -> PolyPair:
    mm = moment_matrix(size, alpha, cond)
    fac = ldu_decompose(mm)
    L, D, U = fac.matrices()
    g = np.exp(gammaln(np.arange(size) + alpha + 1))
    # M = (G L G^-1) (G D) U
    Ls = (g[:, None] * L) / g[None, :]
    eye = np.eye(size, dtype=complex)
    Linv = solve_triangular(Ls, eye, lower=True, unit_diagonal=True)
    Uinv = solve_triangular(U, eye, lower=False, unit_diagonal=True)
    return PolyPair(P_coeffs=Uinv.T.copy(), Q_coeffs=Linv, norms=g * fac.d)


def closed_form_polys(size: int, alpha: float, cond: ConditionPoint) -> PolyPair:
    """Same tables from the explicit ``f``-ratio formulas."""
    lam, lam_bar = complex(cond.lam), complex(cond.lam_bar)
    x = lam * lam_bar
    f = np.array([f_alpha(k, alpha, x) for k in range(size + 1)])
    k = np.arange(size)
    expo = k[:, None] - k[None, :]
    mask = expo >= 0
    ratio = np.where(mask, f[None, :size] / f[:size, None], 0)
    e = np.where(mask, expo, 0)
    P = np.where(mask, lam_bar ** e, 0) * ratio
    Q = np.where(mask, lam ** e, 0) * ratio
    norms = np.exp(gammaln(k + alpha + 2)) * f[1:] / f[:-1]
    return PolyPair(P, Q, norms)


def kernel_from_polys(N: int, pp: PolyPair, zbar: complex, w: complex) -> complex:
    """``sum_{k<N} Pbar_k(zbar) Q_k(w) / D_k``."""
    if N > pp.norms.size:
        raise ValueError("N exceeds the size of the polynomial tables")
    j = np.arange(N)
    pz = pp.P_coeffs[:N, :N] @ (complex(zbar) ** j)
    qw = pp.Q_coeffs[:N, :N] @ (complex(w) ** j)
    return complex(np.sum(pz * qw / pp.norms[:N]))


def three_term_coefficients(k: int, alpha: float, cond: ConditionPoint) -> tuple[complex, complex]:
    """``(b_k, c_k)`` with ``z P_k = P_{k+1} + b_k P_k + c_k z P_{k-1}``."""
    lam = complex(cond.lam)
    x = lam * complex(cond.lam_bar)
    fk1, fk, fkm = (f_alpha(k + 1, alpha, x), f_alpha(k, alpha, x), f_alpha(k - 1, alpha, x))
    return -lam * fk / fk1, lam * fkm / fk


def _poly(coeffs: np.ndarray, k: int, z: complex) -> complex:
    return complex(np.polyval(coeffs[k, : k + 1][::-1], z))


def three_term_residual(k: int, pp: PolyPair, alpha: float, cond: ConditionPoint, z: complex) -> float:
    if not 1 <= k < pp.norms.size - 1:
        raise ValueError("need 1 <= k < size - 1")
    b, c = three_term_coefficients(k, alpha, cond)
    z = complex(z)
    Q = pp.Q_coeffs
    lhs = z * _poly(Q, k, z)
    rhs = _poly(Q, k + 1, z) + b * _poly(Q, k, z) + c * z * _poly(Q, k - 1, z)
    return abs(lhs - rhs)


def biorthogonality_matrix(pp: PolyPair, mm: MomentMatrix) -> np.ndarray:
    """``<P_k, Q_l>`` through the moment matrix; diagonal with entries ``norms``."""
    n = pp.norms.size
    return pp.Q_coeffs[:n, :n] @ mm.entries @ pp.P_coeffs[:n, :n].T
