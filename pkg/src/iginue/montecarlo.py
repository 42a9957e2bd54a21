"""Monte Carlo sampling of induced Ginibre matrices and their eigenvector overlaps.

A matrix is drawn as ``A = sqrt(G^dagger G) U`` with ``G`` an ``(N+alpha) x N``
complex Gaussian matrix and ``U`` Haar unitary.  Every replica owns its own
Philox stream derived from ``(seed, replica)``, so results do not depend on the
number of workers or on scheduling order.
"""

from __future__ import annotations

import json
import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np
import scipy.linalg as sla
from scipy import stats
from scipy.special import gammainc

from .finite_kernel import CoincidenceError
from .tolerances import DEFAULT as TOL, Tolerances

log = logging.getLogger(__name__)

WORKERS_ENV = "IGINUE_WORKERS"
MAX_RETRIES = 8
CSV_HEADER = "replica,eig_index,re_z,im_z,O11_eig,O11_prod"
COINCIDENCE = 1e-12


class NearDegenerateError(ArithmeticError):
    """Two eigenvalues closer than the gap threshold."""


class EigenResidualError(ArithmeticError):
    """Eigen-decomposition residual above tolerance."""


def resolve_workers(workers: int | None = None) -> int:
    """Explicit value, else ``$IGINUE_WORKERS``, else the CPU count."""
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        workers = int(env) if env else (os.cpu_count() or 1)
    if workers < 1:
        raise ValueError("workers must be >= 1")
    return workers


@dataclass(frozen=True)
class SamplerConfig:
    N: int
    alpha_int: int = 0
    seed: int = 0
    replicas: int = 1000
    sigma_sq: float = 1.0
    workers: int | None = None

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.alpha_int < 0 or int(self.alpha_int) != self.alpha_int:
            raise ValueError("sampling needs a non-negative integer alpha")
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if self.sigma_sq <= 0:
            raise ValueError("sigma_sq must be positive")


def replica_rng(seed: int, replica: int, attempt: int = 0) -> np.random.Generator:
    key = [seed, replica] if attempt == 0 else [seed, replica, attempt]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


def _complex_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(_complex_gaussian(rng, (n, n)))
    d = np.diag(r)
    return q * (d / np.abs(d))


def _draw(N: int, alpha: int, rng: np.random.Generator) -> np.ndarray:
    g = _complex_gaussian(rng, (N + alpha, N))
    w, v = np.linalg.eigh(g.conj().T @ g)
    root = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
    return root @ haar_unitary(N, rng)


def draw_matrix(N: int, alpha: int, rng: np.random.Generator, sigma_sq: float = 1.0) -> np.ndarray:
    """One induced Ginibre matrix; a failed decomposition is redrawn once."""
    try:
        A = _draw(N, alpha, rng)
    except np.linalg.LinAlgError:
        A = _draw(N, alpha, rng)
    return math.sqrt(sigma_sq) * A


def sample_matrix(cfg: SamplerConfig, replica: int, attempt: int = 0) -> np.ndarray:
    """The matrix of a given replica (bitwise reproducible)."""
    return draw_matrix(cfg.N, cfg.alpha_int, replica_rng(cfg.seed, replica, attempt), cfg.sigma_sq)


@dataclass
class EigenSystem:
    values: np.ndarray
    right: np.ndarray  # columns, unit norm
    left: np.ndarray  # rows, left @ right = I
    residual: float  # max of eigen-residual and biorthogonality residual
    min_gap: float


def eig_full(A: np.ndarray, tol: Tolerances = TOL) -> EigenSystem:
    z, R = sla.eig(A)
    R = R / np.linalg.norm(R, axis=0)
    scale = max(np.abs(z).max(), 1.0)
    n = z.size
    if n > 1:
        dz = np.abs(z[:, None] - z[None, :]) + np.diag(np.full(n, np.inf))
        gap = float(dz.min())
    else:
        gap = math.inf
    if gap < tol.gap_threshold * scale:
        raise NearDegenerateError(f"eigenvalue gap {gap:.3g}")
    norm_a = np.linalg.norm(A, 2)
    res = float(np.linalg.norm(A @ R - R * z, axis=0).max() / norm_a)
    L = np.linalg.inv(R)
    res = max(res, float(np.abs(L @ R - np.eye(n)).max()))
    if res > tol.eig_residual:
        raise EigenResidualError(f"relative residual {res:.3g}")
    return EigenSystem(z, R, L, res, gap)


def overlaps(es: EigenSystem) -> np.ndarray:
    """``O[i, j] = <L_i|L_j> <R_j|R_i>``; Hermitian, diagonal >= 1."""
    LL = es.left @ es.left.conj().T
    RR = es.right.conj().T @ es.right
    return LL * RR.T


def _differences(z: np.ndarray) -> np.ndarray:
    dz = z[:, None] - z[None, :]
    np.fill_diagonal(dz, np.inf)
    if z.size > 1 and np.abs(dz).min() < COINCIDENCE:
        raise CoincidenceError("product formula needs pairwise distinct eigenvalues")
    return dz


def product_formula_O11(z: np.ndarray) -> np.ndarray:
    """Conditional mean of each diagonal overlap given all eigenvalues."""
    dz = _differences(np.asarray(z, dtype=complex))
    return np.prod(1.0 + 1.0 / np.abs(dz) ** 2, axis=1)


def product_formula_O12(z: np.ndarray, pairs: Iterable[tuple[int, int]] | None = None) -> np.ndarray:
    """Conditional mean of ``O[i, j]`` given all eigenvalues.

    With ``pairs=None`` returns the full matrix (zero diagonal); otherwise one
    value per ``(i, j)`` pair.
    """
    z = np.asarray(z, dtype=complex)
    n = z.size
    _differences(z)
    if pairs is None:
        ii, jj = np.nonzero(~np.eye(n, dtype=bool))
    else:
        pl = list(pairs)
        ii = np.array([p[0] for p in pl], dtype=int)
        jj = np.array([p[1] for p in pl], dtype=int)
    di = z[ii, None] - z[None, :]
    dj = z[jj, None] - z[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        fac = 1.0 + 1.0 / (di * dj.conj())
    rows = np.arange(ii.size)
    fac[rows, ii] = 1.0
    fac[rows, jj] = 1.0
    vals = -np.prod(fac, axis=1) / np.abs(z[ii] - z[jj]) ** 2
    if pairs is not None:
        return vals
    out = np.zeros((n, n), dtype=complex)
    out[ii, jj] = vals
    return out


@dataclass
class ReplicaResult:
    replica: int
    attempts: int
    z: np.ndarray
    O11_eig: np.ndarray
    O11_prod: np.ndarray
    ratio11: float  # mean over eigenvalues of O11_eig / O11_prod - 1
    ratio12: complex  # mean over pairs i < j of O_ij / O12_prod - 1
    residual: float


def run_replica(cfg: SamplerConfig, replica: int, tol: Tolerances = TOL) -> ReplicaResult:
    """One replica; near-degenerate draws are discarded and redrawn."""
    for attempt in range(MAX_RETRIES):
        A = sample_matrix(cfg, replica, attempt)
        try:
            es = eig_full(A, tol)
        except (NearDegenerateError, EigenResidualError) as exc:
            log.info("replica %d attempt %d discarded: %s", replica, attempt, exc)
            continue
        # product formulas are stated at unit variance
        z_unit = es.values / math.sqrt(cfg.sigma_sq)
        O = overlaps(es)
        o11 = O.diagonal().real.copy()
        p11 = product_formula_O11(z_unit)
        if cfg.N > 1:
            iu, ju = np.triu_indices(cfg.N, 1)
            p12 = product_formula_O12(z_unit, zip(iu, ju))
            r12 = complex(np.mean(O[iu, ju] / p12 - 1.0))
        else:
            r12 = 0j
        return ReplicaResult(replica, attempt + 1, es.values, o11, p11,
                             float(np.mean(o11 / p11 - 1.0)), r12, es.residual)
    raise NearDegenerateError(f"replica {replica}: no acceptable draw in {MAX_RETRIES} attempts")


def _run_chunk(args) -> list[ReplicaResult]:
    cfg, indices, tol = args
    return [run_replica(cfg, r, tol) for r in indices]


@dataclass
class OverlapSampleBatch:
    config: SamplerConfig
    replica: np.ndarray
    z: np.ndarray  # (replicas, N)
    O11_eig: np.ndarray
    O11_prod: np.ndarray
    ratio11: np.ndarray
    ratio12: np.ndarray
    attempts: np.ndarray
    max_residual: float

    @property
    def discarded(self) -> int:
        return int(self.attempts.sum() - self.attempts.size)

    @property
    def z_unit(self) -> np.ndarray:
        return self.z / math.sqrt(self.config.sigma_sq)


def sample_batch(cfg: SamplerConfig, tol: Tolerances = TOL) -> OverlapSampleBatch:
    """Run all replicas; the merge is ordered by replica index."""
    workers = min(resolve_workers(cfg.workers), cfg.replicas)
    idx = np.arange(cfg.replicas)
    if workers == 1:
        results = _run_chunk((cfg, idx, tol))
    else:
        chunks = [c for c in np.array_split(idx, workers * 4) if c.size]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = [r for part in ex.map(_run_chunk, [(cfg, c, tol) for c in chunks]) for r in part]
    results.sort(key=lambda r: r.replica)
    return OverlapSampleBatch(
        config=cfg,
        replica=np.array([r.replica for r in results]),
        z=np.array([r.z for r in results]),
        O11_eig=np.array([r.O11_eig for r in results]),
        O11_prod=np.array([r.O11_prod for r in results]),
        ratio11=np.array([r.ratio11 for r in results]),
        ratio12=np.array([r.ratio12 for r in results]),
        attempts=np.array([r.attempts for r in results]),
        max_residual=max(r.residual for r in results),
    )


@dataclass(frozen=True)
class Estimate:
    value: complex
    stderr: float
    samples: int

    def within(self, target: complex, sigmas: float) -> bool:
        return abs(self.value - target) <= sigmas * self.stderr

    def relative_error(self, target: complex) -> float:
        return abs(self.value - target) / abs(target)


def _estimate(per_replica: np.ndarray) -> Estimate:
    m = per_replica.size
    se = float(np.std(per_replica, ddof=1) / math.sqrt(m)) if m > 1 else math.inf
    v = complex(per_replica.mean())
    return Estimate(v.real if per_replica.dtype.kind == "f" else v, se, m)


def _as_batch(src, tol: Tolerances = TOL) -> OverlapSampleBatch:
    return sample_batch(src, tol) if isinstance(src, SamplerConfig) else src


def _warn_if_empty(hits: np.ndarray, where: str) -> None:
    if not hits.any():
        warnings.warn(f"{where}: no eigenvalue fell in the window", RuntimeWarning, stacklevel=3)


def estimate_D11(batch, lam: complex, h: float, source: str = "prod") -> Estimate:
    """Top-hat window estimate of ``D_11^(N,1)(lam)``.

    ``source`` selects the per-eigenvalue weight: the product formula (lower
    variance) or the overlap computed from the eigenvectors.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    batch = _as_batch(batch)
    weights = {"prod": batch.O11_prod, "eig": batch.O11_eig}[source]
    inside = np.abs(batch.z - complex(lam)) < h
    _warn_if_empty(inside, "estimate_D11")
    # window area measured in units of d^2z / pi
    per = (inside * weights).sum(axis=1) / h**2
    return _estimate(per)


def estimate_density(batch, lam: complex, h: float) -> Estimate:
    batch = _as_batch(batch)
    inside = np.abs(batch.z - complex(lam)) < h
    return _estimate(inside.sum(axis=1) / h**2)


def estimate_D12(batch, lam1: complex, lam2: complex, h: float) -> Estimate:
    """Two-window estimate of ``D_12^(N,2)(lam1, lam2)`` from the product formula."""
    if h <= 0:
        raise ValueError("h must be positive")
    if abs(complex(lam1) - complex(lam2)) < 2 * h:
        raise ValueError("windows overlap")
    batch = _as_batch(batch)
    s = math.sqrt(batch.config.sigma_sq)
    per = np.zeros(batch.z.shape[0], dtype=complex)
    in1 = np.abs(batch.z - complex(lam1)) < h
    in2 = np.abs(batch.z - complex(lam2)) < h
    _warn_if_empty(in1.any(axis=1) & in2.any(axis=1), "estimate_D12")
    for r in np.nonzero(in1.any(axis=1) & in2.any(axis=1))[0]:
        pairs = [(i, j) for i in np.nonzero(in1[r])[0] for j in np.nonzero(in2[r])[0]]
        vals = product_formula_O12(batch.z[r] / s, pairs)
        per[r] = vals.sum()
    return _estimate(per / h**4)


@dataclass(frozen=True)
class ConditionalMeanTest:
    name: str
    mean: complex
    stderr: float
    sigmas: float
    passed: bool


def conditional_mean_tests(batch: OverlapSampleBatch, tol: Tolerances = TOL) -> list[ConditionalMeanTest]:
    """Eigenvector overlaps against their product-formula conditional means.

    Per replica the statistic is the mean of ``O_eig / O_prod - 1`` over all
    eigenvalues (diagonal) or all pairs ``i < j`` (off-diagonal); its
    expectation is exactly zero because ``O_prod`` is a function of the
    eigenvalues only.
    """
    out = []
    cases = [("O11", batch.ratio11)]
    if batch.config.N > 1:
        cases += [("O12.real", batch.ratio12.real), ("O12.imag", batch.ratio12.imag)]
    for name, x in cases:
        est = _estimate(np.asarray(x, dtype=float))
        ok = abs(est.value) <= tol.mc_sigmas * est.stderr
        out.append(ConditionalMeanTest(name, est.value, est.stderr, tol.mc_sigmas, bool(ok)))
    return out


def nearest_point_difference(batch: OverlapSampleBatch, point: complex) -> Estimate:
    """Mean of ``O11_eig - O11_prod`` for the eigenvalue nearest ``point``."""
    k = np.abs(batch.z - complex(point)).argmin(axis=1)
    rows = np.arange(k.size)
    return _estimate(batch.O11_eig[rows, k] - batch.O11_prod[rows, k])


def gamma_mixture_cdf(t: np.ndarray, N: int, alpha: float) -> np.ndarray:
    """CDF of ``|z|^2`` for a uniformly chosen eigenvalue."""
    k = np.arange(N)[:, None]
    return gammainc(k + alpha + 1, np.asarray(t, dtype=float)[None, :]).mean(axis=0)


@dataclass(frozen=True)
class ModuliTest:
    name: str
    statistic: float
    pvalue: float
    passed: bool


def moduli_gamma_tests(batch: OverlapSampleBatch, tol: Tolerances = TOL) -> list[ModuliTest]:
    """Squared moduli against independent ``Gamma(k + alpha + 1)`` variables.

    Two checks: one uniformly chosen eigenvalue per replica against the
    mixture CDF (iid by construction), and the largest squared modulus against
    a brute-force sample of the maximum of ``N`` independent Gammas.
    """
    cfg = batch.config
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([cfg.seed, 2**31 - 1])))
    m2 = np.abs(batch.z_unit) ** 2
    pick = m2[np.arange(m2.shape[0]), rng.integers(0, cfg.N, m2.shape[0])]
    one = stats.kstest(pick, lambda t: gamma_mixture_cdf(t, cfg.N, cfg.alpha_int))
    shapes = np.arange(cfg.N) + cfg.alpha_int + 1
    brute = rng.gamma(shapes, size=(m2.shape[0], cfg.N)).max(axis=1)
    top = stats.ks_2samp(m2.max(axis=1), brute)
    return [
        ModuliTest("uniform_eigenvalue_vs_mixture", float(one.statistic), float(one.pvalue),
                   bool(one.pvalue > tol.ks_pvalue)),
        ModuliTest("max_modulus_vs_gamma_max", float(top.statistic), float(top.pvalue),
                   bool(top.pvalue > tol.ks_pvalue)),
    ]


def write_overlap_csv(batch: OverlapSampleBatch, stream) -> None:
    stream.write(CSV_HEADER + "\n")
    for r, rep in enumerate(batch.replica):
        for i in range(batch.z.shape[1]):
            z = batch.z[r, i]
            stream.write(f"{rep},{i},{z.real:.17g},{z.imag:.17g},"
                         f"{batch.O11_eig[r, i]:.17g},{batch.O11_prod[r, i]:.17g}\n")


@dataclass
class BatchSummary:
    config: dict
    replicas: int
    discarded: int
    max_residual: float
    conditional_means: list = field(default_factory=list)
    moduli: list = field(default_factory=list)
    estimates: dict = field(default_factory=dict)

    def to_jsonl(self) -> str:
        def enc(o):
            if isinstance(o, complex):
                return [o.real, o.imag]
            if isinstance(o, (np.bool_,)):
                return bool(o)
            if isinstance(o, np.generic):
                return o.item()
            raise TypeError(type(o))

        return json.dumps(asdict(self), default=enc)


def summarize(batch: OverlapSampleBatch, tol: Tolerances = TOL, **estimates: Estimate) -> BatchSummary:
    # the worker count does not influence the samples, so it is left out
    config = {k: v for k, v in asdict(batch.config).items() if k != "workers"}
    return BatchSummary(
        config=config,
        replicas=int(batch.replica.size),
        discarded=batch.discarded,
        max_residual=batch.max_residual,
        conditional_means=[asdict(t) for t in conditional_mean_tests(batch, tol)],
        moduli=[asdict(t) for t in moduli_gamma_tests(batch, tol)],
        estimates={k: asdict(v) for k, v in estimates.items()},
    )
