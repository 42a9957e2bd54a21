"""Central table of numerical tolerances.

Every threshold used by the self-test battery and by the coincidence-limit
machinery lives here so it can be documented and overridden in one place.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    # coincidence handling for removable singularities
    coincidence_delta: float = 1e-4  # minimum separation of distinct points
    coincidence_switch: float = 0.2  # closer than this: use the contour mean
    coincidence_radius: float = 0.4
    coincidence_points: int = 32  # minimum node count

    # identities
    master_identity: float = 1e-9
    oracle_triangle: float = 1e-9
    ldu_reconstruction: float = 1e-12
    d_sequence: float = 1e-12
    three_term: float = 1e-10
    ginibre_regression: float = 1e-12
    special_tight: float = 1e-12
    special_loose: float = 1e-10
    asym_q_constant: float = 5.0

    # Monte Carlo
    mc_sigmas: float = 3.0
    mc_relative: float = 0.05
    ks_pvalue: float = 1e-3
    eig_residual: float = 1e-8
    gap_threshold: float = 1e-10

    # scaling limits
    exponent_band: float = 0.2
    weak_to_bulk: float = 0.10
    band_to_quarter_square: float = 0.10
    sine_kernel: float = 0.15
    edge_h_fd: float = 1e-8

    def override(self, **kwargs) -> "Tolerances":
        known = {f.name for f in fields(self)}
        bad = set(kwargs) - known
        if bad:
            raise KeyError(f"unknown tolerance(s): {sorted(bad)}")
        return replace(self, **kwargs)

    def as_dict(self) -> dict:
        return asdict(self)


DEFAULT = Tolerances()
