"""Reference estimators: single-shot BP and the support-oracle least squares."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import RankDeficiencyError
from .isd import IsdParams, RecoveryOutput, TerminationReason, _as_inputs
from .solver import BpdnSolver

__all__ = ["OracleInfo", "bp_recover", "oracle_ls"]


@dataclass(frozen=True)
class OracleInfo:
    """Genie knowledge of which taps (blocks of ``g``) are nonzero."""

    true_block_support: tuple

    def __post_init__(self):
        blocks = tuple(sorted(int(b) for b in self.true_block_support))
        if not blocks:
            raise ValueError("oracle support is empty")
        object.__setattr__(self, "true_block_support", blocks)

    def indexes(self, n_antennas):
        b = np.asarray(self.true_block_support)
        return (b[:, None] * n_antennas + np.arange(n_antennas)).ravel()


def bp_recover(theta, measurement, delta=None, params: IsdParams | None = None) -> RecoveryOutput:
    """Plain BPDN: one truncated-BP solve with every entry penalized.

    ``delta`` overrides the radius otherwise derived from ``params``.
    """
    params = params or IsdParams()
    theta, measurement = _as_inputs(theta, measurement)
    if delta is None:
        delta = params.resolve_delta(measurement)
    res = BpdnSolver(theta.entries, params.solver).solve(
        measurement.y, np.ones(theta.shape[1], dtype=bool), delta
    )
    return RecoveryOutput(
        g_hat=res.g_hat,
        final_support=np.flatnonzero(np.abs(res.g_hat) > 0),
        iterations_used=1,
        termination_reason=TerminationReason.ITERATION_CAP,
        solver_converged=res.converged,
    )


def oracle_ls(theta, measurement, oracle: OracleInfo) -> RecoveryOutput:
    """Least squares restricted to the true block support; zero elsewhere."""
    theta, measurement = _as_inputs(theta, measurement)
    idx = oracle.indexes(theta.n_antennas)
    sub = theta.entries[:, idx]
    if idx.size > sub.shape[0]:
        raise RankDeficiencyError(
            f"{idx.size} unknowns on the oracle support but only {sub.shape[0]} pilots"
        )
    coef, _, rank, _ = np.linalg.lstsq(sub, measurement.y, rcond=None)
    if rank < idx.size:
        raise RankDeficiencyError(f"oracle columns have rank {rank} < {idx.size}")
    g = np.zeros(theta.shape[1], dtype=complex)
    g[idx] = coef
    return RecoveryOutput(g, idx, 1, TerminationReason.SUPPORT_STABLE)
