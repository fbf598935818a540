"""Iterative support detection with and without the block vote.

Each pass solves a truncated BP problem that leaves the currently detected
support unpenalized, then re-detects the support from scratch on the new
estimate: sort the magnitudes, find the first gap larger than
``max|g| / (L N_T)``, threshold at the magnitude just below that gap, and
(for the block variant) keep a whole block of ``N_T`` entries only when
strictly more than half of it survived the threshold.

Neither entry point takes a sparsity level.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .pilots import ColumnOrder, Measurement, SensingMatrix
from .solver import BpdnSolver, SolverParams, default_delta

__all__ = [
    "IsdParams",
    "IsdState",
    "RecoveryOutput",
    "TerminationReason",
    "jump_threshold",
    "first_significant_jump",
    "detect_support",
    "block_vote",
    "block_isd_recover",
    "isd_recover",
]

log = logging.getLogger(__name__)


class TerminationReason(str, Enum):
    SUPPORT_CAP = "support_cap"
    SUPPORT_STABLE = "support_stable"
    NO_JUMP_FOUND = "no_jump_found"
    ITERATION_CAP = "iteration_cap"


@dataclass(frozen=True)
class IsdParams:
    """Loop and subproblem settings.

    ``delta=None`` derives the fidelity radius from the measurement's noise
    variance (see :func:`blockisd.solver.default_delta`), multiplied by
    ``delta_scale``.
    """

    iteration_cap: int = 12
    delta: float | None = None
    delta_scale: float = 1.0
    warm_start: bool = True
    solver: SolverParams = field(default_factory=SolverParams)

    def __post_init__(self):
        if self.iteration_cap < 1:
            raise ValueError("iteration_cap must be at least 1")
        if self.delta is not None and self.delta < 0:
            raise ValueError("delta must be non-negative")

    def resolve_delta(self, measurement: Measurement) -> float:
        if self.delta is not None:
            return self.delta
        return self.delta_scale * default_delta(measurement.noise_variance, measurement.y.size)


@dataclass
class IsdState:
    iteration: int
    support: np.ndarray
    estimate: np.ndarray
    jump_threshold: float
    magnitude_threshold: float | None


@dataclass
class RecoveryOutput:
    g_hat: np.ndarray
    final_support: np.ndarray
    iterations_used: int
    termination_reason: TerminationReason
    solver_converged: bool = True
    history: list = field(default_factory=list, repr=False)


def jump_threshold(v, L: int, n_antennas: int) -> float:
    """``max|v| / (L N_T)``."""
    v = np.asarray(v)
    if v.size == 0:
        raise ValueError("v must be nonempty")
    return float(np.abs(v).max()) / (L * n_antennas)


def first_significant_jump(sorted_magnitudes, tau: float):
    """Smallest ``i`` with ``v[i+1] - v[i] > tau``, or ``None``.

    ``sorted_magnitudes`` must be ascending.  The returned index is
    zero-based, so the threshold is ``sorted_magnitudes[i]``.
    """
    v = np.asarray(sorted_magnitudes, dtype=float)
    hits = np.flatnonzero(np.diff(v) > abs(tau))
    return int(hits[0]) if hits.size else None


def detect_support(g, eps: float) -> np.ndarray:
    """Positions in the original (unsorted) ``g`` with ``|g| > eps``."""
    return np.flatnonzero(np.abs(np.asarray(g)) > eps)


def block_vote(scalar_support, n_antennas: int, L: int) -> np.ndarray:
    """Expand every block with more than ``N_T / 2`` detected entries to the whole block."""
    counts = np.zeros(L, dtype=int)
    idx = np.asarray(scalar_support, dtype=int)
    np.add.at(counts, idx // n_antennas, 1)
    passed = np.flatnonzero(2 * counts > n_antennas)
    return (passed[:, None] * n_antennas + np.arange(n_antennas)).ravel()


def _as_inputs(theta, measurement):
    if not isinstance(theta, SensingMatrix):
        raise TypeError("theta must be a SensingMatrix")
    if theta.column_order is not ColumnOrder.BLOCK:
        raise ValueError("ISD expects a block-ordered sensing matrix")
    if not isinstance(measurement, Measurement):
        measurement = Measurement(np.asarray(measurement, dtype=complex).ravel(), 0.0)
    return theta, measurement


def _detection_loop(theta, measurement, params, vote):
    params = params or IsdParams()
    theta, measurement = _as_inputs(theta, measurement)
    p, n = theta.shape
    NT, L = theta.n_antennas, theta.length
    delta = params.resolve_delta(measurement)
    solver = BpdnSolver(theta.entries, params.solver)
    y = measurement.y

    support = np.zeros(0, dtype=int)
    g = None
    converged = True
    history = []
    s = 0
    reason = TerminationReason.SUPPORT_CAP
    while support.size < n - p:
        if s >= params.iteration_cap:
            reason = TerminationReason.ITERATION_CAP
            break
        free = np.ones(n, dtype=bool)
        free[support] = False
        res = solver.solve(y, free, delta, x0=g if params.warm_start else None)
        g = res.g_hat
        converged &= res.converged
        s += 1

        mags = np.sort(np.abs(g), kind="stable")
        tau = jump_threshold(mags, L, NT)
        i = first_significant_jump(mags, tau)
        if i is None:
            history.append(IsdState(s, support, g, tau, None))
            reason = TerminationReason.NO_JUMP_FOUND
            break
        eps = float(mags[i])
        detected = detect_support(g, eps)
        if vote:
            detected = block_vote(detected, NT, L)
        history.append(IsdState(s, detected, g, tau, eps))
        if np.array_equal(detected, support):
            reason = TerminationReason.SUPPORT_STABLE
            break
        support = detected

    if g is None:
        # loop guard already false: p >= N_T L, fall back to one BP solve
        res = solver.solve(y, np.ones(n, dtype=bool), delta)
        g, converged, s = res.g_hat, res.converged, 1
    if not converged:
        log.debug("ISD finished with an unconverged subproblem (%s)", reason.value)
    return RecoveryOutput(g, support, s, reason, converged, history)


def block_isd_recover(theta: SensingMatrix, measurement, params: IsdParams | None = None) -> RecoveryOutput:
    """Block-ISD estimate of the block-ordered channel ``g``."""
    return _detection_loop(theta, measurement, params, vote=True)


def isd_recover(theta: SensingMatrix, measurement, params: IsdParams | None = None) -> RecoveryOutput:
    """Classical ISD: the same loop with the block vote switched off."""
    return _detection_loop(theta, measurement, params, vote=False)
