"""Pilot plans, the frequency-domain measurement model and block reordering.

Two column orders are used for the same sensing operator:

* antenna-major (``P``): column ``i * L + l`` holds antenna ``i``, tap ``l``;
* block (``Theta``): column ``l * N_T + i`` holds the same entry, so the
  ``N_T`` coefficients of one tap across all antennas sit in one block.

All indexes are zero-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .exceptions import ConfigurationError, DimensionError

__all__ = [
    "ColumnOrder",
    "PilotPlan",
    "SensingMatrix",
    "Measurement",
    "make_pilot_plan",
    "build_sensing_matrix",
    "block_permutation",
    "h_to_g",
    "g_to_h",
    "p_to_theta",
    "theta_to_p",
    "measure",
]

QPSK = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2)


class ColumnOrder(str, Enum):
    ANTENNA_MAJOR = "antenna_major"
    BLOCK = "block"


@dataclass(frozen=True)
class PilotPlan:
    """Pilot subcarriers ``omega`` (sorted) and per-antenna symbols.

    ``symbols`` has shape ``(n_antennas, n_pilots)``.
    """

    omega: np.ndarray
    symbols: np.ndarray
    n_subcarriers: int

    @property
    def n_pilots(self):
        return self.omega.size

    @property
    def n_antennas(self):
        return self.symbols.shape[0]


@dataclass(frozen=True)
class SensingMatrix:
    entries: np.ndarray
    column_order: ColumnOrder
    n_antennas: int
    length: int

    def __post_init__(self):
        if self.entries.shape[1] != self.n_antennas * self.length:
            raise DimensionError(
                f"sensing matrix has {self.entries.shape[1]} columns, "
                f"expected {self.n_antennas}*{self.length}"
            )

    @property
    def shape(self):
        return self.entries.shape

    @property
    def n_pilots(self):
        return self.entries.shape[0]


@dataclass(frozen=True)
class Measurement:
    y: np.ndarray
    noise_variance: float


def make_pilot_plan(N: int, p: int, n_antennas: int, rng: np.random.Generator) -> PilotPlan:
    if not 1 <= p <= N:
        raise ConfigurationError(f"need 1 <= p <= N, got p={p}, N={N}")
    if n_antennas < 1:
        raise ConfigurationError("n_antennas must be at least 1")
    omega = np.sort(rng.choice(N, size=p, replace=False))
    symbols = QPSK[rng.integers(0, 4, size=(n_antennas, p))]
    return PilotPlan(omega, symbols, N)


def build_sensing_matrix(plan: PilotPlan, L: int) -> SensingMatrix:
    """Antenna-major matrix ``[diag(c_1) F_L[omega], ..., diag(c_NT) F_L[omega]]``.

    ``F`` is the unnormalized DFT, ``F[m, k] = exp(-2j pi m k / N)``.
    """
    if L < 1:
        raise ConfigurationError("L must be at least 1")
    k = np.arange(L)
    # reduce m*k mod N before scaling, keeps the phases exact for large N
    phase = np.outer(plan.omega, k) % plan.n_subcarriers
    fl = np.exp(-2j * np.pi * phase / plan.n_subcarriers)
    blocks = [plan.symbols[i][:, None] * fl for i in range(plan.n_antennas)]
    return SensingMatrix(np.hstack(blocks), ColumnOrder.ANTENNA_MAJOR, plan.n_antennas, L)


def block_permutation(n_antennas: int, length: int) -> np.ndarray:
    """Index array ``perm`` with ``g = h[perm]``.

    ``perm[l * N_T + i] = i * L + l``.
    """
    return np.arange(n_antennas * length).reshape(n_antennas, length).T.ravel()


def _check_len(v, n_antennas, length):
    v = np.asarray(v)
    if n_antennas < 1 or length < 1 or v.shape[-1] != n_antennas * length:
        raise DimensionError(
            f"vector of length {v.shape[-1]} cannot be split into {n_antennas} x {length}"
        )
    return v


def h_to_g(h, n_antennas: int, length: int) -> np.ndarray:
    h = _check_len(h, n_antennas, length)
    return h[..., block_permutation(n_antennas, length)]


def g_to_h(g, n_antennas: int, length: int) -> np.ndarray:
    g = _check_len(g, n_antennas, length)
    return g[..., block_permutation(length, n_antennas)]


def p_to_theta(P: SensingMatrix) -> SensingMatrix:
    if P.column_order is not ColumnOrder.ANTENNA_MAJOR:
        raise ValueError("p_to_theta expects an antenna-major matrix")
    entries = P.entries[:, block_permutation(P.n_antennas, P.length)]
    return SensingMatrix(entries, ColumnOrder.BLOCK, P.n_antennas, P.length)


def theta_to_p(theta: SensingMatrix) -> SensingMatrix:
    if theta.column_order is not ColumnOrder.BLOCK:
        raise ValueError("theta_to_p expects a block-ordered matrix")
    entries = theta.entries[:, block_permutation(theta.length, theta.n_antennas)]
    return SensingMatrix(entries, ColumnOrder.ANTENNA_MAJOR, theta.n_antennas, theta.length)


def measure(theta, g, snr_db: float, rng: np.random.Generator) -> Measurement:
    """Noisy pilots ``y = Theta g + n``.

    The noise is circular complex Gaussian with per-entry variance
    ``||Theta g||^2 / (p * 10^(snr_db/10))``, so the SNR is exact per
    realization in expectation over the noise only.  ``snr_db=inf`` gives a
    noiseless measurement, as does ``g = 0``.
    """
    entries = theta.entries if isinstance(theta, SensingMatrix) else np.asarray(theta)
    g = np.asarray(g, dtype=complex).ravel()
    if entries.shape[1] != g.size:
        raise DimensionError("g does not match the sensing matrix")
    clean = entries @ g
    p = clean.size
    signal = float(np.vdot(clean, clean).real)
    if np.isposinf(snr_db) or signal == 0.0:
        return Measurement(clean, 0.0)
    var = signal / (p * 10.0 ** (snr_db / 10.0))
    noise = np.sqrt(var / 2.0) * (rng.standard_normal(p) + 1j * rng.standard_normal(p))
    return Measurement(clean + noise, var)
