"""Tapped-delay-line MIMO channels with a support shared by all antennas.

Tap and antenna indexes are zero-based throughout.  The aggregate CIR ``h`` is
stored antenna-major: entry ``i * L + l`` is tap ``l`` of antenna ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError

__all__ = [
    "ChannelProfile",
    "Cir",
    "VEHICULAR_A_DELAYS_NS",
    "VEHICULAR_A_POWERS_DB",
    "vehicular_a",
    "profile_to_support",
    "generate_cir",
    "random_block_sparse_cir",
]

# ITU-R M.1225 Vehicular-A
VEHICULAR_A_DELAYS_NS = (0.0, 310.0, 710.0, 1090.0, 1730.0, 2510.0)
VEHICULAR_A_POWERS_DB = (0.0, -1.0, -9.0, -10.0, -15.0, -20.0)


@dataclass(frozen=True)
class ChannelProfile:
    tap_delays_ns: tuple
    tap_powers_db: tuple
    bandwidth_hz: float
    max_length: int

    def __post_init__(self):
        delays = tuple(float(d) for d in self.tap_delays_ns)
        powers = tuple(float(p) for p in self.tap_powers_db)
        object.__setattr__(self, "tap_delays_ns", delays)
        object.__setattr__(self, "tap_powers_db", powers)
        if not delays:
            raise ConfigurationError("channel profile has no taps")
        if len(delays) != len(powers):
            raise ConfigurationError("tap_delays_ns and tap_powers_db differ in length")
        if delays[0] != 0.0:
            raise ConfigurationError("first tap delay must be 0 ns")
        if any(b <= a for a, b in zip(delays, delays[1:])):
            raise ConfigurationError("tap delays must be strictly increasing")
        if self.bandwidth_hz <= 0:
            raise ConfigurationError("bandwidth must be positive")
        if self.max_length < 1:
            raise ConfigurationError("channel length L must be at least 1")

    @classmethod
    def from_dict(cls, d, max_length):
        return cls(
            tap_delays_ns=tuple(d["tap_delays_ns"]),
            tap_powers_db=tuple(d["tap_powers_db"]),
            bandwidth_hz=float(d["bandwidth_hz"]),
            max_length=int(d.get("max_length", max_length)),
        )

    def to_dict(self):
        return {
            "tap_delays_ns": list(self.tap_delays_ns),
            "tap_powers_db": list(self.tap_powers_db),
            "bandwidth_hz": self.bandwidth_hz,
        }


def vehicular_a(bandwidth_hz=50e6, max_length=128) -> ChannelProfile:
    return ChannelProfile(VEHICULAR_A_DELAYS_NS, VEHICULAR_A_POWERS_DB, bandwidth_hz, max_length)


def _tap_indexes(profile):
    # np.round is half-to-even; delay * bw is exact for whole-ns delays so ties stay ties
    samples = np.asarray(profile.tap_delays_ns) * profile.bandwidth_hz / 1e9
    return np.round(samples).astype(int)


def profile_to_support(profile: ChannelProfile) -> np.ndarray:
    """Sorted, de-duplicated zero-based tap indexes of a delay profile.

    Each delay maps to ``round(delay * bandwidth)`` samples.  A profile whose
    last tap falls at or beyond ``L`` raises :class:`ConfigurationError`.
    """
    idx = _tap_indexes(profile)
    if idx.max() >= profile.max_length:
        raise ConfigurationError(
            f"tap at {profile.tap_delays_ns[int(idx.argmax())]} ns maps to sample "
            f"{int(idx.max())}, outside channel length {profile.max_length}"
        )
    return np.unique(idx)


@dataclass
class Cir:
    coeffs: np.ndarray
    n_antennas: int
    length: int

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex).ravel()
        if self.coeffs.size != self.n_antennas * self.length:
            raise ConfigurationError("coeffs length is not n_antennas * length")

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.coeffs)

    def antenna_supports(self):
        """Per-antenna tap supports, one index array per antenna."""
        per = self.coeffs.reshape(self.n_antennas, self.length)
        return [np.flatnonzero(row) for row in per]

    @property
    def tap_support(self) -> np.ndarray:
        """Union over antennas of the nonzero tap indexes."""
        per = self.coeffs.reshape(self.n_antennas, self.length)
        return np.flatnonzero(np.any(per != 0, axis=0))


def _draw(taps, variances, n_antennas, length, rng):
    h = np.zeros((n_antennas, length), dtype=complex)
    scale = np.sqrt(variances / 2.0)
    for i in range(n_antennas):
        re = rng.standard_normal(taps.size)
        im = rng.standard_normal(taps.size)
        h[i, taps] = scale * (re + 1j * im)
    return Cir(h.ravel(), n_antennas, length)


def generate_cir(profile: ChannelProfile, n_antennas: int, rng: np.random.Generator) -> Cir:
    """Draw one Rayleigh-faded CIR per antenna on the profile's common support.

    Tap powers are normalized so the expected energy of each antenna's CIR
    is one; taps that land on the same sample add their powers.  Gains are
    independent across antennas.
    """
    if n_antennas < 1:
        raise ConfigurationError("n_antennas must be at least 1")
    support = profile_to_support(profile)
    if support.size == 0:
        raise ConfigurationError("empty channel support")
    idx = _tap_indexes(profile)
    lin = 10.0 ** (np.asarray(profile.tap_powers_db) / 10.0)
    variances = np.array([lin[idx == t].sum() for t in support])
    variances /= variances.sum()
    return _draw(support, variances, n_antennas, profile.max_length, rng)


def random_block_sparse_cir(n_antennas, length, n_taps, rng) -> Cir:
    """Common-support CIR with ``n_taps`` uniformly placed equal-power taps."""
    if not 1 <= n_taps <= length:
        raise ConfigurationError("n_taps must lie in [1, length]")
    taps = np.sort(rng.choice(length, size=n_taps, replace=False))
    variances = np.full(n_taps, 1.0 / n_taps)
    return _draw(taps, variances, n_antennas, length, rng)
