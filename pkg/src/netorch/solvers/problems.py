from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from netorch.errors import InvalidProblem, ShapeMismatch


@dataclass(frozen=True)
class BandwidthProblem:
    """Split ``total_bw`` units among K UEs with effective SNRs ``effective_snr``.

    ``effective_snr[k] = g_k * P_k / N0`` expressed per bandwidth unit, so the
    rate of UE k with b units is ``b * log2(1 + c_k / b)``.
    """

    total_bw: float
    effective_snr: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "effective_snr", np.asarray(self.effective_snr, dtype=float).ravel())

    @property
    def K(self) -> int:
        return int(self.effective_snr.shape[0])

    def validate(self) -> None:
        if not np.isfinite(self.total_bw) or self.total_bw <= 0:
            raise InvalidProblem(f"total_bw must be positive, got {self.total_bw}")
        if self.K < 1:
            raise InvalidProblem("need at least one UE")
        c = self.effective_snr
        if not np.all(np.isfinite(c)) or np.any(c <= 0):
            raise InvalidProblem("effective_snr entries must be positive and finite")


@dataclass(frozen=True)
class PowerProblem:
    """Downlink power control over L cells with K UEs each.

    ``signal_gain`` is (L, K): coherent gain of UE (j, k) from its own BS.
    ``cross_gain`` is (L, L*K): entry [l, j*K + k] is the large-scale gain
    from BS l to UE (j, k); interference is non-coherent.
    """

    signal_gain: np.ndarray
    cross_gain: np.ndarray
    noise: float
    p_max: float

    def __post_init__(self):
        object.__setattr__(self, "signal_gain", np.atleast_2d(np.asarray(self.signal_gain, dtype=float)))
        object.__setattr__(self, "cross_gain", np.atleast_2d(np.asarray(self.cross_gain, dtype=float)))

    @property
    def L(self) -> int:
        return int(self.signal_gain.shape[0])

    @property
    def K(self) -> int:
        return int(self.signal_gain.shape[1])

    @property
    def own_gain(self) -> np.ndarray:
        """beta_{j -> (j,k)} as an (L, K) array."""
        L, K = self.L, self.K
        return self.cross_gain.reshape(L, L, K)[np.arange(L), np.arange(L), :]

    def validate(self) -> None:
        L, K = self.L, self.K
        if self.signal_gain.ndim != 2 or L < 1 or K < 1:
            raise InvalidProblem("signal_gain must be a non-empty (L, K) matrix")
        if self.cross_gain.shape != (L, L * K):
            raise InvalidProblem(f"cross_gain shape {self.cross_gain.shape} != {(L, L * K)}")
        if not (np.isfinite(self.noise) and self.noise > 0):
            raise InvalidProblem("noise must be positive")
        if not (np.isfinite(self.p_max) and self.p_max > 0):
            raise InvalidProblem("p_max must be positive")
        a, beta = self.signal_gain, self.cross_gain
        if not np.all(np.isfinite(a)) or np.any(a <= 0):
            raise InvalidProblem("signal_gain entries must be positive")
        if not np.all(np.isfinite(beta)) or np.any(beta < 0):
            raise InvalidProblem("cross_gain entries must be non-negative")
        own = self.own_gain
        if np.any(own <= 0):
            raise InvalidProblem("own-cell gain must be positive")
        if np.any(a < own):
            raise InvalidProblem("signal_gain must dominate the own-cell large-scale gain")


@dataclass
class Allocation:
    values: np.ndarray
    objective_value: float
    diagnostics: dict = field(default_factory=dict)


def as_power_matrix(problem: PowerProblem, p) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    if arr.size != problem.L * problem.K:
        raise ShapeMismatch(f"power array has {arr.size} entries, expected {problem.L}x{problem.K}")
    return arr.reshape(problem.L, problem.K)
