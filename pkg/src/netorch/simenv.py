"""Seeded multi-cell massive MIMO scenarios.

Base stations sit on a wrap-around grid of square cells; UEs are dropped
uniformly in their serving cell. Large-scale gains follow a log-distance
pathloss with optional log-normal shadowing, normalised by the noise power
so that noise = 1 in the resulting problems.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from netorch import canonical
from netorch.errors import InvalidGeometry, InvalidProblem, ParseError
from netorch.memory import fnv1a64
from netorch.solvers.problems import BandwidthProblem, PowerProblem

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15


def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """SplitMix64 stream keyed by (seed, purpose tag, entity index)."""

    def __init__(self, seed: int, tag: str = "", index: int = 0):
        key = _mix64((seed & _MASK64) ^ fnv1a64(tag.encode("utf-8")))
        self.state = _mix64((key + (index & _MASK64) * _GOLDEN) & _MASK64)

    def next_u64(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK64
        return _mix64(self.state)

    def uniform(self) -> float:
        """Uniform in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def normal(self) -> float:
        # Box-Muller; 1 - u keeps the log argument in (0, 1]
        u1 = 1.0 - self.uniform()
        u2 = self.uniform()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)


@dataclass(frozen=True)
class Geometry:
    cell_radius: float = 250.0
    min_distance: float = 35.0
    pathloss_exponent: float = 3.76
    pathloss_intercept_db: float = -35.3
    shadowing_std_db: float = 0.0
    noise_power_dbm: float = -94.0

    def validate(self) -> None:
        if not self.cell_radius > 0:
            raise InvalidGeometry("cell_radius must be positive")
        if not 0 < self.min_distance < self.cell_radius:
            raise InvalidGeometry("min_distance must lie in (0, cell_radius)")
        if not self.pathloss_exponent > 0:
            raise InvalidGeometry("pathloss_exponent must be positive")
        if self.shadowing_std_db < 0:
            raise InvalidGeometry("shadowing_std_db must be non-negative")

    def pathloss_db(self, distance):
        return self.pathloss_intercept_db - 10.0 * self.pathloss_exponent * np.log10(distance)


@dataclass
class Scenario:
    L: int
    K: int
    M: int
    seed: int
    geometry: Geometry
    bs_positions: np.ndarray  # (L, 2) metres
    ue_positions: np.ndarray  # (L*K, 2) metres, UE (j, k) at row j*K + k
    large_scale_gain: np.ndarray  # (L, L*K), noise-normalised
    area: tuple = field(default=(0.0, 0.0))

    def to_dict(self) -> dict:
        return {
            "L": self.L,
            "K": self.K,
            "M": self.M,
            "seed": self.seed,
            "geometry": asdict(self.geometry),
            "area": list(self.area),
            "bs_positions": canonical.Matrix.from_array(self.bs_positions),
            "ue_positions": canonical.Matrix.from_array(self.ue_positions),
            "large_scale_gain": canonical.Matrix.from_array(self.large_scale_gain),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Scenario":
        try:
            obj = canonical.from_plain(obj)
            return cls(
                L=int(obj["L"]),
                K=int(obj["K"]),
                M=int(obj["M"]),
                seed=int(obj["seed"]),
                geometry=Geometry(**obj["geometry"]),
                bs_positions=obj["bs_positions"].to_array(),
                ue_positions=obj["ue_positions"].to_array(),
                large_scale_gain=obj["large_scale_gain"].to_array(),
                area=tuple(obj.get("area", (0.0, 0.0))),
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise ParseError(f"bad scenario document: {exc}") from exc


def grid_shape(L: int) -> tuple[int, int]:
    """(rows, cols): square when L is a perfect square, else a 1 x L line."""
    n = math.isqrt(L)
    return (n, n) if n * n == L else (1, L)


def _bs_positions(L: int, side: float) -> np.ndarray:
    rows, cols = grid_shape(L)
    return np.array([((l % cols + 0.5) * side, (l // cols + 0.5) * side) for l in range(L)], dtype=float)


def _drop_ue(rng: SplitMix64, centre, side: float, min_distance: float) -> tuple[float, float]:
    for _ in range(10_000):
        dx = (rng.uniform() - 0.5) * side
        dy = (rng.uniform() - 0.5) * side
        if math.hypot(dx, dy) >= min_distance:
            return centre[0] + dx, centre[1] + dy
    raise InvalidGeometry("could not place UE outside min_distance")


def wrapped_distances(bs: np.ndarray, ue: np.ndarray, area: tuple[float, float]) -> np.ndarray:
    """(L, N) distances on the torus of size ``area``."""
    w, h = area
    dx = np.abs(ue[None, :, 0] - bs[:, None, 0]) % w
    dy = np.abs(ue[None, :, 1] - bs[:, None, 1]) % h
    dx = np.minimum(dx, w - dx)
    dy = np.minimum(dy, h - dy)
    return np.hypot(dx, dy)


def generate_scenario(
    L: int,
    K: int,
    M: int = 96,
    seed: int = 0,
    geometry: Geometry | None = None,
    *,
    ue_positions=None,
) -> Scenario:
    """Build a reproducible scenario; ``ue_positions`` overrides the UE drop (test hook)."""
    geometry = geometry or Geometry()
    if L < 1 or K < 1 or M < 1:
        raise InvalidGeometry("L, K and M must all be >= 1")
    geometry.validate()
    side = 2.0 * geometry.cell_radius
    rows, cols = grid_shape(L)
    area = (cols * side, rows * side)
    bs = _bs_positions(L, side)

    if ue_positions is None:
        ue = np.empty((L * K, 2))
        for j in range(L):
            for k in range(K):
                rng = SplitMix64(seed, "ue", j * K + k)
                ue[j * K + k] = _drop_ue(rng, bs[j], side, geometry.min_distance)
    else:
        ue = np.asarray(ue_positions, dtype=float).reshape(L * K, 2)

    dist = wrapped_distances(bs, ue, area)
    serving = dist[np.repeat(np.arange(L), K), np.arange(L * K)]
    if np.any(serving < geometry.min_distance * (1 - 1e-12)):
        raise InvalidGeometry("UE closer than min_distance to its serving BS")

    gain_db = geometry.pathloss_db(dist) - geometry.noise_power_dbm
    if geometry.shadowing_std_db > 0:
        shadow = np.empty_like(gain_db)
        N = L * K
        for l in range(L):
            for u in range(N):
                shadow[l, u] = SplitMix64(seed, "shadow", l * N + u).normal()
        gain_db = gain_db + geometry.shadowing_std_db * shadow
    beta = 10.0 ** (gain_db / 10.0)
    return Scenario(L, K, M, seed, geometry, bs, ue, beta, area)


def scenario_to_power_problem(s: Scenario, p_max: float) -> PowerProblem:
    L, K = s.L, s.K
    own = s.large_scale_gain.reshape(L, L, K)[np.arange(L), np.arange(L), :]
    return PowerProblem(signal_gain=s.M * own, cross_gain=s.large_scale_gain.copy(), noise=1.0, p_max=p_max)


def scenario_to_bandwidth_problem(
    s: Scenario, cell: int, total_bw: float, per_ue_power: float = 100.0, n0: float = 1.0
) -> BandwidthProblem:
    if not 0 <= cell < s.L:
        raise IndexError(f"cell {cell} out of range for L={s.L}")
    if not per_ue_power > 0 or not n0 > 0:
        raise InvalidProblem("per_ue_power and n0 must be positive")
    own = s.large_scale_gain[cell, cell * s.K : (cell + 1) * s.K]
    return BandwidthProblem(total_bw=total_bw, effective_snr=own * per_ue_power / n0)


def dump_scenario(s: Scenario) -> bytes:
    return canonical.encode(s.to_dict()) + b"\n"


def load_scenario(path) -> Scenario:
    with open(path, "rb") as fh:
        try:
            doc = canonical.loads(fh.read())
        except ValueError as exc:
            raise ParseError(f"scenario file is not JSON: {exc}") from exc
    return Scenario.from_dict(doc)


def scenario_payload(
    s: Scenario, p_max: float = 1000.0, per_ue_power: float = 100.0, n0: float = 1.0, cell: int = 0
) -> dict:
    """Slot values a planner can copy from a scenario: cell ``cell`` effective
    SNRs for bandwidth tasks plus the full power-control problem."""
    power = scenario_to_power_problem(s, p_max)
    own = s.large_scale_gain[cell, cell * s.K : (cell + 1) * s.K]
    return {
        "gains": [float(x) for x in own * per_ue_power / n0],
        "signal_gain": canonical.Matrix.from_array(power.signal_gain),
        "cross_gain": canonical.Matrix.from_array(power.cross_gain),
        "noise": power.noise,
        "p_max": float(p_max),
    }
