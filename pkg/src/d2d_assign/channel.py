"""Network topology and channel gain generation.

Distances are in km. Gains are linear and combine distance path loss,
log-normal shadowing and Rayleigh (exponential power) fading, each drawn
independently per link.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

# clamp for d**-alpha, 1 m
D_MIN_KM = 1e-3

DEFAULT_BS_POSITIONS = ((0.25, 0.25), (-0.25, 0.25), (-0.25, -0.25), (0.25, -0.25))


@dataclass(frozen=True)
class SimConfig:
    num_users: int = 50
    num_bs: int = 4
    bs_positions: tuple = DEFAULT_BS_POSITIONS
    area_side: float = 1.0
    d2d_dist_range: tuple = (0.0, 0.2)
    path_loss_exponent: float = 4.0
    shadowing_sigma_db: float = 5.8
    noise_power: float = 1e-8
    tx_power_db: float = -5.0
    seed: int = 0
    rayleigh_fading: bool = True

    def __post_init__(self):
        # normalize list inputs coming from JSON/TOML
        object.__setattr__(self, "bs_positions",
                           tuple(tuple(float(c) for c in p) for p in self.bs_positions))
        object.__setattr__(self, "d2d_dist_range", tuple(float(d) for d in self.d2d_dist_range))
        self.validate()

    def validate(self) -> None:
        if self.num_users < 1 or self.num_bs < 1:
            raise ValueError("num_users and num_bs must be >= 1")
        lo, hi = self.d2d_dist_range
        if lo < 0 or lo > hi or (lo == hi and lo == 0):
            raise ValueError(f"invalid d2d_dist_range {self.d2d_dist_range}")
        if self.path_loss_exponent <= 0:
            raise ValueError("path_loss_exponent must be > 0")
        if self.noise_power <= 0:
            raise ValueError("noise_power must be > 0")
        if self.shadowing_sigma_db < 0:
            raise ValueError("shadowing_sigma_db must be >= 0")
        if len(self.bs_positions) != self.num_bs:
            raise ValueError(
                f"bs_positions has {len(self.bs_positions)} entries, expected {self.num_bs}")
        half = self.area_side / 2
        for x, y in self.bs_positions:
            if abs(x) > half or abs(y) > half:
                raise ValueError(f"BS position ({x}, {y}) outside the deployment area")

    @property
    def tx_power(self) -> float:
        """Per-user linear transmit power."""
        return 10.0 ** (self.tx_power_db / 10.0)

    def powers(self) -> np.ndarray:
        return np.full(self.num_users, self.tx_power)

    def with_(self, **changes) -> "SimConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["bs_positions"] = [list(p) for p in self.bs_positions]
        d["d2d_dist_range"] = list(self.d2d_dist_range)
        return d


def load_config(path: str | Path) -> SimConfig:
    """Read a SimConfig from a .json or .toml file.

    Unknown keys are rejected so typos don't silently fall back to defaults.
    """
    path = Path(path)
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # python < 3.11
            import tomli as tomllib
        with path.open("rb") as fh:
            data = tomllib.load(fh)
    else:
        with path.open() as fh:
            data = json.load(fh)
    known = {f.name for f in fields(SimConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "num_bs" not in data and "bs_positions" in data:
        data["num_bs"] = len(data["bs_positions"])
    return SimConfig(**data)


@dataclass(frozen=True)
class Topology:
    tx_positions: np.ndarray  # (M, 2)
    rx_positions: np.ndarray  # (M, 2)
    bs_positions: np.ndarray  # (N, 2)

    @property
    def num_users(self) -> int:
        return self.tx_positions.shape[0]

    @property
    def num_bs(self) -> int:
        return self.bs_positions.shape[0]

    def d2d_distances(self) -> np.ndarray:
        return np.linalg.norm(self.tx_positions - self.rx_positions, axis=1)

    def tx_bs_distances(self) -> np.ndarray:
        """(M, N) distances tx_i -> BS_j."""
        return _pairwise(self.tx_positions, self.bs_positions)

    def tx_rx_distances(self) -> np.ndarray:
        """(M, M) distances tx_i -> rx_k."""
        return _pairwise(self.tx_positions, self.rx_positions)


@dataclass(frozen=True)
class ChannelRealization:
    g: np.ndarray  # (M, N) tx_i -> BS_j
    h: np.ndarray  # (M, M) tx_i -> rx_k

    def __post_init__(self):
        for name in ("g", "h"):
            a = getattr(self, name)
            if not (np.all(np.isfinite(a)) and np.all(a > 0)):
                raise ValueError(f"channel gains {name} must be strictly positive and finite")


@dataclass
class ChannelStreams:
    """Independent RNG streams for one trial, one per draw class.

    Keeping placement, shadowing and fading on separate streams means that
    switching shadowing or fading off leaves the other draws untouched.
    """
    placement: np.random.Generator
    shadow_g: np.random.Generator
    shadow_h: np.random.Generator
    fade_g: np.random.Generator
    fade_h: np.random.Generator

    _ORDER = ("placement", "shadow_g", "shadow_h", "fade_g", "fade_h")

    @classmethod
    def from_seed_sequence(cls, ss: np.random.SeedSequence) -> "ChannelStreams":
        children = ss.spawn(len(cls._ORDER))
        return cls(*(np.random.default_rng(c) for c in children))

    @classmethod
    def for_trial(cls, seed: int, trial: int) -> "ChannelStreams":
        return cls.from_seed_sequence(np.random.SeedSequence(seed, spawn_key=(trial,)))

    @classmethod
    def from_generator(cls, rng: np.random.Generator) -> "ChannelStreams":
        return cls(*rng.spawn(len(cls._ORDER)))


def _pairwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)


def _as_streams(rng) -> ChannelStreams:
    if isinstance(rng, ChannelStreams):
        return rng
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    return ChannelStreams.from_generator(rng)


def place_nodes(config: SimConfig, rng) -> Topology:
    """Drop M tx uniformly in the square and each rx at a random offset.

    The rx distance is uniform over ``d2d_dist_range`` and the angle uniform
    on [0, 2pi). Receivers are allowed to land outside the square.
    ``rng`` may be a Generator or a ChannelStreams; only the placement
    stream is consumed.
    """
    if isinstance(rng, ChannelStreams):
        gen = rng.placement
    else:
        gen = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    m = config.num_users
    half = config.area_side / 2
    tx = gen.uniform(-half, half, size=(m, 2))
    lo, hi = config.d2d_dist_range
    dist = gen.uniform(lo, hi, size=m) if hi > lo else np.full(m, lo)
    theta = gen.uniform(0.0, 2 * np.pi, size=m)
    rx = tx + dist[:, None] * np.column_stack((np.cos(theta), np.sin(theta)))
    bs = np.array(config.bs_positions, dtype=float).reshape(config.num_bs, 2)
    return Topology(tx, rx, bs)


def path_loss(d, alpha: float, d_min: float = D_MIN_KM):
    """Distance path loss max(d, d_min)**-alpha."""
    return np.maximum(np.asarray(d, dtype=float), d_min) ** (-alpha)


def shadowing(rng: np.random.Generator, sigma_db: float, size) -> np.ndarray:
    """Log-normal shadowing factor 10**(X/10), X ~ N(0, sigma_db**2)."""
    if sigma_db == 0:
        return np.ones(size)
    return 10.0 ** (rng.normal(0.0, sigma_db, size=size) / 10.0)


def rayleigh_power(rng: np.random.Generator, size) -> np.ndarray:
    """|Z|**2 for Z ~ CN(0, 1): unit-mean exponential power."""
    re = rng.standard_normal(size)
    im = rng.standard_normal(size)
    return (re * re + im * im) / 2.0


def draw_gains(topology: Topology, config: SimConfig, rng) -> ChannelRealization:
    """Draw one block of g (tx->BS) and h (tx->rx) gains."""
    streams = _as_streams(rng)
    alpha = config.path_loss_exponent
    d_g = topology.tx_bs_distances()
    d_h = topology.tx_rx_distances()

    g = path_loss(d_g, alpha) * shadowing(streams.shadow_g, config.shadowing_sigma_db, d_g.shape)
    h = path_loss(d_h, alpha) * shadowing(streams.shadow_h, config.shadowing_sigma_db, d_h.shape)
    if config.rayleigh_fading:
        g = g * rayleigh_power(streams.fade_g, d_g.shape)
        h = h * rayleigh_power(streams.fade_h, d_h.shape)
    return ChannelRealization(g, h)


def realize(config: SimConfig, trial: int) -> tuple[Topology, ChannelRealization]:
    """Topology and gains for one trial, seeded by (config.seed, trial)."""
    streams = ChannelStreams.for_trial(config.seed, trial)
    topo = place_nodes(config, streams)
    return topo, draw_gains(topo, config, streams)
