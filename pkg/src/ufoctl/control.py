"""Piecewise-constant control trajectories, smoothing filter and control noise."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .gmon import AMPLITUDE_SLOTS, ControlKnobs, GmonModel

TRAJECTORY_VERSION = 1
JSON_KEYS = ("g", "d1", "d2", "f1", "f2", "p1", "p2")
NOISE_CHANNELS = ("eta", "g", "delta1", "delta2", "f1", "f2")


@dataclass(frozen=True)
class ControlTrajectory:
    """Knob values per step, stored as an (N, 7) read-only array.

    Column order follows ``gmon.KNOB_NAMES``; amplitudes in MHz, phases in rad.
    """

    dt_ns: float
    knobs: np.ndarray

    def __post_init__(self):
        k = np.array(self.knobs, dtype=float)
        if k.ndim != 2 or k.shape[1] != 7 or k.shape[0] < 1:
            raise ValueError("trajectory needs shape (N>=1, 7)")
        if not np.all(np.isfinite(k)):
            raise ValueError("non-finite knob value in trajectory")
        if not (np.isfinite(self.dt_ns) and self.dt_ns > 0):
            raise ValueError("dt_ns must be positive")
        k.setflags(write=False)
        object.__setattr__(self, "knobs", k)
        object.__setattr__(self, "dt_ns", float(self.dt_ns))

    @classmethod
    def from_steps(cls, steps, dt_ns: float = 1.0) -> "ControlTrajectory":
        return cls(dt_ns, np.array([s.as_array() for s in steps]))

    @classmethod
    def zeros(cls, n_steps: int, dt_ns: float = 1.0) -> "ControlTrajectory":
        return cls(dt_ns, np.zeros((n_steps, 7)))

    @property
    def steps(self) -> list:
        return [ControlKnobs.from_array(row) for row in self.knobs]

    @property
    def n_steps(self) -> int:
        return self.knobs.shape[0]

    def __len__(self) -> int:
        return self.n_steps

    @property
    def dt_us(self) -> float:
        return self.dt_ns * 1e-3

    @property
    def duration_ns(self) -> float:
        return self.dt_ns * self.n_steps

    @property
    def duration_us(self) -> float:
        return self.duration_ns * 1e-3

    def concat(self, other: "ControlTrajectory") -> "ControlTrajectory":
        if other.dt_ns != self.dt_ns:
            raise ValueError("cannot concatenate trajectories with different dt")
        return ControlTrajectory(self.dt_ns, np.vstack([self.knobs, other.knobs]))

    def prefix(self, n: int) -> "ControlTrajectory":
        return ControlTrajectory(self.dt_ns, self.knobs[:n])

    def to_dict(self) -> dict:
        steps = [{key: float(v) for key, v in zip(JSON_KEYS, row)} for row in self.knobs]
        return {"version": TRAJECTORY_VERSION, "dt_ns": self.dt_ns, "steps": steps}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "ControlTrajectory":
        if data.get("version") != TRAJECTORY_VERSION:
            raise ValueError(f"unsupported trajectory version {data.get('version')!r}")
        rows = [[float(step[key]) for key in JSON_KEYS] for step in data["steps"]]
        return cls(float(data["dt_ns"]), np.array(rows, dtype=float).reshape(-1, 7))

    @classmethod
    def from_json(cls, text: str) -> "ControlTrajectory":
        return cls.from_dict(json.loads(text))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path) -> "ControlTrajectory":
        with open(path) as fh:
            return cls.from_json(fh.read())


@dataclass(frozen=True)
class FilterConfig:
    """Two-pole normalised exponential smoothing filter."""

    bandwidth_mhz: float = 10.0
    dt_ns: float = 1.0

    def __post_init__(self):
        if not self.bandwidth_mhz > 0 or not self.dt_ns > 0:
            raise ValueError("bandwidth and dt must be positive")

    @property
    def sample_rate_mhz(self) -> float:
        return 1000.0 / self.dt_ns

    @property
    def alpha(self) -> float:
        return float(np.exp(-np.pi * self.bandwidth_mhz / self.sample_rate_mhz))

    @property
    def a1(self) -> float:
        return (1.0 - self.alpha) ** 2

    @property
    def b1(self) -> float:
        return -2.0 * self.alpha

    @property
    def b2(self) -> float:
        return self.alpha ** 2

    @property
    def dc_gain(self) -> float:
        return self.a1 / (1.0 + self.b1 + self.b2)


def _filter_values(proposed, prev, prev2, cfg: FilterConfig) -> np.ndarray:
    out = np.array(proposed, dtype=float, copy=True)
    amp = list(AMPLITUDE_SLOTS)
    out[..., amp] = (cfg.a1 * out[..., amp] - cfg.b1 * np.asarray(prev)[..., amp]
                     - cfg.b2 * np.asarray(prev2)[..., amp])
    return out


def filter_step(proposed: ControlKnobs, prev: ControlKnobs, prev2: ControlKnobs,
                cfg: FilterConfig) -> ControlKnobs:
    """One step of c_n = a1 c_rl - b1 c_{n-1} - b2 c_{n-2} on the amplitudes.

    Phases are taken from the proposal unchanged.
    """
    return ControlKnobs.from_array(
        _filter_values(proposed.as_array(), prev.as_array(), prev2.as_array(), cfg))


def filter_sequence(proposals: np.ndarray, cfg: FilterConfig,
                    history: np.ndarray | None = None) -> np.ndarray:
    """Filter an (N, 7) proposal array, starting from zero history by default."""
    proposals = np.asarray(proposals, dtype=float)
    hist = np.zeros((2, 7)) if history is None else np.asarray(history, dtype=float)
    prev2, prev = hist[0], hist[1]
    out = np.empty_like(proposals)
    for n, p in enumerate(proposals):
        out[n] = _filter_values(p, prev, prev2, cfg)
        prev2, prev = prev, out[n]
    return out


def filter_gain(freq_mhz: float, cfg: FilterConfig) -> float:
    freq = np.asarray(freq_mhz, dtype=float)
    if np.any(freq < 0) or np.any(freq > cfg.sample_rate_mhz / 2):
        raise ValueError("frequency outside [0, Nyquist]")
    w = 2 * np.pi * freq / cfg.sample_rate_mhz
    z = np.exp(-1j * w)
    gain = np.abs(cfg.a1 / (1.0 + cfg.b1 * z + cfg.b2 * z * z))
    return float(gain) if gain.ndim == 0 else gain


def _derive_seed(seed: int, *keys: int) -> int:
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


@dataclass(frozen=True)
class NoiseModel:
    """Zero-mean Gaussian amplitude noise with standard deviation ``sigma_mhz``."""

    sigma_mhz: float = 1.0
    seed: int = 0
    per_episode_eta: bool = False
    channels: tuple = field(default=NOISE_CHANNELS)

    def __post_init__(self):
        if not (np.isfinite(self.sigma_mhz) and self.sigma_mhz >= 0):
            raise ValueError("sigma_mhz must be >= 0")
        if tuple(self.channels) != NOISE_CHANNELS:
            raise ValueError("the perturbed channel set is fixed")

    def spawn(self, index: int) -> "NoiseModel":
        """Independent noise stream keyed by (seed, index)."""
        return NoiseModel(self.sigma_mhz, _derive_seed(self.seed, index), self.per_episode_eta)

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def draw_noise(rng: np.random.Generator, n_steps: int, sigma: float,
               per_episode_eta: bool = False) -> np.ndarray:
    """(N, 6) array of draws for (eta, g, delta1, delta2, f1, f2)."""
    draws = sigma * rng.standard_normal((n_steps, 6))
    if per_episode_eta and n_steps:
        draws[:, 0] = draws[0, 0]
    return draws


def perturb(traj: ControlTrajectory, model: GmonModel, noise: NoiseModel):
    """Add fresh Gaussian draws to every amplitude knob and to eta, per step.

    Returns the perturbed trajectory and the per-step eta sequence (MHz).
    """
    n = traj.n_steps
    if noise.sigma_mhz == 0:
        return traj, np.full(n, model.eta)
    draws = draw_noise(noise.rng(), n, noise.sigma_mhz, noise.per_episode_eta)
    knobs = np.array(traj.knobs, copy=True)
    knobs[:, list(AMPLITUDE_SLOTS)] += draws[:, 1:]
    return ControlTrajectory(traj.dt_ns, knobs), model.eta + draws[:, 0]


def boundary_values(traj: ControlTrajectory):
    """(g(0)^2, g(T)^2, f1(0)^2 + f2(0)^2, f1(T)^2 + f2(T)^2) in MHz^2."""
    first, last = traj.knobs[0], traj.knobs[-1]
    return (float(first[0] ** 2), float(last[0] ** 2),
            float(first[3] ** 2 + first[4] ** 2), float(last[3] ** 2 + last[4] ** 2))


def random_band_limited(n_steps: int, rng: np.random.Generator, *, dt_ns: float = 1.0,
                        bandwidth_mhz: float = 10.0, amplitude_mhz: float = 20.0,
                        n_tones: int = 4) -> ControlTrajectory:
    """Random smooth trajectory whose amplitude knobs contain only tones below
    ``bandwidth_mhz``.

    Each amplitude channel is a sum of ``n_tones`` sinusoids with random
    frequency, phase and weight, rescaled so its peak magnitude is a uniform
    draw in [amplitude/2, amplitude]. Drive phases are random constants.
    """
    t_us = (np.arange(n_steps) + 0.5) * dt_ns * 1e-3
    knobs = np.zeros((n_steps, 7))
    for c in AMPLITUDE_SLOTS:
        freqs = rng.uniform(0.0, bandwidth_mhz, n_tones)
        phases = rng.uniform(0.0, 2 * np.pi, n_tones)
        weights = rng.uniform(0.2, 1.0, n_tones)
        sig = (weights[:, None] * np.sin(2 * np.pi * freqs[:, None] * t_us[None, :]
                                         + phases[:, None])).sum(axis=0)
        peak = np.max(np.abs(sig))
        scale = rng.uniform(0.5, 1.0) * amplitude_mhz
        knobs[:, c] = sig * (scale / peak) if peak > 0 else 0.0
    knobs[:, 5:] = rng.uniform(0.0, 2 * np.pi, 2)
    return ControlTrajectory(dt_ns, knobs)
