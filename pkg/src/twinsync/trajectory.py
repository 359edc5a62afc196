"""Ground-truth joint-angle trajectories on a 1 ms tick grid."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import _rng
from .exceptions import ConfigError, LoadError
from .validation import check_member, check_non_negative_int, check_range

TICK_RATE_HZ = 1000
MAX_ABS_DEG = 360.0
MAX_FREQUENCY_HZ = 10.0
KINDS = ("sinusoid_mix", "min_jerk_waypoints", "csv_replay")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Angle of one joint in degrees; ``samples[i]`` is the value at tick ``i``."""

    samples: np.ndarray
    tick_rate_hz: int = TICK_RATE_HZ

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64)
        if self.tick_rate_hz != TICK_RATE_HZ:
            raise ValueError("tick_rate_hz is fixed at 1000")
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("a trajectory needs at least one sample")
        if not np.all(np.isfinite(arr)) or np.max(np.abs(arr)) > MAX_ABS_DEG:
            raise ValueError("trajectory samples must be finite and within +-360 deg")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    def __len__(self):
        return self.samples.size

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return np.array_equal(self.samples, other.samples)

    __hash__ = None

    @property
    def duration_ms(self):
        return self.samples.size


@dataclass(frozen=True)
class TrajectoryConfig:
    kind: str = "sinusoid_mix"
    duration_ms: int = 30_000
    seed: int = 0
    # sinusoid_mix
    n_components: int = 3
    amplitude_deg: tuple = (5.0, 20.0)
    frequency_hz: tuple = (0.1, 0.6)
    phase_rad: tuple = (0.0, 2 * math.pi)
    # min_jerk_waypoints
    n_waypoints: int = 20
    dwell_ms: int = 200
    waypoint_deg: tuple = (-60.0, 60.0)
    waypoints: tuple | None = None
    # csv_replay
    path: str | None = None

    def __post_init__(self):
        check_member(self.kind, KINDS, "trajectory.kind")
        check_non_negative_int(self.seed % (1 << 64), "trajectory.seed")
        if self.kind != "csv_replay" and self.duration_ms < 1000:
            raise ConfigError(f"trajectory.duration_ms must be >= 1000, got {self.duration_ms}")
        if self.kind == "sinusoid_mix":
            if self.n_components < 1:
                raise ConfigError("trajectory.n_components must be >= 1")
            _, amp_hi = check_range(self.amplitude_deg, "trajectory.amplitude_deg", 0.0)
            check_range(self.frequency_hz, "trajectory.frequency_hz", 0.0, MAX_FREQUENCY_HZ)
            check_range(self.phase_rad, "trajectory.phase_rad")
            if amp_hi * self.n_components > MAX_ABS_DEG:
                raise ConfigError("sum of component amplitudes may exceed 360 deg")
        elif self.kind == "min_jerk_waypoints":
            if self.waypoints is not None:
                if len(self.waypoints) == 0:
                    raise ConfigError("trajectory.waypoints is empty")
                if max(abs(float(w)) for w in self.waypoints) > MAX_ABS_DEG:
                    raise ConfigError("waypoints must lie within +-360 deg")
            elif self.n_waypoints < 1:
                raise ConfigError("trajectory.n_waypoints must be >= 1 (empty waypoint set)")
            check_range(self.waypoint_deg, "trajectory.waypoint_deg", -MAX_ABS_DEG, MAX_ABS_DEG)
            check_non_negative_int(self.dwell_ms, "trajectory.dwell_ms")
            n = len(self.waypoints) if self.waypoints is not None else self.n_waypoints
            if n > 1:
                move_ms = (self.duration_ms - 1) // (n - 1) - self.dwell_ms
                # a min-jerk move shorter than 100 ms has content above 10 Hz
                if move_ms < 100:
                    raise ConfigError("waypoints too dense: each move needs >= 100 ms after dwell")
        elif self.path is None:
            raise ConfigError("csv_replay needs trajectory.path")

    def with_seed(self, seed):
        return replace(self, seed=int(seed))


def min_jerk_profile(s):
    """Normalized minimum-jerk position for phase ``s`` in [0, 1]."""
    s = np.clip(s, 0.0, 1.0)
    return s**3 * (10.0 - 15.0 * s + 6.0 * s**2)


def waypoint_ticks(duration_ms, n):
    if n == 1:
        return np.array([0])
    return np.array([(k * (duration_ms - 1)) // (n - 1) for k in range(n)])


def _sinusoid_mix(cfg):
    rng = _rng.generator(cfg.seed, "trajectory", "sinusoid_mix")
    k = cfg.n_components
    amps = rng.uniform(*cfg.amplitude_deg, size=k)
    # one frequency per equal-width band: keeps episodes statistically alike
    lo, hi = cfg.frequency_hz
    freqs = lo + (np.arange(k) + rng.uniform(size=k)) * (hi - lo) / k
    phases = rng.uniform(*cfg.phase_rad, size=cfg.n_components)
    t = np.arange(cfg.duration_ms) / TICK_RATE_HZ
    out = np.zeros(cfg.duration_ms)
    for a, f, p in zip(amps, freqs, phases):
        out += a * np.sin(2.0 * math.pi * f * t + p)
    return out


def _min_jerk(cfg):
    if cfg.waypoints is not None:
        points = np.asarray(cfg.waypoints, dtype=np.float64)
    else:
        rng = _rng.generator(cfg.seed, "trajectory", "min_jerk")
        points = rng.uniform(*cfg.waypoint_deg, size=cfg.n_waypoints)
    out = np.full(cfg.duration_ms, points[-1])
    ticks = waypoint_ticks(cfg.duration_ms, points.size)
    for k in range(points.size - 1):
        t0, t1 = ticks[k], ticks[k + 1]
        move_start = t0 + cfg.dwell_ms
        seg = np.arange(t0, t1)
        s = (seg - move_start) / (t1 - move_start)
        out[t0:t1] = points[k] + (points[k + 1] - points[k]) * min_jerk_profile(s)
    return out


def generate(config: TrajectoryConfig) -> Trajectory:
    """Deterministic trajectory for ``config`` (same config and seed, same samples)."""
    if config.kind == "sinusoid_mix":
        return Trajectory(_sinusoid_mix(config))
    if config.kind == "min_jerk_waypoints":
        return Trajectory(_min_jerk(config))
    traj = load_csv(config.path)
    if config.duration_ms and config.duration_ms < len(traj):
        return Trajectory(traj.samples[: config.duration_ms])
    return traj


def load_csv(path) -> Trajectory:
    """Read one angle in degrees per line, no header."""
    path = Path(path)
    values = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                value = float(text)
            except ValueError:
                raise LoadError(f"cannot parse {text!r} as an angle", line=lineno) from None
            if not math.isfinite(value) or abs(value) > MAX_ABS_DEG:
                raise LoadError(f"angle {text!r} is not finite or exceeds 360 deg", line=lineno)
            values.append(value)
    if not values:
        raise LoadError(f"{path} contains no samples")
    return Trajectory(np.array(values))


def save_csv(trajectory: Trajectory, path) -> None:
    with Path(path).open("w") as fh:
        for v in trajectory.samples:
            fh.write(f"{float(v)!r}\n")
