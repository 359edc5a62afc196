"""Decimation of the 1 kHz trajectory into sample packets."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import DomainError
from .trajectory import TICK_RATE_HZ, Trajectory

RATES_HZ = (10, 20, 50, 100, 200, 500, 1000)


@dataclass(frozen=True)
class SamplePacket:
    seq: int
    measure_tick: int
    angle_deg: float


@dataclass(frozen=True)
class PacketBatch:
    """Column view of a packet stream; the simulator's hot path uses this."""

    seq: np.ndarray
    measure_tick: np.ndarray
    angle_deg: np.ndarray

    def __len__(self):
        return self.seq.size

    def packets(self):
        return [
            SamplePacket(int(s), int(t), float(a))
            for s, t, a in zip(self.seq, self.measure_tick, self.angle_deg)
        ]


def check_rate(rate_hz):
    if rate_hz not in RATES_HZ:
        raise DomainError(f"sampling rate {rate_hz!r} Hz is not in {RATES_HZ}")
    return int(rate_hz)


def period_ticks(rate_hz):
    return TICK_RATE_HZ // check_rate(rate_hz)


def decimate_batch(traj: Trajectory, window, rate_hz, first_seq=0) -> PacketBatch:
    start, end = (int(w) for w in window)
    period = period_ticks(rate_hz)
    if not (0 <= start <= end <= len(traj)):
        raise DomainError(f"window [{start}, {end}) outside trajectory of {len(traj)} ticks")
    if (end - start) % period:
        raise DomainError(f"window length {end - start} is not a multiple of the {period} ms period")
    ticks = np.arange(start, end, period, dtype=np.int64)
    seq = np.arange(first_seq, first_seq + ticks.size, dtype=np.int64)
    return PacketBatch(seq, ticks, traj.samples[ticks])


def decimate(traj: Trajectory, window, rate_hz, first_seq=0):
    """One packet every ``1000 / rate_hz`` ticks of ``window``, starting at its first tick."""
    return decimate_batch(traj, window, rate_hz, first_seq).packets()
