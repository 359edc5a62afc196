"""Bernoulli-loss, uniform-jitter packet channel.

Loss and jitter draws come from separate counter-based streams keyed by the
packet's sequence number, so a packet's fate does not depend on which other
packets were sent, and changing ``p_loss`` leaves every jitter draw alone.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _rng
from .sampling import PacketBatch, SamplePacket
from .validation import check_non_negative_int, check_probability

LOSS_TAG = "channel.loss"
JITTER_TAG = "channel.jitter"


@dataclass(frozen=True)
class ChannelConfig:
    p_loss: float = 0.0
    base_delay_ms: int = 10
    jitter_ms: int = 5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "p_loss", check_probability(self.p_loss, "channel.p_loss"))
        check_non_negative_int(self.base_delay_ms, "channel.base_delay_ms")
        check_non_negative_int(self.jitter_ms, "channel.jitter_ms")


@dataclass(frozen=True)
class Lost:
    pass


@dataclass(frozen=True)
class Delivered:
    arrival_tick: int


LOST = Lost()


def loss_mask(seqs, cfg: ChannelConfig) -> np.ndarray:
    """True where the packet with that sequence number is dropped."""
    return _rng.uniform(cfg.seed, seqs, LOSS_TAG) < cfg.p_loss


def jitter_draws(seqs, cfg: ChannelConfig) -> np.ndarray:
    if cfg.jitter_ms == 0:
        return np.zeros(np.shape(seqs), dtype=np.int64)
    return _rng.integers(cfg.seed, seqs, JITTER_TAG, cfg.jitter_ms + 1)


def transmit(pkt: SamplePacket, cfg: ChannelConfig):
    if loss_mask([pkt.seq], cfg)[0]:
        return LOST
    delay = cfg.base_delay_ms + int(jitter_draws([pkt.seq], cfg)[0])
    return Delivered(pkt.measure_tick + delay)


def transmit_batch(batch: PacketBatch, cfg: ChannelConfig):
    """Vectorized ``transmit``: returns ``(lost_mask, arrival_ticks)``.

    Arrival ticks are reported for every packet; entries under the mask are
    meaningless.
    """
    lost = loss_mask(batch.seq, cfg)
    arrival = batch.measure_tick + cfg.base_delay_ms + jitter_draws(batch.seq, cfg)
    return lost, arrival


def simulate_link(packets, cfg: ChannelConfig):
    """Surviving packets as ``(arrival_tick, packet)``, sorted by arrival then seq."""
    out = []
    for pkt in packets:
        outcome = transmit(pkt, cfg)
        if isinstance(outcome, Delivered):
            out.append((outcome.arrival_tick, pkt))
    out.sort(key=lambda item: (item[0], item[1].seq))
    return out
