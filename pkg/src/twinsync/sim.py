"""Closed-loop synchronization simulator: per epoch, the chosen action drives
decimation, the channel, twin-side prediction and the metrics that feed the
agent."""
from __future__ import annotations

import heapq
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from .agent import ACTIONS, Action, PrimalDualQAgent, encode_state
from .channel import ChannelConfig, transmit_batch
from .exceptions import CheckpointMismatch, ConfigError, EpisodeEnd
from .metrics import EpochMetrics, normalized_load
from .predictor import TwinPredictor
from .sampling import decimate_batch
from .trajectory import Trajectory, generate


@dataclass
class World:
    """Mutable per-episode simulator state; owned by a single episode."""

    trajectory: Trajectory
    channel: ChannelConfig
    predictor: TwinPredictor
    epoch_ms: int = 100
    warmup_ms: int = 500
    cursor: int = 0
    next_seq: int = 0
    epoch_index: int = 0
    first_arrival: int | None = None
    pending: list = field(default_factory=list)
    sent: int = 0
    lost: int = 0
    delivered: int = 0


@dataclass(frozen=True)
class EpochResult:
    epoch_index: int
    action: Action
    metrics: EpochMetrics
    state_before: int
    state_after: int
    warmup: bool
    twin: np.ndarray = field(repr=False, compare=False, default=None)


@dataclass
class EpisodeLog:
    epochs: list
    avg_load: float
    avg_mse: float
    lam: float
    seed: int
    config_hash: str
    packets_sent: int = 0
    packets_lost: int = 0

    def rows(self):
        for e in self.epochs:
            yield (
                e.epoch_index,
                e.action.rate_hz,
                e.action.horizon_ms,
                e.metrics.packets_sent,
                e.metrics.load_norm,
                e.metrics.mse_deg2,
                e.metrics.included_ticks,
                e.state_before,
                e.state_after,
                int(e.warmup),
            )


def make_world(cfg, episode_seed, p_loss=None, trajectory=None):
    traj = trajectory
    if traj is None:
        traj = generate(cfg.trajectory_config(_rng.derive_seed(episode_seed, "trajectory")))
    if len(traj) < cfg.episode_ms:
        raise ConfigError(f"trajectory has {len(traj)} ticks, episode needs {cfg.episode_ms}")
    p = cfg["predictor"]
    predictor = TwinPredictor(p["method"], p["ar_order"], p["window"], p["ridge"]).reset()
    channel = cfg.channel_config(_rng.derive_seed(episode_seed, "channel"), p_loss)
    return World(traj, channel, predictor, cfg.epoch_ms, cfg.warmup_ms)


def run_epoch(world: World, action: Action, state_before=0) -> EpochResult:
    """Advance ``world`` by one epoch under ``action``.

    Packets are decimated at the epoch's rate from its first tick, pushed
    through the channel, and delivered in (arrival tick, seq) order. The twin
    shows, at each tick, the newest history extrapolated by the action's
    horizon; a value changes only when an arrival is accepted. Survivors
    arriving after the epoch stay queued for later epochs.
    """
    t0 = world.cursor
    t1 = t0 + world.epoch_ms
    if t1 > len(world.trajectory):
        raise EpisodeEnd(f"trajectory exhausted at tick {t0}")
    pred = world.predictor
    pred.period_ms = 1000 // action.rate_hz
    horizon = action.horizon_ms

    batch = decimate_batch(world.trajectory, (t0, t1), action.rate_hz, world.next_seq)
    world.next_seq += len(batch)
    lost, arrival = transmit_batch(batch, world.channel)
    keep = ~lost
    n_lost = int(lost.sum())
    world.sent += len(batch)
    world.lost += n_lost
    world.delivered += len(batch) - n_lost
    pending = world.pending
    for item in zip(arrival[keep].tolist(), batch.seq[keep].tolist(),
                    batch.measure_tick[keep].tolist(), batch.angle_deg[keep].tolist()):
        heapq.heappush(pending, item)

    starts = [0]
    values = [pred.twin_value(horizon)]
    while pending and pending[0][0] < t1:
        arr, _, mtick, angle = heapq.heappop(pending)
        if not pred.push(mtick, angle):
            continue
        if world.first_arrival is None:
            world.first_arrival = arr
        offset = arr - t0
        value = pred.twin_value(horizon)
        if offset == starts[-1]:
            values[-1] = value
        else:
            starts.append(offset)
            values.append(value)
    starts.append(world.epoch_ms)
    twin = np.repeat(np.array(values), np.diff(starts))

    truth = world.trajectory.samples[t0:t1]
    first = world.first_arrival
    skip = world.epoch_ms if first is None else min(max(first - t0, 0), world.epoch_ms)
    diff = truth[skip:] - twin[skip:]
    included = diff.size
    mse = float(np.dot(diff, diff) / included) if included else 0.0
    warmup = t0 < world.warmup_ms
    metrics = EpochMetrics(
        mse_deg2=mse,
        packets_sent=len(batch),
        load_norm=normalized_load(len(batch), world.epoch_ms),
        included_ticks=0 if warmup else included,
    )
    state_after = encode_state(mse) if included else state_before
    result = EpochResult(world.epoch_index, action, metrics, state_before, state_after, warmup, twin)
    world.cursor = t1
    world.epoch_index += 1
    return result


# -- policies -------------------------------------------------------------------


class FixedPolicy:
    """Plays the same (rate, horizon) every epoch."""

    def __init__(self, action):
        self.action = action if isinstance(action, Action) else ACTIONS[action]

    def act(self, state, epsilon, rng):
        return self.action.index


class CyclicPolicy:
    """Cycles through a list of actions, one per epoch, ignoring the state."""

    def __init__(self, actions):
        self.actions = [a if isinstance(a, Action) else ACTIONS[a] for a in actions]
        self._i = 0

    def act(self, state, epsilon, rng):
        a = self.actions[self._i % len(self.actions)]
        self._i += 1
        return a.index


# -- episodes -------------------------------------------------------------------


def run_episode(cfg, policy, seed, *, p_loss=None, epsilon=0.0, rng=None, learn=False,
                trajectory=None, keep_twin=False) -> EpisodeLog:
    """Chain epochs over one episode.

    With ``learn=True`` the policy must be a ``PrimalDualQAgent``; every
    non-warm-up epoch then triggers one Q backup. The dual step is left to
    the caller since it happens once per episode.
    """
    world = make_world(cfg, seed, p_loss, trajectory)
    n_epochs = cfg.episode_ms // cfg.epoch_ms
    if learn and not isinstance(policy, PrimalDualQAgent):
        raise ConfigError("learning requires a PrimalDualQAgent")
    state = 0
    epochs = []
    greedy_mse = []
    prev_greedy = True
    for _ in range(n_epochs):
        a = policy.act(state, epsilon, rng)
        greedy = not learn or a == policy.q_.greedy(state)
        res = run_epoch(world, ACTIONS[a], state)
        # an exploratory epoch also spoils the next one through stale twin data
        if greedy and prev_greedy and res.metrics.included_ticks:
            greedy_mse.append(res.metrics.mse_deg2)
        prev_greedy = greedy
        if learn and not res.warmup:
            policy.learn(state, a, res.metrics.load_norm, res.metrics.mse_deg2, res.state_after)
        if not keep_twin:
            res = EpochResult(res.epoch_index, res.action, res.metrics, res.state_before,
                              res.state_after, res.warmup)
        epochs.append(res)
        state = res.state_after
    scored = [e.metrics.mse_deg2 for e in epochs if e.metrics.included_ticks]
    avg_mse = float(np.mean(scored)) if scored else math.nan
    # total packets over total time: exact for any mix of per-epoch rates
    avg_load = normalized_load(world.sent, n_epochs * cfg.epoch_ms)
    lam = policy.dual_.lam if isinstance(policy, PrimalDualQAgent) and hasattr(policy, "dual_") else math.nan
    log = EpisodeLog(epochs, avg_load, avg_mse, lam, seed, cfg.config_hash, world.sent, world.lost)
    log.greedy_mse = float(np.mean(greedy_mse)) if greedy_mse else avg_mse
    return log


def episode_seed(cfg, family, index):
    return _rng.derive_seed(cfg.seed, family, index)


class Environment:
    """Training environment handed to ``PrimalDualQAgent.fit``."""

    def __init__(self, cfg, family="train"):
        self.cfg = cfg
        self.family = family

    def run_episode(self, agent, index, epsilon, rng, learn=True):
        return run_episode(self.cfg, agent, episode_seed(self.cfg, self.family, index),
                           epsilon=epsilon, rng=rng, learn=learn)

    def validate(self, agent, n_episodes):
        """Greedy replay on held-out seeds; returns ``(pooled load, mean MSE)``."""
        logs = [run_episode(self.cfg, agent, episode_seed(self.cfg, "validate", i))
                for i in range(n_episodes)]
        return _pooled_load(logs, self.cfg), float(np.mean([lg.avg_mse for lg in logs]))


def train(cfg, callback=None):
    """Train an agent under ``cfg``; returns ``(agent, learning_curve_rows)``."""
    agent = cfg.make_agent()
    agent.fit(Environment(cfg), callback=callback)
    agent.config_hash_ = cfg.config_hash
    return agent, agent.history_


# -- evaluation and sweeps -----------------------------------------------------


@dataclass(frozen=True)
class Summary:
    n_episodes: int
    mean_load: float
    std_load: float
    mean_mse: float
    std_mse: float
    e_max: float
    feasible: bool
    episodes: tuple = ()


def _pooled_load(logs, cfg):
    # equal-length episodes: pooled packets over pooled time is the mean load, without rounding drift
    return normalized_load(sum(lg.packets_sent for lg in logs), len(logs) * cfg.episode_ms)


def _summarize(logs, cfg):
    loads = np.array([lg.avg_load for lg in logs])
    mses = np.array([lg.avg_mse for lg in logs])
    mean_mse = float(mses.mean())
    mean_load = _pooled_load(logs, cfg)
    agent_probe = cfg.make_agent()
    return Summary(
        len(logs), mean_load, float(loads.std()), mean_mse, float(mses.std()),
        float(cfg["e_max"]), bool(agent_probe.error_of(mean_mse) <= float(cfg["e_max"])),
        tuple((lg.seed, lg.avg_load, lg.avg_mse) for lg in logs),
    )


def _eval_task(args):
    cfg, policy, seed, p_loss = args
    return run_episode(cfg, policy, seed, p_loss=p_loss)


def _map(fn, tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        # results come back in task order, never completion order
        return list(pool.map(fn, tasks))


def evaluate(policy, cfg, n_episodes=None, jobs=None, p_loss=None):
    """Greedy rollouts of a frozen policy on the evaluation seed family."""
    if isinstance(policy, PrimalDualQAgent):
        expected = getattr(policy, "config_hash_", None)
        if expected is not None and expected != cfg.config_hash:
            raise CheckpointMismatch(
                f"policy was trained under config {expected}, evaluation config is {cfg.config_hash}"
            )
    n = cfg["eval"]["n_episodes"] if n_episodes is None else n_episodes
    if n < 1:
        raise ConfigError("evaluation needs at least one episode")
    tasks = [(cfg, policy, episode_seed(cfg, "eval", i), p_loss) for i in range(n)]
    logs = _map(_eval_task, tasks, jobs or cfg["jobs"])
    return _summarize(logs, cfg)


@dataclass(frozen=True)
class TradeoffRow:
    rate_hz: int
    horizon_ms: int
    p_loss: float
    avg_mse: float
    avg_load: float


@dataclass(frozen=True)
class FrontierRow:
    e_budget: float
    p_loss: float
    min_load: float
    argmin_action: Action | None


@dataclass
class TradeoffTable:
    rows: list
    frontier: list

    def frontier_for(self, p_loss):
        return [f for f in self.frontier if f.p_loss == p_loss]

    def cell(self, action, p_loss):
        for r in self.rows:
            if r.rate_hz == action.rate_hz and r.horizon_ms == action.horizon_ms and r.p_loss == p_loss:
                return r
        raise KeyError((action, p_loss))


def _sweep_task(args):
    cfg, action_index, p_loss, n = args
    logs = [run_episode(cfg, FixedPolicy(action_index), episode_seed(cfg, "eval", i), p_loss=p_loss)
            for i in range(n)]
    return float(np.mean([lg.avg_mse for lg in logs])), _pooled_load(logs, cfg)


def pareto_frontier(rows, budgets, error_of=lambda m: m):
    """Minimum load subject to error <= budget, per p_loss, budgets ascending.

    Ties on load go to the lower error, then the lower action index.
    Infeasible budgets get ``min_load = inf`` and no action.
    """
    out = []
    for p_loss in sorted({r.p_loss for r in rows}):
        cells = [r for r in rows if r.p_loss == p_loss]
        for e in sorted(budgets):
            feasible = [r for r in cells if error_of(r.avg_mse) <= e]
            if not feasible:
                out.append(FrontierRow(float(e), p_loss, math.inf, None))
                continue
            best = min(feasible, key=lambda r: (r.avg_load, r.avg_mse, Action(r.rate_hz, r.horizon_ms).index))
            out.append(FrontierRow(float(e), p_loss, best.avg_load, Action(best.rate_hz, best.horizon_ms)))
    return out


def sweep_fixed_policies(cfg, jobs=None, p_losses=None, n_episodes=None):
    """Brute force over all 42 fixed actions x the configured p_loss values."""
    p_losses = list(cfg["sweep"]["p_loss"] if p_losses is None else p_losses)
    n = cfg["sweep"]["n_episodes"] if n_episodes is None else n_episodes
    tasks = [(cfg, a.index, float(p), n) for p in p_losses for a in ACTIONS]
    results = _map(_sweep_task, tasks, jobs or cfg["jobs"])
    rows = [TradeoffRow(ACTIONS[a].rate_hz, ACTIONS[a].horizon_ms, p, mse, load)
            for (_, a, p, _), (mse, load) in zip(tasks, results)]
    agent = cfg.make_agent()
    frontier = pareto_frontier(rows, cfg["sweep"]["budgets"], agent.error_of)
    return TradeoffTable(rows, frontier)


def oracle_min_feasible_load(table, e_max, p_loss, error_of=lambda m: m):
    feasible = [r for r in table.rows if r.p_loss == p_loss and error_of(r.avg_mse) <= e_max]
    return min((r.avg_load for r in feasible), default=math.inf)
