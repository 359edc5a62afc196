"""Lagrangian primal-dual tabular Q-learning over (sampling rate, horizon)."""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from . import __version__
from .exceptions import CheckpointMismatch, ConfigError, DomainError
from .metrics import ERROR_MODES, error_measure
from .predictor import HORIZONS_MS
from .sampling import RATES_HZ
from .validation import check_is_fitted, check_member, check_probability

N_ACTIONS = len(RATES_HZ) * len(HORIZONS_MS)
N_BINS = 24
MSE_FLOOR = 1e-7
MSE_CEIL = 10.0
CHECKPOINT_FORMAT = "twinsync-policy"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class Action:
    rate_hz: int
    horizon_ms: int

    @property
    def index(self):
        return RATES_HZ.index(self.rate_hz) * len(HORIZONS_MS) + HORIZONS_MS.index(self.horizon_ms)

    @classmethod
    def from_index(cls, index):
        if not 0 <= index < N_ACTIONS:
            raise DomainError(f"action index {index} outside [0, {N_ACTIONS})")
        r, h = divmod(int(index), len(HORIZONS_MS))
        return cls(RATES_HZ[r], HORIZONS_MS[h])

    def __str__(self):
        return f"{self.rate_hz}Hz/{self.horizon_ms}ms"


ACTIONS = tuple(Action.from_index(i) for i in range(N_ACTIONS))


def bin_edges(n_bins=N_BINS, lo=MSE_FLOOR, hi=MSE_CEIL):
    """Interior edges: ``n_bins - 1`` log-spaced values from ``lo`` to ``hi``.

    Bin 0 collects everything below ``lo`` and bin ``n_bins - 1`` everything
    at or above ``hi``.
    """
    return np.logspace(np.log10(lo), np.log10(hi), n_bins - 1)


_EDGES = bin_edges()


def encode_state(mse_deg2, edges=_EDGES):
    if not mse_deg2 >= 0:
        raise DomainError(f"MSE must be non-negative, got {mse_deg2!r}")
    return int(np.searchsorted(edges, mse_deg2, side="right"))


@dataclass(frozen=True)
class DualState:
    lam: float = 1.0
    kappa: float = 50.0
    e_max: float = 0.007
    lambda_max: float = 1e4


def lagrangian_cost(load_norm, error, dual: DualState):
    """Scalarized per-epoch cost ``load + lambda * error``."""
    return load_norm + dual.lam * error


def update_dual(dual: DualState, episode_error):
    """Projected dual ascent on the average tracking-error constraint."""
    lam = dual.lam + dual.kappa * (episode_error - dual.e_max)
    return replace(dual, lam=min(max(0.0, lam), dual.lambda_max))


class QTable:
    def __init__(self, n_states=N_BINS, n_actions=N_ACTIONS):
        self.values = np.zeros((n_states, n_actions))
        self.visits = np.zeros((n_states, n_actions), dtype=np.int64)

    def copy(self):
        out = QTable(*self.values.shape)
        out.values[...] = self.values
        out.visits[...] = self.visits
        return out

    def greedy(self, state):
        # np.argmin returns the first minimum: lowest action index wins ties
        return int(np.argmin(self.values[state]))


def select_action(q: QTable, state, epsilon, rng: np.random.Generator):
    """Epsilon-greedy on cost-to-go; returns an action index."""
    if epsilon > 0.0 and rng.random() < epsilon:
        return int(rng.integers(q.values.shape[1]))
    return q.greedy(state)


def update_q(q: QTable, state, action, cost, next_state, alpha, gamma):
    """One-step backup toward ``cost + gamma * min_b Q(next_state, b)``, in place."""
    target = cost + gamma * q.values[next_state].min()
    q.values[state, action] = (1.0 - alpha) * q.values[state, action] + alpha * target
    q.visits[state, action] += 1
    return q


def update_q_split(q: QTable, q_load, q_err, lam, state, action, load, error, next_state, alpha, gamma):
    """``update_q`` on ``Q = q_load + lam * q_err`` with the two parts kept apart.

    Both parts bootstrap through the action that is greedy for the combined
    table, so for a fixed ``lam`` the combined entries evolve exactly as
    under ``update_q`` with cost ``load + lam * error``. Keeping the parts
    lets a new multiplier reprice every entry at once.
    """
    b = q.greedy(next_state)
    q_load[state, action] += alpha * (load + gamma * q_load[next_state, b] - q_load[state, action])
    q_err[state, action] += alpha * (error + gamma * q_err[next_state, b] - q_err[state, action])
    q.values[state, action] = q_load[state, action] + lam * q_err[state, action]
    q.visits[state, action] += 1
    return q


class PrimalDualQAgent(BaseEstimator):
    """Constrained Q-learning agent for the rate/horizon choice.

    Minimizes average normalized load subject to the average tracking error
    staying below ``e_max``. The per-epoch cost is ``load + lambda * error``
    and ``lambda`` is raised or lowered once per episode by projected dual
    ascent on the episode's average error.

    ``fit`` trains against an environment exposing ``run_episode``;
    ``predict`` maps observed epoch MSE values to greedy action indices.
    """

    def __init__(
        self,
        e_max=0.007,
        error_mode="mse",
        gamma=0.9,
        alpha=0.1,
        alpha_schedule="constant",
        epsilon_start=0.5,
        epsilon_end=0.02,
        kappa=50.0,
        lambda0=1.0,
        lambda_max=1e4,
        mse_cap=MSE_CEIL,
        n_episodes=500,
        select_window=50,
        select_every=10,
        n_validation=20,
        dual_margin=0.0,
        dual_signal="greedy_mse",
        dual_burnin=0,
        q_mode="split",
        seed=0,
    ):
        self.e_max = e_max
        self.error_mode = error_mode
        self.gamma = gamma
        self.alpha = alpha
        self.alpha_schedule = alpha_schedule
        self.epsilon_start = epsilon_start
        self.epsilon_end = epsilon_end
        self.kappa = kappa
        self.lambda0 = lambda0
        self.lambda_max = lambda_max
        self.mse_cap = mse_cap
        self.n_episodes = n_episodes
        self.select_window = select_window
        self.select_every = select_every
        self.n_validation = n_validation
        self.dual_margin = dual_margin
        self.dual_signal = dual_signal
        self.dual_burnin = dual_burnin
        self.q_mode = q_mode
        self.seed = seed

    def _validate_params(self):
        check_member(self.error_mode, ERROR_MODES, "agent.error_mode")
        check_member(self.alpha_schedule, ("constant", "visits"), "agent.alpha_schedule")
        check_member(self.q_mode, ("split", "joint"), "agent.q_mode")
        check_member(self.dual_signal, ("avg_mse", "greedy_mse"), "agent.dual_signal")
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError("agent.alpha must lie in (0, 1]")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError("agent.gamma must lie in [0, 1)")
        check_probability(self.epsilon_start, "agent.epsilon_start")
        check_probability(self.epsilon_end, "agent.epsilon_end")
        if self.kappa < 0 or self.lambda0 < 0 or self.e_max < 0:
            raise ConfigError("agent.kappa, agent.lambda0 and e_max must be non-negative")
        if self.lambda0 > self.lambda_max:
            raise ConfigError("agent.lambda0 exceeds agent.lambda_max")
        if self.n_episodes < 1 or self.select_window < 1 or self.select_every < 1:
            raise ConfigError("agent.n_episodes, agent.select_window and agent.select_every must be positive")
        if self.n_validation < 0:
            raise ConfigError("agent.n_validation must be non-negative")
        if not 0.0 <= self.dual_margin < 1.0:
            raise ConfigError("agent.dual_margin must lie in [0, 1)")

    # -- pieces used by the episode loop -------------------------------------

    def epsilon_at(self, episode):
        """Linear anneal from ``epsilon_start`` to ``epsilon_end`` over training."""
        if self.n_episodes == 1:
            return self.epsilon_end
        frac = min(episode / (self.n_episodes - 1), 1.0)
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)

    def error_of(self, mse_deg2):
        return error_measure(mse_deg2, self.error_mode)

    def epoch_cost(self, load_norm, mse_deg2):
        return lagrangian_cost(load_norm, self.clipped_error(mse_deg2), self.dual_)

    def clipped_error(self, mse_deg2):
        return min(self.error_of(mse_deg2), self.mse_cap)

    def learn(self, state, action, load_norm, mse_deg2, next_state):
        """Q backup for one epoch transition under the current multiplier."""
        alpha = self.alpha
        if self.alpha_schedule == "visits":
            alpha = max(self.alpha, 1.0 / (1 + self.q_.visits[state, action]))
        if self.q_mode == "joint":
            update_q(self.q_, state, action, self.epoch_cost(load_norm, mse_deg2), next_state,
                     alpha, self.gamma)
            return
        update_q_split(self.q_, self.q_load_, self.q_err_, self.dual_.lam, state, action,
                       load_norm, self.clipped_error(mse_deg2), next_state, alpha, self.gamma)

    def set_lambda(self, lam):
        self.dual_ = replace(self.dual_, lam=lam)
        if self.q_mode == "split":
            np.add(self.q_load_, lam * self.q_err_, out=self.q_.values)

    @property
    def target_error(self):
        """Error level the multiplier steers toward: ``e_max`` less the safety margin."""
        return self.e_max * (1.0 - self.dual_margin)

    def q_bound(self):
        return (1.0 + self.lambda_max * self.mse_cap) / (1.0 - self.gamma)

    def init_tables(self):
        self._validate_params()
        self.q_ = QTable()
        # the load of an action is known before it is ever tried; only the
        # error part starts (optimistically) at zero
        load = np.array([a.rate_hz / 1000 for a in ACTIONS]) / (1.0 - self.gamma)
        self.q_load_ = np.broadcast_to(load, self.q_.values.shape).copy()
        self.q_err_ = np.zeros_like(self.q_.values)
        self.dual_ = DualState(self.lambda0, self.kappa, self.target_error, self.lambda_max)
        self.q_.values[...] = self.q_load_
        self.bin_edges_ = _EDGES.copy()
        return self

    def _snapshot(self):
        return self.q_.copy(), self.q_load_.copy(), self.q_err_.copy(), self.dual_.lam

    def _restore(self, snap):
        q, q_load, q_err, lam = snap
        self.q_, self.q_load_, self.q_err_ = q, q_load, q_err
        self.dual_ = replace(self.dual_, lam=lam)

    # -- estimator API ---------------------------------------------------------

    def fit(self, env, y=None, callback=None):
        """Train against ``env`` (see ``twinsync.sim.Environment``).

        Policy snapshots are taken every ``select_every`` episodes within the
        last ``select_window``. Each is replayed greedily on ``n_validation``
        held-out episodes; the lowest-load snapshot whose validation error
        meets ``target_error`` is kept (the lowest-error one if none does).
        With ``n_validation=0`` the final tables are kept.
        """
        from ._rng import generator

        self.init_tables()
        rng = generator(self.seed, "agent", "exploration")
        self.history_ = []
        snapshots = []
        first = max(self.n_episodes - self.select_window, 0)
        for episode in range(self.n_episodes):
            eps = self.epsilon_at(episode)
            log = env.run_episode(self, episode, epsilon=eps, rng=rng, learn=True)
            signal = self.error_of(getattr(log, self.dual_signal))
            if episode >= self.dual_burnin:
                self.set_lambda(update_dual(self.dual_, signal).lam)
            if episode >= first and (self.n_episodes - 1 - episode) % self.select_every == 0:
                snapshots.append((episode, self._snapshot()))
            row = {
                "episode": episode,
                "avg_load": log.avg_load,
                "avg_mse": log.avg_mse,
                "lambda": self.dual_.lam,
                "epsilon": eps,
            }
            self.history_.append(row)
            if callback is not None:
                callback(row)
        self.selection_ = []
        if self.n_validation == 0:
            self.selected_episode_ = self.n_episodes - 1
            return self
        best = None
        for episode, snap in snapshots:
            self._restore(snap)
            load, err = env.validate(self, self.n_validation)
            err = self.error_of(err)
            self.selection_.append((episode, load, err))
            key = (0, load, err) if err <= self.target_error else (1, err, load)
            if best is None or key < best[0]:
                best = (key, snap, episode)
        _, snap, self.selected_episode_ = best
        self._restore(snap)
        return self

    def predict(self, X):
        """Greedy action index for each previous-epoch MSE in ``X``."""
        check_is_fitted(self, "q_")
        mses = np.asarray(X, dtype=np.float64).reshape(-1)
        return np.array([self.q_.greedy(encode_state(m, self.bin_edges_)) for m in mses])

    def act(self, state, epsilon, rng):
        return select_action(self.q_, state, epsilon, rng)

    # -- checkpoint ------------------------------------------------------------

    def to_dict(self, config_hash=""):
        check_is_fitted(self, "q_")
        rows = lambda a: [[float(v) for v in row] for row in a]  # noqa: E731
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "tool_version": __version__,
            "config_hash": config_hash,
            "params": self.get_params(),
            "actions": [[a.rate_hz, a.horizon_ms] for a in ACTIONS],
            "bin_edges": [float(e) for e in self.bin_edges_],
            "lambda": float(self.dual_.lam),
            "q_values": rows(self.q_.values),
            "q_load": rows(self.q_load_),
            "q_err": rows(self.q_err_),
            "visits": [[int(v) for v in row] for row in self.q_.visits],
        }

    def save(self, path, config_hash=""):
        text = json.dumps(self.to_dict(config_hash), indent=1, sort_keys=True)
        Path(path).write_text(text + "\n")

    @classmethod
    def from_dict(cls, data, expected_hash=None):
        if data.get("format") != CHECKPOINT_FORMAT or data.get("version") != CHECKPOINT_VERSION:
            raise CheckpointMismatch("not a version-1 twinsync policy checkpoint")
        if expected_hash is not None and data["config_hash"] != expected_hash:
            raise CheckpointMismatch(
                f"checkpoint config hash {data['config_hash']} != config hash {expected_hash}"
            )
        agent = cls(**data["params"])
        agent.init_tables()
        agent.q_.values[...] = np.array(data["q_values"], dtype=np.float64)
        agent.q_load_[...] = np.array(data["q_load"], dtype=np.float64)
        agent.q_err_[...] = np.array(data["q_err"], dtype=np.float64)
        agent.q_.visits[...] = np.array(data["visits"], dtype=np.int64)
        agent.bin_edges_ = np.array(data["bin_edges"], dtype=np.float64)
        agent.dual_ = replace(agent.dual_, lam=float(data["lambda"]))
        agent.config_hash_ = data["config_hash"]
        return agent

    @classmethod
    def load(cls, path, expected_hash=None):
        return cls.from_dict(json.loads(Path(path).read_text()), expected_hash)
