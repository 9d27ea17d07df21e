"""Double-DQN learner: replay buffer, epsilon-greedy exploration, decoupled
target computation, the training loop, and per-episode metrics.

A run draws every stochastic choice from one RNG stream seeded from the
config, in a fixed order: network init first, then per episode the initial
pose, then per step the exploration draw followed by (once training has
started) the replay sample. Runs with equal seeds are byte-identical.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import numpy as np

from lanedrive.qnet import Architecture, AdamState, QNet, default_arch, save_checkpoint

log = logging.getLogger("lanedrive.agent")


class TrainingDiverged(RuntimeError):
    """Non-finite loss encountered during training."""


@dataclass(eq=False)
class Transition:
    """One replay-buffer element. Identity semantics: two transitions are
    equal only if they are the same object."""

    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool


class ReplayBuffer:
    """Fixed-capacity ring of transitions; overwrites the oldest when full."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._data: list[Transition | None] = [None] * capacity
        self._cursor = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, t: Transition) -> None:
        self._data[self._cursor] = t
        self._cursor = (self._cursor + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def sample(self, n: int, rng: np.random.Generator) -> list[Transition]:
        """Uniform sampling with replacement; requires size >= n."""
        if self._size < n:
            raise ValueError(f"buffer holds {self._size} transitions, need {n}")
        idx = rng.integers(0, self._size, size=n)
        return [self._data[i] for i in idx]

    def contents(self) -> list[Transition]:
        return [t for t in self._data if t is not None]


@dataclass
class AgentConfig:
    gamma: float = 0.99
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_steps: int = 10_000
    buffer_capacity: int = 10_000
    batch_size: int = 64
    target_sync_interval: int = 1_000
    train_start: int = 1_000
    learning_rate: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.gamma <= 1.0):
            raise ValueError("gamma must lie in [0, 1]")
        if self.epsilon_end > self.epsilon_start:
            raise ValueError("epsilon_end must not exceed epsilon_start")
        for name in ("epsilon_decay_steps", "buffer_capacity", "batch_size",
                     "target_sync_interval", "train_start"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")


@dataclass
class EpisodeMetrics:
    episode: int
    steps: int
    total_reward: float
    discounted_return: float
    mean_loss: float
    epsilon: float
    laps: int


def select_action(q_values: np.ndarray, epsilon: float,
                  rng: np.random.Generator) -> int:
    """Epsilon-greedy: random with probability epsilon, else the argmax with
    ties broken toward the lowest index. Always consumes one uniform draw so
    the stream position does not depend on q_values."""
    q_values = np.asarray(q_values)
    if q_values.size == 0:
        raise ValueError("empty q_values")
    if not (0.0 <= epsilon <= 1.0):
        raise ValueError("epsilon must lie in [0, 1]")
    if rng.random() < epsilon:
        return int(rng.integers(0, q_values.size))
    return int(np.argmax(q_values))


def epsilon_at(step: int, config: AgentConfig) -> float:
    """Linear schedule from epsilon_start to epsilon_end over
    epsilon_decay_steps environment steps, constant afterwards."""
    frac = min(max(step, 0) / config.epsilon_decay_steps, 1.0)
    return config.epsilon_start + (config.epsilon_end - config.epsilon_start) * frac


def discounted_return(rewards, gamma: float) -> float:
    """Sum of gamma^k * rewards[k]; 0 for an empty list."""
    total = 0.0
    g = 1.0
    for r in rewards:
        total += g * r
        g *= gamma
    return total


def _states_to_input(states: np.ndarray) -> np.ndarray:
    """uint8 observations are normalized to [0, 1]; floats pass through."""
    arr = np.asarray(states)
    if arr.dtype == np.uint8:
        return arr.astype(np.float32) / 255.0
    return arr.astype(np.float32, copy=False)


def ddqn_targets(batch: list[Transition], online: QNet, target: QNet,
                 gamma: float) -> np.ndarray:
    """Double-DQN bootstrap targets as float64.

    The greedy action is chosen by the online network and evaluated by the
    target network: y = r + gamma * Q_target(s', argmax_a Q_online(s', a)),
    with y = r on terminal transitions.
    """
    if not (0.0 <= gamma <= 1.0):
        raise ValueError("gamma must lie in [0, 1]")
    next_states = _states_to_input(np.stack([t.next_state for t in batch]))
    q_online = online.forward_batch(next_states)
    q_target = target.forward_batch(next_states)
    if not (np.all(np.isfinite(q_online)) and np.all(np.isfinite(q_target))):
        raise FloatingPointError("non-finite Q values in target computation")
    a_star = np.argmax(q_online, axis=1)
    rewards = np.array([t.reward for t in batch], dtype=np.float64)
    done = np.array([t.done for t in batch], dtype=bool)
    bootstrap = q_target[np.arange(len(batch)), a_star].astype(np.float64)
    return np.where(done, rewards, rewards + gamma * bootstrap)


def _batch_arrays(batch: list[Transition]):
    states = _states_to_input(np.stack([t.state for t in batch]))
    actions = np.array([t.action for t in batch], dtype=np.int64)
    return states, actions


def _laps_completed(env, info: dict) -> int:
    total = getattr(getattr(env, "track", None), "total_length", None)
    progress = info.get("lap_progress_total")
    if total is None or progress is None:
        return 0
    return max(0, int(progress // total))


def train_loop(env, config: AgentConfig, episodes: int,
               arch: Architecture | None = None, net: QNet | None = None,
               checkpoint_dir: str | None = None, checkpoint_interval: int = 25,
               on_episode=None) -> tuple[QNet, list[EpisodeMetrics]]:
    """Run DDQN training for the given number of episodes.

    The env must follow the gym-style contract: observation_shape and
    n_actions attributes, reset() -> observation, step(action) -> result with
    observation/reward/done/info fields. One gradient step runs per env step
    once the buffer holds at least train_start transitions; the target net
    hard-copies every target_sync_interval steps.

    Environment failures abort after writing a checkpoint of the last
    episode boundary; a non-finite loss aborts with TrainingDiverged.
    """
    rng = np.random.default_rng(config.seed)
    if hasattr(env, "attach_rng"):
        env.attach_rng(rng)
    if net is None:
        if arch is None:
            arch = default_arch(env.observation_shape, env.n_actions)
        net = QNet(arch, rng=rng)
    target = net.clone()
    opt = AdamState(net)
    buffer = ReplayBuffer(config.buffer_capacity)
    metrics: list[EpisodeMetrics] = []
    global_step = 0

    def write_checkpoint(which, tag):
        if checkpoint_dir is not None:
            os.makedirs(checkpoint_dir, exist_ok=True)
            path = os.path.join(checkpoint_dir, f"ckpt_{tag}.ldqn")
            save_checkpoint(which, path)
            return path
        return None

    boundary_net = net.clone()
    for episode in range(episodes):
        try:
            obs = env.reset()
        except Exception:
            write_checkpoint(boundary_net, "abort")
            raise
        rewards: list[float] = []
        losses: list[float] = []
        done = False
        last_info: dict = {}
        while not done:
            eps = epsilon_at(global_step, config)
            q = net.forward(_states_to_input(obs))
            action = select_action(q, eps, rng)
            try:
                result = env.step(action)
            except Exception:
                write_checkpoint(boundary_net, "abort")
                raise
            buffer.push(Transition(obs, action, result.reward,
                                   result.observation, result.done))
            obs = result.observation
            rewards.append(result.reward)
            last_info = result.info
            done = result.done
            if len(buffer) >= max(config.train_start, config.batch_size):
                batch = buffer.sample(config.batch_size, rng)
                states, actions = _batch_arrays(batch)
                targets = ddqn_targets(batch, net, target, config.gamma)
                try:
                    loss = net.train_batch(states, actions, targets,
                                           config.learning_rate, opt)
                except FloatingPointError as e:
                    raise TrainingDiverged(
                        f"episode {episode}, step {global_step}: {e}") from e
                losses.append(loss)
            global_step += 1
            if global_step % config.target_sync_interval == 0:
                target = net.clone()
        metrics.append(EpisodeMetrics(
            episode=episode,
            steps=len(rewards),
            total_reward=float(sum(rewards)),
            discounted_return=discounted_return(rewards, config.gamma),
            mean_loss=float(np.mean(losses)) if losses else 0.0,
            epsilon=epsilon_at(global_step, config),
            laps=_laps_completed(env, last_info),
        ))
        log.info("episode %d: steps=%d reward=%.3f eps=%.3f laps=%d",
                 episode, len(rewards), sum(rewards),
                 metrics[-1].epsilon, metrics[-1].laps)
        if on_episode is not None:
            on_episode(metrics[-1])
        boundary_net = net.clone()
        if (episode + 1) % checkpoint_interval == 0:
            write_checkpoint(net, f"ep{episode + 1:05d}")
    return net, metrics


def evaluate(env, net: QNet, episodes: int, epsilon: float = 0.0,
             rng: np.random.Generator | None = None) -> list[EpisodeMetrics]:
    """Greedy (or epsilon-soft) rollouts without learning."""
    if rng is None:
        rng = np.random.default_rng(0)
    out = []
    for episode in range(episodes):
        obs = env.reset()
        rewards = []
        done = False
        last_info: dict = {}
        while not done:
            q = net.forward(_states_to_input(obs))
            action = select_action(q, epsilon, rng)
            result = env.step(action)
            obs = result.observation
            rewards.append(result.reward)
            last_info = result.info
            done = result.done
        out.append(EpisodeMetrics(
            episode=episode, steps=len(rewards),
            total_reward=float(sum(rewards)),
            discounted_return=discounted_return(rewards, 0.99),
            mean_loss=0.0, epsilon=epsilon,
            laps=_laps_completed(env, last_info)))
    return out


METRICS_HEADER = "episode,steps,total_reward,discounted_return,mean_loss,epsilon,laps"


def write_metrics_csv(path, metrics: list[EpisodeMetrics]) -> None:
    """One row per episode, floats at 6 significant digits. Written to a
    temp file and renamed, so readers never see a partial file."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write(METRICS_HEADER + "\n")
        for m in metrics:
            f.write(f"{m.episode},{m.steps},{m.total_reward:.6g},"
                    f"{m.discounted_return:.6g},{m.mean_loss:.6g},"
                    f"{m.epsilon:.6g},{m.laps}\n")
    os.replace(tmp, path)
