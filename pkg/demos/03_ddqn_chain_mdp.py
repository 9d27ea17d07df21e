"""Train the full DDQN machinery on a 5-state chain MDP and compare the
learned greedy policy against tabular value iteration.

This is the smallest end-to-end check that replay, epsilon-greedy
exploration, double-Q targets, and the Adam-trained network all cooperate.
Takes a few seconds.

Run from the repo root:  python3 demos/03_ddqn_chain_mdp.py
"""

import numpy as np

from lanedrive.agent import AgentConfig, train_loop
from lanedrive.env import StepResult
from lanedrive.qnet import Architecture, Dense


class ChainEnv:
    """States 0..4 in a row; action 1 moves right, 0 moves left. Reaching
    state 4 pays reward 1 and ends the episode."""

    def __init__(self, n=5, max_steps=20):
        self.n, self.max_steps = n, max_steps
        self.observation_shape = (n,)
        self.n_actions = 2
        self.pos, self.steps, self.done = 0, 0, True

    def _obs(self):
        v = np.zeros(self.n, dtype=np.float32)
        v[self.pos] = 1.0
        return v

    def reset(self):
        self.pos, self.steps, self.done = 0, 0, False
        return self._obs()

    def step(self, action):
        self.pos = min(self.n - 1, max(0, self.pos + (1 if action == 1 else -1)))
        self.steps += 1
        reward = 1.0 if self.pos == self.n - 1 else 0.0
        self.done = self.pos == self.n - 1 or self.steps >= self.max_steps
        return StepResult(self._obs(), reward, self.done, {})


def value_iteration(n=5, gamma=0.95):
    q = np.zeros((n, 2))
    for _ in range(200):
        new = np.zeros_like(q)
        for s in range(n - 1):
            for a, nxt in ((0, max(0, s - 1)), (1, min(n - 1, s + 1))):
                r = 1.0 if nxt == n - 1 else 0.0
                new[s, a] = r + gamma * (0.0 if nxt == n - 1 else q[nxt].max())
        q = new
    return q


cfg = AgentConfig(gamma=0.95, epsilon_start=1.0, epsilon_end=0.05,
                  epsilon_decay_steps=800, buffer_capacity=4000, batch_size=16,
                  target_sync_interval=100, train_start=32, learning_rate=1e-3,
                  seed=0)
arch = Architecture((5,), (Dense(16, relu=True), Dense(2)))
net, metrics = train_loop(ChainEnv(), cfg, episodes=200, arch=arch)

print(f"trained {len(metrics)} episodes, "
      f"{sum(m.steps for m in metrics)} env steps")
q_star = value_iteration()
print("state | VI optimal | learned greedy | learned Q-values")
agree = True
for s in range(4):
    one_hot = np.zeros(5, dtype=np.float32)
    one_hot[s] = 1.0
    q = net.forward(one_hot)
    choice = int(np.argmax(q))
    best = int(np.argmax(q_star[s]))
    agree &= choice == best
    print(f"  {s}   |     {best}      |       {choice}        | {np.round(q, 3)}")
print("greedy policy matches value iteration:", agree)
