"""Shared test harnesses: a tiny deterministic chain MDP with an independent
value-iteration oracle, and a brute-force line-cover stroke counter."""

import numpy as np

from lanedrive.env import StepResult


class ChainEnv:
    """Deterministic 5-state corridor: action 1 moves right, 0 moves left.
    Reaching the last state pays 1 and ends the episode."""

    def __init__(self, n=5, max_steps=20):
        self.n = n
        self.max_steps = max_steps
        self.observation_shape = (n,)
        self.n_actions = 2
        self.pos = 0
        self.steps = 0
        self.done = True

    def _obs(self):
        v = np.zeros(self.n, dtype=np.float32)
        v[self.pos] = 1.0
        return v

    def reset(self):
        self.pos = 0
        self.steps = 0
        self.done = False
        return self._obs()

    def step(self, action):
        if self.done:
            raise RuntimeError("step after done")
        self.pos = min(self.n - 1, max(0, self.pos + (1 if action == 1 else -1)))
        self.steps += 1
        reward = 1.0 if self.pos == self.n - 1 else 0.0
        self.done = self.pos == self.n - 1 or self.steps >= self.max_steps
        return StepResult(observation=self._obs(), reward=reward,
                          done=self.done, info={})


def chain_value_iteration(n=5, gamma=0.99, sweeps=200):
    """Independent tabular oracle for ChainEnv's optimal action values."""
    q = np.zeros((n, 2))
    for _ in range(sweeps):
        new = np.zeros_like(q)
        for s in range(n - 1):
            for a, nxt in ((0, max(0, s - 1)), (1, min(n - 1, s + 1))):
                r = 1.0 if nxt == n - 1 else 0.0
                cont = 0.0 if nxt == n - 1 else q[nxt].max()
                new[s, a] = r + gamma * cont
        q = new
    return q


def count_line_strokes(img, tol=1.5, max_strokes=4):
    """Minimum number of straight strokes covering all lit pixels.

    Greedy brute force: candidate lines come from all pairs of a pixel
    subsample; the best-covering line is removed repeatedly. Independent of
    the production Hough/rasterization code paths.
    """
    pts = np.argwhere(img > 0).astype(np.float64)   # (y, x)
    strokes = 0
    while len(pts) > 0:
        strokes += 1
        if strokes > max_strokes:
            return strokes
        if len(pts) <= 2:
            break
        sample = pts[:: max(1, len(pts) // 24)]
        best_cover = None
        for i in range(len(sample)):
            for j in range(i + 1, len(sample)):
                d = sample[j] - sample[i]
                norm = np.hypot(d[0], d[1])
                if norm < 1e-9:
                    continue
                n_vec = np.array([-d[1], d[0]]) / norm
                dist = np.abs((pts - sample[i]) @ n_vec)
                cover = dist <= tol
                if best_cover is None or cover.sum() > best_cover.sum():
                    best_cover = cover
        if best_cover is None or not best_cover.any():
            break
        pts = pts[~best_cover]
    return strokes
