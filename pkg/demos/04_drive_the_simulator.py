"""Roll out policies in the gym-style environment: random actions vs. a
hand-written centering controller that reads the simulator's true state.

The controller shows the ceiling a learned policy is aiming for; random
shows the floor. Run from the repo root:
    python3 demos/04_drive_the_simulator.py
"""

import math

import numpy as np

from lanedrive import track as T
from lanedrive.env import EnvConfig, LaneDriveEnv, STEERING_VALUES


def rollout(env, pick_action, episodes=3):
    lengths, rewards, laps = [], [], []
    for _ in range(episodes):
        env.reset()
        total, steps, done = 0.0, 0, False
        while not done:
            result = env.step(pick_action(env))
            total += result.reward
            steps += 1
            done = result.done
        lengths.append(steps)
        rewards.append(total)
        laps.append(result.info["lap_progress_total"] / env.track.total_length)
    return lengths, rewards, laps


def random_policy(rng):
    def pick(env):
        return int(rng.integers(0, env.n_actions))
    return pick


def centering_controller(env):
    # Reads ground-truth pose; steers toward the centerline (P control on
    # cross-track error and heading error, snapped to the action table).
    st = env.state
    cte, s = T.cross_track_error(env.track, st.x, st.y)
    tan = T.tangent_at(env.track, s)
    heading_err = T.normalize_heading(st.heading - math.atan2(tan[1], tan[0]))
    want = -2.5 * cte - 1.2 * heading_err
    return int(np.argmin([abs(v - want) for v in STEERING_VALUES]))


env = LaneDriveEnv(EnvConfig(observation_mode="lowres", seed=42,
                             max_episode_steps=1000))

lengths, rewards, laps = rollout(env, random_policy(np.random.default_rng(0)))
print(f"random policy:   episode lengths {lengths}, "
      f"rewards {[round(r, 1) for r in rewards]}")

lengths, rewards, laps = rollout(env, centering_controller)
print(f"hand controller: episode lengths {lengths}, "
      f"laps {[round(l, 1) for l in laps]}")
print("a trained DDQN policy should approach the hand controller "
      "using pixels alone")
