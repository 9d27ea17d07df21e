"""Gym-style environment binding the simulator and vision pipeline.

reset()/step()/is_game_over() over the 2D track world, with frame skipping,
a 5-way steering action space at fixed throttle, and three observation
modes: raw (80x80 grayscale), segmented (80x80 binary lane raster), and
lowres (20x20 grayscale, for desk-scale training budgets). Observations are
4-frame stacks, oldest first, dtype uint8.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from lanedrive import track as tracklib
from lanedrive import vision
from lanedrive.track import CameraModel, CarState, Control, Track

OBSERVATION_MODES = ("raw", "segmented", "lowres")

STEERING_VALUES = (-0.8, -0.4, 0.0, 0.4, 0.8)
FIXED_THROTTLE = 0.35
N_ACTIONS = len(STEERING_VALUES)

HEADING_JITTER = 0.1  # rad, uniform on reset


def decode_action(index: int) -> Control:
    """Map a discrete action index to a steering/throttle control."""
    if not isinstance(index, (int, np.integer)) or isinstance(index, bool):
        raise ValueError(f"action index must be an integer, got {index!r}")
    if not (0 <= index < N_ACTIONS):
        raise ValueError(f"action index {index} outside [0, {N_ACTIONS})")
    return Control(steering=STEERING_VALUES[index], throttle=FIXED_THROTTLE)


@dataclass
class EnvConfig:
    track: str = "oval"
    observation_mode: str = "raw"
    frame_skip: int = 2
    seed: int = 0
    max_episode_steps: int = 1000

    def __post_init__(self):
        if self.observation_mode not in OBSERVATION_MODES:
            raise ValueError(f"observation_mode must be one of "
                             f"{OBSERVATION_MODES}, got {self.observation_mode!r}")
        if self.frame_skip < 1:
            raise ValueError("frame_skip must be >= 1")
        if self.max_episode_steps < 1:
            raise ValueError("max_episode_steps must be >= 1")


@dataclass
class StepResult:
    observation: np.ndarray
    reward: float
    done: bool
    info: dict


class LaneDriveEnv:
    """One drivable car on a closed track, seen through the front camera.

    Methods must be called sequentially by a single owner; independent env
    instances are fully isolated.
    """

    def __init__(self, config: EnvConfig, camera: CameraModel | None = None):
        self.config = config
        self.track: Track = tracklib.build_track(tracklib.get_track_spec(config.track))
        self.camera = camera if camera is not None else CameraModel()
        self.rng = np.random.default_rng(config.seed)
        side = 20 if config.observation_mode == "lowres" else 80
        self._stack = vision.FrameStack(shape=(side, side), depth=4)
        self.n_actions = N_ACTIONS
        self.observation_shape = (side, side, 4)
        self.state: CarState | None = None
        self.step_count = 0
        self._done = True
        self._started = False
        self._prev_s = 0.0
        self._progress_total = 0.0
        self._sim_steps = 0
        self.last_info: dict = {}

    def seed(self, seed: int) -> None:
        """Reset the env RNG; the next reset() is then reproducible."""
        self.rng = np.random.default_rng(seed)

    def attach_rng(self, rng: np.random.Generator) -> None:
        """Share an external RNG stream (used by the trainer so one seeded
        stream drives every stochastic choice of a run)."""
        self.rng = rng

    def _observe(self, frame: np.ndarray) -> np.ndarray:
        mode = self.config.observation_mode
        if mode == "raw":
            return vision.resize_bilinear(frame, 80, 80)
        if mode == "lowres":
            return vision.resize_bilinear(frame, 20, 20)
        edges = vision.canny(frame)
        left, right = vision.partition_filter_lines(
            vision.hough_segments(edges), frame_width=frame.shape[1])
        return vision.rasterize_lines(left, right, 80, 80,
                                      src_w=frame.shape[1], src_h=frame.shape[0])

    def reset(self) -> np.ndarray:
        """Place the car at a random arclength on the centerline, heading
        along the tangent plus uniform jitter, speed 0. Returns the initial
        observation (all four stack slots hold the first frame)."""
        s0 = float(self.rng.uniform(0.0, self.track.total_length))
        jitter = float(self.rng.uniform(-HEADING_JITTER, HEADING_JITTER))
        pos = tracklib.point_at(self.track, s0)
        tan = tracklib.tangent_at(self.track, s0)
        self.state = CarState(x=float(pos[0]), y=float(pos[1]),
                              heading=math.atan2(tan[1], tan[0]) + jitter,
                              speed=0.0)
        self.step_count = 0
        self._done = False
        self._started = True
        self._sim_steps = 0
        self._progress_total = 0.0
        cte, s = tracklib.cross_track_error(self.track, self.state.x, self.state.y)
        self._prev_s = s
        self.last_info = {"cte": cte, "arclength_s": s,
                          "lap_progress_total": 0.0, "sim_steps": 0}
        frame = tracklib.render_camera(self.track, self.state, self.camera)
        self._stack.reset(self._observe(frame))
        return self._stack.tensor()

    def step(self, action: int) -> StepResult:
        """Apply one decoded control for frame_skip physics steps.

        Reward is the sum of per-substep rewards; the episode ends when any
        substep leaves the track or the step budget is exhausted. The camera
        renders once, after the final executed substep.
        """
        if not self._started:
            raise RuntimeError("step() before reset()")
        if self._done:
            raise RuntimeError("step() after episode end; call reset()")
        control = decode_action(action)

        reward = 0.0
        done = False
        cte, s = 0.0, self._prev_s
        for _ in range(self.config.frame_skip):
            self.state = tracklib.step_kinematics(self.state, control, tracklib.DT)
            self._sim_steps += 1
            cte, s = tracklib.cross_track_error(self.track, self.state.x, self.state.y)
            r, sub_done = tracklib.reward_and_done(
                self.track, self.state, self.step_count,
                max_episode_steps=self.config.max_episode_steps)
            reward += r
            self._progress_total += tracklib.lap_progress(self.track, self._prev_s, s)
            self._prev_s = s
            if sub_done:
                done = True
                break
        self.step_count += 1
        if self.step_count >= self.config.max_episode_steps:
            done = True
        self._done = done

        frame = tracklib.render_camera(self.track, self.state, self.camera)
        self._stack.push(self._observe(frame))
        self.last_info = {"cte": cte, "arclength_s": s,
                          "lap_progress_total": self._progress_total,
                          "sim_steps": self._sim_steps}
        return StepResult(observation=self._stack.tensor(), reward=float(reward),
                          done=done, info=dict(self.last_info))

    def is_game_over(self) -> bool:
        """True when the last step ended the episode or reset() never ran."""
        return self._done or not self._started
