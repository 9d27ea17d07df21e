"""Lane-driving reinforcement-learning lab.

A deterministic 2D track simulator with a synthetic front camera, a
Canny/Hough lane-segmentation pipeline, a from-scratch numpy DDQN trainer,
a gym-style environment, and a TCP bridge so remote agents in any language
can drive the simulated car.
"""

__version__ = "0.1.0"

from lanedrive.agent import (AgentConfig, EpisodeMetrics, ReplayBuffer,
                             Transition, ddqn_targets, discounted_return,
                             evaluate, select_action, train_loop)
from lanedrive.env import EnvConfig, LaneDriveEnv, StepResult, decode_action
from lanedrive.qnet import (Architecture, Conv, Dense, QNet, default_arch,
                            grad_check, load_checkpoint, save_checkpoint,
                            sync_target)
from lanedrive.track import (CameraModel, CarState, Control, Track, TrackSpec,
                             build_track, cross_track_error, lap_progress,
                             render_camera, reward_and_done, step_kinematics)
from lanedrive.vision import (FrameStack, LineSegment, canny, hough_segments,
                              partition_filter_lines, rasterize_lines,
                              resize_bilinear, to_grayscale)

__all__ = [
    "AgentConfig", "Architecture", "CameraModel", "CarState", "Control",
    "Conv", "Dense", "EnvConfig", "EpisodeMetrics", "FrameStack",
    "LaneDriveEnv", "LineSegment", "QNet", "ReplayBuffer", "StepResult",
    "Track", "TrackSpec", "Transition", "build_track", "canny",
    "cross_track_error", "ddqn_targets", "decode_action", "default_arch",
    "discounted_return", "evaluate", "grad_check", "hough_segments",
    "lap_progress", "load_checkpoint", "partition_filter_lines",
    "rasterize_lines", "render_camera", "resize_bilinear", "reward_and_done",
    "save_checkpoint", "select_action", "step_kinematics", "sync_target",
    "to_grayscale", "train_loop",
]
