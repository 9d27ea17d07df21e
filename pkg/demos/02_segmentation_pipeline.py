"""Walk a rendered camera frame through each stage of the lane-segmentation
pipeline (Canny -> Hough -> slope partition -> raster) and dump every stage.

Run from the repo root:  python3 demos/02_segmentation_pipeline.py
"""

import math
import os

import numpy as np

from lanedrive import pgm, track as T, vision as V

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

track = T.build_track(T.builtin_track_specs()["oval"])

# Three poses: centered, drifted left, drifted right.
poses = {
    "centered": T.CarState(0.0, -1.0, 0.0, 0.0),
    "drift_left": T.CarState(0.0, -0.75, 0.0, 0.0),
    "drift_right": T.CarState(0.0, -1.25, 0.0, 0.0),
}

for name, state in poses.items():
    frame = T.render_camera(track, state)
    edges = V.canny(frame)
    segments = V.hough_segments(edges)
    left, right = V.partition_filter_lines(segments, frame_width=frame.shape[1])
    raster = V.rasterize_lines(left, right, src_w=frame.shape[1],
                               src_h=frame.shape[0])

    print(f"{name}: {int((edges > 0).sum())} edge px, "
          f"{len(segments)} hough lines -> kept "
          f"{sum(s is not None for s in (left, right))}")
    for label, seg in (("left", left), ("right", right)):
        if seg is not None:
            print(f"  {label}: slope {seg.slope():+.2f}, votes {seg.votes}, "
                  f"theta {math.degrees(seg.theta):.0f} deg")

    pgm.write_pgm(os.path.join(OUT, f"{name}_0_camera.pgm"), frame)
    pgm.write_pgm(os.path.join(OUT, f"{name}_1_edges.pgm"), edges)
    pgm.write_pgm(os.path.join(OUT, f"{name}_2_raster.pgm"), raster)

# The stacked observation an agent actually sees in segmented mode.
stack = V.FrameStack(shape=(80, 80))
state = poses["centered"]
frame = T.render_camera(track, state)
left, right = V.partition_filter_lines(V.hough_segments(V.canny(frame)),
                                       frame_width=frame.shape[1])
obs = stack.reset(V.rasterize_lines(left, right, src_w=160, src_h=120))
print(f"observation tensor: shape {obs.shape}, dtype {obs.dtype}, "
      f"values {sorted(np.unique(obs).tolist())}")
print(f"wrote stages to {OUT}")
