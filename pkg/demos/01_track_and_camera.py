"""Build the bundled tracks, drive the kinematic car a few steps by hand,
and dump camera/overhead views as PGM files.

Run from the repo root:  python3 demos/01_track_and_camera.py
Outputs land in demos/out/.
"""

import math
import os

from lanedrive import track as T
from lanedrive import pgm

OUT = os.path.join(os.path.dirname(__file__), "out")
os.makedirs(OUT, exist_ok=True)

for name, spec in T.builtin_track_specs().items():
    track = T.build_track(spec)
    print(f"{name}: {len(spec.centerline)} centerline points, "
          f"lane half width {spec.lane_half_width} m, "
          f"lap length {track.total_length:.2f} m")
    pgm.write_pgm(os.path.join(OUT, f"{name}_overhead.pgm"),
                  T.render_overhead(track))

# Place the car at the start of the oval and accelerate down the straight.
track = T.build_track(T.builtin_track_specs()["oval"])
pos = T.point_at(track, 0.0)
tan = T.tangent_at(track, 0.0)
state = T.CarState(x=float(pos[0]), y=float(pos[1]),
                   heading=math.atan2(tan[1], tan[0]), speed=0.0)
control = T.Control(steering=0.0, throttle=0.5)

for step in range(40):
    state = T.step_kinematics(state, control)
    if step % 10 == 0:
        cte, s = T.cross_track_error(track, state.x, state.y)
        print(f"step {step:2d}: pos ({state.x:+.2f}, {state.y:+.2f}) "
              f"speed {state.speed:.2f} m/s  cte {cte:+.4f} m  s {s:.2f} m")
        frame = T.render_camera(track, state)
        pgm.write_pgm(os.path.join(OUT, f"camera_step{step:02d}.pgm"), frame)

print(f"wrote views to {OUT}")
