"""Deterministic 2D track world.

Closed-loop track geometry, kinematic bicycle physics, signed cross-track
measurement, lap bookkeeping, the reward/termination rule, and a synthetic
forward-facing camera that renders the two lane boundary lines onto a
120x160 grayscale frame.

Everything here is a pure function of its inputs: identical calls give
identical results, byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TAU = 2.0 * math.pi

# 1:16-scale car constants.
WHEELBASE = 0.25                  # m
MAX_STEER = math.radians(25.0)    # rad; |steering| = 1 maps to this wheel angle
V_MAX = 2.5                       # m/s
A_MAX = 2.0                       # m/s^2 at full throttle
DT = 0.05                         # s, one physics step
MAX_EPISODE_STEPS = 1000

# Camera gray levels (hard assignment, no blending).
SKY_GRAY = 30
GROUND_GRAY = 100
LINE_GRAY = 230

MIN_CENTERLINE_POINTS = 8

# Arclength step used to densify lane boundary polylines for rendering.
_BOUNDARY_STEP = 0.02  # m


class TrackError(ValueError):
    """Invalid track geometry or unparseable track file."""


def normalize_heading(h: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    h = math.remainder(h, TAU)
    if h <= -math.pi:
        h += TAU
    return h


@dataclass(frozen=True)
class TrackSpec:
    """Closed-loop centerline plus lane width.

    The centerline is an ordered (N, 2) array of points in meters. The loop
    closes implicitly: the last point connects back to the first, so the
    first point must not be repeated at the end.
    """

    name: str
    centerline: np.ndarray
    lane_half_width: float

    def __post_init__(self):
        pts = np.asarray(self.centerline, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise TrackError("centerline must be an (N, 2) array of points")
        pts = pts.copy()
        pts.flags.writeable = False
        object.__setattr__(self, "centerline", pts)
        if not (self.lane_half_width > 0):
            raise TrackError("lane_half_width must be > 0")


@dataclass(frozen=True)
class CarState:
    """Planar pose plus speed. Heading is normalized to (-pi, pi], speed is
    clamped to [0, V_MAX]."""

    x: float
    y: float
    heading: float
    speed: float

    def __post_init__(self):
        object.__setattr__(self, "heading", normalize_heading(float(self.heading)))
        object.__setattr__(self, "speed", min(max(float(self.speed), 0.0), V_MAX))


@dataclass(frozen=True)
class Control:
    """Steering in [-1, 1] (maps to wheel angle steering * MAX_STEER) and
    throttle in [0, 1] (maps to acceleration throttle * A_MAX)."""

    steering: float
    throttle: float

    def __post_init__(self):
        if not (-1.0 <= self.steering <= 1.0):
            raise ValueError(f"steering {self.steering} outside [-1, 1]")
        if not (0.0 <= self.throttle <= 1.0):
            raise ValueError(f"throttle {self.throttle} outside [0, 1]")


@dataclass(frozen=True)
class CameraModel:
    """Pinhole camera fixed above the rear axle, pitched down toward the road."""

    height_above_ground: float = 0.2       # m (mast-mounted, keeps lane-line
                                           # image slopes well above 0.3)
    pitch: float = 0.35                    # rad, positive = pitched down
    horizontal_fov: float = math.radians(100.0)
    image_width: int = 160
    image_height: int = 120

    def __post_init__(self):
        if not (0.0 < self.horizontal_fov < math.pi):
            raise ValueError("horizontal_fov must be in (0, pi)")
        if not (self.height_above_ground > 0):
            raise ValueError("camera height must be > 0")


@dataclass(frozen=True)
class Track:
    """Built track: per-edge unit tangents and lengths, a cumulative
    arclength table, and densified lane boundary polylines for rendering."""

    spec: TrackSpec
    tangents: np.ndarray        # (N, 2) unit tangent per edge i -> i+1
    seg_lengths: np.ndarray     # (N,)
    cum_arclength: np.ndarray   # (N + 1,), cum_arclength[0] = 0, [-1] = total
    total_length: float
    boundary_left: np.ndarray   # (M, 2) centerline + hw * left normal
    boundary_right: np.ndarray  # (M, 2) centerline - hw * left normal


def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _segments_cross(p1, p2, p3, p4, eps=1e-12):
    """True if segment p1-p2 intersects p3-p4 (proper crossing or collinear
    overlap / endpoint touch)."""
    d1 = _orient(p3[0], p3[1], p4[0], p4[1], p1[0], p1[1])
    d2 = _orient(p3[0], p3[1], p4[0], p4[1], p2[0], p2[1])
    d3 = _orient(p1[0], p1[1], p2[0], p2[1], p3[0], p3[1])
    d4 = _orient(p1[0], p1[1], p2[0], p2[1], p4[0], p4[1])
    if ((d1 > eps and d2 < -eps) or (d1 < -eps and d2 > eps)) and \
       ((d3 > eps and d4 < -eps) or (d3 < -eps and d4 > eps)):
        return True

    def on_segment(p, q, r):
        if abs(_orient(p[0], p[1], q[0], q[1], r[0], r[1])) > eps:
            return False
        return (min(p[0], q[0]) - eps <= r[0] <= max(p[0], q[0]) + eps and
                min(p[1], q[1]) - eps <= r[1] <= max(p[1], q[1]) + eps)

    return (on_segment(p1, p2, p3) or on_segment(p1, p2, p4) or
            on_segment(p3, p4, p1) or on_segment(p3, p4, p2))


def build_track(spec: TrackSpec) -> Track:
    """Validate a TrackSpec and precompute segment geometry.

    Rejects specs with fewer than MIN_CENTERLINE_POINTS points, duplicate
    consecutive points (including an explicit repeat of the first point at
    the end) and self-intersecting centerlines.
    """
    pts = spec.centerline
    n = len(pts)
    if n < MIN_CENTERLINE_POINTS:
        raise TrackError(
            f"centerline needs at least {MIN_CENTERLINE_POINTS} points, got {n}")

    edges = np.roll(pts, -1, axis=0) - pts          # edge i: pts[i] -> pts[i+1 mod n]
    seg_lengths = np.hypot(edges[:, 0], edges[:, 1])
    if np.any(seg_lengths < 1e-9):
        raise TrackError("consecutive centerline points must be distinct "
                         "(do not repeat the first point at the end)")
    tangents = edges / seg_lengths[:, None]

    # O(n^2) self-intersection check over non-adjacent edge pairs.
    for i in range(n):
        a1, a2 = pts[i], pts[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_cross(a1, a2, pts[j], pts[(j + 1) % n]):
                raise TrackError(
                    f"centerline self-intersects (edges {i} and {j})")

    cum = np.concatenate(([0.0], np.cumsum(seg_lengths)))
    total = float(cum[-1])

    normals = np.stack([-tangents[:, 1], tangents[:, 0]], axis=1)  # left of travel
    left, right = [], []
    hw = spec.lane_half_width
    for i in range(n):
        steps = max(1, int(math.ceil(seg_lengths[i] / _BOUNDARY_STEP)))
        t = np.arange(steps)[:, None] * (seg_lengths[i] / steps)
        base = pts[i] + t * tangents[i]
        left.append(base + hw * normals[i])
        right.append(base - hw * normals[i])
    boundary_left = np.concatenate(left)
    boundary_right = np.concatenate(right)

    for arr in (tangents, seg_lengths, cum, boundary_left, boundary_right):
        arr.flags.writeable = False
    return Track(spec=spec, tangents=tangents, seg_lengths=seg_lengths,
                 cum_arclength=cum, total_length=total,
                 boundary_left=boundary_left, boundary_right=boundary_right)


def point_at(track: Track, s: float) -> np.ndarray:
    """Centerline point at arclength s (wraps around the loop)."""
    s = float(s) % track.total_length
    i = int(np.searchsorted(track.cum_arclength, s, side="right")) - 1
    i = min(i, len(track.seg_lengths) - 1)
    return track.spec.centerline[i] + (s - track.cum_arclength[i]) * track.tangents[i]


def tangent_at(track: Track, s: float) -> np.ndarray:
    """Unit travel direction at arclength s."""
    s = float(s) % track.total_length
    i = int(np.searchsorted(track.cum_arclength, s, side="right")) - 1
    i = min(i, len(track.seg_lengths) - 1)
    return track.tangents[i]


def step_kinematics(state: CarState, control: Control, dt: float = DT) -> CarState:
    """Advance the kinematic bicycle model by one step.

    Speed integrates v' = v + a*dt (clamped to [0, V_MAX]); the translation
    uses the trapezoidal mean of old and new speed so distance covered in one
    step is exactly v*dt + a*dt^2/2 when no clamp is active. Heading rate is
    (v/L)*tan(delta) at the pre-update speed.
    """
    if not (dt > 0):
        raise ValueError("dt must be > 0")
    delta = control.steering * MAX_STEER
    a = control.throttle * A_MAX
    v0 = state.speed
    v1 = min(max(v0 + a * dt, 0.0), V_MAX)
    ds = 0.5 * (v0 + v1) * dt
    x = state.x + ds * math.cos(state.heading)
    y = state.y + ds * math.sin(state.heading)
    heading = state.heading + (v0 / WHEELBASE) * math.tan(delta) * dt
    return CarState(x=x, y=y, heading=heading, speed=v1)


def cross_track_error(track: Track, x: float, y: float) -> tuple[float, float]:
    """Signed distance to the nearest centerline point, plus arclength.

    Positive cte means the car is left of the travel direction. The second
    value is the arclength of the projection in [0, total_length).
    """
    pts = track.spec.centerline
    p = np.array([x, y], dtype=np.float64)
    d = p - pts
    along = np.clip(np.einsum("ij,ij->i", d, track.tangents), 0.0, track.seg_lengths)
    closest = pts + along[:, None] * track.tangents
    delta = p - closest
    dist2 = np.einsum("ij,ij->i", delta, delta)
    i = int(np.argmin(dist2))
    dist = math.sqrt(dist2[i])
    cross = track.tangents[i, 0] * delta[i, 1] - track.tangents[i, 1] * delta[i, 0]
    cte = math.copysign(dist, cross) if cross != 0.0 else dist
    s = (track.cum_arclength[i] + along[i]) % track.total_length
    return cte, float(s)


def lap_progress(track: Track, prev_s: float, new_s: float) -> float:
    """Wrap-aware signed arclength progress; result lies in (-L/2, L/2]."""
    total = track.total_length
    d = (new_s - prev_s) % total
    if d > total / 2.0:
        d -= total
    return d


def reward_and_done(track: Track, state: CarState, step_count: int,
                    max_episode_steps: int = MAX_EPISODE_STEPS) -> tuple[float, bool]:
    """Dense centering reward with off-track termination.

    On-track (|cte| <= lane_half_width): reward = 1 - (|cte|/hw)^2, done only
    when the episode step budget is exhausted. Off-track: reward = -1, done.
    """
    cte, _ = cross_track_error(track, state.x, state.y)
    hw = track.spec.lane_half_width
    if abs(cte) <= hw:
        r = 1.0 - (cte / hw) ** 2
        return r, step_count >= max_episode_steps
    return -1.0, True


# ---------------------------------------------------------------------------
# Synthetic camera
# ---------------------------------------------------------------------------

def _camera_basis(state: CarState, cam: CameraModel):
    """Rows of the world->camera rotation: (right, down, forward)."""
    ch, sh = math.cos(state.heading), math.sin(state.heading)
    cp, sp = math.cos(cam.pitch), math.sin(cam.pitch)
    right = np.array([sh, -ch, 0.0])
    down = np.array([-sp * ch, -sp * sh, -cp])
    forward = np.array([cp * ch, cp * sh, -sp])
    return np.stack([right, down, forward])


def _clip_line_to_rect(x0, y0, x1, y1, xmin, ymin, xmax, ymax):
    """Liang-Barsky clip; returns clipped endpoints or None."""
    dx, dy = x1 - x0, y1 - y0
    t0, t1 = 0.0, 1.0
    for p, q in ((-dx, x0 - xmin), (dx, xmax - x0), (-dy, y0 - ymin), (dy, ymax - y0)):
        if p == 0.0:
            if q < 0.0:
                return None
            continue
        r = q / p
        if p < 0.0:
            if r > t1:
                return None
            t0 = max(t0, r)
        else:
            if r < t0:
                return None
            t1 = min(t1, r)
    return (x0 + t0 * dx, y0 + t0 * dy, x0 + t1 * dx, y0 + t1 * dy)


def _draw_segment_2px(frame: np.ndarray, x0: int, y0: int, x1: int, y1: int,
                      value: int) -> None:
    """Bresenham stroke widened to 2 px perpendicular to the major axis."""
    h, w = frame.shape
    steep_widen = abs(x1 - x0) >= abs(y1 - y0)  # shallow line: widen in y
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x, y = x0, y0
    while True:
        if 0 <= x < w and 0 <= y < h:
            frame[y, x] = value
        if steep_widen:
            if 0 <= x < w and 0 <= y + 1 < h:
                frame[y + 1, x] = value
        else:
            if 0 <= x + 1 < w and 0 <= y < h:
                frame[y, x + 1] = value
        if x == x1 and y == y1:
            break
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy


def _project_and_draw(frame: np.ndarray, polyline: np.ndarray, state: CarState,
                      cam: CameraModel, fx: float, cx: float, cy: float,
                      z_near: float = 0.01) -> int:
    """Project a closed ground polyline through the camera and draw it.

    Returns the number of segments drawn (0 means the polyline is invisible).
    """
    h, w = frame.shape
    rot = _camera_basis(state, cam)
    pos = np.array([state.x, state.y, cam.height_above_ground])
    pts3 = np.column_stack([polyline, np.zeros(len(polyline))])
    pc = (pts3 - pos) @ rot.T          # columns: right, down, forward
    drawn = 0
    m = len(pc)
    for i in range(m):
        a = pc[i]
        b = pc[(i + 1) % m]
        za, zb = a[2], b[2]
        if za < z_near and zb < z_near:
            continue
        if za < z_near or zb < z_near:
            t = (z_near - za) / (zb - za)
            crossing = a + t * (b - a)
            if za < z_near:
                a = crossing
            else:
                b = crossing
        u0 = cx + fx * a[0] / a[2]
        v0 = cy + fx * a[1] / a[2]
        u1 = cx + fx * b[0] / b[2]
        v1 = cy + fx * b[1] / b[2]
        clipped = _clip_line_to_rect(u0, v0, u1, v1, -0.5, -0.5, w - 0.5, h - 0.5)
        if clipped is None:
            continue
        xa = int(math.floor(clipped[0] + 0.5))
        ya = int(math.floor(clipped[1] + 0.5))
        xb = int(math.floor(clipped[2] + 0.5))
        yb = int(math.floor(clipped[3] + 0.5))
        _draw_segment_2px(frame, xa, ya, xb, yb, LINE_GRAY)
        drawn += 1
    return drawn


def render_camera(track: Track, state: CarState,
                  cam: CameraModel = CameraModel()) -> np.ndarray:
    """Render the two lane boundary lines through a flat-ground pinhole model.

    Output is a (image_height, image_width) uint8 frame holding only the
    gray levels {SKY_GRAY, GROUND_GRAY, LINE_GRAY}: dark sky above the
    horizon, mid-gray ground below, bright 2 px lane lines. Boundary points
    behind the camera are clipped before projection. Deterministic.
    """
    w, h = cam.image_width, cam.image_height
    fx = (w / 2.0) / math.tan(cam.horizontal_fov / 2.0)
    cx = (w - 1) / 2.0
    cy = (h - 1) / 2.0

    frame = np.full((h, w), GROUND_GRAY, dtype=np.uint8)
    horizon_v = cy - fx * math.tan(cam.pitch)
    sky_rows = int(np.clip(math.ceil(horizon_v), 0, h))
    frame[:sky_rows] = SKY_GRAY

    for boundary in (track.boundary_left, track.boundary_right):
        _project_and_draw(frame, boundary, state, cam, fx, cx, cy)
    return frame


def render_overhead(track: Track, px_per_meter: float = 60.0,
                    margin: float = 0.3) -> np.ndarray:
    """Orthographic top view of the lane boundaries and centerline (debug aid)."""
    allpts = np.concatenate([track.boundary_left, track.boundary_right])
    lo = allpts.min(axis=0) - margin
    hi = allpts.max(axis=0) + margin
    w = int(math.ceil((hi[0] - lo[0]) * px_per_meter))
    h = int(math.ceil((hi[1] - lo[1]) * px_per_meter))
    frame = np.full((h, w), GROUND_GRAY, dtype=np.uint8)

    def draw(poly, value):
        pix = (poly - lo) * px_per_meter
        pix[:, 1] = h - 1 - pix[:, 1]   # y up in world, down in image
        n = len(pix)
        for i in range(n):
            x0, y0 = pix[i]
            x1, y1 = pix[(i + 1) % n]
            _draw_segment_2px(frame, int(x0 + 0.5), int(y0 + 0.5),
                              int(x1 + 0.5), int(y1 + 0.5), value)

    draw(track.boundary_left, LINE_GRAY)
    draw(track.boundary_right, LINE_GRAY)
    draw(track.spec.centerline.copy(), SKY_GRAY)
    return frame


# ---------------------------------------------------------------------------
# Built-in tracks and the plain-text track file format
# ---------------------------------------------------------------------------

def _stadium_points(straight_half: float, radius: float,
                    arc_step_deg: float = 7.5, straight_step: float = 0.2):
    """Counterclockwise stadium: two straights joined by semicircular ends."""
    pts = []
    n_straight = max(2, int(math.ceil(2 * straight_half / straight_step)))
    for k in range(n_straight):
        x = -straight_half + 2 * straight_half * k / n_straight
        pts.append((x, -radius))
    n_arc = max(4, int(math.ceil(180.0 / arc_step_deg)))
    for k in range(n_arc):
        a = -math.pi / 2 + math.pi * k / n_arc
        pts.append((straight_half + radius * math.cos(a), radius * math.sin(a)))
    for k in range(n_straight):
        x = straight_half - 2 * straight_half * k / n_straight
        pts.append((x, radius))
    for k in range(n_arc):
        a = math.pi / 2 + math.pi * k / n_arc
        pts.append((-straight_half + radius * math.cos(a), radius * math.sin(a)))
    return np.array(pts)


def _rounded_rect_points(width: float, height: float, radius: float,
                         arc_step_deg: float = 7.5, straight_step: float = 0.2):
    """Counterclockwise rounded rectangle centered at the origin."""
    hx = width / 2.0 - radius
    hy = height / 2.0 - radius
    if hx <= 0 or hy <= 0:
        raise TrackError("corner radius too large for rounded rectangle")
    pts = []
    n_arc = max(3, int(math.ceil(90.0 / arc_step_deg)))

    def straight(p0, p1):
        p0, p1 = np.array(p0), np.array(p1)
        n = max(1, int(math.ceil(np.hypot(*(p1 - p0)) / straight_step)))
        for k in range(n):
            pts.append(tuple(p0 + (p1 - p0) * k / n))

    def arc(center, a0):
        for k in range(n_arc):
            a = a0 + (math.pi / 2) * k / n_arc
            pts.append((center[0] + radius * math.cos(a),
                        center[1] + radius * math.sin(a)))

    straight((-hx, -height / 2), (hx, -height / 2))
    arc((hx, -hy), -math.pi / 2)
    straight((width / 2, -hy), (width / 2, hy))
    arc((hx, hy), 0.0)
    straight((hx, height / 2), (-hx, height / 2))
    arc((-hx, hy), math.pi / 2)
    straight((-width / 2, hy), (-width / 2, -hy))
    arc((-hx, -hy), math.pi)
    return np.array(pts)


def builtin_track_specs() -> dict[str, TrackSpec]:
    """Bundled desk-scale tracks."""
    return {
        "oval": TrackSpec(name="oval",
                          centerline=_stadium_points(0.8, 1.0),
                          lane_half_width=0.4),
        "rounded_rect": TrackSpec(name="rounded_rect",
                                  centerline=_rounded_rect_points(2.8, 2.0, 0.8),
                                  lane_half_width=0.4),
    }


def load_track_file(path) -> TrackSpec:
    """Parse the plain-text track format.

    One ``name = <id>`` line, one ``lane_half_width = <meters>`` line, then
    one ``x,y`` pair per line. Blank lines and ``#`` comments are ignored.
    """
    name = None
    hw = None
    pts = []
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" in line:
                key, _, value = (part.strip() for part in line.partition("="))
                if key == "name":
                    name = value
                elif key == "lane_half_width":
                    try:
                        hw = float(value)
                    except ValueError:
                        raise TrackError(
                            f"{path}:{lineno}: bad lane_half_width {value!r}")
                else:
                    raise TrackError(f"{path}:{lineno}: unknown key {key!r}")
            else:
                parts = line.split(",")
                if len(parts) != 2:
                    raise TrackError(f"{path}:{lineno}: expected 'x,y', got {line!r}")
                try:
                    pts.append((float(parts[0]), float(parts[1])))
                except ValueError:
                    raise TrackError(f"{path}:{lineno}: bad coordinates {line!r}")
    if name is None:
        raise TrackError(f"{path}: missing 'name = <id>' line")
    if hw is None:
        raise TrackError(f"{path}: missing 'lane_half_width = <meters>' line")
    return TrackSpec(name=name, centerline=np.array(pts, dtype=np.float64),
                     lane_half_width=hw)


def save_track_file(spec: TrackSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(f"name = {spec.name}\n")
        f.write(f"lane_half_width = {float(spec.lane_half_width)!r}\n")
        for x, y in spec.centerline:
            f.write(f"{float(x)!r},{float(y)!r}\n")


def get_track_spec(name_or_path: str) -> TrackSpec:
    """Resolve a built-in track name, or fall back to loading a track file."""
    builtin = builtin_track_specs()
    if name_or_path in builtin:
        return builtin[name_or_path]
    return load_track_file(name_or_path)
