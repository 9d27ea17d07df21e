"""Observation and lane-segmentation pipeline.

Grayscale conversion, bilinear resize, a from-scratch Canny edge detector,
a Hough line transform with peak suppression, slope-based left/right lane
selection, line rasterization, and the 4-frame observation stack. All
operations are deterministic: identical inputs give byte-identical outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

CANNY_LOW = 50.0
CANNY_HIGH = 100.0
HOUGH_VOTE_THRESHOLD = 20
SLOPE_MIN = 0.3

# 5-tap Gaussian, sigma = 1.4, normalized.
_GAUSS = np.exp(-np.arange(-2.0, 3.0) ** 2 / (2.0 * 1.4 ** 2))
_GAUSS /= _GAUSS.sum()


def _round_half_up(x):
    return np.floor(x + 0.5)


def to_grayscale(rgb: np.ndarray) -> np.ndarray:
    """Luma conversion: round(0.299 R + 0.587 G + 0.114 B), clamped to [0, 255]."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"expected (H, W, 3) image, got shape {rgb.shape}")
    luma = (0.299 * rgb[:, :, 0].astype(np.float64)
            + 0.587 * rgb[:, :, 1]
            + 0.114 * rgb[:, :, 2])
    return np.clip(_round_half_up(luma), 0, 255).astype(np.uint8)


def resize_bilinear(src: np.ndarray, out_w: int = 80, out_h: int = 80) -> np.ndarray:
    """Bilinear resize with pixel-center alignment.

    Source coordinate for destination pixel d is (d + 0.5) * scale - 0.5,
    clamped to the source grid. Interpolation uses the lerp form
    v0 + f * (v1 - v0) so constant images map to the same constant exactly.
    """
    src = np.asarray(src)
    if src.ndim != 2 or src.size == 0:
        raise ValueError("source must be a nonempty 2-D image")
    h, w = src.shape
    img = src.astype(np.float64)

    xs = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0.0, w - 1.0)
    ys = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(int)
    y0 = np.floor(ys).astype(int)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0

    top = img[np.ix_(y0, x0)] + fx[None, :] * (img[np.ix_(y0, x1)] - img[np.ix_(y0, x0)])
    bot = img[np.ix_(y1, x0)] + fx[None, :] * (img[np.ix_(y1, x1)] - img[np.ix_(y1, x0)])
    out = top + fy[:, None] * (bot - top)
    return np.clip(_round_half_up(out), 0, 255).astype(np.uint8)


def _blur_gaussian(img: np.ndarray) -> np.ndarray:
    """Separable 5x5 Gaussian (sigma 1.4) with edge replication."""
    padded = np.pad(img, ((0, 0), (2, 2)), mode="edge")
    out = sum(_GAUSS[k] * padded[:, k:k + img.shape[1]] for k in range(5))
    padded = np.pad(out, ((2, 2), (0, 0)), mode="edge")
    return sum(_GAUSS[k] * padded[k:k + img.shape[0], :] for k in range(5))


def _sobel(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """3x3 Sobel gradients (gx along columns, gy along rows), edge replication."""
    p = np.pad(img, 1, mode="edge")
    h, w = img.shape
    smooth_v = p[0:h, :] + 2.0 * p[1:h + 1, :] + p[2:h + 2, :]
    gx = smooth_v[:, 2:w + 2] - smooth_v[:, 0:w]
    smooth_h = p[:, 0:w] + 2.0 * p[:, 1:w + 1] + p[:, 2:w + 2]
    gy = smooth_h[2:h + 2, :] - smooth_h[0:h, :]
    return gx, gy


def _neighbor(mag_padded: np.ndarray, dy: int, dx: int, h: int, w: int) -> np.ndarray:
    return mag_padded[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]


def canny(src: np.ndarray, low: float = CANNY_LOW,
          high: float = CANNY_HIGH) -> np.ndarray:
    """Canny edge detection; returns a binary uint8 edge map (0 or 255).

    Pipeline: 5x5 Gaussian blur (sigma 1.4) -> Sobel gradients -> magnitude
    and direction -> non-maximum suppression with direction quantized to 4
    bins -> double-threshold hysteresis (strong >= high; weak >= low kept
    only when 8-connected to a strong pixel). Thresholds apply to the raw
    Sobel magnitude of the blurred image.
    """
    if not (0 < low < high <= 255):
        raise ValueError(f"need 0 < low < high <= 255, got low={low} high={high}")
    src = np.asarray(src, dtype=np.float64)
    if src.ndim != 2:
        raise ValueError("canny expects a 2-D grayscale image")
    h, w = src.shape

    gx, gy = _sobel(_blur_gaussian(src))
    mag = np.hypot(gx, gy)
    angle = np.mod(np.arctan2(gy, gx), math.pi)
    bins = np.mod(_round_half_up(angle / (math.pi / 4.0)).astype(int), 4)

    mp = np.pad(mag, 1, mode="constant")
    neighbor_pairs = {
        0: ((0, 1), (0, -1)),       # gradient along x: compare left/right
        1: ((1, 1), (-1, -1)),      # 45 degrees
        2: ((1, 0), (-1, 0)),       # gradient along y: compare up/down
        3: ((1, -1), (-1, 1)),      # 135 degrees
    }
    keep = np.zeros((h, w), dtype=bool)
    for b, ((dy1, dx1), (dy2, dx2)) in neighbor_pairs.items():
        n1 = _neighbor(mp, dy1, dx1, h, w)
        n2 = _neighbor(mp, dy2, dx2, h, w)
        keep |= (bins == b) & (mag >= n1) & (mag >= n2) & (mag > 0)
    nms = np.where(keep, mag, 0.0)

    strong = nms >= high
    weak = nms >= low
    visited = strong.copy()
    while True:
        vp = np.pad(visited, 1, mode="constant")
        grown = np.zeros_like(visited)
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                if dy == 0 and dx == 0:
                    continue
                grown |= vp[1 + dy:1 + dy + h, 1 + dx:1 + dx + w]
        grown = (grown & weak) | visited
        if np.array_equal(grown, visited):
            break
        visited = grown
    return (visited * np.uint8(255)).astype(np.uint8)


@dataclass(frozen=True)
class LineSegment:
    """A detected straight line: normal form rho = x cos(theta) + y sin(theta)
    with theta in [0, pi), plus the extremal support pixels projected onto the
    line, and the accumulator vote count."""

    rho: float
    theta: float
    endpoints: tuple[tuple[float, float], tuple[float, float]]
    votes: int

    def slope(self) -> float:
        """Image-coordinate slope dy/dx from the endpoints (inf if vertical)."""
        (x1, y1), (x2, y2) = self.endpoints
        dx = x2 - x1
        if abs(dx) < 1e-9:
            return math.inf
        return (y2 - y1) / dx


def hough_segments(edges: np.ndarray,
                   vote_threshold: int = HOUGH_VOTE_THRESHOLD) -> list[LineSegment]:
    """Hough line transform over a binary edge map.

    Accumulator resolution is 1 px in rho and 1 degree in theta over
    [0, 180). Cells with at least `vote_threshold` votes that are 3x3 local
    maxima become lines; each line's endpoints are the extremal edge pixels
    within 2 px of it, projected onto the line. Lines are returned sorted by
    votes (descending), then |rho|, then theta.
    """
    edges = np.asarray(edges)
    ys, xs = np.nonzero(edges)
    if len(xs) == 0:
        return []
    h, w = edges.shape
    diag = int(math.ceil(math.hypot(w, h)))
    thetas = np.deg2rad(np.arange(180.0))
    cos_t = np.cos(thetas)
    sin_t = np.sin(thetas)

    rho_all = np.outer(xs, cos_t) + np.outer(ys, sin_t)          # (N, 180)
    rho_idx = _round_half_up(rho_all).astype(np.int64) + diag
    nbins = 2 * diag + 1
    acc = np.zeros((nbins, 180), dtype=np.int64)
    for t in range(180):
        acc[:, t] = np.bincount(rho_idx[:, t], minlength=nbins)

    # 3x3 local maxima; ties broken toward the lexicographically first cell.
    ap = np.pad(acc, 1, mode="constant")

    def shifted(dr, dt):
        return ap[1 + dr:1 + dr + nbins, 1 + dt:1 + dt + 180]

    is_peak = acc >= vote_threshold
    for dr, dt in ((-1, -1), (-1, 0), (-1, 1), (0, -1)):
        is_peak &= acc >= shifted(dr, dt)
    for dr, dt in ((0, 1), (1, -1), (1, 0), (1, 1)):
        is_peak &= acc > shifted(dr, dt)

    out = []
    for r_i, t_i in zip(*np.nonzero(is_peak)):
        rho = float(r_i - diag)
        theta = float(thetas[t_i])
        dist = xs * cos_t[t_i] + ys * sin_t[t_i] - rho
        support = np.abs(dist) <= 2.0
        if not np.any(support):
            continue
        # Position along the line direction (-sin, cos).
        t_along = -xs[support] * sin_t[t_i] + ys[support] * cos_t[t_i]
        lo, hi = float(t_along.min()), float(t_along.max())
        base = np.array([rho * cos_t[t_i], rho * sin_t[t_i]])
        d = np.array([-sin_t[t_i], cos_t[t_i]])
        p1 = base + lo * d
        p2 = base + hi * d
        out.append(LineSegment(rho=rho, theta=theta,
                               endpoints=((float(p1[0]), float(p1[1])),
                                          (float(p2[0]), float(p2[1]))),
                               votes=int(acc[r_i, t_i])))
    out.sort(key=lambda seg: (-seg.votes, abs(seg.rho), seg.theta))
    return out


def partition_filter_lines(lines: list[LineSegment], frame_width: int = 160,
                           slope_min: float = SLOPE_MIN,
                           ) -> tuple[LineSegment | None, LineSegment | None]:
    """Split candidate lines into at most one left and one right lane line.

    Near-horizontal lines (|slope| < slope_min) are rejected. Negative-slope
    lines are left-lane candidates, positive-slope lines right-lane
    candidates; vertical lines side with the image half their rho falls in.
    The highest-vote candidate wins per side, ties broken by smaller |rho|.
    """
    left_pool: list[LineSegment] = []
    right_pool: list[LineSegment] = []
    for seg in lines:
        s = seg.slope()
        if math.isinf(s):
            x_pos = abs(seg.rho)    # theta ~ 0 or ~ pi: |rho| is the x position
            (left_pool if x_pos < frame_width / 2.0 else right_pool).append(seg)
        elif abs(s) < slope_min:
            continue
        elif s < 0:
            left_pool.append(seg)
        else:
            right_pool.append(seg)

    def best(pool):
        if not pool:
            return None
        return min(pool, key=lambda seg: (-seg.votes, abs(seg.rho), seg.theta))

    return best(left_pool), best(right_pool)


def _bresenham(x0: int, y0: int, x1: int, y1: int):
    dx, dy = abs(x1 - x0), -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    x, y = x0, y0
    while True:
        yield x, y
        if x == x1 and y == y1:
            return
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x += sx
        if e2 <= dx:
            err += dx
            y += sy


def draw_segment(img: np.ndarray, p1, p2, value: int = 255) -> None:
    """Draw a 1 px line between two (x, y) points, clipped to the image."""
    h, w = img.shape
    x1, y1 = (int(_round_half_up(v)) for v in p1)
    x2, y2 = (int(_round_half_up(v)) for v in p2)
    for x, y in _bresenham(x1, y1, x2, y2):
        if 0 <= x < w and 0 <= y < h:
            img[y, x] = value


def rasterize_lines(left: LineSegment | None, right: LineSegment | None,
                    out_w: int = 80, out_h: int = 80,
                    src_w: int = 160, src_h: int = 120) -> np.ndarray:
    """Draw the selected lane lines as 1 px strokes on a black canvas.

    Endpoints are rescaled from the detection resolution (src_w x src_h) to
    the output resolution. Idempotent and deterministic.
    """
    frame = np.zeros((out_h, out_w), dtype=np.uint8)
    sx = out_w / src_w
    sy = out_h / src_h
    for seg in (left, right):
        if seg is None:
            continue
        (x1, y1), (x2, y2) = seg.endpoints
        px1 = int(np.clip(_round_half_up(x1 * sx), 0, out_w - 1))
        py1 = int(np.clip(_round_half_up(y1 * sy), 0, out_h - 1))
        px2 = int(np.clip(_round_half_up(x2 * sx), 0, out_w - 1))
        py2 = int(np.clip(_round_half_up(y2 * sy), 0, out_h - 1))
        for x, y in _bresenham(px1, py1, px2, py2):
            frame[y, x] = 255
    return frame


class FrameStack:
    """Ring buffer of the 4 most recent frames, exposed as an (h, w, 4) tensor.

    reset() fills all four slots with the given frame; push() evicts the
    oldest. The tensor orders frames oldest to newest.
    """

    def __init__(self, shape: tuple[int, int] = (80, 80), depth: int = 4):
        self.shape = tuple(shape)
        self.depth = depth
        self._frames: list[np.ndarray] | None = None

    def _check(self, frame: np.ndarray) -> np.ndarray:
        frame = np.asarray(frame)
        if frame.shape != self.shape:
            raise ValueError(f"expected frame shape {self.shape}, got {frame.shape}")
        return frame.astype(np.uint8, copy=True)

    def reset(self, frame: np.ndarray) -> np.ndarray:
        f = self._check(frame)
        self._frames = [f.copy() for _ in range(self.depth)]
        return self.tensor()

    def push(self, frame: np.ndarray) -> np.ndarray:
        if self._frames is None:
            raise RuntimeError("push before reset")
        self._frames.pop(0)
        self._frames.append(self._check(frame))
        return self.tensor()

    def tensor(self) -> np.ndarray:
        if self._frames is None:
            raise RuntimeError("stack not initialized; call reset first")
        return np.stack(self._frames, axis=-1)
