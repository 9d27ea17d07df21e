import math

import numpy as np
import pytest

from lanedrive import vision as V


class TestGrayscale:
    def test_gray_input_fixed_point(self):
        img = np.full((4, 5, 3), 77, dtype=np.uint8)
        assert np.array_equal(V.to_grayscale(img), np.full((4, 5), 77, np.uint8))

    def test_pure_red(self):
        img = np.zeros((2, 2, 3), dtype=np.uint8)
        img[:, :, 0] = 255
        assert np.all(V.to_grayscale(img) == 76)    # round(0.299 * 255)

    def test_black(self):
        img = np.zeros((3, 3, 3), dtype=np.uint8)
        assert np.all(V.to_grayscale(img) == 0)

    def test_monotone_per_channel(self):
        rng = np.random.default_rng(0)
        base = rng.integers(0, 200, size=(6, 6, 3)).astype(np.uint8)
        g0 = V.to_grayscale(base)
        for c in range(3):
            brighter = base.copy()
            brighter[:, :, c] = np.minimum(brighter[:, :, c] + 40, 255).astype(np.uint8)
            assert np.all(V.to_grayscale(brighter) >= g0)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            V.to_grayscale(np.zeros((4, 4), dtype=np.uint8))


class TestResize:
    def test_constant_preserved_exactly(self):
        img = np.full((120, 160), 7, dtype=np.uint8)
        out = V.resize_bilinear(img, 80, 80)
        assert out.shape == (80, 80)
        assert np.all(out == 7)

    def test_two_by_two_mean(self):
        img = np.array([[0, 255], [0, 255]], dtype=np.uint8)
        out = V.resize_bilinear(img, 1, 1)
        assert out[0, 0] == 128

    def test_identity(self):
        rng = np.random.default_rng(1)
        img = rng.integers(0, 256, size=(80, 80)).astype(np.uint8)
        assert np.array_equal(V.resize_bilinear(img, 80, 80), img)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            V.resize_bilinear(np.zeros((0, 4), dtype=np.uint8))

    def test_constant_property_random_sizes(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            h, w = rng.integers(2, 50, size=2)
            value = int(rng.integers(0, 256))
            img = np.full((h, w), value, dtype=np.uint8)
            out = V.resize_bilinear(img, 33, 21)
            assert np.all(out == value)


class TestCanny:
    def test_constant_no_edges(self):
        img = np.full((40, 60), 150, dtype=np.uint8)
        assert not V.canny(img).any()

    def test_vertical_step(self):
        img = np.zeros((60, 80), dtype=np.uint8)
        img[:, 40:] = 255
        edges = V.canny(img)
        ys, xs = np.nonzero(edges)
        assert len(xs) > 0
        assert xs.min() >= 38 and xs.max() <= 42
        assert len(np.unique(ys)) >= 0.9 * 60

    def test_isolated_pixel_no_long_chain(self):
        img = np.zeros((30, 30), dtype=np.uint8)
        img[15, 15] = 255
        edges = V.canny(img, low=50, high=100)
        # Brute-force chain check: count connected edge pixels.
        assert (edges > 0).sum() <= 2

    def test_threshold_ordering_enforced(self):
        img = np.zeros((10, 10), dtype=np.uint8)
        with pytest.raises(ValueError):
            V.canny(img, low=100, high=50)

    def test_output_binary(self):
        rng = np.random.default_rng(3)
        img = rng.integers(0, 256, size=(50, 50)).astype(np.uint8)
        edges = V.canny(img)
        assert set(np.unique(edges)) <= {0, 255}

    def test_deterministic(self):
        rng = np.random.default_rng(4)
        img = rng.integers(0, 256, size=(40, 40)).astype(np.uint8)
        assert np.array_equal(V.canny(img), V.canny(img))


def draw_line_pixels(shape, pixels):
    img = np.zeros(shape, dtype=np.uint8)
    for y, x in pixels:
        img[y, x] = 255
    return img


class TestHough:
    def test_vertical_line(self):
        img = draw_line_pixels((120, 160), [(y, 20) for y in range(120)])
        segs = V.hough_segments(img)
        assert segs
        best = segs[0]
        assert abs(best.theta) <= math.radians(1.0) + 1e-9
        assert abs(best.rho - 20) <= 1.0

    def test_horizontal_line(self):
        img = draw_line_pixels((120, 160), [(10, x) for x in range(160)])
        segs = V.hough_segments(img)
        assert segs
        best = segs[0]
        assert abs(best.theta - math.pi / 2) <= math.radians(1.0) + 1e-9
        assert abs(best.rho - 10) <= 1.0

    def test_empty_map(self):
        assert V.hough_segments(np.zeros((50, 50), dtype=np.uint8)) == []

    def test_votes_meet_threshold(self):
        img = draw_line_pixels((120, 160), [(y, 20) for y in range(120)])
        for seg in V.hough_segments(img):
            assert seg.votes >= V.HOUGH_VOTE_THRESHOLD

    def test_endpoints_on_line(self):
        img = draw_line_pixels((120, 160),
                               [(y, int(0.7 * y) + 5) for y in range(100)])
        for seg in V.hough_segments(img):
            for x, y in seg.endpoints:
                dist = abs(x * math.cos(seg.theta) + y * math.sin(seg.theta) - seg.rho)
                assert dist <= 1.0

    def test_below_threshold_line_ignored(self):
        img = draw_line_pixels((120, 160), [(y, 20) for y in range(10)])
        assert V.hough_segments(img) == []


def make_segment(slope, votes, rho=10.0, x0=20.0, y0=30.0, length=40.0):
    dx = 1.0 / math.hypot(1.0, slope)
    dy = slope * dx
    p2 = (x0 + length * dx, y0 + length * dy)
    theta = (math.atan2(dx, -dy)) % math.pi   # normal angle for this direction
    return V.LineSegment(rho=rho, theta=theta, endpoints=((x0, y0), p2),
                         votes=votes)


class TestPartition:
    def test_spec_example(self):
        lines = [make_segment(+1.2, 30), make_segment(+0.9, 10),
                 make_segment(-1.0, 25), make_segment(-0.1, 40)]
        left, right = V.partition_filter_lines(lines)
        assert left is not None and left.slope() == pytest.approx(-1.0)
        assert right is not None and right.slope() == pytest.approx(1.2)

    def test_empty(self):
        assert V.partition_filter_lines([]) == (None, None)

    def test_single_positive(self):
        seg = make_segment(0.8, 25)
        left, right = V.partition_filter_lines([seg])
        assert left is None and right is seg

    def test_near_horizontal_rejected(self):
        left, right = V.partition_filter_lines([make_segment(0.2, 99),
                                                make_segment(-0.29, 99)])
        assert left is None and right is None

    def test_vertical_sides_by_position(self):
        lv = V.LineSegment(rho=30.0, theta=0.0, endpoints=((30.0, 5.0), (30.0, 90.0)),
                           votes=50)
        rv = V.LineSegment(rho=130.0, theta=0.0,
                           endpoints=((130.0, 5.0), (130.0, 90.0)), votes=50)
        left, right = V.partition_filter_lines([lv, rv], frame_width=160)
        assert left is lv and right is rv

    def test_tie_broken_by_smaller_rho(self):
        a = make_segment(-1.0, 30, rho=50.0)
        b = make_segment(-1.0, 30, rho=20.0)
        left, _ = V.partition_filter_lines([a, b])
        assert left is b

    def test_at_most_two_outputs_property(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            lines = [make_segment(float(rng.uniform(-3, 3)), int(rng.integers(20, 90)),
                                  rho=float(rng.uniform(-50, 150)))
                     for _ in range(rng.integers(0, 8))]
            left, right = V.partition_filter_lines(lines)
            picked = [s for s in (left, right) if s is not None]
            assert len(picked) <= 2
            if left is not None and not math.isinf(left.slope()):
                assert left.slope() < 0
            if right is not None and not math.isinf(right.slope()):
                assert right.slope() > 0


class TestRasterize:
    def test_none_gives_black(self):
        out = V.rasterize_lines(None, None)
        assert out.shape == (80, 80)
        assert not out.any()

    def test_diagonal_pixel_count(self):
        seg = V.LineSegment(rho=0.0, theta=3 * math.pi / 4,
                            endpoints=((0.0, 0.0), (159.0, 119.0)), votes=50)
        out = V.rasterize_lines(None, seg)
        lit = int((out > 0).sum())
        assert abs(lit - 80) <= 2

    def test_idempotent(self):
        seg = make_segment(1.0, 30)
        a = V.rasterize_lines(seg, None)
        b = V.rasterize_lines(seg, None)
        assert np.array_equal(a, b)

    def test_values_binary(self):
        seg = make_segment(-1.5, 30)
        out = V.rasterize_lines(seg, make_segment(0.7, 21))
        assert set(np.unique(out)) <= {0, 255}


class TestFrameStack:
    def test_reset_fills_all_slots(self):
        stack = V.FrameStack(shape=(8, 8))
        f = np.arange(64, dtype=np.uint8).reshape(8, 8)
        t = stack.reset(f)
        assert t.shape == (8, 8, 4)
        for c in range(4):
            assert np.array_equal(t[:, :, c], f)

    def test_fifo_order(self):
        stack = V.FrameStack(shape=(2, 2))
        frames = [np.full((2, 2), i, dtype=np.uint8) for i in range(6)]
        stack.reset(frames[0])
        for f in frames[1:]:
            stack.push(f)
        t = stack.tensor()
        assert [int(t[0, 0, c]) for c in range(4)] == [2, 3, 4, 5]

    def test_wrong_shape_rejected(self):
        stack = V.FrameStack(shape=(8, 8))
        with pytest.raises(ValueError):
            stack.reset(np.zeros((4, 4), dtype=np.uint8))

    def test_push_before_reset_rejected(self):
        stack = V.FrameStack(shape=(4, 4))
        with pytest.raises(RuntimeError):
            stack.push(np.zeros((4, 4), dtype=np.uint8))

    def test_tensor_shape_constant(self):
        stack = V.FrameStack(shape=(80, 80))
        stack.reset(np.zeros((80, 80), dtype=np.uint8))
        for _ in range(7):
            stack.push(np.zeros((80, 80), dtype=np.uint8))
            assert stack.tensor().shape == (80, 80, 4)

    def test_tensor_detached_from_internal_state(self):
        stack = V.FrameStack(shape=(2, 2))
        stack.reset(np.zeros((2, 2), dtype=np.uint8))
        t = stack.tensor()
        t[:] = 99
        assert not stack.tensor().any()
