import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pantext import geometry as G
from pantext.errors import GeometryError
from pantext.oracles import fan_area, monte_carlo_iou, random_convex_quad

P = (0.0, 0.0, 100.0, 50.0)
G_SHIFTED = np.array([[10, 5], [110, 5], [110, 55], [10, 55]], dtype=float)


class TestQuadDelta:
    def test_corners_encode_to_zero(self):
        assert np.all(G.quad_encode(G.AxisRect(*P).corners(), P) == 0)

    def test_hand_example(self):
        np.testing.assert_allclose(G.quad_encode(G_SHIFTED, P), np.full(8, 0.1), atol=1e-15)

    def test_decode_zero_gives_corners(self):
        np.testing.assert_array_equal(G.quad_decode(np.zeros(8), P), G.AxisRect(*P).corners())

    def test_decode_hand_example(self):
        np.testing.assert_allclose(G.quad_decode(np.full(8, 0.1), P), G_SHIFTED, atol=1e-12)

    def test_layout(self):
        # delta order is (dx1, dy1, dx2, dy2, ...) and y-offsets use the height
        g = G.AxisRect(*P).corners()
        g[2] += (20.0, 10.0)
        d = G.quad_encode(g, P)
        assert d.tolist() == [0, 0, 0, 0, 0.2, 0.2, 0, 0]

    @pytest.mark.parametrize("p", [(0, 0, 0, 5), (0, 0, 5, -1), (3, 3, 1, 5)])
    def test_degenerate_proposal(self, p):
        with pytest.raises(GeometryError):
            G.quad_encode(G_SHIFTED, p)

    def test_roundtrip_batch(self, rng):
        x1 = rng.uniform(-100, 100, 500)
        p = np.stack([x1, x1, x1 + rng.uniform(1, 50, 500), x1 + rng.uniform(1, 50, 500)], axis=1)
        g = rng.uniform(-300, 300, size=(500, 4, 2))
        assert np.abs(G.quad_decode(G.quad_encode(g, p), p) - g).max() < 1e-9

    @settings(max_examples=200)
    @given(st.lists(st.floats(-1e3, 1e3), min_size=8, max_size=8),
           st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(0.5, 1e3), st.floats(0.5, 1e3))
    def test_roundtrip_property(self, g, x, y, w, h):
        p = (x, y, x + w, y + h)
        g = np.array(g).reshape(4, 2)
        assert np.abs(G.quad_decode(G.quad_encode(g, p), p) - g).max() < 1e-9


class TestRectDelta:
    def test_identity(self):
        assert G.rect_encode(P, P).tolist() == [0, 0, 0, 0]

    def test_hand_example(self):
        d = G.rect_encode((0, 0, 20, 20), (0, 0, 10, 10))
        np.testing.assert_allclose(d, [0.5, 0.5, math.log(2), math.log(2)], atol=1e-15)

    def test_non_positive_dims(self):
        with pytest.raises(GeometryError):
            G.rect_encode((0, 0, 0, 1), P)

    def test_clamp(self):
        out = G.rect_decode([0, 0, 50, 50], (0, 0, 10, 10), max_log_scale=math.log(4))
        np.testing.assert_allclose(out, [-15, -15, 25, 25])

    @settings(max_examples=200)
    @given(st.floats(-500, 500), st.floats(-500, 500), st.floats(1, 300), st.floats(1, 300),
           st.floats(-500, 500), st.floats(-500, 500), st.floats(1, 300), st.floats(1, 300))
    def test_roundtrip_property(self, gx, gy, gw, gh, px, py, pw, ph):
        g = np.array([gx, gy, gx + gw, gy + gh])
        p = np.array([px, py, px + pw, py + ph])
        assert np.abs(G.rect_decode(G.rect_encode(g, p), p) - g).max() < 1e-9


class TestRectIou:
    def test_identical(self):
        assert G.rect_iou(P, P) == 1.0

    def test_half_overlap(self):
        assert G.rect_iou((0, 0, 1, 1), (0.5, 0, 1.5, 1)) == pytest.approx(1 / 3, abs=1e-15)

    def test_disjoint_and_touching(self):
        assert G.rect_iou((0, 0, 1, 1), (2, 2, 3, 3)) == 0.0
        assert G.rect_iou((0, 0, 1, 1), (1, 0, 2, 1)) == 0.0

    def test_matrix_agrees(self, rng):
        a = np.concatenate([xy := rng.uniform(0, 50, (7, 2)), xy + rng.uniform(1, 30, (7, 2))], axis=1)
        b = np.concatenate([xy := rng.uniform(0, 50, (5, 2)), xy + rng.uniform(1, 30, (5, 2))], axis=1)
        m = G.rect_iou_matrix(a, b)
        for i in range(7):
            for j in range(5):
                assert m[i, j] == pytest.approx(G.rect_iou(a[i], b[j]), abs=1e-15)


class TestQuadIou:
    def test_identical(self, backend, rng):
        q = random_convex_quad(rng, (5, 5), (4, 2))
        assert G.quad_iou(q, q) == pytest.approx(1.0, abs=1e-12)

    def test_shifted_square(self, backend):
        a = G.AxisRect(0, 0, 2, 2).corners()
        assert G.quad_iou(a, a + [1, 0]) == pytest.approx(1 / 3, abs=1e-15)

    def test_rotated_square_vs_monte_carlo(self, backend):
        a = np.array([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]])
        b = np.array([[0, -1], [1, 0], [0, 1], [-1, 0]], dtype=float)
        iou = G.quad_iou(a, b)
        assert iou == pytest.approx(0.5, abs=1e-12)  # square fits inside the diamond: 1 / 2
        assert abs(iou - monte_carlo_iou(a, b, 10 ** 6, seed=0)) <= 2e-3

    def test_symmetric_and_orientation_free(self, backend, rng):
        for _ in range(50):
            a = random_convex_quad(rng, (0, 0), (5, 5))
            b = random_convex_quad(rng, rng.uniform(-3, 3, 2), (5, 5))
            assert G.quad_iou(a, b) == G.quad_iou(b, a)
            assert G.quad_iou(a[::-1], b) == pytest.approx(G.quad_iou(a, b), abs=1e-12)

    def test_disjoint(self, backend):
        a = G.AxisRect(0, 0, 1, 1).corners()
        assert G.quad_iou(a, a + 5) == 0.0

    def test_containment(self, backend):
        big = G.AxisRect(0, 0, 4, 4).corners()
        small = G.AxisRect(1, 1, 2, 2).corners()
        assert G.quad_iou(big, small) == pytest.approx(1 / 16, abs=1e-15)

    def test_non_convex_raises(self, backend):
        dart = np.array([[0, 0], [4, 0], [1, 1], [0, 4]], dtype=float)
        with pytest.raises(GeometryError):
            G.quad_iou(dart, G.AxisRect(0, 0, 1, 1).corners())

    def test_degenerate_raises(self):
        with pytest.raises(GeometryError):
            G.quad_iou(np.zeros((4, 2)), G.AxisRect(0, 0, 1, 1).corners())

    def test_wrong_vertex_count(self):
        with pytest.raises(GeometryError):
            G.as_quad(np.zeros((5, 2)))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10 ** 6))
    def test_bounds_property(self, seed):
        r = np.random.default_rng(seed)
        a = random_convex_quad(r, (0, 0), (5, 5))
        b = random_convex_quad(r, r.uniform(-6, 6, 2), (5, 5))
        iou = G.quad_iou(a, b)
        assert 0.0 <= iou <= 1.0
        # IoU never exceeds the smaller-over-larger area ratio
        ra, rb = G.polygon_area(a), G.polygon_area(b)
        assert iou <= min(ra, rb) / max(ra, rb) + 1e-12


class TestAreaAndShapes:
    def test_bounding_rect_of_axis_quad(self):
        assert G.quad_to_bounding_rect(G.AxisRect(*P).corners()) == G.AxisRect(*P)

    def test_unit_square_area(self):
        assert G.polygon_area(G.AxisRect(0, 0, 1, 1).corners()) == 1.0

    def test_area_vs_fan(self, rng):
        for _ in range(100):
            q = random_convex_quad(rng, rng.uniform(-50, 50, 2), (20, 10))
            assert G.polygon_area(q) == pytest.approx(fan_area(q), abs=1e-9)

    def test_orientation_sign(self):
        q = G.AxisRect(0, 0, 1, 1).corners()
        assert G.signed_area(q) == -G.signed_area(q[::-1])

    def test_canonical_convex_orients(self):
        q = G.AxisRect(0, 0, 2, 1).corners()
        for v in (q, q[::-1]):
            assert G.signed_area(G.canonical_convex(v)) > 0

    def test_clip_polygon(self, backend):
        sq = G.AxisRect(0, 0, 2, 2).corners()
        out = G.clip_polygon(sq, sq + 1)
        assert G.polygon_area(out) == pytest.approx(1.0, abs=1e-15)

    def test_points_in_polygon_boundary(self):
        sq = G.AxisRect(0, 0, 2, 2).corners()
        pts = np.array([[1, 1], [0, 1], [2, 2], [3, 1], [-1e-3, 1]])
        assert G.points_in_polygon(pts, sq).tolist() == [True, True, True, False, False]

    def test_min_area_quad_rotated_rect(self):
        ang = 0.3
        u, v = np.array([math.cos(ang), math.sin(ang)]), np.array([-math.sin(ang), math.cos(ang)])
        corners = np.array([0 * u, 6 * u, 6 * u + 2 * v, 2 * v])
        t = np.linspace(0, 1, 4)[:, None]
        pts = np.concatenate([corners, corners[0] + t * (corners[1] - corners[0]), corners[2] + t * (corners[3] - corners[2])])
        q = G.min_area_quad(pts)
        assert G.polygon_area(q) == pytest.approx(12.0, abs=1e-9)
        assert G.quad_iou(q, corners) == pytest.approx(1.0, abs=1e-9)

    def test_order_quad(self):
        q = np.array([[2, 2], [0, 0], [0, 2], [2, 0]], dtype=float)
        assert G.order_quad(q).tolist() == [[0, 0], [2, 0], [2, 2], [0, 2]]

    def test_rect_validate(self):
        with pytest.raises(GeometryError):
            G.AxisRect(1, 1, 1, 2).validate()
        r = G.AxisRect(0, 0, 3, 2)
        assert (r.width, r.height, r.area) == (3, 2, 6)
