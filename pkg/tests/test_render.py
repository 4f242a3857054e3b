import io

import numpy as np
import pytest

from kcover.coverage import CumulativeVisibility, update_cumvis
from kcover.env import Environment, HeightField, Point3, sensor_position
from kcover.errors import DomainError
from kcover.planner import SensorSet
from kcover.render import (
    OBSTACLE_COLOR,
    SENSOR_COLOR,
    SliceSpec,
    order_palette,
    render_order_slice,
    render_placement,
)
from kcover.visibility import order_of_visibility, visibility_field

from conftest import flat_env, sample_free_point, urban_env


def build_state(env, cells, k=2, method="oracle"):
    C = CumulativeVisibility.empty(env, k)
    P = SensorSet()
    for cell in cells:
        pos = sensor_position(env, cell)
        C = update_cumvis(C, visibility_field(env, pos, method=method))
        P.append(cell, pos)
    return C, P


def png_bytes(img):
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


class TestHorizontalSlice:
    def test_empty_env_uniform_two(self):
        env = flat_env(8)
        C, P = build_state(env, [(1, 1), (6, 6)])
        img = render_order_slice(env, C, SliceSpec(axis="horizontal", coord=0.5, scale=1))
        arr = np.asarray(img)
        expect = order_palette(2)[2]
        assert np.all(arr.reshape(-1, 3) == expect)

    def test_building_painted_as_obstacle(self):
        h = np.zeros((8, 8))
        h[3:5, 3:5] = 0.8
        env = Environment(terrain=HeightField(h))
        C, P = build_state(env, [(0, 0)])
        img = render_order_slice(env, C, SliceSpec(axis="horizontal", coord=0.5, scale=1))
        arr = np.asarray(img)
        assert tuple(arr[3, 3]) == OBSTACLE_COLOR
        assert tuple(arr[0, 0]) != OBSTACLE_COLOR

    def test_counts_match_pointwise_oracle(self):
        env = urban_env(3, size=16)
        rng = np.random.default_rng(0)
        cells = [tuple(int(v) for v in c) for c in np.argwhere(env.heights == 0)[:3]]
        C, P = build_state(env, cells, k=3, method="oracle")
        z = 0.37
        img = render_order_slice(env, C, SliceSpec(axis="horizontal", coord=z, scale=1))
        arr = np.asarray(img)
        palette = order_palette(3)
        checked = 0
        for _ in range(100):
            i, j = int(rng.integers(16)), int(rng.integers(16))
            if env.heights[i, j] >= z:
                assert tuple(arr[i, j]) == OBSTACLE_COLOR
                continue
            order = order_of_visibility(env, P.points, Point3(j + 0.5, i + 0.5, z))
            assert tuple(arr[i, j]) == palette[order]
            checked += 1
        assert checked > 50

    def test_out_of_domain_altitude(self):
        env = flat_env(4)
        C, _ = build_state(env, [(0, 0)])
        with pytest.raises(DomainError):
            render_order_slice(env, C, SliceSpec(axis="horizontal", coord=1.5))


class TestVerticalSlice:
    def test_shape_and_obstacle_column(self):
        h = np.zeros((8, 8))
        h[2, 5] = 0.6
        env = Environment(terrain=HeightField(h))
        C, _ = build_state(env, [(0, 0)])
        img = render_order_slice(
            env, C, SliceSpec(axis="vertical-row", coord=2, scale=1, n_altitude=10)
        )
        arr = np.asarray(img)
        assert arr.shape == (10, 8, 3)
        # bottom pixel of column 5 is inside the building, top above it
        assert tuple(arr[-1, 5]) == OBSTACLE_COLOR
        assert tuple(arr[0, 5]) != OBSTACLE_COLOR

    def test_bad_index(self):
        env = flat_env(4)
        C, _ = build_state(env, [(0, 0)])
        with pytest.raises(DomainError):
            render_order_slice(env, C, SliceSpec(axis="vertical-col", coord=9))


class TestPlacement:
    def test_zero_sensors_all_order_zero(self):
        env = flat_env(6)
        C = CumulativeVisibility.empty(env, 2)
        img = render_placement(env, SensorSet(), C, scale=1)
        arr = np.asarray(img)
        assert np.all(arr.reshape(-1, 3) == order_palette(2)[0])

    def test_marker_per_sensor(self):
        env = flat_env(8)
        cells = [(1, 1), (6, 2), (4, 6)]
        C, P = build_state(env, cells)
        img = render_placement(env, P, C, scale=8)
        arr = np.asarray(img)
        for i, j in cells:
            px = arr[i * 8 + 4, j * 8 + 4]
            assert tuple(px) == SENSOR_COLOR

    def test_byte_identical_across_runs(self):
        env = urban_env(5, size=16)
        cells = [tuple(int(v) for v in c) for c in np.argwhere(env.heights == 0)[:4]]
        C, P = build_state(env, cells, method="sweep")
        a = png_bytes(render_placement(env, P, C))
        b = png_bytes(render_placement(env, P, C))
        assert a == b
        c = png_bytes(
            render_order_slice(env, C, SliceSpec(axis="vertical-row", coord=3, scale=4))
        )
        d = png_bytes(
            render_order_slice(env, C, SliceSpec(axis="vertical-row", coord=3, scale=4))
        )
        assert c == d


class TestOverlaysAndPalettes:
    def test_contour_outlines_buildings(self):
        h = np.zeros((8, 8))
        h[3:5, 3:5] = 0.8
        env = Environment(terrain=HeightField(h))
        C, _ = build_state(env, [(0, 0)])
        spec = SliceSpec(axis="horizontal", coord=0.9, scale=2, contour=True)
        arr = np.asarray(render_order_slice(env, C, spec))
        assert tuple(arr[3 * 2, 3 * 2]) == (10, 10, 10)  # footprint edge outlined
        assert tuple(arr[0, 0]) != (10, 10, 10)

    def test_named_colormaps(self):
        env = flat_env(4)
        C, _ = build_state(env, [(0, 0)], k=1)
        a = np.asarray(render_order_slice(env, C, SliceSpec(coord=0.5, scale=1)))
        b = np.asarray(
            render_order_slice(env, C, SliceSpec(coord=0.5, scale=1, colormap="warm"))
        )
        assert not np.array_equal(a, b)
        with pytest.raises(DomainError):
            render_order_slice(env, C, SliceSpec(coord=0.5, colormap="nope"))
