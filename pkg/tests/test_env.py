import numpy as np
import pytest

from kcover.env import (
    Environment,
    HeightField,
    Point3,
    candidate_cells,
    free_volume,
    is_free,
    load_heightmap_png,
    load_mask_png,
    save_heightmap_png,
    save_mask_png,
    sensor_position,
)
from kcover.errors import ConfigError, DomainError

from conftest import flat_env, slab_free_volume, urban_env


class TestIsFree:
    def test_flat_positive_altitude(self):
        env = flat_env()
        assert is_free(env, Point3(0.5, 0.5, 0.5))

    def test_terrain_top_is_obstacle(self):
        h = np.zeros((8, 8))
        h[3, 3] = 0.7
        env = Environment(terrain=HeightField(h))
        assert not is_free(env, Point3(3.5, 3.5, 0.7))
        assert is_free(env, Point3(3.5, 3.5, 0.71))

    def test_out_of_bounds(self):
        env = flat_env()
        with pytest.raises(DomainError):
            is_free(env, Point3(9.0, 0.5, 0.5))
        with pytest.raises(DomainError):
            is_free(env, Point3(0.5, 0.5, 1.5))

    def test_monotone_in_altitude(self):
        env = urban_env(3)
        rng = np.random.default_rng(0)
        for _ in range(200):
            i, j = rng.integers(32), rng.integers(32)
            z = rng.random()
            p = Point3((j + 0.5), (i + 0.5), z)
            if is_free(env, p):
                z2 = z + (1.0 - z) * rng.random()
                assert is_free(env, Point3(p.x, p.y, min(z2, 1.0)))


class TestFreeVolume:
    def test_flat_box(self):
        assert free_volume(flat_env(8)) == 64.0

    def test_half_blocked(self):
        env = Environment(terrain=HeightField(np.array([[0.0, 0.0], [1.0, 1.0]])))
        assert free_volume(env) == 2.0

    def test_matches_voxel_quadrature(self):
        for seed in range(5):
            env = urban_env(seed)
            exact = free_volume(env)
            vox = slab_free_volume(env, nz=1024)
            assert abs(exact - vox) <= 1e-9 * max(1.0, abs(exact))

    def test_cell_size_scaling(self):
        env = Environment(terrain=HeightField(np.zeros((4, 4)), cell_size=0.5))
        assert free_volume(env) == pytest.approx(16 * 0.25 * 1.0)


class TestCandidates:
    def test_flat_all_cells(self):
        env = flat_env(8)
        assert candidate_cells(env).shape == (64, 2)

    def test_building_excluded(self):
        h = np.zeros((8, 8))
        h[2:4, 2:5] = 0.5
        env = Environment(terrain=HeightField(h))
        cand = candidate_cells(env)
        assert cand.shape[0] == 64 - 6
        cand_set = {tuple(c) for c in cand}
        assert (2, 2) not in cand_set and (3, 4) not in cand_set

    def test_all_built_is_config_error(self):
        env = Environment(terrain=HeightField(np.full((4, 4), 0.5)))
        with pytest.raises(ConfigError):
            candidate_cells(env)

    def test_mounting_altitude_is_free(self):
        env = urban_env(7)
        for cell in candidate_cells(env):
            pos = sensor_position(env, cell)
            assert is_free(env, pos)

    def test_near_ceiling_ground_excluded(self):
        h = np.zeros((4, 4))
        env = Environment(
            terrain=HeightField(h), z_ceil=1.0, sensor_height=0.5, ground_threshold=0.6
        )
        h2 = h.copy()
        h2[0, 0] = 0.6  # mounted sensor would sit exactly at the ceiling
        env2 = Environment(
            terrain=HeightField(h2), z_ceil=1.0, sensor_height=0.5, ground_threshold=0.6
        )
        assert candidate_cells(env2).shape[0] == 15


class TestValidation:
    def test_too_small_grid(self):
        with pytest.raises(ConfigError):
            HeightField(np.zeros((1, 5)))

    def test_negative_heights(self):
        with pytest.raises(ConfigError):
            HeightField(np.full((3, 3), -0.1))

    def test_terrain_above_ceiling(self):
        with pytest.raises(ConfigError):
            Environment(terrain=HeightField(np.full((3, 3), 1.5)), z_ceil=1.0)

    def test_non_finite_point(self):
        with pytest.raises(DomainError):
            Point3(float("nan"), 0.0, 0.0)


class TestPngIo:
    def test_heightmap_roundtrip(self, tmp_path):
        env = urban_env(11)
        path = tmp_path / "map.png"
        save_heightmap_png(env.terrain, path)
        back = load_heightmap_png(path)
        assert np.allclose(back.values, env.heights, atol=1.0 / 65535)

    def test_mask_roundtrip(self, tmp_path):
        rng = np.random.default_rng(5)
        mask = (rng.random((16, 16)) < 0.3).astype(np.uint8)
        path = tmp_path / "mask.png"
        save_mask_png(mask, path)
        assert np.array_equal(load_mask_png(path), mask)

    def test_heightmap_rejects_8bit(self, tmp_path):
        mask = np.zeros((8, 8), dtype=np.uint8)
        path = tmp_path / "m.png"
        save_mask_png(mask, path)
        with pytest.raises(ConfigError):
            load_heightmap_png(path)
