"""
Tests for tiling and stitching.
"""
import numpy as np
import numpy.testing as npt
import unittest

from hxseg.utils.tile_utils import axis_origins, plan_tiles, stitch


class TestTileUtils(unittest.TestCase):
    """
    Tests for tile_utils.
    """
    def setUp(self):
        """
        Set up tests.
        """
        self.rng = np.random.RandomState(3)

    def test_single_tile(self):
        """
        A tile the size of the image gives one tile at the origin.
        """
        plan = plan_tiles(128, 128, 128)
        assert plan.origins == [(0, 0)]

    def test_houston_dims(self):
        """
        349x1905 with 128 tiles at 50% overlap gives 5 x 29 = 145 tiles.
        """
        plan = plan_tiles(349, 1905, 128, 0.5)
        assert plan.stride == 64
        assert axis_origins(349, 128, 64) == [0, 64, 128, 192, 221]
        assert len(axis_origins(1905, 128, 64)) == 29
        assert len(plan) == 145

    def test_coverage_sweep(self):
        """
        Random plans cover every pixel and stay in bounds.
        """
        for _ in range(50):
            h, w = self.rng.randint(1, 60, size=2)
            tile = self.rng.randint(1, min(h, w) + 1)
            ratio = self.rng.uniform(0, 0.95)
            plan = plan_tiles(h, w, tile, ratio)
            for row, col in plan:
                assert 0 <= row <= h - tile and 0 <= col <= w - tile
            assert plan.coverage().min() >= 1

    def test_invalid_plans(self):
        """
        Oversized tiles and bad ratios are rejected.
        """
        with self.assertRaises(ValueError):
            plan_tiles(10, 20, 11)
        with self.assertRaises(ValueError):
            plan_tiles(10, 10, 4, 1.0)
        with self.assertRaises(ValueError):
            plan_tiles(10, 10, 4, -0.1)

    def test_stitch_single(self):
        """
        A single covering tile is returned unchanged.
        """
        logits = self.rng.randn(4, 4, 3)
        npt.assert_array_equal(stitch([((0, 0), logits)], 4, 4), logits)

    def test_stitch_average(self):
        """
        Half-overlapping constant tiles average in the overlap.
        """
        a = np.full((4, 4, 1), 2.)
        b = np.full((4, 4, 1), 6.)
        out = stitch([((0, 0), a), ((0, 2), b)], 4, 6)
        npt.assert_array_equal(out[:, :2, 0], 2.)
        npt.assert_array_equal(out[:, 2:4, 0], 4.)
        npt.assert_array_equal(out[:, 4:, 0], 6.)

    def test_tile_stitch_identity(self):
        """
        Cutting a logits field into tiles and stitching restores it.
        """
        field = self.rng.randn(37, 23, 4)
        plan = plan_tiles(37, 23, 8, 0.5)
        tiles = [(o, field[plan.window(o)]) for o in plan]
        npt.assert_allclose(stitch(tiles, 37, 23), field, atol=1e-12)
        constant = np.full((37, 23, 2), 0.3)
        tiles = [(o, constant[plan.window(o)]) for o in plan]
        npt.assert_allclose(stitch(tiles, 37, 23), 0.3, atol=1e-15)

    def test_uncovered_pixel(self):
        """
        Missing coverage and out-of-bounds tiles are rejected.
        """
        tile = np.zeros((2, 2, 1))
        with self.assertRaisesRegex(ValueError, 'not covered'):
            stitch([((0, 0), tile)], 2, 4)
        with self.assertRaises(ValueError):
            stitch([((1, 3), tile)], 2, 4)
        with self.assertRaises(ValueError):
            stitch([], 2, 2)
