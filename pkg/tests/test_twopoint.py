import numpy as np
import pytest

import oracles
from porogen.errors import RangeError, ShapeError
from porogen.twopoint import (
    EnsembleCurve,
    TwoPointFunction,
    ensemble_stats,
    read_curve,
    s2_directional,
    s2_radial,
    specific_surface_from_s2,
    write_curve,
)
from porogen.volume import BinaryImage3D


def binary(arr, voxel_size=1.0):
    return BinaryImage3D(np.asarray(arr, dtype=bool), voxel_size)


def laminate(n=64, a=4):
    # pore slabs of thickness a normal to x
    x = np.arange(n)
    line = (x % (2 * a)) < a
    return binary(np.broadcast_to(line, (n, n, n)))


class TestDirectional:
    def test_all_pore_is_one_everywhere(self):
        img = binary(np.ones((6, 6, 6)))
        for d in ("x", "y", "z"):
            curve = s2_directional(img, d, 5)
            np.testing.assert_array_equal(curve.values, np.ones(6))

    def test_lag_zero_equals_porosity(self):
        rng = np.random.default_rng(101)
        for _ in range(10):
            img = binary(rng.random((7, 8, 9)) < rng.random())
            for d in ("x", "y", "z"):
                assert s2_directional(img, d, 3).values[0] == img.porosity()

    def test_matches_bruteforce_pair_counts(self):
        rng = np.random.default_rng(103)
        for _ in range(6):
            pore = rng.random((6, 7, 8)) < 0.5
            img = binary(pore)
            for d in ("x", "y", "z"):
                curve = s2_directional(img, d, 4)
                hits, valid = oracles.s2_pair_counts(pore, d, 4)
                # exact in counts: the value IS the count ratio, bit for bit
                np.testing.assert_array_equal(curve.values, hits / valid)

    def test_boundary_pairs_are_excluded(self):
        # one pore line hugging the outlet: lag-1 pairs all stay inside
        pore = np.zeros((1, 1, 4), dtype=bool)
        pore[0, 0, 2:] = True
        curve = s2_directional(binary(pore), "x", 3)
        np.testing.assert_allclose(curve.values, [2 / 4, 1 / 3, 0 / 2, 0 / 1])

    def test_r_max_bounds(self):
        img = binary(np.ones((4, 5, 6)))
        with pytest.raises(RangeError):
            s2_directional(img, "x", 6)
        with pytest.raises(RangeError):
            s2_directional(img, "z", 4)
        assert s2_directional(img, "z", 3).values.size == 4

    def test_stabilizes_near_phi_squared(self):
        rng = np.random.default_rng(107)
        pore = rng.random((64, 64, 64)) < 0.5
        img = binary(pore)
        phi = img.porosity()
        for d in ("x", "y", "z"):
            curve = s2_directional(img, d, 32)
            pair_count = 64 * 64 * (64 - 32)
            assert abs(curve.values[32] - phi**2) < 5 / np.sqrt(pair_count)
            assert abs(curve.values[32] - phi**2) < 0.02


class TestRadial:
    def test_is_mean_of_directions(self):
        rng = np.random.default_rng(109)
        pore = rng.random((10, 12, 14)) < 0.4
        img = binary(pore)
        radial = s2_radial(img, 6)
        per_axis = np.mean(
            [s2_directional(img, d, 6).values for d in ("x", "y", "z")], axis=0
        )
        np.testing.assert_array_equal(radial.values[1:], per_axis[1:])
        np.testing.assert_allclose(radial.values[0], per_axis[0], rtol=1e-14)
        assert radial.direction == "radial"
        assert radial.values[0] == img.porosity()

    def test_laminate_mixes_oscillation_with_flat_directions(self):
        img = laminate(n=64, a=4)
        r = np.arange(17)
        sx = s2_directional(img, "x", 16)
        expect_x = np.array([oracles.laminate_s2_along(64, 4, int(k)) for k in r])
        np.testing.assert_allclose(sx.values, expect_x, rtol=0, atol=1e-15)
        # y and z run parallel to the slabs: S2 = phi at every lag
        for d in ("y", "z"):
            np.testing.assert_allclose(s2_directional(img, d, 16).values, 0.5)
        radial = s2_radial(img, 16)
        np.testing.assert_allclose(radial.values, (expect_x + 0.5 + 0.5) / 3)
        # the hole effect survives the averaging: anti-phase lag drops to
        # (0 + phi + phi)/3, the in-phase lag recovers phi
        assert radial.values[4] == pytest.approx(1 / 3)
        assert radial.values[8] == pytest.approx(0.5)
        assert radial.values[4] < radial.values[0]

    def test_isotropic_noise_keeps_directions_close(self):
        rng = np.random.default_rng(113)
        img = binary(rng.random((48, 48, 48)) < 0.3)
        radial = s2_radial(img, 8)
        for d in ("x", "y", "z"):
            gap = np.abs(s2_directional(img, d, 8).values - radial.values)
            assert gap.max() < 0.01


class TestSpecificSurface:
    def test_all_pore_has_zero_slope(self):
        img = binary(np.ones((5, 5, 5)), voxel_size=2e-6)
        assert specific_surface_from_s2(s2_directional(img, "x", 2)) == 0.0

    def test_laminate_matches_analytic_slope(self):
        h = 27.8e-6
        img = BinaryImage3D(laminate(64, 4).pore_mask, h)
        sv = specific_surface_from_s2(s2_directional(img, "x", 1))
        expect = -4.0 * (oracles.laminate_s2_along(64, 4, 1) - 0.5) / h
        assert sv == pytest.approx(expect, rel=1e-12)
        # forward difference lands within 5% of the continuum slope 2/(a h)
        assert sv == pytest.approx(2.0 / (4 * h), rel=0.05)

    def test_cube_phantom_exact_counts(self):
        pore = np.zeros((32, 32, 32), dtype=bool)
        pore[11:21, 11:21, 11:21] = True
        curve = s2_directional(binary(pore), "x", 1)
        assert curve.values[0] == 1000 / 32768
        assert curve.values[1] == 900 / (32 * 32 * 31)
        sv = specific_surface_from_s2(curve)
        assert sv == pytest.approx(-4 * (900 / 31744 - 1000 / 32768), rel=1e-12)

    def test_needs_two_lags(self):
        img = binary(np.ones((4, 4, 4)))
        with pytest.raises(RangeError):
            specific_surface_from_s2(s2_directional(img, "x", 0))


class TestEnsemble:
    def test_single_curve(self):
        curve = TwoPointFunction(np.arange(3), [0.5, 0.3, 0.25], "x", 1.0)
        stats = ensemble_stats([curve])
        np.testing.assert_array_equal(stats.mean, curve.values)
        np.testing.assert_array_equal(stats.std, np.zeros(3))
        assert stats.count == 1

    def test_two_point_arithmetic(self):
        a = TwoPointFunction(np.arange(2), [0.2, 0.1], "y", 1.0)
        b = TwoPointFunction(np.arange(2), [0.4, 0.3], "y", 1.0)
        stats = ensemble_stats([a, b])
        np.testing.assert_allclose(stats.mean, [0.3, 0.2])
        np.testing.assert_allclose(stats.std, [0.1, 0.1])

    def test_mean_tracks_generating_porosity(self):
        rng = np.random.default_rng(127)
        p = 0.35
        curves = [
            s2_radial(binary(rng.random((16, 16, 16)) < p), 8) for _ in range(64)
        ]
        stats = ensemble_stats(curves)
        assert stats.count == 64
        sigma = stats.std[0]
        assert abs(stats.mean[0] - p) < 3 * max(sigma, 1e-3) / np.sqrt(64)

    def test_mixed_grids_rejected(self):
        a = TwoPointFunction(np.arange(2), [0.2, 0.1], "x", 1.0)
        b = TwoPointFunction(np.arange(3), [0.2, 0.1, 0.1], "x", 1.0)
        c = TwoPointFunction(np.arange(2), [0.2, 0.1], "y", 1.0)
        with pytest.raises(ShapeError):
            ensemble_stats([a, b])
        with pytest.raises(ShapeError):
            ensemble_stats([a, c])
        with pytest.raises(ShapeError):
            ensemble_stats([])

    def test_std_is_population_not_sample(self):
        a = TwoPointFunction(np.arange(1), [0.0], "x", 1.0)
        b = TwoPointFunction(np.arange(1), [1.0], "x", 1.0)
        stats = ensemble_stats([a, b])
        assert stats.std[0] == pytest.approx(0.5)  # ddof = 0


class TestSerialization:
    def test_roundtrip_is_exact(self, tmp_path):
        rng = np.random.default_rng(131)
        img = binary(rng.random((9, 9, 9)) < 0.5, voxel_size=27.8e-6)
        curve = s2_radial(img, 5)
        path = tmp_path / "s2.csv"
        write_curve(curve, path, image_id="img-007")
        back, header = read_curve(path)
        np.testing.assert_array_equal(back.distances, curve.distances)
        np.testing.assert_array_equal(back.values, curve.values)
        assert back.direction == "radial"
        assert back.voxel_size == curve.voxel_size
        assert header["image_id"] == "img-007"

    def test_csv_header_and_lag_column(self, tmp_path):
        curve = TwoPointFunction(np.arange(2), [0.5, 0.25], "x", 2e-6)
        path = tmp_path / "c.csv"
        write_curve(curve, path)
        lines = path.read_text().strip().split("\n")
        assert lines[0] == "lag_voxels,lag_m,value"
        assert lines[1].split(",")[0] == "0"
        assert float(lines[2].split(",")[1]) == pytest.approx(2e-6)

    def test_curve_validation(self):
        with pytest.raises(RangeError):
            TwoPointFunction(np.arange(2), [0.5, 1.5], "x", 1.0)
        with pytest.raises(ShapeError):
            TwoPointFunction(np.arange(3), [0.5, 0.5], "x", 1.0)
        with pytest.raises(RangeError):
            EnsembleCurve(np.arange(1), np.array([0.5]), np.array([-0.1]), 2, "x", 1.0)
