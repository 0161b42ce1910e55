import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adasharp.degradation import (
    DEFAULT_ALPHA_TABLE,
    AlphaTable,
    build_hard_alpha_map,
    degrade_direct,
    degrade_direct_plane,
    degrade_fixed_point,
    degrade_fixed_point_plane,
    gaussian_blur_3x3,
)
from adasharp.errors import ConvergenceError, DimensionError
from adasharp.frame_io import Frame
from adasharp.partition import PartitionMask, partition_frame
from adasharp.sharpen import usm_plane
from oracles import blur3x3_direct, random_mask

IMPULSE = np.zeros((3, 3))
IMPULSE[1, 1] = 255.0


def test_alpha_table_defaults_and_parse():
    assert DEFAULT_ALPHA_TABLE.alpha_by_size == {8: 1.5, 16: 3.0, 32: 3.0, 64: 1.5}
    table = AlphaTable.parse("8:0.5,16:1,32:2,64:0")
    assert table[32] == 2.0
    assert AlphaTable.parse(table.format()) == table
    for bad in ("8:1,16:1,32:1", "8:1,16:1,32:1,64:-1", "8:x,16:1,32:1,64:1", "8:1,16:1,32:1,63:1"):
        with pytest.raises(ValueError):
            AlphaTable.parse(bad)


def test_blur_constant_plane():
    np.testing.assert_array_equal(gaussian_blur_3x3(np.full((5, 7), 42.0)), np.full((5, 7), 42.0))


def test_blur_impulse_center():
    assert gaussian_blur_3x3(IMPULSE)[1, 1] == 63.75


def test_blur_preserves_ramp_interior():
    ramp = np.tile(np.arange(10, dtype=np.float64), (6, 1))
    out = gaussian_blur_3x3(ramp)
    np.testing.assert_allclose(out[:, 1:-1], ramp[:, 1:-1], atol=1e-12)


def test_blur_matches_direct_convolution(rng):
    plane = rng.uniform(0, 255, (13, 17))
    np.testing.assert_allclose(gaussian_blur_3x3(plane), blur3x3_direct(plane), rtol=0, atol=1e-10)


def test_blur_single_pixel_and_row():
    assert gaussian_blur_3x3(np.array([[5.0]]))[0, 0] == 5.0
    np.testing.assert_allclose(gaussian_blur_3x3(np.array([[0.0, 4.0, 0.0]])), [[1.0, 2.0, 1.0]])


def test_hard_alpha_map():
    mask = PartitionMask.uniform(64, 64, 64)
    np.testing.assert_array_equal(build_hard_alpha_map(mask), np.full((64, 64), 1.5))
    sizes = np.full((16, 32), 8, dtype=np.uint8)
    sizes[:, 16:] = 16
    amap = build_hard_alpha_map(PartitionMask(sizes))
    assert set(np.unique(amap)) == {1.5, 3.0}
    assert np.all(amap[:, :16] == 1.5) and np.all(amap[:, 16:] == 3.0)
    assert np.all(build_hard_alpha_map(PartitionMask(sizes), AlphaTable.uniform(0.0)) == 0)
    with pytest.raises(DimensionError):
        build_hard_alpha_map(PartitionMask(sizes), shape=(16, 16))


def test_degrade_direct_impulse_center():
    assert degrade_direct_plane(IMPULSE, 1.5)[1, 1] == 140.25


def test_degrade_direct_identities(rng):
    gt = Frame(rng.integers(0, 256, (24, 40), dtype=np.uint8), *(np.full((12, 20), 9, np.uint8),) * 2)
    mask = partition_frame(gt)
    assert degrade_direct(gt, mask, AlphaTable.uniform(0.0)) == gt
    const = Frame(np.full((24, 40), 77, dtype=np.uint8))
    assert degrade_direct(const, mask) == const
    lq = degrade_direct(gt, mask)
    np.testing.assert_array_equal(lq.cb, gt.cb)
    np.testing.assert_array_equal(lq.cr, gt.cr)


def test_degrade_dimension_mismatch():
    gt = Frame(np.zeros((16, 16), dtype=np.uint8))
    with pytest.raises(DimensionError):
        degrade_direct(gt, PartitionMask.uniform(16, 8, 8))
    with pytest.raises(DimensionError):
        degrade_fixed_point(gt, PartitionMask.uniform(16, 8, 8))


def test_fixed_point_alpha_zero_is_one_step(rng):
    gt = rng.integers(0, 256, (20, 20)).astype(np.float64)
    result = degrade_fixed_point_plane(gt, 0.0, tol=1e-6, max_iter=10)
    assert result.iterations == 1
    np.testing.assert_array_equal(result.plane, gt)


def test_fixed_point_constant():
    gt = np.full((9, 9), 31.0)
    np.testing.assert_array_equal(degrade_fixed_point_plane(gt, 3.0).plane, gt)


def test_fixed_point_inverts_sharpening(rng):
    gt = rng.integers(0, 256, (48, 48)).astype(np.float64)
    lq = degrade_fixed_point_plane(gt, 3.0, tol=1e-6).plane
    assert np.abs(usm_plane(lq, 3.0) - gt).max() < 1e-4


def test_fixed_point_inverts_sharpening_for_arbitrary_masks(rng):
    for _ in range(5):
        gt = rng.integers(0, 256, (70, 90)).astype(np.float64)
        alpha = build_hard_alpha_map(random_mask(rng, 70, 90))
        lq = degrade_fixed_point_plane(gt, alpha, tol=1e-6).plane
        assert np.abs(usm_plane(lq, alpha) - gt).max() < 1e-4


def test_fixed_point_nonconvergence_carries_residual(rng):
    gt = rng.integers(0, 256, (16, 16)).astype(np.float64)
    with pytest.raises(ConvergenceError) as info:
        degrade_fixed_point_plane(gt, 3.0, tol=1e-12, max_iter=3)
    assert info.value.residual > 1e-12


def test_fixed_point_argument_checks():
    with pytest.raises(ValueError):
        degrade_fixed_point_plane(np.zeros((4, 4)), 1.0, tol=0)
    with pytest.raises(ValueError):
        degrade_fixed_point_plane(np.zeros((4, 4)), 1.0, max_iter=0)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), alpha=st.floats(0.1, 6.0))
def test_fixed_point_contraction_ratio(seed, alpha):
    gt = np.random.default_rng(seed).integers(0, 256, (24, 24)).astype(np.float64)
    residuals = degrade_fixed_point_plane(gt, alpha, tol=1e-9).residuals
    q = alpha / (1 + alpha)
    for prev, cur in zip(residuals, residuals[1:]):
        assert cur <= q * prev * (1 + 1e-9) + 1e-12


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_direct_output_stays_within_input_range(seed):
    rng = np.random.default_rng(seed)
    gt = rng.integers(0, 256, (32, 32)).astype(np.float64)
    alpha = build_hard_alpha_map(random_mask(rng, 32, 32))
    for plane in (degrade_direct_plane(gt, alpha), degrade_fixed_point_plane(gt, alpha).plane):
        assert plane.min() >= gt.min() - 1e-9
        assert plane.max() <= gt.max() + 1e-9


def _total_variation(x):
    return np.abs(np.diff(x, axis=0)).sum() + np.abs(np.diff(x, axis=1)).sum()


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_larger_alpha_blurs_more(seed):
    gt = np.random.default_rng(seed).integers(0, 256, (40, 40)).astype(np.float64)
    tv = [_total_variation(degrade_direct_plane(gt, a)) for a in (0.0, 0.5, 1.5, 3.0, 6.0)]
    assert all(b <= a + 1e-9 for a, b in zip(tv, tv[1:]))
