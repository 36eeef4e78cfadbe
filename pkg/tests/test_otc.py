import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from otctrack import otc
from otctrack.imaging import PatchSample


def patch_of(gray, rgb=None):
    gray = np.asarray(gray, dtype=float)
    if rgb is None:
        rgb = np.repeat(gray[..., None], 3, axis=2)
    n = gray.shape[0]
    return PatchSample((n / 2, n / 2), gray, np.asarray(rgb, dtype=float))


def rgb_patch(pix):
    pix = np.asarray(pix, dtype=float)
    return patch_of(pix @ np.array([0.299, 0.587, 0.114]), pix)


def strip_sets(n, theta):
    part = otc.strip_partition(n, theta)
    idx = part.strip_index.reshape(n, n)
    return [{(y, x) for y in range(n) for x in range(n) if idx[y, x] == i} for i in range(n)]


def test_strips_n3_rows_cols():
    rows = strip_sets(3, 0.0)
    assert rows == [{(r, 0), (r, 1), (r, 2)} for r in range(3)]
    cols = strip_sets(3, 90.0)
    # row index y is "down"; at 90 deg the projection is -(x - c)
    assert sorted(map(sorted, cols)) == sorted(sorted({(0, c), (1, c), (2, c)}) for c in range(3))
    assert otc.strip_partition(3, 0.0).counts.tolist() == [3, 3, 3]
    assert otc.strip_partition(3, 90.0).counts.tolist() == [3, 3, 3]


def test_strips_n3_diagonal():
    groups = strip_sets(3, 45.0)
    by_diff = [{(y, x) for y in range(3) for x in range(3) if y - x in ds}
               for ds in ({-2, -1}, {0}, {1, 2})]
    assert groups == by_diff
    assert otc.strip_partition(3, 45.0).counts.tolist() == [3, 3, 3]


@pytest.mark.parametrize("n", [3, 5, 7, 9, 11, 13, 15, 21])
def test_partitions_cover_and_nonempty(n):
    for theta in otc.ORIENTATIONS_DEG:
        part = otc.strip_partition(n, theta)
        assert part.strip_index.shape == (n * n,)
        assert part.counts.sum() == n * n
        assert (part.counts > 0).all()


def test_curves_examples():
    g = np.arange(1, 10, dtype=float).reshape(3, 3)
    curves = otc.compute_curves(patch_of(g))
    assert curves.gray[0].tolist() == pytest.approx([2, 5, 8])
    # columns, in order of increasing projection d = -(x - c): right to left
    assert curves.gray[4].tolist() == pytest.approx([6, 5, 4])
    assert sorted(curves.gray[4]) == pytest.approx([4, 5, 6])


def test_constant_patch_curves():
    curves = otc.compute_curves(patch_of(np.full((5, 5), 7.0)))
    assert (curves.gray == 7.0).all()


@pytest.mark.parametrize("v,grad", [((2, 5, 8), (3, 3)), ((4, 4, 4), (0, 0)), ((0, 1, 0), (1, -1))])
def test_gradient(v, grad):
    assert otc.curve_gradient(v).tolist() == list(grad)


@pytest.mark.parametrize("dv,curv", [((3, 3), (0,)), ((1, -1), (-2,)), ((2.5, 2.5, 2.5), (0, 0))])
def test_curvature(dv, curv):
    assert otc.curve_curvature(dv).tolist() == list(curv)


def test_rgb_gradient_sign():
    V = np.array([[0, 0, 0], [3, 4, 0]], dtype=float)
    assert otc.rgb_gradient(V, np.array([0.7])).tolist() == [5.0]
    assert otc.rgb_gradient(V, np.array([-0.1])).tolist() == [-5.0]
    flat = np.tile([[9.0, 1.0, 3.0]], (4, 1))
    assert otc.rgb_gradient(flat, np.zeros(3)).tolist() == [0.0, 0.0, 0.0]


@pytest.mark.parametrize("n,length", [(13, 185), (3, 25), (5, 57)])
def test_descriptor_length(n, length):
    assert otc.descriptor_length(n) == length
    rng = np.random.default_rng(n)
    d = otc.describe(rgb_patch(rng.uniform(0, 255, (n, n, 3))))
    assert d.shape == (length,)


@pytest.mark.parametrize("mode", otc.MODES)
@pytest.mark.parametrize("n", [3, 13])
def test_constant_patch_canonical(n, mode):
    d = otc.describe(rgb_patch(np.full((n, n, 3), [12.0, 200.0, 77.0])), mode)
    expected = np.zeros(otc.descriptor_length(n))
    expected[0] = 1.0
    assert np.array_equal(d, expected)


def test_hbin_before_normalization():
    rng = np.random.default_rng(3)
    g = rng.uniform(0, 255, (5, 5))
    p = patch_of(g)
    curves = otc.compute_curves(p)
    dv = np.diff(curves.gray, axis=1)
    raw = np.concatenate([[0.05], np.concatenate([dv, np.diff(dv, axis=1)], axis=1).ravel()])
    assert np.allclose(otc.describe(p, otc.GRAY), raw / np.linalg.norm(raw), atol=1e-12)


def _direct_curves(gray, n, theta):
    # independent strip assignment, recomputed from the projection formula
    c = (n - 1) / 2
    t = math.radians(theta)
    d = {(y, x): -math.sin(t) * (x - c) + math.cos(t) * (y - c) for y in range(n) for x in range(n)}
    lo, hi = min(d.values()), max(d.values())
    span = hi - lo
    strips = [[] for _ in range(n)]
    for (y, x), v in d.items():
        strips[int(math.floor(n * (v - lo) / (span + 1e-9 * span)))].append(gray[y, x])
    return [sum(s) / len(s) for s in strips]


@pytest.mark.parametrize("n", [3, 5, 13])
def test_curves_match_direct(n):
    g = np.random.default_rng(n).uniform(0, 255, (n, n))
    curves = otc.compute_curves(patch_of(g))
    for j, theta in enumerate(otc.ORIENTATIONS_DEG):
        assert curves.gray[j] == pytest.approx(_direct_curves(g, n, theta), abs=1e-9)


@pytest.mark.parametrize("mode", otc.MODES)
def test_stack_path_matches_loop_path(mode):
    rng = np.random.default_rng(5)
    pix = rng.uniform(0, 255, (6, 13, 13, 3))
    gray = pix @ np.array([0.299, 0.587, 0.114])
    batch = otc.describe_stack(gray, pix, mode)
    for m in range(6):
        single = otc.assemble_descriptor(otc.compute_curves(patch_of(gray[m], pix[m])), mode)
        assert np.allclose(batch[m], single, atol=1e-12)


def test_describe_stack_empty_and_bad():
    assert otc.describe_stack(np.empty((0, 5, 5)), np.empty((0, 5, 5, 3))).shape == (0, 57)
    with pytest.raises(ValueError):
        otc.describe_stack(np.zeros((1, 4, 4)), np.zeros((1, 4, 4, 3)))
    with pytest.raises(ValueError):
        otc.describe_stack(np.zeros((1, 5, 5)), None, otc.RGB)
    with pytest.raises(ValueError):
        otc.describe(rgb_patch(np.zeros((3, 3, 3))), "hsv")


patches = st.sampled_from([3, 5, 13]).flatmap(
    lambda n: arrays(np.float64, (n, n, 3), elements=st.floats(0, 255, allow_nan=False)))


@settings(max_examples=60, deadline=None)
@given(patches)
def test_strip_conservation(pix):
    n = pix.shape[0]
    p = rgb_patch(pix)
    curves = otc.compute_curves(p)
    for j, theta in enumerate(otc.ORIENTATIONS_DEG):
        counts = otc.strip_partition(n, theta).counts
        assert np.dot(counts, curves.gray[j]) == pytest.approx(p.gray.sum(), abs=1e-9 * max(1.0, p.gray.sum()))


@settings(max_examples=60, deadline=None)
@given(patches, st.floats(-100, 100, allow_nan=False), st.sampled_from(otc.MODES))
def test_offset_invariance(pix, c, mode):
    a = otc.describe(rgb_patch(pix), mode)
    b = otc.describe(rgb_patch(pix + c), mode)
    assert np.max(np.abs(a - b)) <= 1e-9


@settings(max_examples=60, deadline=None)
@given(patches, st.sampled_from(otc.MODES))
def test_unit_norm_and_hbin_positive(pix, mode):
    d = otc.describe(rgb_patch(pix), mode)
    assert np.linalg.norm(d) == pytest.approx(1.0, abs=1e-12)
    assert d[0] > 0


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([3, 5, 13]).flatmap(
    lambda n: arrays(np.float64, (n, n), elements=st.floats(0, 255, allow_nan=False))))
def test_gray_rgb_consistency(g):
    # a gray RGB patch has |dRGB| = sqrt(3)|dV| with the same sign
    p = patch_of(g)
    curves = otc.compute_curves(p)
    dv = otc.curve_gradient(curves.gray)
    assert np.allclose(otc.rgb_gradient(curves.rgb, dv), math.sqrt(3) * dv, atol=1e-8)


def test_rotation_sensitivity():
    # horizontal stripes versus the same stripes rotated by 90 degrees
    g = np.tile(np.array([0, 0, 255, 255, 0, 0, 255, 255, 0, 0, 255, 255, 0], float)[:, None], (1, 13))
    a = otc.describe(patch_of(g), otc.GRAY)
    b = otc.describe(patch_of(g.T), otc.GRAY)
    assert np.max(np.abs(a - b)) > 0.1


def test_rotation_sensitivity_one_hot():
    g = np.zeros((13, 13))
    g[2, 9] = 255.0
    a = otc.describe(patch_of(g), otc.GRAY)
    b = otc.describe(patch_of(np.rot90(g)), otc.GRAY)
    assert np.linalg.norm(a - b) > 0


@settings(max_examples=60, deadline=None)
@given(patches)
def test_curves_within_patch_range(pix):
    p = rgb_patch(pix)
    curves = otc.compute_curves(p)
    tol = 1e-9
    assert (curves.gray >= p.gray.min() - tol).all() and (curves.gray <= p.gray.max() + tol).all()
    lo, hi = pix.reshape(-1, 3).min(axis=0), pix.reshape(-1, 3).max(axis=0)
    assert (curves.rgb >= lo - tol).all() and (curves.rgb <= hi + tol).all()
