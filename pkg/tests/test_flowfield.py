import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tilestream.flowfield import (Frame, InputError, ViewpointSample, depth_proxy_map, estimate_flow,
                                  relative_depth_map, relative_velocity_map, viewpoint_pixel)


def textured(h=48, w=96, seed=0):
    rng = np.random.default_rng(seed)
    return rng.integers(0, 256, size=(h, w)).astype(np.float64)


def bilinear_shift(img, sx, sy):
    """Sample img at (x - sx, y - sy) with wrap padding."""
    h, w = img.shape
    yy, xx = np.mgrid[0:h, 0:w].astype(np.float64)
    x = xx - sx
    y = yy - sy
    x0 = np.floor(x).astype(int)
    y0 = np.floor(y).astype(int)
    fx, fy = x - x0, y - y0
    g = lambda r, c: img[r % h, c % w]
    return ((1 - fx) * (1 - fy) * g(y0, x0) + fx * (1 - fy) * g(y0, x0 + 1)
            + (1 - fx) * fy * g(y0 + 1, x0) + fx * fy * g(y0 + 1, x0 + 1))


def test_identical_frames_give_zero_flow():
    a = textured()
    flow = estimate_flow(a, a, block=8, radius=3)
    assert flow.shape == (48, 96, 2)
    assert np.all(flow == 0)


def test_flat_frames_prefer_zero_displacement():
    a = np.full((24, 48), 7.0)
    assert np.all(estimate_flow(a, a, block=8, radius=2) == 0)


def test_shift_right_two_pixels():
    a = textured()
    b = np.roll(a, 2, axis=1)
    flow = estimate_flow(a, b, block=8, radius=3)
    assert np.median(flow[..., 0]) == 2
    assert np.median(flow[..., 1]) == 0


def test_frame_smaller_than_block():
    a = textured(12, 24)
    with pytest.raises(InputError):
        estimate_flow(a, a, block=32, radius=3)


def test_dimension_mismatch():
    with pytest.raises(InputError):
        estimate_flow(textured(48, 96), textured(24, 96), block=8, radius=2)


def test_vectors_bounded_by_radius():
    flow = estimate_flow(textured(seed=1), textured(seed=2), block=8, radius=3)
    assert np.abs(flow).max() <= 3


@settings(max_examples=20, deadline=None)
@given(st.integers(-3, 3), st.integers(-3, 3), st.integers(0, 1000))
def test_integer_translation_recovered(dx, dy, seed):
    a = textured(seed=seed)
    b = np.roll(a, (dy, dx), axis=(0, 1))
    flow = estimate_flow(a, b, block=8, radius=3)
    assert np.median(flow[..., 0]) == dx
    assert np.median(flow[..., 1]) == dy


@settings(max_examples=15, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 1000))
def test_fractional_translation_within_half_pixel(sx, sy, seed):
    # smooth texture so bilinear resampling stays faithful
    a = textured(seed=seed)
    for _ in range(2):
        a = (a + np.roll(a, 1, 0) + np.roll(a, 1, 1) + np.roll(a, (1, 1), (0, 1))) / 4
    b = bilinear_shift(a, sx, sy)
    flow = estimate_flow(a, b, block=8, radius=4)
    assert abs(np.median(flow[..., 0]) - sx) <= 0.5 + 1e-9
    assert abs(np.median(flow[..., 1]) - sy) <= 0.5 + 1e-9


def uniform_flow(dx, dy, h=12, w=24):
    f = np.zeros((h, w, 2))
    f[..., 0], f[..., 1] = dx, dy
    return f


def test_relative_velocity_examples():
    assert np.all(relative_velocity_map(uniform_flow(3, 4), (3, 4)) == 0)
    assert np.allclose(relative_velocity_map(uniform_flow(3, 4), (0, 0)), 5.0)
    f = np.zeros((12, 24, 2))
    f[5, 7] = (1, 0)
    m = relative_velocity_map(f, (0, 1))
    assert m[5, 7] == pytest.approx(np.sqrt(2))


@given(st.floats(-10, 10), st.floats(-10, 10), st.integers(0, 100))
def test_relative_velocity_symmetric_under_negation(vx, vy, seed):
    f = np.random.default_rng(seed).normal(size=(12, 24, 2)) * 3
    assert np.allclose(relative_velocity_map(f, (vx, vy)), relative_velocity_map(-f, (-vx, -vy)))


def test_depth_proxy_examples():
    assert np.all(depth_proxy_map(np.zeros((12, 24, 2))) == 0)
    f = uniform_flow(2, 0)
    f[:, 12:] = (0, 4)
    d = depth_proxy_map(f, 0.5)
    assert np.allclose(d[:, :12], 0.5) and np.allclose(d[:, 12:], 1.0)
    assert np.all(depth_proxy_map(uniform_flow(0.3, 0.2), 0.5) == 0)


@given(st.integers(0, 1000), st.floats(0.5, 20))
def test_depth_proxy_range_and_scale_invariance(seed, c):
    f = np.random.default_rng(seed).normal(size=(12, 24, 2)) * 3
    d = depth_proxy_map(f, 0.0)
    assert d.min() >= 0 and d.max() <= 1
    assert np.allclose(depth_proxy_map(f * c, 0.0), d)


def test_relative_depth_examples():
    vp = ViewpointSample(0.0, 0.0, 0.0)
    assert np.all(relative_depth_map(np.full((12, 24), 0.4), vp) == 0)
    D = np.full((12, 24), 0.2)
    r, c = viewpoint_pixel(0.0, 0.0, 24, 12)
    D[r, c] = 0.9
    out = relative_depth_map(D, vp)
    assert out[r, c] == 0
    mask = np.ones_like(out, dtype=bool)
    mask[r, c] = False
    assert np.allclose(out[mask], 0.7)
    D = np.zeros((12, 24))
    D[:, :3] = 1.0
    out = relative_depth_map(D, vp)
    assert np.all(out[:, :3] == 1.0)


@given(st.integers(0, 1000), st.floats(-180, 179.99), st.floats(-90, 90))
def test_relative_depth_range_and_zero_at_viewpoint(seed, yaw, pitch):
    D = np.random.default_rng(seed).random((12, 24))
    out = relative_depth_map(D, ViewpointSample(0, yaw, pitch))
    r, c = viewpoint_pixel(yaw, pitch, 24, 12)
    assert out[r, c] == 0 and out.min() >= 0 and out.max() <= 1


def test_viewpoint_projection_and_bounds():
    assert viewpoint_pixel(-180.0, 90.0, 24, 12) == (0, 0)
    assert viewpoint_pixel(0.0, 0.0, 24, 12) == (6, 12)
    with pytest.raises(InputError):
        relative_depth_map(np.zeros((12, 24)), ViewpointSample(0, 200.0, 0.0))


def test_frame_validation():
    Frame(np.zeros((12, 24)))
    with pytest.raises(InputError):
        Frame(np.zeros((12, 25)))
    with pytest.raises(InputError):
        Frame(np.full((12, 24), 256))
