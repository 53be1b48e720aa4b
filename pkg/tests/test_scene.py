import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from blastoformer import scene
from blastoformer.scene import (Charge, GridSpec, Obstacle, Scenario, box_sdf_footprint,
                                build_model_input, charge_field, obstacle_sdf_field,
                                sample_scenario)

from _oracles import rect_boundary_distance

UNIT = Obstacle(0.0, 1.0, 0.0, 1.0, 0.0, 1.0)


def _scenario(obstacles, charge=Charge(0.0, -2.0, 10.0)):
    return Scenario(obstacles=tuple(obstacles), charge=charge, seed=0)


def _in(v, lo_hi):
    return lo_hi[0] <= v <= lo_hi[1]


def test_sampling_is_deterministic():
    assert sample_scenario(7) == sample_scenario(7)
    assert sample_scenario(7).to_json() == sample_scenario(7).to_json()
    assert sample_scenario(7) != sample_scenario(8)


def test_sampled_fields_within_windows():
    for seed in range(10_000):
        s = sample_scenario(seed)
        y_min = s.obstacles[0].y_min
        assert _in(y_min, scene.Y_MIN_RANGE)
        for ob, (xr_min, xr_max) in zip(s.obstacles, scene.OBSTACLE_X_WINDOWS):
            assert _in(ob.x_min, xr_min) and _in(ob.x_max, xr_max)
            assert ob.y_min == y_min and ob.y_max == s.obstacles[0].y_max
            assert _in(ob.y_max - ob.y_min, (0.5 - 1e-12, 1.0 + 1e-12))
            assert ob.z_min == 0.0 and _in(ob.z_max, scene.H_Z_RANGE)
        c = s.charge
        assert _in(c.x, scene.CHARGE_X_RANGE) and _in(c.y, scene.CHARGE_Y_RANGE)
        assert _in(c.mass, scene.CHARGE_MASS_RANGE)


def test_charge_never_inside_a_footprint():
    for seed in range(1000):
        s = sample_scenario(seed)
        assert s.charge.y <= 2.0 <= s.obstacles[0].y_min
        assert not any(o.contains_footprint(s.charge.x, s.charge.y) for o in s.obstacles)


def test_scenario_json_round_trip():
    s = sample_scenario(11)
    assert Scenario.from_json(s.to_json()) == s


def test_sdf_center_and_axis_distance():
    assert box_sdf_footprint(0.5, 0.5, UNIT) == -1.0
    assert box_sdf_footprint(2.0, 0.5, UNIT) == 1.0
    assert box_sdf_footprint(1.0, 0.3, UNIT) == -1.0  # boundary counts as inside


def test_sdf_corner_matches_boundary_sampling():
    oracle = rect_boundary_distance(2.0, 2.0, 0, 1, 0, 1, 250_000)
    assert abs(box_sdf_footprint(2.0, 2.0, UNIT) - math.sqrt(2)) < 1e-12
    assert abs(box_sdf_footprint(2.0, 2.0, UNIT) - oracle) < 1e-3


def test_sdf_random_points_match_boundary_sampling():
    rng = np.random.default_rng(0)
    ob = Obstacle(-1.2, 0.7, 2.1, 2.9, 0.0, 1.0)
    pts = rng.uniform(-5, 5, size=(100_000, 2))
    got = box_sdf_footprint(pts[:, 0], pts[:, 1], ob)
    # Dense boundary samples; vectorized in chunks.
    s = np.linspace(0, 1, 2001)
    xs, ys = ob.x_min + s * (ob.x_max - ob.x_min), ob.y_min + s * (ob.y_max - ob.y_min)
    bnd = np.concatenate([np.stack([xs, np.full_like(xs, ob.y_min)], 1),
                          np.stack([xs, np.full_like(xs, ob.y_max)], 1),
                          np.stack([np.full_like(ys, ob.x_min), ys], 1),
                          np.stack([np.full_like(ys, ob.x_max), ys], 1)])
    inside = ((pts[:, 0] >= ob.x_min) & (pts[:, 0] <= ob.x_max)
              & (pts[:, 1] >= ob.y_min) & (pts[:, 1] <= ob.y_max))
    assert np.all(got[inside] == -1.0)
    out_pts = pts[~inside]
    for chunk in np.array_split(np.arange(len(out_pts)), 50):
        d = np.hypot(out_pts[chunk, None, 0] - bnd[None, :, 0], out_pts[chunk, None, 1] - bnd[None, :, 1])
        assert np.max(np.abs(d.min(axis=1) - got[~inside][chunk])) < 1e-3


@given(st.floats(-10, 10), st.floats(-10, 10))
def test_sdf_sign_property(px, py):
    d = box_sdf_footprint(px, py, UNIT)
    assert (d == -1.0) == UNIT.contains_footprint(px, py)
    if d != -1.0:
        assert d > 0


def test_obstacle_sdf_field_example():
    ob1 = Obstacle(-4.9, -2.5, 2.0, 2.5, 0.0, 1.0)
    s = _scenario([ob1, Obstacle(-2.0, 1.0, 2.0, 2.5, 0, 1), Obstacle(1.5, 4.5, 2.0, 2.5, 0, 1)])
    g = GridSpec()
    f = obstacle_sdf_field(s, g, 0)
    j = int(round((0.0 - g.y0) / g.dy))
    assert abs(f[j, 10] - 2.0) < 1e-9
    assert f.min() == -1.0 and f.max() <= scene.domain_diagonal(g)
    with pytest.raises(IndexError):
        obstacle_sdf_field(s, g, 3)


def test_sdf_field_marks_exactly_the_footprint():
    g = GridSpec()
    for seed in range(20):
        s = sample_scenario(seed)
        X, Y = g.mesh()
        for k, ob in enumerate(s.obstacles):
            f = obstacle_sdf_field(s, g, k)
            inside = (X >= ob.x_min) & (X <= ob.x_max) & (Y >= ob.y_min) & (Y <= ob.y_max)
            assert np.array_equal(f == -1.0, inside)
            assert np.all(f[~inside] > 0)


def test_charge_field_examples():
    g = GridSpec()
    s = _scenario([UNIT] * 3, Charge(g.x0 + 10 * g.dx, g.y0 + 20 * g.dy, 10.0))
    f = charge_field(s, g)
    assert f[20, 10] == pytest.approx(200.0, rel=1e-12)
    assert np.unravel_index(np.argmax(f), f.shape) == (20, 10)
    assert np.all(f > 0)
    s2 = _scenario([UNIT] * 3, Charge(s.charge.x, s.charge.y, 20.0))
    assert np.allclose(charge_field(s2, g), 2 * f, rtol=0, atol=1e-12)
    s3 = _scenario([UNIT] * 3, Charge(g.x0, g.y0 - 2.0, 10.0))
    assert charge_field(s3, g)[0, 0] == pytest.approx(5.0, rel=1e-12)


def test_charge_field_monotone_along_rays():
    g = GridSpec()
    s = sample_scenario(3)
    X, Y = g.mesh()
    d = np.hypot(X - s.charge.x, Y - s.charge.y)
    f = charge_field(s, g)
    order = np.argsort(d, axis=None)
    far = d.ravel()[order] >= scene.CHARGE_EPS
    vals = f.ravel()[order][far]
    assert np.all(np.diff(vals) <= 1e-12)


def test_build_model_input_layout():
    g = GridSpec()
    s = sample_scenario(5)
    inp = build_model_input(s, g)
    assert inp.values.shape == (99, 99, 4) and inp.coords.shape == (99, 99, 2)
    assert np.allclose(inp.coords[0, 0], (-4.9, -4.9)) and np.allclose(inp.coords[98, 98], (4.9, 4.9))
    assert np.all(np.diff(inp.coords[..., 0], axis=1) > 0) and np.all(np.diff(inp.coords[..., 1], axis=0) > 0)
    assert np.all(inp.values[..., :3] >= -1) and np.all(inp.values[..., 3] > 0)
    again = build_model_input(s, g)
    assert np.array_equal(inp.values, again.values) and np.array_equal(inp.coords, again.coords)


def test_grid_spec_validation_and_square():
    with pytest.raises(ValueError):
        GridSpec(nx=1)
    g = GridSpec.square(33)
    assert g.nx == g.ny == 33
    assert g.x0 + (g.nx - 1) * g.dx == pytest.approx(4.9)
    assert GridSpec.square(99).dx == pytest.approx(0.1)


@settings(max_examples=50)
@given(st.integers(0, 2**32))
def test_charge_outside_footprints_any_seed(seed):
    s = sample_scenario(seed)
    assert not any(o.contains_footprint(s.charge.x, s.charge.y) for o in s.obstacles)
