import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import centre_index, flat_grid
from wipeplan.contact import (
    ContactMap,
    GeometricPredictor,
    SpongeModel,
    ToolPose,
    label_contact,
    predict_contact,
    press,
    rigid_variant,
    rle_decode,
    rle_encode,
    tool_axes,
)
from wipeplan.geometry import ObjectSpec, PointCloud, generate_object


def _press(sponge, cloud, pose, **kw):
    return press(sponge, cloud, cloud.spatial_index, pose, **kw)


def _label(sponge, cloud, pose):
    result = _press(sponge, cloud, pose)
    return result, label_contact(result, sponge, cloud, cloud.spatial_index)


def test_sponge_validation():
    with pytest.raises(ValueError):
        SpongeModel(width=0)
    with pytest.raises(ValueError):
        SpongeModel(grid_nx=1)
    with pytest.raises(ValueError):
        SpongeModel(youngs_modulus=-1)
    with pytest.raises(ValueError):
        SpongeModel(label_radius=-0.1)


def test_sponge_round_trip():
    s = SpongeModel(width=0.04, grid_nx=7, youngs_modulus=3e4)
    assert SpongeModel.from_dict(s.to_dict()) == s


def test_rigid_variant():
    r = rigid_variant(SpongeModel(width=0.04))
    assert r.youngs_modulus == 2e9
    assert r.width == 0.04


def test_pose_normalises_theta():
    assert ToolPose(3, -math.pi / 2).theta == pytest.approx(1.5 * math.pi)
    assert ToolPose(3, 2 * math.pi).theta == 0.0
    assert ToolPose(0, math.pi / 6).feature == pytest.approx((0.5, math.sqrt(3) / 2))
    with pytest.raises(ValueError):
        ToolPose(-1, 0.0)


def test_pose_out_of_range(flat_cloud):
    with pytest.raises(IndexError):
        _press(SpongeModel(), flat_cloud, ToolPose(flat_cloud.count, 0.0))


@pytest.mark.parametrize("theta", [0.0, 0.3, 1.2, 2.9, 4.4])
def test_flat_press_matches_closed_form(flat_cloud, theta):
    s = SpongeModel()
    r = _press(s, flat_cloud, ToolPose(centre_index(flat_cloud), theta))
    closed = s.target_force * s.height / (s.youngs_modulus * s.width * s.length)
    assert r.press_depth == pytest.approx(closed, rel=1e-3)
    assert abs(r.net_force - s.target_force) <= 1e-3
    assert not r.force_unreached
    assert np.allclose(r.node_forces, r.node_forces[0, 0])


def test_doubling_modulus_halves_depth_on_flat(flat_cloud):
    pose = ToolPose(centre_index(flat_cloud), 0.7)
    a = _press(SpongeModel(youngs_modulus=1e4), flat_cloud, pose)
    b = _press(SpongeModel(youngs_modulus=2e4), flat_cloud, pose)
    assert b.press_depth == pytest.approx(a.press_depth / 2, rel=1e-3)


def test_force_balance_on_bowl(bowl_cloud):
    s = SpongeModel()
    rng = np.random.default_rng(1)
    for idx in rng.choice(bowl_cloud.count, 40, replace=False):
        r = _press(s, bowl_cloud, ToolPose(int(idx), float(rng.uniform(0, 2 * math.pi))))
        if r.force_unreached:
            assert r.net_force < s.target_force
        else:
            assert abs(r.net_force - s.target_force) <= 1e-3
        assert np.all(r.node_forces >= 0)
        assert -s.height <= r.press_depth <= s.height


def test_overhanging_press_flags_force_unreached():
    # A lone point supports only the few nodes within the overhang distance.
    cloud = PointCloud(np.array([[0.0, 0.0, 0.0]]), np.array([[0.0, 0.0, 1.0]]), "lone")
    r = _press(SpongeModel(), cloud, ToolPose(0, 0.0))
    assert r.force_unreached
    assert r.net_force < 5.0
    assert r.press_depth == pytest.approx(SpongeModel().height)
    _, cmap = _label(SpongeModel(), cloud, ToolPose(0, 0.0))
    assert cmap.mask[0]


def _footprint_oracle(cloud, pc, theta, sponge):
    """Points within tau of any bottom-face node of a flat, fully-supported press."""
    c, s = math.cos(theta), math.sin(theta)
    hits = np.zeros(cloud.count, dtype=bool)
    for i in range(sponge.grid_nx):
        for j in range(sponge.grid_ny):
            u = -sponge.width / 2 + sponge.width * i / (sponge.grid_nx - 1)
            v = -sponge.length / 2 + sponge.length * j / (sponge.grid_ny - 1)
            node = pc + np.array([c * u - s * v, s * u + c * v, 0.0])
            hits |= np.sqrt(((cloud.points - node) ** 2).sum(axis=1)) <= sponge.label_radius
    return hits


# Yaw 0 puts lattice points exactly tau from a node; generic angles avoid the tie.
@pytest.mark.parametrize("theta", [0.1, 0.5, 2.2])
def test_flat_label_matches_footprint_dilation(flat_cloud, theta):
    s = SpongeModel()
    idx = centre_index(flat_cloud)
    _, cmap = _label(s, flat_cloud, ToolPose(idx, theta))
    expected = _footprint_oracle(flat_cloud, flat_cloud.points[idx], theta, s)
    assert np.array_equal(cmap.mask, expected)


def test_rigid_equals_deformable_on_flat(flat_cloud):
    pose = ToolPose(centre_index(flat_cloud), 1.0)
    _, soft = _label(SpongeModel(), flat_cloud, pose)
    _, hard = _label(rigid_variant(SpongeModel()), flat_cloud, pose)
    assert np.array_equal(soft.mask, hard.mask)


def test_rigid_smaller_on_bowl_wall(bowl_cloud):
    r = np.linalg.norm(bowl_cloud.points[:, :2], axis=1)
    wall = np.flatnonzero((r > 0.03) & (r < 0.06))
    pose = ToolPose(int(wall[0]), 0.4)
    _, soft = _label(SpongeModel(), bowl_cloud, pose)
    _, hard = _label(rigid_variant(SpongeModel()), bowl_cloud, pose)
    assert hard.count < soft.count


def test_contact_point_always_labelled(bowl_cloud):
    s = SpongeModel()
    # A feather-light press leaves every node below the threshold.
    result = _press(s, bowl_cloud, ToolPose(17, 0.0), target_force=0.01)
    cmap = label_contact(result, s, bowl_cloud, bowl_cloud.spatial_index)
    assert cmap.mask[17]
    assert cmap.count == 1


def _random_poses(cloud, n, seed):
    rng = np.random.default_rng(seed)
    return [ToolPose(int(rng.integers(cloud.count)), float(rng.uniform(0, 2 * math.pi))) for _ in range(n)]


def test_threshold_and_radius_monotone(bowl_cloud):
    base = SpongeModel()
    for pose in _random_poses(bowl_cloud, 15, 3):
        result = _press(base, bowl_cloud, pose)
        masks_t = [label_contact(result, SpongeModel(node_force_threshold=t), bowl_cloud, bowl_cloud.spatial_index).mask for t in (0.2, 0.5, 1.0, 2.0)]
        for lo, hi in zip(masks_t, masks_t[1:]):
            assert not np.any(hi & ~lo)
        masks_r = [label_contact(result, SpongeModel(label_radius=r), bowl_cloud, bowl_cloud.spatial_index).mask for r in (0.002, 0.005, 0.01)]
        for lo, hi in zip(masks_r, masks_r[1:]):
            assert not np.any(lo & ~hi)


def test_labels_stay_local(bowl_cloud):
    s = SpongeModel()
    reach = 0.5 * math.hypot(s.width, s.length) + s.label_radius + s.height
    for pose in _random_poses(bowl_cloud, 40, 4):
        _, cmap = _label(s, bowl_cloud, pose)
        d = np.linalg.norm(bowl_cloud.points[cmap.mask] - bowl_cloud.points[pose.contact_index], axis=1)
        assert d.max() <= reach


def test_yaw_equivariance_at_bowl_bottom(bowl_cloud):
    # A square footprint is only symmetric under quarter turns; any other yaw
    # keeps the labelled area but not the exact point set.
    s = SpongeModel()
    idx = centre_index(bowl_cloud)
    for theta in np.linspace(0.0, 2 * np.pi, 9, endpoint=False):
        _, a = _label(s, bowl_cloud, ToolPose(idx, float(theta)))
        _, b = _label(s, bowl_cloud, ToolPose(idx, float(theta) + math.pi / 2))
        assert np.sum(a.mask ^ b.mask) / a.count < 0.1
    counts = [_label(s, bowl_cloud, ToolPose(idx, float(t)))[1].count for t in np.linspace(0, 2 * np.pi, 16, endpoint=False)]
    assert (max(counts) - min(counts)) / np.mean(counts) < 0.1


def test_downhill_nodes_carry_more_force():
    # On a parabolic bowl the surface falls away from the tangent plane
    # faster downhill, so those nodes compress more.
    cloud = generate_object(ObjectSpec("bowl", 0.08, 0.04, 2.0, 3000, seed=8))
    s = SpongeModel()
    u, v = s.grid_offsets
    r = np.linalg.norm(cloud.points[:, :2], axis=1)
    for idx in np.flatnonzero((r > 0.025) & (r < 0.035))[:10]:
        n = cloud.normals[idx]
        downhill = np.array([0.0, 0.0, -1.0]) + n[2] * n
        downhill /= np.linalg.norm(downhill)
        for theta in (0.0, 1.0, 2.5):
            res = _press(s, cloud, ToolPose(int(idx), theta))
            x, y = tool_axes(n, theta)
            side = (u[:, None] * x + v[:, None] * y) @ downhill
            f = res.node_forces.ravel()
            assert f[side > 1e-4].mean() > f[side < -1e-4].mean()


def test_quarter_turn_is_identical_on_square_sponge(flat_cloud):
    s = SpongeModel()
    idx = centre_index(flat_cloud)
    _, a = _label(s, flat_cloud, ToolPose(idx, 0.3))
    _, b = _label(s, flat_cloud, ToolPose(idx, 0.3 + math.pi / 2))
    assert np.array_equal(a.mask, b.mask)


def test_press_is_deterministic(bowl_cloud):
    pose = ToolPose(123, 1.1)
    a, b = _press(SpongeModel(), bowl_cloud, pose), _press(SpongeModel(), bowl_cloud, pose)
    assert a.press_depth == b.press_depth
    assert np.array_equal(a.node_positions, b.node_positions)


def test_single_point_cloud():
    cloud = PointCloud(np.array([[0.0, 0.0, 0.0]]), np.array([[0.0, 0.0, 1.0]]))
    result, cmap = _label(SpongeModel(), cloud, ToolPose(0, 0.0))
    assert cmap.mask.tolist() == [True]
    assert result.net_force > 0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.booleans(), max_size=200))
def test_rle_round_trip(bits):
    mask = np.array(bits, dtype=bool)
    enc = rle_encode(mask)
    assert np.array_equal(rle_decode(enc), mask)
    assert sum(enc["runs"]) == len(bits)


def test_rle_rejects_bad_runs():
    with pytest.raises(ValueError):
        rle_decode({"length": 3, "first": True, "runs": [1, 1]})
    with pytest.raises(ValueError):
        rle_decode({"length": 2, "first": True, "runs": [2, 0]})


def test_contact_map_round_trip(bowl_cloud):
    _, cmap = _label(SpongeModel(), bowl_cloud, ToolPose(5, 0.2))
    back = ContactMap.from_dict(cmap.to_dict())
    assert back == cmap
    assert back.to_dict()["schema_version"] == 1
    with pytest.raises(ValueError):
        ContactMap(cmap.mask, "guess")


def test_predictor_matches_ground_truth(bowl_cloud):
    pred = GeometricPredictor(SpongeModel())
    for pose in _random_poses(bowl_cloud, 5, 6):
        p = predict_contact(pred, bowl_cloud, pose)
        _, t = _label(SpongeModel(), bowl_cloud, pose)
        assert p.source == "predicted"
        assert np.array_equal(p.mask, t.mask)


def test_predict_contact_rejects_wrong_length(bowl_cloud):
    def bad(cloud, pose):
        return ContactMap(np.ones(3, dtype=bool), "predicted")

    with pytest.raises(ValueError):
        predict_contact(bad, bowl_cloud, ToolPose(0, 0.0))
