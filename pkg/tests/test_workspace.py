import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hybrid_arm import JointState, StructuralParams, full_fk
from hybrid_arm.workspace import (
    ALGORITHM_ID,
    WorkspaceCloud,
    envelope,
    export_cloud,
    read_cloud,
    sample_workspace,
    voxel_volume,
)


@pytest.fixture(scope="module")
def cloud():
    return sample_workspace(StructuralParams(), 3000, seed=7)


def test_sample_count():
    assert sample_workspace(StructuralParams(), 1000, seed=1).sample_count == 1000


def test_seed_determinism(params):
    a = sample_workspace(params, 500, seed=3)
    b = sample_workspace(params, 500, seed=3)
    assert np.array_equal(a.positions, b.positions)
    assert np.array_equal(a.states, b.states)
    assert not np.array_equal(a.positions, sample_workspace(params, 500, seed=4).positions)


def test_prefix_property(params):
    big = sample_workspace(params, 70000, seed=2)
    small = sample_workspace(params, 1000, seed=2)
    assert np.array_equal(big.positions[:1000], small.positions)


def test_collapsed_limits_single_state():
    eps = 1e-12
    p = StructuralParams(
        a_min=300.0,
        a_max=300.0 + eps,
        b_min=200.0,
        b_max=200.0 + eps,
        theta_limits=((0.1, 0.1 + eps), (0.2, 0.2 + eps), (0.3, 0.3 + eps), (0.4, 0.4 + eps)),
    )
    c = sample_workspace(p, 1, seed=0)
    expected = full_fk(JointState(300, 200, 0.1, 0.2, 0.3, 0.4), p).translation
    assert np.allclose(c.positions[0], expected, atol=1e-6)


def test_points_match_fk(cloud):
    p = StructuralParams()
    for pos, q in list(cloud)[:300]:
        assert np.allclose(pos, full_fk(q, p).translation, atol=1e-9, rtol=0)


def test_states_within_limits(cloud):
    p = StructuralParams()
    s = cloud.states
    assert np.all((s[:, 0] >= p.a_min) & (s[:, 0] <= p.a_max))
    assert np.all((s[:, 1] >= p.b_min) & (s[:, 1] <= p.b_max))
    assert np.all(s[:, 0] + s[:, 1] + p.carriage <= p.rail_length)


def test_envelope_brute_force(cloud):
    env = envelope(cloud)
    lo = [min(pt[k] for pt in cloud.positions) for k in range(3)]
    hi = [max(pt[k] for pt in cloud.positions) for k in range(3)]
    assert env.lower.tolist() == lo and env.upper.tolist() == hi
    assert env.contains(cloud.positions)


def test_envelope_single_point(cloud):
    env = envelope(cloud.head(1))
    assert np.array_equal(env.span, np.zeros(3))
    assert np.array_equal(env.lower, cloud.positions[0])


def test_envelope_empty_rejected(cloud):
    with pytest.raises(ValueError):
        envelope(cloud.head(0))


def test_envelope_growth(params):
    a = sample_workspace(params, 400, seed=10)
    b = sample_workspace(params, 400, seed=11)
    union = envelope(a.concat(b))
    assert union.contains(envelope(a).lower) and union.contains(envelope(a).upper)
    assert union.contains(envelope(b).lower) and union.contains(envelope(b).upper)


def test_voxel_single_cell():
    pts = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0], [9.9, 9.9, 9.9]])
    c = WorkspaceCloud(pts, np.zeros((3, 6)))
    assert voxel_volume(c, 10.0) == 1000.0


def test_voxel_counts_distinct_cells_brute_force(cloud):
    cells = {tuple(int(v) for v in np.floor(pt / 25.0)) for pt in cloud.positions}
    assert voxel_volume(cloud, 25.0) == len(cells) * 25.0**3


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 2999), st.floats(5, 50))
def test_volume_monotone_in_points(k, voxel):
    c = sample_workspace(StructuralParams(), 3000, seed=7)
    assert voxel_volume(c.head(k), voxel) <= voxel_volume(c, voxel)


def test_voxel_rejects_non_positive(cloud):
    with pytest.raises(ValueError):
        voxel_volume(cloud, 0.0)


def test_export_line_count_and_round_trip(tmp_path, cloud):
    small = cloud.head(3)
    path = export_cloud(small, tmp_path / "c.csv")
    lines = path.read_text().splitlines()
    assert len(lines) == 4
    assert lines[0] == "x_mm,y_mm,z_mm,a_mm,b_mm,theta1,theta2,theta3,theta4"
    back = read_cloud(path)
    assert np.allclose(back.positions, small.positions, atol=1e-9, rtol=0)
    meta = json.loads((tmp_path / "c.csv.meta.json").read_text())
    assert meta["seed"] == 7 and meta["n"] == 3 and meta["algorithm"] == ALGORITHM_ID


def test_exported_points_revalidate(tmp_path, cloud):
    p = StructuralParams()
    back = read_cloud(export_cloud(cloud.head(200), tmp_path / "c.csv"))
    for pos, q in back:
        assert np.allclose(pos, full_fk(q, p).translation, atol=1e-9, rtol=0)


def test_export_empty_cloud(tmp_path, cloud):
    path = export_cloud(cloud.head(0), tmp_path / "e.csv")
    assert path.read_text().splitlines() == ["x_mm,y_mm,z_mm,a_mm,b_mm,theta1,theta2,theta3,theta4"]


def test_export_error_names_path(tmp_path, cloud):
    target = tmp_path / "missing" / "c.csv"
    with pytest.raises(OSError, match="missing"):
        export_cloud(cloud.head(2), target)
