import json

import numpy as np
import pytest

from imfkit.model import (
    PhysicsError,
    RobotState,
    SchemaError,
    StateError,
    TreeError,
    load_bundled_model,
    parse_model,
    serialize_model,
    validate_state,
)

SINGLE_BODY_DOC = json.dumps({
    "base_link": {"name": "body", "mass": 1.5, "com": [0, 0, 0],
                  "inertia": [0.01, 0.01, 0.01, 0, 0, 0]},
    "links": [],
    "joints": [],
    "contact_frames": [],
})


def _two_link_doc(**overrides):
    doc = {
        "base_link": {"name": "base", "mass": 2.0, "com": [0, 0, 0],
                      "inertia": [0.01, 0.012, 0.008, 0, 0, 0]},
        "links": [
            {"name": "link1", "mass": 1.0, "com": [0, 0, -0.15],
             "inertia": [0.0075, 0.0075, 0.0004, 0, 0, 0]},
        ],
        "joints": [
            {"name": "j1", "parent": "base", "child": "link1", "kind": "revolute",
             "axis": [0, 1, 0], "origin": {"xyz": [0, 0, -0.1], "rpy": [0, 0, 0]},
             "limits": [-2, 2], "actuated": True},
        ],
        "contact_frames": [{"name": "tip", "link": "link1", "offset": [0, 0, -0.3]}],
    }
    doc.update(overrides)
    return doc


def test_single_body_document_parses_with_zero_joints():
    model = parse_model(SINGLE_BODY_DOC)
    assert model.n == 0
    assert model.n_act == 0
    assert model.nv == 6


def test_bundled_quadruped_counts():
    # 16 joints, 12 actuated, 4 feet
    model = load_bundled_model("quadruped")
    assert model.n == 16
    assert model.n_act == 12
    assert len(model.contact_frames) == 4


def test_joint_cycle_is_a_tree_violation():
    doc = _two_link_doc()
    doc["links"].append({"name": "link2", "mass": 1.0, "com": [0, 0, 0],
                         "inertia": [0.001, 0.001, 0.001, 0, 0, 0]})
    doc["joints"].append({"name": "j2", "parent": "link2", "child": "link2", "kind": "revolute",
                          "axis": [0, 0, 1], "origin": {"xyz": [0, 0, 0], "rpy": [0, 0, 0]},
                          "limits": [-1, 1], "actuated": True})
    with pytest.raises(TreeError):
        parse_model(json.dumps(doc))


def test_orphan_link_is_a_tree_violation():
    doc = _two_link_doc()
    doc["links"].append({"name": "floating", "mass": 0.1, "com": [0, 0, 0],
                         "inertia": [0.001, 0.001, 0.001, 0, 0, 0]})
    with pytest.raises(TreeError, match="floating"):
        parse_model(json.dumps(doc))


def test_duplicate_parent_is_a_tree_violation():
    doc = _two_link_doc()
    doc["joints"].append({"name": "j1b", "parent": "base", "child": "link1", "kind": "revolute",
                          "axis": [0, 0, 1], "origin": {"xyz": [0, 0, 0], "rpy": [0, 0, 0]},
                          "limits": [-1, 1], "actuated": False})
    with pytest.raises(TreeError, match="link1"):
        parse_model(json.dumps(doc))


def test_negative_mass_names_the_link():
    doc = _two_link_doc()
    doc["links"][0]["mass"] = -1.0
    with pytest.raises(PhysicsError, match="link1"):
        parse_model(json.dumps(doc))


def test_non_positive_definite_inertia_rejected():
    doc = _two_link_doc()
    doc["links"][0]["inertia"] = [0.0, 0.01, 0.01, 0, 0, 0]
    with pytest.raises(PhysicsError, match="link1"):
        parse_model(json.dumps(doc))


def test_triangle_inequality_violation_rejected():
    # a thin plate can have Ix + Iy = Iz but never Ix + Iy < Iz
    doc = _two_link_doc()
    doc["links"][0]["inertia"] = [0.001, 0.001, 0.01, 0, 0, 0]
    with pytest.raises(PhysicsError, match="triangle"):
        parse_model(json.dumps(doc))


def test_missing_field_is_a_schema_error():
    doc = _two_link_doc()
    del doc["joints"][0]["axis"]
    with pytest.raises(SchemaError, match="j1"):
        parse_model(json.dumps(doc))


def test_non_unit_axis_rejected():
    doc = _two_link_doc()
    doc["joints"][0]["axis"] = [0, 2, 0]
    with pytest.raises(SchemaError, match="axis"):
        parse_model(json.dumps(doc))


def test_bad_limits_rejected():
    doc = _two_link_doc()
    doc["joints"][0]["limits"] = [1.0, 1.0]
    with pytest.raises(SchemaError, match="limits"):
        parse_model(json.dumps(doc))


def test_unknown_contact_frame_link_rejected():
    doc = _two_link_doc()
    doc["contact_frames"][0]["link"] = "nope"
    with pytest.raises(TreeError, match="nope"):
        parse_model(json.dumps(doc))


@pytest.mark.parametrize("name", ["quadruped", "planar_biped", "single_body"])
def test_parse_serialize_parse_round_trip(name):
    first = load_bundled_model(name)
    text = serialize_model(first)
    second = parse_model(text)
    # byte-identical re-serialization implies field-for-field identity
    assert serialize_model(second) == text
    assert second.n == first.n and second.n_act == first.n_act
    for a, b in zip(first.joints, second.joints):
        assert a.name == b.name and a.limits == b.limits and a.actuated == b.actuated
        np.testing.assert_array_equal(a.axis, b.axis)
    for a, b in zip((first.base_link,) + first.links, (second.base_link,) + second.links):
        assert a.mass == b.mass
        np.testing.assert_array_equal(a.inertia, b.inertia)


def test_velocity_layout_is_base_linear_angular_then_joints():
    model = parse_model(json.dumps(_two_link_doc()))
    state = RobotState(
        base_position=[0, 0, 0], base_orientation=[1, 0, 0, 0], joint_positions=[0.0],
        base_linear_velocity=[1, 2, 3], base_angular_velocity=[4, 5, 6], joint_velocities=[7.0],
    )
    np.testing.assert_array_equal(state.generalized_velocity, [1, 2, 3, 4, 5, 6, 7])
    assert state.generalized_velocity.shape == (model.nv,)


# -- validate_state ---------------------------------------------------------

def test_zero_state_accepted(quadruped):
    state = RobotState.zero(quadruped)
    out = validate_state(quadruped, state, strict=True)
    assert np.linalg.norm(out.base_orientation) == pytest.approx(1.0, abs=1e-12)


def test_wrong_joint_dimension_rejected(quadruped):
    state = RobotState(
        base_position=[0, 0, 0], base_orientation=[1, 0, 0, 0],
        joint_positions=np.zeros(3), base_linear_velocity=[0, 0, 0],
        base_angular_velocity=[0, 0, 0], joint_velocities=np.zeros(3),
    )
    with pytest.raises(StateError, match="joint_positions"):
        validate_state(quadruped, state)


def test_nearly_unit_quaternion_renormalized(quadruped):
    state = RobotState(
        base_position=[0, 0, 0], base_orientation=[0.999999, 0, 0, 0],
        joint_positions=np.zeros(16), base_linear_velocity=[0, 0, 0],
        base_angular_velocity=[0, 0, 0], joint_velocities=np.zeros(16),
    )
    out = validate_state(quadruped, state)
    assert abs(np.linalg.norm(out.base_orientation) - 1.0) < 1e-12


def test_degenerate_quaternion_rejected(quadruped):
    state = RobotState(
        base_position=[0, 0, 0], base_orientation=[1e-9, 0, 0, 0],
        joint_positions=np.zeros(16), base_linear_velocity=[0, 0, 0],
        base_angular_velocity=[0, 0, 0], joint_velocities=np.zeros(16),
    )
    with pytest.raises(StateError, match="degenerate"):
        validate_state(quadruped, state)


def test_strict_mode_rejects_limit_violations(quadruped):
    q = np.zeros(16)
    q[0] = 5.0  # beyond the +/-0.6 abduction range
    state = RobotState(
        base_position=[0, 0, 0], base_orientation=[1, 0, 0, 0], joint_positions=q,
        base_linear_velocity=[0, 0, 0], base_angular_velocity=[0, 0, 0],
        joint_velocities=np.zeros(16),
    )
    validate_state(quadruped, state, strict=False)  # permissive mode passes
    with pytest.raises(StateError, match="fl_hip_aa"):
        validate_state(quadruped, state, strict=True)
