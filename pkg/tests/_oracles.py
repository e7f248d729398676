"""Independent reference computations used to check the dynamics kernel.

Deliberately avoids the library's spatial-algebra code paths: rotations come
from scipy.spatial.transform, poses from a per-link transform chain, and
kinetic energy from root-to-leaf velocity propagation instead of inertia
accumulation.
"""

import numpy as np
from scipy.spatial.transform import Rotation


def _joint_world(model, state):
    """Per-link world pose plus per-joint world axis/anchor, composed link by
    link with scipy rotations."""
    rot = [None] * (len(model.links) + 1)
    pos = [None] * (len(model.links) + 1)
    rot[0] = Rotation.from_quat(np.roll(state.base_orientation, -1)).as_matrix()
    pos[0] = np.array(state.base_position)
    axes = [None] * model.n
    anchors = [None] * model.n
    for ji in model.topo_joint_order:
        joint = model.joints[ji]
        pl = model.joint_parent_link[ji]
        cl = model.joint_child_link[ji]
        r_origin = Rotation.from_euler("xyz", joint.origin_rpy).as_matrix()
        r_joint = rot[pl] @ r_origin
        p_joint = pos[pl] + rot[pl] @ joint.origin_xyz
        axes[ji] = r_joint @ joint.axis
        anchors[ji] = p_joint
        q = state.joint_positions[ji]
        if joint.kind == "revolute":
            rot[cl] = r_joint @ Rotation.from_rotvec(np.asarray(joint.axis) * q).as_matrix()
            pos[cl] = p_joint
        else:
            rot[cl] = r_joint
            pos[cl] = p_joint + axes[ji] * q
    return rot, pos, axes, anchors


def link_velocities(model, state):
    """Root-to-leaf propagation of (omega, v at link origin) per link."""
    rot, pos, axes, _ = _joint_world(model, state)
    omega = [None] * (len(model.links) + 1)
    v_origin = [None] * (len(model.links) + 1)
    omega[0] = np.array(state.base_angular_velocity)
    v_origin[0] = np.array(state.base_linear_velocity)
    for ji in model.topo_joint_order:
        joint = model.joints[ji]
        pl = model.joint_parent_link[ji]
        cl = model.joint_child_link[ji]
        qd = state.joint_velocities[ji]
        v_new_origin = v_origin[pl] + np.cross(omega[pl], pos[cl] - pos[pl])
        if joint.kind == "revolute":
            omega[cl] = omega[pl] + axes[ji] * qd
            v_origin[cl] = v_new_origin
        else:
            omega[cl] = omega[pl]
            v_origin[cl] = v_new_origin + axes[ji] * qd
    return rot, pos, omega, v_origin


def kinetic_energy(model, state):
    """Sum over links of 1/2 m |v_com|^2 + 1/2 w^T I_world w."""
    rot, pos, omega, v_origin = link_velocities(model, state)
    total = 0.0
    for li, link in enumerate((model.base_link,) + model.links):
        com = pos[li] + rot[li] @ link.com
        v_com = v_origin[li] + np.cross(omega[li], com - pos[li])
        inertia_world = rot[li] @ link.inertia @ rot[li].T
        total += 0.5 * link.mass * v_com @ v_com + 0.5 * omega[li] @ inertia_world @ omega[li]
    return total


def contact_position(model, state, frame):
    rot, pos, _, _ = _joint_world(model, state)
    cf = model.contact_frame_map[frame]
    li = model.link_index[cf.link]
    return pos[li] + rot[li] @ cf.offset


def single_body_contact_inertia(mass, inertia_world, com_world, contact_world):
    """Closed-form operational inertia of one rigid body at a contact point:
    inverse of (1/m) I - [s]x Ic^-1 [s]x with s = contact - com."""
    s = contact_world - com_world
    sx = np.array([[0, -s[2], s[1]], [s[2], 0, -s[0]], [-s[1], s[0], 0.0]])
    inv_inertia = np.eye(3) / mass - sx @ np.linalg.inv(inertia_world) @ sx
    return np.linalg.inv(inv_inertia)
