"""Spatial-algebra kernel: forward kinematics, point Jacobians, the joint-space
mass matrix, and the perfectly inelastic impact solve used as an oracle.

All spatial quantities live in world axes.  Six-dimensional link velocities
are referred to the base-frame origin, so the base rows/columns of the mass
matrix line up with the generalized-velocity layout [v_base; w_base; qdot]
and the 6x6 base block equals the composite rigid-body inertia of the whole
robot referred to the base frame.  Contact velocities and impulses are
expressed in world-aligned axes at the contact point.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

from .model import RobotModel, RobotState, validate_state

__all__ = [
    "SingularConfigurationError",
    "UnknownFrameError",
    "ForwardKinematics",
    "MassMatrix",
    "ContactJacobian",
    "ImpulseResult",
    "forward_kinematics",
    "mass_matrix",
    "contact_jacobian",
    "solve_constrained_impulse",
    "random_state",
    "skew",
    "quat_to_rot",
    "quat_mul",
    "quat_from_rotvec",
]


class SingularConfigurationError(RuntimeError):
    """The contact/constraint system is singular at this configuration."""


class UnknownFrameError(ValueError):
    """A contact frame name does not exist in the model."""


# ---------------------------------------------------------------------------
# small rotation helpers (quaternions are scalar-first: w, x, y, z)
# ---------------------------------------------------------------------------

def skew(v):
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def quat_to_rot(q):
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def quat_mul(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_from_rotvec(v):
    v = np.asarray(v, dtype=float)
    angle = float(np.linalg.norm(v))
    half = 0.5 * angle
    # sin(half)/angle via sinc keeps the limit at angle -> 0 exact
    s = 0.5 * np.sinc(half / np.pi)
    return np.concatenate([[np.cos(half)], s * v])


def _axis_angle_rot(axis, angle):
    k = skew(axis)
    return np.eye(3) + np.sin(angle) * k + (1.0 - np.cos(angle)) * (k @ k)


# ---------------------------------------------------------------------------
# forward kinematics
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ForwardKinematics:
    """World poses of every link plus world positions of all contact frames.

    ``rotations[i]`` / ``positions[i]`` pose link i (0 = base).  Joint axes
    and anchors are the world-frame joint axis direction and a world point on
    the axis (the joint-frame origin), indexed by joint.
    """

    link_names: tuple
    rotations: np.ndarray   # (L, 3, 3)
    positions: np.ndarray   # (L, 3)
    joint_axes: np.ndarray  # (n, 3)
    joint_anchors: np.ndarray  # (n, 3)
    contact_positions: dict

    def pose(self, link_name):
        i = self.link_names.index(link_name)
        return self.rotations[i], self.positions[i]


def forward_kinematics(model, state):
    """Pose every link and contact frame of a validated state."""
    state = validate_state(model, state)
    L = len(model.links) + 1
    n = model.n
    R = np.zeros((L, 3, 3))
    p = np.zeros((L, 3))
    axes = np.zeros((n, 3))
    anchors = np.zeros((n, 3))

    R[0] = quat_to_rot(state.base_orientation)
    p[0] = state.base_position

    q = state.joint_positions
    for ji in model.topo_joint_order:
        joint = model.joints[ji]
        pl = model.joint_parent_link[ji]
        cl = model.joint_child_link[ji]
        r_joint = R[pl] @ joint.origin_rotation
        p_joint = p[pl] + R[pl] @ joint.origin_xyz
        axes[ji] = r_joint @ joint.axis
        anchors[ji] = p_joint
        if joint.kind == "revolute":
            R[cl] = r_joint @ _axis_angle_rot(joint.axis, q[ji])
            p[cl] = p_joint
        else:  # prismatic
            R[cl] = r_joint
            p[cl] = p_joint + axes[ji] * q[ji]

    contact = {}
    for c in model.contact_frames:
        li = model.link_index[c.link]
        pos = p[li] + R[li] @ c.offset
        pos.setflags(write=False)
        contact[c.name] = pos
    R.setflags(write=False)
    p.setflags(write=False)
    axes.setflags(write=False)
    anchors.setflags(write=False)
    return ForwardKinematics(
        link_names=model.link_names,
        rotations=R,
        positions=p,
        joint_axes=axes,
        joint_anchors=anchors,
        contact_positions=contact,
    )


# ---------------------------------------------------------------------------
# mass matrix (composite rigid-body accumulation)
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MassMatrix:
    """Joint-space inertia with base/joint partitions as views into ``full``."""

    full: np.ndarray  # (n+6, n+6)

    @property
    def h_bb(self):
        return self.full[:6, :6]

    @property
    def h_bj(self):
        return self.full[:6, 6:]

    @property
    def h_jb(self):
        return self.full[6:, :6]

    @property
    def h_jj(self):
        return self.full[6:, 6:]


def _spatial_inertia_about(mass, com_world, inertia_world, ref):
    """6x6 spatial inertia of one body about reference point ref, world axes,
    with the [linear; angular] velocity ordering."""
    r = com_world - ref
    rx = skew(r)
    m = np.zeros((6, 6))
    m[:3, :3] = mass * np.eye(3)
    m[:3, 3:] = -mass * rx
    m[3:, :3] = mass * rx
    m[3:, 3:] = inertia_world - mass * (rx @ rx)
    return m


def _joint_subspace(model, fk, ref):
    """Per-joint 6D motion column about ref: unit joint rate -> [v(ref); w]."""
    n = model.n
    phi = np.zeros((n, 6))
    for ji, joint in enumerate(model.joints):
        a = fk.joint_axes[ji]
        if joint.kind == "revolute":
            phi[ji, :3] = np.cross(a, ref - fk.joint_anchors[ji])
            phi[ji, 3:] = a
        else:
            phi[ji, :3] = a
    return phi


def mass_matrix(model, state, fk=None):
    """Composite rigid-body mass matrix, accumulated leaf-to-root.

    Every per-link spatial inertia is expressed about the base origin in
    world axes, so subtree composites are plain sums and H_bb comes out as
    the locked-joint inertia of the entire robot referred to the base frame.
    """
    if fk is None:
        fk = forward_kinematics(model, state)
    n = model.n
    nv = n + 6
    ref = fk.positions[0]

    all_links = (model.base_link,) + model.links
    composite = np.zeros((len(all_links), 6, 6))
    for li, link in enumerate(all_links):
        com_world = fk.positions[li] + fk.rotations[li] @ link.com
        inertia_world = fk.rotations[li] @ link.inertia @ fk.rotations[li].T
        composite[li] = _spatial_inertia_about(link.mass, com_world, inertia_world, ref)

    # leaf-to-root: children accumulate into parents (reverse topological order)
    for ji in reversed(model.topo_joint_order):
        composite[model.joint_parent_link[ji]] += composite[model.joint_child_link[ji]]

    phi = _joint_subspace(model, fk, ref)
    h = np.zeros((nv, nv))
    h[:6, :6] = composite[0]
    for ji in range(n):
        f = composite[model.joint_child_link[ji]] @ phi[ji]
        h[:6, 6 + ji] = f
        h[6 + ji, :6] = f
        k = ji
        while k is not None:
            val = phi[k] @ f
            h[6 + ji, 6 + k] = val
            h[6 + k, 6 + ji] = val
            k = model.parent_joint[k]
    h.setflags(write=False)
    return MassMatrix(full=h)


# ---------------------------------------------------------------------------
# contact Jacobian
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ContactJacobian:
    """3x(n+6) map from generalized velocity to the world-frame contact-point velocity."""

    full: np.ndarray
    frame: str

    @property
    def j_b(self):
        return self.full[:, :6]

    @property
    def j_j(self):
        return self.full[:, 6:]


def contact_jacobian(model, state, frame, fk=None):
    """Point Jacobian of a named contact frame; columns of joints off the
    base-to-contact path are exactly zero."""
    if frame not in model.contact_frame_map:
        raise UnknownFrameError(
            f"unknown contact frame '{frame}'; available: {[c.name for c in model.contact_frames]}"
        )
    if fk is None:
        fk = forward_kinematics(model, state)
    x = fk.contact_positions[frame]
    j = np.zeros((3, model.nv))
    j[:, :3] = np.eye(3)
    j[:, 3:6] = -skew(x - fk.positions[0])
    li = model.link_index[model.contact_frame_map[frame].link]
    ji = model.link_parent_joint[li]
    while ji is not None:
        joint = model.joints[ji]
        a = fk.joint_axes[ji]
        j[:, 6 + ji] = np.cross(a, x - fk.joint_anchors[ji]) if joint.kind == "revolute" else a
        ji = model.parent_joint[ji]
    j.setflags(write=False)
    return ContactJacobian(full=j, frame=frame)


# ---------------------------------------------------------------------------
# perfectly inelastic impact (KKT oracle)
# ---------------------------------------------------------------------------

class ImpulseResult(NamedTuple):
    impulse: np.ndarray        # world-frame contact impulse, N*s
    post_velocity: np.ndarray  # generalized velocity just after impact


def _solve_kkt(k, rhs):
    """Dense factorization of the symmetric indefinite saddle system with two
    refinement sweeps; raises on singular configurations."""
    lu, piv = scipy.linalg.lu_factor(k)
    diag = np.abs(np.diag(lu))
    if diag.min() <= 1e-12 * max(diag.max(), 1e-300):
        raise SingularConfigurationError(
            f"impact KKT system is singular (condition estimate {np.linalg.cond(k):.3e})"
        )
    x = scipy.linalg.lu_solve((lu, piv), rhs)
    for _ in range(2):  # iterative refinement keeps the constraint residual near eps
        x += scipy.linalg.lu_solve((lu, piv), rhs - k @ x)
    return x


def solve_constrained_impulse(model, state, frame, lock_joints=False, fk=None, mass=None, jac=None):
    """Impulse of a perfectly inelastic impact at a contact frame.

    Solves H * du = J^T * rho subject to J (u + du) = 0 for the impulse rho and
    velocity change du.  With ``lock_joints`` the joint rates are frozen
    (du restricted to the 6 base coordinates), which is the rigid locked-robot
    benchmark case.  Deliberately solves the full saddle-point system rather
    than any operational-space shortcut, so it can serve as an independent
    check on inertia-based impulse formulas.
    """
    state = validate_state(model, state)
    if fk is None:
        fk = forward_kinematics(model, state)
    h = (mass or mass_matrix(model, state, fk=fk)).full
    j = (jac or contact_jacobian(model, state, frame, fk=fk)).full
    u = state.generalized_velocity
    v = j @ u

    if lock_joints:
        hb, jb = h[:6, :6], j[:, :6]
        k = np.zeros((9, 9))
        k[:6, :6] = hb
        k[:6, 6:] = jb.T
        k[6:, :6] = jb
        rhs = np.concatenate([np.zeros(6), -v])
        x = _solve_kkt(k, rhs)
        post = u.copy()
        post[:6] += x[:6]
        return ImpulseResult(impulse=-x[6:], post_velocity=post)

    nv = model.nv
    k = np.zeros((nv + 3, nv + 3))
    k[:nv, :nv] = h
    k[:nv, nv:] = j.T
    k[nv:, :nv] = j
    rhs = np.concatenate([np.zeros(nv), -v])
    x = _solve_kkt(k, rhs)
    return ImpulseResult(impulse=-x[nv:], post_velocity=u + x[:nv])


# ---------------------------------------------------------------------------
# reproducible random states
# ---------------------------------------------------------------------------

def random_state(model, rng):
    """Draw a random state: joint positions uniform within limits, base
    orientation uniform on the unit-quaternion sphere, base position uniform
    in [-1, 1]^3, all velocities i.i.d. uniform in [-1, 1].

    The draw order (position, quaternion, joint positions, velocities) is
    fixed so a seeded generator reproduces identical sweeps.
    """
    rng = np.random.default_rng(rng)
    base_position = rng.uniform(-1.0, 1.0, 3)
    quat = rng.normal(size=4)
    quat /= np.linalg.norm(quat)
    lo, hi = model.joint_limits
    joint_positions = rng.uniform(lo, hi) if model.n else np.zeros(0)
    vel = rng.uniform(-1.0, 1.0, model.nv)
    return RobotState(
        base_position=base_position,
        base_orientation=quat,
        joint_positions=joint_positions,
        base_linear_velocity=vel[:3],
        base_angular_velocity=vel[3:6],
        joint_velocities=vel[6:],
    )
