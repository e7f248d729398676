"""Robot description schema, parsing, validation, and the configuration-space layout.

A robot is a tree of rigid links rooted at a free-floating base.  The
generalized-velocity vector used everywhere downstream is laid out as

    u = [base linear velocity (world, 0:3);
         base angular velocity (world, 3:6);
         joint velocities (6:6+n)]

so u lives in R^(n+6).  Configuration is (base position, unit quaternion,
joint positions); the quaternion is stored scalar-first as (w, x, y, z).

Robot-description files are UTF-8 JSON with top-level keys "base_link",
"links", "joints" and "contact_frames".  Inertia tensors are given as the
6-vector [Ixx, Iyy, Izz, Ixy, Ixz, Iyz] about the link's center of mass, in
the link frame.  Angles in radians, lengths in meters, masses in kg.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources

import numpy as np

__all__ = [
    "ModelError",
    "SchemaError",
    "TreeError",
    "PhysicsError",
    "StateError",
    "LinkSpec",
    "JointSpec",
    "ContactFrame",
    "RobotModel",
    "RobotState",
    "parse_model",
    "serialize_model",
    "load_model",
    "load_bundled_model",
    "bundled_model_names",
    "validate_state",
]

# Velocity-vector layout relied on by every downstream module.
BASE_LINEAR_SLICE = slice(0, 3)
BASE_ANGULAR_SLICE = slice(3, 6)
JOINT_SLICE = slice(6, None)


class ModelError(ValueError):
    """Base class for robot-description problems."""


class SchemaError(ModelError):
    """A field is missing, has the wrong type, or holds a malformed value."""


class TreeError(ModelError):
    """The joints do not form a tree rooted at the base link."""


class PhysicsError(ModelError):
    """Physically impossible parameters (non-positive mass, bad inertia)."""


class StateError(ModelError):
    """A robot state is inconsistent with its model."""


def _readonly(a, dtype=float):
    out = np.array(a, dtype=dtype)
    out.setflags(write=False)
    return out


def _vec(value, size, what):
    try:
        v = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{what} is not a numeric vector: {value!r}") from exc
    if v.shape != (size,):
        raise SchemaError(f"{what} must have {size} entries, got shape {v.shape}")
    return v


@dataclass(frozen=True, eq=False)
class LinkSpec:
    """One rigid body: mass, center of mass, and rotational inertia about the CoM.

    ``com`` is the CoM offset in the link frame; ``inertia`` is the 3x3 tensor
    about the CoM, expressed in the link frame.
    """

    name: str
    mass: float
    com: np.ndarray
    inertia: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "com", _readonly(_vec(self.com, 3, f"link '{self.name}' com")))
        inertia = np.asarray(self.inertia, dtype=float)
        if inertia.shape != (3, 3):
            raise SchemaError(f"link '{self.name}' inertia must be 3x3, got {inertia.shape}")
        if self.mass <= 0.0:
            raise PhysicsError(f"link '{self.name}' has non-positive mass {self.mass}")
        if not np.allclose(inertia, inertia.T, rtol=0.0, atol=1e-12 * max(1.0, abs(inertia).max())):
            raise PhysicsError(f"link '{self.name}' inertia is not symmetric")
        moments = np.linalg.eigvalsh(inertia)
        if moments[0] <= 0.0:
            raise PhysicsError(
                f"link '{self.name}' inertia is not positive definite "
                f"(principal moments {moments.tolist()})"
            )
        # Principal moments of any real mass distribution obey the triangle
        # inequality; reject tensors that no rigid body can realize.
        if moments[0] + moments[1] < moments[2] * (1.0 - 1e-9):
            raise PhysicsError(
                f"link '{self.name}' principal moments {moments.tolist()} violate "
                "the triangle inequality"
            )
        object.__setattr__(self, "inertia", _readonly(inertia))

    @classmethod
    def from_inertia_vector(cls, name, mass, com, ivec):
        """Build from the serialized 6-vector [Ixx, Iyy, Izz, Ixy, Ixz, Iyz]."""
        v = _vec(ivec, 6, f"link '{name}' inertia")
        ixx, iyy, izz, ixy, ixz, iyz = v
        tensor = np.array([[ixx, ixy, ixz], [ixy, iyy, iyz], [ixz, iyz, izz]])
        return cls(name=name, mass=float(mass), com=com, inertia=tensor)

    def inertia_vector(self):
        i = self.inertia
        return [i[0, 0], i[1, 1], i[2, 2], i[0, 1], i[0, 2], i[1, 2]]


@dataclass(frozen=True, eq=False)
class JointSpec:
    """A 1-DOF joint connecting ``parent`` to ``child``.

    ``origin_xyz``/``origin_rpy`` give the fixed transform from the parent
    link frame to the joint frame (fixed-axis roll-pitch-yaw, radians); the
    child link frame coincides with the joint frame after joint motion.
    ``axis`` is a unit vector in the child frame.
    """

    name: str
    parent: str
    child: str
    kind: str  # "revolute" | "prismatic"
    axis: np.ndarray
    origin_xyz: np.ndarray
    origin_rpy: np.ndarray
    limits: tuple
    actuated: bool

    def __post_init__(self):
        if self.kind not in ("revolute", "prismatic"):
            raise SchemaError(f"joint '{self.name}' kind must be revolute or prismatic, got {self.kind!r}")
        axis = _vec(self.axis, 3, f"joint '{self.name}' axis")
        if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
            raise SchemaError(
                f"joint '{self.name}' axis must have unit norm (|axis| = {np.linalg.norm(axis)!r})"
            )
        lo, hi = float(self.limits[0]), float(self.limits[1])
        if not lo < hi:
            raise SchemaError(f"joint '{self.name}' limits must satisfy lower < upper, got [{lo}, {hi}]")
        object.__setattr__(self, "axis", _readonly(axis))
        object.__setattr__(self, "origin_xyz", _readonly(_vec(self.origin_xyz, 3, f"joint '{self.name}' origin xyz")))
        object.__setattr__(self, "origin_rpy", _readonly(_vec(self.origin_rpy, 3, f"joint '{self.name}' origin rpy")))
        object.__setattr__(self, "limits", (lo, hi))
        object.__setattr__(self, "actuated", bool(self.actuated))

    @cached_property
    def origin_rotation(self):
        """Parent-to-joint rotation from the fixed-axis rpy angles."""
        r, p, y = self.origin_rpy
        cr, sr = math.cos(r), math.sin(r)
        cp, sp = math.cos(p), math.sin(p)
        cy, sy = math.cos(y), math.sin(y)
        rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
        ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
        rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
        return _readonly(rz @ ry @ rx)


@dataclass(frozen=True, eq=False)
class ContactFrame:
    """A named point eligible as an impact point: a link plus a fixed offset."""

    name: str
    link: str
    offset: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "offset", _readonly(_vec(self.offset, 3, f"contact frame '{self.name}' offset")))


@dataclass(frozen=True, eq=False)
class RobotModel:
    """A validated kinematic/dynamic tree.

    ``links`` holds the non-base links; link index 0 is the base, link i+1 is
    ``links[i]``.  Joint index (and therefore the joint coordinate index) is
    file order.
    """

    base_link: LinkSpec
    links: tuple
    joints: tuple
    contact_frames: tuple
    name: str = ""
    comment: str = ""

    def __post_init__(self):
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "contact_frames", tuple(self.contact_frames))
        self._validate_tree()

    def _validate_tree(self):
        names = [self.base_link.name] + [l.name for l in self.links]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"duplicate link name(s): {dup}")
        index = {n: i for i, n in enumerate(names)}

        parent_of = {}
        for j in self.joints:
            if j.parent not in index:
                raise TreeError(f"joint '{j.name}' references unknown parent link '{j.parent}'")
            if j.child not in index:
                raise TreeError(f"joint '{j.name}' references unknown child link '{j.child}'")
            if j.child == self.base_link.name:
                raise TreeError(f"joint '{j.name}' makes the base link '{j.child}' a child")
            if j.child in parent_of:
                raise TreeError(
                    f"link '{j.child}' has two parent joints ('{parent_of[j.child]}' and '{j.name}')"
                )
            parent_of[j.child] = j.name

        orphans = [l.name for l in self.links if l.name not in parent_of]
        if orphans:
            raise TreeError(f"link(s) {orphans} have no parent joint")

        # BFS from the base; anything unreachable sits on a cycle or island.
        children = {}
        for j in self.joints:
            children.setdefault(j.parent, []).append(j.child)
        seen = {self.base_link.name}
        queue = [self.base_link.name]
        while queue:
            for c in children.get(queue.pop(), ()):
                if c not in seen:
                    seen.add(c)
                    queue.append(c)
        unreachable = [n for n in names if n not in seen]
        if unreachable:
            raise TreeError(f"link(s) {unreachable} are unreachable from the base (cycle or disconnected)")

        cf_names = [c.name for c in self.contact_frames]
        if len(set(cf_names)) != len(cf_names):
            raise SchemaError("duplicate contact frame names")
        for c in self.contact_frames:
            if c.link not in index:
                raise TreeError(f"contact frame '{c.name}' references unknown link '{c.link}'")

    # -- derived layout -------------------------------------------------

    @property
    def n(self):
        """Number of joints (joint-space dimension)."""
        return len(self.joints)

    @property
    def nv(self):
        """Generalized-velocity dimension n + 6."""
        return len(self.joints) + 6

    @cached_property
    def n_act(self):
        return sum(1 for j in self.joints if j.actuated)

    @cached_property
    def actuated_indices(self):
        return _readonly([i for i, j in enumerate(self.joints) if j.actuated], dtype=int)

    @cached_property
    def link_names(self):
        return (self.base_link.name,) + tuple(l.name for l in self.links)

    @cached_property
    def link_index(self):
        return {n: i for i, n in enumerate(self.link_names)}

    @cached_property
    def joint_index(self):
        return {j.name: i for i, j in enumerate(self.joints)}

    @cached_property
    def joint_parent_link(self):
        return tuple(self.link_index[j.parent] for j in self.joints)

    @cached_property
    def joint_child_link(self):
        return tuple(self.link_index[j.child] for j in self.joints)

    @cached_property
    def link_parent_joint(self):
        """Per link index: the joint whose child it is (None for the base)."""
        out = [None] * (len(self.links) + 1)
        for ji, j in enumerate(self.joints):
            out[self.link_index[j.child]] = ji
        return tuple(out)

    @cached_property
    def parent_joint(self):
        """Per joint index: the next joint toward the base (None at the base)."""
        return tuple(self.link_parent_joint[pl] for pl in self.joint_parent_link)

    @cached_property
    def topo_joint_order(self):
        """Joint indices ordered so each parent link is posed before its children."""
        placed = {0}
        order = []
        remaining = set(range(len(self.joints)))
        while remaining:
            progressed = False
            for ji in sorted(remaining):
                if self.joint_parent_link[ji] in placed:
                    order.append(ji)
                    placed.add(self.joint_child_link[ji])
                    remaining.discard(ji)
                    progressed = True
            if not progressed:  # pragma: no cover - excluded by tree validation
                raise TreeError("joints do not form a processable tree")
        return tuple(order)

    @cached_property
    def joint_limits(self):
        lo = _readonly([j.limits[0] for j in self.joints])
        hi = _readonly([j.limits[1] for j in self.joints])
        return lo, hi

    @cached_property
    def contact_frame_map(self):
        return {c.name: c for c in self.contact_frames}


@dataclass(frozen=True, eq=False)
class RobotState:
    """Base pose, joint positions, and the generalized velocity split."""

    base_position: np.ndarray
    base_orientation: np.ndarray  # unit quaternion (w, x, y, z)
    joint_positions: np.ndarray
    base_linear_velocity: np.ndarray
    base_angular_velocity: np.ndarray
    joint_velocities: np.ndarray

    def __post_init__(self):
        for fname, size in (
            ("base_position", 3),
            ("base_orientation", 4),
            ("base_linear_velocity", 3),
            ("base_angular_velocity", 3),
        ):
            object.__setattr__(self, fname, _readonly(_vec(getattr(self, fname), size, fname)))
        jp = np.atleast_1d(np.asarray(self.joint_positions, dtype=float))
        jv = np.atleast_1d(np.asarray(self.joint_velocities, dtype=float))
        object.__setattr__(self, "joint_positions", _readonly(jp))
        object.__setattr__(self, "joint_velocities", _readonly(jv))

    @classmethod
    def zero(cls, model):
        n = model.n
        return cls(
            base_position=np.zeros(3),
            base_orientation=np.array([1.0, 0.0, 0.0, 0.0]),
            joint_positions=np.zeros(n),
            base_linear_velocity=np.zeros(3),
            base_angular_velocity=np.zeros(3),
            joint_velocities=np.zeros(n),
        )

    @property
    def generalized_velocity(self):
        """[v_base; w_base; qdot] in R^(n+6)."""
        return np.concatenate(
            [self.base_linear_velocity, self.base_angular_velocity, self.joint_velocities]
        )

    def to_dict(self):
        return {
            "base_position": self.base_position.tolist(),
            "base_orientation": self.base_orientation.tolist(),
            "joint_positions": self.joint_positions.tolist(),
            "base_linear_velocity": self.base_linear_velocity.tolist(),
            "base_angular_velocity": self.base_angular_velocity.tolist(),
            "joint_velocities": self.joint_velocities.tolist(),
        }

    @classmethod
    def from_dict(cls, obj):
        missing = [k for k in (
            "base_position", "base_orientation", "joint_positions",
            "base_linear_velocity", "base_angular_velocity", "joint_velocities",
        ) if k not in obj]
        if missing:
            raise SchemaError(f"state object missing field(s) {missing}")
        return cls(**{k: obj[k] for k in (
            "base_position", "base_orientation", "joint_positions",
            "base_linear_velocity", "base_angular_velocity", "joint_velocities",
        )})


# ---------------------------------------------------------------------------
# parsing / serialization
# ---------------------------------------------------------------------------

def _require(obj, key, where):
    if key not in obj:
        raise SchemaError(f"{where} is missing required field '{key}'")
    return obj[key]


def _parse_link(obj, where):
    if not isinstance(obj, dict):
        raise SchemaError(f"{where} must be an object")
    name = _require(obj, "name", where)
    if not isinstance(name, str) or not name:
        raise SchemaError(f"{where} name must be a non-empty string")
    return LinkSpec.from_inertia_vector(
        name=name,
        mass=_to_float(_require(obj, "mass", f"link '{name}'"), f"link '{name}' mass"),
        com=_require(obj, "com", f"link '{name}'"),
        ivec=_require(obj, "inertia", f"link '{name}'"),
    )


def _to_float(value, what):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{what} must be a number, got {value!r}")
    return float(value)


def _parse_joint(obj, where):
    if not isinstance(obj, dict):
        raise SchemaError(f"{where} must be an object")
    name = _require(obj, "name", where)
    origin = _require(obj, "origin", f"joint '{name}'")
    if not isinstance(origin, dict):
        raise SchemaError(f"joint '{name}' origin must be an object with xyz/rpy")
    limits = _require(obj, "limits", f"joint '{name}'")
    if not isinstance(limits, (list, tuple)) or len(limits) != 2:
        raise SchemaError(f"joint '{name}' limits must be [lower, upper]")
    actuated = _require(obj, "actuated", f"joint '{name}'")
    if not isinstance(actuated, bool):
        raise SchemaError(f"joint '{name}' actuated must be a boolean")
    return JointSpec(
        name=name,
        parent=_require(obj, "parent", f"joint '{name}'"),
        child=_require(obj, "child", f"joint '{name}'"),
        kind=_require(obj, "kind", f"joint '{name}'"),
        axis=_require(obj, "axis", f"joint '{name}'"),
        origin_xyz=origin.get("xyz", [0.0, 0.0, 0.0]),
        origin_rpy=origin.get("rpy", [0.0, 0.0, 0.0]),
        limits=(_to_float(limits[0], f"joint '{name}' lower limit"),
                _to_float(limits[1], f"joint '{name}' upper limit")),
        actuated=actuated,
    )


def parse_model(text):
    """Parse and fully validate a robot-description document.

    Raises :class:`SchemaError`, :class:`TreeError` or :class:`PhysicsError`
    naming the offending element.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"document is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("document root must be a JSON object")

    base = _parse_link(_require(doc, "base_link", "document"), "base_link")
    links_raw = _require(doc, "links", "document")
    joints_raw = _require(doc, "joints", "document")
    frames_raw = _require(doc, "contact_frames", "document")
    if not isinstance(links_raw, list) or not isinstance(joints_raw, list) or not isinstance(frames_raw, list):
        raise SchemaError("'links', 'joints' and 'contact_frames' must be arrays")

    links = tuple(_parse_link(o, f"links[{i}]") for i, o in enumerate(links_raw))
    joints = tuple(_parse_joint(o, f"joints[{i}]") for i, o in enumerate(joints_raw))
    frames = []
    for i, o in enumerate(frames_raw):
        if not isinstance(o, dict):
            raise SchemaError(f"contact_frames[{i}] must be an object")
        fname = _require(o, "name", f"contact_frames[{i}]")
        frames.append(ContactFrame(
            name=fname,
            link=_require(o, "link", f"contact frame '{fname}'"),
            offset=_require(o, "offset", f"contact frame '{fname}'"),
        ))

    return RobotModel(
        base_link=base,
        links=links,
        joints=joints,
        contact_frames=tuple(frames),
        name=doc.get("name", ""),
        comment=doc.get("comment", ""),
    )


def _link_obj(link):
    return {
        "name": link.name,
        "mass": link.mass,
        "com": link.com.tolist(),
        "inertia": link.inertia_vector(),
    }


def serialize_model(model):
    """Serialize to the document format; parse(serialize(m)) reproduces m field-for-field."""
    doc = {}
    if model.name:
        doc["name"] = model.name
    if model.comment:
        doc["comment"] = model.comment
    doc["base_link"] = _link_obj(model.base_link)
    doc["links"] = [_link_obj(l) for l in model.links]
    doc["joints"] = [
        {
            "name": j.name,
            "parent": j.parent,
            "child": j.child,
            "kind": j.kind,
            "axis": j.axis.tolist(),
            "origin": {"xyz": j.origin_xyz.tolist(), "rpy": j.origin_rpy.tolist()},
            "limits": list(j.limits),
            "actuated": j.actuated,
        }
        for j in model.joints
    ]
    doc["contact_frames"] = [
        {"name": c.name, "link": c.link, "offset": c.offset.tolist()} for c in model.contact_frames
    ]
    return json.dumps(doc, indent=2) + "\n"


def load_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_model(fh.read())


_BUNDLED = ("quadruped", "planar_biped", "single_body")


def bundled_model_names():
    return _BUNDLED


def load_bundled_model(name):
    """Load one of the models shipped with the package (synthetic parameters)."""
    if name not in _BUNDLED:
        raise KeyError(f"unknown bundled model '{name}'; available: {list(_BUNDLED)}")
    text = resources.files("imfkit.data").joinpath(f"{name}.json").read_text(encoding="utf-8")
    return parse_model(text)


# ---------------------------------------------------------------------------
# state validation
# ---------------------------------------------------------------------------

def validate_state(model, state, strict=False):
    """Check a state against a model; returns the state with a renormalized quaternion.

    Non-strict mode checks dimensions and the quaternion only.  Strict mode
    additionally rejects joint positions outside the model limits.
    """
    if state.joint_positions.shape != (model.n,):
        raise StateError(
            f"joint_positions has {state.joint_positions.shape[0]} entries, model has n = {model.n}"
        )
    if state.joint_velocities.shape != (model.n,):
        raise StateError(
            f"joint_velocities has {state.joint_velocities.shape[0]} entries, model has n = {model.n}"
        )
    norm = float(np.linalg.norm(state.base_orientation))
    if norm < 1e-6:
        raise StateError(f"base_orientation is degenerate (norm {norm!r})")
    if abs(norm - 1.0) - 1e-6 > 1e-12:  # slack keeps values at exactly the tolerance inside
        raise StateError(f"base_orientation norm {norm!r} is not within 1e-6 of 1")
    if strict:
        lo, hi = model.joint_limits
        bad = np.where((state.joint_positions < lo) | (state.joint_positions > hi))[0]
        if bad.size:
            j = model.joints[bad[0]]
            raise StateError(
                f"joint '{j.name}' position {state.joint_positions[bad[0]]!r} "
                f"violates limits [{j.limits[0]}, {j.limits[1]}]"
            )
    if norm == 1.0:
        return state
    return RobotState(
        base_position=state.base_position,
        base_orientation=state.base_orientation / norm,
        joint_positions=state.joint_positions,
        base_linear_velocity=state.base_linear_velocity,
        base_angular_velocity=state.base_angular_velocity,
        joint_velocities=state.joint_velocities,
    )
