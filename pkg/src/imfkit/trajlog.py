"""Line-delimited JSON trajectory logs.

The first line is a header object pinning the schema version and naming the
model; every following line is one sample with field names mirroring
:class:`imfkit.rewards.TrajectorySample` (the robot state is nested under
"state").  The format is streamable, diff-able, and language neutral.
"""

from __future__ import annotations

import json
import os
from dataclasses import replace

import numpy as np

from .model import RobotState, load_bundled_model, load_model, bundled_model_names
from .rewards import TrajectorySample

__all__ = [
    "SCHEMA",
    "TrajectoryLogError",
    "read_log",
    "write_log",
    "sample_to_obj",
    "sample_from_obj",
    "resolve_model_reference",
    "finite_difference_accelerations",
]

SCHEMA = "trajlog/1"

_SAMPLE_FIELDS = (
    "time", "state", "measured_planar_velocity", "measured_yaw_rate",
    "measured_vertical_velocity", "measured_rollpitch_rates", "gravity_in_body",
    "base_height", "command", "joint_torques", "joint_accelerations",
    "action", "prev_action", "foot_contact", "undesired_contact",
    "foot_air_time", "first_contact",
)


class TrajectoryLogError(ValueError):
    """A trajectory log violates the schema or is inconsistent with its model."""


def sample_to_obj(sample):
    return {
        "time": sample.time,
        "state": sample.state.to_dict(),
        "measured_planar_velocity": sample.measured_planar_velocity.tolist(),
        "measured_yaw_rate": sample.measured_yaw_rate,
        "measured_vertical_velocity": sample.measured_vertical_velocity,
        "measured_rollpitch_rates": sample.measured_rollpitch_rates.tolist(),
        "gravity_in_body": sample.gravity_in_body.tolist(),
        "base_height": sample.base_height,
        "command": sample.command.tolist(),
        "joint_torques": sample.joint_torques.tolist(),
        "joint_accelerations": sample.joint_accelerations.tolist(),
        "action": sample.action.tolist(),
        "prev_action": sample.prev_action.tolist(),
        "foot_contact": list(sample.foot_contact),
        "undesired_contact": sample.undesired_contact,
        "foot_air_time": sample.foot_air_time.tolist(),
        "first_contact": list(sample.first_contact),
    }


def sample_from_obj(obj, where="sample"):
    missing = [k for k in _SAMPLE_FIELDS if k not in obj]
    if missing:
        raise TrajectoryLogError(f"{where}: missing field(s) {missing}")
    kwargs = {k: obj[k] for k in _SAMPLE_FIELDS}
    kwargs["state"] = RobotState.from_dict(obj["state"])
    return TrajectorySample(**kwargs)


def write_log(path, samples, model_ref, units=None):
    """Write a header line plus one JSON object per sample."""
    header = {
        "schema": SCHEMA,
        "model": model_ref,
        "channels": list(_SAMPLE_FIELDS),
        "units": units or {
            "time": "s", "lengths": "m", "angles": "rad", "torques": "N*m",
            "velocities": "m/s, rad/s",
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header) + "\n")
        for s in samples:
            fh.write(json.dumps(sample_to_obj(s)) + "\n")


def read_log(path, model=None):
    """Read (header, samples).  With a model, every sample is dimension-checked
    against it; timestamps must be strictly increasing either way."""
    samples = []
    header = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TrajectoryLogError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
            if header is None:
                if not isinstance(obj, dict) or obj.get("schema") != SCHEMA:
                    raise TrajectoryLogError(
                        f"{path}:1: first line must be a header object with schema '{SCHEMA}'"
                    )
                header = obj
                continue
            try:
                samples.append(sample_from_obj(obj, where=f"{path}:{lineno}"))
            except (ValueError, TypeError) as exc:
                raise TrajectoryLogError(f"{path}:{lineno}: {exc}") from exc
    if header is None:
        raise TrajectoryLogError(f"{path}: empty file")
    times = [s.time for s in samples]
    if any(b <= a for a, b in zip(times, times[1:])):
        raise TrajectoryLogError(f"{path}: timestamps must be strictly increasing")
    if model is not None:
        from .model import validate_state

        for s in samples:
            try:
                s.validate(model)
                validate_state(model, s.state)
            except ValueError as exc:
                raise TrajectoryLogError(f"{path}: {exc}") from exc
    return header, samples


def resolve_model_reference(ref, base_dir=None):
    """Resolve a header model reference: a bundled model name or a file path
    (relative paths are tried against ``base_dir`` first)."""
    if ref in bundled_model_names():
        return load_bundled_model(ref)
    candidates = [ref]
    if base_dir and not os.path.isabs(ref):
        candidates.insert(0, os.path.join(base_dir, ref))
    for cand in candidates:
        if os.path.exists(cand):
            return load_model(cand)
    raise TrajectoryLogError(
        f"cannot resolve model reference {ref!r} (not a bundled name or existing path)"
    )


def finite_difference_accelerations(samples):
    """Replace each sample's joint accelerations with central differences of
    the logged joint velocities (one-sided at the ends).  Fallback for logs
    that do not carry accelerations."""
    if len(samples) < 2:
        return list(samples)
    t = np.array([s.time for s in samples])
    v = np.stack([s.state.joint_velocities for s in samples])
    acc = np.empty_like(v)
    acc[0] = (v[1] - v[0]) / (t[1] - t[0])
    acc[-1] = (v[-1] - v[-2]) / (t[-1] - t[-2])
    for i in range(1, len(samples) - 1):
        acc[i] = (v[i + 1] - v[i - 1]) / (t[i + 1] - t[i - 1])
    return [replace(s, joint_accelerations=a) for s, a in zip(samples, acc)]
