"""Per-timestep reward formulas for legged-locomotion training.

Two reward structures are covered:

* an adversarial-imitation structure combining a command-tracking task
  reward, a discriminator style reward, and the impact-mitigation reward:
  r = w_task * r_task + w_style * r_style + w_imf * r_imf
* a hand-crafted structure summing thirteen weighted tracking/penalty terms
  plus the impact-mitigation reward.

All functions are pure and operate on one :class:`TrajectorySample`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import NamedTuple

import numpy as np

from .model import RobotModel, RobotState, SchemaError

__all__ = [
    "TrajectorySample",
    "RewardWeights",
    "TermValue",
    "HANDCRAFTED_TERM_NAMES",
    "style_reward",
    "task_reward",
    "handcrafted_terms",
    "combined_amp_reward",
    "combined_handcrafted_reward",
    "default_weights",
    "load_weights",
]


@dataclass(frozen=True, eq=False)
class TrajectorySample:
    """One timestep of a locomotion log.

    Measured channels are body-frame quantities as produced by a typical
    estimator: planar velocity (x, y), yaw rate, vertical velocity, roll and
    pitch rates (in that order), the gravity direction in the body frame, and
    the base height.  ``command`` is [v_x, v_y, w_z].  ``joint_torques`` and
    the actions cover actuated joints only; positions/velocities/accelerations
    cover all n joints.
    """

    time: float
    state: RobotState
    measured_planar_velocity: np.ndarray   # (2,)
    measured_yaw_rate: float
    measured_vertical_velocity: float
    measured_rollpitch_rates: np.ndarray   # (2,) = [roll rate, pitch rate]
    gravity_in_body: np.ndarray            # (3,), unit norm
    base_height: float
    command: np.ndarray                    # (3,) = [v_x, v_y, w_z]
    joint_torques: np.ndarray              # (n_act,)
    joint_accelerations: np.ndarray        # (n,)
    action: np.ndarray                     # (n_act,)
    prev_action: np.ndarray                # (n_act,)
    foot_contact: tuple                    # per contact frame
    undesired_contact: bool
    foot_air_time: np.ndarray              # (frames,) seconds since liftoff
    first_contact: tuple                   # per contact frame

    def __post_init__(self):
        for fname in (
            "measured_planar_velocity", "measured_rollpitch_rates", "gravity_in_body",
            "command", "joint_torques", "joint_accelerations", "action", "prev_action",
            "foot_air_time",
        ):
            a = np.atleast_1d(np.asarray(getattr(self, fname), dtype=float))
            a.setflags(write=False)
            object.__setattr__(self, fname, a)
        object.__setattr__(self, "foot_contact", tuple(bool(b) for b in self.foot_contact))
        object.__setattr__(self, "first_contact", tuple(bool(b) for b in self.first_contact))
        object.__setattr__(self, "undesired_contact", bool(self.undesired_contact))

    def validate(self, model):
        n, n_act, frames = model.n, model.n_act, len(model.contact_frames)
        checks = (
            ("measured_planar_velocity", 2), ("measured_rollpitch_rates", 2),
            ("gravity_in_body", 3), ("command", 3),
            ("joint_torques", n_act), ("joint_accelerations", n),
            ("action", n_act), ("prev_action", n_act), ("foot_air_time", frames),
        )
        for fname, size in checks:
            if getattr(self, fname).shape != (size,):
                raise ValueError(
                    f"sample at t={self.time}: {fname} has shape "
                    f"{getattr(self, fname).shape}, expected ({size},)"
                )
        for fname in ("foot_contact", "first_contact"):
            if len(getattr(self, fname)) != frames:
                raise ValueError(
                    f"sample at t={self.time}: {fname} has {len(getattr(self, fname))} "
                    f"entries, model has {frames} contact frames"
                )
        if abs(np.linalg.norm(self.gravity_in_body) - 1.0) > 1e-6:
            raise ValueError(f"sample at t={self.time}: gravity_in_body is not unit norm")
        return self


# Table of hand-crafted terms and their default weights.  Penalty weights are
# negative so every weighted penalty is <= 0 and every weighted reward >= 0.
_DEFAULT_HANDCRAFTED = {
    "linear_velocity": 1.5,
    "angular_velocity": 0.75,
    "vertical_velocity": -2.0,
    "rollpitch_rate": -0.05,
    "orientation": -0.5,
    "height_deviation": -2.0,
    "torque_effort": -1.0e-5,
    "acceleration_effort": -1.0e-7,
    "position_limits": -2.0,
    "action_smoothness": -0.01,
    "limb_contact": -1.0,
    "foot_air_time": 0.01,
    "standstill_deviation": -0.5,
}

HANDCRAFTED_TERM_NAMES = tuple(_DEFAULT_HANDCRAFTED)


@dataclass(frozen=True)
class RewardWeights:
    """Weights and shaping constants for both reward structures.

    Defaults: style weight 2.0 and mitigation weight 10.0 for the adversarial
    structure with channel weights 2.5 (linear) / 1.5 (yaw); the hand-crafted
    table carries its own per-term weights.  sigma is the tracking-kernel
    width; desired_height defaults to the bundled quadruped's stance height.
    """

    w_task: float = 1.0
    w_style: float = 2.0
    w_imf: float = 10.0
    w_v: float = 2.5
    w_omega: float = 1.5
    handcrafted: dict = field(default_factory=lambda: dict(_DEFAULT_HANDCRAFTED))
    sigma: float = 0.25
    desired_height: float = 0.405
    air_time_threshold: float = 0.5
    standstill_command_threshold: float = 0.1

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if self.air_time_threshold < 0:
            raise ValueError(f"air_time_threshold must be >= 0, got {self.air_time_threshold}")
        merged = dict(_DEFAULT_HANDCRAFTED)
        unknown = set(self.handcrafted) - set(merged)
        if unknown:
            raise ValueError(f"unknown hand-crafted term name(s): {sorted(unknown)}")
        merged.update(self.handcrafted)
        object.__setattr__(self, "handcrafted", merged)

    def to_dict(self):
        return {
            "w_task": self.w_task, "w_style": self.w_style, "w_imf": self.w_imf,
            "w_v": self.w_v, "w_omega": self.w_omega,
            "sigma": self.sigma, "desired_height": self.desired_height,
            "air_time_threshold": self.air_time_threshold,
            "standstill_command_threshold": self.standstill_command_threshold,
            "handcrafted": dict(self.handcrafted),
        }

    @classmethod
    def from_dict(cls, obj):
        known = {
            "w_task", "w_style", "w_imf", "w_v", "w_omega", "handcrafted",
            "sigma", "desired_height", "air_time_threshold", "standstill_command_threshold",
        }
        unknown = set(obj) - known
        if unknown:
            raise SchemaError(f"unknown reward-weight field(s): {sorted(unknown)}")
        return cls(**obj)


def default_weights():
    return RewardWeights()


def load_weights(path):
    """Read a RewardWeights JSON document (field names as in the dataclass)."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"weights file is not valid JSON: {exc}") from exc
    return RewardWeights.from_dict(obj)


def bundled_weights(name):
    """Load a weight configuration shipped with the package."""
    text = resources.files("imfkit.data").joinpath(f"{name}.json").read_text(encoding="utf-8")
    return RewardWeights.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# reward formulas
# ---------------------------------------------------------------------------

def style_reward(d_value):
    """max[0, 1 - 0.25 (d - 1)^2]: 1 for discriminator output 1, 0 at -1."""
    return max(0.0, 1.0 - 0.25 * (d_value - 1.0) ** 2)


def task_reward(sample, weights):
    """Command tracking: w_v e^-||v_err|| + w_omega e^-|w_err| (plain norms,
    not the squared kernels of the hand-crafted table)."""
    v_err = float(np.linalg.norm(sample.measured_planar_velocity - sample.command[:2]))
    w_err = abs(sample.measured_yaw_rate - sample.command[2])
    return weights.w_v * math.exp(-v_err) + weights.w_omega * math.exp(-w_err)


class TermValue(NamedTuple):
    raw: float
    weighted: float


def handcrafted_terms(sample, model, weights):
    """Evaluate all thirteen hand-crafted terms; returns {name: (raw, weighted)}.

    Conventions not fixed by the table itself: position-limit violations use
    the linear excess beyond each limit (zero inside, continuous at the
    boundary); the stand-still deviation measures |q| from the zero
    configuration (the bundled models' nominal stance) and is gated on the
    commanded planar speed; air time is rewarded relative to the threshold
    only at touchdown samples.
    """
    s2 = weights.sigma ** 2
    v_err2 = float(np.sum((sample.measured_planar_velocity - sample.command[:2]) ** 2))
    w_err2 = (sample.measured_yaw_rate - sample.command[2]) ** 2

    raw = {
        "linear_velocity": math.exp(-v_err2 / s2),
        "angular_velocity": math.exp(-w_err2 / s2),
        "vertical_velocity": sample.measured_vertical_velocity ** 2,
        "rollpitch_rate": float(np.sum(sample.measured_rollpitch_rates ** 2)),
        "orientation": float(np.linalg.norm(sample.gravity_in_body[:2])),
        "height_deviation": (sample.base_height - weights.desired_height) ** 2,
        "torque_effort": float(np.linalg.norm(sample.joint_torques)),
        "acceleration_effort": float(np.linalg.norm(sample.joint_accelerations)),
        "action_smoothness": float(np.linalg.norm(sample.action - sample.prev_action)),
        "limb_contact": 1.0 if sample.undesired_contact else 0.0,
    }

    q = sample.state.joint_positions
    lo, hi = model.joint_limits
    raw["position_limits"] = float(np.sum(np.maximum(0.0, q - hi) + np.maximum(0.0, lo - q)))

    raw["foot_air_time"] = float(sum(
        (t - weights.air_time_threshold) for t, first in zip(sample.foot_air_time, sample.first_contact) if first
    ))

    planar_cmd = float(np.linalg.norm(sample.command[:2]))
    raw["standstill_deviation"] = (
        float(np.sum(np.abs(q))) if planar_cmd < weights.standstill_command_threshold else 0.0
    )

    return {
        name: TermValue(raw=raw[name], weighted=weights.handcrafted[name] * raw[name])
        for name in HANDCRAFTED_TERM_NAMES
    }


def combined_amp_reward(task, style, imf, weights):
    """w_task * r_task + w_style * r_style + w_imf * r_imf."""
    return weights.w_task * task + weights.w_style * style + weights.w_imf * imf


def combined_handcrafted_reward(terms, imf, weights):
    """w_imf * r_imf plus the sum of all weighted hand-crafted terms."""
    return weights.w_imf * imf + sum(t.weighted for t in terms.values())
