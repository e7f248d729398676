"""Trajectory-level evaluation: mechanical power, cost of transport, and
velocity-tracking RMSE.

Cost of transport is rectified power / (m g v) by default: summing |tau_i *
qd_i| is the usual locomotion convention and avoids sign ambiguity under
regenerative joint power.  The signed variant is reported alongside.  Time
averages use the trapezoidal rule so non-uniformly sampled logs are handled.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "MechanicalPower",
    "MetricsReport",
    "RMSE_CHANNELS",
    "mechanical_power",
    "cost_of_transport",
    "velocity_rmse",
    "metrics_report",
]

RMSE_CHANNELS = ("pitch-rate", "roll-rate", "yaw-rate", "planar-speed")


class MechanicalPower(NamedTuple):
    signed: float     # sum tau_i * qd_i over actuated joints
    rectified: float  # sum |tau_i * qd_i|


def _actuated_velocities(sample, actuated_indices):
    qd = sample.state.joint_velocities
    tau = sample.joint_torques
    if actuated_indices is not None:
        idx = np.asarray(actuated_indices, dtype=int)
        if len(idx) != len(tau):
            raise ValueError(
                f"torque vector has {len(tau)} entries but {len(idx)} actuated indices given"
            )
        return tau, qd[idx]
    if len(tau) != len(qd):
        raise ValueError(
            f"torque vector has {len(tau)} entries but the state has {len(qd)} joint "
            "velocities; pass actuated_indices for partially actuated models"
        )
    return tau, qd


def mechanical_power(sample, actuated_indices=None):
    """Instantaneous joint power of one sample, signed and rectified.

    ``actuated_indices`` maps the torque vector onto the full joint-velocity
    vector; omit it when every joint is actuated.
    """
    tau, qd = _actuated_velocities(sample, actuated_indices)
    per_joint = tau * qd
    return MechanicalPower(signed=float(per_joint.sum()), rectified=float(np.abs(per_joint).sum()))


def _times(samples):
    return np.array([s.time for s in samples])


def _trapezoid_mean(t, f):
    dt = np.diff(t)
    return float(np.sum(0.5 * dt * (f[:-1] + f[1:])) / (t[-1] - t[0]))


def cost_of_transport(samples, robot_mass, g=9.81, actuated_indices=None):
    """Time-averaged rectified power / (m g * mean planar speed).

    Requires at least two samples and a mean speed above 1e-3 m/s; a
    stationary log has no defined cost of transport.
    """
    if len(samples) < 2:
        raise ValueError("cost of transport needs at least 2 samples")
    if robot_mass <= 0:
        raise ValueError(f"robot_mass must be positive, got {robot_mass}")
    t = _times(samples)
    speed = np.array([np.linalg.norm(s.measured_planar_velocity) for s in samples])
    mean_speed = _trapezoid_mean(t, speed)
    if mean_speed < 1e-3:
        raise ValueError(
            f"mean planar speed {mean_speed:.3e} m/s is below 1e-3; cost of transport is undefined"
        )
    power = np.array([mechanical_power(s, actuated_indices).rectified for s in samples])
    return _trapezoid_mean(t, power) / (robot_mass * g * mean_speed)


def velocity_rmse(samples, channel):
    """Root-mean-square tracking error of one channel over a trajectory.

    yaw-rate compares against the commanded yaw rate and planar-speed against
    the commanded planar speed; pitch-rate and roll-rate compare against a
    zero command (level-base target), since the command vector carries no
    pitch/roll channels.
    """
    if not samples:
        raise ValueError("velocity_rmse needs at least 1 sample")
    if channel == "pitch-rate":
        err = [s.measured_rollpitch_rates[1] for s in samples]
    elif channel == "roll-rate":
        err = [s.measured_rollpitch_rates[0] for s in samples]
    elif channel == "yaw-rate":
        err = [s.measured_yaw_rate - s.command[2] for s in samples]
    elif channel == "planar-speed":
        err = [
            np.linalg.norm(s.measured_planar_velocity) - np.linalg.norm(s.command[:2])
            for s in samples
        ]
    else:
        raise ValueError(f"unknown channel {channel!r}; expected one of {RMSE_CHANNELS}")
    return float(np.sqrt(np.mean(np.square(err))))


@dataclass(frozen=True, eq=False)
class MetricsReport:
    mean_mechanical_power: float   # rectified, trapezoid time average, W
    peak_mechanical_power: float   # max rectified instantaneous power, W
    mean_signed_power: float       # signed variant, for transparency
    cot: float                     # rectified convention
    cot_signed: float
    rmse: dict                     # channel -> scalar
    duration: float                # s
    distance: float                # integral of planar speed, m

    def to_json_dict(self):
        return {
            "mean_mechanical_power": self.mean_mechanical_power,
            "peak_mechanical_power": self.peak_mechanical_power,
            "mean_signed_power": self.mean_signed_power,
            "cot": self.cot,
            "cot_signed": self.cot_signed,
            "rmse": dict(self.rmse),
            "duration": self.duration,
            "distance": self.distance,
        }

    def to_json(self):
        return json.dumps(self.to_json_dict(), indent=2) + "\n"

    def csv_header(self):
        return ",".join(
            ["mean_mechanical_power", "peak_mechanical_power", "mean_signed_power",
             "cot", "cot_signed"]
            + [f"rmse_{c}" for c in RMSE_CHANNELS]
            + ["duration", "distance"]
        )

    def csv_row(self, fmt=lambda x: format(x, ".17g")):
        vals = [self.mean_mechanical_power, self.peak_mechanical_power, self.mean_signed_power,
                self.cot, self.cot_signed]
        vals += [self.rmse[c] for c in RMSE_CHANNELS]
        vals += [self.duration, self.distance]
        return ",".join(fmt(v) for v in vals)


def metrics_report(samples, robot_mass, g=9.81, actuated_indices=None):
    """Full evaluation of one trajectory."""
    if len(samples) < 2:
        raise ValueError("metrics_report needs at least 2 samples")
    t = _times(samples)
    if not np.all(np.diff(t) > 0):
        raise ValueError("sample timestamps must be strictly increasing")
    power = [mechanical_power(s, actuated_indices) for s in samples]
    rect = np.array([p.rectified for p in power])
    signed = np.array([p.signed for p in power])
    speed = np.array([np.linalg.norm(s.measured_planar_velocity) for s in samples])
    mean_speed = _trapezoid_mean(t, speed)
    if mean_speed < 1e-3:
        raise ValueError(
            f"mean planar speed {mean_speed:.3e} m/s is below 1e-3; cost of transport is undefined"
        )
    denom = robot_mass * g * mean_speed
    duration = float(t[-1] - t[0])
    return MetricsReport(
        mean_mechanical_power=_trapezoid_mean(t, rect),
        peak_mechanical_power=float(rect.max()),
        mean_signed_power=_trapezoid_mean(t, signed),
        cot=_trapezoid_mean(t, rect) / denom,
        cot_signed=_trapezoid_mean(t, signed) / denom,
        rmse={c: velocity_rmse(samples, c) for c in RMSE_CHANNELS},
        duration=duration,
        distance=_trapezoid_mean(t, speed) * duration,
    )
