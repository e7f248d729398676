"""Randomized cross-validation of the inertia-based impulse formulas against
the KKT impact solve.

Each trial draws a random state, computes the contact impulse twice per
contact frame -- once as -Lambda v / -Lambda_L v and once from the
saddle-point impact solve -- and records the worst relative discrepancy plus
the observed range of the mitigation factor.  A campaign is deterministic
given (model, trials, seed).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    SingularConfigurationError,
    contact_jacobian,
    forward_kinematics,
    mass_matrix,
    random_state,
    solve_constrained_impulse,
)
from .imf import impact_mitigation

__all__ = ["OracleReport", "run_oracle_campaign"]


def _state_digest(state):
    h = hashlib.sha256()
    for a in (
        state.base_position,
        state.base_orientation,
        state.joint_positions,
        state.base_linear_velocity,
        state.base_angular_velocity,
        state.joint_velocities,
    ):
        h.update(np.ascontiguousarray(a).tobytes())
    return h.hexdigest()[:12]


def _rel_error(candidate, reference):
    # floor on the denominator avoids blow-up at near-zero impulses
    return float(np.linalg.norm(candidate - reference) / max(np.linalg.norm(reference), 1e-12))


@dataclass(frozen=True, eq=False)
class OracleReport:
    trials: int
    seed: int
    max_rel_error_free: float
    max_rel_error_locked: float
    min_xi: float
    max_xi: float
    failures: tuple = field(default_factory=tuple)

    def to_json_dict(self):
        return {
            "trials": self.trials,
            "seed": self.seed,
            "max_rel_error_free": self.max_rel_error_free,
            "max_rel_error_locked": self.max_rel_error_locked,
            "min_xi": self.min_xi,
            "max_xi": self.max_xi,
            "failures": [{"state": d, "error": m} for d, m in self.failures],
        }

    def to_json(self):
        return json.dumps(self.to_json_dict(), indent=2) + "\n"


def run_oracle_campaign(model, trials, seed):
    """Run ``trials`` random-state cross-checks and aggregate worst cases.

    Singular configurations are recorded in ``failures`` (state digest plus
    message) without aborting the campaign.  Aggregation uses only max/min
    reductions, so the report is independent of evaluation order.
    """
    if trials < 1:
        raise ValueError(f"trials must be >= 1, got {trials}")
    if not model.contact_frames:
        raise ValueError("model has no contact frames to check")

    rng = np.random.default_rng(seed)
    worst_free = 0.0
    worst_locked = 0.0
    min_xi = np.inf
    max_xi = -np.inf
    failures = []

    for _ in range(trials):
        state = random_state(model, rng)
        fk = forward_kinematics(model, state)
        mm = mass_matrix(model, state, fk=fk)
        for frame in model.contact_frame_map:
            try:
                jac = contact_jacobian(model, state, frame, fk=fk)
                v = jac.full @ state.generalized_velocity
                res = impact_mitigation(model, state, frame, fk=fk, mass=mm, jac=jac)
                rho_free = -res.lam @ v
                rho_locked = -res.lam_locked @ v
                kkt_free = solve_constrained_impulse(
                    model, state, frame, lock_joints=False, fk=fk, mass=mm, jac=jac
                ).impulse
                kkt_locked = solve_constrained_impulse(
                    model, state, frame, lock_joints=True, fk=fk, mass=mm, jac=jac
                ).impulse
            except SingularConfigurationError as exc:
                failures.append((_state_digest(state), f"{frame}: {exc}"))
                continue
            worst_free = max(worst_free, _rel_error(rho_free, kkt_free))
            worst_locked = max(worst_locked, _rel_error(rho_locked, kkt_locked))
            min_xi = min(min_xi, res.xi)
            max_xi = max(max_xi, res.xi)

    return OracleReport(
        trials=trials,
        seed=int(seed),
        max_rel_error_free=worst_free,
        max_rel_error_locked=worst_locked,
        min_xi=float(min_xi),
        max_xi=float(max_xi),
        failures=tuple(failures),
    )
