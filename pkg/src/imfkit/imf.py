"""Operational-space inertia and the impact mitigation factor.

The operational-space inertia Lambda = (J H^-1 J^T)^-1 is the effective
inertia an impact feels at a contact point.  Locking every joint leaves only
the 6-DOF base, giving the benchmark inertia Lambda_L = (J_b H_bb^-1 J_b^T)^-1.
Their mismatch Xi = I - Lambda Lambda_L^-1 measures how much the free joint
dynamics soak up; its determinant xi in [0, 1) is the impact mitigation
factor, and -log(1 - xi) turns it into an unbounded-above reward that pushes
toward configurations with high passive impact absorption.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .dynamics import (
    SingularConfigurationError,
    contact_jacobian,
    forward_kinematics,
    mass_matrix,
)

__all__ = [
    "ImfResult",
    "osim",
    "osim_locked",
    "impact_mitigation",
    "imf_reward",
]

# xi -> reward diverges at xi = 1; cap the argument so consumers always see a
# finite value (the raw determinant is still reported unclamped).
XI_CLAMP = 1.0 - 1e-9
_XI_DOMAIN_SLACK = 1e-12


@dataclass(frozen=True, eq=False)
class ImfResult:
    """Operational-space inertias and the mitigation factor for one contact frame."""

    frame: str
    lam: np.ndarray          # Lambda, m x m
    lam_locked: np.ndarray   # Lambda_L, m x m
    xi_matrix: np.ndarray    # Xi = I - Lambda Lambda_L^-1
    xi: float                # det(Xi), raw
    reward: float            # -log(1 - min(xi, 1 - 1e-9)), >= 0

    def to_json_dict(self):
        return {
            "frame": self.frame,
            "xi": self.xi,
            "reward": self.reward,
            "lambda": self.lam.tolist(),
            "lambda_locked": self.lam_locked.tolist(),
            "xi_matrix": self.xi_matrix.tolist(),
        }


def _check_rank(j, what):
    svals = np.linalg.svd(j, compute_uv=False)
    if svals[-1] <= 1e-10 * max(svals[0], 1e-300):
        raise SingularConfigurationError(
            f"{what} is rank deficient (smallest singular value {svals[-1]:.3e})"
        )
    return svals


def _osim_from(h, j, what):
    """(J H^-1 J^T)^-1 via a Cholesky solve of H; never forms H^-1.  The
    result is symmetrized to remove asymmetric round-off."""
    _check_rank(j, what)
    cho = scipy.linalg.cho_factor(h)
    x = scipy.linalg.cho_solve(cho, j.T)
    a = j @ x
    lam = np.linalg.solve(a, np.eye(a.shape[0]))
    return 0.5 * (lam + lam.T)


def osim(model, state, frame, fk=None, mass=None, jac=None):
    """Operational-space inertia Lambda at a contact frame (world axes)."""
    if fk is None:
        fk = forward_kinematics(model, state)
    h = (mass or mass_matrix(model, state, fk=fk)).full
    j = (jac or contact_jacobian(model, state, frame, fk=fk)).full
    return _osim_from(h, j, f"contact Jacobian of '{frame}'")


def osim_locked(model, state, frame, fk=None, mass=None, jac=None):
    """Locked-joint operational-space inertia Lambda_L (base block only)."""
    if fk is None:
        fk = forward_kinematics(model, state)
    h = (mass or mass_matrix(model, state, fk=fk)).full
    j = (jac or contact_jacobian(model, state, frame, fk=fk)).full
    return _osim_from(h[:6, :6], j[:, :6], f"base Jacobian of '{frame}'")


def imf_reward(xi):
    """-log(1 - xi), clamped at xi = 1 - 1e-9 so the value stays finite.

    Monotone increasing on [0, 1], zero at xi = 0.  xi outside [0, 1] beyond a
    1e-12 slack is a domain error.
    """
    if not -_XI_DOMAIN_SLACK <= xi <= 1.0 + _XI_DOMAIN_SLACK:
        raise ValueError(f"xi must lie in [0, 1], got {xi!r}")
    clamped = min(max(xi, 0.0), XI_CLAMP)
    return -math.log1p(-clamped)


def impact_mitigation(model, state, frame, fk=None, mass=None, jac=None):
    """Full mitigation analysis for one contact frame.

    Xi = I - Lambda Lambda_L^-1 and xi = det(Xi) (LU determinant; Xi need not
    be symmetric).  Eigenvalues of Lambda Lambda_L^-1 lie in (0, 1], hence
    xi in [0, 1): 0 means the robot hits like the locked rigid body, 1 would
    mean the joint dynamics absorb the impact completely.
    """
    if fk is None:
        fk = forward_kinematics(model, state)
    h = (mass or mass_matrix(model, state, fk=fk)).full
    j = (jac or contact_jacobian(model, state, frame, fk=fk)).full
    lam = _osim_from(h, j, f"contact Jacobian of '{frame}'")
    lam_locked = _osim_from(h[:6, :6], j[:, :6], f"base Jacobian of '{frame}'")
    # Lambda Lambda_L^-1 = (Lambda_L^-1 Lambda)^T because both are symmetric
    ratio = scipy.linalg.solve(lam_locked, lam, assume_a="pos").T
    xi_matrix = np.eye(lam.shape[0]) - ratio
    xi = float(np.linalg.det(xi_matrix))
    return ImfResult(
        frame=frame,
        lam=lam,
        lam_locked=lam_locked,
        xi_matrix=xi_matrix,
        xi=xi,
        reward=imf_reward(xi),
    )
